use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use wbsn_core::simnet::{aggregate, run_scenario, MetricsRecord, ScenarioConfig, SchemeMode};

use crate::matrix::{load_config, RunMatrix};
use crate::CliError;

pub const METRICS_HEADER: &str = "mode,mitigation,attackers,seed,sent,received,lost,loss_pct,throughput_bps,auth_ok,auth_fail,drop_low_power,drop_identity,drop_rate,encrypt_ns_mean,decrypt_ns_mean";

/// Runs every cell on the worker pool; results come back in matrix order.
pub fn run_matrix(base: &ScenarioConfig, matrix: &RunMatrix) -> Result<Vec<MetricsRecord>, CliError> {
    matrix.cells(base).par_iter().map(run_scenario).collect::<Result<Vec<_>, _>>().map_err(CliError::from)
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

pub fn metrics_row(r: &MetricsRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{:.4},{:.2},{},{},{},{},{},{:.1},{:.1}",
        r.mode,
        on_off(r.mitigation_on),
        r.attacker_count,
        r.seed,
        r.sent,
        r.received,
        r.lost,
        r.loss_fraction() * 100.0,
        r.throughput_bps,
        r.auth_ok,
        r.auth_fail,
        r.filter_drops.low_power,
        r.filter_drops.identity,
        r.filter_drops.rate,
        r.encrypt_ns.mean,
        r.decrypt_ns.mean,
    )
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&metrics_row(r));
        out.push('\n');
    }
    out
}

/// Mean ± sample stddev of loss and throughput per (mode, mitigation,
/// attackers) group.
pub fn summary(records: &[MetricsRecord]) -> Result<String, CliError> {
    let mut groups: BTreeMap<(SchemeMode, bool, usize), Vec<MetricsRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.mode, !r.mitigation_on, r.attacker_count)).or_default().push(r.clone());
    }
    let mut out = String::new();
    writeln!(out, "# crypto_baseline and biometric_baseline are synthetic comparison models").unwrap();
    for ((mode, mitigation_off, attackers), group) in &groups {
        let agg = aggregate(group)?;
        writeln!(
            out,
            "{mode:<19} mitigation={:<3} attackers={attackers:<3} runs={:<3} loss_pct={:.3} ± {:.3}  throughput_bps={:.1} ± {:.1}",
            on_off(!mitigation_off),
            agg.runs,
            agg.loss_pct.mean,
            agg.loss_pct.stddev,
            agg.throughput_bps.mean,
            agg.throughput_bps.stddev,
        )
        .unwrap();
    }
    Ok(out)
}

#[derive(Debug)]
pub struct SimulateOutput {
    pub records: Vec<MetricsRecord>,
    pub metrics_path: PathBuf,
    pub summary_path: PathBuf,
}

pub fn cmd_simulate(
    config: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    runs: Option<usize>,
) -> Result<SimulateOutput, CliError> {
    let (base, matrix) = load_config(config, seed, runs)?;
    let records = run_matrix(&base, &matrix)?;
    fs::create_dir_all(out_dir)?;
    let metrics_path = out_dir.join("metrics.csv");
    let summary_path = out_dir.join("summary.txt");
    fs::write(&metrics_path, metrics_csv(&records))?;
    fs::write(&summary_path, summary(&records)?)?;
    Ok(SimulateOutput { records, metrics_path, summary_path })
}
