//! Wall-clock timing of record sealing and opening by plaintext size.
//!
//! Sizes are measured in interleaved rounds so slow drift in machine load
//! spreads evenly over the ladder. Operations are timed in small batches;
//! the reported mean is total time over total operations and p50 is the
//! median of per-batch averages.

use std::fmt::Write as _;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbsn_core::crypto::{kdf, open_record, seal_record};

use crate::CliError;

pub const TIMING_HEADER: &str = "size_bytes,encrypt_ns_mean,encrypt_ns_p50,decrypt_ns_mean,decrypt_ns_p50";
pub const DEFAULT_SIZES: [usize; 6] = [5, 10, 20, 40, 80, 160];
pub const DEFAULT_ITERATIONS: u64 = 100_000;
/// Published 10-byte encryption time, for side-by-side reporting only.
pub const REFERENCE_10_BYTE_NS: f64 = 160.0;

const ROUNDS: u64 = 20;
const BATCH: u64 = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchSpec {
    pub sizes: Vec<usize>,
    pub iterations: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec { sizes: DEFAULT_SIZES.to_vec(), iterations: DEFAULT_ITERATIONS }
    }
}

impl BenchSpec {
    pub fn new(sizes: Vec<usize>, iterations: u64) -> Result<Self, CliError> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(CliError::Config("bench sizes must be a non-empty list of positive integers".into()));
        }
        if iterations == 0 {
            return Err(CliError::Config("bench iterations must be at least 1".into()));
        }
        Ok(BenchSpec { sizes, iterations })
    }

    pub fn parse_sizes(csv: &str) -> Result<Vec<usize>, CliError> {
        csv.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| CliError::Config(format!("bad size '{s}'"))))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub size_bytes: usize,
    pub encrypt_ns_mean: f64,
    pub encrypt_ns_p50: f64,
    pub decrypt_ns_mean: f64,
    pub decrypt_ns_p50: f64,
}

#[derive(Default)]
struct Samples {
    total_ns: f64,
    ops: u64,
    batch_means: Vec<f64>,
}

impl Samples {
    fn add(&mut self, ns: f64, ops: u64) {
        self.total_ns += ns;
        self.ops += ops;
        self.batch_means.push(ns / ops as f64);
    }

    fn mean(&self) -> f64 {
        self.total_ns / self.ops as f64
    }

    fn p50(&mut self) -> f64 {
        self.batch_means.sort_by(f64::total_cmp);
        self.batch_means[(self.batch_means.len() - 1) / 2]
    }
}

pub fn run_bench(spec: &BenchSpec) -> Vec<TimingRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB37C);
    let key = kdf(b"bench session secret", b"bench").expect("nonempty secret");
    let inputs: Vec<(Vec<u8>, [u8; 16])> = spec
        .sizes
        .iter()
        .map(|&n| {
            let mut pt = vec![0u8; n];
            rng.fill_bytes(&mut pt);
            let mut nonce = [0u8; 16];
            rng.fill_bytes(&mut nonce);
            (pt, nonce)
        })
        .collect();
    let records: Vec<_> = inputs.iter().map(|(pt, nonce)| seal_record(&key, nonce, pt)).collect();
    let mut enc: Vec<Samples> = spec.sizes.iter().map(|_| Samples::default()).collect();
    let mut dec: Vec<Samples> = spec.sizes.iter().map(|_| Samples::default()).collect();

    // warm-up
    for ((pt, nonce), rec) in inputs.iter().zip(&records) {
        for _ in 0..BATCH {
            black_box(seal_record(&key, nonce, black_box(pt)));
            black_box(open_record(&key, black_box(rec)).ok());
        }
    }

    let rounds = ROUNDS.min(spec.iterations);
    for round in 0..rounds {
        let per_round = spec.iterations / rounds + u64::from(round < spec.iterations % rounds);
        for (i, ((pt, nonce), rec)) in inputs.iter().zip(&records).enumerate() {
            let mut left = per_round;
            while left > 0 {
                let n = left.min(BATCH);
                let t = Instant::now();
                for _ in 0..n {
                    black_box(seal_record(&key, nonce, black_box(pt)));
                }
                enc[i].add(t.elapsed().as_nanos() as f64, n);
                let t = Instant::now();
                for _ in 0..n {
                    black_box(open_record(&key, black_box(rec)).ok());
                }
                dec[i].add(t.elapsed().as_nanos() as f64, n);
                left -= n;
            }
        }
    }

    spec.sizes
        .iter()
        .zip(enc.iter_mut().zip(dec.iter_mut()))
        .map(|(&size_bytes, (e, d))| TimingRow {
            size_bytes,
            encrypt_ns_mean: e.mean(),
            encrypt_ns_p50: e.p50(),
            decrypt_ns_mean: d.mean(),
            decrypt_ns_p50: d.p50(),
        })
        .collect()
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(TIMING_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:.1},{:.1},{:.1},{:.1}",
            r.size_bytes, r.encrypt_ns_mean, r.encrypt_ns_p50, r.decrypt_ns_mean, r.decrypt_ns_p50
        )
        .unwrap();
    }
    out
}

/// Lines for the terminal: the 10-byte measurement next to the published
/// reference figure.
pub fn reference_note(rows: &[TimingRow]) -> String {
    match rows.iter().find(|r| r.size_bytes == 10) {
        Some(r) => format!(
            "10-byte encrypt mean: {:.1} ns (published reference: {REFERENCE_10_BYTE_NS:.0} ns; hardware-dependent, not directly comparable)",
            r.encrypt_ns_mean
        ),
        None => format!("no 10-byte row measured (published reference: {REFERENCE_10_BYTE_NS:.0} ns; hardware-dependent)"),
    }
}

pub fn cmd_bench(spec: &BenchSpec, out_dir: &Path) -> Result<Vec<TimingRow>, CliError> {
    let rows = run_bench(spec);
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("timing.csv"), timing_csv(&rows))?;
    Ok(rows)
}
