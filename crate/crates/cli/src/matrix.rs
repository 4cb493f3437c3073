//! Configuration files and the run matrix they describe.
//!
//! On top of the scenario keys, a file may set `matrix.modes`,
//! `matrix.mitigation` and `matrix.attackers` as comma-separated lists.

use std::path::Path;

use wbsn_core::simnet::{parse_bool, parse_kv, ScenarioConfig, SchemeMode};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunMatrix {
    pub modes: Vec<SchemeMode>,
    pub mitigation: Vec<bool>,
    pub attacker_counts: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl RunMatrix {
    /// Every mode, mitigation on and off, the base config's attacker count,
    /// and `n_runs` consecutive seeds from the base seed.
    pub fn defaults_for(base: &ScenarioConfig) -> Self {
        RunMatrix {
            modes: SchemeMode::ALL.to_vec(),
            mitigation: vec![true, false],
            attacker_counts: vec![base.attacker_count],
            seeds: (0..base.n_runs as u64).map(|i| base.seed + i).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.modes.is_empty()
            || self.mitigation.is_empty()
            || self.attacker_counts.is_empty()
            || self.seeds.is_empty()
        {
            return Err(CliError::Config("every run matrix dimension needs at least one value".into()));
        }
        Ok(())
    }

    /// Cells in output order: mode, then mitigation, then attackers, then seed.
    pub fn cells(&self, base: &ScenarioConfig) -> Vec<ScenarioConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &scheme_mode in &self.modes {
            for &mitigation_on in &self.mitigation {
                for &attacker_count in &self.attacker_counts {
                    for &seed in &self.seeds {
                        out.push(ScenarioConfig { scheme_mode, mitigation_on, attacker_count, seed, ..base.clone() });
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.modes.len() * self.mitigation.len() * self.attacker_counts.len() * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    let items: Vec<T> =
        value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

/// Parses configuration text. `seed` and `runs` override `sim.seed` and
/// `sim.n_runs`.
pub fn parse_config(
    text: &str,
    seed: Option<u64>,
    runs: Option<usize>,
) -> Result<(ScenarioConfig, RunMatrix), CliError> {
    let mut base = ScenarioConfig::default();
    let mut modes = None;
    let mut mitigation = None;
    let mut attackers = None;
    for entry in parse_kv(text)? {
        let (key, value) = (entry.key.as_str(), entry.value.as_str());
        match key {
            "matrix.modes" => {
                modes = Some(list(key, value, |s| s.parse::<SchemeMode>().map_err(CliError::Config))?);
            }
            "matrix.mitigation" => {
                mitigation = Some(list(key, value, |s| parse_bool(key, s).map_err(CliError::from))?);
            }
            "matrix.attackers" => {
                attackers = Some(list(key, value, |s| {
                    s.parse::<usize>().map_err(|_| CliError::Config(format!("{key}: bad count '{s}'")))
                })?);
            }
            _ => {
                if !base.set(key, value)? {
                    return Err(CliError::Config(format!("line {}: unknown key '{key}'", entry.line)));
                }
            }
        }
    }
    if let Some(s) = seed {
        base.seed = s;
    }
    if let Some(r) = runs {
        base.n_runs = r;
    }
    base.validate()?;
    let defaults = RunMatrix::defaults_for(&base);
    let matrix = RunMatrix {
        modes: modes.unwrap_or(defaults.modes),
        mitigation: mitigation.unwrap_or(defaults.mitigation),
        attacker_counts: attackers.unwrap_or(defaults.attacker_counts),
        seeds: defaults.seeds,
    };
    matrix.validate()?;
    Ok((base, matrix))
}

pub fn load_config(
    path: &Path,
    seed: Option<u64>,
    runs: Option<usize>,
) -> Result<(ScenarioConfig, RunMatrix), CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, seed, runs)
}
