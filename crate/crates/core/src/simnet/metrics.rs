use crate::dos_filter::DropCounts;

use super::{SchemeMode, SimError};

/// Summary of a latency sample set, in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LatencyStats {
    pub mean: f64,
    pub p50: f64,
    pub p99: f64,
    pub count: u64,
}

impl LatencyStats {
    /// Nearest-rank percentiles. An empty sample set gives all zeros.
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return LatencyStats::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = |q: f64| sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        LatencyStats {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p50: rank(0.50),
            p99: rank(0.99),
            count: sorted.len() as u64,
        }
    }
}

/// Outcome of one scenario run. Packet counts cover legitimate sensor
/// readings only; attack traffic is tallied separately.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub mode: SchemeMode,
    pub mitigation_on: bool,
    pub attacker_count: usize,
    pub seed: u64,
    pub sent: u64,
    pub received: u64,
    pub lost: u64,
    pub attack_sent: u64,
    pub attack_dropped: u64,
    /// Attack packets the server accepted as a valid authentication.
    pub attack_accepted: u64,
    pub throughput_bps: f64,
    pub auth_ok: u64,
    pub auth_fail: u64,
    pub filter_drops: DropCounts,
    pub encrypt_ns: LatencyStats,
    pub decrypt_ns: LatencyStats,
    pub queue_peak: usize,
    pub mean_queue_depth: f64,
    pub events: u64,
}

impl MetricsRecord {
    pub fn loss_fraction(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            self.lost as f64 / self.sent as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub stddev: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stddev = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Summary { mean, stddev }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateMetrics {
    pub runs: usize,
    pub loss_pct: Summary,
    pub throughput_bps: Summary,
    pub sent: Summary,
    pub received: Summary,
    pub lost: Summary,
    pub attack_sent: Summary,
    pub attack_dropped: Summary,
    pub auth_ok: Summary,
    pub auth_fail: Summary,
    pub encrypt_ns_mean: Summary,
    pub decrypt_ns_mean: Summary,
}

pub fn aggregate(records: &[MetricsRecord]) -> Result<AggregateMetrics, SimError> {
    if records.is_empty() {
        return Err(SimError::EmptyInput);
    }
    let over = |f: &dyn Fn(&MetricsRecord) -> f64| Summary::of(&records.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateMetrics {
        runs: records.len(),
        loss_pct: over(&|r| r.loss_fraction() * 100.0),
        throughput_bps: over(&|r| r.throughput_bps),
        sent: over(&|r| r.sent as f64),
        received: over(&|r| r.received as f64),
        lost: over(&|r| r.lost as f64),
        attack_sent: over(&|r| r.attack_sent as f64),
        attack_dropped: over(&|r| r.attack_dropped as f64),
        auth_ok: over(&|r| r.auth_ok as f64),
        auth_fail: over(&|r| r.auth_fail as f64),
        encrypt_ns_mean: over(&|r| r.encrypt_ns.mean),
        decrypt_ns_mean: over(&|r| r.decrypt_ns.mean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(sent: u64, lost: u64, throughput: f64) -> MetricsRecord {
        MetricsRecord {
            mode: SchemeMode::UserBased,
            mitigation_on: true,
            attacker_count: 0,
            seed: 0,
            sent,
            received: sent - lost,
            lost,
            attack_sent: 0,
            attack_dropped: 0,
            attack_accepted: 0,
            throughput_bps: throughput,
            auth_ok: 1,
            auth_fail: 0,
            filter_drops: DropCounts::default(),
            encrypt_ns: LatencyStats::default(),
            decrypt_ns: LatencyStats::default(),
            queue_peak: 0,
            mean_queue_depth: 0.0,
            events: 0,
        }
    }

    #[test]
    fn single_record_has_zero_spread() {
        let a = aggregate(&[record(100, 4, 512.0)]).unwrap();
        assert_eq!(a.loss_pct, Summary { mean: 4.0, stddev: 0.0 });
        assert_eq!(a.throughput_bps, Summary { mean: 512.0, stddev: 0.0 });
    }

    #[test]
    fn mean_loss_of_two_runs() {
        let a = aggregate(&[record(100, 2, 10.0), record(100, 3, 20.0)]).unwrap();
        assert!((a.loss_pct.mean - 2.5).abs() < 1e-12);
        assert!((a.throughput_bps.stddev - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(aggregate(&[]), Err(SimError::EmptyInput)));
    }

    #[test]
    fn percentiles_by_nearest_rank() {
        let samples: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = LatencyStats::from_samples(&samples);
        assert_eq!((s.p50, s.p99, s.mean, s.count), (50.0, 99.0, 50.5, 100));
        assert_eq!(LatencyStats::from_samples(&[7.0]).p99, 7.0);
    }
}
