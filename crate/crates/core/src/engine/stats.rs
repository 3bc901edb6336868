//! Latency sample store with nearest-rank percentiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Exact samples are kept up to this count, then folded into 1 µs bins.
pub const EXACT_SAMPLE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, Default)]
pub struct LatencyStats {
    samples: Vec<u64>,
    /// Bin index (µs) to count, used once the exact store overflows.
    bins: Option<BTreeMap<u64, u64>>,
    count: u64,
    sum_ns: u128,
    max_ns: u64,
    sorted: bool,
}

impl LatencyStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, ns: u64) {
        self.count += 1;
        self.sum_ns += u128::from(ns);
        self.max_ns = self.max_ns.max(ns);
        if let Some(bins) = &mut self.bins {
            *bins.entry(ns / 1000).or_default() += 1;
            return;
        }
        self.samples.push(ns);
        self.sorted = false;
        if self.samples.len() >= EXACT_SAMPLE_LIMIT {
            let mut bins = BTreeMap::new();
            for s in self.samples.drain(..) {
                *bins.entry(s / 1000).or_default() += 1;
            }
            self.samples.shrink_to_fit();
            self.bins = Some(bins);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean_us(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_ns as f64 / self.count as f64 / 1000.0)
    }

    pub fn max_us(&self) -> Option<f64> {
        (self.count > 0).then(|| self.max_ns as f64 / 1000.0)
    }

    /// Nearest-rank percentile in µs: the `ceil(q/100 * N)`-th smallest
    /// sample. `None` when nothing was recorded or `q` is outside (0, 100].
    /// After binning, the answer is the upper edge of the bin holding that
    /// rank, capped at the true maximum.
    pub fn percentile(&mut self, q: f64) -> Option<f64> {
        if self.count == 0 || !(q > 0.0 && q <= 100.0) {
            return None;
        }
        let rank = ((q * self.count as f64 / 100.0) - 1e-9).ceil().max(1.0) as u64;
        if let Some(bins) = &self.bins {
            let mut seen = 0;
            for (&bin, &n) in bins {
                seen += n;
                if seen >= rank {
                    return Some(((bin + 1) * 1000).min(self.max_ns) as f64 / 1000.0);
                }
            }
            return self.max_us();
        }
        if !self.sorted {
            self.samples.sort_unstable();
            self.sorted = true;
        }
        Some(self.samples[rank as usize - 1] as f64 / 1000.0)
    }

    pub fn summary(&mut self) -> LatencySummary {
        LatencySummary {
            p50: self.percentile(50.0),
            p99: self.percentile(99.0),
            p999: self.percentile(99.9),
            max: self.max_us(),
            mean: self.mean_us(),
        }
    }
}

/// Latency digest in µs; fields are `null` when there were no samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub p50: Option<f64>,
    pub p99: Option<f64>,
    pub p999: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}
