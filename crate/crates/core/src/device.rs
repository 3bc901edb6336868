//! Hidden ground-truth read-disturbance physics.
//!
//! Every WL carries a true tolerance and a true disturbance rate that the FTL
//! never sees. Policies only see the WL group labels and the RPT; this module
//! decides whether data was actually lost.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::disturbance::{Alpha, EffectiveReads, Rpt, RptEntry};
use crate::error::ConfigError;
use crate::geometry::Geometry;

/// Tolerance class of a WL within its block, strongest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WlGroup {
    Best,
    Good,
    Bad,
    Worst,
}

impl WlGroup {
    pub const ALL: [WlGroup; 4] = [WlGroup::Best, WlGroup::Good, WlGroup::Bad, WlGroup::Worst];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Quantile band `[lo, hi)` of the tolerance distribution this group covers.
    fn band(self) -> (f64, f64) {
        match self {
            WlGroup::Worst => (0.0, 0.25),
            WlGroup::Bad => (0.25, 0.5),
            WlGroup::Good => (0.5, 0.75),
            WlGroup::Best => (0.75, 1.0),
        }
    }
}

impl fmt::Display for WlGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceDistribution {
    Uniform,
    /// Normal centred on the range midpoint with sigma = range / 4, truncated to the range.
    TruncatedNormal,
}

/// Tolerance multiplier applied to blocks whose PEC falls in a bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PecScale {
    pub pec_bucket: u32,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReliabilityConfig {
    pub tolerance_min: u64,
    pub tolerance_max: u64,
    pub alpha_mean: f64,
    /// Relative half-width of the per-WL alpha range.
    pub alpha_spread: f64,
    pub distribution: ToleranceDistribution,
    /// Ground-truth seed; the run seed is used when absent.
    pub seed: Option<u64>,
    pub symmetric_mode: bool,
    pub pec_degradation: Vec<PecScale>,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        ReliabilityConfig {
            tolerance_min: 403_000,
            tolerance_max: 962_000,
            alpha_mean: 8.4,
            alpha_spread: 0.1,
            distribution: ToleranceDistribution::Uniform,
            seed: None,
            symmetric_mode: false,
            pec_degradation: vec![
                PecScale {
                    pec_bucket: 1000,
                    factor: 1.0,
                },
                PecScale {
                    pec_bucket: 2000,
                    factor: 0.85,
                },
            ],
        }
    }
}

fn scaled(base: u64, factor: f64) -> u64 {
    (base as f64 * factor + 1e-6).floor() as u64
}

impl ReliabilityConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tolerance_min > self.tolerance_max {
            return Err(ConfigError::invalid(
                "reliability.tolerance_min",
                "must not exceed tolerance_max",
            ));
        }
        if self.tolerance_min == 0 {
            return Err(ConfigError::invalid("reliability.tolerance_min", "must be positive"));
        }
        if !(self.alpha_mean.is_finite() && self.alpha_mean >= 1.0) {
            return Err(ConfigError::invalid("reliability.alpha_mean", "must be at least 1.0"));
        }
        if !(0.0..1.0).contains(&self.alpha_spread) {
            return Err(ConfigError::invalid("reliability.alpha_spread", "must be in [0, 1)"));
        }
        let mut prev: Option<&PecScale> = None;
        for scale in &self.pec_degradation {
            if !(scale.factor > 0.0 && scale.factor <= 1.0) {
                return Err(ConfigError::invalid(
                    "reliability.pec_degradation",
                    format!("factor {} must be in (0, 1]", scale.factor),
                ));
            }
            if let Some(p) = prev {
                if scale.pec_bucket <= p.pec_bucket || scale.factor > p.factor {
                    return Err(ConfigError::invalid(
                        "reliability.pec_degradation",
                        "buckets must be strictly ascending with non-increasing factors",
                    ));
                }
            }
            prev = Some(scale);
        }
        Ok(())
    }

    /// Tolerance multiplier for a block at `pec`.
    pub fn scale_at(&self, pec: u32) -> f64 {
        match self.pec_degradation.iter().find(|s| s.pec_bucket >= pec) {
            Some(s) => s.factor,
            None => self.pec_degradation.last().map_or(1.0, |s| s.factor),
        }
    }

    pub fn median_tolerance(&self) -> u64 {
        (self.tolerance_min + self.tolerance_max) / 2
    }

    /// Inverse CDF of the configured tolerance distribution.
    fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = (self.tolerance_min as f64, self.tolerance_max as f64);
        if hi <= lo {
            return lo;
        }
        let x = match self.distribution {
            ToleranceDistribution::Uniform => lo + u * (hi - lo),
            ToleranceDistribution::TruncatedNormal => {
                let mu = (lo + hi) / 2.0;
                let sigma = (hi - lo) / 4.0;
                let normal = Normal::new(mu, sigma).expect("sigma is positive");
                let (a, b) = (normal.cdf(lo), normal.cdf(hi));
                normal.inverse_cdf(a + u * (b - a))
            }
        };
        x.clamp(lo, hi)
    }

    /// Smallest base tolerance a WL of `group` can be assigned.
    pub fn group_floor(&self, group: WlGroup) -> u64 {
        if self.symmetric_mode {
            return self.median_tolerance();
        }
        self.quantile(group.band().0).floor() as u64
    }

    /// Inclusive range of sampled per-WL alphas.
    pub fn alpha_range(&self) -> (Alpha, Alpha) {
        if self.symmetric_mode {
            return (Alpha::ONE, Alpha::ONE);
        }
        let lo = self.alpha_mean * (1.0 - self.alpha_spread) * 10.0;
        let hi = self.alpha_mean * (1.0 + self.alpha_spread) * 10.0;
        let (mut lo_t, mut hi_t) = ((lo - 1e-9).ceil(), (hi + 1e-9).floor());
        if lo_t > hi_t {
            lo_t = (self.alpha_mean * 10.0).round();
            hi_t = lo_t;
        }
        let clamp = |t: f64| Alpha::from_tenths(t.max(10.0) as u16).unwrap();
        (clamp(lo_t), clamp(hi_t))
    }

    /// Policy-visible table derived from this ground truth: every erc_max is
    /// `margin` times the weakest tolerance its group can hold at that PEC,
    /// and every alpha is the largest sampled alpha.
    pub fn derive_rpt(&self, margin: f64) -> Result<Rpt, ConfigError> {
        if !(margin > 0.0 && margin <= 1.0) {
            return Err(ConfigError::Rpt(format!("margin {margin} must be in (0, 1]")));
        }
        let alpha = self.alpha_range().1;
        let buckets: Vec<(u32, f64)> = if self.pec_degradation.is_empty() {
            vec![(0, 1.0)]
        } else {
            self.pec_degradation.iter().map(|s| (s.pec_bucket, s.factor)).collect()
        };
        let mut entries = Vec::new();
        for (pec_bucket, factor) in buckets {
            for group in WlGroup::ALL {
                let floor = scaled(self.group_floor(group), factor);
                entries.push(RptEntry {
                    pec_bucket,
                    group,
                    erc_max: (floor as f64 * margin).floor() as u64,
                    alpha,
                });
            }
        }
        Rpt::new(&entries)
    }
}

/// Ground-truth state of one WL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WlGroundTruth {
    pub group: WlGroup,
    pub base_tolerance: u64,
    /// Tolerance at the block's current PEC, in effective reads.
    pub tolerance: u64,
    pub alpha: Alpha,
    /// Accumulated stress since the last erase, in tenths.
    stress: u64,
    /// Stress already present when the WL was first programmed after erase.
    baseline: u64,
}

impl WlGroundTruth {
    pub fn stress(&self) -> EffectiveReads {
        EffectiveReads::from_tenths(self.stress)
    }

    /// Stress accumulated while the WL held data.
    pub fn data_stress(&self) -> EffectiveReads {
        EffectiveReads::from_tenths(self.stress - self.baseline)
    }

    pub fn is_corrupted(&self) -> bool {
        self.stress - self.baseline > self.tolerance * 10
    }
}

/// Ground truth of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGroundTruth {
    pub pec: u32,
    wls: Vec<WlGroundTruth>,
}

impl BlockGroundTruth {
    /// Samples a block's WLs deterministically from `(seed, block_id)`.
    ///
    /// WLs are split into four equal-sized groups at random and each group draws
    /// its tolerances from its own quartile band of the distribution, so the
    /// group labels are exactly the tolerance quartiles of the block.
    pub fn init(block_id: usize, wls: usize, cfg: &ReliabilityConfig, seed: u64, pec: u32) -> Self {
        let scale = cfg.scale_at(pec);
        if cfg.symmetric_mode {
            let tol = cfg.median_tolerance();
            let wls = (0..wls)
                .map(|i| WlGroundTruth {
                    group: WlGroup::ALL[3 - (i * 4 / wls)],
                    base_tolerance: tol,
                    tolerance: scaled(tol, scale),
                    alpha: Alpha::ONE,
                    stress: 0,
                    baseline: 0,
                })
                .collect();
            return BlockGroundTruth { pec, wls };
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block_id as u64);

        let mut order: Vec<usize> = (0..wls).collect();
        order.shuffle(&mut rng);
        let mut groups = vec![WlGroup::Worst; wls];
        let mut cursor = 0;
        for (g, group) in WlGroup::ALL.iter().enumerate() {
            let count = wls / 4 + usize::from(g < wls % 4);
            for &wl in &order[cursor..cursor + count] {
                groups[wl] = *group;
            }
            cursor += count;
        }

        let (alpha_lo, alpha_hi) = cfg.alpha_range();
        let (lo_f, hi_f) = (
            cfg.alpha_mean * (1.0 - cfg.alpha_spread) * 10.0,
            cfg.alpha_mean * (1.0 + cfg.alpha_spread) * 10.0,
        );
        let wls = groups
            .into_iter()
            .map(|group| {
                let (band_lo, band_hi) = group.band();
                let u = band_lo + rng.gen::<f64>() * (band_hi - band_lo);
                let base = (cfg.quantile(u).floor() as u64).max(cfg.group_floor(group));
                let raw = lo_f + rng.gen::<f64>() * (hi_f - lo_f);
                let tenths = raw.round().clamp(f64::from(alpha_lo.tenths()), f64::from(alpha_hi.tenths()));
                WlGroundTruth {
                    group,
                    base_tolerance: base,
                    tolerance: scaled(base, scale),
                    alpha: Alpha::from_tenths(tenths as u16).unwrap(),
                    stress: 0,
                    baseline: 0,
                }
            })
            .collect();
        BlockGroundTruth { pec, wls }
    }

    pub fn wls(&self) -> &[WlGroundTruth] {
        &self.wls
    }

    pub fn groups(&self) -> Vec<WlGroup> {
        self.wls.iter().map(|w| w.group).collect()
    }

    /// Applies the pass-through stress of one read of `target` to every other
    /// WL of the block. Returns the WLs whose data stress crossed their
    /// tolerance because of this read.
    pub fn apply_read_stress(&mut self, target: usize) -> Vec<usize> {
        assert!(target < self.wls.len(), "wordline {target} out of range");
        let mut crossed = Vec::new();
        for (j, wl) in self.wls.iter_mut().enumerate() {
            if j == target {
                continue;
            }
            let delta = if j.abs_diff(target) == 1 {
                u64::from(wl.alpha.tenths())
            } else {
                10
            };
            let was = wl.is_corrupted();
            wl.stress += delta;
            if !was && wl.is_corrupted() {
                crossed.push(j);
            }
        }
        crossed
    }

    /// WLs whose data stress exceeds their tolerance.
    pub fn check_integrity(&self) -> Vec<usize> {
        self.wls
            .iter()
            .enumerate()
            .filter(|(_, w)| w.is_corrupted())
            .map(|(i, _)| i)
            .collect()
    }

    /// Marks the first program of `wl` since erase: stress from earlier reads
    /// hit an erased WL and does not count against the new data.
    pub fn mark_programmed(&mut self, wl: usize) {
        let w = &mut self.wls[wl];
        w.baseline = w.stress;
    }

    pub fn erase(&mut self, cfg: &ReliabilityConfig) {
        self.pec += 1;
        let scale = cfg.scale_at(self.pec);
        for w in &mut self.wls {
            w.stress = 0;
            w.baseline = 0;
            w.tolerance = scaled(w.base_tolerance, scale);
        }
    }

    #[cfg(test)]
    pub(crate) fn set_stress(&mut self, wl: usize, stress: EffectiveReads) {
        self.wls[wl].stress = stress.tenths();
    }

    #[cfg(test)]
    pub(crate) fn set_alpha(&mut self, wl: usize, alpha: Alpha) {
        self.wls[wl].alpha = alpha;
    }
}

/// Ground truth for every block of the array.
#[derive(Debug, Clone)]
pub struct Device {
    cfg: ReliabilityConfig,
    blocks: Vec<BlockGroundTruth>,
}

impl Device {
    pub fn new(geometry: &Geometry, cfg: &ReliabilityConfig, seed: u64, initial_pec: u32) -> Self {
        let blocks = (0..geometry.total_blocks())
            .map(|b| BlockGroundTruth::init(b, geometry.wls_per_block, cfg, seed, initial_pec))
            .collect();
        Device {
            cfg: cfg.clone(),
            blocks,
        }
    }

    pub fn block(&self, block: usize) -> &BlockGroundTruth {
        &self.blocks[block]
    }

    pub fn block_mut(&mut self, block: usize) -> &mut BlockGroundTruth {
        &mut self.blocks[block]
    }

    pub fn erase(&mut self, block: usize) {
        self.blocks[block].erase(&self.cfg);
    }

    pub fn blocks(&self) -> &[BlockGroundTruth] {
        &self.blocks
    }

    /// Writes `block,wl,group,tolerance,alpha` rows for every WL.
    pub fn write_ground_truth_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["block", "wl", "group", "tolerance", "alpha"])?;
        for (b, block) in self.blocks.iter().enumerate() {
            for (i, wl) in block.wls.iter().enumerate() {
                w.write_record([
                    b.to_string(),
                    i.to_string(),
                    wl.group.to_string(),
                    wl.tolerance.to_string(),
                    wl.alpha.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn tenths(x: u16) -> Alpha {
        Alpha::from_tenths(x).unwrap()
    }

    fn uniform_alpha_block(wls: usize, alpha: Alpha) -> BlockGroundTruth {
        let cfg = ReliabilityConfig::default();
        let mut b = BlockGroundTruth::init(0, wls, &cfg, 1, 0);
        for i in 0..wls {
            b.set_alpha(i, alpha);
        }
        b
    }

    fn stress_reads(b: &BlockGroundTruth) -> Vec<f64> {
        b.wls().iter().map(|w| w.stress().tenths() as f64 / 10.0).collect()
    }

    #[test]
    fn symmetric_mode_uses_median() {
        let cfg = ReliabilityConfig {
            symmetric_mode: true,
            ..Default::default()
        };
        let b = BlockGroundTruth::init(3, 321, &cfg, 9, 0);
        assert!(b.wls().iter().all(|w| w.tolerance == 682_500 && w.alpha == Alpha::ONE));
        assert_eq!(b.wls()[0].group, WlGroup::Worst);
        assert_eq!(b.wls()[320].group, WlGroup::Best);
    }

    #[test]
    fn sampled_blocks_respect_bounds_and_quartiles() {
        let cfg = ReliabilityConfig::default();
        let (alo, ahi) = cfg.alpha_range();
        for block in 0..1000 {
            let b = BlockGroundTruth::init(block, 321, &cfg, 42, 0);
            let mut counts = [0usize; 4];
            for w in b.wls() {
                counts[w.group.index()] += 1;
                assert!((403_000..=962_000).contains(&w.tolerance));
                assert!(w.alpha >= alo && w.alpha <= ahi);
                assert!(w.tolerance >= cfg.group_floor(w.group));
            }
            assert!(counts.iter().all(|&c| c == 80 || c == 81), "{counts:?}");
            // Groups are the tolerance quartiles: every Best WL outlasts every Good WL, etc.
            for pair in WlGroup::ALL.windows(2) {
                let min_better = b.wls().iter().filter(|w| w.group == pair[0]).map(|w| w.tolerance).min();
                let max_worse = b.wls().iter().filter(|w| w.group == pair[1]).map(|w| w.tolerance).max();
                assert!(min_better >= max_worse);
            }
        }
    }

    #[test]
    fn truncated_normal_stays_in_range() {
        let cfg = ReliabilityConfig {
            distribution: ToleranceDistribution::TruncatedNormal,
            ..Default::default()
        };
        for block in 0..50 {
            let b = BlockGroundTruth::init(block, 48, &cfg, 5, 0);
            for w in b.wls() {
                assert!((403_000..=962_000).contains(&w.tolerance));
                assert!(w.tolerance >= cfg.group_floor(w.group));
            }
        }
        // Bands are narrower near the mean.
        let floors: Vec<u64> = WlGroup::ALL.iter().map(|&g| cfg.group_floor(g)).collect();
        assert_eq!(floors[3], 403_000);
        assert_eq!(floors[1], 682_500);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = ReliabilityConfig::default();
        let a = BlockGroundTruth::init(17, 321, &cfg, 77, 0);
        let b = BlockGroundTruth::init(17, 321, &cfg, 77, 0);
        assert_eq!(a, b);
        assert_ne!(a, BlockGroundTruth::init(18, 321, &cfg, 77, 0));
    }

    #[test]
    fn read_stress_interior_and_edge() {
        let mut b = uniform_alpha_block(5, tenths(80));
        b.apply_read_stress(2);
        assert_eq!(stress_reads(&b), [1.0, 8.0, 0.0, 8.0, 1.0]);

        let mut b = uniform_alpha_block(5, tenths(80));
        b.apply_read_stress(0);
        assert_eq!(stress_reads(&b), [0.0, 8.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn hammering_a_neighbour_hits_tolerance_exactly() {
        let mut b = uniform_alpha_block(48, tenths(87));
        b.wls[36].tolerance = 474_672;
        for _ in 0..54_560 {
            assert!(!b.apply_read_stress(35).contains(&36));
        }
        assert_eq!(b.wls()[36].stress(), EffectiveReads::from_reads(474_672));
        assert!(!b.check_integrity().contains(&36));
        let crossed = b.apply_read_stress(35);
        assert!(crossed.contains(&36));
        assert!(b.check_integrity().contains(&36));
    }

    #[test]
    fn integrity_boundary_is_strict() {
        let cfg = ReliabilityConfig::default();
        let mut b = BlockGroundTruth::init(0, 8, &cfg, 1, 0);
        assert!(b.check_integrity().is_empty());
        let tol = b.wls()[4].tolerance;
        b.set_stress(4, EffectiveReads::from_reads(tol));
        assert!(b.check_integrity().is_empty());
        b.set_stress(4, EffectiveReads::from_reads(tol + 1));
        assert_eq!(b.check_integrity(), vec![4]);
    }

    #[test]
    fn programming_discounts_earlier_stress() {
        let mut b = uniform_alpha_block(4, tenths(90));
        let tol = b.wls()[1].tolerance;
        b.set_stress(1, EffectiveReads::from_reads(tol + 5));
        assert_eq!(b.check_integrity(), vec![1]);
        b.mark_programmed(1);
        assert!(b.check_integrity().is_empty());
        assert_eq!(b.wls()[1].data_stress(), EffectiveReads::ZERO);
    }

    #[test]
    fn erase_resets_and_degrades() {
        let cfg = ReliabilityConfig {
            pec_degradation: vec![
                PecScale { pec_bucket: 1000, factor: 1.0 },
                PecScale { pec_bucket: 2000, factor: 0.9 },
            ],
            ..Default::default()
        };
        let mut b = BlockGroundTruth::init(0, 2, &cfg, 3, 1000);
        b.set_stress(0, EffectiveReads::from_reads(5));
        b.set_stress(1, EffectiveReads::from_reads(10));
        let bases: Vec<u64> = b.wls().iter().map(|w| w.base_tolerance).collect();
        assert!(b.wls().iter().zip(&bases).all(|(w, &base)| w.tolerance == base));
        b.erase(&cfg);
        assert_eq!(b.pec, 1001);
        assert!(b.wls().iter().all(|w| w.stress() == EffectiveReads::ZERO));
        for (w, base) in b.wls().iter().zip(bases) {
            assert_eq!(w.tolerance, scaled(base, 0.9));
        }
        let groups = b.groups();
        b.erase(&cfg);
        assert_eq!(b.pec, 1002);
        assert_eq!(b.groups(), groups);
    }

    #[test]
    fn derived_table_never_exceeds_ground_truth() {
        for cfg in [
            ReliabilityConfig::default(),
            ReliabilityConfig {
                distribution: ToleranceDistribution::TruncatedNormal,
                ..Default::default()
            },
            ReliabilityConfig {
                symmetric_mode: true,
                ..Default::default()
            },
        ] {
            let rpt = cfg.derive_rpt(0.95).unwrap();
            for pec in [0, 500, 1000, 1001, 2000, 2500] {
                for block in 0..20 {
                    let b = BlockGroundTruth::init(block, 48, &cfg, 11, pec);
                    for w in b.wls() {
                        let (erc_max, alpha) = rpt.lookup(pec, w.group);
                        assert!(erc_max <= w.tolerance);
                        assert!(alpha >= w.alpha);
                    }
                }
            }
        }
    }

    #[test]
    fn symmetric_derived_threshold_uses_median() {
        let cfg = ReliabilityConfig {
            symmetric_mode: true,
            ..Default::default()
        };
        let rpt = cfg.derive_rpt(1.0).unwrap();
        assert_eq!(rpt.lookup(0, WlGroup::Worst), (682_500, Alpha::ONE));
        assert_eq!(rpt.lookup(2000, WlGroup::Best).0, scaled(682_500, 0.85));
    }

    #[test]
    fn ground_truth_csv() {
        let g = Geometry {
            channels: 1,
            dies_per_channel: 1,
            planes_per_die: 1,
            blocks_per_plane: 2,
            wls_per_block: 3,
            pages_per_wl: 1,
            page_size: 4096,
        };
        let dev = Device::new(&g, &ReliabilityConfig::default(), 1, 0);
        let mut buf = Vec::new();
        dev.write_ground_truth_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "block,wl,group,tolerance,alpha");
        assert_eq!(lines.len(), 7);
        assert!(lines[6].starts_with("1,2,"));
    }

    #[test]
    fn invalid_configs() {
        let bad = ReliabilityConfig {
            tolerance_min: 10,
            tolerance_max: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ReliabilityConfig {
            pec_degradation: vec![
                PecScale { pec_bucket: 1000, factor: 0.8 },
                PecScale { pec_bucket: 2000, factor: 0.9 },
            ],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(ReliabilityConfig::default().validate().is_ok());
    }

    fn block_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
        (3usize..12).prop_flat_map(|w| (Just(w), prop::collection::vec(0..w, 0..200)))
    }

    proptest! {
        #[test]
        fn stress_matches_brute_force_replay((w, reads) in block_strategy(), seed in 0u64..1000) {
            let cfg = ReliabilityConfig::default();
            let mut b = BlockGroundTruth::init(0, w, &cfg, seed, 0);
            let alphas: Vec<u64> = b.wls().iter().map(|x| u64::from(x.alpha.tenths())).collect();
            let mut expected = vec![0u64; w];
            let mut prev_corrupt: Vec<usize> = Vec::new();
            for &t in &reads {
                b.apply_read_stress(t);
                for (j, e) in expected.iter_mut().enumerate() {
                    if j + 1 == t || j == t + 1 {
                        *e += alphas[j];
                    } else if j != t {
                        *e += 10;
                    }
                }
                let now = b.check_integrity();
                prop_assert!(prev_corrupt.iter().all(|c| now.contains(c)));
                prev_corrupt = now;
            }
            let got: Vec<u64> = b.wls().iter().map(|x| x.stress().tenths()).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn symmetric_stress_is_block_minus_own((w, reads) in block_strategy()) {
            let cfg = ReliabilityConfig { symmetric_mode: true, ..Default::default() };
            let mut b = BlockGroundTruth::init(0, w, &cfg, 0, 0);
            let mut own = vec![0u64; w];
            for &t in &reads {
                b.apply_read_stress(t);
                own[t] += 1;
            }
            for (j, wl) in b.wls().iter().enumerate() {
                prop_assert_eq!(wl.stress(), EffectiveReads::from_reads(reads.len() as u64 - own[j]));
            }
        }
    }
}
