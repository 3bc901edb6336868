use super::{BlockView, PolicyConfig, ReclaimAction, ReclaimPolicy};
use crate::device::WlGroup;
use crate::disturbance::Rpt;

/// Block read count that is safe under the worst access pattern: every read
/// hits a neighbour of the weakest WL of the oldest PEC bucket.
pub fn derive_block_threshold(rpt: &Rpt) -> u64 {
    let pec = rpt.last_bucket();
    WlGroup::ALL
        .iter()
        .map(|&g| {
            let (erc_max, alpha) = rpt.lookup(pec, g);
            erc_max * 10 / u64::from(alpha.tenths())
        })
        .min()
        .unwrap()
        .max(1)
}

/// Conventional read reclaim: rewrite the whole block once its read count
/// reaches a fixed threshold.
#[derive(Debug, Clone)]
pub struct BlockPolicy {
    threshold: u64,
}

impl BlockPolicy {
    pub fn new(cfg: &PolicyConfig, rpt: &Rpt) -> Self {
        BlockPolicy {
            threshold: cfg.block_rr_threshold.unwrap_or_else(|| derive_block_threshold(rpt)),
        }
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }
}

impl ReclaimPolicy for BlockPolicy {
    fn name(&self) -> &'static str {
        "BLOCK"
    }

    fn after_read(&self, view: &BlockView<'_>) -> ReclaimAction {
        if view.counter.query_block() >= self.threshold {
            ReclaimAction::Block
        } else {
            ReclaimAction::None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counters::{ExactRec, ReadCounter};
    use crate::disturbance::{Alpha, RptEntry};

    fn single(erc_max: u64, alpha: u16) -> Rpt {
        let entries: Vec<RptEntry> = WlGroup::ALL
            .iter()
            .map(|&group| RptEntry {
                pec_bucket: 0,
                group,
                erc_max,
                alpha: Alpha::from_tenths(alpha).unwrap(),
            })
            .collect();
        Rpt::new(&entries).unwrap()
    }

    #[test]
    fn reference_threshold_is_worst_case_read_count() {
        assert_eq!(derive_block_threshold(&Rpt::reference()), 54_560);
    }

    #[test]
    fn simple_threshold() {
        assert_eq!(derive_block_threshold(&single(100, 100)), 10);
    }

    #[test]
    fn threshold_monotonicity() {
        for erc in [50u64, 100, 1000, 12345] {
            for alpha in [10u16, 35, 87, 120] {
                let t = derive_block_threshold(&single(erc, alpha));
                assert!(derive_block_threshold(&single(erc + 100, alpha)) >= t);
                assert!(derive_block_threshold(&single(erc, alpha + 5)) <= t);
            }
        }
    }

    #[test]
    fn triggers_on_the_threshold_read() {
        let policy = BlockPolicy::new(
            &PolicyConfig {
                name: "BLOCK".into(),
                block_rr_threshold: Some(3),
                check_interval: 1,
            },
            &Rpt::reference(),
        );
        let mut rec = ExactRec::new(4);
        let groups = [WlGroup::Good; 4];
        let live = |_: usize| true;
        let mut actions = Vec::new();
        for _ in 0..3 {
            rec.record_read(1);
            let view = BlockView {
                block: 0,
                pec: 0,
                counter: &rec,
                groups: &groups,
                live: &live,
            };
            actions.push(policy.after_read(&view));
        }
        assert_eq!(actions, [ReclaimAction::None, ReclaimAction::None, ReclaimAction::Block]);
    }
}
