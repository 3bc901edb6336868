use std::sync::Arc;

use super::{BlockView, PolicyConfig, ReclaimAction, ReclaimPolicy};
use crate::disturbance::{effective_read_count, is_heavily_disturbed, Rpt};

/// WLs of a block whose effective read count, plus one more interval of
/// worst-case adjacent reads, reaches their group's erc_max.
///
/// Adjacent reads use the upper-bound neighbour counts. The WL's own reads are
/// removed from the non-adjacent count using a lower bound, so approximate
/// counters can only make the estimate larger.
pub fn identify_disturbed_wls(view: &BlockView<'_>, rpt: &Rpt, interval: u64) -> Vec<usize> {
    let counter = view.counter;
    let wls = view.groups.len();
    let block_rc = counter.query_block();
    let neighbour = |wl: Option<usize>| wl.filter(|&w| w < wls).map_or(0, |w| counter.query_wl(w));

    (0..wls)
        .filter(|&wl| (view.live)(wl))
        .filter(|&wl| {
            let prev = neighbour(wl.checked_sub(1));
            let next = neighbour(Some(wl + 1));
            let own = counter.query_wl_floor(wl);
            let r_adj = prev + next;
            let r_nonadj = block_rc.saturating_sub(prev + own + next);
            let (erc_max, alpha) = rpt.lookup(view.pec, view.groups[wl]);
            let erc = effective_read_count(r_adj, r_nonadj, alpha);
            is_heavily_disturbed(erc, erc_max, alpha, interval)
        })
        .collect()
}

/// Per-WL read reclaim driven by the disturbance model: every
/// `check_interval` block reads, reclaim only the WLs close to their limit.
#[derive(Debug, Clone)]
pub struct StressAwareWlPolicy {
    rpt: Arc<Rpt>,
    interval: u64,
}

impl StressAwareWlPolicy {
    pub fn new(cfg: &PolicyConfig, rpt: Arc<Rpt>) -> Self {
        StressAwareWlPolicy {
            rpt,
            interval: cfg.check_interval,
        }
    }
}

impl ReclaimPolicy for StressAwareWlPolicy {
    fn name(&self) -> &'static str {
        "STRAW"
    }

    fn after_read(&self, view: &BlockView<'_>) -> ReclaimAction {
        let rc = view.counter.query_block();
        if rc == 0 || !rc.is_multiple_of(self.interval) {
            return ReclaimAction::None;
        }
        let wls = identify_disturbed_wls(view, &self.rpt, self.interval);
        if wls.is_empty() {
            ReclaimAction::None
        } else {
            ReclaimAction::Wordlines(wls)
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::counters::{ExactRec, ReadCounter, SpaceSavingRec};
    use crate::device::WlGroup;
    use crate::disturbance::{Alpha, RptEntry};

    fn flat_rpt(erc_max: u64, alpha: u16) -> Rpt {
        let entries: Vec<RptEntry> = WlGroup::ALL
            .iter()
            .map(|&group| RptEntry {
                pec_bucket: 2000,
                group,
                erc_max,
                alpha: Alpha::from_tenths(alpha).unwrap(),
            })
            .collect();
        Rpt::new(&entries).unwrap()
    }

    fn identify(counter: &dyn ReadCounter, groups: &[WlGroup], rpt: &Rpt, interval: u64) -> Vec<usize> {
        let live = |_: usize| true;
        let view = BlockView {
            block: 0,
            pec: 2000,
            counter,
            groups,
            live: &live,
        };
        identify_disturbed_wls(&view, rpt, interval)
    }

    #[test]
    fn fresh_block_has_nothing_to_reclaim() {
        let rec = ExactRec::new(48);
        assert!(identify(&rec, &[WlGroup::Worst; 48], &Rpt::reference(), 1000).is_empty());
    }

    #[test]
    fn hammered_wl_flags_its_neighbours() {
        // Worst group: 474,672 / 8.7 = 54,560 adjacent reads.
        let rpt = Rpt::reference();
        let mut groups = [WlGroup::Best; 48];
        groups[34] = WlGroup::Worst;
        groups[36] = WlGroup::Worst;
        let mut rec = ExactRec::new(48);
        let mut first_flag = None;
        for n in 1..=60_000u64 {
            rec.record_read(35);
            if n % 1000 == 0 {
                let flagged = identify(&rec, &groups, &rpt, 1000);
                if !flagged.is_empty() && first_flag.is_none() {
                    assert_eq!(flagged, vec![34, 36]);
                    first_flag = Some(n);
                }
            }
        }
        // 8.7 * (n + 1000) >= 474,672 first holds at n = 53,560; checks run every 1,000 reads.
        assert_eq!(first_flag, Some(54_000));
    }

    #[test]
    fn uniform_reads_stay_below_limit() {
        // Brute-force replay of a round-robin stream over 48 WLs.
        let rpt = Rpt::reference();
        let groups = [WlGroup::Worst; 48];
        let mut rec = ExactRec::new(48);
        let reads = 200_000u64;
        for n in 0..reads {
            rec.record_read((n % 48) as usize);
        }
        let per_wl = reads / 48;
        let worst_erc = (reads - 3 * per_wl) as f64 + 8.7 * (2 * per_wl) as f64;
        assert!(worst_erc + 8_700.0 < 474_672.0);
        assert!(identify(&rec, &groups, &rpt, 1000).is_empty());
    }

    #[test]
    fn edge_wls_have_one_neighbour() {
        let rpt = flat_rpt(100, 100);
        let mut rec = ExactRec::new(4);
        for _ in 0..10 {
            rec.record_read(1);
        }
        // WL 0: 10 adjacent reads * 10 = 100 >= 100.
        assert_eq!(identify(&rec, &[WlGroup::Good; 4], &rpt, 0), vec![0, 2]);
    }

    #[test]
    fn dead_wls_are_skipped() {
        let rpt = flat_rpt(100, 100);
        let mut rec = ExactRec::new(4);
        for _ in 0..10 {
            rec.record_read(1);
        }
        let live = |wl: usize| wl != 2;
        let groups = [WlGroup::Good; 4];
        let view = BlockView {
            block: 0,
            pec: 0,
            counter: &rec,
            groups: &groups,
            live: &live,
        };
        assert_eq!(identify_disturbed_wls(&view, &rpt, 0), vec![0]);
    }

    #[test]
    fn policy_checks_only_on_interval() {
        let rpt = Arc::new(flat_rpt(1500, 10));
        let policy = StressAwareWlPolicy::new(
            &PolicyConfig {
                name: "STRAW".into(),
                block_rr_threshold: None,
                check_interval: 1000,
            },
            rpt,
        );
        let groups = [WlGroup::Good; 3];
        let live = |_: usize| true;
        let mut rec = ExactRec::new(3);
        for n in 1..=1000 {
            rec.record_read(0);
            let view = BlockView {
                block: 0,
                pec: 0,
                counter: &rec,
                groups: &groups,
                live: &live,
            };
            let action = policy.after_read(&view);
            if n < 1000 {
                assert_eq!(action, ReclaimAction::None);
            } else {
                assert_eq!(action, ReclaimAction::Wordlines(vec![1, 2]));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn space_saving_flags_a_superset(
            m in 1usize..16,
            stream in prop::collection::vec(0usize..24, 1..3000),
            erc_max in 50u64..4000,
            alpha in 10u16..120,
            groups in prop::collection::vec(0usize..4, 24),
        ) {
            let rpt = flat_rpt(erc_max, alpha);
            let groups: Vec<WlGroup> = groups.into_iter().map(|g| WlGroup::ALL[g]).collect();
            let mut exact = ExactRec::new(24);
            let mut ss = SpaceSavingRec::new(m);
            for (i, &wl) in stream.iter().enumerate() {
                exact.record_read(wl);
                ss.record_read(wl);
                if i % 97 == 0 || i + 1 == stream.len() {
                    let a = identify(&exact, &groups, &rpt, 10);
                    let b = identify(&ss, &groups, &rpt, 10);
                    prop_assert!(a.iter().all(|wl| b.contains(wl)), "{:?} not within {:?}", a, b);
                }
            }
        }
    }
}
