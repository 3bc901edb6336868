use proptest::prelude::*;

use strawsim::engine::build_ftl;
use strawsim::ftl::{BlockState, Ftl};
use strawsim::{run_simulation, Registries, RunConfig};

fn desk_ftl(policy: &str, backend: &str, seed: u64) -> Ftl {
    let mut cfg = RunConfig::desk(100);
    cfg.seed = seed;
    cfg.policy.name = policy.into();
    cfg.counters.backend = backend.into();
    build_ftl(&cfg, &Registries::default()).unwrap()
}

#[derive(Debug, Clone)]
enum HostOp {
    Read(u64),
    Write(u64),
}

fn host_ops(logical: u64) -> impl Strategy<Value = Vec<HostOp>> {
    // Reads are skewed toward a few pages so reclaim actually fires.
    let op = prop_oneof![
        3 => (0..logical).prop_map(HostOp::Write),
        4 => (0..8u64).prop_map(HostOp::Read),
        2 => (0..logical).prop_map(HostOp::Read),
    ];
    prop::collection::vec(op, 1..6000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mapping_stays_consistent(
        policy in prop::sample::select(vec!["BLOCK", "STRAW"]),
        backend in prop::sample::select(vec!["exact", "space_saving"]),
        seed in 0u64..1000,
        ops in host_ops(1400),
    ) {
        let mut ftl = desk_ftl(policy, backend, seed);
        let logical = ftl.logical_pages();
        let mut written = std::collections::HashSet::new();
        for op in ops {
            match op {
                HostOp::Write(lpn) => {
                    let lpn = lpn % logical;
                    let ppn = ftl.host_write(lpn).unwrap();
                    prop_assert_eq!(ftl.lookup(lpn), Some(ppn));
                    written.insert(lpn);
                }
                HostOp::Read(lpn) => {
                    let lpn = lpn % logical;
                    let hit = ftl.host_read(lpn).unwrap();
                    prop_assert_eq!(hit.is_some(), written.contains(&lpn));
                }
            }
            ftl.take_ops();
        }
        if let Err(e) = ftl.check_consistency() {
            return Err(TestCaseError::fail(e));
        }
        for lpn in &written {
            prop_assert!(ftl.lookup(*lpn).is_some(), "lpn {} lost its mapping", lpn);
        }
        prop_assert_eq!(ftl.stats().corruption_events, 0);
    }

    #[test]
    fn reclaimed_block_starts_with_zero_counts(
        backend in prop::sample::select(vec!["exact", "space_saving"]),
        reads in prop::collection::vec(0u64..64, 1..300),
    ) {
        let mut ftl = desk_ftl("STRAW", backend, 7);
        for lpn in 0..200 {
            ftl.host_write(lpn).unwrap();
        }
        for lpn in reads {
            ftl.host_read(lpn).unwrap();
        }
        let block = ftl.addr(ftl.lookup(0).unwrap()).global_block(ftl.geometry());
        let pec = ftl.block_pec(block);
        ftl.reclaim_block(block).unwrap();
        prop_assert_eq!(ftl.block_pec(block), pec + 1);
        prop_assert_eq!(ftl.block_state(block), BlockState::Free);
        prop_assert_eq!(ftl.block_read_count(block), 0);
        for wl in 0..ftl.geometry().wls_per_block {
            prop_assert_eq!(ftl.wl_read_count(block, wl), 0);
        }
        prop_assert!(ftl.check_consistency().is_ok());
    }
}

#[test]
fn straw_never_copies_more_than_block() {
    let registries = Registries::default();
    for preset in ["syn1", "syn2", "hotspot"] {
        for seed in 1..=3 {
            let run = |policy: &str| {
                let mut cfg = RunConfig::desk(100);
                cfg.seed = seed;
                cfg.workload.op_count = 60_000;
                cfg.workload.preset = Some(preset.into());
                cfg.policy.name = policy.into();
                run_simulation(&cfg, &registries).unwrap().report
            };
            let block = run("BLOCK");
            let straw = run("STRAW");
            assert_eq!(block.workload_hash, straw.workload_hash);
            assert!(!block.failed && !straw.failed);
            assert!(
                straw.rr_page_copies.total() <= block.rr_page_copies.total(),
                "{preset}#{seed}: straw {} > block {}",
                straw.rr_page_copies.total(),
                block.rr_page_copies.total()
            );
        }
    }
}
