use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Engine, LatencySummary};
use crate::config::RunConfig;
use crate::ftl::{RrCause, RrEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RrCopies {
    pub block_rr: u64,
    pub wl_rr: u64,
}

impl RrCopies {
    pub fn total(&self) -> u64 {
        self.block_rr + self.wl_rr
    }
}

/// Outcome of one run. Read and write counts are in pages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub name: String,
    pub policy: String,
    pub counter_backend: String,
    pub workload_hash: String,
    pub total_reads: u64,
    pub total_writes: u64,
    pub rr_page_copies: RrCopies,
    pub gc_page_copies: u64,
    pub erases: u64,
    pub corruption_events: u64,
    pub read_latency_us: LatencySummary,
    pub write_latency_us: LatencySummary,
    pub counter_footprint_bytes: u64,
    pub failed: bool,
    pub unmapped_reads: u64,
    pub precondition_writes: u64,
    pub block_rr_events: u64,
    pub wl_rr_events: u64,
    pub gc_events: u64,
    pub skipped_pages: u64,
    pub simulated_time_us: f64,
    /// Fully resolved configuration of the run.
    pub config: serde_json::Value,
}

/// A report plus the migration log it summarizes.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: SimReport,
    pub events: Vec<RrEvent>,
}

impl SimReport {
    pub(super) fn assemble(cfg: &RunConfig, engine: Engine, workload_hash: String, footprint: u64) -> RunOutput {
        let (ftl, mut reads, mut writes, end) = engine.into_parts();
        let s = ftl.stats();
        assert_eq!(
            s.programs,
            s.precondition_writes + s.host_writes + s.gc_copies + s.rr_block_copies + s.rr_wl_copies,
            "every program is a host write, a precondition write or a copy"
        );
        let count = |c: RrCause| ftl.events().iter().filter(|e| e.cause == c).count() as u64;
        let report = SimReport {
            name: cfg.name.clone(),
            policy: ftl.policy_name().to_string(),
            counter_backend: cfg.counters.backend.clone(),
            workload_hash,
            total_reads: s.host_reads,
            total_writes: s.host_writes,
            rr_page_copies: RrCopies {
                block_rr: s.rr_block_copies,
                wl_rr: s.rr_wl_copies,
            },
            gc_page_copies: s.gc_copies,
            erases: s.erases,
            corruption_events: s.corruption_events,
            read_latency_us: reads.summary(),
            write_latency_us: writes.summary(),
            counter_footprint_bytes: footprint,
            failed: s.corruption_events > 0,
            unmapped_reads: s.unmapped_reads,
            precondition_writes: s.precondition_writes,
            block_rr_events: count(RrCause::BlockRr),
            wl_rr_events: count(RrCause::WlRr),
            gc_events: count(RrCause::Gc),
            skipped_pages: s.skipped_pages,
            simulated_time_us: end as f64 / 1000.0,
            config: serde_json::to_value(cfg).expect("config serializes"),
        };
        RunOutput {
            report,
            events: ftl.events().to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<SimReport> {
        serde_json::from_str(text)
    }

    /// Scalar fields as `(column, value)` pairs, in a fixed order.
    pub fn scalar_fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            ("name", self.name.clone()),
            ("policy", self.policy.clone()),
            ("counter_backend", self.counter_backend.clone()),
            ("workload_hash", self.workload_hash.clone()),
            ("total_reads", self.total_reads.to_string()),
            ("total_writes", self.total_writes.to_string()),
            ("rr_page_copies_block_rr", self.rr_page_copies.block_rr.to_string()),
            ("rr_page_copies_wl_rr", self.rr_page_copies.wl_rr.to_string()),
            ("gc_page_copies", self.gc_page_copies.to_string()),
            ("erases", self.erases.to_string()),
            ("corruption_events", self.corruption_events.to_string()),
            ("read_p50_us", opt(self.read_latency_us.p50)),
            ("read_p99_us", opt(self.read_latency_us.p99)),
            ("read_p999_us", opt(self.read_latency_us.p999)),
            ("read_max_us", opt(self.read_latency_us.max)),
            ("read_mean_us", opt(self.read_latency_us.mean)),
            ("counter_footprint_bytes", self.counter_footprint_bytes.to_string()),
            ("failed", self.failed.to_string()),
            ("block_rr_events", self.block_rr_events.to_string()),
            ("wl_rr_events", self.wl_rr_events.to_string()),
            ("gc_events", self.gc_events.to_string()),
            ("simulated_time_us", self.simulated_time_us.to_string()),
        ]
    }
}

/// Writes the migration log as `timestamp_us,cause,block,wl,pages_copied`.
pub fn write_events_csv<W: Write>(out: W, events: &[RrEvent]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp_us", "cause", "block", "wl", "pages_copied"])?;
    for e in events {
        w.write_record([
            e.timestamp_us.to_string(),
            e.cause.to_string(),
            e.block.to_string(),
            e.wl.map(|w| w.to_string()).unwrap_or_default(),
            e.pages_copied.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
