//! Discrete-event timing model around the FTL.
//!
//! Each die serves a FIFO command queue. Channels and the host link are
//! shared transfer resources reserved greedily when a command starts, so a
//! command's completion time is known as soon as it is dispatched.

mod report;
mod stats;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

pub use report::{write_events_csv, RrCopies, RunOutput, SimReport};
pub use stats::{LatencyStats, LatencySummary, EXACT_SAMPLE_LIMIT};

use crate::config::{Registries, RunConfig, WorkloadSource};
use crate::device::Device;
use crate::error::{SimError, TraceError};
use crate::ftl::{FlashOp, Ftl, FtlParts};
use crate::geometry::{Geometry, TimingParams};
use crate::workload::{parse_trace, Op, TraceFormat, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    HostRead { req: usize },
    HostProgram { req: usize },
    CopyRead { to: u32 },
    CopyProgram,
    Erase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    DieFree { die: usize },
    CopyReady { to: u32 },
    PageDone { req: usize },
    Arrival,
}

impl EventKind {
    /// Completions run before arrivals at the same instant.
    fn class(self) -> u8 {
        match self {
            EventKind::Arrival => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    class: u8,
    seq: u64,
    kind: EventKind,
}

#[derive(Debug)]
struct Request {
    arrival: u64,
    op: Op,
    pending: u32,
}

#[derive(Debug, Default)]
struct Die {
    queue: VecDeque<Cmd>,
    busy: bool,
}

/// Replay mode for host requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replay {
    /// Requests arrive at their trace timestamps.
    OpenLoop,
    /// This many requests are kept outstanding; timestamps are ignored.
    ClosedLoop(usize),
}

/// Timing engine driving one [`Ftl`].
pub struct Engine {
    ftl: Ftl,
    geometry: Geometry,
    t_read: u64,
    t_prog: u64,
    t_erase: u64,
    channel_xfer: u64,
    host_xfer: u64,
    now: u64,
    seq: u64,
    events: BinaryHeap<Reverse<Event>>,
    dies: Vec<Die>,
    channel_free: Vec<u64>,
    host_free: u64,
    requests: Vec<Option<Request>>,
    free_slots: Vec<usize>,
    pending: VecDeque<TraceRecord>,
    read_latency: LatencyStats,
    write_latency: LatencyStats,
}

impl Engine {
    pub fn new(ftl: Ftl, timing: &TimingParams) -> Self {
        let geometry = *ftl.geometry();
        Engine {
            t_read: TimingParams::us_to_ns(timing.t_read_us),
            t_prog: TimingParams::us_to_ns(timing.t_prog_us),
            t_erase: TimingParams::us_to_ns(timing.t_erase_us),
            channel_xfer: TimingParams::transfer_ns(geometry.page_size, timing.channel_bw),
            host_xfer: TimingParams::transfer_ns(geometry.page_size, timing.host_bw),
            dies: (0..geometry.dies()).map(|_| Die::default()).collect(),
            channel_free: vec![0; geometry.channels],
            geometry,
            ftl,
            now: 0,
            seq: 0,
            events: BinaryHeap::new(),
            host_free: 0,
            requests: Vec::new(),
            free_slots: Vec::new(),
            pending: VecDeque::new(),
            read_latency: LatencyStats::new(),
            write_latency: LatencyStats::new(),
        }
    }

    pub fn ftl(&self) -> &Ftl {
        &self.ftl
    }

    pub fn ftl_mut(&mut self) -> &mut Ftl {
        &mut self.ftl
    }

    /// Current simulated time in ns.
    pub fn now_ns(&self) -> u64 {
        self.now
    }

    /// Writes each page once, untimed, so later reads find data.
    pub fn precondition(&mut self, lpns: impl IntoIterator<Item = u64>) -> Result<(), SimError> {
        for lpn in lpns {
            self.ftl.precondition_write(lpn)?;
        }
        Ok(())
    }

    /// Replays `records` to completion.
    pub fn replay<I>(&mut self, records: I, mode: Replay) -> Result<(), SimError>
    where
        I: IntoIterator<Item = TraceRecord>,
    {
        let mut records = records.into_iter();
        match mode {
            Replay::OpenLoop => {
                if let Some(r) = records.next() {
                    self.schedule_arrival(r, true);
                }
            }
            Replay::ClosedLoop(depth) => {
                for r in records.by_ref().take(depth) {
                    self.schedule_arrival(r, false);
                }
            }
        }
        while let Some(Reverse(ev)) = self.events.pop() {
            debug_assert!(ev.time >= self.now, "clock went backwards");
            self.now = ev.time;
            match ev.kind {
                EventKind::Arrival => {
                    let rec = self.pending.pop_front().expect("arrival without a record");
                    if mode == Replay::OpenLoop {
                        if let Some(next) = records.next() {
                            self.schedule_arrival(next, true);
                        }
                    }
                    self.admit(rec)?;
                }
                EventKind::DieFree { die } => {
                    self.dies[die].busy = false;
                    self.dispatch(die);
                }
                EventKind::CopyReady { to } => {
                    let die = self.die_of_ppn(to);
                    self.dies[die].queue.push_back(Cmd::CopyProgram);
                    self.dispatch(die);
                }
                EventKind::PageDone { req } => {
                    if self.page_done(req) {
                        if let Replay::ClosedLoop(_) = mode {
                            if let Some(next) = records.next() {
                                self.schedule_arrival(next, false);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn into_parts(self) -> (Ftl, LatencyStats, LatencyStats, u64) {
        (self.ftl, self.read_latency, self.write_latency, self.now)
    }

    fn push(&mut self, time: u64, kind: EventKind) {
        self.seq += 1;
        self.events.push(Reverse(Event {
            time,
            class: kind.class(),
            seq: self.seq,
            kind,
        }));
    }

    fn schedule_arrival(&mut self, rec: TraceRecord, timed: bool) {
        let at = if timed {
            TimingParams::us_to_ns(rec.timestamp_us).max(self.now)
        } else {
            self.now
        };
        self.pending.push_back(rec);
        self.push(at, EventKind::Arrival);
    }

    fn die_of_ppn(&self, ppn: u32) -> usize {
        self.geometry.die_of(ppn as usize / self.geometry.pages_per_block())
    }

    fn admit(&mut self, rec: TraceRecord) -> Result<(), SimError> {
        let req = Request {
            arrival: self.now,
            op: rec.op,
            pending: rec.length,
        };
        let id = match self.free_slots.pop() {
            Some(slot) => {
                self.requests[slot] = Some(req);
                slot
            }
            None => {
                self.requests.push(Some(req));
                self.requests.len() - 1
            }
        };
        self.ftl.set_time(self.now);
        let logical = self.ftl.logical_pages();
        let mut touched = BTreeSet::new();
        for lpn in rec.pages(logical) {
            match rec.op {
                Op::Read => {
                    match self.ftl.host_read(lpn)? {
                        Some(ppn) => {
                            let die = self.die_of_ppn(ppn);
                            self.dies[die].queue.push_back(Cmd::HostRead { req: id });
                            touched.insert(die);
                        }
                        None => self.push(self.now, EventKind::PageDone { req: id }),
                    }
                    self.enqueue_ops(&mut touched);
                }
                Op::Write => {
                    let ppn = self.ftl.host_write(lpn)?;
                    self.enqueue_ops(&mut touched);
                    let die = self.die_of_ppn(ppn);
                    self.dies[die].queue.push_back(Cmd::HostProgram { req: id });
                    touched.insert(die);
                }
            }
        }
        for die in touched {
            self.dispatch(die);
        }
        Ok(())
    }

    fn enqueue_ops(&mut self, touched: &mut BTreeSet<usize>) {
        for op in self.ftl.take_ops() {
            let (die, cmd) = match op {
                FlashOp::Copy { from, to, .. } => (self.die_of_ppn(from), Cmd::CopyRead { to }),
                FlashOp::Erase { block, .. } => (self.geometry.die_of(block), Cmd::Erase),
            };
            self.dies[die].queue.push_back(cmd);
            touched.insert(die);
        }
    }

    /// Reserves the die's channel for one page transfer starting no earlier
    /// than `earliest`; returns the transfer end.
    fn transfer(&mut self, die: usize, earliest: u64) -> u64 {
        let ch = self.geometry.channel_of_die(die);
        let start = earliest.max(self.channel_free[ch]);
        self.channel_free[ch] = start + self.channel_xfer;
        self.channel_free[ch]
    }

    fn host_transfer(&mut self, earliest: u64) -> u64 {
        let start = earliest.max(self.host_free);
        self.host_free = start + self.host_xfer;
        self.host_free
    }

    fn dispatch(&mut self, die: usize) {
        if self.dies[die].busy {
            return;
        }
        let Some(cmd) = self.dies[die].queue.pop_front() else {
            return;
        };
        self.dies[die].busy = true;
        let now = self.now;
        let free_at = match cmd {
            Cmd::HostRead { req } => {
                let out = self.transfer(die, now + self.t_read);
                let done = self.host_transfer(out);
                self.push(done, EventKind::PageDone { req });
                out
            }
            Cmd::HostProgram { req } => {
                let inbound = self.host_transfer(now);
                let done = self.transfer(die, inbound) + self.t_prog;
                self.push(done, EventKind::PageDone { req });
                done
            }
            Cmd::CopyRead { to } => {
                let out = self.transfer(die, now + self.t_read);
                self.push(out, EventKind::CopyReady { to });
                out
            }
            Cmd::CopyProgram => self.transfer(die, now) + self.t_prog,
            Cmd::Erase => now + self.t_erase,
        };
        self.push(free_at, EventKind::DieFree { die });
    }

    /// Returns true when this finished the whole request.
    fn page_done(&mut self, id: usize) -> bool {
        let req = self.requests[id].as_mut().expect("live request");
        req.pending -= 1;
        if req.pending > 0 {
            return false;
        }
        let latency = self.now - req.arrival;
        match req.op {
            Op::Read => self.read_latency.record(latency),
            Op::Write => self.write_latency.record(latency),
        }
        self.requests[id] = None;
        self.free_slots.push(id);
        true
    }
}

/// Builds the device, policy and FTL described by `cfg`.
pub fn build_ftl(cfg: &RunConfig, registries: &Registries) -> Result<Ftl, SimError> {
    cfg.validate(registries)?;
    let rpt = Arc::new(cfg.resolve_rpt()?);
    let reliability = cfg.resolved_reliability();
    let device = Device::new(
        &cfg.geometry,
        &reliability,
        reliability.seed.expect("seed resolved"),
        cfg.initial_pec,
    );
    let policy = registries.policies.build(&cfg.policy, rpt.clone())?;
    Ok(Ftl::new(FtlParts {
        geometry: cfg.geometry,
        ftl: cfg.ftl.clone(),
        device,
        policy,
        rpt,
        check_interval: cfg.policy.check_interval,
        counters: &cfg.counters,
        counter_registry: &registries.counters,
    })?)
}

/// Runs the configured workload end to end.
pub fn run_simulation(cfg: &RunConfig, registries: &Registries) -> Result<RunOutput, SimError> {
    let ftl = build_ftl(cfg, registries)?;
    let logical = ftl.logical_pages();
    let mut engine = Engine::new(ftl, &cfg.timing);
    let mode = match cfg.workload.closed_loop_depth {
        Some(depth) => Replay::ClosedLoop(depth),
        None => Replay::OpenLoop,
    };
    match cfg.workload.source(logical, cfg.seed)? {
        WorkloadSource::Synthetic(spec) => {
            if cfg.workload.precondition {
                engine.precondition(0..spec.footprint)?;
            }
            engine.replay(spec.iter(), mode)?;
        }
        WorkloadSource::Trace { path, device_id } => {
            let file = File::open(&path).map_err(TraceError::from)?;
            let format = TraceFormat {
                page_size: cfg.geometry.page_size,
                device_id,
                logical_pages: logical,
            };
            let records = parse_trace(BufReader::new(file), &format)?;
            if cfg.workload.precondition {
                let pages: BTreeSet<u64> = records.iter().flat_map(|r| r.pages(logical)).collect();
                engine.precondition(pages)?;
            }
            engine.replay(records, mode)?;
        }
    }
    let workload_hash = cfg.workload_hash()?;
    let footprint = registries.counters.footprint_bytes(&cfg.geometry, &cfg.counters)?;
    Ok(SimReport::assemble(cfg, engine, workload_hash, footprint))
}
