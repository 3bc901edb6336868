//! Page-level FTL with greedy garbage collection and pluggable read reclaim.
//!
//! The FTL is a functional state machine: every call updates the mapping,
//! the ground-truth device and the read counters immediately, and queues the
//! flash commands it implies in [`Ftl::take_ops`] for the timing engine.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::counters::{CounterConfig, CounterRegistry, ReadCounter, COUNTER_LIMIT};
use crate::device::{Device, WlGroup};
use crate::disturbance::Rpt;
use crate::error::{ConfigError, SimError};
use crate::geometry::{Geometry, PhysAddr};
use crate::policy::{identify_disturbed_wls, BlockView, ReclaimAction, ReclaimPolicy};

const UNMAPPED: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FtlConfig {
    /// Fraction of physical pages hidden from the host.
    pub over_provisioning: f64,
    /// GC runs while fewer than this fraction of blocks are free (at least 2 blocks).
    pub gc_watermark: f64,
}

impl Default for FtlConfig {
    fn default() -> Self {
        FtlConfig {
            over_provisioning: 0.07,
            gc_watermark: 0.02,
        }
    }
}

impl FtlConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..1.0).contains(&self.over_provisioning) {
            return Err(ConfigError::invalid("ftl.over_provisioning", "must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.gc_watermark) {
            return Err(ConfigError::invalid("ftl.gc_watermark", "must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn logical_pages(&self, geometry: &Geometry) -> u64 {
        (geometry.total_pages() as f64 * (1.0 - self.over_provisioning)).floor() as u64
    }

    fn watermark_blocks(&self, geometry: &Geometry) -> usize {
        ((geometry.total_blocks() as f64 * self.gc_watermark).ceil() as usize).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RrCause {
    BlockRr,
    WlRr,
    Gc,
}

impl fmt::Display for RrCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RrCause::BlockRr => "block_rr",
            RrCause::WlRr => "wl_rr",
            RrCause::Gc => "gc",
        })
    }
}

/// One data-migration episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrEvent {
    pub timestamp_us: f64,
    pub cause: RrCause,
    pub block: usize,
    pub wl: Option<usize>,
    pub pages_copied: usize,
}

/// Who asked for a flash command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpCause {
    Host,
    Gc,
    ReadReclaim,
}

/// Flash command implied by an FTL call, in issue order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlashOp {
    /// Read `from`, then program the data at `to`.
    Copy { from: u32, to: u32, cause: OpCause },
    Erase { block: usize, cause: OpCause },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FtlStats {
    pub host_reads: u64,
    pub unmapped_reads: u64,
    pub host_writes: u64,
    pub precondition_writes: u64,
    pub programs: u64,
    pub gc_copies: u64,
    pub rr_block_copies: u64,
    pub rr_wl_copies: u64,
    pub erases: u64,
    pub corruption_events: u64,
    /// Free pages abandoned when a partly programmed WL was reclaimed.
    pub skipped_pages: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockState {
    Free,
    Active,
    Full,
}

#[derive(Debug)]
struct BlockInfo {
    state: BlockState,
    valid: FixedBitSet,
    valid_count: usize,
    wl_valid: Vec<u16>,
    write_ptr: usize,
    counter: Box<dyn ReadCounter>,
}

impl BlockInfo {
    /// WL `wl` has programmed pages and the write pointer sits inside it.
    fn is_partial(&self, wl: usize, pages_per_wl: usize) -> bool {
        self.state == BlockState::Active
            && self.write_ptr > wl * pages_per_wl
            && self.write_ptr < (wl + 1) * pages_per_wl
    }

    fn is_live(&self, wl: usize, pages_per_wl: usize) -> bool {
        self.wl_valid[wl] > 0 || self.is_partial(wl, pages_per_wl)
    }
}

pub struct Ftl {
    geometry: Geometry,
    cfg: FtlConfig,
    logical_pages: u64,
    l2p: Vec<u32>,
    p2l: Vec<u32>,
    blocks: Vec<BlockInfo>,
    free: Vec<VecDeque<usize>>,
    active: Vec<Option<usize>>,
    next_plane: usize,
    device: Device,
    groups: Vec<Vec<WlGroup>>,
    policy: Box<dyn ReclaimPolicy>,
    rpt: Arc<Rpt>,
    check_interval: u64,
    ops: Vec<FlashOp>,
    events: Vec<RrEvent>,
    stats: FtlStats,
    now_ns: u64,
}

impl fmt::Debug for Ftl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ftl")
            .field("geometry", &self.geometry)
            .field("policy", &self.policy.name())
            .field("stats", &self.stats)
            .finish_non_exhaustive()
    }
}

/// Everything needed to assemble an [`Ftl`].
pub struct FtlParts<'a> {
    pub geometry: Geometry,
    pub ftl: FtlConfig,
    pub device: Device,
    pub policy: Box<dyn ReclaimPolicy>,
    pub rpt: Arc<Rpt>,
    pub check_interval: u64,
    pub counters: &'a CounterConfig,
    pub counter_registry: &'a CounterRegistry,
}

impl Ftl {
    pub fn new(parts: FtlParts<'_>) -> Result<Self, ConfigError> {
        let g = parts.geometry;
        let ppb = g.pages_per_block();
        let mut blocks = Vec::with_capacity(g.total_blocks());
        for _ in 0..g.total_blocks() {
            blocks.push(BlockInfo {
                state: BlockState::Free,
                valid: FixedBitSet::with_capacity(ppb),
                valid_count: 0,
                wl_valid: vec![0; g.wls_per_block],
                write_ptr: 0,
                counter: parts.counter_registry.build(parts.counters, g.wls_per_block)?,
            });
        }
        let free = (0..g.planes())
            .map(|p| {
                let first = g.first_block_of_plane(p);
                (first..first + g.blocks_per_plane).collect()
            })
            .collect();
        let groups = parts.device.blocks().iter().map(|b| b.groups()).collect();
        let logical_pages = parts.ftl.logical_pages(&g);
        Ok(Ftl {
            geometry: g,
            logical_pages,
            cfg: parts.ftl,
            l2p: vec![UNMAPPED; logical_pages as usize],
            p2l: vec![UNMAPPED; g.total_pages() as usize],
            blocks,
            free,
            active: vec![None; g.planes()],
            next_plane: 0,
            device: parts.device,
            groups,
            policy: parts.policy,
            rpt: parts.rpt,
            check_interval: parts.check_interval,
            ops: Vec::new(),
            events: Vec::new(),
            stats: FtlStats::default(),
            now_ns: 0,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn logical_pages(&self) -> u64 {
        self.logical_pages
    }

    pub fn stats(&self) -> &FtlStats {
        &self.stats
    }

    pub fn events(&self) -> &[RrEvent] {
        &self.events
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn policy_name(&self) -> &'static str {
        self.policy.name()
    }

    /// Sets the clock used to timestamp migration events.
    pub fn set_time(&mut self, now_ns: u64) {
        self.now_ns = now_ns;
    }

    /// Drains the flash commands queued since the last call.
    pub fn take_ops(&mut self) -> Vec<FlashOp> {
        std::mem::take(&mut self.ops)
    }

    pub fn lookup(&self, lpn: u64) -> Option<u32> {
        let ppn = *self.l2p.get(lpn as usize)?;
        (ppn != UNMAPPED).then_some(ppn)
    }

    pub fn addr(&self, ppn: u32) -> PhysAddr {
        PhysAddr::from_ppn(&self.geometry, ppn)
    }

    pub fn block_state(&self, block: usize) -> BlockState {
        self.blocks[block].state
    }

    pub fn valid_count(&self, block: usize) -> usize {
        self.blocks[block].valid_count
    }

    pub fn wl_valid(&self, block: usize, wl: usize) -> usize {
        self.blocks[block].wl_valid[wl] as usize
    }

    pub fn block_read_count(&self, block: usize) -> u64 {
        self.blocks[block].counter.query_block()
    }

    pub fn wl_read_count(&self, block: usize, wl: usize) -> u64 {
        self.blocks[block].counter.query_wl(wl)
    }

    pub fn block_pec(&self, block: usize) -> u32 {
        self.device.block(block).pec
    }

    pub fn free_blocks(&self) -> usize {
        self.free.iter().map(VecDeque::len).sum()
    }

    fn block_of(&self, ppn: u32) -> (usize, usize, usize) {
        let ppb = self.geometry.pages_per_block();
        let block = ppn as usize / ppb;
        let offset = ppn as usize % ppb;
        (block, offset / self.geometry.pages_per_wl, offset)
    }

    fn ppn_of(&self, block: usize, offset: usize) -> u32 {
        (block * self.geometry.pages_per_block() + offset) as u32
    }

    /// Host read of one logical page. Returns the physical page read, or
    /// `None` for an unmapped page (zero-filled without touching flash).
    pub fn host_read(&mut self, lpn: u64) -> Result<Option<u32>, SimError> {
        self.stats.host_reads += 1;
        let Some(ppn) = self.lookup(lpn) else {
            self.stats.unmapped_reads += 1;
            return Ok(None);
        };
        let (block, wl, _) = self.block_of(ppn);

        let crossed = self.device.block_mut(block).apply_read_stress(wl);
        for victim in crossed {
            if self.blocks[block].wl_valid[victim] > 0 {
                log::debug!("block {block} wl {victim} lost data");
                self.stats.corruption_events += 1;
            }
        }

        let info = &mut self.blocks[block];
        info.counter.record_read(wl);
        if info.counter.query_block() > COUNTER_LIMIT {
            return Err(SimError::CounterSaturated { block });
        }

        let action = {
            let ppw = self.geometry.pages_per_wl;
            let info = &self.blocks[block];
            let live = |w: usize| info.is_live(w, ppw);
            let view = BlockView {
                block,
                pec: self.device.block(block).pec,
                counter: info.counter.as_ref(),
                groups: &self.groups[block],
                live: &live,
            };
            self.policy.after_read(&view)
        };
        match action {
            ReclaimAction::None => {}
            ReclaimAction::Block => {
                self.reclaim_block(block)?;
                self.collect_garbage()?;
            }
            ReclaimAction::Wordlines(wls) => {
                self.reclaim_wls(block, &wls)?;
                self.collect_garbage()?;
            }
        }
        Ok(Some(ppn))
    }

    /// Host write of one logical page; returns the programmed physical page.
    pub fn host_write(&mut self, lpn: u64) -> Result<u32, SimError> {
        self.check_lpn(lpn)?;
        self.collect_garbage()?;
        self.stats.host_writes += 1;
        self.write_lpn(lpn)
    }

    /// Initial fill write: mapped like a host write but not counted as one and
    /// not timed.
    pub fn precondition_write(&mut self, lpn: u64) -> Result<(), SimError> {
        self.check_lpn(lpn)?;
        self.collect_garbage()?;
        self.stats.precondition_writes += 1;
        self.write_lpn(lpn)?;
        self.ops.clear();
        Ok(())
    }

    fn check_lpn(&self, lpn: u64) -> Result<(), SimError> {
        if lpn >= self.logical_pages {
            return Err(ConfigError::invalid(
                "workload",
                format!("logical page {lpn} beyond capacity {}", self.logical_pages),
            )
            .into());
        }
        Ok(())
    }

    fn write_lpn(&mut self, lpn: u64) -> Result<u32, SimError> {
        let old = self.l2p[lpn as usize];
        if old != UNMAPPED {
            self.invalidate(old);
        }
        let ppn = self.allocate_page()?;
        self.program(ppn, lpn);
        Ok(ppn)
    }

    fn invalidate(&mut self, ppn: u32) {
        let (block, wl, offset) = self.block_of(ppn);
        let info = &mut self.blocks[block];
        debug_assert!(info.valid.contains(offset));
        info.valid.set(offset, false);
        info.valid_count -= 1;
        info.wl_valid[wl] -= 1;
        self.p2l[ppn as usize] = UNMAPPED;
    }

    fn program(&mut self, ppn: u32, lpn: u64) {
        let (block, wl, offset) = self.block_of(ppn);
        if offset % self.geometry.pages_per_wl == 0 {
            self.device.block_mut(block).mark_programmed(wl);
        } else if self.device.block(block).wls()[wl].is_corrupted() {
            log::debug!("block {block} wl {wl} programmed while over its limit");
            self.stats.corruption_events += 1;
        }
        let info = &mut self.blocks[block];
        info.valid.insert(offset);
        info.valid_count += 1;
        info.wl_valid[wl] += 1;
        self.p2l[ppn as usize] = lpn as u32;
        self.l2p[lpn as usize] = ppn;
        self.stats.programs += 1;
    }

    /// Next free page, striping across planes round-robin.
    fn allocate_page(&mut self) -> Result<u32, SimError> {
        let planes = self.geometry.planes();
        let ppb = self.geometry.pages_per_block();
        for step in 0..planes {
            let plane = (self.next_plane + step) % planes;
            let block = match self.active[plane] {
                Some(b) => b,
                None => match self.free[plane].pop_front() {
                    Some(b) => {
                        self.blocks[b].state = BlockState::Active;
                        self.active[plane] = Some(b);
                        b
                    }
                    None => continue,
                },
            };
            let info = &mut self.blocks[block];
            let offset = info.write_ptr;
            info.write_ptr += 1;
            if info.write_ptr == ppb {
                info.state = BlockState::Full;
                self.active[plane] = None;
            }
            self.next_plane = (plane + 1) % planes;
            return Ok(self.ppn_of(block, offset));
        }
        Err(SimError::DeviceFull)
    }

    fn close_if_active(&mut self, block: usize) {
        if self.blocks[block].state == BlockState::Active {
            let plane = self.geometry.plane_of(block);
            self.active[plane] = None;
            let info = &mut self.blocks[block];
            let ppb = self.geometry.pages_per_block();
            self.stats.skipped_pages += (ppb - info.write_ptr) as u64;
            info.write_ptr = ppb;
            info.state = BlockState::Full;
        }
    }

    fn relocate(&mut self, from: u32, cause: OpCause) -> Result<(), SimError> {
        let lpn = self.p2l[from as usize];
        debug_assert_ne!(lpn, UNMAPPED);
        self.invalidate(from);
        let to = self.allocate_page()?;
        self.program(to, u64::from(lpn));
        self.ops.push(FlashOp::Copy { from, to, cause });
        Ok(())
    }

    fn valid_ppns(&self, block: usize, range: std::ops::Range<usize>) -> Vec<u32> {
        let info = &self.blocks[block];
        range
            .filter(|&off| info.valid.contains(off))
            .map(|off| self.ppn_of(block, off))
            .collect()
    }

    fn erase(&mut self, block: usize, cause: OpCause) {
        debug_assert_eq!(self.blocks[block].valid_count, 0);
        self.device.erase(block);
        let info = &mut self.blocks[block];
        info.counter.reset();
        info.valid.clear();
        info.write_ptr = 0;
        info.state = BlockState::Free;
        self.free[self.geometry.plane_of(block)].push_back(block);
        self.stats.erases += 1;
        self.ops.push(FlashOp::Erase { block, cause });
    }

    fn push_event(&mut self, cause: RrCause, block: usize, wl: Option<usize>, pages_copied: usize) -> RrEvent {
        let ev = RrEvent {
            timestamp_us: self.now_ns as f64 / 1000.0,
            cause,
            block,
            wl,
            pages_copied,
        };
        self.events.push(ev.clone());
        ev
    }

    /// Copies every valid page out of `block` and erases it.
    pub fn reclaim_block(&mut self, block: usize) -> Result<RrEvent, SimError> {
        self.close_if_active(block);
        let pages = self.valid_ppns(block, 0..self.geometry.pages_per_block());
        for &ppn in &pages {
            self.relocate(ppn, OpCause::ReadReclaim)?;
        }
        self.stats.rr_block_copies += pages.len() as u64;
        self.erase(block, OpCause::ReadReclaim);
        Ok(self.push_event(RrCause::BlockRr, block, None, pages.len()))
    }

    /// Copies the valid pages of one WL elsewhere. The block's read counters
    /// are left untouched. A partly programmed WL is also closed so no new
    /// data lands on it.
    pub fn reclaim_wl(&mut self, block: usize, wl: usize) -> Result<RrEvent, SimError> {
        let ppw = self.geometry.pages_per_wl;
        if self.blocks[block].is_partial(wl, ppw) {
            let info = &mut self.blocks[block];
            let end = (wl + 1) * ppw;
            self.stats.skipped_pages += (end - info.write_ptr) as u64;
            info.write_ptr = end;
            if end == self.geometry.pages_per_block() {
                info.state = BlockState::Full;
                self.active[self.geometry.plane_of(block)] = None;
            }
        }
        let pages = self.valid_ppns(block, wl * ppw..(wl + 1) * ppw);
        for &ppn in &pages {
            self.relocate(ppn, OpCause::ReadReclaim)?;
        }
        self.stats.rr_wl_copies += pages.len() as u64;
        Ok(self.push_event(RrCause::WlRr, block, Some(wl), pages.len()))
    }

    /// WLs of `block` the stress-aware check would reclaim right now.
    pub fn identify_disturbed_wls(&self, block: usize) -> Vec<usize> {
        let ppw = self.geometry.pages_per_wl;
        let info = &self.blocks[block];
        let live = |w: usize| info.is_live(w, ppw);
        let view = BlockView {
            block,
            pec: self.device.block(block).pec,
            counter: info.counter.as_ref(),
            groups: &self.groups[block],
            live: &live,
        };
        identify_disturbed_wls(&view, &self.rpt, self.check_interval)
    }

    /// Identifies and reclaims the heavily disturbed WLs of `block`, erasing
    /// the block if nothing valid is left.
    pub fn rr_check(&mut self, block: usize) -> Result<Vec<RrEvent>, SimError> {
        let wls = self.identify_disturbed_wls(block);
        self.reclaim_wls(block, &wls)
    }

    fn reclaim_wls(&mut self, block: usize, wls: &[usize]) -> Result<Vec<RrEvent>, SimError> {
        let mut events = Vec::with_capacity(wls.len());
        for &wl in wls {
            events.push(self.reclaim_wl(block, wl)?);
        }
        let info = &self.blocks[block];
        if !wls.is_empty() && info.state == BlockState::Full && info.valid_count == 0 {
            self.erase(block, OpCause::ReadReclaim);
        }
        Ok(events)
    }

    /// Greedy victim: the full block with the fewest valid pages, lowest id on ties.
    pub fn gc_victim(&self) -> Option<usize> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.state == BlockState::Full)
            .min_by_key(|(i, b)| (b.valid_count, *i))
            .map(|(i, _)| i)
    }

    fn collect_garbage(&mut self) -> Result<(), SimError> {
        let watermark = self.cfg.watermark_blocks(&self.geometry);
        let ppb = self.geometry.pages_per_block();
        while self.free_blocks() < watermark {
            let Some(victim) = self.gc_victim() else { break };
            if self.blocks[victim].valid_count >= ppb {
                break;
            }
            let pages = self.valid_ppns(victim, 0..ppb);
            for &ppn in &pages {
                self.relocate(ppn, OpCause::Gc)?;
            }
            self.stats.gc_copies += pages.len() as u64;
            self.erase(victim, OpCause::Gc);
            self.push_event(RrCause::Gc, victim, None, pages.len());
        }
        Ok(())
    }

    /// Cross-checks the mapping tables; returns a description of the first
    /// inconsistency found.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut live = 0usize;
        for (lpn, &ppn) in self.l2p.iter().enumerate() {
            if ppn == UNMAPPED {
                continue;
            }
            live += 1;
            if self.p2l[ppn as usize] as usize != lpn {
                return Err(format!("lpn {lpn} -> ppn {ppn} but p2l says {}", self.p2l[ppn as usize]));
            }
        }
        let mut valid_total = 0usize;
        let ppw = self.geometry.pages_per_wl;
        for (b, info) in self.blocks.iter().enumerate() {
            if info.valid.count_ones(..) != info.valid_count {
                return Err(format!("block {b}: bitmap popcount differs from valid count"));
            }
            for (wl, &n) in info.wl_valid.iter().enumerate() {
                let bits = info.valid.count_ones(wl * ppw..(wl + 1) * ppw);
                if bits != n as usize {
                    return Err(format!("block {b} wl {wl}: {n} valid recorded, {bits} in bitmap"));
                }
            }
            for off in info.valid.ones() {
                let ppn = self.ppn_of(b, off);
                let lpn = self.p2l[ppn as usize];
                if lpn == UNMAPPED || self.l2p[lpn as usize] != ppn {
                    return Err(format!("ppn {ppn} valid but not mapped back"));
                }
                if off >= info.write_ptr {
                    return Err(format!("ppn {ppn} valid beyond write pointer"));
                }
            }
            if info.state == BlockState::Free && info.valid_count != 0 {
                return Err(format!("free block {b} holds valid pages"));
            }
            valid_total += info.valid_count;
        }
        if valid_total != live {
            return Err(format!("{valid_total} valid pages but {live} mapped lpns"));
        }
        let s = &self.stats;
        let copies = s.gc_copies + s.rr_block_copies + s.rr_wl_copies;
        if s.programs != s.precondition_writes + s.host_writes + copies {
            return Err("program count does not match writes plus copies".into());
        }
        Ok(())
    }
}
