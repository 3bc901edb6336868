use super::ReadCounter;

const UNASSIGNED: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    wl: u16,
    count: u64,
}

/// Space-Saving summary over the WL read stream of one block.
///
/// Entries carry no per-entry error term. Replacement picks the entry with the
/// lowest count, lowest slot first, so runs are reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSavingRec {
    block_rc: u64,
    entries: Vec<Entry>,
    /// Set once an assigned entry has been taken over by another WL. Until
    /// then every entry count is exact.
    replaced: bool,
}

impl SpaceSavingRec {
    pub fn new(entries: usize) -> Self {
        assert!(entries >= 1, "space-saving needs at least one entry");
        SpaceSavingRec {
            block_rc: 0,
            entries: vec![
                Entry {
                    wl: UNASSIGNED,
                    count: 0
                };
                entries
            ],
            replaced: false,
        }
    }

    pub fn footprint_bytes(_wls: usize, entries: usize) -> u64 {
        entries as u64 * (2 + 3) + 3
    }

    fn find(&self, wl: usize) -> Option<&Entry> {
        self.entries.iter().find(|e| e.wl as usize == wl && e.wl != UNASSIGNED)
    }

    fn min_count(&self) -> u64 {
        self.entries.iter().map(|e| e.count).min().unwrap_or(0)
    }

    /// `(wl, count)` of assigned entries in slot order.
    pub fn entries(&self) -> Vec<(usize, u64)> {
        self.entries
            .iter()
            .filter(|e| e.wl != UNASSIGNED)
            .map(|e| (e.wl as usize, e.count))
            .collect()
    }

    pub fn capacity(&self) -> usize {
        self.entries.len()
    }
}

impl ReadCounter for SpaceSavingRec {
    fn record_read(&mut self, wl: usize) {
        debug_assert!(wl < UNASSIGNED as usize);
        self.block_rc += 1;
        if let Some(e) = self.entries.iter_mut().find(|e| e.wl as usize == wl) {
            e.count += 1;
            return;
        }
        // Unassigned slots hold count 0, so the lowest-count, lowest-slot
        // entry is the first free slot while one exists.
        let mut victim = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.count < self.entries[victim].count {
                victim = i;
            }
        }
        let e = &mut self.entries[victim];
        if e.wl != UNASSIGNED {
            self.replaced = true;
        }
        e.wl = wl as u16;
        e.count += 1;
    }

    fn query_wl(&self, wl: usize) -> u64 {
        match self.find(wl) {
            Some(e) => e.count,
            None => self.min_count(),
        }
    }

    fn query_wl_floor(&self, wl: usize) -> u64 {
        if self.replaced {
            0
        } else {
            self.find(wl).map_or(0, |e| e.count)
        }
    }

    fn query_block(&self) -> u64 {
        self.block_rc
    }

    fn reset(&mut self) {
        *self = SpaceSavingRec::new(self.entries.len());
    }

    fn backend(&self) -> &'static str {
        "space_saving"
    }
}
