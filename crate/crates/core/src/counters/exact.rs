use super::ReadCounter;

/// One counter per WL plus the block counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactRec {
    block_rc: u64,
    wl_rc: Vec<u64>,
}

impl ExactRec {
    pub fn new(wls: usize) -> Self {
        ExactRec {
            block_rc: 0,
            wl_rc: vec![0; wls],
        }
    }

    pub fn footprint_bytes(wls: usize, _entries: usize) -> u64 {
        wls as u64 * 3 + 3
    }
}

impl ReadCounter for ExactRec {
    fn record_read(&mut self, wl: usize) {
        self.wl_rc[wl] += 1;
        self.block_rc += 1;
    }

    fn query_wl(&self, wl: usize) -> u64 {
        self.wl_rc[wl]
    }

    fn query_wl_floor(&self, wl: usize) -> u64 {
        self.wl_rc[wl]
    }

    fn query_block(&self) -> u64 {
        self.block_rc
    }

    fn reset(&mut self) {
        self.block_rc = 0;
        self.wl_rc.fill(0);
    }

    fn backend(&self) -> &'static str {
        "exact"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_each_wl() {
        let mut rec = ExactRec::new(4);
        for wl in [0, 0, 1] {
            rec.record_read(wl);
        }
        assert_eq!(rec.query_wl(0), 2);
        assert_eq!(rec.query_wl(1), 1);
        assert_eq!(rec.query_wl(3), 0);
        assert_eq!(rec.query_block(), 3);
        assert_eq!(rec.wl_rc.iter().sum::<u64>(), rec.query_block());
    }

    #[test]
    fn reset_is_idempotent() {
        let mut rec = ExactRec::new(4);
        rec.record_read(2);
        rec.reset();
        rec.reset();
        assert_eq!(rec, ExactRec::new(4));
        rec.record_read(1);
        assert_eq!(rec.query_wl(1), 1);
    }
}
