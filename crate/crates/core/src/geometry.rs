//! Flash array layout and timing parameters.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Physical organization of the flash array.
///
/// Blocks are numbered globally in channel, die, plane, block order, and
/// pages inside a block are numbered in program order (`wl * pages_per_wl + page`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub channels: usize,
    pub dies_per_channel: usize,
    pub planes_per_die: usize,
    pub blocks_per_plane: usize,
    pub wls_per_block: usize,
    pub pages_per_wl: usize,
    pub page_size: u64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            channels: 8,
            dies_per_channel: 4,
            planes_per_die: 4,
            blocks_per_plane: 141,
            wls_per_block: 321,
            pages_per_wl: 24,
            page_size: 16 * 1024,
        }
    }
}

impl Geometry {
    /// Small array used for quick experiments.
    pub fn desk() -> Self {
        Geometry {
            channels: 2,
            dies_per_channel: 1,
            planes_per_die: 2,
            blocks_per_plane: 8,
            wls_per_block: 48,
            pages_per_wl: 4,
            page_size: 16 * 1024,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("geometry.channels", self.channels as u64),
            ("geometry.dies_per_channel", self.dies_per_channel as u64),
            ("geometry.planes_per_die", self.planes_per_die as u64),
            ("geometry.blocks_per_plane", self.blocks_per_plane as u64),
            ("geometry.wls_per_block", self.wls_per_block as u64),
            ("geometry.pages_per_wl", self.pages_per_wl as u64),
            ("geometry.page_size", self.page_size),
        ];
        for (key, value) in fields {
            if value == 0 {
                return Err(ConfigError::invalid(key, "must be at least 1"));
            }
        }
        if self.wls_per_block > u16::MAX as usize {
            return Err(ConfigError::invalid(
                "geometry.wls_per_block",
                "must fit a 16-bit wordline index",
            ));
        }
        if self.total_pages() > u32::MAX as u64 {
            return Err(ConfigError::invalid(
                "geometry",
                "total page count must fit in 32 bits",
            ));
        }
        Ok(())
    }

    pub fn dies(&self) -> usize {
        self.channels * self.dies_per_channel
    }

    pub fn planes(&self) -> usize {
        self.dies() * self.planes_per_die
    }

    pub fn total_blocks(&self) -> usize {
        self.planes() * self.blocks_per_plane
    }

    pub fn pages_per_block(&self) -> usize {
        self.wls_per_block * self.pages_per_wl
    }

    pub fn total_pages(&self) -> u64 {
        self.total_blocks() as u64 * self.pages_per_block() as u64
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.total_pages() * self.page_size
    }

    /// Global plane index of a block.
    pub fn plane_of(&self, block: usize) -> usize {
        block / self.blocks_per_plane
    }

    /// Global die index of a block.
    pub fn die_of(&self, block: usize) -> usize {
        self.plane_of(block) / self.planes_per_die
    }

    pub fn channel_of_die(&self, die: usize) -> usize {
        die / self.dies_per_channel
    }

    /// First global block id belonging to `plane`.
    pub fn first_block_of_plane(&self, plane: usize) -> usize {
        plane * self.blocks_per_plane
    }
}

/// Fully decomposed physical page address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhysAddr {
    pub channel: usize,
    pub die: usize,
    pub plane: usize,
    pub block: usize,
    pub wl: usize,
    pub page: usize,
}

impl PhysAddr {
    /// Decomposes a global physical page number.
    pub fn from_ppn(geometry: &Geometry, ppn: u32) -> Self {
        let ppb = geometry.pages_per_block();
        let global_block = ppn as usize / ppb;
        let offset = ppn as usize % ppb;
        let plane_global = global_block / geometry.blocks_per_plane;
        let die_global = plane_global / geometry.planes_per_die;
        PhysAddr {
            channel: die_global / geometry.dies_per_channel,
            die: die_global % geometry.dies_per_channel,
            plane: plane_global % geometry.planes_per_die,
            block: global_block % geometry.blocks_per_plane,
            wl: offset / geometry.pages_per_wl,
            page: offset % geometry.pages_per_wl,
        }
    }

    pub fn to_ppn(&self, geometry: &Geometry) -> u32 {
        let block = self.global_block(geometry);
        (block * geometry.pages_per_block() + self.wl * geometry.pages_per_wl + self.page) as u32
    }

    pub fn global_block(&self, geometry: &Geometry) -> usize {
        let die = self.channel * geometry.dies_per_channel + self.die;
        let plane = die * geometry.planes_per_die + self.plane;
        plane * geometry.blocks_per_plane + self.block
    }

    pub fn is_within(&self, geometry: &Geometry) -> bool {
        self.channel < geometry.channels
            && self.die < geometry.dies_per_channel
            && self.plane < geometry.planes_per_die
            && self.block < geometry.blocks_per_plane
            && self.wl < geometry.wls_per_block
            && self.page < geometry.pages_per_wl
    }
}

/// Flash operation latencies and link bandwidths.
///
/// Bandwidths are in bytes per microsecond, which is numerically equal to MB/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    pub t_read_us: f64,
    pub t_prog_us: f64,
    pub t_erase_us: f64,
    pub channel_bw: f64,
    pub host_bw: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            t_read_us: 40.0,
            t_prog_us: 380.0,
            t_erase_us: 3500.0,
            channel_bw: 2000.0,
            host_bw: 8000.0,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("timing.t_read_us", self.t_read_us),
            ("timing.t_prog_us", self.t_prog_us),
            ("timing.t_erase_us", self.t_erase_us),
            ("timing.channel_bw", self.channel_bw),
            ("timing.host_bw", self.host_bw),
        ];
        for (key, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(ConfigError::invalid(key, "must be a finite non-negative number"));
            }
        }
        if self.channel_bw == 0.0 || self.host_bw == 0.0 {
            return Err(ConfigError::invalid("timing", "bandwidths must be positive"));
        }
        Ok(())
    }

    pub(crate) fn us_to_ns(us: f64) -> u64 {
        (us * 1000.0).round() as u64
    }

    /// Time to move `bytes` across a link of `bw` bytes/µs, in nanoseconds (rounded up).
    pub(crate) fn transfer_ns(bytes: u64, bw: f64) -> u64 {
        ((bytes as f64) * 1000.0 / bw).ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_matches_reference_ssd() {
        let g = Geometry::default();
        assert_eq!(g.pages_per_block(), 7704);
        assert_eq!(g.total_blocks(), 18_048);
        assert_eq!(
            g.total_pages(),
            8 * 4 * 4 * 141 * 321 * 24,
        );
        // ~2 TiB of raw capacity.
        let tib = g.capacity_bytes() as f64 / (1u64 << 40) as f64;
        assert!((2.0..2.2).contains(&tib), "{tib}");
    }

    #[test]
    fn zero_field_rejected() {
        let g = Geometry {
            planes_per_die: 0,
            ..Geometry::desk()
        };
        let err = g.validate().unwrap_err().to_string();
        assert!(err.contains("planes_per_die"), "{err}");
    }

    #[test]
    fn ppn_round_trip_covers_desk_array() {
        let g = Geometry::desk();
        for ppn in 0..g.total_pages() as u32 {
            let addr = PhysAddr::from_ppn(&g, ppn);
            assert!(addr.is_within(&g));
            assert_eq!(addr.to_ppn(&g), ppn);
        }
    }

    #[test]
    fn block_placement() {
        let g = Geometry::desk();
        // 8 blocks per plane, 2 planes per die, 1 die per channel.
        assert_eq!(g.plane_of(9), 1);
        assert_eq!(g.die_of(9), 0);
        assert_eq!(g.die_of(16), 1);
        assert_eq!(g.channel_of_die(1), 1);
    }

    #[test]
    fn transfer_time_rounds_up() {
        assert_eq!(TimingParams::transfer_ns(16_384, 2000.0), 8192);
        assert_eq!(TimingParams::transfer_ns(1, 3.0), 334);
    }
}
