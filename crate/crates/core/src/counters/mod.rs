//! Per-block read counters (REC).
//!
//! Each block owns one [`ReadCounter`]. Backends are interchangeable and are
//! looked up by name in a [`CounterRegistry`].

mod exact;
mod space_saving;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use exact::ExactRec;
pub use space_saving::SpaceSavingRec;

use crate::error::ConfigError;
use crate::geometry::Geometry;

/// Counter entries stop being representable in the 3-byte footprint model at this value.
pub const COUNTER_LIMIT: u64 = (1 << 24) - 1;

/// Read counts of one block since its last erase.
pub trait ReadCounter: Send + fmt::Debug {
    fn record_read(&mut self, wl: usize);

    /// Estimated reads of `wl`; never below the true count.
    fn query_wl(&self, wl: usize) -> u64;

    /// A lower bound on the reads of `wl`; never above the true count.
    fn query_wl_floor(&self, wl: usize) -> u64;

    /// Exact reads of the whole block.
    fn query_block(&self) -> u64;

    fn reset(&mut self);

    fn backend(&self) -> &'static str;
}

/// Counter backend selection, as found in the run config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterConfig {
    pub backend: String,
    pub entries_per_block: usize,
}

impl Default for CounterConfig {
    fn default() -> Self {
        CounterConfig {
            backend: "exact".into(),
            entries_per_block: 32,
        }
    }
}

type CounterCtor = fn(wls: usize, entries: usize) -> Box<dyn ReadCounter>;
type FootprintFn = fn(wls: usize, entries: usize) -> u64;

#[derive(Clone, Copy)]
struct CounterBackend {
    build: CounterCtor,
    bytes_per_block: FootprintFn,
}

/// Name-indexed table of counter backends.
#[derive(Clone)]
pub struct CounterRegistry {
    backends: BTreeMap<&'static str, CounterBackend>,
}

impl CounterRegistry {
    pub fn empty() -> Self {
        CounterRegistry {
            backends: BTreeMap::new(),
        }
    }

    /// `exact` and `space_saving`.
    pub fn builtin() -> Self {
        let mut r = CounterRegistry::empty();
        r.register(
            "exact",
            |wls, _| Box::new(ExactRec::new(wls)),
            ExactRec::footprint_bytes,
        );
        r.register(
            "space_saving",
            |_, m| Box::new(SpaceSavingRec::new(m)),
            SpaceSavingRec::footprint_bytes,
        );
        r
    }

    pub fn register(&mut self, name: &'static str, build: CounterCtor, bytes_per_block: FootprintFn) {
        self.backends.insert(name, CounterBackend { build, bytes_per_block });
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.backends.keys().copied().collect()
    }

    fn get(&self, name: &str) -> Result<CounterBackend, ConfigError> {
        self.backends
            .get(name)
            .copied()
            .ok_or_else(|| ConfigError::UnknownStrategy {
                kind: "counter backend",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn build(&self, cfg: &CounterConfig, wls: usize) -> Result<Box<dyn ReadCounter>, ConfigError> {
        Ok((self.get(&cfg.backend)?.build)(wls, cfg.entries_per_block))
    }

    /// Modeled counter memory for the whole array.
    pub fn footprint_bytes(&self, geometry: &Geometry, cfg: &CounterConfig) -> Result<u64, ConfigError> {
        let per_block = (self.get(&cfg.backend)?.bytes_per_block)(geometry.wls_per_block, cfg.entries_per_block);
        Ok(geometry.total_blocks() as u64 * per_block)
    }
}

impl Default for CounterRegistry {
    fn default() -> Self {
        CounterRegistry::builtin()
    }
}

impl CounterConfig {
    pub fn validate(&self, registry: &CounterRegistry) -> Result<(), ConfigError> {
        registry.get(&self.backend)?;
        if self.entries_per_block == 0 {
            return Err(ConfigError::invalid("counters.entries_per_block", "must be at least 1"));
        }
        if self.entries_per_block > u16::MAX as usize {
            return Err(ConfigError::invalid("counters.entries_per_block", "must fit 16 bits"));
        }
        Ok(())
    }
}

/// Modeled counter memory in bytes: 3-byte counts, 2-byte WL indices and one
/// 3-byte block counter per block.
pub fn rec_memory_footprint(geometry: &Geometry, backend: &str, entries: usize) -> Result<u64, ConfigError> {
    CounterRegistry::builtin().footprint_bytes(
        geometry,
        &CounterConfig {
            backend: backend.to_string(),
            entries_per_block: entries,
        },
    )
}

/// Counter memory when one 3-byte counter covers every `wl_bytes` of capacity.
pub fn per_wl_capacity_footprint(capacity_bytes: u64, wl_bytes: u64) -> u64 {
    capacity_bytes / wl_bytes * 3
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_block(wls: usize) -> Geometry {
        Geometry {
            channels: 1,
            dies_per_channel: 1,
            planes_per_die: 1,
            blocks_per_plane: 1,
            wls_per_block: wls,
            pages_per_wl: 1,
            page_size: 16384,
        }
    }

    #[test]
    fn footprint_of_a_2568_wl_block() {
        let g = one_block(2568);
        let exact = rec_memory_footprint(&g, "exact", 32).unwrap();
        let ss = rec_memory_footprint(&g, "space_saving", 32).unwrap();
        assert_eq!(exact, 2568 * 3 + 3);
        assert_eq!(ss, 163);
        assert!(exact as f64 / ss as f64 > 47.0);
    }

    #[test]
    fn footprint_of_reference_array() {
        let exact = rec_memory_footprint(&Geometry::default(), "exact", 32).unwrap();
        assert_eq!(exact, 18_048 * (321 * 3 + 3));
        assert!((17_000_000..17_500_000).contains(&exact));
    }

    #[test]
    fn degenerate_entry_budget_may_exceed_exact() {
        let g = one_block(48);
        let exact = rec_memory_footprint(&g, "exact", 48).unwrap();
        let ss = rec_memory_footprint(&g, "space_saving", 48).unwrap();
        assert!(ss >= exact);
    }

    #[test]
    fn per_capacity_footprint() {
        let two_tib = 2u64 << 40;
        let bytes = per_wl_capacity_footprint(two_tib, 48 * 1024);
        assert_eq!(bytes, 44_739_242 * 3);
    }

    #[test]
    fn unknown_backend() {
        let err = CounterRegistry::builtin()
            .build(
                &CounterConfig {
                    backend: "count_min".into(),
                    entries_per_block: 4,
                },
                8,
            )
            .unwrap_err()
            .to_string();
        assert!(err.contains("count_min") && err.contains("space_saving"), "{err}");
    }

    #[test]
    fn registry_builds_each_backend() {
        let reg = CounterRegistry::builtin();
        assert_eq!(reg.names(), ["exact", "space_saving"]);
        for name in reg.names() {
            let mut c = reg
                .build(
                    &CounterConfig {
                        backend: name.into(),
                        entries_per_block: 4,
                    },
                    8,
                )
                .unwrap();
            assert_eq!(c.backend(), name);
            c.record_read(3);
            assert_eq!(c.query_block(), 1);
            assert_eq!(c.query_wl(3), 1);
        }
    }
}
