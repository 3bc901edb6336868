//! Read-reclaim policies.
//!
//! A policy is consulted after every host read that lands on a block and
//! answers with a [`ReclaimAction`]. Policies are registered by name in a
//! [`PolicyRegistry`] and picked at runtime from the run config.

mod block;
mod wordline;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use block::{derive_block_threshold, BlockPolicy};
pub use wordline::{identify_disturbed_wls, StressAwareWlPolicy};

use crate::counters::ReadCounter;
use crate::device::WlGroup;
use crate::disturbance::Rpt;
use crate::error::ConfigError;

/// What the policy can see of a block: counters, PEC and WL group labels,
/// never the ground-truth tolerances.
pub struct BlockView<'a> {
    pub block: usize,
    pub pec: u32,
    pub counter: &'a dyn ReadCounter,
    pub groups: &'a [WlGroup],
    /// Whether a WL still holds data worth protecting.
    pub live: &'a dyn Fn(usize) -> bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReclaimAction {
    None,
    /// Copy out every valid page and erase the block.
    Block,
    /// Copy out the valid pages of these WLs.
    Wordlines(Vec<usize>),
}

pub trait ReclaimPolicy: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn after_read(&self, view: &BlockView<'_>) -> ReclaimAction;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub name: String,
    /// Block read count that triggers a block reclaim; derived from the RPT when unset.
    pub block_rr_threshold: Option<u64>,
    /// Block reads between two WL checks.
    pub check_interval: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            name: "STRAW".into(),
            block_rr_threshold: None,
            check_interval: 1000,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self, registry: &PolicyRegistry) -> Result<(), ConfigError> {
        registry.get(&self.name)?;
        if self.check_interval == 0 {
            return Err(ConfigError::invalid("policy.check_interval", "must be at least 1"));
        }
        if self.block_rr_threshold == Some(0) {
            return Err(ConfigError::invalid("policy.block_rr_threshold", "must be at least 1"));
        }
        Ok(())
    }
}

type PolicyCtor = fn(&PolicyConfig, Arc<Rpt>) -> Result<Box<dyn ReclaimPolicy>, ConfigError>;

/// Name-indexed table of reclaim policies. Lookups ignore ASCII case.
#[derive(Clone)]
pub struct PolicyRegistry {
    policies: BTreeMap<String, PolicyCtor>,
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        PolicyRegistry {
            policies: BTreeMap::new(),
        }
    }

    /// `BLOCK` and `STRAW`.
    pub fn builtin() -> Self {
        let mut r = PolicyRegistry::empty();
        r.register("BLOCK", |cfg, rpt| Ok(Box::new(BlockPolicy::new(cfg, &rpt))));
        r.register("STRAW", |cfg, rpt| Ok(Box::new(StressAwareWlPolicy::new(cfg, rpt))));
        r
    }

    pub fn register(&mut self, name: &str, ctor: PolicyCtor) {
        self.policies.insert(name.to_ascii_uppercase(), ctor);
    }

    pub fn names(&self) -> Vec<&str> {
        self.policies.keys().map(String::as_str).collect()
    }

    fn get(&self, name: &str) -> Result<PolicyCtor, ConfigError> {
        self.policies
            .get(&name.to_ascii_uppercase())
            .copied()
            .ok_or_else(|| ConfigError::UnknownStrategy {
                kind: "policy",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn build(&self, cfg: &PolicyConfig, rpt: Arc<Rpt>) -> Result<Box<dyn ReclaimPolicy>, ConfigError> {
        (self.get(&cfg.name)?)(cfg, rpt)
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        PolicyRegistry::builtin()
    }
}
