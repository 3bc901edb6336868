//! Run configuration: TOML loading, presets, dotted-key overrides and
//! cross-field validation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::counters::{CounterConfig, CounterRegistry};
use crate::device::ReliabilityConfig;
use crate::disturbance::{Rpt, RptEntry};
use crate::error::ConfigError;
use crate::ftl::FtlConfig;
use crate::geometry::{Geometry, TimingParams};
use crate::policy::{PolicyConfig, PolicyRegistry};
use crate::workload::{preset, Pattern, SyntheticSpec};

/// Environment variable that replaces the configured run seed.
pub const SEED_ENV: &str = "STRAWSIM_SEED";

/// Strategy tables used to resolve names in a config.
#[derive(Clone, Default)]
pub struct Registries {
    pub policies: PolicyRegistry,
    pub counters: CounterRegistry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RptConfig {
    /// Fraction of the weakest ground-truth tolerance a derived table allows.
    pub margin: f64,
    /// Explicit table; derived from the reliability section when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<RptEntry>>,
}

impl Default for RptConfig {
    fn default() -> Self {
        RptConfig {
            margin: 0.95,
            entries: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Named profile supplying `pattern` and `read_ratio` (see [`preset`]).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Replay this CSV trace instead of generating requests. Synthetic
    /// settings are ignored when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub device_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub read_ratio: Option<f64>,
    /// Pages addressed; `footprint_fraction` of the logical space when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub footprint: Option<u64>,
    pub footprint_fraction: f64,
    pub op_count: u64,
    pub request_size: u32,
    pub mix_ratio: f64,
    pub hot_offset: u64,
    pub hot_pages: u64,
    pub hot_fraction: f64,
    pub inter_arrival_us: f64,
    /// Keep this many requests outstanding instead of honoring timestamps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_loop_depth: Option<usize>,
    /// Write the footprint once before replay so reads hit mapped data.
    pub precondition: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            preset: None,
            trace: None,
            device_id: None,
            pattern: None,
            read_ratio: None,
            footprint: None,
            footprint_fraction: 1.0,
            op_count: 100_000,
            request_size: 1,
            mix_ratio: 0.5,
            hot_offset: 0,
            hot_pages: 1,
            hot_fraction: 0.9,
            inter_arrival_us: 100.0,
            closed_loop_depth: None,
            precondition: true,
            seed: None,
        }
    }
}

/// Where requests come from once the config is resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    Synthetic(SyntheticSpec),
    Trace { path: PathBuf, device_id: Option<u64> },
}

impl WorkloadConfig {
    pub fn source(&self, logical_pages: u64, run_seed: u64) -> Result<WorkloadSource, ConfigError> {
        if let Some(path) = &self.trace {
            return Ok(WorkloadSource::Trace {
                path: path.clone(),
                device_id: self.device_id,
            });
        }
        let named = match &self.preset {
            Some(name) => Some(preset(name).ok_or_else(|| {
                ConfigError::invalid("workload.preset", format!("unknown preset `{name}`"))
            })?),
            None => None,
        };
        let pattern = self
            .pattern
            .or(named.map(|n| n.0))
            .ok_or_else(|| ConfigError::invalid("workload", "set `preset`, `pattern` or `trace`"))?;
        let read_ratio = self.read_ratio.or(named.map(|n| n.1)).unwrap_or(1.0);
        let spec = SyntheticSpec {
            pattern,
            read_ratio,
            footprint: match self.footprint {
                Some(pages) => pages,
                None => {
                    if !(self.footprint_fraction > 0.0 && self.footprint_fraction <= 1.0) {
                        return Err(ConfigError::invalid("workload.footprint_fraction", "must be in (0, 1]"));
                    }
                    ((logical_pages as f64 * self.footprint_fraction).floor() as u64).max(1)
                }
            },
            op_count: self.op_count,
            request_size: self.request_size,
            mix_ratio: self.mix_ratio,
            hot_offset: self.hot_offset,
            hot_pages: self.hot_pages,
            hot_fraction: self.hot_fraction,
            inter_arrival_us: self.inter_arrival_us,
            seed: self.seed.unwrap_or(run_seed),
        };
        spec.validate(logical_pages)?;
        Ok(WorkloadSource::Synthetic(spec))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// `desk` shrinks the array and divides tolerances and the check interval
    /// by `desk_divisor`. Explicit keys win over the preset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub desk_divisor: u64,
    pub seed: u64,
    pub initial_pec: u32,
    pub geometry: Geometry,
    pub timing: TimingParams,
    pub reliability: ReliabilityConfig,
    pub rpt: RptConfig,
    pub policy: PolicyConfig,
    pub counters: CounterConfig,
    pub ftl: FtlConfig,
    pub workload: WorkloadConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".into(),
            preset: None,
            desk_divisor: 100,
            seed: 1,
            initial_pec: 2000,
            geometry: Geometry::default(),
            timing: TimingParams::default(),
            reliability: ReliabilityConfig::default(),
            rpt: RptConfig::default(),
            policy: PolicyConfig::default(),
            counters: CounterConfig::default(),
            ftl: FtlConfig::default(),
            workload: WorkloadConfig {
                preset: Some("syn1".into()),
                ..WorkloadConfig::default()
            },
        }
    }
}

/// Short keys accepted by `--override`.
const ALIASES: [(&str, &str); 5] = [
    ("policy", "policy.name"),
    ("backend", "counters.backend"),
    ("counter_backend", "counters.backend"),
    ("pec", "initial_pec"),
    ("check_interval", "policy.check_interval"),
];

impl RunConfig {
    /// Scaled-down setup that runs in seconds.
    pub fn desk(divisor: u64) -> Self {
        let d = divisor.max(1);
        let full = RunConfig::default();
        let mut cfg = RunConfig {
            preset: Some("desk".into()),
            desk_divisor: d,
            geometry: Geometry::desk(),
            ..full
        };
        cfg.reliability.tolerance_min /= d;
        cfg.reliability.tolerance_max /= d;
        cfg.policy.check_interval = (cfg.policy.check_interval / d).max(1);
        cfg.workload.footprint_fraction = 0.5;
        cfg.workload.op_count = 200_000;
        cfg.workload.inter_arrival_us = 400.0;
        cfg
    }

    fn preset_base(name: Option<&str>, divisor: u64) -> Result<RunConfig, ConfigError> {
        match name {
            None | Some("full") => Ok(RunConfig::default()),
            Some("desk") => Ok(RunConfig::desk(divisor)),
            Some(other) => Err(ConfigError::invalid("preset", format!("unknown preset `{other}` (known: desk, full)"))),
        }
    }

    /// Parses TOML text, applies `STRAWSIM_SEED` (when `env_seed` is given)
    /// and then the `key=value` overrides, and validates the result.
    pub fn from_toml_str(
        text: &str,
        overrides: &[String],
        env_seed: Option<&str>,
        registries: &Registries,
    ) -> Result<RunConfig, ConfigError> {
        let mut user: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(seed) = env_seed {
            let seed: i64 = seed
                .trim()
                .parse()
                .map_err(|_| ConfigError::invalid(SEED_ENV, format!("`{seed}` is not a non-negative integer")))?;
            user.insert("seed".into(), toml::Value::Integer(seed));
        }
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        let preset_name = match user.get("preset") {
            None => None,
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(ConfigError::invalid("preset", "must be a string")),
        };
        let divisor = match user.get("desk_divisor") {
            None => 100,
            Some(toml::Value::Integer(n)) if *n >= 1 => *n as u64,
            Some(_) => return Err(ConfigError::invalid("desk_divisor", "must be a positive integer")),
        };
        let base = RunConfig::preset_base(preset_name.as_deref(), divisor)?;
        let mut merged = toml::Table::try_from(&base).map_err(|e| ConfigError::Parse(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: RunConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate(registries)?;
        Ok(cfg)
    }

    /// Reads a config file, honoring `STRAWSIM_SEED` from the environment.
    pub fn load(path: &Path, overrides: &[String], registries: &Registries) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let env = std::env::var(SEED_ENV).ok();
        RunConfig::from_toml_str(&text, overrides, env.as_deref(), registries)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn logical_pages(&self) -> u64 {
        self.ftl.logical_pages(&self.geometry)
    }

    /// Ground-truth settings with the seed fallback applied.
    pub fn resolved_reliability(&self) -> ReliabilityConfig {
        let mut r = self.reliability.clone();
        r.seed.get_or_insert(self.seed);
        r
    }

    /// The policy-visible table: explicit entries, or derived from the ground truth.
    pub fn resolve_rpt(&self) -> Result<Rpt, ConfigError> {
        match &self.rpt.entries {
            Some(entries) => Rpt::new(entries),
            None => self.reliability.derive_rpt(self.rpt.margin),
        }
    }

    pub fn validate(&self, registries: &Registries) -> Result<(), ConfigError> {
        self.geometry.validate()?;
        if self.geometry.total_pages() >= u64::from(u32::MAX) {
            return Err(ConfigError::invalid("geometry", "more than 2^32 - 1 pages"));
        }
        if self.geometry.pages_per_wl > usize::from(u16::MAX) {
            return Err(ConfigError::invalid("geometry.pages_per_wl", "too large"));
        }
        self.timing.validate()?;
        self.reliability.validate()?;
        self.policy.validate(&registries.policies)?;
        self.counters.validate(&registries.counters)?;
        self.ftl.validate()?;
        if self.logical_pages() == 0 {
            return Err(ConfigError::invalid("ftl.over_provisioning", "leaves no logical capacity"));
        }
        let rpt = self.resolve_rpt()?;
        if self.rpt.entries.is_some() {
            let derived = self.reliability.derive_rpt(1.0)?;
            for e in rpt.entries() {
                let (limit, _) = derived.lookup(e.pec_bucket, e.group);
                if e.erc_max > limit {
                    log::warn!(
                        "rpt entry {}@{} allows {} effective reads but the ground truth guarantees only {}",
                        e.group,
                        e.pec_bucket,
                        e.erc_max,
                        limit
                    );
                }
            }
        }
        if let Some(0) = self.workload.closed_loop_depth {
            return Err(ConfigError::invalid("workload.closed_loop_depth", "must be at least 1"));
        }
        self.workload.source(self.logical_pages(), self.seed)?;
        Ok(())
    }

    /// Stable digest of everything that determines the request stream.
    pub fn workload_hash(&self) -> Result<String, ConfigError> {
        let mut h = Sha256::new();
        match self.workload.source(self.logical_pages(), self.seed)? {
            WorkloadSource::Synthetic(spec) => {
                h.update(b"synthetic\0");
                h.update(serde_json::to_vec(&spec).expect("spec serializes"));
            }
            WorkloadSource::Trace { path, device_id } => {
                let bytes = fs::read(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                h.update(b"trace\0");
                h.update(&bytes);
                h.update(format!("{device_id:?}/{}/{}", self.geometry.page_size, self.logical_pages()));
            }
        }
        h.update(format!(
            "/{:?}/{}",
            self.workload.closed_loop_depth, self.workload.precondition
        ));
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Sets a dotted key from a `key=value` string. Values are parsed as TOML
/// and fall back to plain strings.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::invalid(spec, "override must look like key=value"))?;
    let key = key.trim();
    let key = ALIASES.iter().find(|(a, _)| *a == key).map_or(key, |(_, full)| full);
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::invalid(key, "malformed key"));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::invalid(key, format!("`{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Recursively overlays `top` onto `base`. Tables merge; anything else replaces.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
