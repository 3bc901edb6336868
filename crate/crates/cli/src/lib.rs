//! Subcommand implementations behind the `strawsim` binary.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use strawsim::config::WorkloadSource;
use strawsim::device::Device;
use strawsim::engine::write_events_csv;
use strawsim::workload::write_trace;
use strawsim::{run_simulation, Registries, RunConfig, SimReport};

#[derive(Debug, Parser)]
#[command(name = "strawsim", version, about = "Read-reclaim policy simulator for 3D NAND SSDs")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its report.
    Run(RunArgs),
    /// Run the cross product of axis values.
    Sweep(SweepArgs),
    /// Compare reports against the first one.
    Compare(CompareArgs),
    /// Write the configured synthetic workload as a trace CSV.
    GenTrace(ExportArgs),
    /// Write the per-WL ground truth as CSV.
    DumpGroundTruth(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Patch a config key, e.g. `policy.name=BLOCK` (repeatable).
    #[arg(long = "override", value_name = "K=V")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Axis as `key=v1,v2,...` (repeatable).
    #[arg(long, value_name = "K=V1,V2", required = true)]
    pub axis: Vec<String>,
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "sweep")]
    pub out: PathBuf,
    /// Refuse sweeps with more cells than this.
    #[arg(long, default_value_t = 64)]
    pub max_cells: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report JSON files; the first is the baseline.
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
    /// Also write the CSV here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// At least one run lost data.
    IntegrityFailure,
}

/// Runs the parsed command. Errors map to exit 1 in `main`, integrity
/// failures to exit 2.
pub fn execute(cli: Cli) -> Result<Outcome> {
    let registries = Registries::default();
    match cli.command {
        Command::Run(args) => cmd_run(&args, &registries),
        Command::Sweep(args) => cmd_sweep(&args, &registries),
        Command::Compare(args) => cmd_compare(&args, &mut io::stdout().lock()),
        Command::GenTrace(args) => cmd_gen_trace(&args, &registries),
        Command::DumpGroundTruth(args) => cmd_dump_ground_truth(&args, &registries),
    }
}

pub fn load_config(args: &ConfigArgs, extra: &[String], registries: &Registries) -> Result<RunConfig> {
    let mut overrides = args.overrides.clone();
    overrides.extend_from_slice(extra);
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path, &overrides, registries)?,
        None => {
            let env = std::env::var(strawsim::config::SEED_ENV).ok();
            RunConfig::from_toml_str("", &overrides, env.as_deref(), registries)?
        }
    };
    Ok(cfg)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_=.".contains(c) { c } else { '_' })
        .collect()
}

/// Runs `cfg` and writes `<stem>.json` and `<stem>.events.csv` into `dir`.
fn run_and_write(cfg: &RunConfig, registries: &Registries, dir: &Path, stem: &str) -> Result<SimReport> {
    let out = run_simulation(cfg, registries).with_context(|| format!("simulating {stem}"))?;
    write_file(&dir.join(format!("{stem}.json")), |w| {
        w.write_all(out.report.to_json().as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    write_file(&dir.join(format!("{stem}.events.csv")), |w| Ok(write_events_csv(w, &out.events)?))?;
    Ok(out.report)
}

fn summarize(r: &SimReport) -> String {
    let p999 = r.read_latency_us.p999.map_or("n/a".into(), |v| format!("{v:.1}"));
    format!(
        "{}: policy {} ({}), reads {}, rr copies {} block / {} wl, gc copies {}, erases {}, p999 read {p999} us, corruption {}{}",
        r.name,
        r.policy,
        r.counter_backend,
        r.total_reads,
        r.rr_page_copies.block_rr,
        r.rr_page_copies.wl_rr,
        r.gc_page_copies,
        r.erases,
        r.corruption_events,
        if r.failed { " FAILED" } else { "" }
    )
}

pub fn cmd_run(args: &RunArgs, registries: &Registries) -> Result<Outcome> {
    let cfg = load_config(&args.config, &[], registries)?;
    let report = run_and_write(&cfg, registries, &args.out, &file_stem(&cfg.name))?;
    println!("{}", summarize(&report));
    Ok(if report.failed {
        Outcome::IntegrityFailure
    } else {
        Outcome::Ok
    })
}

/// Splits `key=v1,v2` into the key and its deduplicated values.
pub fn parse_axis(spec: &str) -> Result<(String, Vec<String>)> {
    let Some((key, values)) = spec.split_once('=') else {
        bail!("axis `{spec}` must look like key=v1,v2");
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        if seen.insert(v.to_string()) {
            out.push(v.to_string());
        } else {
            log::warn!("axis {key}: dropping duplicate value {v}");
        }
    }
    if out.is_empty() {
        bail!("axis `{key}` has no values");
    }
    Ok((key.trim().to_string(), out))
}

/// Every combination of axis values, as override lists.
pub fn cross_product(axes: &[(String, Vec<String>)]) -> Vec<Vec<String>> {
    axes.iter().fold(vec![Vec::new()], |cells, (key, values)| {
        cells
            .iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push(format!("{key}={v}"));
                    c
                })
            })
            .collect()
    })
}

pub fn cmd_sweep(args: &SweepArgs, registries: &Registries) -> Result<Outcome> {
    let axes = args.axis.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>>>()?;
    let cells = cross_product(&axes);
    if cells.len() > args.max_cells {
        bail!("sweep has {} cells, more than the cap of {}", cells.len(), args.max_cells);
    }
    // Resolve every cell up front so config errors surface before any run.
    let configs = cells
        .iter()
        .map(|o| load_config(&args.config, o, registries).map(|c| (o.join(","), c)))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .context("starting worker pool")?;
    let reports: Vec<SimReport> = pool.install(|| {
        configs
            .par_iter()
            .map(|(label, cfg)| run_and_write(cfg, registries, &args.out, &file_stem(label)))
            .collect::<Result<Vec<_>>>()
    })?;
    write_file(&args.out.join("summary.csv"), |w| {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["cell".to_string()];
        header.extend(axes.iter().map(|(k, _)| format!("axis:{k}")));
        header.extend(reports[0].scalar_fields().into_iter().map(|(k, _)| k.to_string()));
        csv.write_record(&header)?;
        for ((label, _), (cell, report)) in configs.iter().zip(cells.iter().zip(&reports)) {
            let mut row = vec![label.clone()];
            row.extend(cell.iter().map(|kv| kv.split_once('=').map_or("", |p| p.1).to_string()));
            row.extend(report.scalar_fields().into_iter().map(|(_, v)| v));
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    for ((label, _), r) in configs.iter().zip(&reports) {
        println!("[{label}] {}", summarize(r));
    }
    Ok(if reports.iter().any(|r| r.failed) {
        Outcome::IntegrityFailure
    } else {
        Outcome::Ok
    })
}

fn ratio(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        if value == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        value / base
    }
}

/// One row of a comparison, normalized to the baseline report.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub config_name: String,
    pub rr_copies_ratio: f64,
    pub p999_ratio: Option<f64>,
    pub corruption_events: u64,
}

pub fn compare_reports(reports: &[SimReport]) -> Result<Vec<CompareRow>> {
    let Some(base) = reports.first() else {
        bail!("nothing to compare");
    };
    for r in &reports[1..] {
        if r.workload_hash != base.workload_hash {
            bail!(
                "workload of `{}` differs from baseline `{}` ({} vs {}); refusing to compare",
                r.name,
                base.name,
                r.workload_hash,
                base.workload_hash
            );
        }
    }
    Ok(reports
        .iter()
        .map(|r| CompareRow {
            config_name: r.name.clone(),
            rr_copies_ratio: ratio(r.rr_page_copies.total() as f64, base.rr_page_copies.total() as f64),
            p999_ratio: match (r.read_latency_us.p999, base.read_latency_us.p999) {
                (Some(v), Some(b)) => Some(ratio(v, b)),
                _ => None,
            },
            corruption_events: r.corruption_events,
        })
        .collect())
}

fn write_compare_csv<W: Write>(out: W, rows: &[CompareRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["config_name", "rr_copies_ratio", "p999_ratio", "corruption_events"])?;
    for r in rows {
        w.write_record([
            r.config_name.clone(),
            r.rr_copies_ratio.to_string(),
            r.p999_ratio.map(|v| v.to_string()).unwrap_or_default(),
            r.corruption_events.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs, stdout: &mut impl Write) -> Result<Outcome> {
    let reports = args
        .reports
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SimReport::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = compare_reports(&reports)?;
    write_compare_csv(&mut *stdout, &rows)?;
    if let Some(path) = &args.out {
        write_file(path, |w| write_compare_csv(w, &rows))?;
    }
    let width = rows.iter().map(|r| r.config_name.len()).max().unwrap_or(0).max(6);
    eprintln!("{:<width$}  {:>12}  {:>10}  {:>10}", "config", "rr copies", "p999", "corrupt");
    for r in &rows {
        let p999 = r.p999_ratio.map_or("n/a".into(), |v| format!("{v:.3}x"));
        eprintln!(
            "{:<width$}  {:>11.3}x  {:>10}  {:>10}",
            r.config_name, r.rr_copies_ratio, p999, r.corruption_events
        );
    }
    Ok(Outcome::Ok)
}

pub fn cmd_gen_trace(args: &ExportArgs, registries: &Registries) -> Result<Outcome> {
    let cfg = load_config(&args.config, &[], registries)?;
    let WorkloadSource::Synthetic(spec) = cfg.workload.source(cfg.logical_pages(), cfg.seed)? else {
        bail!("workload.trace is set; gen-trace needs a synthetic workload");
    };
    let records: Vec<_> = spec.iter().collect();
    write_file(&args.out, |w| Ok(write_trace(w, &records, cfg.geometry.page_size, 0)?))?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    Ok(Outcome::Ok)
}

pub fn cmd_dump_ground_truth(args: &ExportArgs, registries: &Registries) -> Result<Outcome> {
    let cfg = load_config(&args.config, &[], registries)?;
    let reliability = cfg.resolved_reliability();
    let device = Device::new(
        &cfg.geometry,
        &reliability,
        reliability.seed.unwrap_or(cfg.seed),
        cfg.initial_pec,
    );
    write_file(&args.out, |w| Ok(device.write_ground_truth_csv(w)?))?;
    println!("wrote ground truth for {} blocks to {}", device.blocks().len(), args.out.display());
    Ok(Outcome::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing_dedupes() {
        let (k, v) = parse_axis("policy=BLOCK,STRAW,BLOCK").unwrap();
        assert_eq!(k, "policy");
        assert_eq!(v, ["BLOCK", "STRAW"]);
        assert!(parse_axis("policy").is_err());
        assert!(parse_axis("policy=").is_err());
    }

    #[test]
    fn cross_product_cardinality() {
        let axes = vec![
            ("policy".to_string(), vec!["BLOCK".to_string(), "STRAW".to_string()]),
            ("initial_pec".to_string(), vec!["1000".to_string(), "2000".to_string()]),
        ];
        let cells = cross_product(&axes);
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[1], ["policy=BLOCK", "initial_pec=2000"]);
    }

    #[test]
    fn ratio_handles_zero_baseline() {
        assert_eq!(ratio(0.0, 0.0), 1.0);
        assert!(ratio(1.0, 0.0).is_infinite());
        assert_eq!(ratio(1.0, 4.0), 0.25);
    }

    #[test]
    fn stems_are_filesystem_safe() {
        assert_eq!(file_stem("a/b c=1,2"), "a_b_c=1_2");
    }
}
