//! Host request streams: trace CSV parsing and synthetic generators.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, TraceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Read,
    Write,
}

/// One host request in logical page units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub timestamp_us: f64,
    pub op: Op,
    /// First logical page.
    pub offset: u64,
    /// Pages, at least 1.
    pub length: u32,
}

impl TraceRecord {
    /// Logical pages touched, wrapping at `logical_pages`.
    pub fn pages(&self, logical_pages: u64) -> impl Iterator<Item = u64> + '_ {
        let start = self.offset;
        (0..u64::from(self.length)).map(move |k| (start + k) % logical_pages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Sequential,
    Random,
    /// Sequential runs broken by random jumps.
    Mixed,
    /// Most requests land on a small hot set.
    Hotspot,
}

/// Parameters of a synthetic request stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub pattern: Pattern,
    pub read_ratio: f64,
    /// Pages addressed, starting at page 0.
    pub footprint: u64,
    pub op_count: u64,
    pub request_size: u32,
    /// Probability that a mixed-pattern request continues the current run.
    pub mix_ratio: f64,
    /// First page of the hot set.
    pub hot_offset: u64,
    pub hot_pages: u64,
    /// Fraction of hotspot requests that go to the hot set.
    pub hot_fraction: f64,
    /// Gap between arrivals; 0 gives back-to-back timestamps.
    pub inter_arrival_us: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(pattern: Pattern, read_ratio: f64, footprint: u64, op_count: u64) -> Self {
        SyntheticSpec {
            pattern,
            read_ratio,
            footprint,
            op_count,
            request_size: 1,
            mix_ratio: 0.5,
            hot_offset: 0,
            hot_pages: 1,
            hot_fraction: 0.9,
            inter_arrival_us: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self, logical_pages: u64) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.read_ratio) {
            return Err(ConfigError::invalid("workload.read_ratio", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(ConfigError::invalid("workload.mix_ratio", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.hot_fraction) {
            return Err(ConfigError::invalid("workload.hot_fraction", "must be in [0, 1]"));
        }
        if self.request_size == 0 {
            return Err(ConfigError::invalid("workload.request_size", "must be at least 1"));
        }
        if self.footprint < u64::from(self.request_size) {
            return Err(ConfigError::invalid("workload.footprint", "smaller than one request"));
        }
        if self.footprint > logical_pages {
            return Err(ConfigError::invalid(
                "workload.footprint",
                format!("{} pages exceeds logical capacity of {logical_pages}", self.footprint),
            ));
        }
        if self.pattern == Pattern::Hotspot
            && (self.hot_pages == 0 || self.hot_offset + self.hot_pages > self.footprint)
        {
            return Err(ConfigError::invalid("workload.hot_pages", "hot set must be non-empty and inside the footprint"));
        }
        if !self.inter_arrival_us.is_finite() || self.inter_arrival_us < 0.0 {
            return Err(ConfigError::invalid("workload.inter_arrival_us", "must be non-negative"));
        }
        Ok(())
    }

    /// Streams the records in order.
    pub fn iter(&self) -> SyntheticIter {
        SyntheticIter {
            spec: self.clone(),
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            cursor: 0,
            emitted: 0,
        }
    }
}

/// Named profiles: `syn1`, `syn2`, `ali121`, `ali124`, `ali188`, `ali206`, `hotspot`.
/// Returns `(pattern, read_ratio)`.
pub fn preset(name: &str) -> Option<(Pattern, f64)> {
    Some(match name.to_ascii_lowercase().as_str() {
        "syn1" => (Pattern::Random, 1.0),
        "syn2" => (Pattern::Mixed, 1.0),
        "ali121" => (Pattern::Sequential, 0.55),
        "ali124" => (Pattern::Mixed, 0.98),
        "ali188" => (Pattern::Sequential, 0.85),
        "ali206" => (Pattern::Random, 0.99),
        "hotspot" => (Pattern::Hotspot, 1.0),
        _ => return None,
    })
}

pub const PRESET_NAMES: [&str; 7] = ["syn1", "syn2", "ali121", "ali124", "ali188", "ali206", "hotspot"];

#[derive(Debug, Clone)]
pub struct SyntheticIter {
    spec: SyntheticSpec,
    rng: ChaCha8Rng,
    cursor: u64,
    emitted: u64,
}

impl SyntheticIter {
    fn uniform_offset(&mut self) -> u64 {
        let slots = self.spec.footprint - u64::from(self.spec.request_size) + 1;
        self.rng.gen_range(0..slots)
    }

    fn sequential_offset(&mut self) -> u64 {
        let len = u64::from(self.spec.request_size);
        if self.cursor + len > self.spec.footprint {
            self.cursor = 0;
        }
        let off = self.cursor;
        self.cursor += len;
        off
    }
}

impl Iterator for SyntheticIter {
    type Item = TraceRecord;

    fn next(&mut self) -> Option<TraceRecord> {
        if self.emitted == self.spec.op_count {
            return None;
        }
        let op = if self.rng.gen_bool(self.spec.read_ratio) {
            Op::Read
        } else {
            Op::Write
        };
        let offset = match self.spec.pattern {
            Pattern::Sequential => self.sequential_offset(),
            Pattern::Random => self.uniform_offset(),
            Pattern::Mixed => {
                if self.emitted > 0 && self.rng.gen_bool(self.spec.mix_ratio) {
                    self.sequential_offset()
                } else {
                    self.cursor = self.uniform_offset();
                    self.sequential_offset()
                }
            }
            Pattern::Hotspot => {
                if self.rng.gen_bool(self.spec.hot_fraction) {
                    self.spec.hot_offset + self.rng.gen_range(0..self.spec.hot_pages)
                } else {
                    self.uniform_offset()
                }
            }
        };
        let timestamp_us = self.emitted as f64 * self.spec.inter_arrival_us;
        self.emitted += 1;
        Some(TraceRecord {
            timestamp_us,
            op,
            offset,
            length: self.spec.request_size,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.spec.op_count - self.emitted) as usize;
        (left, Some(left))
    }
}

/// Validates `spec` against the logical capacity and collects its records.
pub fn generate_synthetic(spec: &SyntheticSpec, logical_pages: u64) -> Result<Vec<TraceRecord>, ConfigError> {
    spec.validate(logical_pages)?;
    Ok(spec.iter().collect())
}

/// How to map a block-trace CSV onto the simulated device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceFormat {
    pub page_size: u64,
    /// Keep only rows of this device; `None` keeps all rows.
    pub device_id: Option<u64>,
    /// Offsets are wrapped modulo this many pages.
    pub logical_pages: u64,
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    device_id: u64,
    opcode: String,
    offset_bytes: u64,
    length_bytes: u64,
    timestamp_us: f64,
}

/// Parses a `device_id,opcode,offset_bytes,length_bytes,timestamp_us` CSV.
///
/// Offsets are rounded down and lengths up to whole pages. Offsets beyond
/// the logical capacity wrap around. Out-of-order timestamps are sorted
/// (stably) with a warning.
pub fn parse_trace<R: Read>(input: R, format: &TraceFormat) -> Result<Vec<TraceRecord>, TraceError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut records = Vec::new();
    let mut sorted = true;
    let mut raw = csv::StringRecord::new();
    let headers = reader.headers()?.clone();
    loop {
        if !reader.read_record(&mut raw)? {
            break;
        }
        let line = raw.position().map_or(0, |p| p.line());
        let malformed = |message: String| TraceError::Malformed { line, message };
        let row: CsvRow = raw.deserialize(Some(&headers)).map_err(|e| malformed(e.to_string()))?;
        if format.device_id.is_some_and(|d| d != row.device_id) {
            continue;
        }
        let op = match row.opcode.as_str() {
            "R" | "r" => Op::Read,
            "W" | "w" => Op::Write,
            other => return Err(malformed(format!("unknown opcode `{other}`"))),
        };
        if row.length_bytes == 0 {
            return Err(malformed("zero-length request".into()));
        }
        if !row.timestamp_us.is_finite() || row.timestamp_us < 0.0 {
            return Err(malformed("timestamp must be a non-negative number".into()));
        }
        let length = u32::try_from(row.length_bytes.div_ceil(format.page_size))
            .map_err(|_| malformed("request too long".into()))?;
        let rec = TraceRecord {
            timestamp_us: row.timestamp_us,
            op,
            offset: (row.offset_bytes / format.page_size) % format.logical_pages,
            length,
        };
        if records.last().is_some_and(|p: &TraceRecord| p.timestamp_us > rec.timestamp_us) {
            sorted = false;
        }
        records.push(rec);
    }
    if !sorted {
        log::warn!("trace timestamps are not monotone; sorting");
        records.sort_by(|a, b| a.timestamp_us.total_cmp(&b.timestamp_us));
    }
    Ok(records)
}

/// Writes records in the format [`parse_trace`] reads.
pub fn write_trace<W: Write>(out: W, records: &[TraceRecord], page_size: u64, device_id: u64) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            device_id,
            opcode: match r.op {
                Op::Read => "R".into(),
                Op::Write => "W".into(),
            },
            offset_bytes: r.offset * page_size,
            length_bytes: u64::from(r.length) * page_size,
            timestamp_us: r.timestamp_us,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FMT: TraceFormat = TraceFormat {
        page_size: 16384,
        device_id: None,
        logical_pages: 1 << 30,
    };

    fn parse(s: &str) -> Result<Vec<TraceRecord>, TraceError> {
        parse_trace(s.as_bytes(), &FMT)
    }

    const HEADER: &str = "device_id,opcode,offset_bytes,length_bytes,timestamp_us\n";

    #[test]
    fn converts_bytes_to_pages() {
        let r = parse(&format!("{HEADER}0,R,32768,16384,100\n")).unwrap();
        assert_eq!(
            r,
            vec![TraceRecord {
                timestamp_us: 100.0,
                op: Op::Read,
                offset: 2,
                length: 1
            }]
        );
        let r = parse(&format!("{HEADER}0,W,40000,16385,5\n")).unwrap();
        assert_eq!((r[0].offset, r[0].length, r[0].op), (2, 2, Op::Write));
    }

    #[test]
    fn empty_inputs() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse(HEADER).unwrap().is_empty());
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse(&format!("{HEADER}0,R,0,16384,1\n0,X,0,16384,2\n")).unwrap_err();
        match err {
            TraceError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let err = parse(&format!("{HEADER}0,R,zero,16384,1\n")).unwrap_err();
        assert!(matches!(err, TraceError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn filters_device_and_wraps() {
        let fmt = TraceFormat {
            page_size: 4096,
            device_id: Some(7),
            logical_pages: 10,
        };
        let input = format!("{HEADER}7,R,{},4096,1\n3,R,0,4096,2\n7,W,4096,4096,3\n", 12 * 4096);
        let r = parse_trace(input.as_bytes(), &fmt).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].offset, 2);
        assert_eq!(r[1].offset, 1);
    }

    #[test]
    fn unsorted_timestamps_are_sorted_stably() {
        let r = parse(&format!("{HEADER}0,R,0,1,5\n0,R,16384,1,1\n0,W,32768,1,5\n")).unwrap();
        let got: Vec<_> = r.iter().map(|r| (r.timestamp_us, r.offset)).collect();
        assert_eq!(got, vec![(1.0, 1), (5.0, 0), (5.0, 2)]);
    }

    #[test]
    fn pages_wrap_at_capacity() {
        let r = TraceRecord {
            timestamp_us: 0.0,
            op: Op::Read,
            offset: 8,
            length: 4,
        };
        assert_eq!(r.pages(10).collect::<Vec<_>>(), vec![8, 9, 0, 1]);
    }

    #[test]
    fn sequential_wraps_at_footprint() {
        let spec = SyntheticSpec::new(Pattern::Sequential, 1.0, 100, 250);
        let offsets: Vec<u64> = spec.iter().map(|r| r.offset).collect();
        let expect: Vec<u64> = (0..100).chain(0..100).chain(0..50).collect();
        assert_eq!(offsets, expect);
    }

    #[test]
    fn sequential_steps_by_request_size() {
        let mut spec = SyntheticSpec::new(Pattern::Sequential, 1.0, 120, 500);
        spec.request_size = 4;
        let offs: Vec<u64> = spec.iter().map(|r| r.offset).collect();
        for w in offs.windows(2) {
            assert_eq!(w[1], (w[0] + 4) % 120);
        }
    }

    #[test]
    fn random_is_reproducible_and_centered() {
        let mut spec = SyntheticSpec::new(Pattern::Random, 1.0, 10_000, 1_000_000);
        spec.seed = 42;
        let a: Vec<u64> = spec.iter().take(100).map(|r| r.offset).collect();
        let b: Vec<u64> = spec.iter().take(100).map(|r| r.offset).collect();
        assert_eq!(a, b);
        let mean = spec.iter().map(|r| r.offset as f64).sum::<f64>() / 1e6;
        let expect = (10_000.0 - 1.0) / 2.0;
        assert!((mean - expect).abs() / expect < 0.01, "mean {mean}");
    }

    #[test]
    fn random_passes_chi_square() {
        let mut spec = SyntheticSpec::new(Pattern::Random, 1.0, 100, 1_000_000);
        spec.seed = 9;
        let mut bins = [0u64; 100];
        for r in spec.iter() {
            bins[r.offset as usize] += 1;
        }
        let expected = 10_000.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 95th percentile of chi-square with 99 degrees of freedom.
        assert!(chi2 < 123.225, "chi2 {chi2}");
    }

    #[test]
    fn read_ratio_holds() {
        let mut spec = SyntheticSpec::new(Pattern::Random, 0.55, 1000, 1_000_000);
        spec.seed = 3;
        let reads = spec.iter().filter(|r| r.op == Op::Read).count() as f64;
        assert!((reads / 1e6 - 0.55).abs() < 0.01);
    }

    #[test]
    fn mixed_has_runs_and_jumps() {
        let mut spec = SyntheticSpec::new(Pattern::Mixed, 1.0, 1_000_000, 100_000);
        spec.seed = 5;
        let offs: Vec<u64> = spec.iter().map(|r| r.offset).collect();
        let seq = offs.windows(2).filter(|w| w[1] == w[0] + 1).count() as f64;
        let frac = seq / (offs.len() - 1) as f64;
        assert!((frac - 0.5).abs() < 0.02, "sequential fraction {frac}");
    }

    #[test]
    fn hotspot_concentrates() {
        let mut spec = SyntheticSpec::new(Pattern::Hotspot, 1.0, 1000, 100_000);
        spec.hot_offset = 10;
        spec.hot_pages = 2;
        spec.seed = 1;
        let hot = spec.iter().filter(|r| (10..12).contains(&r.offset)).count() as f64;
        assert!(hot / 1e5 > 0.89);
    }

    #[test]
    fn footprint_must_fit() {
        let spec = SyntheticSpec::new(Pattern::Random, 1.0, 101, 1);
        assert!(generate_synthetic(&spec, 100).is_err());
        assert_eq!(generate_synthetic(&spec, 101).unwrap().len(), 1);
    }

    #[test]
    fn presets_exist() {
        assert_eq!(preset("Syn1"), Some((Pattern::Random, 1.0)));
        assert_eq!(preset("syn2"), Some((Pattern::Mixed, 1.0)));
        assert_eq!(preset("ali121"), Some((Pattern::Sequential, 0.55)));
        for name in PRESET_NAMES {
            assert!(preset(name).is_some());
        }
        assert_eq!(preset("nope"), None);
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            rows in prop::collection::vec((0u64..1_000_000, 1u32..64, any::<bool>(), 0u32..1_000_000), 0..50)
        ) {
            let mut records: Vec<TraceRecord> = rows
                .into_iter()
                .map(|(offset, length, read, ts)| TraceRecord {
                    timestamp_us: f64::from(ts) / 8.0,
                    op: if read { Op::Read } else { Op::Write },
                    offset,
                    length,
                })
                .collect();
            records.sort_by(|a, b| a.timestamp_us.total_cmp(&b.timestamp_us));
            let mut buf = Vec::new();
            write_trace(&mut buf, &records, FMT.page_size, 0).unwrap();
            let back = parse_trace(buf.as_slice(), &FMT).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
