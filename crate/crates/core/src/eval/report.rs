//! Result tables: per-seed records, cell means, CSV and text output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "LB")]
    LowerBound,
    #[serde(rename = "S1")]
    Scheme1,
    #[serde(rename = "S2")]
    Scheme2,
    #[serde(rename = "S3t")]
    Scheme3Target,
    #[serde(rename = "S3s")]
    Scheme3Source,
    #[serde(rename = "UB")]
    UpperBound,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::LowerBound,
        Scheme::Scheme1,
        Scheme::Scheme2,
        Scheme::Scheme3Target,
        Scheme::Scheme3Source,
        Scheme::UpperBound,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Scheme::LowerBound => "LB",
            Scheme::Scheme1 => "S1",
            Scheme::Scheme2 => "S2",
            Scheme::Scheme3Target => "S3t",
            Scheme::Scheme3Source => "S3s",
            Scheme::UpperBound => "UB",
        }
    }

    /// Column heading used in text tables.
    pub fn heading(self) -> &'static str {
        match self {
            Scheme::Scheme3Target => "S3(t)",
            Scheme::Scheme3Source => "S3(s)",
            s => s.code(),
        }
    }

    /// Variants built on stacked target/source layers need at least two layers.
    pub fn min_depth(self) -> usize {
        match self {
            Scheme::Scheme3Target | Scheme::Scheme3Source => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace(['(', ')'], "");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.code().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| Error::Format(format!("unknown scheme '{s}'")))
    }
}

pub fn pair_name(source: &str, target: &str) -> String {
    format!("{source}->{target}")
}

pub fn split_pair(pair: &str) -> Option<(&str, &str)> {
    pair.split_once("->")
}

/// One training run: a (pair, depth, scheme) cell under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub pair: String,
    pub depth: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub accuracy_pct: f64,
    pub pretrain_s: f64,
    pub finetune_s: f64,
}

impl RunRecord {
    pub fn key(&self) -> CellKey {
        CellKey {
            pair: self.pair.clone(),
            depth: self.depth,
            scheme: self.scheme,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub pair: String,
    pub depth: usize,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub pair: String,
    pub depth: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub mean: f64,
    pub per_seed: Vec<(u64, f64)>,
    pub pretrain_s: f64,
    pub finetune_s: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub records: Vec<RunRecord>,
    pub failures: Vec<FailedRun>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.failures.is_empty()
    }

    /// Adds a record, replacing any earlier one for the same cell and seed.
    pub fn push(&mut self, record: RunRecord) {
        self.failures.retain(|f| {
            !(f.pair == record.pair && f.depth == record.depth && f.scheme == record.scheme && f.seed == record.seed)
        });
        if let Some(old) = self.records.iter_mut().find(|r| r.key() == record.key() && r.seed == record.seed) {
            *old = record;
        } else {
            self.records.push(record);
        }
    }

    pub fn push_failure(&mut self, failure: FailedRun) {
        self.failures.push(failure);
    }

    pub fn extend(&mut self, other: ResultTable) {
        for r in other.records {
            self.push(r);
        }
        self.failures.extend(other.failures);
    }

    pub fn contains(&self, pair: &str, depth: usize, scheme: Scheme, seed: u64) -> bool {
        self.records
            .iter()
            .any(|r| r.pair == pair && r.depth == depth && r.scheme == scheme && r.seed == seed)
    }

    /// Records in canonical order: pair, depth, scheme, seed.
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| {
            (&a.pair, a.depth, a.scheme, a.seed).cmp(&(&b.pair, b.depth, b.scheme, b.seed))
        });
        self.failures.sort_by(|a, b| {
            (&a.pair, a.depth, a.scheme, a.seed).cmp(&(&b.pair, b.depth, b.scheme, b.seed))
        });
    }

    pub fn cells(&self) -> BTreeMap<CellKey, CellSummary> {
        let mut out: BTreeMap<CellKey, CellSummary> = BTreeMap::new();
        for r in &self.records {
            let c = out.entry(r.key()).or_insert_with(|| CellSummary {
                mean: 0.0,
                per_seed: Vec::new(),
                pretrain_s: 0.0,
                finetune_s: 0.0,
                failed: 0,
            });
            c.per_seed.push((r.seed, r.accuracy_pct));
            c.pretrain_s += r.pretrain_s;
            c.finetune_s += r.finetune_s;
        }
        for f in &self.failures {
            let key = CellKey {
                pair: f.pair.clone(),
                depth: f.depth,
                scheme: f.scheme,
            };
            out.entry(key)
                .or_insert_with(|| CellSummary {
                    mean: f64::NAN,
                    per_seed: Vec::new(),
                    pretrain_s: 0.0,
                    finetune_s: 0.0,
                    failed: 0,
                })
                .failed += 1;
        }
        for c in out.values_mut() {
            c.per_seed.sort_by_key(|p| p.0);
            if !c.per_seed.is_empty() {
                c.mean = c.per_seed.iter().map(|p| p.1).sum::<f64>() / c.per_seed.len() as f64;
            }
        }
        out
    }

    pub fn mean(&self, pair: &str, depth: usize, scheme: Scheme) -> Option<f64> {
        let vals: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.pair == pair && r.depth == depth && r.scheme == scheme)
            .map(|r| r.accuracy_pct)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut sorted = self.clone();
        sorted.sort();
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &sorted.records {
            w.serialize(r)?;
        }
        if sorted.records.is_empty() {
            w.write_record(["pair", "depth", "scheme", "seed", "accuracy_pct", "pretrain_s", "finetune_s"])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut table = ResultTable::new();
        for row in rdr.deserialize() {
            table.push(row?);
        }
        Ok(table)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        Self::from_csv(&text).map_err(|e| e.at(path))
    }

    pub fn failures_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.failures)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "text" | "txt" => Ok(ReportFormat::Text),
            _ => Err(Error::Format(format!("unknown report format '{s}'"))),
        }
    }
}

fn layer_heading(depth: usize) -> String {
    if depth == 1 {
        "1 layer".to_string()
    } else {
        format!("{depth} layers")
    }
}

/// Text table with one block per source corpus, the targets as rows and
/// per-depth groups of scheme columns. Failed cells read "failed", absent
/// ones "--".
pub fn render_text(table: &ResultTable) -> Result<String> {
    if table.is_empty() {
        return Err(Error::Empty("result table"));
    }
    let cells = table.cells();
    let mut sources: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut depths: BTreeMap<usize, BTreeSet<Scheme>> = BTreeMap::new();
    for key in cells.keys() {
        let (src, tgt) = split_pair(&key.pair).unwrap_or(("", key.pair.as_str()));
        sources.entry(src.to_string()).or_default().insert(tgt.to_string());
        depths.entry(key.depth).or_default().insert(key.scheme);
    }

    let mut out = String::new();
    for (src, targets) in &sources {
        let name_w = targets.iter().map(|t| t.len()).max().unwrap_or(0).max("Noise Type".len());
        if !out.is_empty() {
            out.push('\n');
        }
        if !src.is_empty() {
            out.push_str(&format!("Source: {src}\n"));
        }
        let mut header = format!("{:name_w$}", "Noise Type");
        for (depth, schemes) in &depths {
            header.push_str(&format!(" || {} ({})", layer_heading(*depth),
                schemes.iter().map(|s| s.heading()).collect::<Vec<_>>().join(" ")));
        }
        out.push_str(header.trim_end());
        out.push('\n');
        for tgt in targets {
            let pair = if src.is_empty() { tgt.clone() } else { pair_name(src, tgt) };
            let mut groups = Vec::new();
            for (depth, schemes) in &depths {
                let group: Vec<String> = schemes
                    .iter()
                    .map(|&scheme| {
                        let key = CellKey {
                            pair: pair.clone(),
                            depth: *depth,
                            scheme,
                        };
                        match cells.get(&key) {
                            Some(c) if !c.per_seed.is_empty() => format!("{} {:.2}", scheme.heading(), c.mean),
                            Some(_) => format!("{} failed", scheme.heading()),
                            None => format!("{} --", scheme.heading()),
                        }
                    })
                    .collect();
                groups.push(group.join(" | "));
            }
            out.push_str(&format!("{:name_w$} | {}\n", tgt, groups.join(" || ")));
        }
    }
    Ok(out)
}

/// Mean pre-training and fine-tuning seconds per run, one row per scheme
/// and one column per depth, over every pair and seed.
pub fn render_timings(table: &ResultTable) -> Result<String> {
    if table.records.is_empty() {
        return Err(Error::Empty("result table"));
    }
    let mut acc: BTreeMap<(Scheme, usize), (f64, f64, usize)> = BTreeMap::new();
    let mut depths = BTreeSet::new();
    for r in &table.records {
        let e = acc.entry((r.scheme, r.depth)).or_default();
        e.0 += r.pretrain_s;
        e.1 += r.finetune_s;
        e.2 += 1;
        depths.insert(r.depth);
    }
    let mut out = String::from("Mean time per run in seconds (pre-train / fine-tune)\n");
    out.push_str(&format!("{:8}", "Scheme"));
    for d in &depths {
        out.push_str(&format!(" | {:>17}", layer_heading(*d)));
    }
    out.push('\n');
    let schemes: BTreeSet<Scheme> = acc.keys().map(|k| k.0).collect();
    for s in schemes {
        out.push_str(&format!("{:8}", s.heading()));
        for d in &depths {
            let cell = match acc.get(&(s, *d)) {
                Some(&(p, f, n)) => format!("{:.2} / {:.2}", p / n as f64, f / n as f64),
                None => "--".to_string(),
            };
            out.push_str(&format!(" | {cell:>17}"));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn emit_result_table(table: &ResultTable, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Empty("result table"));
    }
    let text = match format {
        ReportFormat::Csv => table.to_csv()?,
        ReportFormat::Text => render_text(table)?,
    };
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::from(e).at(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pair: &str, depth: usize, scheme: Scheme, seed: u64, acc: f64) -> RunRecord {
        RunRecord {
            pair: pair.into(),
            depth,
            scheme,
            seed,
            accuracy_pct: acc,
            pretrain_s: 1.5,
            finetune_s: 0.25,
        }
    }

    #[test]
    fn scheme_codes_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.code().parse::<Scheme>().unwrap(), s);
            assert_eq!(s.heading().parse::<Scheme>().unwrap(), s);
        }
        assert!("S4".parse::<Scheme>().is_err());
    }

    #[test]
    fn single_cell_table_has_one_data_row() {
        let mut t = ResultTable::new();
        t.push(rec("street->babble", 1, Scheme::LowerBound, 0, 70.0));
        let csv = t.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap(), "pair,depth,scheme,seed,accuracy_pct,pretrain_s,finetune_s");
        assert_eq!(csv.lines().nth(1).unwrap(), "street->babble,1,LB,0,70.0,1.5,0.25");
        let text = render_text(&t).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("babble")).collect();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn reference_row_layout() {
        let mut t = ResultTable::new();
        for (s, v) in [
            (Scheme::LowerBound, 74.95),
            (Scheme::Scheme1, 77.15),
            (Scheme::Scheme2, 76.44),
            (Scheme::UpperBound, 78.61),
        ] {
            t.push(rec("Street->Babble", 1, s, 0, v));
        }
        let text = render_text(&t).unwrap();
        let want = "Source: Street\nNoise Type || 1 layer (LB S1 S2 UB)\nBabble     | LB 74.95 | S1 77.15 | S2 76.44 | UB 78.61\n";
        assert_eq!(text, want);
    }

    #[test]
    fn csv_round_trip_reproduces_means() {
        let mut t = ResultTable::new();
        let mut state = 12345u64;
        for pair in ["a->b", "a->c"] {
            for depth in 1..=3 {
                for s in Scheme::ALL {
                    for seed in 0..5 {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                        let acc = 50.0 + (state >> 11) as f64 / (1u64 << 53) as f64 * 50.0;
                        t.push(rec(pair, depth, s, seed, acc));
                    }
                }
            }
        }
        let back = ResultTable::from_csv(&t.to_csv().unwrap()).unwrap();
        let (a, b) = (t.cells(), back.cells());
        assert_eq!(a.len(), b.len());
        for (k, v) in &a {
            let w = &b[k];
            assert!((v.mean - w.mean).abs() < 1e-9);
            // mean recomputed independently from the per-seed values
            let m = w.per_seed.iter().map(|p| p.1).sum::<f64>() / w.per_seed.len() as f64;
            assert!((m - w.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn failed_and_missing_cells() {
        let mut t = ResultTable::new();
        t.push(rec("s->x", 2, Scheme::LowerBound, 0, 60.0));
        t.push_failure(FailedRun {
            pair: "s->x".into(),
            depth: 2,
            scheme: Scheme::Scheme2,
            seed: 0,
            error: "boom".into(),
        });
        t.push(rec("s->y", 2, Scheme::Scheme2, 0, 61.0));
        let text = render_text(&t).unwrap();
        assert!(text.contains("x          | LB 60.00 | S2 failed"), "{text}");
        assert!(text.contains("y          | LB -- | S2 61.00"), "{text}");
        assert_eq!(t.cells()[&CellKey { pair: "s->x".into(), depth: 2, scheme: Scheme::Scheme2 }].failed, 1);
        // a later success clears the failure
        t.push(rec("s->x", 2, Scheme::Scheme2, 0, 62.0));
        assert!(t.failures.is_empty());
    }

    #[test]
    fn push_replaces_same_seed() {
        let mut t = ResultTable::new();
        t.push(rec("a->b", 1, Scheme::UpperBound, 3, 10.0));
        t.push(rec("a->b", 1, Scheme::UpperBound, 3, 20.0));
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.mean("a->b", 1, Scheme::UpperBound), Some(20.0));
        assert!(emit_result_table(&ResultTable::new(), ReportFormat::Csv, "/nonexistent/x").is_err());
    }
}
