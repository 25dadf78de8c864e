//! Text formats for tables, interactions and analysis results.
//!
//! Masked-output and weight tables use the line-oriented `itable.v1` format:
//!
//! ```text
//! format=itable.v1
//! n=2
//! sample_id=img-17
//! 0,0.125
//! 1,0.5
//! 2,-1
//! 3,2.25
//! ```
//!
//! Every other result is a CSV document: `# key=value` metadata lines, one
//! header row, then data rows. Floats are written in Rust's shortest
//! round-trip representation, so files re-parse to identical values.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{GroundTruthWeights, NoiseStats, RatioCurve, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::interactions::{AndOrInteractions, InteractionKind, InteractionVector, MaskedOutputTable};
use crate::metrics::OrderDistribution;
use crate::sparsify::Decomposition;
use crate::subsets::{check_n, SubsetTable};

pub const TABLE_FORMAT: &str = "itable.v1";

/// A parsed `itable.v1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFile {
    pub sample_id: String,
    pub table: SubsetTable,
}

impl TableFile {
    pub fn into_masked(self) -> MaskedOutputTable {
        MaskedOutputTable::new(self.sample_id, self.table)
    }

    pub fn into_weights(self) -> GroundTruthWeights {
        GroundTruthWeights::new(self.table)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("not an unsigned integer: {s:?}")))
}

/// Parses an `itable.v1` document. Rows may appear in any order; the result
/// is in canonical mask order.
pub fn parse_table_str(text: &str) -> Result<TableFile> {
    let mut format = None;
    let mut n = None;
    let mut sample_id = String::new();
    let mut slots: Vec<Option<f64>> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == "mask,value" {
            continue;
        }
        if let Some((mask, value)) = line.split_once(',') {
            let n = n.ok_or_else(|| parse_err(line_no, "data row before n= header"))?;
            if format.is_none() {
                return Err(parse_err(line_no, "data row before format= header"));
            }
            let mask = parse_usize(mask, line_no)?;
            if mask >= 1usize << n {
                return Err(parse_err(line_no, format!("mask {mask} out of range for n = {n}")));
            }
            let value = parse_f64(value, line_no)?;
            if slots[mask].replace(value).is_some() {
                return Err(Error::DuplicateMask { mask, line: line_no });
            }
        } else if let Some((key, value)) = line.split_once('=') {
            match key.trim() {
                "format" => {
                    if value.trim() != TABLE_FORMAT {
                        return Err(parse_err(line_no, format!("unsupported format {value:?}")));
                    }
                    format = Some(());
                }
                "n" => {
                    let v = parse_usize(value, line_no)?;
                    check_n(v).map_err(|e| parse_err(line_no, e.to_string()))?;
                    if n.replace(v).is_some() {
                        return Err(parse_err(line_no, "n declared twice"));
                    }
                    slots = vec![None; 1 << v];
                }
                "sample_id" => sample_id = value.trim().to_string(),
                other => return Err(parse_err(line_no, format!("unknown header {other:?}"))),
            }
        } else {
            return Err(parse_err(line_no, format!("unrecognised line {line:?}")));
        }
    }

    if format.is_none() {
        return Err(parse_err(0, format!("missing format={TABLE_FORMAT} header")));
    }
    let n = n.ok_or_else(|| parse_err(0, "missing n= header"))?;
    let values = slots
        .into_iter()
        .enumerate()
        .map(|(mask, v)| v.ok_or(Error::MissingMask { mask }))
        .collect::<Result<Vec<_>>>()?;
    Ok(TableFile {
        sample_id,
        table: SubsetTable::new(n, values)?,
    })
}

pub fn parse_table(path: impl AsRef<Path>) -> Result<TableFile> {
    parse_table_str(&std::fs::read_to_string(path)?)
}

pub fn format_table(sample_id: &str, table: &SubsetTable) -> String {
    let mut out = format!("format={TABLE_FORMAT}\nn={}\nsample_id={sample_id}\n", table.n());
    for (mask, v) in table.values().iter().enumerate() {
        let _ = writeln!(out, "{mask},{v}");
    }
    out
}

/// A CSV body with `# key=value` metadata lines in front.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvDocument {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDocument {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_meta(&mut self, meta: &[(String, String)]) {
        self.meta.extend_from_slice(meta);
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require_meta(&self, key: &str) -> Result<&str> {
        self.meta(key)
            .ok_or_else(|| parse_err(0, format!("missing metadata key {key:?}")))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = CsvDocument::default();
        let mut header_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim_start()
                    .split_once('=')
                    .ok_or_else(|| parse_err(line_no, "metadata line without '='"))?;
                doc.meta.push((k.trim().to_string(), v.to_string()));
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if !header_seen {
                doc.columns = cells;
                header_seen = true;
            } else {
                if cells.len() != doc.columns.len() {
                    return Err(parse_err(
                        line_no,
                        format!("expected {} columns, found {}", doc.columns.len(), cells.len()),
                    ));
                }
                doc.rows.push(cells);
            }
        }
        if !header_seen {
            return Err(parse_err(0, "missing CSV header row"));
        }
        Ok(doc)
    }

    fn expect_columns(&self, columns: &[&str]) -> Result<()> {
        if self.columns != columns {
            return Err(parse_err(
                0,
                format!("expected columns {columns:?}, found {:?}", self.columns),
            ));
        }
        Ok(())
    }

    /// Parses every row as numbers, reporting the document line on failure.
    fn numeric_rows(&self) -> Result<Vec<Vec<f64>>> {
        let offset = self.meta.len() + 2;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|c| parse_f64(c, offset + i)).collect())
            .collect()
    }
}

/// `mask,order,kind,effect` rows for both kinds, AND first.
pub fn format_interactions(both: &AndOrInteractions, meta: &[(String, String)]) -> String {
    let mut doc = CsvDocument::new(&["mask", "order", "kind", "effect"])
        .with_meta("n", both.and.n())
        .with_meta("v_empty", both.v_empty);
    doc.push_meta(meta);
    for vector in [&both.and, &both.or] {
        for (s, e) in vector.iter_nonempty() {
            doc.push_row(vec![
                s.bits().to_string(),
                s.order().to_string(),
                vector.kind().to_string(),
                e.to_string(),
            ]);
        }
    }
    doc.render()
}

pub fn parse_interactions(text: &str) -> Result<AndOrInteractions> {
    let doc = CsvDocument::parse(text)?;
    doc.expect_columns(&["mask", "order", "kind", "effect"])?;
    let n = parse_usize(doc.require_meta("n")?, 0)?;
    check_n(n)?;
    let v_empty = parse_f64(doc.require_meta("v_empty")?, 0)?;
    let mut and = vec![0.0; 1 << n];
    let mut or = vec![0.0; 1 << n];
    let offset = doc.meta.len() + 2;
    for (i, row) in doc.rows.iter().enumerate() {
        let line = offset + i;
        let mask = parse_usize(&row[0], line)?;
        if mask == 0 || mask >= 1 << n {
            return Err(parse_err(line, format!("mask {mask} out of range")));
        }
        let effect = parse_f64(&row[3], line)?;
        match row[2].parse::<InteractionKind>()? {
            InteractionKind::And => and[mask] = effect,
            InteractionKind::Or => or[mask] = effect,
        }
    }
    Ok(AndOrInteractions {
        and: InteractionVector::new(InteractionKind::And, SubsetTable::new(n, and)?)?,
        or: InteractionVector::new(InteractionKind::Or, SubsetTable::new(n, or)?)?,
        v_empty,
    })
}

/// JSON header of a decomposition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionHeader {
    pub n: usize,
    pub zeta: f64,
    pub loss: f64,
    pub converged: bool,
}

pub fn format_decomposition(
    dec: &Decomposition,
    header: &DecompositionHeader,
    meta: &[(String, String)],
) -> Result<String> {
    let mut doc = CsvDocument::new(&["mask", "gamma", "delta"])
        .with_meta("header", serde_json::to_string(header)?);
    doc.push_meta(meta);
    for (mask, (g, d)) in dec
        .gamma()
        .values()
        .iter()
        .zip(dec.delta().values())
        .enumerate()
    {
        doc.push_row(vec![mask.to_string(), g.to_string(), d.to_string()]);
    }
    Ok(doc.render())
}

pub fn parse_decomposition(text: &str) -> Result<(Decomposition, DecompositionHeader)> {
    let doc = CsvDocument::parse(text)?;
    doc.expect_columns(&["mask", "gamma", "delta"])?;
    let header: DecompositionHeader = serde_json::from_str(doc.require_meta("header")?)?;
    check_n(header.n)?;
    let rows = doc.numeric_rows()?;
    if rows.len() != 1 << header.n {
        return Err(Error::dimension(1 << header.n, rows.len()));
    }
    let mut gamma = vec![0.0; rows.len()];
    let mut delta = vec![0.0; rows.len()];
    for (i, row) in rows.iter().enumerate() {
        if row[0] != i as f64 {
            return Err(parse_err(0, format!("row {i} has mask {}", row[0])));
        }
        gamma[i] = row[1];
        delta[i] = row[2];
    }
    let dec = Decomposition::new(
        SubsetTable::new(header.n, gamma)?,
        SubsetTable::new(header.n, delta)?,
        header.zeta,
    )?;
    Ok((dec, header))
}

pub fn format_distribution(dist: &OrderDistribution, meta: &[(String, String)]) -> String {
    let mut doc = CsvDocument::new(&["k", "strength"])
        .with_meta("n", dist.n)
        .with_meta("tau", dist.tau)
        .with_meta("Z", dist.z)
        .with_meta("empty", dist.empty);
    doc.push_meta(meta);
    for (i, s) in dist.strength.iter().enumerate() {
        doc.push_row(vec![(i + 1).to_string(), s.to_string()]);
    }
    doc.render()
}

pub fn parse_distribution(text: &str) -> Result<OrderDistribution> {
    let doc = CsvDocument::parse(text)?;
    doc.expect_columns(&["k", "strength"])?;
    let n = parse_usize(doc.require_meta("n")?, 0)?;
    let tau = parse_f64(doc.require_meta("tau")?, 0)?;
    let z = parse_f64(doc.require_meta("Z")?, 0)?;
    let empty = doc
        .require_meta("empty")?
        .trim()
        .parse::<bool>()
        .map_err(|_| parse_err(0, "empty must be true or false"))?;
    let rows = doc.numeric_rows()?;
    if rows.len() != n {
        return Err(Error::dimension(n, rows.len()));
    }
    let mut strength = vec![0.0; n];
    for row in rows {
        let k = row[0] as usize;
        if row[0] != k as f64 || k == 0 || k > n {
            return Err(parse_err(0, format!("order {} out of range", row[0])));
        }
        strength[k - 1] = row[1];
    }
    Ok(OrderDistribution {
        n,
        strength,
        tau,
        z,
        empty,
    })
}

pub fn format_ratio_curve(curve: &RatioCurve, meta: &[(String, String)]) -> String {
    let mut doc = CsvDocument::new(&["sigma2", "k", "r"]).with_meta("n", curve.n);
    doc.push_meta(meta);
    for (s, row) in curve.sigma2.iter().zip(&curve.ratios) {
        for (i, r) in row.iter().enumerate() {
            doc.push_row(vec![s.to_string(), (i + 1).to_string(), r.to_string()]);
        }
    }
    doc.render()
}

pub fn parse_ratio_curve(text: &str) -> Result<RatioCurve> {
    let doc = CsvDocument::parse(text)?;
    doc.expect_columns(&["sigma2", "k", "r"])?;
    let n = parse_usize(doc.require_meta("n")?, 0)?;
    let mut sigma2: Vec<f64> = Vec::new();
    let mut ratios: Vec<Vec<f64>> = Vec::new();
    for row in doc.numeric_rows()? {
        if sigma2.last() != Some(&row[0]) {
            sigma2.push(row[0]);
            ratios.push(Vec::new());
        }
        ratios.last_mut().expect("pushed above").push(row[2]);
    }
    if ratios.iter().any(|r| r.len() + 1 != n) {
        return Err(parse_err(0, format!("each σ² needs {} ratios", n.saturating_sub(1))));
    }
    Ok(RatioCurve { n, sigma2, ratios })
}

/// `segment,sigma2,order,strength` rows. Segment 0 is the initial
/// distribution (labelled with the first segment's σ²); segment `i` is the
/// state after the `i`-th schedule entry.
pub fn format_trajectory(record: &TrajectoryRecord, meta: &[(String, String)]) -> String {
    let mut doc = CsvDocument::new(&["segment", "sigma2", "order", "strength"])
        .with_meta("n", record.initial_distribution.n);
    doc.push_meta(meta);
    let first_sigma2 = record.segments.first().map_or(0.0, |s| s.sigma2);
    let states = std::iter::once((first_sigma2, &record.initial_distribution))
        .chain(record.segments.iter().map(|s| (s.sigma2, &s.distribution)));
    for (segment, (sigma2, dist)) in states.enumerate() {
        for (i, s) in dist.strength.iter().enumerate() {
            doc.push_row(vec![
                segment.to_string(),
                sigma2.to_string(),
                (i + 1).to_string(),
                s.to_string(),
            ]);
        }
    }
    doc.render()
}

/// One checkpoint read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCheckpoint {
    pub segment: usize,
    pub sigma2: f64,
    pub strength: Vec<f64>,
}

pub fn parse_trajectory(text: &str) -> Result<Vec<TrajectoryCheckpoint>> {
    let doc = CsvDocument::parse(text)?;
    doc.expect_columns(&["segment", "sigma2", "order", "strength"])?;
    let mut out: Vec<TrajectoryCheckpoint> = Vec::new();
    for row in doc.numeric_rows()? {
        let segment = row[0] as usize;
        if out.last().map(|c| c.segment) != Some(segment) {
            out.push(TrajectoryCheckpoint {
                segment,
                sigma2: row[1],
                strength: Vec::new(),
            });
        }
        out.last_mut().expect("pushed above").strength.push(row[3]);
    }
    Ok(out)
}

pub fn format_noise_stats(stats: &NoiseStats, meta: &[(String, String)]) -> String {
    let mut doc = CsvDocument::new(&["mask", "order", "mean", "variance", "expected_variance"])
        .with_meta("n", stats.n)
        .with_meta("sigma", stats.sigma)
        .with_meta("trials", stats.trials);
    doc.push_meta(meta);
    for mask in 0..stats.mean.len() {
        doc.push_row(vec![
            mask.to_string(),
            mask.count_ones().to_string(),
            stats.mean[mask].to_string(),
            stats.variance[mask].to_string(),
            stats.expected_variance(mask).to_string(),
        ]);
    }
    doc.render()
}

pub fn parse_noise_stats(text: &str) -> Result<NoiseStats> {
    let doc = CsvDocument::parse(text)?;
    doc.expect_columns(&["mask", "order", "mean", "variance", "expected_variance"])?;
    let n = parse_usize(doc.require_meta("n")?, 0)?;
    let sigma = parse_f64(doc.require_meta("sigma")?, 0)?;
    let trials = parse_usize(doc.require_meta("trials")?, 0)?;
    let rows = doc.numeric_rows()?;
    if rows.len() != 1 << n {
        return Err(Error::dimension(1 << n, rows.len()));
    }
    Ok(NoiseStats {
        n,
        sigma,
        trials,
        mean: rows.iter().map(|r| r[2]).collect(),
        variance: rows.iter().map(|r| r[3]).collect(),
    })
}
