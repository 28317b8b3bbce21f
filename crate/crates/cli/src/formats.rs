//! Matrix, path and calibration file formats.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! parsing an emitted file reproduces every value bit for bit.

use std::io::{Read, Write};

use ctmc_bridge::complexity::CoefficientFit;
use ctmc_bridge::samplers::SamplerKind;
use ctmc_bridge::{Error, RateMatrix, Result, SamplePath, Segment, StateSpace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Json,
}

impl MatrixFormat {
    /// Guesses from a file extension; anything but `.json` is CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => MatrixFormat::Json,
            _ => MatrixFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PathFormat {
    Jsonl,
    Csv,
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn parse_f64(field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{field}`: {e}")))
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    labels: Vec<String>,
    q: Vec<Vec<f64>>,
}

pub fn write_matrix(q: &RateMatrix, format: MatrixFormat, out: &mut dyn Write) -> Result<()> {
    let n = q.n();
    match format {
        MatrixFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(q.states().labels()).map_err(parse_err)?;
            for i in 0..n {
                w.write_record((0..n).map(|j| q.matrix()[(i, j)].to_string())).map_err(parse_err)?;
            }
            w.flush().map_err(parse_err)
        }
        MatrixFormat::Json => {
            let doc = MatrixJson {
                labels: q.states().labels().to_vec(),
                q: (0..n).map(|i| (0..n).map(|j| q.matrix()[(i, j)]).collect()).collect(),
            };
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(parse_err)?;
            writeln!(out).map_err(parse_err)
        }
    }
}

pub fn read_matrix(input: &mut dyn Read, format: MatrixFormat) -> Result<RateMatrix> {
    let (labels, rows) = match format {
        MatrixFormat::Csv => {
            let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
            let labels: Vec<String> = r.headers().map_err(parse_err)?.iter().map(str::to_owned).collect();
            let mut rows = Vec::new();
            for record in r.records() {
                let record = record.map_err(parse_err)?;
                rows.push(record.iter().map(parse_f64).collect::<Result<Vec<f64>>>()?);
            }
            (labels, rows)
        }
        MatrixFormat::Json => {
            let doc: MatrixJson = serde_json::from_reader(input).map_err(parse_err)?;
            (doc.labels, doc.q)
        }
    };
    if rows.len() != labels.len() || rows.iter().any(|r| r.len() != labels.len()) {
        return Err(Error::Parse(format!(
            "matrix must be square with one row per label ({} labels, {} rows)",
            labels.len(),
            rows.len()
        )));
    }
    RateMatrix::from_rows(&rows, StateSpace::new(labels)?)
}

/// A sampled path with its position in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberedPath {
    pub path_id: usize,
    pub path: SamplePath,
}

#[derive(Serialize, Deserialize)]
struct SegmentRecord {
    state: String,
    t_in: f64,
    t_out: f64,
}

#[derive(Serialize, Deserialize)]
struct PathRecord {
    path_id: usize,
    segments: Vec<SegmentRecord>,
}

const PATH_CSV_HEADER: [&str; 5] = ["path_id", "seg_index", "state", "t_in", "t_out"];

pub struct PathWriter<'a> {
    states: StateSpace,
    inner: PathSink<'a>,
}

enum PathSink<'a> {
    Jsonl(&'a mut dyn Write),
    Csv(Box<csv::Writer<&'a mut dyn Write>>),
}

impl<'a> PathWriter<'a> {
    pub fn new(states: &StateSpace, format: PathFormat, out: &'a mut dyn Write) -> Result<Self> {
        let inner = match format {
            PathFormat::Jsonl => PathSink::Jsonl(out),
            PathFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(PATH_CSV_HEADER).map_err(parse_err)?;
                PathSink::Csv(Box::new(w))
            }
        };
        Ok(Self { states: states.clone(), inner })
    }

    pub fn write(&mut self, path_id: usize, path: &SamplePath) -> Result<()> {
        let label = |s: usize| self.states.label(s).to_owned();
        match &mut self.inner {
            PathSink::Jsonl(out) => {
                let record = PathRecord {
                    path_id,
                    segments: path
                        .intervals()
                        .map(|(s, t_in, t_out)| SegmentRecord { state: label(s), t_in, t_out })
                        .collect(),
                };
                serde_json::to_writer(&mut **out, &record).map_err(parse_err)?;
                writeln!(out).map_err(parse_err)
            }
            PathSink::Csv(w) => {
                for (k, (s, t_in, t_out)) in path.intervals().enumerate() {
                    w.write_record([path_id.to_string(), k.to_string(), label(s), t_in.to_string(), t_out.to_string()])
                        .map_err(parse_err)?;
                }
                Ok(())
            }
        }
    }

    pub fn finish(self) -> Result<()> {
        match self.inner {
            PathSink::Jsonl(out) => out.flush().map_err(parse_err),
            PathSink::Csv(mut w) => w.flush().map_err(parse_err),
        }
    }
}

pub fn write_paths(states: &StateSpace, paths: &[NumberedPath], format: PathFormat, out: &mut dyn Write) -> Result<()> {
    let mut w = PathWriter::new(states, format, out)?;
    for p in paths {
        w.write(p.path_id, &p.path)?;
    }
    w.finish()
}

/// `(state, t_in, t_out)` as read from a file.
type Triple = (String, f64, f64);

/// Rebuilds a path from triples, checking contiguity.
fn assemble(path_id: usize, states: &StateSpace, segments: Vec<Triple>) -> Result<NumberedPath> {
    let bad = |msg: String| Error::Parse(format!("path {path_id}: {msg}"));
    let Some(&(_, _, horizon)) = segments.last() else {
        return Err(bad("no segments".into()));
    };
    let mut out = Vec::with_capacity(segments.len());
    let mut expected_start = 0.0;
    for (label, t_in, t_out) in segments {
        if t_in != expected_start {
            return Err(bad(format!("segment starts at {t_in}, expected {expected_start}")));
        }
        out.push(Segment { state: states.index_of(&label)?, entry: t_in });
        expected_start = t_out;
    }
    let path = SamplePath::new(horizon, out).map_err(|e| bad(e.to_string()))?;
    Ok(NumberedPath { path_id, path })
}

pub fn read_paths(input: &mut dyn Read, states: &StateSpace, format: PathFormat) -> Result<Vec<NumberedPath>> {
    match format {
        PathFormat::Jsonl => {
            let mut text = String::new();
            input.read_to_string(&mut text).map_err(parse_err)?;
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|line| {
                    let record: PathRecord = serde_json::from_str(line).map_err(parse_err)?;
                    let segments = record.segments.into_iter().map(|s| (s.state, s.t_in, s.t_out)).collect();
                    assemble(record.path_id, states, segments)
                })
                .collect()
        }
        PathFormat::Csv => {
            let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
            let header: Vec<String> = r.headers().map_err(parse_err)?.iter().map(str::to_owned).collect();
            if header != PATH_CSV_HEADER {
                return Err(Error::Parse(format!("path CSV header must be {}", PATH_CSV_HEADER.join(","))));
            }
            let mut paths = Vec::new();
            let mut current: Option<(usize, Vec<Triple>)> = None;
            for record in r.records() {
                let record = record.map_err(parse_err)?;
                let id: usize = record[0].parse().map_err(parse_err)?;
                let seg: usize = record[1].parse().map_err(parse_err)?;
                let row = (record[2].to_owned(), parse_f64(&record[3])?, parse_f64(&record[4])?);
                match &mut current {
                    Some((cid, segs)) if *cid == id => {
                        if seg != segs.len() {
                            return Err(Error::Parse(format!("path {id}: segment {seg} out of order")));
                        }
                        segs.push(row);
                    }
                    _ => {
                        if seg != 0 {
                            return Err(Error::Parse(format!("path {id}: first segment has index {seg}")));
                        }
                        if let Some((cid, segs)) = current.replace((id, vec![row])) {
                            paths.push(assemble(cid, states, segs)?);
                        }
                    }
                }
            }
            if let Some((cid, segs)) = current {
                paths.push(assemble(cid, states, segs)?);
            }
            Ok(paths)
        }
    }
}

/// One row of the fitted-coefficients CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub sampler: SamplerKind,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub residual: f64,
}

impl CoefficientRow {
    pub fn new(sampler: SamplerKind, n: usize, fit: &CoefficientFit) -> Self {
        Self { sampler, n, alpha: fit.alpha, beta: fit.beta, residual: fit.residual }
    }
}

pub fn write_coefficient_rows(rows: &[CoefficientRow], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(parse_err)?;
    }
    w.flush().map_err(parse_err)
}

pub fn read_coefficient_rows(input: &mut dyn Read) -> Result<Vec<CoefficientRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(parse_err)).collect()
}
