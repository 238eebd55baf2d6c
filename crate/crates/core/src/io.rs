//! File formats: CSV features, MatrixMarket graphs, label files, JSON
//! results and JSON-lines traces.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dcd::IterationRecord;
use crate::error::{Error, Result};
use crate::graph::{validate_graph, EdgeOrientation, FeatureMatrix, SparseSimilarity};
use crate::init::{MultiStartConfig, MultiStartResult};

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Reads one sample per row. With `header`, the first line is skipped.
pub fn read_features_csv(path: &Path, header: bool) -> Result<FeatureMatrix> {
    let file = File::open(path)?;
    read_features_from(file, header, &path.display().to_string())
}

pub fn read_features_from<R: Read>(reader: R, header: bool, name: &str) -> Result<FeatureMatrix> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| parse_error(name, line, format!("not a number: {field:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    FeatureMatrix::from_rows(&rows)
}

const MM_BANNER: &str = "%%MatrixMarket matrix coordinate real symmetric";

/// Writes the lower triangle with 1-based indices. Weights use the shortest
/// representation that parses back to the same `f64`.
pub fn write_matrix_market<W: Write>(graph: &SparseSimilarity, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MM_BANNER}")?;
    writeln!(out, "{} {} {}", graph.n(), graph.n(), graph.num_edges())?;
    for i in 0..graph.n() {
        for (j, w) in graph.neighbors(i).filter(|&(j, _)| j < i) {
            writeln!(out, "{} {} {}", i + 1, j + 1, w)?;
        }
    }
    out.flush()
}

pub fn write_matrix_market_file(graph: &SparseSimilarity, path: &Path) -> Result<()> {
    write_matrix_market(graph, BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn read_matrix_market_file(path: &Path) -> Result<SparseSimilarity> {
    let file = File::open(path)?;
    read_matrix_market(BufReader::new(file), &path.display().to_string())
}

/// Accepts `coordinate` matrices with `real`, `integer` or `pattern` fields.
/// `symmetric` files are read as undirected, `general` files as directed
/// and symmetrized by the elementwise maximum.
pub fn read_matrix_market<R: BufRead>(reader: R, name: &str) -> Result<SparseSimilarity> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines
        .next()
        .ok_or_else(|| parse_error(name, 1, "empty file"))?;
    let banner = banner?;
    let tokens: Vec<String> = banner
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5
        || tokens[0] != "%%matrixmarket"
        || tokens[1] != "matrix"
        || tokens[2] != "coordinate"
    {
        return Err(parse_error(
            name,
            1,
            "expected a '%%MatrixMarket matrix coordinate' banner",
        ));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        other => {
            return Err(parse_error(
                name,
                1,
                format!("unsupported field type {other:?}"),
            ))
        }
    };
    let orientation = match tokens[4].as_str() {
        "symmetric" => EdgeOrientation::Undirected,
        "general" => EdgeOrientation::Directed,
        other => {
            return Err(parse_error(
                name,
                1,
                format!("unsupported symmetry {other:?}"),
            ))
        }
    };

    let mut size: Option<(usize, usize)> = None;
    let mut entries = Vec::new();
    for (line_no, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((n, expected)) = size else {
            if fields.len() != 3 {
                return Err(parse_error(name, line_no, "expected 'rows cols entries'"));
            }
            let parsed: Vec<usize> = fields
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_error(name, line_no, "size line must hold three integers"))?;
            if parsed[0] != parsed[1] {
                return Err(parse_error(
                    name,
                    line_no,
                    "similarity matrix must be square",
                ));
            }
            size = Some((parsed[0], parsed[2]));
            entries.reserve(parsed[2]);
            continue;
        };
        let want = if pattern { 2 } else { 3 };
        if fields.len() != want {
            return Err(parse_error(
                name,
                line_no,
                format!("expected {want} fields"),
            ));
        }
        let index = |f: &str| -> Result<usize> {
            let v: usize = f
                .parse()
                .map_err(|_| parse_error(name, line_no, format!("bad index {f:?}")))?;
            if v == 0 || v > n {
                return Err(parse_error(
                    name,
                    line_no,
                    format!("index {v} outside 1..={n}"),
                ));
            }
            Ok(v - 1)
        };
        let i = index(fields[0])?;
        let j = index(fields[1])?;
        let w = if pattern {
            1.0
        } else {
            fields[2]
                .parse::<f64>()
                .map_err(|_| parse_error(name, line_no, format!("bad value {:?}", fields[2])))?
        };
        entries.push((i, j, w));
        if entries.len() > expected {
            return Err(parse_error(
                name,
                line_no,
                format!("more than the declared {expected} entries"),
            ));
        }
    }
    let Some((n, expected)) = size else {
        return Err(parse_error(name, 1, "missing size line"));
    };
    if entries.len() != expected {
        return Err(parse_error(
            name,
            0,
            format!("declared {expected} entries but found {}", entries.len()),
        ));
    }
    validate_graph(&entries, n, orientation)
}

/// Reads one nonnegative integer per non-blank line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let file = File::open(path)?;
    read_labels_from(BufReader::new(file), &path.display().to_string())
}

pub fn read_labels_from<R: BufRead>(reader: R, name: &str) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(
            t.parse()
                .map_err(|_| parse_error(name, idx + 1, format!("not a class id: {t:?}")))?,
        );
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub source: String,
    pub alpha_used: f64,
    pub final_kl: Option<f64>,
    /// Iterations of the final `α = 1` run.
    pub iterations_run: usize,
    pub prior_iterations: Option<usize>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub floor: f64,
    pub alphas: Vec<f64>,
    pub eps: f64,
}

/// JSON document written by `dcd cluster`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResultFile {
    pub n: usize,
    pub r: usize,
    pub labels: Vec<usize>,
    pub kl_error: f64,
    pub selected_candidate: usize,
    pub candidates: Vec<CandidateSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft_assignments: Option<Vec<Vec<f64>>>,
    pub config: ConfigEcho,
}

impl ClusterResultFile {
    pub fn new(result: &MultiStartResult, config: &MultiStartConfig, include_soft: bool) -> Self {
        let candidates = result
            .candidates
            .iter()
            .map(|c| {
                let (final_kl, iterations_run, converged, error) = match &c.outcome {
                    Ok(run) => (
                        Some(run.final_kl),
                        run.trace.iterations_run,
                        run.trace.converged,
                        None,
                    ),
                    Err(reason) => (None, 0, false, Some(reason.clone())),
                };
                CandidateSummary {
                    source: c.source.to_string(),
                    alpha_used: c.alpha_used,
                    final_kl,
                    iterations_run,
                    prior_iterations: c.prior_trace.as_ref().map(|t| t.iterations_run),
                    converged,
                    error,
                }
            })
            .collect();
        let soft_assignments = include_soft.then(|| {
            result
                .assignment
                .view()
                .rows()
                .into_iter()
                .map(|row| row.to_vec())
                .collect()
        });
        Self {
            n: result.labels.n(),
            r: result.labels.r(),
            labels: result.labels.labels().to_vec(),
            kl_error: result.kl_error,
            selected_candidate: result.selected,
            candidates,
            soft_assignments,
            config: ConfigEcho {
                seed: config.dcd.seed,
                max_iters: config.dcd.max_iters,
                rel_tol: config.dcd.rel_tol,
                floor: config.dcd.floor,
                alphas: config.prior_alphas.clone(),
                eps: config.eps,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "result declares n = {} but lists {} labels",
                self.n,
                self.labels.len()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.r) {
            return Err(Error::InvalidInput(format!(
                "label {bad} is not below r = {}",
                self.r
            )));
        }
        let selected_kl = self
            .candidates
            .get(self.selected_candidate)
            .and_then(|c| c.final_kl);
        if selected_kl != Some(self.kl_error) {
            return Err(Error::InvalidInput(
                "kl_error does not match the selected candidate".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("result is serializable");
        text.push('\n');
        text
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parsed: Self = serde_json::from_str(&text)
            .map_err(|e| parse_error(&path.display().to_string(), e.line(), e.to_string()))?;
        parsed.validate()?;
        Ok(parsed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub candidate: String,
    /// `prior` or `final`.
    pub stage: String,
    pub alpha: f64,
    #[serde(flatten)]
    pub record: IterationRecord,
}

/// Every recorded iteration of every candidate, prior runs before final
/// runs within a candidate.
pub fn write_traces<W: Write>(result: &MultiStartResult, mut out: W) -> std::io::Result<()> {
    for cand in &result.candidates {
        let name = cand.source.to_string();
        let stages = [
            ("prior", cand.alpha_used, cand.prior_trace.as_ref()),
            (
                "final",
                1.0,
                cand.outcome.as_ref().ok().map(|run| &run.trace),
            ),
        ];
        for (stage, alpha, trace) in stages {
            for record in trace.into_iter().flat_map(|t| &t.records) {
                let line = TraceLine {
                    candidate: name.clone(),
                    stage: stage.to_string(),
                    alpha,
                    record: *record,
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn csv_with_and_without_header() {
        let m = read_features_from("1,2\n3,4\n".as_bytes(), false, "x").unwrap();
        assert_eq!(m.n(), 2);
        let h = read_features_from("a,b\n1,2\n3, 4\n5,6\n".as_bytes(), true, "x").unwrap();
        assert_eq!(h.n(), 3);
        assert_eq!(h.values()[[1, 1]], 4.0);
        let bad = read_features_from("1,x\n3,4\n".as_bytes(), false, "x");
        assert!(matches!(bad, Err(Error::Parse { line: 1, .. })));
        assert!(read_features_from("1,2\n3\n".as_bytes(), false, "x").is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let g = validate_graph(
            &[(0, 1, 1.0), (1, 2, 0.1 + 0.2), (0, 3, 1e-300), (2, 3, 7.25)],
            4,
            EdgeOrientation::Undirected,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n4 4 4\n"));
        let back = read_matrix_market(Cursor::new(buf), "mem").unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn matrix_market_pattern_and_general() {
        let pattern =
            "%%MatrixMarket matrix coordinate pattern symmetric\n% comment\n3 3 2\n2 1\n3 2\n";
        let g = read_matrix_market(Cursor::new(pattern), "p").unwrap();
        assert_eq!(g.upper_entries(), vec![(0, 1, 1.0), (1, 2, 1.0)]);

        let general = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 0.5\n2 1 3\n";
        let g = read_matrix_market(Cursor::new(general), "g").unwrap();
        assert_eq!(g.weight(0, 1), 3.0);
    }

    #[test]
    fn matrix_market_errors() {
        let cases = [
            "",
            "%%MatrixMarket matrix array real general\n2 2\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 2 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n2 1 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 -1\n",
        ];
        for text in cases {
            assert!(
                read_matrix_market(Cursor::new(text), "e").is_err(),
                "{text:?}"
            );
        }
        let isolated = "%%MatrixMarket matrix coordinate real symmetric\n3 3 1\n2 1 1\n";
        assert!(matches!(
            read_matrix_market(Cursor::new(isolated), "i"),
            Err(Error::IsolatedNode { node: 2 })
        ));
    }

    #[test]
    fn labels_skip_blank_lines() {
        let labels = read_labels_from(Cursor::new("0\n2\n\n1\n"), "l").unwrap();
        assert_eq!(labels, vec![0, 2, 1]);
        assert!(read_labels_from(Cursor::new("0\n-1\n"), "l").is_err());
    }
}
