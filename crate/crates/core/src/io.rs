//! Text formats: word2vec-style embedding files and label files.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::eval::LabelSet;

/// Formats `x` with 6 significant digits the way C's `%g` does: fixed
/// notation for exponents in `[-4, 6)`, scientific otherwise, trailing zeros
/// removed.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..6).contains(&exp) {
        let fixed = format!("{:.*}", (5 - exp) as usize, x);
        trim_fraction(&fixed).to_owned()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `n d` followed by one `node_id v_1 ... v_d` line per row.
pub fn write_embedding<W: Write>(mut out: W, node_ids: &[String], vectors: ArrayView2<'_, f64>) -> Result<()> {
    if node_ids.len() != vectors.nrows() {
        return Err(Error::Shape(format!(
            "{} node ids for {} embedding rows",
            node_ids.len(),
            vectors.nrows()
        )));
    }
    let io = |e| Error::io("<embedding>", e);
    writeln!(out, "{} {}", vectors.nrows(), vectors.ncols()).map_err(io)?;
    let mut line = String::new();
    for (id, row) in node_ids.iter().zip(vectors.rows()) {
        line.clear();
        line.push_str(id);
        for &v in row {
            line.push(' ');
            line.push_str(&format_g6(v));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Node ids and vectors read from a word2vec text file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub node_ids: Vec<String>,
    pub vectors: Array2<f64>,
}

impl EmbeddingFile {
    pub fn index(&self) -> HashMap<&str, usize> {
        self.node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }
}

pub fn read_embedding<R: BufRead>(input: R) -> Result<EmbeddingFile> {
    let mut lines = input.lines().enumerate();
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty embedding file".into()))?;
    let header = header.map_err(|e| parse_err(1, e.to_string()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(1, format!("bad header {header:?}")))?;
    let [n, d] = dims[..] else {
        return Err(parse_err(1, format!("header must be `n d`, got {header:?}")));
    };

    let mut node_ids = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * d);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let id = tokens.next().expect("non-empty line");
        let before = values.len();
        for tok in tokens {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("{tok:?} is not a number")))?;
            values.push(v);
        }
        if values.len() - before != d {
            return Err(parse_err(
                lineno,
                format!("expected {d} values, found {}", values.len() - before),
            ));
        }
        node_ids.push(id.to_owned());
    }
    if node_ids.len() != n {
        return Err(Error::Data(format!(
            "header promises {n} rows, file has {}",
            node_ids.len()
        )));
    }
    let vectors = Array2::from_shape_vec((n, d), values).expect("shape checked");
    Ok(EmbeddingFile { node_ids, vectors })
}

/// Reads `node_id label [label ...]` lines and aligns them with the rows of an
/// embedding. Class names are numbered in first-seen order; repeated lines
/// for one node are merged. Labeled ids missing from `node_ids` are an error
/// that lists up to ten of them.
pub fn read_labels<R: BufRead>(input: R, node_ids: &[String]) -> Result<LabelSet> {
    let index: HashMap<&str, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut per_row: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut missing = Vec::new();
    let mut missing_count = 0usize;

    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let id = tokens.next().expect("non-empty line");
        let Some(&row) = index.get(id) else {
            missing_count += 1;
            if missing.len() < 10 {
                missing.push(id.to_owned());
            }
            continue;
        };
        let classes = per_row.entry(row).or_default();
        for tok in tokens {
            let next = class_names.len();
            let k = *class_index.entry(tok.to_owned()).or_insert_with(|| {
                class_names.push(tok.to_owned());
                next
            });
            classes.push(k);
        }
    }
    if missing_count > 0 {
        return Err(Error::Data(format!(
            "{missing_count} labeled node ids are not in the embedding, e.g. {}",
            missing.join(", ")
        )));
    }
    LabelSet::new(class_names, per_row.into_iter().collect())
}
