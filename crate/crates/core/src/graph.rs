//! Undirected weighted graphs, random-walk transition matrices and
//! window-averaged walk sums.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fingerprint::{Fingerprint, Hasher};
use crate::sparse::{CsrMatrix, DenseMatrix};

/// Largest node count for which dense `n x n` walk matrices are allocated.
pub const DEFAULT_DENSE_NODE_LIMIT: usize = 20_000;

/// How the optional third column of an edge list is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeListFormat {
    /// `src dst` or `src dst weight`, line by line.
    #[default]
    Auto,
    /// Exactly `src dst`.
    Unweighted,
    /// Exactly `src dst weight`.
    Weighted,
}

/// Immutable undirected graph with symmetric CSR adjacency and no self-loops.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: CsrMatrix,
    degree: Vec<f64>,
    volume: f64,
    edge_count: usize,
    node_ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Graph {
    /// Builds a graph from external ids and undirected edges over their
    /// indices. Self-loops are dropped, repeated pairs in either direction
    /// are merged by summing their weights.
    pub fn from_edges(node_ids: Vec<String>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = node_ids.len();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Shape(format!("edge ({a}, {b}) references a node >= {n}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Parameter(format!(
                    "edge ({a}, {b}) has non-positive weight {w}"
                )));
            }
            if a == b {
                continue;
            }
            *merged.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
        if merged.is_empty() {
            return Err(Error::Degenerate("graph has no edges".into()));
        }

        let triplets = merged
            .iter()
            .flat_map(|(&(a, b), &w)| [(a, b, w), (b, a, w)]);
        let adjacency = CsrMatrix::from_triplets(n, n, triplets)?;
        let degree = adjacency.row_sums();
        let volume = degree.iter().sum();
        let index = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect::<HashMap<_, _>>();
        if index.len() != n {
            return Err(Error::Parameter("duplicate node id".into()));
        }
        Ok(Graph {
            adjacency,
            degree,
            volume,
            edge_count: merged.len(),
            node_ids,
            index,
        })
    }

    /// Graph over nodes `0..n` named by their decimal index.
    pub fn from_index_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_edges((0..n).map(|i| i.to_string()).collect(), edges)
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    /// Undirected edge count.
    pub fn m(&self) -> usize {
        self.edge_count
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Weighted degrees.
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Sum of all adjacency entries, i.e. twice the total edge weight.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, index: usize) -> &str {
        &self.node_ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Indices of nodes with zero degree.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.degree[i] == 0.0).collect()
    }

    /// Copy of the graph without zero-degree nodes. Remaining nodes keep their
    /// relative order.
    pub fn drop_isolated(&self) -> Result<Graph> {
        let keep: Vec<usize> = (0..self.n()).filter(|&i| self.degree[i] > 0.0).collect();
        if keep.len() == self.n() {
            return Ok(self.clone());
        }
        let mut remap = vec![usize::MAX; self.n()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let ids = keep.iter().map(|&i| self.node_ids[i].clone()).collect();
        let edges: Vec<_> = self
            .adjacency
            .iter()
            .filter(|&(i, j, _)| i < j)
            .map(|(i, j, w)| (remap[i], remap[j], w))
            .collect();
        Graph::from_edges(ids, &edges)
    }

    /// Undirected edges `(i, j, w)` with `i < j`, ordered by `(i, j)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().filter(|&(i, j, _)| i < j)
    }

    /// Content hash over ids, structure and weights.
    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Hasher::new();
        h.str("graph").usize(self.n());
        for id in &self.node_ids {
            h.str(id);
        }
        for (i, j, w) in self.adjacency.iter() {
            h.usize(i).usize(j).f64(w);
        }
        h.finish()
    }

    /// Writes each undirected edge once as `src dst weight`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# n={} m={}", self.n(), self.m())?;
        for (i, j, w) in self.edges() {
            writeln!(out, "{} {} {}", self.node_ids[i], self.node_ids[j], w)?;
        }
        Ok(())
    }
}

/// Parses a whitespace-separated edge list. Lines starting with `#` and blank
/// lines are skipped; node ids are arbitrary tokens numbered in first-seen
/// order. A node that only ever appears in a self-loop is kept with zero
/// degree.
pub fn load_edge_list<R: BufRead>(source: R, format: EdgeListFormat) -> Result<Graph> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();

    let mut intern = |tok: &str, ids: &mut Vec<String>| -> usize {
        if let Some(&i) = index.get(tok) {
            return i;
        }
        let i = ids.len();
        ids.push(tok.to_owned());
        index.insert(tok.to_owned(), i);
        i
    };

    for (lineno, line) in source.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let ok = match format {
            EdgeListFormat::Auto => tokens.len() == 2 || tokens.len() == 3,
            EdgeListFormat::Unweighted => tokens.len() == 2,
            EdgeListFormat::Weighted => tokens.len() == 3,
        };
        if !ok {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `src dst [weight]`, found {} tokens", tokens.len()),
            });
        }
        let weight = match tokens.get(2) {
            None => 1.0,
            Some(tok) => {
                let w: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("weight {tok:?} is not a number"),
                })?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("weight {tok} must be positive and finite"),
                    });
                }
                w
            }
        };
        let a = intern(tokens[0], &mut ids);
        let b = intern(tokens[1], &mut ids);
        edges.push((a, b, weight));
    }
    Graph::from_edges(ids, &edges)
}

/// Row-stochastic transition matrix `S = D^-1 A`.
pub fn transition_matrix(g: &Graph) -> Result<CsrMatrix> {
    if let Some(&i) = g.isolated_nodes().first() {
        return Err(Error::ZeroDegree {
            node: g.node_id(i).to_owned(),
            index: i,
        });
    }
    let inv: Vec<f64> = g.degree().iter().map(|d| 1.0 / d).collect();
    Ok(g.adjacency().scale_rows(&inv))
}

fn check_dense_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::Resource(format!(
            "{n} nodes exceeds the dense walk-matrix limit of {limit} ({:.2} GB per matrix)",
            (n as f64).powi(2) * 8.0 / 1e9
        )));
    }
    Ok(())
}

/// Window-averaged walk matrix `(1/T) * sum_{r=1..T} S^r`, with the default
/// dense-allocation guard.
pub fn walk_sum(g: &Graph, window: usize) -> Result<DenseMatrix> {
    walk_sum_limited(g, window, DEFAULT_DENSE_NODE_LIMIT)
}

/// [`walk_sum`] with an explicit node-count ceiling for the dense result.
///
/// Powers are accumulated by repeated sparse-times-dense products, `S^r =
/// S * S^(r-1)`, so the cost is `T * nnz(A) * n`.
pub fn walk_sum_limited(g: &Graph, window: usize, max_nodes: usize) -> Result<DenseMatrix> {
    if window == 0 {
        return Err(Error::Parameter("window size T must be at least 1".into()));
    }
    check_dense_limit(g.n(), max_nodes)?;
    let s = transition_matrix(g)?;
    let mut power = s.to_dense();
    let mut acc = power.clone();
    for _ in 1..window {
        power = s.mul_dense(power.view())?;
        acc += &power;
    }
    acc /= window as f64;
    Ok(acc)
}

/// Dense `S^p`, built the same way as [`walk_sum`].
pub fn transition_power(g: &Graph, step: usize, max_nodes: usize) -> Result<DenseMatrix> {
    if step == 0 {
        return Err(Error::Parameter("transition step p must be at least 1".into()));
    }
    check_dense_limit(g.n(), max_nodes)?;
    let s = transition_matrix(g)?;
    let mut power: Array2<f64> = s.to_dense();
    for _ in 1..step {
        power = s.mul_dense(power.view())?;
    }
    Ok(power)
}
