//! Closed-form node-connectivity matrices.
//!
//! Each builder produces a nonnegative sparse `X` that is later factorized:
//!
//! * DeepWalk: `X_ij = max(log(vol(G) * P_ij / (d_j * b)), 0)` with `P` the
//!   window-`T` walk sum.
//! * LINE: the DeepWalk matrix with `T = 1`.
//! * GraRep step `p`: `X_ij = max(log(S^p_ij / sum_t S^p_tj) - log(b), 0)`.
//!
//! Structural zeros (`P_ij = 0`) are never passed to `log`; they stay zero.
//! Entries at or below [`STORAGE_DROP`] after clipping are not stored.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{Fingerprint, Hasher};
use crate::graph::{self, Graph, DEFAULT_DENSE_NODE_LIMIT};
use crate::sparse::{CsrMatrix, DenseMatrix};

/// Values at or below this are dropped from sparse storage.
pub const STORAGE_DROP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectivityKind {
    DeepWalk,
    Line,
    GraRep,
}

impl ConnectivityKind {
    fn code(self) -> u8 {
        match self {
            ConnectivityKind::DeepWalk => 0,
            ConnectivityKind::Line => 1,
            ConnectivityKind::GraRep => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ConnectivityKind::DeepWalk),
            1 => Some(ConnectivityKind::Line),
            2 => Some(ConnectivityKind::GraRep),
            _ => None,
        }
    }
}

/// Which matrix to build and with what parameters. `window` only matters for
/// DeepWalk and `step` only for GraRep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityConfig {
    pub kind: ConnectivityKind,
    pub window: usize,
    pub shift: f64,
    pub step: usize,
}

impl ConnectivityConfig {
    pub fn deepwalk(window: usize, shift: f64) -> Self {
        ConnectivityConfig {
            kind: ConnectivityKind::DeepWalk,
            window,
            shift,
            step: 1,
        }
    }

    pub fn line(shift: f64) -> Self {
        ConnectivityConfig {
            kind: ConnectivityKind::Line,
            window: 1,
            shift,
            step: 1,
        }
    }

    pub fn grarep(step: usize, shift: f64) -> Self {
        ConnectivityConfig {
            kind: ConnectivityKind::GraRep,
            window: 1,
            shift,
            step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Parameter("window size T must be at least 1".into()));
        }
        if self.step == 0 {
            return Err(Error::Parameter("transition step p must be at least 1".into()));
        }
        if !(self.shift.is_finite() && self.shift > 0.0) {
            return Err(Error::Parameter(format!(
                "shift b must be positive, got {}",
                self.shift
            )));
        }
        Ok(())
    }

    /// Builds the configured matrix for `g`.
    pub fn build(&self, g: &Graph) -> Result<ConnectivityMatrix> {
        self.build_limited(g, DEFAULT_DENSE_NODE_LIMIT)
    }

    pub fn build_limited(&self, g: &Graph, max_nodes: usize) -> Result<ConnectivityMatrix> {
        self.validate()?;
        let matrix = match self.kind {
            ConnectivityKind::DeepWalk => {
                let p = graph::walk_sum_limited(g, self.window, max_nodes)?;
                deepwalk_from_walks(g, &p, self.shift)?
            }
            ConnectivityKind::Line => {
                let s = graph::transition_matrix(g)?;
                line_from_transition(g, &s, self.shift)?
            }
            ConnectivityKind::GraRep => {
                let power = graph::transition_power(g, self.step, max_nodes)?;
                grarep_from_power(&power, self.step, self.shift)?
            }
        };
        Ok(ConnectivityMatrix {
            matrix,
            config: *self,
            source_graph: g.fingerprint(),
        })
    }
}

/// A connectivity matrix with the configuration and graph that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    matrix: CsrMatrix,
    config: ConnectivityConfig,
    source_graph: Fingerprint,
}

impl ConnectivityMatrix {
    /// Wraps an arbitrary nonnegative matrix, e.g. a synthetic target.
    pub fn from_matrix(
        matrix: CsrMatrix,
        config: ConnectivityConfig,
        source_graph: Fingerprint,
    ) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::Shape(format!(
                "connectivity matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if let Some(min) = matrix.min_value() {
            if min < 0.0 {
                return Err(Error::Parameter(format!(
                    "connectivity matrix has a negative entry {min}"
                )));
            }
        }
        Ok(ConnectivityMatrix {
            matrix,
            config,
            source_graph,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.matrix
    }

    pub fn config(&self) -> &ConnectivityConfig {
        &self.config
    }

    pub fn source_graph(&self) -> Fingerprint {
        self.source_graph
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Hasher::new();
        h.str("connectivity")
            .usize(self.config.kind.code() as usize)
            .usize(self.config.window)
            .f64(self.config.shift)
            .usize(self.config.step)
            .bytes(&self.source_graph.0)
            .usize(self.n());
        for (i, j, v) in self.matrix.iter() {
            h.usize(i).usize(j).f64(v);
        }
        h.finish()
    }

    /// Writes the binary cache: a fixed header followed by coordinate
    /// triplets, all little-endian.
    pub fn write_cache<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&CACHE_VERSION.to_le_bytes())?;
        out.write_all(&(self.n() as u64).to_le_bytes())?;
        out.write_all(&[self.config.kind.code()])?;
        out.write_all(&(self.config.window as u64).to_le_bytes())?;
        out.write_all(&self.config.shift.to_bits().to_le_bytes())?;
        out.write_all(&(self.config.step as u64).to_le_bytes())?;
        out.write_all(&self.source_graph.0)?;
        out.write_all(&(self.matrix.nnz() as u64).to_le_bytes())?;
        for (i, j, v) in self.matrix.iter() {
            out.write_all(&(i as u64).to_le_bytes())?;
            out.write_all(&(j as u64).to_le_bytes())?;
            out.write_all(&v.to_bits().to_le_bytes())?;
        }
        out.flush()
    }

    pub fn read_cache<R: Read>(mut input: R) -> Result<Self> {
        let bad = |what: &str| Error::Data(format!("connectivity cache: {what}"));
        let mut magic = [0u8; 8];
        read_exact(&mut input, &mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(read_array(&mut input)?);
        if version != CACHE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n = read_u64(&mut input)? as usize;
        let [code] = read_array::<1, _>(&mut input)?;
        let kind = ConnectivityKind::from_code(code).ok_or_else(|| bad("unknown kind"))?;
        let window = read_u64(&mut input)? as usize;
        let shift = f64::from_bits(read_u64(&mut input)?);
        let step = read_u64(&mut input)? as usize;
        let source_graph = Fingerprint(read_array(&mut input)?);
        let nnz = read_u64(&mut input)? as usize;

        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(nnz.min(1 << 24));
        let mut data = Vec::with_capacity(nnz.min(1 << 24));
        let mut last: Option<(usize, usize)> = None;
        for _ in 0..nnz {
            let i = read_u64(&mut input)? as usize;
            let j = read_u64(&mut input)? as usize;
            let v = f64::from_bits(read_u64(&mut input)?);
            if i >= n || j >= n {
                return Err(bad("entry out of range"));
            }
            if last.is_some_and(|l| l >= (i, j)) {
                return Err(bad("entries not in row-major order"));
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(bad("stored entry is not positive"));
            }
            last = Some((i, j));
            indptr[i + 1] += 1;
            indices.push(j);
            data.push(v);
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Ok(ConnectivityMatrix {
            matrix: CsrMatrix::from_raw_parts(n, n, indptr, indices, data),
            config: ConnectivityConfig {
                kind,
                window,
                shift,
                step,
            },
            source_graph,
        })
    }
}

const CACHE_MAGIC: &[u8; 8] = b"BNEXMAT\0";
const CACHE_VERSION: u32 = 1;

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|e| Error::Data(format!("connectivity cache: truncated ({e})")))
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(input, &mut buf)?;
    Ok(buf)
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(input)?))
}

/// `max(log(vol * p / (d_j * b)), 0)`, or exactly zero when `p == 0`.
#[inline]
fn shifted_pmi(volume: f64, p: f64, degree_j: f64, shift: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    (volume * p / (degree_j * shift)).ln().max(0.0)
}

fn check_finite(m: &CsrMatrix) -> Result<()> {
    if m.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Internal("connectivity matrix has a non-finite entry".into()))
    }
}

fn deepwalk_from_walks(g: &Graph, walks: &DenseMatrix, shift: f64) -> Result<CsrMatrix> {
    let volume = g.volume();
    let degree = g.degree();
    let mut x = walks.clone();
    for mut row in x.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = shifted_pmi(volume, *v, degree[j], shift);
        }
    }
    let x = CsrMatrix::from_dense_above(x.view(), STORAGE_DROP);
    check_finite(&x)?;
    Ok(x)
}

fn line_from_transition(g: &Graph, s: &CsrMatrix, shift: f64) -> Result<CsrMatrix> {
    let volume = g.volume();
    let degree = g.degree();
    let x = s.map_above(STORAGE_DROP, |_, j, p| shifted_pmi(volume, p, degree[j], shift));
    check_finite(&x)?;
    Ok(x)
}

fn grarep_from_power(power: &DenseMatrix, step: usize, shift: f64) -> Result<CsrMatrix> {
    let col_sums = power.sum_axis(ndarray::Axis(0));
    if let Some(column) = col_sums.iter().position(|&c| c <= 0.0) {
        return Err(Error::ZeroColumnSum { column, step });
    }
    let log_shift = shift.ln();
    let mut x = power.clone();
    for mut row in x.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if *v > 0.0 {
                ((*v / col_sums[j]).ln() - log_shift).max(0.0)
            } else {
                0.0
            };
        }
    }
    let x = CsrMatrix::from_dense_above(x.view(), STORAGE_DROP);
    check_finite(&x)?;
    Ok(x)
}

/// DeepWalk matrix with window `window` and shift `shift`.
pub fn deepwalk_matrix(g: &Graph, window: usize, shift: f64) -> Result<ConnectivityMatrix> {
    ConnectivityConfig::deepwalk(window, shift).build(g)
}

/// LINE matrix: the DeepWalk matrix with a one-step window.
pub fn line_matrix(g: &Graph, shift: f64) -> Result<ConnectivityMatrix> {
    ConnectivityConfig::line(shift).build(g)
}

/// GraRep matrix for transition step `step`.
pub fn grarep_step_matrix(g: &Graph, step: usize, shift: f64) -> Result<ConnectivityMatrix> {
    ConnectivityConfig::grarep(step, shift).build(g)
}
