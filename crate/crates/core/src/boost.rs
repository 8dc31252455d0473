//! Forward-stagewise multi-level factorization.
//!
//! Level `i` factorizes the residual `R_i` left by levels `1..i`, where
//! `R_1 = X` and `R_{i+1} = max(R_i − U_i V_i, 0)`. Earlier levels are frozen
//! once fitted. The final embedding concatenates `U_1, ..., U_k` column-wise.
//!
//! Because `U_i V_i ≥ 0`, every residual is dominated entrywise by the one
//! before it and can only lose support, so later levels get cheaper.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::connectivity::{ConnectivityMatrix, STORAGE_DROP};
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::nmf::{self, FactorPair, NmfConfig};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    /// Number of levels `k`.
    pub levels: usize,
    /// Rank of every level, `d_s`.
    pub level_rank: usize,
    /// Solver settings; `rank` and `seed` are overridden per level.
    pub nmf: NmfConfig,
    /// Level `i` (1-based) is seeded with `seed + i - 1`.
    pub seed: u64,
    /// Permit a total dimension `k · d_s` that is not below the node count.
    pub allow_wide: bool,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            levels: 8,
            level_rank: 16,
            nmf: NmfConfig::default(),
            seed: 0,
            allow_wide: false,
        }
    }
}

impl BoostConfig {
    /// `k` levels sharing a total dimension `dimension`.
    pub fn with_dimension(dimension: usize, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Parameter("number of levels must be at least 1".into()));
        }
        if !dimension.is_multiple_of(levels) {
            return Err(Error::Parameter(format!(
                "dimension {dimension} is not divisible by {levels} levels"
            )));
        }
        Ok(BoostConfig {
            levels,
            level_rank: dimension / levels,
            ..Default::default()
        })
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Total embedding dimension `d = k · d_s`.
    pub fn dimension(&self) -> usize {
        self.levels * self.level_rank
    }

    pub fn level_nmf(&self, level: usize) -> NmfConfig {
        NmfConfig {
            rank: self.level_rank,
            seed: self.seed.wrapping_add(level as u64 - 1),
            ..self.nmf
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.levels == 0 || self.level_rank == 0 {
            return Err(Error::Parameter("levels and level rank must be positive".into()));
        }
        self.level_nmf(1).validate()?;
        if self.level_rank > n {
            return Err(Error::Parameter(format!(
                "level rank {} exceeds node count {n}",
                self.level_rank
            )));
        }
        if self.dimension() >= n && !self.allow_wide {
            return Err(Error::Parameter(format!(
                "total dimension {} must be below node count {n} (override with allow_wide)",
                self.dimension()
            )));
        }
        Ok(())
    }
}

/// One fitted level and the residual it was fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFactor {
    /// 1-based level index.
    pub level: usize,
    pub factors: FactorPair,
    /// `‖R_i‖_F`.
    pub residual_norm_before: f64,
    /// `nnz(R_i)`.
    pub residual_nnz_before: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLevelEmbedding {
    pub levels: Vec<LevelFactor>,
    /// `[U_1, ..., U_k]`, `n × k·d_s`.
    pub embedding: Array2<f64>,
    pub config: BoostConfig,
    pub connectivity: Fingerprint,
    /// `‖R_{k+1}‖_F`, what is left after the last level.
    pub terminal_norm: f64,
    pub terminal_nnz: usize,
    pub warnings: Vec<String>,
}

impl MultiLevelEmbedding {
    pub fn n(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.embedding.ncols()
    }

    /// Block of the embedding that belongs to `level` (1-based).
    pub fn level_block(&self, level: usize) -> ArrayView2<'_, f64> {
        let d = self.config.level_rank;
        self.embedding
            .slice(ndarray::s![.., (level - 1) * d..level * d])
    }

    /// Stacked context factors `[V_1; ...; V_k]`, `k·d_s × n`.
    pub fn context(&self) -> Array2<f64> {
        let views: Vec<_> = self.levels.iter().map(|l| l.factors.v.view()).collect();
        ndarray::concatenate(Axis(0), &views).expect("levels share n")
    }

    /// Value of the joint objective `‖X − Σ_i U_i V_i‖²_F` at the returned
    /// factors.
    pub fn joint_objective(&self, x: &CsrMatrix) -> Result<f64> {
        let pair = FactorPair {
            u: self.embedding.clone(),
            v: self.context(),
            objective: 0.0,
            iterations: 0,
            degenerate: false,
        };
        nmf::objective(x, &pair)
    }
}

/// `max(R − UV, 0)`, evaluated only on the support of `R`. Values that clip to
/// at most [`STORAGE_DROP`] are not stored.
pub fn residual(r: &CsrMatrix, f: &FactorPair) -> Result<CsrMatrix> {
    if f.u.nrows() != r.rows() || f.v.ncols() != r.cols() || f.u.ncols() != f.v.nrows() {
        return Err(Error::Shape(format!(
            "factors {:?} x {:?} do not fit a {}x{} residual",
            f.u.dim(),
            f.v.dim(),
            r.rows(),
            r.cols()
        )));
    }
    let vt = f.v.t().as_standard_layout().into_owned();
    Ok(r.map_above(STORAGE_DROP, |i, j, x| x - f.u.row(i).dot(&vt.row(j))))
}

/// Column-concatenates level blocks in order.
pub fn concatenate(blocks: &[ArrayView2<'_, f64>]) -> Result<Array2<f64>> {
    let Some(first) = blocks.first() else {
        return Err(Error::Shape("no level blocks to concatenate".into()));
    };
    if let Some(bad) = blocks.iter().find(|b| b.nrows() != first.nrows()) {
        return Err(Error::Shape(format!(
            "level blocks have {} and {} rows",
            first.nrows(),
            bad.nrows()
        )));
    }
    ndarray::concatenate(Axis(1), blocks).map_err(|e| Error::Shape(e.to_string()))
}

/// Runs the multi-level factorization on `x`.
pub fn boostne(x: &ConnectivityMatrix, cfg: &BoostConfig) -> Result<MultiLevelEmbedding> {
    let mut embedding = boost_matrix(x.matrix(), cfg)?;
    embedding.connectivity = x.fingerprint();
    Ok(embedding)
}

/// [`boostne`] on a bare nonnegative square matrix.
pub fn boost_matrix(x: &CsrMatrix, cfg: &BoostConfig) -> Result<MultiLevelEmbedding> {
    if x.rows() != x.cols() {
        return Err(Error::Shape(format!(
            "target must be square, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    cfg.validate(x.rows())?;
    if x.min_value().is_some_and(|m| m < 0.0) {
        return Err(Error::Parameter("target has negative entries".into()));
    }

    let mut levels = Vec::with_capacity(cfg.levels);
    let mut warnings = Vec::new();
    let mut current = x.clone();
    for level in 1..=cfg.levels {
        let norm = current.frobenius_norm();
        let nnz = current.nnz();
        if current.is_zero() && warnings.is_empty() {
            warnings.push(format!(
                "residual vanished before level {level}; levels {level}..={} are zero blocks",
                cfg.levels
            ));
        }
        let factors = nmf::factorize(&current, &cfg.level_nmf(level))?;
        let next = residual(&current, &factors)?;
        levels.push(LevelFactor {
            level,
            factors,
            residual_norm_before: norm,
            residual_nnz_before: nnz,
        });
        current = next;
    }

    let blocks: Vec<_> = levels.iter().map(|l| l.factors.u.view()).collect();
    let embedding = concatenate(&blocks)?;
    Ok(MultiLevelEmbedding {
        levels,
        embedding,
        config: *cfg,
        connectivity: Fingerprint::default(),
        terminal_norm: current.frobenius_norm(),
        terminal_nnz: current.nnz(),
        warnings,
    })
}

/// One row of the residual trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub level: usize,
    pub frobenius_norm: f64,
    pub nnz: usize,
}

/// Residual norm and support size entering each level, followed by the
/// residual left after the last level (reported as level `k + 1`).
pub fn residual_trace(e: &MultiLevelEmbedding) -> Vec<TraceEntry> {
    e.levels
        .iter()
        .map(|l| TraceEntry {
            level: l.level,
            frobenius_norm: l.residual_norm_before,
            nnz: l.residual_nnz_before,
        })
        .chain(std::iter::once(TraceEntry {
            level: e.levels.len() + 1,
            frobenius_norm: e.terminal_norm,
            nnz: e.terminal_nnz,
        }))
        .collect()
}
