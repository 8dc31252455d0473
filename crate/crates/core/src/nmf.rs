//! Rank-`r` nonnegative matrix factorization `R ≈ U V` of a sparse target
//! under squared Frobenius loss, solved with multiplicative updates.
//!
//! One step is
//!
//! ```text
//! U <- U ∘ (R Vᵀ) ⊘ (U V Vᵀ + ε)
//! V <- V ∘ (Uᵀ R) ⊘ (Uᵀ U V + ε)
//! ```
//!
//! Only products with `R` touch the target, so an iteration costs
//! `O(nnz(R) · r + (rows + cols) · r²)` and `R` is never densified.

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iters: usize,
    /// Stop once the objective drop in one step, relative to the starting
    /// objective, falls below this.
    pub rel_tol: f64,
    /// Denominator guard in the update rule.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            rank: 16,
            max_iters: 200,
            rel_tol: 1e-4,
            epsilon: 1e-12,
            seed: 0,
        }
    }
}

impl NmfConfig {
    pub fn with_rank(rank: usize) -> Self {
        NmfConfig {
            rank,
            ..Default::default()
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Parameter("NMF rank must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::Parameter("NMF rel_tol must be positive".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Parameter("NMF epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Nonnegative factors `U` (rows × rank, the "center" side) and `V`
/// (rank × cols, the "context" side).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    /// `‖R − UV‖²_F` at these factors.
    pub objective: f64,
    /// Multiplicative steps taken.
    pub iterations: usize,
    /// Set when the target was all zero and the factors are zero by
    /// construction.
    pub degenerate: bool,
}

impl FactorPair {
    pub fn zeros(rows: usize, cols: usize, rank: usize) -> Self {
        FactorPair {
            u: Array2::zeros((rows, rank)),
            v: Array2::zeros((rank, cols)),
            objective: 0.0,
            iterations: 0,
            degenerate: true,
        }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// Dense `U V`. Only meant for small matrices and tests.
    pub fn product(&self) -> Array2<f64> {
        self.u.dot(&self.v)
    }

    fn check_shape(&self, r: &CsrMatrix) -> Result<()> {
        let ok = self.u.nrows() == r.rows()
            && self.v.ncols() == r.cols()
            && self.u.ncols() == self.v.nrows();
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "factors {:?} x {:?} do not fit a {}x{} target",
                self.u.dim(),
                self.v.dim(),
                r.rows(),
                r.cols()
            )))
        }
    }
}

/// Random positive initialization, i.i.d. uniform on `(0, s]` with
/// `s = sqrt(mean(R) / rank)` so that `E[(UV)_ij] ≈ mean(R)`.
pub fn init_factors(r: &CsrMatrix, cfg: &NmfConfig) -> Result<FactorPair> {
    cfg.validate()?;
    let (rows, cols) = r.shape();
    if r.is_zero() || rows == 0 || cols == 0 {
        return Ok(FactorPair::zeros(rows, cols, cfg.rank));
    }
    let mean = r.sum() / (rows as f64 * cols as f64);
    let scale = (mean / cfg.rank as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // 1 - U[0, 1) lies in (0, 1]
    let mut draw = || scale * (1.0 - rng.random::<f64>());
    let u = Array2::from_shape_simple_fn((rows, cfg.rank), &mut draw);
    let v = Array2::from_shape_simple_fn((cfg.rank, cols), &mut draw);
    let mut f = FactorPair {
        u,
        v,
        objective: 0.0,
        iterations: 0,
        degenerate: false,
    };
    f.objective = objective(r, &f)?;
    Ok(f)
}

/// `‖R − UV‖²_F` computed as `‖R‖² − 2 Σ_{nnz} R_ij (UV)_ij + tr((UᵀU)(VVᵀ))`
/// without materializing `UV`.
pub fn objective(r: &CsrMatrix, f: &FactorPair) -> Result<f64> {
    f.check_shape(r)?;
    let vt = f.v.t().as_standard_layout().into_owned();
    let cross = sparse_inner(r, f.u.view(), vt.view());
    let gram = gram_trace(f.u.view(), f.v.view());
    Ok(r.frobenius_sq() - 2.0 * cross + gram)
}

/// `Σ_{(i,j) ∈ nnz(R)} R_ij · ⟨U_i, Vt_j⟩`, reduced row by row in order.
fn sparse_inner(r: &CsrMatrix, u: ArrayView2<'_, f64>, vt: ArrayView2<'_, f64>) -> f64 {
    let partial: Vec<f64> = (0..r.rows())
        .into_par_iter()
        .map(|i| {
            let (cols, vals) = r.row(i);
            let ui = u.row(i);
            cols.iter()
                .zip(vals)
                .map(|(&j, &x)| x * ui.dot(&vt.row(j)))
                .sum()
        })
        .collect();
    partial.iter().sum()
}

/// `‖UV‖²_F = tr((UᵀU)(VVᵀ))`.
fn gram_trace(u: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>) -> f64 {
    let utu = u.t().dot(&u);
    let vvt = v.dot(&v.t());
    (&utu * &vvt).sum()
}

/// Target with its transpose and squared norm precomputed.
struct Target<'a> {
    r: &'a CsrMatrix,
    rt: CsrMatrix,
    norm_sq: f64,
}

impl<'a> Target<'a> {
    fn new(r: &'a CsrMatrix) -> Self {
        Target {
            r,
            rt: r.transpose(),
            norm_sq: r.frobenius_sq(),
        }
    }

    /// One multiplicative update of both factors. Returns the new factors and
    /// their objective.
    fn step(&self, u: &Array2<f64>, v: &Array2<f64>, eps: f64) -> Result<(Array2<f64>, Array2<f64>, f64)> {
        let vt = v.t().as_standard_layout().into_owned();
        let r_vt = self.r.mul_dense(vt.view())?;
        let vvt = v.dot(&vt);
        let denom = u.dot(&vvt);
        let mut u_new = u.clone();
        Zip::from(&mut u_new)
            .and(&r_vt)
            .and(&denom)
            .for_each(|x, &num, &den| *x *= num / (den + eps));

        // (Uᵀ R)ᵀ = Rᵀ U, stored cols × rank
        let rt_u = self.rt.mul_dense(u_new.view())?;
        let utu = u_new.t().dot(&u_new);
        let denom = utu.dot(v);
        let mut v_new = v.clone();
        Zip::from(&mut v_new)
            .and(&rt_u.t())
            .and(&denom)
            .for_each(|x, &num, &den| *x *= num / (den + eps));

        let cross = (&rt_u.t() * &v_new).sum();
        let obj = self.norm_sq - 2.0 * cross + gram_trace(u_new.view(), v_new.view());
        if !obj.is_finite() || u_new.iter().chain(v_new.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Internal("multiplicative update produced a non-finite value".into()));
        }
        Ok((u_new, v_new, obj))
    }
}

/// A single multiplicative update of `f` towards `r`.
pub fn multiplicative_step(r: &CsrMatrix, f: &FactorPair, epsilon: f64) -> Result<FactorPair> {
    f.check_shape(r)?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Parameter("epsilon must be positive".into()));
    }
    let (u, v, objective) = Target::new(r).step(&f.u, &f.v, epsilon)?;
    Ok(FactorPair {
        u,
        v,
        objective,
        iterations: f.iterations + 1,
        degenerate: f.degenerate,
    })
}

/// Factorizes `r` from [`init_factors`], iterating until `max_iters` or the
/// relative-improvement stopping rule fires. An all-zero target short-circuits
/// to zero factors flagged degenerate.
pub fn factorize(r: &CsrMatrix, cfg: &NmfConfig) -> Result<FactorPair> {
    cfg.validate()?;
    let (rows, cols) = r.shape();
    if cfg.rank > rows.min(cols) {
        return Err(Error::Parameter(format!(
            "rank {} exceeds the target's smaller dimension {}",
            cfg.rank,
            rows.min(cols)
        )));
    }
    let init = init_factors(r, cfg)?;
    if init.degenerate {
        return Ok(init);
    }
    let target = Target::new(r);
    let start = init.objective;
    let scale = start.max(cfg.epsilon);
    let FactorPair {
        mut u,
        mut v,
        objective: mut obj,
        ..
    } = init;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let (u_new, v_new, obj_new) = target.step(&u, &v, cfg.epsilon)?;
        iterations += 1;
        let improvement = (obj - obj_new) / scale;
        u = u_new;
        v = v_new;
        obj = obj_new;
        if improvement < cfg.rel_tol {
            break;
        }
    }
    Ok(FactorPair {
        u,
        v,
        objective: obj,
        iterations,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sparse(d: Array2<f64>) -> CsrMatrix {
        CsrMatrix::from_dense(d.view())
    }

    fn dense_objective(r: &CsrMatrix, f: &FactorPair) -> f64 {
        (&r.to_dense() - &f.product()).mapv(|x| x * x).sum()
    }

    #[test]
    fn zero_target_is_degenerate() {
        let r = CsrMatrix::zeros(3, 3);
        let f = init_factors(&r, &NmfConfig::with_rank(2)).unwrap();
        assert!(f.degenerate);
        assert!(f.u.iter().chain(f.v.iter()).all(|&x| x == 0.0));
        let f = factorize(&r, &NmfConfig::with_rank(2)).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.objective, 0.0);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let ones = sparse(Array2::ones((3, 3)));
        let cfg = NmfConfig::with_rank(2).seed(42);
        assert_eq!(init_factors(&ones, &cfg).unwrap(), init_factors(&ones, &cfg).unwrap());
        assert_ne!(
            init_factors(&ones, &cfg).unwrap().u,
            init_factors(&ones, &cfg.seed(43)).unwrap().u
        );

        let fours = sparse(Array2::from_elem((4, 4), 4.0));
        let f = init_factors(&fours, &NmfConfig::with_rank(1).seed(7)).unwrap();
        assert!(f.u.iter().chain(f.v.iter()).all(|&x| x > 0.0 && x <= 2.0));
    }

    #[test]
    fn objective_special_cases() {
        let r = sparse(array![[1.0, 2.0], [0.0, 3.0]]);
        let zeros = FactorPair::zeros(2, 2, 1);
        assert!((objective(&r, &zeros).unwrap() - 14.0).abs() < 1e-12);

        let f = FactorPair {
            u: array![[1.0], [2.0]],
            v: array![[1.0, 2.0]],
            objective: 0.0,
            iterations: 0,
            degenerate: false,
        };
        let exact = sparse(f.product());
        assert!(objective(&exact, &f).unwrap().abs() < 1e-9);
        assert!(objective(&CsrMatrix::zeros(3, 2), &f).is_err());
    }

    #[test]
    fn exact_factorization_is_a_fixed_point() {
        let f = FactorPair {
            u: array![[1.0, 0.5], [2.0, 0.0], [0.3, 1.0]],
            v: array![[1.0, 2.0, 0.5], [0.0, 1.0, 3.0]],
            objective: 0.0,
            iterations: 0,
            degenerate: false,
        };
        let r = sparse(f.product());
        let g = multiplicative_step(&r, &f, 1e-12).unwrap();
        assert!(g.objective.abs() < 1e-9);
        assert!((dense_objective(&r, &g)).abs() < 1e-9);
    }

    #[test]
    fn rank_one_target_strictly_improves_on_first_step() {
        let r = sparse(array![[1.0, 2.0], [2.0, 4.0]]);
        let f0 = init_factors(&r, &NmfConfig::with_rank(1).seed(3)).unwrap();
        let f1 = multiplicative_step(&r, &f0, 1e-12).unwrap();
        assert!(f1.objective < f0.objective);
        assert!((f1.objective - dense_objective(&r, &f1)).abs() < 1e-9);
    }

    #[test]
    fn zero_row_decays() {
        let r = sparse(array![[1.0, 2.0, 0.5], [0.0, 0.0, 0.0], [3.0, 1.0, 1.0]]);
        let mut f = init_factors(&r, &NmfConfig::with_rank(2).seed(9)).unwrap();
        let mut last = f.u.row(1).sum();
        for _ in 0..20 {
            f = multiplicative_step(&r, &f, 1e-12).unwrap();
            let now = f.u.row(1).sum();
            assert!(now <= last);
            last = now;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn factorize_recovers_small_targets() {
        let r = sparse(array![[1.0, 2.0], [2.0, 4.0]]);
        let cfg = NmfConfig {
            rank: 1,
            max_iters: 500,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let f = factorize(&r, &cfg).unwrap();
        assert!(dense_objective(&r, &f).sqrt() / r.frobenius_norm() < 1e-3);

        let eye = sparse(Array2::eye(3));
        let cfg = NmfConfig {
            rank: 3,
            max_iters: 2000,
            rel_tol: 1e-12,
            seed: 1,
            ..Default::default()
        };
        let f = factorize(&eye, &cfg).unwrap();
        assert!(dense_objective(&eye, &f).sqrt() / eye.frobenius_norm() < 1e-2);
    }

    #[test]
    fn rank_above_dimension_is_rejected() {
        let r = sparse(Array2::eye(2));
        assert!(matches!(factorize(&r, &NmfConfig::with_rank(3)), Err(Error::Parameter(_))));
        assert!(NmfConfig::with_rank(0).validate().is_err());
    }
}
