//! ADMM for `λ/2 ‖Ax − b‖² + δ/2 ‖Lx − c‖² + Σᵢ wᵢ atomᵢ(Lᵢ x)`.
//!
//! Scaled-form ADMM on the split `Lᵢ x = yᵢ`:
//!
//! 1. x-update: solve `(λAᵀA + δLᵀL + ρ Σ LᵢᵀLᵢ) x = λAᵀb + δLᵀc + ρ Σ Lᵢᵀ(yᵢ − uᵢ)`
//! 2. y-update: `yᵢ ← prox of (wᵢ/ρ) atomᵢ at (Lᵢ x + uᵢ)`
//! 3. u-update: `uᵢ ← uᵢ + Lᵢ x − yᵢ`
//!
//! The x-update system is factorized once (dense Cholesky up to
//! [`AdmmParams::dense_cutoff`] unknowns) or solved matrix-free by conjugate
//! gradients with warm starts across iterations. Stopping uses the standard
//! combined absolute/relative primal and dual residual criterion, or a fixed
//! iteration count when [`AdmmParams::fixed_iters`] is set — inaccurate
//! solves are a first-class mode of operation, not a failure.
//!
//! Everything here is deterministic: identical inputs produce bit-identical
//! iterates, and a solve does not mutate shared state, so many solves can run
//! concurrently against one shared factorization.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linops::LinearMap;
use crate::prox::Regularizer;

/// Solver parameters.
#[derive(Debug, Clone)]
pub struct AdmmParams {
    /// Penalty parameter ρ > 0.
    pub rho: f64,
    /// Iteration budget (exact count when `fixed_iters`).
    pub max_iters: usize,
    /// Absolute stopping tolerance.
    pub eps_abs: f64,
    /// Relative stopping tolerance.
    pub eps_rel: f64,
    /// Run exactly `max_iters` iterations, ignoring tolerances.
    pub fixed_iters: bool,
    /// Largest number of unknowns for the cached dense factorization; larger
    /// systems use matrix-free conjugate gradients.
    pub dense_cutoff: usize,
    /// Relative tolerance of the inner CG solver.
    pub cg_tol: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: 200.0,
            max_iters: 200,
            eps_abs: 1e-9,
            eps_rel: 1e-9,
            fixed_iters: false,
            dense_cutoff: 4096,
            cg_tol: 1e-10,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel > 0.0) {
            return Err(Error::InvalidArgument("stopping tolerances must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// The data-fidelity term `weight/2 ‖Ax − b‖²`.
pub struct DataFit<'a> {
    pub a: &'a LinearMap,
    pub b: &'a Array1<f64>,
    pub weight: f64,
}

/// The optional prior term `weight/2 ‖Lx − c‖²`.
pub struct PriorFit<'a> {
    pub l: &'a LinearMap,
    pub c: &'a Array1<f64>,
    pub weight: f64,
}

/// Split variables, reusable as a warm start.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: Array1<f64>,
    pub y: Vec<Array1<f64>>,
    pub u: Vec<Array1<f64>>,
}

/// Solve outcome.
#[derive(Debug, Clone)]
pub struct AdmmResult {
    pub x: Array1<f64>,
    pub iters: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `λ/2‖Ax−b‖² + δ/2‖Lx−c‖² + Σ wᵢ atomᵢ(yᵢ)` at the final split.
    pub objective: f64,
    pub state: AdmmState,
}

/// Cached x-update solver: either a dense Cholesky factorization or a
/// matrix-free CG context.
pub enum XUpdateSolver<'a> {
    Dense {
        chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
        n: usize,
    },
    MatrixFree {
        a: &'a LinearMap,
        lambda: f64,
        prior: Option<(&'a LinearMap, f64)>,
        transforms: Vec<&'a LinearMap>,
        rho: f64,
        n: usize,
        cg_tol: f64,
    },
}

impl<'a> XUpdateSolver<'a> {
    fn unknowns(&self) -> usize {
        match self {
            XUpdateSolver::Dense { n, .. } => *n,
            XUpdateSolver::MatrixFree { n, .. } => *n,
        }
    }

    /// Applies the normal matrix `λAᵀA + δLᵀL + ρ Σ LᵢᵀLᵢ` (matrix-free path).
    fn apply_normal(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        match self {
            XUpdateSolver::Dense { .. } => unreachable!("dense solver applies via factorization"),
            XUpdateSolver::MatrixFree { a, lambda, prior, transforms, rho, .. } => {
                let mut out = a.adjoint_apply(&a.apply(v)?)? * *lambda;
                if let Some((l, delta)) = prior {
                    out += &(l.adjoint_apply(&l.apply(v)?)? * *delta);
                }
                for t in transforms {
                    out += &(t.adjoint_apply(&t.apply(v)?)? * *rho);
                }
                Ok(out)
            }
        }
    }

    /// Solves the x-update system for `rhs`, warm-starting CG from `warm`.
    pub fn solve(&self, rhs: &Array1<f64>, warm: Option<&Array1<f64>>) -> Result<Array1<f64>> {
        match self {
            XUpdateSolver::Dense { chol, n } => {
                let v = nalgebra::DVector::from_iterator(*n, rhs.iter().copied());
                let sol = chol.solve(&v);
                Ok(Array1::from_iter(sol.iter().copied()))
            }
            XUpdateSolver::MatrixFree { n, cg_tol, .. } => {
                let rhs_norm = rhs.dot(rhs).sqrt();
                if rhs_norm == 0.0 {
                    return Ok(Array1::zeros(*n));
                }
                let mut x = match warm {
                    Some(w) => w.clone(),
                    None => Array1::zeros(*n),
                };
                let mut r = rhs - &self.apply_normal(&x)?;
                let mut p = r.clone();
                let mut rs = r.dot(&r);
                let max_iters = 10 * *n;
                for _ in 0..max_iters {
                    if rs.sqrt() <= cg_tol * rhs_norm {
                        return Ok(x);
                    }
                    let mp = self.apply_normal(&p)?;
                    let denom = p.dot(&mp);
                    if !(denom > 0.0) {
                        return Err(Error::SingularSystem);
                    }
                    let alpha = rs / denom;
                    x.scaled_add(alpha, &p);
                    r.scaled_add(-alpha, &mp);
                    let rs_new = r.dot(&r);
                    p = &r + &(p * (rs_new / rs));
                    rs = rs_new;
                }
                if rs.sqrt() <= cg_tol * rhs_norm {
                    Ok(x)
                } else {
                    Err(Error::CgNonConvergence { iters: max_iters, residual: rs.sqrt() })
                }
            }
        }
    }
}

/// Builds the x-update solver for `λAᵀA + δLᵀL + ρ Σ LᵢᵀLᵢ`, caching a dense
/// Cholesky factorization up to `dense_cutoff` unknowns and falling back to
/// matrix-free CG beyond.
pub fn build_xupdate_solver<'a>(
    a: &'a LinearMap,
    lambda: f64,
    prior: Option<(&'a LinearMap, f64)>,
    f: &'a Regularizer,
    rho: f64,
    params: &AdmmParams,
) -> Result<XUpdateSolver<'a>> {
    let n = a.cols();
    if let Some((l, _)) = prior {
        if l.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "prior operator columns",
                expected: n,
                got: l.cols(),
            });
        }
    }
    if f.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "regularizer dimension",
            expected: n,
            got: f.dim(),
        });
    }
    if n <= params.dense_cutoff {
        let mut m = Array2::zeros((n, n));
        a.add_gram(lambda, &mut m)?;
        if let Some((l, delta)) = prior {
            l.add_gram(delta, &mut m)?;
        }
        for t in f.terms() {
            t.transform.add_gram(rho, &mut m)?;
        }
        let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
        let chol = nalgebra::Cholesky::new(mat).ok_or(Error::SingularSystem)?;
        Ok(XUpdateSolver::Dense { chol, n })
    } else {
        Ok(XUpdateSolver::MatrixFree {
            a,
            lambda,
            prior,
            transforms: f.terms().iter().map(|t| &t.transform).collect(),
            rho,
            n,
            cg_tol: params.cg_tol,
        })
    }
}

/// Runs ADMM on `λ/2‖Ax−b‖² + δ/2‖Lx−c‖² + f(x)`.
///
/// `init` warm-starts the split variables; `prebuilt` reuses an x-update
/// factorization across solves of the same quadratic (the factorization
/// depends on `A, L, {Lᵢ}, λ, δ, ρ` but not on `b, c`).
pub fn solve(
    data: &DataFit,
    prior: Option<&PriorFit>,
    f: &Regularizer,
    params: &AdmmParams,
    init: Option<AdmmState>,
    prebuilt: Option<&XUpdateSolver>,
) -> Result<AdmmResult> {
    params.validate()?;
    let n = data.a.cols();
    if data.b.len() != data.a.rows() {
        return Err(Error::DimensionMismatch {
            context: "data vector",
            expected: data.a.rows(),
            got: data.b.len(),
        });
    }
    if let Some(p) = prior {
        if p.c.len() != p.l.rows() {
            return Err(Error::DimensionMismatch {
                context: "prior mean vector",
                expected: p.l.rows(),
                got: p.c.len(),
            });
        }
    }

    let owned_solver;
    let solver = match prebuilt {
        Some(s) => {
            if s.unknowns() != n {
                return Err(Error::DimensionMismatch {
                    context: "prebuilt solver",
                    expected: n,
                    got: s.unknowns(),
                });
            }
            s
        }
        None => {
            owned_solver = build_xupdate_solver(
                data.a,
                data.weight,
                prior.map(|p| (p.l, p.weight)),
                f,
                params.rho,
                params,
            )?;
            &owned_solver
        }
    };

    let rho = params.rho;
    let terms = f.terms();
    let total_rows: usize = terms.iter().map(|t| t.transform.rows()).sum();

    // Constant part of the x-update right-hand side.
    let mut rhs_base = data.a.adjoint_apply(data.b)? * data.weight;
    if let Some(p) = prior {
        rhs_base += &(p.l.adjoint_apply(p.c)? * p.weight);
    }

    let (mut x, mut y, mut u) = match init {
        Some(state) => {
            if state.x.len() != n || state.y.len() != terms.len() || state.u.len() != terms.len() {
                return Err(Error::DimensionMismatch {
                    context: "warm-start state",
                    expected: n,
                    got: state.x.len(),
                });
            }
            (state.x, state.y, state.u)
        }
        None => (
            Array1::zeros(n),
            terms.iter().map(|t| Array1::zeros(t.transform.rows())).collect(),
            terms.iter().map(|t| Array1::zeros(t.transform.rows())).collect(),
        ),
    };

    let mut iters = 0;
    let mut primal = 0.0;
    let mut dual = 0.0;
    for iter in 1..=params.max_iters {
        iters = iter;
        // x-update
        let mut rhs = rhs_base.clone();
        for (i, t) in terms.iter().enumerate() {
            rhs += &(t.transform.adjoint_apply(&(&y[i] - &u[i]))? * rho);
        }
        x = solver.solve(&rhs, Some(&x))?;

        // y- and u-updates
        let mut primal_sq = 0.0;
        let mut dual_vec = Array1::zeros(n);
        let mut z_norm_sq = 0.0;
        let mut y_norm_sq = 0.0;
        for (i, t) in terms.iter().enumerate() {
            let z = t.transform.apply(&x)?;
            let y_old = std::mem::replace(&mut y[i], t.atom.prox(&(&z + &u[i]), t.weight / rho));
            u[i] += &(&z - &y[i]);
            let r = &z - &y[i];
            primal_sq += r.dot(&r);
            dual_vec += &t.transform.adjoint_apply(&(&y[i] - &y_old))?;
            z_norm_sq += z.dot(&z);
            y_norm_sq += y[i].dot(&y[i]);
        }
        primal = primal_sq.sqrt();
        dual = rho * dual_vec.dot(&dual_vec).sqrt();

        if !x.iter().all(|v| v.is_finite()) || !primal.is_finite() || !dual.is_finite() {
            return Err(Error::Divergence { iter });
        }

        if terms.is_empty() {
            break; // pure quadratic: one solve is exact
        }
        if !params.fixed_iters {
            let mut dual_scale_vec = Array1::zeros(n);
            for (i, t) in terms.iter().enumerate() {
                dual_scale_vec += &t.transform.adjoint_apply(&u[i])?;
            }
            let eps_pri = (total_rows as f64).sqrt() * params.eps_abs
                + params.eps_rel * z_norm_sq.sqrt().max(y_norm_sq.sqrt());
            let eps_dual = (n as f64).sqrt() * params.eps_abs
                + params.eps_rel * rho * dual_scale_vec.dot(&dual_scale_vec).sqrt();
            if primal <= eps_pri && dual <= eps_dual {
                break;
            }
        }
    }

    let objective = objective_value(data, prior, f, &x, &y)?;
    Ok(AdmmResult {
        x: x.clone(),
        iters,
        primal_residual: primal,
        dual_residual: dual,
        objective,
        state: AdmmState { x, y, u },
    })
}

fn objective_value(
    data: &DataFit,
    prior: Option<&PriorFit>,
    f: &Regularizer,
    x: &Array1<f64>,
    y: &[Array1<f64>],
) -> Result<f64> {
    let r = &data.a.apply(x)? - data.b;
    let mut obj = 0.5 * data.weight * r.dot(&r);
    if let Some(p) = prior {
        let r = &p.l.apply(x)? - p.c;
        obj += 0.5 * p.weight * r.dot(&r);
    }
    for (i, t) in f.terms().iter().enumerate() {
        // y_i is a prox output, hence feasible for indicator atoms.
        if let crate::prox::RegValue::Finite(v) = t.atom.eval(&y[i]) {
            obj += t.weight * v;
        }
    }
    Ok(obj)
}
