//! Polyhedral partition bookkeeping: face dimensions of sparse patterns.
//!
//! For piecewise linear regularizers, the domain splits into relatively open
//! faces on which the subdifferential is constant; a solver output `x` sits
//! on the face cut out by its active pattern (zero components, flat adjacent
//! pairs). The face dimension is `n - rank(S)` where `S` stacks the active
//! rows. Closed forms exist for the common families; the generic route
//! assembles `S` and takes a numerical rank. Both are exposed so each can
//! check the other.
//!
//! Solver outputs are only approximate minimizers, so activity is decided
//! with a relative snap tolerance, and [`snap_to_pattern`] produces the
//! cleaned representative (exact zeros, exactly flat runs, clamped
//! constraints) that the Gibbs samplers and histograms consume.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linops::LinearMap;
use crate::prox::{Atom, Regularizer};

/// Active rows of the face system `S x = 0` at a snapped point.
#[derive(Debug, Clone)]
pub struct FaceInfo {
    pub dim: usize,
    /// Rows of `S`: identity rows at zero components, difference rows at
    /// flat pairs.
    pub active_rows: Array2<f64>,
    pub tol_used: f64,
}

/// Absolute activity threshold for `x`: `tol * max(1, ‖x‖∞)`.
fn activity_eps(x: &Array1<f64>, tol: f64) -> f64 {
    let inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    tol * inf.max(1.0)
}

/// Number of connected flat regions of a 1D signal: adjacent components
/// within `tol * max(1, ‖x‖∞)` of each other belong to one region.
pub fn count_flat_regions(x: &Array1<f64>, tol: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    let eps = activity_eps(x, tol);
    1 + x
        .windows(2)
        .into_iter()
        .filter(|w| (w[1] - w[0]).abs() > eps)
        .count()
}

/// Number of connected flat regions whose common value is nonzero (region
/// value taken as the region mean).
pub fn count_nonzero_flat_regions(x: &Array1<f64>, tol: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    let eps = activity_eps(x, tol);
    let mut count = 0;
    let mut start = 0;
    for i in 0..x.len() {
        let is_break = i + 1 == x.len() || (x[i + 1] - x[i]).abs() > eps;
        if is_break {
            let mean: f64 = x.slice(ndarray::s![start..=i]).mean().unwrap();
            if mean.abs() > eps {
                count += 1;
            }
            start = i + 1;
        }
    }
    count
}

/// 4-connected flat regions of an `nx x ny` image (row-major, `iy*nx + ix`),
/// by union-find over pixel pairs whose difference is within tolerance.
pub fn count_flat_regions_2d(x: &Array1<f64>, nx: usize, ny: usize, tol: f64) -> usize {
    flat_regions_2d(x, nx, ny, tol).len()
}

/// Nonzero 4-connected flat regions of an image.
pub fn count_nonzero_flat_regions_2d(x: &Array1<f64>, nx: usize, ny: usize, tol: f64) -> usize {
    let eps = activity_eps(x, tol);
    flat_regions_2d(x, nx, ny, tol)
        .into_iter()
        .filter(|members| {
            let mean: f64 = members.iter().map(|&p| x[p]).sum::<f64>() / members.len() as f64;
            mean.abs() > eps
        })
        .count()
}

fn flat_regions_2d(x: &Array1<f64>, nx: usize, ny: usize, tol: f64) -> Vec<Vec<usize>> {
    assert_eq!(x.len(), nx * ny, "image length mismatch");
    let eps = activity_eps(x, tol);
    let mut uf = UnionFind::new(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let p = iy * nx + ix;
            if ix + 1 < nx && (x[p + 1] - x[p]).abs() <= eps {
                uf.union(p, p + 1);
            }
            if iy + 1 < ny && (x[p + nx] - x[p]).abs() <= eps {
                uf.union(p, p + nx);
            }
        }
    }
    let mut groups: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for p in 0..nx * ny {
        groups.entry(uf.find(p)).or_default().push(p);
    }
    groups.into_values().collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Recognized regularizer families with closed-form face dimensions.
enum RegClass<'a> {
    NonNeg,
    LassoIdentity,
    L1General(&'a LinearMap),
    Tv1d,
    NonNegTv1d,
    Tv2d { nx: usize, ny: usize },
    /// Polyhedral but without a dispatched closed form; rank oracle applies.
    PolyhedralOther,
    /// Not polyhedral (group-l2 / quadratic terms); no face structure.
    Unsupported,
}

fn classify(f: &Regularizer) -> RegClass<'_> {
    // terms with zero weight on a norm atom vanish; indicators always count
    let active: Vec<_> = f
        .terms()
        .iter()
        .filter(|t| match t.atom {
            Atom::L1 => t.weight > 0.0,
            Atom::Zero => false,
            _ => true,
        })
        .collect();
    let polyhedral = active
        .iter()
        .all(|t| matches!(t.atom, Atom::L1 | Atom::NonNeg | Atom::Box { .. }));
    if !polyhedral {
        return RegClass::Unsupported;
    }
    let is_identity = |m: &LinearMap| matches!(m, LinearMap::Identity { .. });
    match active.as_slice() {
        [t] => match (&t.atom, &t.transform) {
            (Atom::NonNeg, m) if is_identity(m) => RegClass::NonNeg,
            (Atom::L1, m) if is_identity(m) => RegClass::LassoIdentity,
            (Atom::L1, LinearMap::FiniteDiff1d { .. }) => RegClass::Tv1d,
            (Atom::L1, LinearMap::FiniteDiff2d { nx, ny }) => RegClass::Tv2d { nx: *nx, ny: *ny },
            (Atom::L1, m) => RegClass::L1General(m),
            _ => RegClass::PolyhedralOther,
        },
        [t1, t2] => match (&t1.atom, &t1.transform, &t2.atom, &t2.transform) {
            (Atom::NonNeg, m, Atom::L1, LinearMap::FiniteDiff1d { .. }) if is_identity(m) => {
                RegClass::NonNegTv1d
            }
            (Atom::L1, LinearMap::FiniteDiff1d { .. }, Atom::NonNeg, m) if is_identity(m) => {
                RegClass::NonNegTv1d
            }
            _ => RegClass::PolyhedralOther,
        },
        _ => RegClass::PolyhedralOther,
    }
}

/// Face dimension `dim(F(x))` by closed form where one exists:
///
/// - nonnegativity or `γ‖x‖₁`: `‖x‖₀`
/// - `γ‖Dx‖₁`, `D` full rank with `k ≤ n` rows: `‖Dx‖₀ + n − rank(D)`
/// - 1D anisotropic TV: number of connected flat regions
/// - nonneg + 1D TV: number of nonzero connected flat regions
/// - 2D anisotropic TV: 4-connected flat regions
///
/// Composites without a closed form (including nonneg + 2D TV) fall back to
/// [`face_dimension_rank_oracle`]. Group-l2 (isotropic TV) and quadratic
/// terms have no polyhedral faces and are rejected.
pub fn face_dimension(f: &Regularizer, x: &Array1<f64>, tol: f64) -> Result<usize> {
    let n = f.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { context: "face point", expected: n, got: x.len() });
    }
    let eps = activity_eps(x, tol);
    match classify(f) {
        RegClass::NonNeg | RegClass::LassoIdentity => {
            Ok(x.iter().filter(|v| v.abs() > eps).count())
        }
        RegClass::Tv1d => Ok(count_flat_regions(x, tol)),
        RegClass::NonNegTv1d => Ok(count_nonzero_flat_regions(x, tol)),
        RegClass::Tv2d { nx, ny } => Ok(count_flat_regions_2d(x, nx, ny, tol)),
        RegClass::L1General(d) => {
            // ‖Dx‖₀ + n − rank(D), valid for full-rank D with k ≤ n rows;
            // otherwise fall back to the generic rank oracle.
            let k = d.rows();
            let rank_d = numerical_rank(&d.to_dense()?);
            if k <= n && rank_d == k {
                let dx = d.apply(x)?;
                Ok(dx.iter().filter(|v| v.abs() > eps).count() + n - k)
            } else {
                face_dimension_rank_oracle(f, x, tol)
            }
        }
        RegClass::PolyhedralOther => face_dimension_rank_oracle(f, x, tol),
        RegClass::Unsupported => Err(Error::UnsupportedRegularizer { context: "face_dimension" }),
    }
}

/// Generic route: assemble the active rows `S` (identity rows at zero or
/// bound-active components, transform rows where the transformed value
/// vanishes) and return `n − rank(S)`, with singular values below
/// `1e-10 · σ_max` treated as zero.
pub fn face_dimension_rank_oracle(f: &Regularizer, x: &Array1<f64>, tol: f64) -> Result<usize> {
    Ok(face_info(f, x, tol)?.dim)
}

/// The active-row system behind the rank oracle.
pub fn face_info(f: &Regularizer, x: &Array1<f64>, tol: f64) -> Result<FaceInfo> {
    let n = f.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { context: "face point", expected: n, got: x.len() });
    }
    let eps = activity_eps(x, tol);
    let mut rows: Vec<Array1<f64>> = Vec::new();
    for t in f.terms() {
        match &t.atom {
            Atom::L1 => {
                if t.weight == 0.0 {
                    continue;
                }
                let z = t.transform.apply(x)?;
                let dense = t.transform.to_dense()?;
                for (j, zj) in z.iter().enumerate() {
                    if zj.abs() <= eps {
                        rows.push(dense.row(j).to_owned());
                    }
                }
            }
            Atom::NonNeg => {
                for (i, xi) in x.iter().enumerate() {
                    if xi.abs() <= eps {
                        let mut r = Array1::zeros(n);
                        r[i] = 1.0;
                        rows.push(r);
                    }
                }
            }
            Atom::Box { lo, hi } => {
                for (i, xi) in x.iter().enumerate() {
                    let at_lo = lo.is_finite() && (xi - lo).abs() <= eps;
                    let at_hi = hi.is_finite() && (xi - hi).abs() <= eps;
                    if at_lo || at_hi {
                        let mut r = Array1::zeros(n);
                        r[i] = 1.0;
                        rows.push(r);
                    }
                }
            }
            Atom::Zero => {}
            Atom::GroupL2 { .. } | Atom::Quadratic { .. } => {
                return Err(Error::UnsupportedRegularizer { context: "face rank oracle" });
            }
        }
    }
    let mut s = Array2::zeros((rows.len(), n));
    for (i, r) in rows.iter().enumerate() {
        s.row_mut(i).assign(r);
    }
    let rank = if rows.is_empty() { 0 } else { numerical_rank(&s) };
    Ok(FaceInfo { dim: n - rank, active_rows: s, tol_used: tol })
}

fn numerical_rank(m: &Array2<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let mat = nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]]);
    let sv = mat.singular_values();
    let max = sv.iter().fold(0.0f64, |a, b| a.max(*b));
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > 1e-10 * max).count()
}

/// Result of snapping a solver output to its sparse pattern.
#[derive(Debug, Clone)]
pub struct SnapOutcome {
    pub x: Array1<f64>,
    /// Largest indicator-constraint violation that was clamped away.
    pub constraint_violation: f64,
}

/// Cleans an approximate minimizer into the exact representative of its
/// face: small components snap to zero, nearly-flat runs flatten to their
/// mean, and indicator constraints are clamped (recording the violation).
/// The raw vector should be kept alongside; this is the version face
/// dimensions and conditional densities are computed from.
pub fn snap_to_pattern(f: &Regularizer, x: &Array1<f64>, tol: f64) -> Result<SnapOutcome> {
    let n = f.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { context: "snap input", expected: n, got: x.len() });
    }
    let eps = activity_eps(x, tol);
    let mut out = x.clone();
    let mut violation = 0.0f64;

    // flatten runs for 1D TV terms, flat components for 2D TV terms
    for t in f.terms() {
        if !matches!(t.atom, Atom::L1) || t.weight == 0.0 {
            continue;
        }
        match &t.transform {
            LinearMap::FiniteDiff1d { .. } => {
                let snapshot = out.clone();
                let mut start = 0;
                for i in 0..n {
                    let is_break =
                        i + 1 == n || (snapshot[i + 1] - snapshot[i]).abs() > eps;
                    if is_break {
                        let mean: f64 = snapshot.slice(ndarray::s![start..=i]).mean().unwrap();
                        for j in start..=i {
                            out[j] = mean;
                        }
                        start = i + 1;
                    }
                }
            }
            LinearMap::FiniteDiff2d { nx, ny } => {
                let snapshot = out.clone();
                for members in flat_regions_2d(&snapshot, *nx, *ny, tol) {
                    let mean: f64 =
                        members.iter().map(|&p| snapshot[p]).sum::<f64>() / members.len() as f64;
                    for &p in &members {
                        out[p] = mean;
                    }
                }
            }
            _ => {}
        }
    }

    // zero-snap components for identity-transform sparsity terms
    for t in f.terms() {
        let is_identity = matches!(t.transform, LinearMap::Identity { .. });
        match (&t.atom, is_identity) {
            (Atom::L1, true) | (Atom::NonNeg, true) => {
                for v in out.iter_mut() {
                    if v.abs() <= eps {
                        *v = 0.0;
                    }
                }
            }
            // block sparsity: a whole block below tolerance snaps to zero
            (Atom::GroupL2 { blocks }, true) if t.weight > 0.0 => {
                for b in blocks.blocks() {
                    let norm = b.iter().map(|&i| out[i] * out[i]).sum::<f64>().sqrt();
                    if norm <= eps {
                        for &i in b {
                            out[i] = 0.0;
                        }
                    }
                }
            }
            _ => {}
        }
    }

    // clamp indicator violations (projection), recording the worst one
    for t in f.terms() {
        if !matches!(t.transform, LinearMap::Identity { .. }) {
            continue;
        }
        let (lo, hi) = match t.atom {
            Atom::NonNeg => (0.0, f64::INFINITY),
            Atom::Box { lo, hi } => (lo, hi),
            _ => continue,
        };
        for v in out.iter_mut() {
            if *v < lo {
                violation = violation.max(lo - *v);
                *v = lo;
            } else if *v > hi {
                violation = violation.max(*v - hi);
                *v = hi;
            }
        }
    }

    Ok(SnapOutcome { x: out, constraint_violation: violation })
}
