//! Regularizer descriptions and proximal-operator atoms.
//!
//! A [`Regularizer`] is a weighted sum `f(x) = sum_i w_i * atom_i(L_i x)` of
//! simple atoms composed with linear transforms. Each atom has a cheap prox,
//! which is all the ADMM solver needs. Indicator atoms always enforce their
//! constraint: positive weights do not change a 0/infinity function, so the
//! weight only scales the finite atoms.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linops::LinearMap;

/// Extended-real value of a regularizer: either finite or `+inf` from a
/// violated indicator. Keeping the flag explicit means downstream densities
/// never multiply raw infinities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegValue {
    Finite(f64),
    Infinite,
}

impl RegValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, RegValue::Finite(_))
    }

    /// The finite value, or an error at an infeasible point.
    pub fn finite(&self) -> Result<f64> {
        match self {
            RegValue::Finite(v) => Ok(*v),
            RegValue::Infinite => Err(Error::InfeasiblePoint),
        }
    }

    fn add(self, other: RegValue) -> RegValue {
        match (self, other) {
            (RegValue::Finite(a), RegValue::Finite(b)) => RegValue::Finite(a + b),
            _ => RegValue::Infinite,
        }
    }
}

/// A partition of `0..len` into disjoint blocks, used by the group prox.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    len: usize,
}

impl BlockPartition {
    /// Validates that the blocks cover every index exactly once.
    pub fn new(blocks: Vec<Vec<usize>>, len: usize) -> Result<Self> {
        let mut seen = vec![false; len];
        let mut count = 0;
        for b in &blocks {
            for &i in b {
                if i >= len {
                    return Err(Error::InvalidArgument(format!(
                        "block index {i} out of range for length {len}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!("index {i} appears in two blocks")));
                }
                seen[i] = true;
                count += 1;
            }
        }
        if count != len {
            return Err(Error::InvalidArgument(format!(
                "blocks cover {count} of {len} indices"
            )));
        }
        Ok(Self { blocks, len })
    }

    /// Consecutive blocks of fixed size (the last may be shorter).
    pub fn contiguous(len: usize, block_size: usize) -> Self {
        assert!(block_size >= 1);
        let blocks = (0..len)
            .step_by(block_size)
            .map(|start| (start..(start + block_size).min(len)).collect())
            .collect();
        Self { blocks, len }
    }

    /// Per-pixel (horizontal, vertical) difference pairs in the stacked
    /// layout of [`LinearMap::FiniteDiff2d`] on an `nx x ny` image. Pixels on
    /// the far edges contribute singleton blocks, everything else a block of
    /// size 2; summing block norms gives isotropic total variation.
    pub fn pixel_gradient_pairs(nx: usize, ny: usize) -> Self {
        assert!(nx >= 2 && ny >= 2);
        let v_offset = (nx - 1) * ny;
        let mut blocks = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let mut b = Vec::with_capacity(2);
                if ix < nx - 1 {
                    b.push(iy * (nx - 1) + ix);
                }
                if iy < ny - 1 {
                    b.push(v_offset + iy * nx + ix);
                }
                if !b.is_empty() {
                    blocks.push(b);
                }
            }
        }
        let len = v_offset + nx * (ny - 1);
        Self { blocks, len }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// A proximable atom applied to the output of a linear transform.
#[derive(Debug, Clone)]
pub enum Atom {
    /// `‖z‖₁`
    L1,
    /// Sum of Euclidean norms over a block partition.
    GroupL2 { blocks: BlockPartition },
    /// Indicator of the nonnegative orthant.
    NonNeg,
    /// Indicator of the box `[lo, hi]^k` (bounds may be infinite).
    Box { lo: f64, hi: f64 },
    /// `½‖z − offset‖²`
    Quadratic { offset: Array1<f64> },
    /// Identically zero.
    Zero,
}

impl Atom {
    fn is_indicator(&self) -> bool {
        matches!(self, Atom::NonNeg | Atom::Box { .. })
    }

    fn is_positive_homogeneous(&self) -> bool {
        match self {
            Atom::L1 | Atom::GroupL2 { .. } | Atom::NonNeg | Atom::Zero => true,
            // A box is a cone only when each bound is 0 or infinite.
            Atom::Box { lo, hi } => {
                (*lo == 0.0 || *lo == f64::NEG_INFINITY) && (*hi == 0.0 || *hi == f64::INFINITY)
            }
            Atom::Quadratic { .. } => false,
        }
    }

    /// Atom value at `z` (unweighted).
    pub fn eval(&self, z: &Array1<f64>) -> RegValue {
        match self {
            Atom::L1 => RegValue::Finite(z.iter().map(|v| v.abs()).sum()),
            Atom::GroupL2 { blocks } => {
                let mut total = 0.0;
                for b in blocks.blocks() {
                    total += b.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt();
                }
                RegValue::Finite(total)
            }
            Atom::NonNeg => {
                if z.iter().all(|v| *v >= 0.0) {
                    RegValue::Finite(0.0)
                } else {
                    RegValue::Infinite
                }
            }
            Atom::Box { lo, hi } => {
                if z.iter().all(|v| *v >= *lo && *v <= *hi) {
                    RegValue::Finite(0.0)
                } else {
                    RegValue::Infinite
                }
            }
            Atom::Quadratic { offset } => {
                let d = z - offset;
                RegValue::Finite(0.5 * d.dot(&d))
            }
            Atom::Zero => RegValue::Finite(0.0),
        }
    }

    /// Prox of `t * atom` at `v`. Indicator atoms project for any `t`, and
    /// every atom tolerates `t = 0` (identity / plain projection).
    pub fn prox(&self, v: &Array1<f64>, t: f64) -> Array1<f64> {
        match self {
            Atom::L1 => prox_l1(v, t),
            Atom::GroupL2 { blocks } => prox_group_l2(v, blocks, t),
            Atom::NonNeg => prox_box(v, 0.0, f64::INFINITY),
            Atom::Box { lo, hi } => prox_box(v, *lo, *hi),
            Atom::Quadratic { offset } => (v + &(offset * t)) / (1.0 + t),
            Atom::Zero => v.clone(),
        }
    }
}

/// One `weight * atom(transform x)` term.
#[derive(Debug, Clone)]
pub struct Term {
    pub weight: f64,
    pub transform: LinearMap,
    pub atom: Atom,
}

/// A structured regularizer `f(x) = sum_i weight_i * atom_i(L_i x)`.
#[derive(Debug, Clone)]
pub struct Regularizer {
    terms: Vec<Term>,
    n: usize,
    positive_homogeneous: bool,
}

impl Regularizer {
    pub fn from_terms(n: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.transform.cols() != n {
                return Err(Error::DimensionMismatch {
                    context: "regularizer term transform",
                    expected: n,
                    got: t.transform.cols(),
                });
            }
            if !(t.weight >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "term weight must be >= 0, got {}",
                    t.weight
                )));
            }
            if let Atom::GroupL2 { blocks } = &t.atom {
                if blocks.len() != t.transform.rows() {
                    return Err(Error::DimensionMismatch {
                        context: "group block partition",
                        expected: t.transform.rows(),
                        got: blocks.len(),
                    });
                }
            }
            if let Atom::Quadratic { offset } = &t.atom {
                if offset.len() != t.transform.rows() {
                    return Err(Error::DimensionMismatch {
                        context: "quadratic offset",
                        expected: t.transform.rows(),
                        got: offset.len(),
                    });
                }
            }
            if let Atom::Box { lo, hi } = &t.atom {
                if !(lo <= hi) {
                    return Err(Error::InvalidArgument(format!("box bounds lo={lo} > hi={hi}")));
                }
            }
        }
        let positive_homogeneous = terms.iter().all(|t| t.atom.is_positive_homogeneous());
        Ok(Self { terms, n, positive_homogeneous })
    }

    /// The zero regularizer on `R^n`.
    pub fn zero(n: usize) -> Self {
        Self { terms: Vec::new(), n, positive_homogeneous: true }
    }

    /// `gamma * ‖x‖₁`
    pub fn lasso(n: usize, gamma: f64) -> Result<Self> {
        Self::from_terms(
            n,
            vec![Term { weight: gamma, transform: LinearMap::identity(n), atom: Atom::L1 }],
        )
    }

    /// Nonnegativity constraint.
    pub fn nonneg(n: usize) -> Result<Self> {
        Self::from_terms(
            n,
            vec![Term { weight: 1.0, transform: LinearMap::identity(n), atom: Atom::NonNeg }],
        )
    }

    /// `gamma * ‖Dx‖₁` with the 1D difference map (anisotropic TV).
    pub fn tv1d(n: usize, gamma: f64) -> Result<Self> {
        Self::from_terms(
            n,
            vec![Term {
                weight: gamma,
                transform: LinearMap::finite_difference_1d(n)?,
                atom: Atom::L1,
            }],
        )
    }

    /// Nonnegativity plus 1D anisotropic TV.
    pub fn nonneg_tv1d(n: usize, gamma: f64) -> Result<Self> {
        Self::from_terms(
            n,
            vec![
                Term { weight: 1.0, transform: LinearMap::identity(n), atom: Atom::NonNeg },
                Term {
                    weight: gamma,
                    transform: LinearMap::finite_difference_1d(n)?,
                    atom: Atom::L1,
                },
            ],
        )
    }

    /// `gamma * ‖Dx‖₁` on the 2D difference stack (anisotropic TV).
    pub fn tv2d_anisotropic(nx: usize, ny: usize, gamma: f64) -> Result<Self> {
        Self::from_terms(
            nx * ny,
            vec![Term {
                weight: gamma,
                transform: LinearMap::finite_difference_2d(nx, ny)?,
                atom: Atom::L1,
            }],
        )
    }

    /// Nonnegativity plus isotropic 2D TV: per-pixel Euclidean norms of the
    /// (horizontal, vertical) difference pair.
    pub fn nonneg_tv2d_isotropic(nx: usize, ny: usize, gamma: f64) -> Result<Self> {
        Self::from_terms(
            nx * ny,
            vec![
                Term {
                    weight: 1.0,
                    transform: LinearMap::identity(nx * ny),
                    atom: Atom::NonNeg,
                },
                Term {
                    weight: gamma,
                    transform: LinearMap::finite_difference_2d(nx, ny)?,
                    atom: Atom::GroupL2 { blocks: BlockPartition::pixel_gradient_pairs(nx, ny) },
                },
            ],
        )
    }

    /// Generic `gamma * ‖Dx‖₁`.
    pub fn l1_of(transform: LinearMap, gamma: f64) -> Result<Self> {
        let n = transform.cols();
        Self::from_terms(n, vec![Term { weight: gamma, transform, atom: Atom::L1 }])
    }

    /// Generalized Tikhonov term `weight * ½‖Dx − d‖²`.
    pub fn quadratic(transform: LinearMap, offset: Array1<f64>, weight: f64) -> Result<Self> {
        let n = transform.cols();
        Self::from_terms(n, vec![Term { weight, transform, atom: Atom::Quadratic { offset } }])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// True iff every atom is a norm or cone indicator with zero offsets,
    /// so that `f(a x) = a f(x)` for `a >= 0`.
    pub fn is_positive_homogeneous(&self) -> bool {
        self.positive_homogeneous
    }

    /// Returns the regularizer with all weights multiplied by `factor >= 0`.
    /// Indicator terms are unaffected by their weight and stay enforced.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor >= 0.0, "scale factor must be nonnegative");
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                weight: if t.atom.is_indicator() { t.weight } else { t.weight * factor },
                transform: t.transform.clone(),
                atom: t.atom.clone(),
            })
            .collect();
        Self { terms, n: self.n, positive_homogeneous: self.positive_homogeneous }
    }

    /// Evaluates `f(x)` as an extended real.
    pub fn eval(&self, x: &Array1<f64>) -> Result<RegValue> {
        let mut total = RegValue::Finite(0.0);
        for t in &self.terms {
            let z = t.transform.apply(x)?;
            let v = match t.atom.eval(&z) {
                RegValue::Finite(v) => RegValue::Finite(t.weight * v),
                RegValue::Infinite => RegValue::Infinite,
            };
            total = total.add(v);
        }
        Ok(total)
    }
}

/// Soft thresholding: componentwise `sign(v) * max(|v| - t, 0)`.
///
/// Computed as `v - t * v/|v|` above the threshold so that scalar blocks of
/// [`prox_group_l2`] reduce to it bit-exactly.
pub fn prox_l1(v: &Array1<f64>, t: f64) -> Array1<f64> {
    assert!(t >= 0.0, "threshold must be nonnegative");
    v.mapv(|a| if a.abs() > t { a - t * (a / a.abs()) } else { 0.0 })
}

/// Euclidean projection onto the box `[lo, hi]^n` (bounds may be infinite).
pub fn prox_box(v: &Array1<f64>, lo: f64, hi: f64) -> Array1<f64> {
    assert!(lo <= hi, "box bounds must satisfy lo <= hi");
    v.mapv(|a| a.clamp(lo, hi))
}

/// Block soft thresholding: each block `u` maps to `u * max(1 - t/‖u‖, 0)`.
pub fn prox_group_l2(v: &Array1<f64>, blocks: &BlockPartition, t: f64) -> Array1<f64> {
    assert!(t >= 0.0, "threshold must be nonnegative");
    assert_eq!(blocks.len(), v.len(), "partition length mismatch");
    let mut out = v.clone();
    for b in blocks.blocks() {
        let norm = b.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
        for &i in b {
            out[i] = if norm > t { v[i] - t * (v[i] / norm) } else { 0.0 };
        }
    }
    out
}

/// Exact minimizer of `½‖z − v‖² + t‖Dz‖₁` for the 1D difference map `D`,
/// by Condat's direct non-iterative taut-string method.
pub fn prox_tv1d(v: &Array1<f64>, t: f64) -> Array1<f64> {
    assert!(t >= 0.0, "threshold must be nonnegative");
    let n = v.len();
    let mut out = v.clone();
    if n <= 1 || t == 0.0 {
        return out;
    }
    let y = v.as_slice().expect("contiguous input");
    let x = out.as_slice_mut().expect("contiguous output");
    let lam = t;
    let (mut k, mut k0, mut km, mut kp) = (0usize, 0usize, 0usize, 0usize);
    let mut vmin = y[0] - lam;
    let mut vmax = y[0] + lam;
    let mut umin = lam;
    let mut umax = -lam;
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                // the lower string cannot reach the end: negative jump
                loop {
                    x[k0] = vmin;
                    k0 += 1;
                    if k0 > km {
                        break;
                    }
                }
                k = k0;
                km = k0;
                vmin = y[k];
                umin = lam;
                umax = y[k] + lam - vmax;
            } else if umax > 0.0 {
                // the upper string cannot reach the end: positive jump
                loop {
                    x[k0] = vmax;
                    k0 += 1;
                    if k0 > kp {
                        break;
                    }
                }
                k = k0;
                kp = k0;
                vmax = y[k];
                umax = -lam;
                umin = y[k] - lam - vmin;
            } else {
                // final segment
                let v_final = vmin + umin / (k - k0 + 1) as f64;
                loop {
                    x[k0] = v_final;
                    k0 += 1;
                    if k0 > k {
                        break;
                    }
                }
                return out;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < -lam {
            // negative jump: flush the segment at vmin
            loop {
                x[k0] = vmin;
                k0 += 1;
                if k0 > km {
                    break;
                }
            }
            k = k0;
            km = k0;
            kp = k0;
            vmin = y[k];
            vmax = y[k] + 2.0 * lam;
            umin = lam;
            umax = -lam;
        } else {
            umax += y[k + 1] - vmax;
            if umax > lam {
                // positive jump: flush the segment at vmax
                loop {
                    x[k0] = vmax;
                    k0 += 1;
                    if k0 > kp {
                        break;
                    }
                }
                k = k0;
                km = k0;
                kp = k0;
                vmax = y[k];
                vmin = y[k] - 2.0 * lam;
                umin = lam;
                umax = -lam;
            } else {
                // no jump: extend the segment, keeping the strings in the tube
                k += 1;
                if umin >= lam {
                    vmin += (umin - lam) / (k - k0 + 1) as f64;
                    umin = lam;
                    km = k;
                }
                if umax <= -lam {
                    vmax += (umax + lam) / (k - k0 + 1) as f64;
                    umax = -lam;
                    kp = k;
                }
            }
        }
    }
}

/// Prox of `f(z) = ½‖Dz − d‖²` in the `‖·‖_{Σ⁻¹}` norm:
/// `(Σ⁻¹ + DᵀD)⁻¹ (Σ⁻¹ v + Dᵀ d)`, solved by a Cholesky factorization.
pub fn prox_quadratic(
    v: &Array1<f64>,
    sigma_inv: &Array2<f64>,
    d_map: &LinearMap,
    d: &Array1<f64>,
) -> Result<Array1<f64>> {
    let n = v.len();
    if sigma_inv.nrows() != n || sigma_inv.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "prox_quadratic precision",
            expected: n,
            got: sigma_inv.nrows(),
        });
    }
    if d_map.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "prox_quadratic transform",
            expected: n,
            got: d_map.cols(),
        });
    }
    let mut system = sigma_inv.clone();
    d_map.add_gram(1.0, &mut system)?;
    let rhs = sigma_inv.dot(v) + d_map.adjoint_apply(d)?;
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| system[[i, j]]);
    let chol = nalgebra::Cholesky::new(mat).ok_or(Error::SingularSystem)?;
    let sol = chol.solve(&nalgebra::DVector::from_iterator(n, rhs.iter().copied()));
    Ok(Array1::from_iter(sol.iter().copied()))
}
