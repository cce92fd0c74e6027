//! Matrix-free linear operators.
//!
//! All forward maps used by the experiments live behind one enum: dense
//! matrices, the 1D Gaussian blur (Toeplitz with zero boundary), first
//! differences in 1D and 2D, the parallel-beam ray projector, and the two
//! compositions (vertical stacking and scalar scaling). Operators are
//! immutable after construction and safe to share across worker threads.
//!
//! Conventions:
//! - a map of shape `(rows, cols)` takes length-`cols` input in [`LinearMap::apply`]
//!   and length-`rows` input in [`LinearMap::adjoint_apply`];
//! - 2D images are flattened row-major with pixel `(ix, iy)` at index
//!   `iy * nx + ix`; the 2D difference map stacks all horizontal (along-x)
//!   differences first, then all vertical ones, each block in row-major
//!   pixel order.

mod beam;

pub use beam::ParallelBeam;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Largest `max(rows, cols)` for which [`LinearMap::to_dense`] materializes.
pub const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone)]
pub enum LinearMap {
    /// The identity on `R^n`.
    Identity { n: usize },
    /// An explicit dense matrix.
    Dense { matrix: Array2<f64> },
    /// 1D Gaussian blur: `A_ij = h/(sigma sqrt(2 pi)) exp(-((h(i-j))/sigma)^2 / 2)`,
    /// stored matrix-free as a kernel table (zero boundary, plain Toeplitz
    /// truncation).
    GaussianBlur1d { n: usize, sigma: f64, h: f64, kernel: Vec<f64> },
    /// First differences of a length-`n` signal: `(n-1) x n`.
    FiniteDiff1d { n: usize },
    /// Stacked horizontal and vertical first differences of an `nx x ny`
    /// image: `(nx-1)*ny + nx*(ny-1)` rows.
    FiniteDiff2d { nx: usize, ny: usize },
    /// Parallel-beam line-integral projector with exact pixel intersection
    /// lengths.
    ParallelBeam(ParallelBeam),
    /// Vertical stack of child maps sharing a column space.
    VStack { children: Vec<LinearMap>, rows: usize, cols: usize },
    /// `factor * inner`.
    Scaled { factor: f64, inner: Box<LinearMap> },
}

impl LinearMap {
    pub fn identity(n: usize) -> Self {
        LinearMap::Identity { n }
    }

    pub fn dense(matrix: Array2<f64>) -> Self {
        LinearMap::Dense { matrix }
    }

    /// Gaussian blur operator on `n` grid points with kernel width `sigma`
    /// and grid spacing `h`.
    pub fn gaussian_blur_1d(n: usize, sigma: f64, h: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("blur needs n >= 2, got {n}")));
        }
        if !(sigma > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "blur needs sigma > 0 and h > 0, got sigma={sigma}, h={h}"
            )));
        }
        let coeff = h / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let kernel = (0..n)
            .map(|d| {
                let z = h * d as f64 / sigma;
                coeff * (-0.5 * z * z).exp()
            })
            .collect();
        Ok(LinearMap::GaussianBlur1d { n, sigma, h, kernel })
    }

    /// 1D first-difference map, `(n-1) x n`.
    pub fn finite_difference_1d(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "finite differences need n >= 2, got {n}"
            )));
        }
        Ok(LinearMap::FiniteDiff1d { n })
    }

    /// 2D first-difference map on an `nx x ny` image.
    pub fn finite_difference_2d(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(format!(
                "finite differences need nx, ny >= 2, got {nx} x {ny}"
            )));
        }
        Ok(LinearMap::FiniteDiff2d { nx, ny })
    }

    /// Parallel-beam projector for an `n x n` image on `[-1,1]^2`, with
    /// `n_angles` equispaced angles in `[0, 180)` degrees and `n_rays`
    /// detector bins spanning the image diagonal.
    pub fn parallel_beam(n: usize, n_angles: usize, n_rays: usize) -> Result<Self> {
        Ok(LinearMap::ParallelBeam(ParallelBeam::new(n, n_angles, n_rays)?))
    }

    /// Vertical stack; all children must share the same column count.
    pub fn vstack(children: Vec<LinearMap>) -> Result<Self> {
        let cols = match children.first() {
            Some(c) => c.cols(),
            None => {
                return Err(Error::InvalidArgument("vstack of no children".into()));
            }
        };
        let mut rows = 0;
        for c in &children {
            if c.cols() != cols {
                return Err(Error::DimensionMismatch {
                    context: "vstack child columns",
                    expected: cols,
                    got: c.cols(),
                });
            }
            rows += c.rows();
        }
        Ok(LinearMap::VStack { children, rows, cols })
    }

    pub fn scaled(factor: f64, inner: LinearMap) -> Self {
        LinearMap::Scaled { factor, inner: Box::new(inner) }
    }

    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Identity { n } => *n,
            LinearMap::Dense { matrix } => matrix.nrows(),
            LinearMap::GaussianBlur1d { n, .. } => *n,
            LinearMap::FiniteDiff1d { n } => n - 1,
            LinearMap::FiniteDiff2d { nx, ny } => (nx - 1) * ny + nx * (ny - 1),
            LinearMap::ParallelBeam(p) => p.rows(),
            LinearMap::VStack { rows, .. } => *rows,
            LinearMap::Scaled { inner, .. } => inner.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Identity { n } => *n,
            LinearMap::Dense { matrix } => matrix.ncols(),
            LinearMap::GaussianBlur1d { n, .. } => *n,
            LinearMap::FiniteDiff1d { n } => *n,
            LinearMap::FiniteDiff2d { nx, ny } => nx * ny,
            LinearMap::ParallelBeam(p) => p.cols(),
            LinearMap::VStack { cols, .. } => *cols,
            LinearMap::Scaled { inner, .. } => inner.cols(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    /// Computes `A x`.
    pub fn apply(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                context: "apply input",
                expected: self.cols(),
                got: x.len(),
            });
        }
        Ok(match self {
            LinearMap::Identity { .. } => x.clone(),
            LinearMap::Dense { matrix } => matrix.dot(x),
            LinearMap::GaussianBlur1d { n, kernel, .. } => {
                let mut out = Array1::zeros(*n);
                for i in 0..*n {
                    let mut acc = 0.0;
                    for j in 0..*n {
                        acc += kernel[i.abs_diff(j)] * x[j];
                    }
                    out[i] = acc;
                }
                out
            }
            LinearMap::FiniteDiff1d { n } => {
                Array1::from_iter((0..n - 1).map(|i| x[i + 1] - x[i]))
            }
            LinearMap::FiniteDiff2d { nx, ny } => {
                let (nx, ny) = (*nx, *ny);
                let mut out = Array1::zeros(self.rows());
                let mut r = 0;
                for iy in 0..ny {
                    for ix in 0..nx - 1 {
                        out[r] = x[iy * nx + ix + 1] - x[iy * nx + ix];
                        r += 1;
                    }
                }
                for iy in 0..ny - 1 {
                    for ix in 0..nx {
                        out[r] = x[(iy + 1) * nx + ix] - x[iy * nx + ix];
                        r += 1;
                    }
                }
                out
            }
            LinearMap::ParallelBeam(p) => p.apply(x),
            LinearMap::VStack { children, rows, .. } => {
                let mut out = Array1::zeros(*rows);
                let mut offset = 0;
                for c in children {
                    let part = c.apply(x)?;
                    out.slice_mut(ndarray::s![offset..offset + part.len()])
                        .assign(&part);
                    offset += part.len();
                }
                out
            }
            LinearMap::Scaled { factor, inner } => inner.apply(x)? * *factor,
        })
    }

    /// Computes `A^T y`.
    pub fn adjoint_apply(&self, y: &Array1<f64>) -> Result<Array1<f64>> {
        if y.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                context: "adjoint input",
                expected: self.rows(),
                got: y.len(),
            });
        }
        Ok(match self {
            LinearMap::Identity { .. } => y.clone(),
            LinearMap::Dense { matrix } => matrix.t().dot(y),
            // The blur kernel is even in (i - j), so the operator is symmetric.
            LinearMap::GaussianBlur1d { .. } => self.apply(y)?,
            LinearMap::FiniteDiff1d { n } => {
                let mut out = Array1::zeros(*n);
                for i in 0..n - 1 {
                    out[i] -= y[i];
                    out[i + 1] += y[i];
                }
                out
            }
            LinearMap::FiniteDiff2d { nx, ny } => {
                let (nx, ny) = (*nx, *ny);
                let mut out = Array1::zeros(nx * ny);
                let mut r = 0;
                for iy in 0..ny {
                    for ix in 0..nx - 1 {
                        out[iy * nx + ix] -= y[r];
                        out[iy * nx + ix + 1] += y[r];
                        r += 1;
                    }
                }
                for iy in 0..ny - 1 {
                    for ix in 0..nx {
                        out[iy * nx + ix] -= y[r];
                        out[(iy + 1) * nx + ix] += y[r];
                        r += 1;
                    }
                }
                out
            }
            LinearMap::ParallelBeam(p) => p.adjoint_apply(y),
            LinearMap::VStack { children, cols, .. } => {
                let mut out = Array1::zeros(*cols);
                let mut offset = 0;
                for c in children {
                    let rows = c.rows();
                    let part = c.adjoint_apply(&y.slice(ndarray::s![offset..offset + rows]).to_owned())?;
                    out += &part;
                    offset += rows;
                }
                out
            }
            LinearMap::Scaled { factor, inner } => inner.adjoint_apply(y)? * *factor,
        })
    }

    /// Materializes the operator as a dense matrix. Refused above
    /// [`DENSE_LIMIT`] in either dimension to bound memory in tests.
    pub fn to_dense(&self) -> Result<Array2<f64>> {
        let (rows, cols) = self.shape();
        if rows.max(cols) > DENSE_LIMIT {
            return Err(Error::DenseTooLarge { rows, cols, limit: DENSE_LIMIT });
        }
        let mut out = Array2::zeros((rows, cols));
        let mut e = Array1::zeros(cols);
        for j in 0..cols {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            out.column_mut(j).assign(&col);
            e[j] = 0.0;
        }
        Ok(out)
    }

    /// Accumulates `weight * A^T A` into `m` (used to assemble x-update
    /// normal matrices without materializing wide operators).
    pub fn add_gram(&self, weight: f64, m: &mut Array2<f64>) -> Result<()> {
        let n = self.cols();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "gram accumulator",
                expected: n,
                got: m.nrows(),
            });
        }
        match self {
            LinearMap::Identity { n } => {
                for i in 0..*n {
                    m[[i, i]] += weight;
                }
            }
            LinearMap::Dense { matrix } => {
                let gram = matrix.t().dot(matrix);
                m.scaled_add(weight, &gram);
            }
            LinearMap::FiniteDiff1d { n } => {
                let n = *n;
                for i in 0..n - 1 {
                    m[[i, i]] += weight;
                    m[[i + 1, i + 1]] += weight;
                    m[[i, i + 1]] -= weight;
                    m[[i + 1, i]] -= weight;
                }
            }
            LinearMap::FiniteDiff2d { nx, ny } => {
                let (nx, ny) = (*nx, *ny);
                let pair = |p: usize, q: usize, m: &mut Array2<f64>| {
                    m[[p, p]] += weight;
                    m[[q, q]] += weight;
                    m[[p, q]] -= weight;
                    m[[q, p]] -= weight;
                };
                for iy in 0..ny {
                    for ix in 0..nx - 1 {
                        pair(iy * nx + ix, iy * nx + ix + 1, m);
                    }
                }
                for iy in 0..ny - 1 {
                    for ix in 0..nx {
                        pair(iy * nx + ix, (iy + 1) * nx + ix, m);
                    }
                }
            }
            LinearMap::ParallelBeam(p) => p.add_gram(weight, m),
            LinearMap::VStack { children, .. } => {
                for c in children {
                    c.add_gram(weight, m)?;
                }
            }
            LinearMap::Scaled { factor, inner } => {
                inner.add_gram(weight * factor * factor, m)?;
            }
            LinearMap::GaussianBlur1d { .. } => {
                // Kernel operators fall back to column probing; bounded to
                // keep the O(n * apply) cost sane.
                if n > 4096 {
                    return Err(Error::InvalidArgument(format!(
                        "gram of a kernel operator with {n} columns is not supported"
                    )));
                }
                let mut cols_mat = Array2::zeros((self.rows(), n));
                let mut e = Array1::zeros(n);
                for j in 0..n {
                    e[j] = 1.0;
                    cols_mat.column_mut(j).assign(&self.apply(&e)?);
                    e[j] = 0.0;
                }
                let gram = cols_mat.t().dot(&cols_mat);
                m.scaled_add(weight, &gram);
            }
        }
        Ok(())
    }
}
