use std::fmt;
use std::str::FromStr;

use super::{GramMatrix, Matrix};
use crate::error::{Error, Result};

/// How a diagonal ridge is applied when factorizing a Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RidgePolicy {
    /// Plain solve; breakdown is an error.
    Off,
    /// Plain solve first, then one retry at `1e-6 · trace(A) / n`.
    #[default]
    Auto,
    /// Always add this fixed ridge.
    Fixed(f64),
}

impl RidgePolicy {
    /// Relative ridge used by [`RidgePolicy::Auto`] on retry.
    pub const AUTO_SCALE: f64 = 1e-6;

    pub fn auto_ridge(a: &GramMatrix) -> f64 {
        let n = a.n().max(1) as f64;
        let r = Self::AUTO_SCALE * a.trace() / n;
        if r > 0.0 {
            r
        } else {
            Self::AUTO_SCALE
        }
    }
}

impl fmt::Display for RidgePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RidgePolicy::Off => f.write_str("off"),
            RidgePolicy::Auto => f.write_str("auto"),
            RidgePolicy::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for RidgePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "off" => Ok(RidgePolicy::Off),
            "auto" => Ok(RidgePolicy::Auto),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(RidgePolicy::Fixed(v)),
                _ => Err(Error::validation(format!(
                    "ridge must be off, auto or a nonnegative number, got {other:?}"
                ))),
            },
        }
    }
}

/// Solution of a ridge-regularized SPD system together with the ridge that
/// was actually applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdSolution {
    pub solution: Matrix,
    pub ridge_used: f64,
    pub retried: bool,
}

/// Solves `(A + ridge·I)·S = B` by Cholesky factorization.
///
/// A pivot that is not safely positive (below `n·ε·max diag`) is reported as
/// [`Error::Singular`] carrying its index.
pub fn solve_spd(a: &GramMatrix, b: &Matrix, ridge: f64) -> Result<Matrix> {
    let n = a.n();
    if b.rows() != n {
        return Err(Error::validation(format!(
            "right-hand side has {} rows, system has {n}",
            b.rows()
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::validation(format!("invalid ridge {ridge}")));
    }
    let l = cholesky(a.as_matrix(), ridge)?;
    let m = b.cols();
    let mut s = b.clone();
    for col in 0..m {
        // forward: L y = b
        for i in 0..n {
            let mut v = s.get(i, col);
            for k in 0..i {
                v -= l[i * n + k] * s.get(k, col);
            }
            s.set(i, col, v / l[i * n + i]);
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut v = s.get(i, col);
            for k in (i + 1)..n {
                v -= l[k * n + i] * s.get(k, col);
            }
            s.set(i, col, v / l[i * n + i]);
        }
    }
    Ok(s)
}

/// [`solve_spd`] driven by a [`RidgePolicy`].
pub fn solve_spd_with(a: &GramMatrix, b: &Matrix, policy: RidgePolicy) -> Result<SpdSolution> {
    match policy {
        RidgePolicy::Off => Ok(SpdSolution {
            solution: solve_spd(a, b, 0.0)?,
            ridge_used: 0.0,
            retried: false,
        }),
        RidgePolicy::Fixed(r) => Ok(SpdSolution {
            solution: solve_spd(a, b, r)?,
            ridge_used: r,
            retried: false,
        }),
        RidgePolicy::Auto => match solve_spd(a, b, 0.0) {
            Ok(solution) => Ok(SpdSolution {
                solution,
                ridge_used: 0.0,
                retried: false,
            }),
            Err(Error::Singular { .. }) => {
                let r = RidgePolicy::auto_ridge(a);
                log::debug!("cholesky breakdown, retrying with ridge {r:e}");
                Ok(SpdSolution {
                    solution: solve_spd(a, b, r)?,
                    ridge_used: r,
                    retried: true,
                })
            }
            Err(e) => Err(e),
        },
    }
}

fn cholesky(a: &Matrix, ridge: f64) -> Result<Vec<f64>> {
    let n = a.rows();
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(a.get(i, i) + ridge));
    let tol = (n as f64) * f64::EPSILON * max_diag;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a.get(j, j) + ridge;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            return Err(Error::Singular {
                pivot: j,
                context: None,
            });
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / djj;
        }
    }
    Ok(l)
}

/// Reference solver: Gaussian elimination with partial pivoting on `A·S = B`.
///
/// Shares nothing with [`solve_spd`]; it exists to cross-check it.
pub fn solve_oracle(a: &GramMatrix, b: &Matrix) -> Result<Matrix> {
    let n = a.n();
    if b.rows() != n {
        return Err(Error::validation(format!(
            "right-hand side has {} rows, system has {n}",
            b.rows()
        )));
    }
    let m = b.cols();
    let w = n + m;
    let mut aug = vec![0.0; n * w];
    for i in 0..n {
        for j in 0..n {
            aug[i * w + j] = a.as_matrix().get(i, j);
        }
        for j in 0..m {
            aug[i * w + n + j] = b.get(i, j);
        }
    }
    let scale = a.as_matrix().data().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let tol = (n as f64) * f64::EPSILON * scale;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| aug[p * w + col].abs().total_cmp(&aug[q * w + col].abs()))
            .unwrap_or(col);
        if !(aug[piv * w + col].abs() > tol) {
            return Err(Error::Singular {
                pivot: col,
                context: None,
            });
        }
        if piv != col {
            for j in 0..w {
                aug.swap(piv * w + j, col * w + j);
            }
        }
        let p = aug[col * w + col];
        for r in (col + 1)..n {
            let f = aug[r * w + col] / p;
            if f == 0.0 {
                continue;
            }
            for j in col..w {
                aug[r * w + j] -= f * aug[col * w + j];
            }
        }
    }
    let mut s = Matrix::zeros(n, m);
    for j in 0..m {
        for i in (0..n).rev() {
            let mut v = aug[i * w + n + j];
            for k in (i + 1)..n {
                v -= aug[i * w + k] * s.get(k, j);
            }
            s.set(i, j, v / aug[i * w + i]);
        }
    }
    Ok(s)
}
