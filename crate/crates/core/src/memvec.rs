//! Memory vectors: one vector standing in for a whole set of descriptors.
//!
//! For a `d × n` set `X` the sum construction is `X·1` and the pseudo-inverse
//! construction is `X·(XᵀX)⁻¹·1`. The inner product of two pinv vectors
//! expands to `1ᵀ G_X⁻¹ XᵀY G_Y⁻¹ 1`, a cross-matching of all pairs in which
//! members that are similar to others in their own set are down-weighted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dot, gram, normalize_in_place, solve_spd_with, GramMatrix, Matrix, RidgePolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggMethod {
    Sum,
    Pinv,
    /// A single externally computed descriptor per location (e.g. of a stitched panorama).
    Precomputed,
}

impl AggMethod {
    pub fn code(self) -> u8 {
        match self {
            AggMethod::Sum => 0,
            AggMethod::Pinv => 1,
            AggMethod::Precomputed => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AggMethod::Sum),
            1 => Some(AggMethod::Pinv),
            2 => Some(AggMethod::Precomputed),
            _ => None,
        }
    }
}

impl fmt::Display for AggMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggMethod::Sum => "sum",
            AggMethod::Pinv => "pinv",
            AggMethod::Precomputed => "precomputed",
        })
    }
}

impl FromStr for AggMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sum" => Ok(AggMethod::Sum),
            "pinv" => Ok(AggMethod::Pinv),
            "precomputed" | "net" => Ok(AggMethod::Precomputed),
            other => Err(Error::validation(format!("unknown aggregation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryVector {
    pub values: Vec<f64>,
    pub method: AggMethod,
    pub source_count: usize,
    /// Ridge added to the Gram matrix (zero unless a ridge was needed or forced).
    pub ridge_used: f64,
    /// Set when the set had at least as many members as dimensions.
    pub overcomplete: bool,
}

impl MemoryVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Aggregation settings shared by index building and query aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateOptions {
    pub method: AggMethod,
    pub ridge: RidgePolicy,
    /// L2-normalize the memory vector after aggregation (off: raw vectors as in the model).
    pub normalize: bool,
}

impl AggregateOptions {
    pub fn new(method: AggMethod) -> Self {
        AggregateOptions {
            method,
            ridge: RidgePolicy::Auto,
            normalize: false,
        }
    }
}

fn check_input(x: &Matrix) -> Result<()> {
    if x.cols() == 0 || x.rows() == 0 {
        return Err(Error::validation("cannot aggregate an empty descriptor set"));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite descriptor entry"));
    }
    Ok(())
}

/// Column sum `X·1`.
pub fn sum_vector(x: &Matrix) -> Result<MemoryVector> {
    check_input(x)?;
    let values = (0..x.rows()).map(|i| x.row(i).iter().sum()).collect();
    Ok(MemoryVector {
        values,
        method: AggMethod::Sum,
        source_count: x.cols(),
        ridge_used: 0.0,
        overcomplete: x.cols() >= x.rows(),
    })
}

/// `X·(XᵀX + λI)⁻¹·1`.
///
/// With `n ≥ d` the Gram matrix cannot be full rank, so [`RidgePolicy::Off`]
/// is rejected and [`RidgePolicy::Auto`] applies its ridge immediately.
pub fn pinv_vector(x: &Matrix, ridge: RidgePolicy) -> Result<MemoryVector> {
    check_input(x)?;
    let (d, n) = x.shape();
    let overcomplete = n >= d;
    let g = gram(x)?;
    let policy = match (overcomplete, ridge) {
        (true, RidgePolicy::Off) => {
            return Err(Error::validation(format!(
                "{n} descriptors in {d} dimensions need a ridge"
            )))
        }
        (true, RidgePolicy::Auto) => RidgePolicy::Fixed(RidgePolicy::auto_ridge(&g)),
        (_, p) => p,
    };
    let ones = Matrix::new(n, 1, vec![1.0; n])?;
    let sol = solve_spd_with(&g, &ones, policy)?;
    let values = x.mul_vec(sol.solution.data())?;
    Ok(MemoryVector {
        values,
        method: AggMethod::Pinv,
        source_count: n,
        ridge_used: sol.ridge_used,
        overcomplete,
    })
}

/// Passes a single externally computed descriptor through as a memory vector.
pub fn precomputed_vector(x: &Matrix) -> Result<MemoryVector> {
    check_input(x)?;
    if x.cols() != 1 {
        return Err(Error::validation(format!(
            "precomputed panoramas carry one descriptor per location, got {}",
            x.cols()
        )));
    }
    Ok(MemoryVector {
        values: x.column(0),
        method: AggMethod::Precomputed,
        source_count: 1,
        ridge_used: 0.0,
        overcomplete: false,
    })
}

pub fn aggregate(x: &Matrix, opts: AggregateOptions) -> Result<MemoryVector> {
    let mut mv = match opts.method {
        AggMethod::Sum => sum_vector(x)?,
        AggMethod::Pinv => pinv_vector(x, opts.ridge)?,
        AggMethod::Precomputed => precomputed_vector(x)?,
    };
    if opts.normalize {
        normalize_in_place(&mut mv.values);
    }
    Ok(mv)
}

fn check_pair(mx: &MemoryVector, my: &MemoryVector) -> Result<()> {
    if mx.method != my.method {
        return Err(Error::validation(format!(
            "cannot compare {} memory vector with {}",
            mx.method, my.method
        )));
    }
    if mx.dim() != my.dim() {
        return Err(Error::validation(format!(
            "dimension mismatch: {} vs {}",
            mx.dim(),
            my.dim()
        )));
    }
    Ok(())
}

/// Panorama similarity of two memory vectors built the same way.
pub fn similarity(mx: &MemoryVector, my: &MemoryVector) -> Result<f64> {
    check_pair(mx, my)?;
    Ok(dot(&mx.values, &my.values))
}

/// `m(X)ᵀm(Y) = 1ᵀXᵀY1`.
pub fn similarity_sum(mx: &MemoryVector, my: &MemoryVector) -> Result<f64> {
    if mx.method != AggMethod::Sum {
        return Err(Error::validation("similarity_sum expects sum vectors"));
    }
    similarity(mx, my)
}

/// `m⁺(X)ᵀm⁺(Y) = 1ᵀG_X⁻¹XᵀYG_Y⁻¹1`.
pub fn similarity_pinv(mx: &MemoryVector, my: &MemoryVector) -> Result<f64> {
    if mx.method != AggMethod::Pinv {
        return Err(Error::validation("similarity_pinv expects pinv vectors"));
    }
    similarity(mx, my)
}

/// Gram-weighted cross-matching matrix `(G_X + λI)⁻¹ XᵀY (G_Y + λI)⁻¹`.
///
/// Its grand sum is the pinv panorama similarity of `X` and `Y` under the same
/// ridge; entry `(i, j)` is the weighted contribution of pair `(x_i, y_j)`.
pub fn cross_weight_matrix(x: &Matrix, y: &Matrix, ridge: RidgePolicy) -> Result<Matrix> {
    check_input(x)?;
    check_input(y)?;
    if x.rows() != y.rows() {
        return Err(Error::validation(format!(
            "dimension mismatch: {} vs {}",
            x.rows(),
            y.rows()
        )));
    }
    let gx = gram(x)?;
    let gy = gram(y)?;
    let cross = x.transpose().matmul(y)?;
    let left = solve_side(&gx, &cross, ridge, x.shape())?;
    let right = solve_side(&gy, &left.transpose(), ridge, y.shape())?;
    Ok(right.transpose())
}

fn solve_side(g: &GramMatrix, rhs: &Matrix, ridge: RidgePolicy, shape: (usize, usize)) -> Result<Matrix> {
    let (d, n) = shape;
    let policy = match (n >= d, ridge) {
        (true, RidgePolicy::Off) => {
            return Err(Error::validation(format!(
                "{n} descriptors in {d} dimensions need a ridge"
            )))
        }
        (true, RidgePolicy::Auto) => RidgePolicy::Fixed(RidgePolicy::auto_ridge(g)),
        (_, p) => p,
    };
    Ok(solve_spd_with(g, rhs, policy)?.solution)
}
