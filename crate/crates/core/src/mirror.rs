//! Mirror-map calculus on the open probability simplex.
//!
//! Points live in the open simplex
//! `X_d = { x in R^d : x_i > 0, sum_i x_i < 1 }`, with the implied last
//! coordinate `x_{d+1} = 1 - sum_i x_i`. The entropic mirror map is
//!
//! ```text
//! h(x)  = sum_{i=1..d} x_i ln x_i + x_{d+1} ln x_{d+1}
//! h*(y) = ln(1 + sum_{i=1..d} e^{y_i})
//! ```
//!
//! with gradients `(grad h)_i = ln(x_i / x_{d+1})` and
//! `(grad h*)_i = e^{y_i} / (1 + sum_j e^{y_j})` (softmax against an implicit
//! zero logit). The module also provides the log-determinant of the Hessian
//! of `h`, its gradient, and the inverse-Hessian apply, which together make
//! up the drift of the mirrored diffusion; a product-of-simplices block map;
//! the Burg map `h(x) = -ln x` on the half-line; and a linearized
//! exponential variant used to study cheap approximations of the dual-side
//! softmax.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// points
// ---------------------------------------------------------------------------

/// A strictly interior point of the open simplex, stored as the first `d`
/// coordinates plus the implied tail coordinate `x_{d+1}`.
///
/// The tail is stored explicitly instead of being recomputed as
/// `1 - sum(coords)`: near the corners the subtraction loses all relative
/// precision (the tail can be `e^{-30}` while the sum rounds to 1), which
/// would ruin the mirror round-trip guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    coords: Vec<f64>,
    tail: f64,
}

impl SimplexPoint {
    /// Validates and wraps explicit coordinates. The tail is set to
    /// `1 - sum(coords)`, which is safe here because validation bounds the
    /// sum strictly below 1.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("simplex point needs at least one coordinate".into()));
        }
        let mut sum = 0.0;
        for (i, &c) in coords.iter().enumerate() {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::Domain(format!(
                    "coordinate {i} is {c}; simplex coordinates must be finite and > 0"
                )));
            }
            sum += c;
        }
        if sum >= 1.0 {
            return Err(Error::Domain(format!(
                "coordinates sum to {sum}; must be strictly below 1"
            )));
        }
        Ok(SimplexPoint { coords, tail: 1.0 - sum })
    }

    /// Wraps coordinates together with an exactly-known tail (used by the
    /// softmax and the exact sampler, where the tail is computed with full
    /// relative precision). Callers guarantee `coords >= 0`, `tail >= 0`,
    /// and `sum(coords) + tail = 1` up to rounding; zeros are allowed, so
    /// the result may sit on the boundary.
    pub(crate) fn from_parts(coords: Vec<f64>, tail: f64) -> Self {
        SimplexPoint { coords, tail }
    }

    /// The first `d` coordinates.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// The implied coordinate `x_{d+1}`.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// True when every coordinate, including the tail, is strictly positive.
    /// Points built by `new` always are; softmax output in linearized mode
    /// may not be.
    pub fn is_strictly_interior(&self) -> bool {
        self.tail > 0.0 && self.coords.iter().all(|&c| c > 0.0)
    }

    fn require_interior(&self, op: &str) -> Result<()> {
        if self.is_strictly_interior() {
            Ok(())
        } else {
            Err(Error::Domain(format!("{op} needs a strictly interior point")))
        }
    }
}

/// A point of the unconstrained dual space `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint(Vec<f64>);

impl DualPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("dual point needs at least one coordinate".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("dual coordinate {i} is not finite")));
        }
        Ok(DualPoint(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Which mirror map a chain or experiment runs under.
#[derive(Debug, Clone, PartialEq)]
pub enum MirrorMap {
    /// Entropic map on the `dim`-dimensional open simplex.
    Entropic { dim: usize },
    /// Product of entropic maps; `blocks[k]` is the dimension of block `k`.
    Block { blocks: Vec<usize> },
    /// Burg map `h(x) = -ln x` on `(0, inf)`, dual domain `(-inf, 0)`.
    Burg,
}

impl MirrorMap {
    pub fn entropic(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "entropic map needs dim >= 1"));
        }
        Ok(MirrorMap::Entropic { dim })
    }

    pub fn block(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::invalid("blocks", "block map needs non-empty blocks of dim >= 1"));
        }
        Ok(MirrorMap::Block { blocks })
    }

    /// Dimension of the (flattened) primal and dual spaces.
    pub fn dim(&self) -> usize {
        match self {
            MirrorMap::Entropic { dim } => *dim,
            MirrorMap::Block { blocks } => blocks.iter().sum(),
            MirrorMap::Burg => 1,
        }
    }
}

fn check_finite(y: &[f64], what: &str) -> Result<()> {
    if let Some(i) = y.iter().position(|c| !c.is_finite()) {
        return Err(Error::Domain(format!("{what}: coordinate {i} is not finite")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// entropic map
// ---------------------------------------------------------------------------

/// Negative entropy `h(x) = sum x_i ln x_i + x_{d+1} ln x_{d+1}`.
pub fn entropic_h(x: &SimplexPoint) -> Result<f64> {
    x.require_interior("entropic_h")?;
    let mut acc = x.tail * x.tail.ln();
    for &c in x.coords() {
        acc += c * c.ln();
    }
    Ok(acc)
}

/// Mirror image `(grad h)_i = ln x_i - ln x_{d+1}`.
///
/// Computed as a difference of logs rather than `ln(x_i / x_{d+1})` so that
/// extreme coordinate ratios cannot overflow before the log.
pub fn entropic_grad_h(x: &SimplexPoint) -> Result<DualPoint> {
    x.require_interior("entropic_grad_h")?;
    let log_tail = x.tail.ln();
    let y = x.coords().iter().map(|&c| c.ln() - log_tail).collect();
    DualPoint::new(y)
}

/// Log-partition `h*(y) = ln(1 + sum e^{y_i})`, evaluated with the shift
/// `m = max(0, max_i y_i)` so that no intermediate exponential overflows.
pub fn entropic_h_star(y: &[f64]) -> Result<f64> {
    check_finite(y, "entropic_h_star")?;
    let m = y.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut z = (-m).exp();
    for &v in y {
        z += (v - m).exp();
    }
    Ok(m + z.ln())
}

/// Softmax with an implicit zero logit:
/// `(grad h*)_i = e^{y_i} / (1 + sum_j e^{y_j})`.
///
/// The returned point carries the tail `1 / (1 + sum e^{y_j})` at full
/// relative precision.
pub fn entropic_grad_h_star(y: &[f64]) -> Result<SimplexPoint> {
    check_finite(y, "entropic_grad_h_star")?;
    let mut coords = vec![0.0; y.len()];
    let tail = softmax_into(y, &mut coords);
    Ok(SimplexPoint::from_parts(coords, tail))
}

/// Shared softmax kernel: writes the first `d` probabilities into `out` and
/// returns the tail probability. Inputs must be finite and `out.len() ==
/// y.len()`.
pub(crate) fn softmax_into(y: &[f64], out: &mut [f64]) -> f64 {
    debug_assert_eq!(y.len(), out.len());
    let m = y.iter().fold(0.0_f64, |a, &b| a.max(b));
    let tail_raw = (-m).exp();
    let mut z = tail_raw;
    for (o, &v) in out.iter_mut().zip(y) {
        let e = (v - m).exp();
        *o = e;
        z += e;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    tail_raw / z
}

/// `ln det grad^2 h(x) = -sum_{i=1..d+1} ln x_i` (tail included).
pub fn entropic_log_det_hess_h(x: &SimplexPoint) -> Result<f64> {
    x.require_interior("entropic_log_det_hess_h")?;
    let mut acc = -x.tail.ln();
    for &c in x.coords() {
        acc -= c.ln();
    }
    Ok(acc)
}

/// Gradient of the log-determinant: component `l` is
/// `-1/x_l + 1/x_{d+1}`.
pub fn entropic_grad_log_det_hess_h(x: &SimplexPoint) -> Result<Vec<f64>> {
    x.require_interior("entropic_grad_log_det_hess_h")?;
    let inv_tail = 1.0 / x.tail;
    Ok(x.coords().iter().map(|&c| inv_tail - 1.0 / c).collect())
}

/// Applies the inverse Hessian of `h`: since
/// `grad^2 h(x) = diag(1/x) + (1/x_{d+1}) 11^T`, the inverse collapses to
/// `diag(x) - x x^T`, so the solve is `u_i = x_i (v_i - <x, v>)`.
pub fn entropic_hess_h_solve(x: &SimplexPoint, v: &[f64]) -> Result<Vec<f64>> {
    x.require_interior("entropic_hess_h_solve")?;
    if v.len() != x.dim() {
        return Err(Error::Dimension { what: "entropic_hess_h_solve", expected: x.dim(), got: v.len() });
    }
    check_finite(v, "entropic_hess_h_solve")?;
    let s: f64 = x.coords().iter().zip(v).map(|(&c, &vi)| c * vi).sum();
    Ok(x.coords().iter().zip(v).map(|(&c, &vi)| c * (vi - s)).collect())
}

// ---------------------------------------------------------------------------
// block (product-of-simplices) map
// ---------------------------------------------------------------------------

/// Direction of a block map application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    /// Primal to dual: `grad h` per block.
    Forward,
    /// Dual to primal: `grad h*` per block.
    Inverse,
}

/// Applies the entropic map blockwise to a flattened vector. `blocks[k]`
/// gives the width of block `k`; the widths must sum to `input.len()`.
pub fn block_map_apply(blocks: &[usize], input: &[f64], direction: MapDirection) -> Result<Vec<f64>> {
    let total: usize = blocks.iter().sum();
    if blocks.is_empty() || blocks.contains(&0) {
        return Err(Error::invalid("blocks", "block widths must be non-empty and >= 1"));
    }
    if total != input.len() {
        return Err(Error::Dimension { what: "block_map_apply", expected: total, got: input.len() });
    }
    let mut out = Vec::with_capacity(total);
    let mut offset = 0;
    for &width in blocks {
        let slice = &input[offset..offset + width];
        match direction {
            MapDirection::Forward => {
                let x = SimplexPoint::new(slice.to_vec())?;
                out.extend_from_slice(entropic_grad_h(&x)?.coords());
            }
            MapDirection::Inverse => {
                out.extend_from_slice(entropic_grad_h_star(slice)?.coords());
            }
        }
        offset += width;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// exponential modes
// ---------------------------------------------------------------------------

/// How dual-side exponentials are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpMode {
    /// Plain `e^y`.
    Exact,
    /// First-order surrogate `max(0, 1 + y)`.
    Linearized,
}

/// Elementwise exponential under the chosen mode.
pub fn exp_mode_transform(y: &[f64], mode: ExpMode) -> Vec<f64> {
    match mode {
        ExpMode::Exact => y.iter().map(|&v| v.exp()).collect(),
        ExpMode::Linearized => y.iter().map(|&v| (1.0 + v).max(0.0)).collect(),
    }
}

/// Softmax with an implicit zero logit under the chosen mode. In linearized
/// mode the implicit category contributes `max(0, 1 + 0) = 1`, so the
/// normalizer is `1 + sum u_l`; coordinates may be exactly zero (the output
/// can sit on the simplex boundary, which is a valid distribution).
pub fn softmax_with_mode(y: &[f64], mode: ExpMode) -> Result<SimplexPoint> {
    match mode {
        ExpMode::Exact => entropic_grad_h_star(y),
        ExpMode::Linearized => {
            check_finite(y, "softmax_with_mode")?;
            let u = exp_mode_transform(y, ExpMode::Linearized);
            let z: f64 = 1.0 + u.iter().sum::<f64>();
            let coords: Vec<f64> = u.iter().map(|&v| v / z).collect();
            Ok(SimplexPoint::from_parts(coords, 1.0 / z))
        }
    }
}

// ---------------------------------------------------------------------------
// Burg map on the half-line
// ---------------------------------------------------------------------------

fn check_burg_dual(y: f64) -> Result<()> {
    if !y.is_finite() || y >= 0.0 {
        return Err(Error::Domain(format!("burg dual point must be finite and < 0, got {y}")));
    }
    Ok(())
}

/// Burg map `h(x) = -ln x` on `(0, inf)`.
pub fn burg_h(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("burg primal point must be finite and > 0, got {x}")));
    }
    Ok(-x.ln())
}

/// `h'(x) = -1/x`, mapping `(0, inf)` onto `(-inf, 0)`.
pub fn burg_grad_h(x: f64) -> Result<f64> {
    burg_h(x)?;
    Ok(-1.0 / x)
}

/// Conjugate `h*(y) = -ln(-y) - 1` on `(-inf, 0)`.
pub fn burg_h_star(y: f64) -> Result<f64> {
    check_burg_dual(y)?;
    Ok(-(-y).ln() - 1.0)
}

/// `(h*)'(y) = -1/y`, inverse of `burg_grad_h`.
pub fn burg_grad_h_star(y: f64) -> Result<f64> {
    check_burg_dual(y)?;
    Ok(-1.0 / y)
}

/// Target family for the one-dimensional Burg-map diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BurgTarget {
    /// Unit-rate exponential density on `(0, inf)`:
    /// `W(y) = -1/y + 2 ln(-y)`.
    Exponential,
    /// Half-line Gaussian-type density with scale coefficient `c > 0`:
    /// `W(y) = c/y^2 + 2 ln(-y)`.
    Gaussian { c: f64 },
}

/// Value, first, and second derivative of a Burg dual potential at `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgCalculus {
    pub h_star: f64,
    pub w: f64,
    pub w_prime: f64,
    pub w_second: f64,
}

/// Dual potential calculus for a Burg-map target. The second derivative
/// changes sign on the dual domain (the dual potential is not convex), which
/// is the phenomenon the burg demo maps out.
pub fn burg_calculus_for(target: BurgTarget, y: f64) -> Result<BurgCalculus> {
    check_burg_dual(y)?;
    let h_star = burg_h_star(y)?;
    let (w, w_prime, w_second) = match target {
        BurgTarget::Exponential => (
            -1.0 / y + 2.0 * (-y).ln(),
            1.0 / (y * y) + 2.0 / y,
            (-2.0 - 2.0 * y) / (y * y * y),
        ),
        BurgTarget::Gaussian { c } => {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::invalid("c", format!("gaussian burg target needs c > 0, got {c}")));
            }
            let y2 = y * y;
            (
                c / y2 + 2.0 * (-y).ln(),
                -2.0 * c / (y2 * y) + 2.0 / y,
                (6.0 * c - 2.0 * y2) / (y2 * y2),
            )
        }
    };
    Ok(BurgCalculus { h_star, w, w_prime, w_second })
}

/// Burg dual calculus for the unit-rate exponential target.
pub fn burg_calculus(y: f64) -> Result<BurgCalculus> {
    burg_calculus_for(BurgTarget::Exponential, y)
}
