//! Target distributions: Dirichlet posteriors over categorical counts, in
//! primal and dual coordinates.
//!
//! A model with counts `n_1..n_{d+1}` and prior parameters `a_1..a_{d+1}`
//! has the posterior density proportional to `prod x_l^{n_l + a_l - 1}` on
//! the open simplex, i.e. the primal potential
//!
//! ```text
//! V(x) = -sum_{l=1..d+1} (n_l + a_l - 1) ln x_l
//! ```
//!
//! Pushed through the entropic mirror map, the dual potential is smooth and
//! convex everywhere on `R^d`:
//!
//! ```text
//! W(y) = -sum_{l=1..d} (n_l + a_l) y_l + (N + G) h*(y)
//! ```
//!
//! with `N = sum n_l`, `G = sum a_l`. Its gradient is
//! `-(n_l + a_l) + (N + G) p_l` for `p = softmax(y)`, and its Hessian
//! `(N + G)(diag p - p p^T)` has eigenvalues in `(0, N + G]`, so `N + G` is
//! the dual smoothness constant.
//!
//! Mini-batch gradients replace the count vector by the rescaled tally of a
//! uniformly chosen batch of observations; the deviation from the full
//! gradient does not depend on `y`, which is what makes dual-side
//! stochastic gradients bounded while primal ones blow up near the boundary.

use crate::error::{Error, Result};
use crate::mirror::{
    entropic_grad_h_star, entropic_grad_log_det_hess_h, entropic_h_star, entropic_hess_h_solve,
    SimplexPoint,
};

/// Dirichlet posterior specification: per-category observation counts plus
/// prior parameters, over `d + 1` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletModel {
    counts: Vec<f64>,
    params: Vec<f64>,
    total_counts: f64,
    total_params: f64,
}

impl DirichletModel {
    pub fn new(counts: Vec<f64>, params: Vec<f64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::invalid("counts", "need at least 2 categories"));
        }
        if params.len() != counts.len() {
            return Err(Error::Dimension {
                what: "dirichlet params",
                expected: counts.len(),
                got: params.len(),
            });
        }
        for (i, &n) in counts.iter().enumerate() {
            if !n.is_finite() || n < 0.0 {
                return Err(Error::invalid("counts", format!("count {i} is {n}; must be finite and >= 0")));
            }
        }
        for (i, &a) in params.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::invalid("params", format!("parameter {i} is {a}; must be finite and > 0")));
            }
        }
        let total_counts = counts.iter().sum();
        let total_params = params.iter().sum();
        Ok(DirichletModel { counts, params, total_counts, total_params })
    }

    /// The sparse-counts benchmark model: 11 categories, one heavily
    /// observed, two lightly observed, eight unobserved, symmetric prior 0.1.
    pub fn sparse_benchmark() -> Self {
        let mut counts = vec![0.0; 11];
        counts[0] = 10_000.0;
        counts[1] = 10.0;
        counts[2] = 10.0;
        DirichletModel::new(counts, vec![0.1; 11]).expect("benchmark model is valid")
    }

    /// Dimension `d` of the free coordinates (`d + 1` categories).
    pub fn dim(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn num_categories(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Total observation count `N`.
    pub fn total_counts(&self) -> f64 {
        self.total_counts
    }

    /// Total prior mass `G`.
    pub fn total_params(&self) -> f64 {
        self.total_params
    }

    /// Dual smoothness constant `N + G` (largest Hessian eigenvalue of `W`).
    pub fn dual_smoothness(&self) -> f64 {
        self.total_counts + self.total_params
    }

    /// Per-category posterior Gamma shapes `n_l + a_l`, tail included.
    pub fn posterior_shape(&self) -> Vec<f64> {
        self.counts.iter().zip(&self.params).map(|(&n, &a)| n + a).collect()
    }

    /// Minimizer of the dual potential: the stationarity condition
    /// `(N + G) softmax(y) = n + a` gives `y_l = ln((n_l + a_l) / (n_tail + a_tail))`.
    pub fn dual_mode(&self) -> Vec<f64> {
        let last = self.counts.len() - 1;
        let tail_shape = self.counts[last] + self.params[last];
        self.counts
            .iter()
            .zip(&self.params)
            .take(self.dim())
            .map(|(&n, &a)| ((n + a) / tail_shape).ln())
            .collect()
    }

    fn check_dim(&self, len: usize, what: &'static str) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension { what, expected: self.dim(), got: len });
        }
        Ok(())
    }

    /// Primal potential `V(x)`; requires a strictly interior point of
    /// matching dimension.
    pub fn v(&self, x: &SimplexPoint) -> Result<f64> {
        self.check_dim(x.dim(), "dirichlet v")?;
        let mut acc = 0.0;
        for (l, &c) in x.coords().iter().enumerate() {
            acc -= (self.counts[l] + self.params[l] - 1.0) * c.ln();
        }
        let last = self.counts.len() - 1;
        acc -= (self.counts[last] + self.params[last] - 1.0) * x.tail().ln();
        if !acc.is_finite() {
            return Err(Error::Domain("dirichlet v is not finite at this point".into()));
        }
        Ok(acc)
    }

    /// Gradient of `V` with respect to the free coordinates (the tail
    /// coordinate is eliminated, so each component picks up the tail term):
    /// `-(n_l + a_l - 1)/x_l + (n_{d+1} + a_{d+1} - 1)/x_{d+1}`.
    pub fn grad_v(&self, x: &SimplexPoint) -> Result<Vec<f64>> {
        self.check_dim(x.dim(), "dirichlet grad_v")?;
        if !x.is_strictly_interior() {
            return Err(Error::Domain("dirichlet grad_v needs a strictly interior point".into()));
        }
        let last = self.counts.len() - 1;
        let tail_term = (self.counts[last] + self.params[last] - 1.0) / x.tail();
        Ok(x.coords()
            .iter()
            .enumerate()
            .map(|(l, &c)| tail_term - (self.counts[l] + self.params[l] - 1.0) / c)
            .collect())
    }

    /// Dual potential `W(y)`.
    pub fn w(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y.len(), "dirichlet w")?;
        let linear: f64 = y
            .iter()
            .enumerate()
            .map(|(l, &v)| (self.counts[l] + self.params[l]) * v)
            .sum();
        Ok(self.dual_smoothness() * entropic_h_star(y)? - linear)
    }

    /// Dual gradient `-(n_l + a_l) + (N + G) softmax(y)_l`.
    pub fn grad_w(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y.len(), "dirichlet grad_w")?;
        let p = entropic_grad_h_star(y)?;
        let scale = self.dual_smoothness();
        Ok(p.coords()
            .iter()
            .enumerate()
            .map(|(l, &pl)| scale * pl - (self.counts[l] + self.params[l]))
            .collect())
    }

    /// Hessian-vector product `(N + G)(diag p - p p^T) v` at `y`.
    pub fn hess_w_apply(&self, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y.len(), "dirichlet hess_w_apply")?;
        self.check_dim(v.len(), "dirichlet hess_w_apply vector")?;
        let p = entropic_grad_h_star(y)?;
        let scale = self.dual_smoothness();
        let s: f64 = p.coords().iter().zip(v).map(|(&pl, &vl)| pl * vl).sum();
        Ok(p.coords().iter().zip(v).map(|(&pl, &vl)| scale * pl * (vl - s)).collect())
    }

    /// Mini-batch dual gradient: for a batch `B` of observation indices,
    /// `-(N m_l / |B| + a_l) + (N + G) softmax(y)_l`, where `m` is the batch
    /// tally. Unbiased over uniformly drawn batches.
    pub fn stochastic_grad_w(&self, y: &[f64], batch: &[usize], obs: &ObservationList) -> Result<Vec<f64>> {
        self.check_dim(y.len(), "dirichlet stochastic_grad_w")?;
        self.check_obs(obs)?;
        if batch.is_empty() {
            return Err(Error::invalid("batch", "batch must be non-empty"));
        }
        let mut tally = vec![0.0; self.dim()];
        for &i in batch {
            let c = obs.category(i)?;
            if c < self.dim() {
                tally[c] += 1.0;
            }
        }
        let p = entropic_grad_h_star(y)?;
        let scale = self.dual_smoothness();
        let rescale = self.total_counts / batch.len() as f64;
        Ok(p.coords()
            .iter()
            .enumerate()
            .map(|(l, &pl)| scale * pl - (rescale * tally[l] + self.params[l]))
            .collect())
    }

    /// Mini-batch primal gradient, the baseline the dual variant is compared
    /// against: each observation contributes `-grad ln x_{c_i}` plus a `1/N`
    /// share of the prior, all rescaled by `N / |B|`.
    pub fn stochastic_grad_v(&self, x: &SimplexPoint, batch: &[usize], obs: &ObservationList) -> Result<Vec<f64>> {
        self.check_dim(x.dim(), "dirichlet stochastic_grad_v")?;
        self.check_obs(obs)?;
        if batch.is_empty() {
            return Err(Error::invalid("batch", "batch must be non-empty"));
        }
        if !x.is_strictly_interior() {
            return Err(Error::Domain("dirichlet stochastic_grad_v needs a strictly interior point".into()));
        }
        let d = self.dim();
        let mut tally = vec![0.0; d];
        let mut tail_tally = 0.0;
        for &i in batch {
            let c = obs.category(i)?;
            if c < d {
                tally[c] += 1.0;
            } else {
                tail_tally += 1.0;
            }
        }
        let rescale = self.total_counts / batch.len() as f64;
        let last = d;
        // Prior share: the batch estimator keeps the full prior term (each
        // observation carries 1/N of it, and the rescaling restores it).
        let tail_term =
            (rescale * tail_tally + self.params[last] - 1.0) / x.tail();
        Ok(x.coords()
            .iter()
            .enumerate()
            .map(|(l, &c)| tail_term - (rescale * tally[l] + self.params[l] - 1.0) / c)
            .collect())
    }

    /// One observation's share of the dual potential:
    /// `W_i(y) = -sum_l (1{c_i = l} + a_l / N) y_l + (1 + G/N) h*(y)`.
    /// These sum to `W` over the observation list.
    pub fn w_component(&self, y: &[f64], category: usize) -> Result<f64> {
        self.check_dim(y.len(), "dirichlet w_component")?;
        if category >= self.num_categories() {
            return Err(Error::invalid("category", format!("category {category} out of range")));
        }
        if self.total_counts <= 0.0 {
            return Err(Error::invalid("counts", "w_component needs at least one observation"));
        }
        let n = self.total_counts;
        let mut linear = 0.0;
        for (l, &v) in y.iter().enumerate() {
            let ind = if l == category { 1.0 } else { 0.0 };
            linear += (ind + self.params[l] / n) * v;
        }
        Ok((1.0 + self.total_params / n) * entropic_h_star(y)? - linear)
    }

    fn check_obs(&self, obs: &ObservationList) -> Result<()> {
        if obs.num_categories() != self.num_categories() {
            return Err(Error::Dimension {
                what: "observation list categories",
                expected: self.num_categories(),
                got: obs.num_categories(),
            });
        }
        Ok(())
    }
}

/// Observation-level view of a counts model: category index repeated count
/// times, in ascending category order. Requires integer counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationList {
    categories: Vec<usize>,
    num_categories: usize,
}

impl ObservationList {
    pub fn from_model(model: &DirichletModel) -> Result<Self> {
        let mut categories = Vec::new();
        for (l, &n) in model.counts().iter().enumerate() {
            if n.fract() != 0.0 || n > u32::MAX as f64 {
                return Err(Error::invalid(
                    "counts",
                    format!("count {l} is {n}; observation-level batching needs integer counts"),
                ));
            }
            categories.extend(std::iter::repeat_n(l, n as usize));
        }
        if categories.is_empty() {
            return Err(Error::invalid("counts", "observation list needs at least one observation"));
        }
        Ok(ObservationList { categories, num_categories: model.num_categories() })
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn category(&self, index: usize) -> Result<usize> {
        self.categories
            .get(index)
            .copied()
            .ok_or_else(|| Error::invalid("batch", format!("observation index {index} out of range")))
    }
}

/// A smooth potential on the open simplex, the generic entry point for
/// targets without a closed dual form.
pub trait PrimalPotential {
    fn dim(&self) -> usize;
    fn value(&self, x: &SimplexPoint) -> Result<f64>;
    /// Gradient with respect to the `d` free coordinates.
    fn grad(&self, x: &SimplexPoint) -> Result<Vec<f64>>;
}

impl PrimalPotential for DirichletModel {
    fn dim(&self) -> usize {
        DirichletModel::dim(self)
    }

    fn value(&self, x: &SimplexPoint) -> Result<f64> {
        self.v(x)
    }

    fn grad(&self, x: &SimplexPoint) -> Result<Vec<f64>> {
        self.grad_v(x)
    }
}

/// One observation's share of a Dirichlet potential:
/// `V_i(x) = -ln x_{c_i} - (1/N) sum_l (a_l - 1) ln x_l`.
#[derive(Debug, Clone)]
pub struct ObservationPotential<'a> {
    model: &'a DirichletModel,
    category: usize,
}

impl<'a> ObservationPotential<'a> {
    pub fn new(model: &'a DirichletModel, category: usize) -> Result<Self> {
        if category >= model.num_categories() {
            return Err(Error::invalid("category", format!("category {category} out of range")));
        }
        if model.total_counts() <= 0.0 {
            return Err(Error::invalid("counts", "observation potential needs observations"));
        }
        Ok(ObservationPotential { model, category })
    }
}

impl PrimalPotential for ObservationPotential<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, x: &SimplexPoint) -> Result<f64> {
        let d = self.dim();
        let n = self.model.total_counts();
        let log_coord = |l: usize| -> f64 {
            if l < d {
                x.coords()[l].ln()
            } else {
                x.tail().ln()
            }
        };
        let mut acc = -log_coord(self.category);
        for l in 0..=d {
            acc -= (self.model.params()[l] - 1.0) / n * log_coord(l);
        }
        Ok(acc)
    }

    fn grad(&self, x: &SimplexPoint) -> Result<Vec<f64>> {
        if !x.is_strictly_interior() {
            return Err(Error::Domain("observation potential needs a strictly interior point".into()));
        }
        let d = self.dim();
        let n = self.model.total_counts();
        let params = self.model.params();
        let tail_obs = if self.category == d { 1.0 } else { 0.0 };
        let tail_term = (tail_obs + (params[d] - 1.0) / n) / x.tail();
        Ok(x.coords()
            .iter()
            .enumerate()
            .map(|(l, &c)| {
                let obs = if self.category == l { 1.0 } else { 0.0 };
                tail_term - (obs + (params[l] - 1.0) / n) / c
            })
            .collect())
    }
}

/// Dual drift of a primal potential, computed through the mirror map:
///
/// ```text
/// grad W(y) = (grad^2 h(x))^{-1} [ grad V(x) + w * grad ln det grad^2 h(x) ],
/// x = grad h*(y)
/// ```
///
/// `logdet_weight` is 1 for a full potential and `1/N` for one observation's
/// share. For targets with a closed dual form this reproduces the closed-form
/// gradient; it is the second, metric-correction route of the discretized
/// dynamics.
pub fn dual_drift_via_primal(pot: &dyn PrimalPotential, y: &[f64], logdet_weight: f64) -> Result<Vec<f64>> {
    if y.len() != pot.dim() {
        return Err(Error::Dimension { what: "dual_drift_via_primal", expected: pot.dim(), got: y.len() });
    }
    let x = entropic_grad_h_star(y)?;
    let mut g = pot.grad(&x)?;
    if g.len() != pot.dim() {
        return Err(Error::Dimension { what: "primal gradient", expected: pot.dim(), got: g.len() });
    }
    let correction = entropic_grad_log_det_hess_h(&x)?;
    for (gl, cl) in g.iter_mut().zip(&correction) {
        *gl += logdet_weight * cl;
    }
    entropic_hess_h_solve(&x, &g)
}

/// Independent Dirichlet blocks over a product of simplices. Dual states are
/// flattened block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSimplexTarget {
    blocks: Vec<DirichletModel>,
    widths: Vec<usize>,
}

impl ProductSimplexTarget {
    pub fn new(blocks: Vec<DirichletModel>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("blocks", "need at least one block"));
        }
        let widths = blocks.iter().map(|b| b.dim()).collect();
        Ok(ProductSimplexTarget { blocks, widths })
    }

    pub fn blocks(&self) -> &[DirichletModel] {
        &self.blocks
    }

    /// Block widths in free coordinates, usable with `block_map_apply`.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn dim(&self) -> usize {
        self.widths.iter().sum()
    }

    /// Largest per-block dual smoothness constant.
    pub fn dual_smoothness(&self) -> f64 {
        self.blocks.iter().map(|b| b.dual_smoothness()).fold(0.0, f64::max)
    }

    pub fn w(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y.len())?;
        let mut acc = 0.0;
        let mut offset = 0;
        for (block, &w) in self.blocks.iter().zip(&self.widths) {
            acc += block.w(&y[offset..offset + w])?;
            offset += w;
        }
        Ok(acc)
    }

    /// Blockwise dual gradient, flattened in block order.
    pub fn grad_w(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y.len())?;
        let mut out = Vec::with_capacity(self.dim());
        let mut offset = 0;
        for (block, &w) in self.blocks.iter().zip(&self.widths) {
            out.extend(block.grad_w(&y[offset..offset + w])?);
            offset += w;
        }
        Ok(out)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension { what: "product simplex state", expected: self.dim(), got: len });
        }
        Ok(())
    }
}
