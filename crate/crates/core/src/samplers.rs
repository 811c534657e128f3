//! Langevin samplers in mirror coordinates, plus baselines.
//!
//! The central update runs in the unconstrained dual space: with step size
//! `beta` and standard Gaussian noise `xi`,
//!
//! ```text
//! y' = y - beta * grad W(y) + sqrt(2 beta) * xi,      x' = grad h*(y')
//! ```
//!
//! where `W = (V + ln det grad^2 h) o grad h*` is the dual potential. The
//! same update can be driven from the primal side through
//! `grad W(y) = (grad^2 h)^{-1}[grad V + grad ln det grad^2 h]`; both forms
//! are provided and agree to rounding. The stochastic variant replaces
//! `grad W` with an unbiased mini-batch estimate; a full-size batch
//! degenerates to the deterministic gradient and consumes no batch
//! randomness, so full-batch runs are bitwise identical to the exact-gradient
//! runs.
//!
//! Baselines: an exact Dirichlet sampler (Gamma normalization), the
//! positive-orthant Riemannian Langevin update on unnormalized weights, and
//! a reflected square-root diffusion whose stationary law is known in closed
//! form.

use crate::error::{Error, Result};
use crate::mirror::{entropic_grad_h_star, softmax_into, ExpMode, SimplexPoint};
use crate::targets::{dual_drift_via_primal, DirichletModel, ObservationList, PrimalPotential};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

// ---------------------------------------------------------------------------
// noise
// ---------------------------------------------------------------------------

/// Auxiliary random-number consumers, kept on substreams disjoint from every
/// chain stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Reference oracle draws that TV curves are measured against.
    OracleReference,
    /// Second, independent oracle draw-set backing the null-TV band.
    OracleNull,
    /// Oracle draws used to initialize chains at the target.
    OracleInit,
    /// Batch draws for gradient-noise estimation.
    SigmaProbe,
}

impl StreamPurpose {
    fn stream_id(self) -> u64 {
        // Chains occupy streams 0..trials; purposes live in the top range.
        const BASE: u64 = 1 << 62;
        BASE + match self {
            StreamPurpose::OracleReference => 0,
            StreamPurpose::OracleNull => 1,
            StreamPurpose::OracleInit => 2,
            StreamPurpose::SigmaProbe => 3,
        }
    }
}

/// Deterministic random source with explicit substreams. A `(seed, stream)`
/// pair fully determines the draw sequence, independent of scheduling, so
/// parallel ensembles reproduce bitwise.
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NoiseStream { rng }
    }

    /// Stream for chain number `chain`; chain ids must stay below `2^62`.
    pub fn for_chain(seed: u64, chain: u64) -> Self {
        debug_assert!(chain < (1 << 62));
        NoiseStream::new(seed, chain)
    }

    pub fn for_purpose(seed: u64, purpose: StreamPurpose) -> Self {
        NoiseStream::new(seed, purpose.stream_id())
    }

    pub fn standard_normal(&mut self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.fill_standard_normal(&mut out);
        out
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = StandardNormal.sample(&mut self.rng);
        }
    }

    /// One Gamma(shape, 1) draw.
    pub fn gamma(&mut self, shape: f64) -> Result<f64> {
        let g = Gamma::new(shape, 1.0)
            .map_err(|e| Error::invalid("shape", format!("gamma shape {shape}: {e}")))?;
        Ok(g.sample(&mut self.rng))
    }

    /// Direct access for index sampling.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

// ---------------------------------------------------------------------------
// chain state and schedules
// ---------------------------------------------------------------------------

/// Dual-space chain state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    y: Vec<f64>,
}

impl ChainState {
    /// The conventional start `y = 0`, i.e. the uniform distribution.
    pub fn zero(dim: usize) -> Self {
        ChainState { y: vec![0.0; dim] }
    }

    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Domain("chain state needs at least one coordinate".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("chain state must be finite".into()));
        }
        Ok(ChainState { y })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Primal image `grad h*(y)`.
    pub fn primal(&self) -> Result<SimplexPoint> {
        entropic_grad_h_star(&self.y)
    }
}

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `beta_t = beta0 / (1 + t / t0)`.
    InverseTime { beta0: f64, t0: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant(b) => {
                if !b.is_finite() || b <= 0.0 {
                    return Err(Error::invalid("beta", format!("step size must be finite and > 0, got {b}")));
                }
            }
            StepSchedule::InverseTime { beta0, t0 } => {
                if !beta0.is_finite() || beta0 <= 0.0 {
                    return Err(Error::invalid("beta0", format!("must be finite and > 0, got {beta0}")));
                }
                if !t0.is_finite() || t0 <= 0.0 {
                    return Err(Error::invalid("t0", format!("must be finite and > 0, got {t0}")));
                }
            }
        }
        Ok(())
    }

    /// Step size used for the transition from iteration `t` to `t + 1`.
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Constant(b) => b,
            StepSchedule::InverseTime { beta0, t0 } => beta0 / (1.0 + t as f64 / t0),
        }
    }
}

// ---------------------------------------------------------------------------
// single steps
// ---------------------------------------------------------------------------

fn check_step_inputs(state: &ChainState, g: &[f64], beta: f64, xi: &[f64], what: &'static str) -> Result<()> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid("beta", format!("step size must be finite and > 0, got {beta}")));
    }
    if g.len() != state.dim() {
        return Err(Error::Dimension { what, expected: state.dim(), got: g.len() });
    }
    if xi.len() != state.dim() {
        return Err(Error::Dimension { what, expected: state.dim(), got: xi.len() });
    }
    if g.iter().any(|v| !v.is_finite()) || xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{what}: gradient and noise must be finite")));
    }
    Ok(())
}

/// One dual-space update `y <- y - beta g + sqrt(2 beta) xi` with a
/// precomputed dual gradient `g = grad W(y)`.
pub fn mld_step_dual(state: &mut ChainState, grad_w: &[f64], beta: f64, xi: &[f64]) -> Result<()> {
    check_step_inputs(state, grad_w, beta, xi, "mld_step_dual")?;
    let noise_scale = (2.0 * beta).sqrt();
    for (yl, (&gl, &xl)) in state.y.iter_mut().zip(grad_w.iter().zip(xi)) {
        *yl += -beta * gl + noise_scale * xl;
    }
    if state.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("mld_step_dual: state became non-finite".into()));
    }
    Ok(())
}

/// The same update with the drift computed through the primal route
/// (gradient of `V` plus the metric correction, solved through the Hessian
/// of `h`). Agrees with [`mld_step_dual`] to rounding for targets with a
/// closed dual gradient.
pub fn mld_step_primal(state: &mut ChainState, potential: &dyn PrimalPotential, beta: f64, xi: &[f64]) -> Result<()> {
    let drift = dual_drift_via_primal(potential, state.y(), 1.0)?;
    mld_step_dual(state, &drift, beta, xi)
}

// ---------------------------------------------------------------------------
// chain runs
// ---------------------------------------------------------------------------

/// Gradient source for a dual-space run.
#[derive(Debug, Clone, Copy)]
pub enum GradSource<'a> {
    /// Deterministic full gradient.
    Full,
    /// Mini-batches of the given size, drawn uniformly without replacement
    /// each step. A full-size batch degenerates to `Full` and draws no batch
    /// indices.
    Batch { obs: &'a ObservationList, batch_size: usize },
}

/// Specification of one dual-space chain.
#[derive(Clone, Copy)]
pub struct ChainRunSpec<'a> {
    pub model: &'a DirichletModel,
    pub schedule: StepSchedule,
    pub iters: u64,
    pub grad: GradSource<'a>,
    pub exp_mode: ExpMode,
}

impl ChainRunSpec<'_> {
    fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if let GradSource::Batch { obs, batch_size } = self.grad {
            if batch_size == 0 {
                return Err(Error::invalid("batch_size", "must be >= 1"));
            }
            if batch_size > obs.len() {
                return Err(Error::invalid(
                    "batch_size",
                    format!("batch size {batch_size} exceeds the {} observations", obs.len()),
                ));
            }
            if obs.num_categories() != self.model.num_categories() {
                return Err(Error::Dimension {
                    what: "observation list categories",
                    expected: self.model.num_categories(),
                    got: obs.num_categories(),
                });
            }
        }
        Ok(())
    }
}

/// Runs one dual chain from `y0`, calling `visit(k, y)` after completing
/// iteration `checkpoints[k]`. Checkpoints must be ascending and within
/// `1..=iters`. Returns the final state.
pub fn run_dual_chain(
    spec: &ChainRunSpec,
    y0: &[f64],
    noise: &mut NoiseStream,
    checkpoints: &[u64],
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    spec.validate()?;
    let d = spec.model.dim();
    if y0.len() != d {
        return Err(Error::Dimension { what: "run_dual_chain y0", expected: d, got: y0.len() });
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints.iter().any(|&c| c == 0 || c > spec.iters)
    {
        return Err(Error::invalid("checkpoints", "must be strictly ascending within 1..=iters"));
    }

    let counts = spec.model.counts();
    let params = spec.model.params();
    let scale = spec.model.dual_smoothness();
    let n_total = spec.model.total_counts();

    // Full-size batches reduce to the exact gradient; taking this branch
    // also skips the batch-index draws so the Gaussian stream stays aligned
    // with the deterministic-gradient run.
    let batch = match spec.grad {
        GradSource::Batch { obs, batch_size } if batch_size < obs.len() => Some((obs, batch_size)),
        _ => None,
    };

    let mut y = y0.to_vec();
    let mut p = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut tally = vec![0.0; d];
    let mut next_cp = 0usize;

    for t in 0..spec.iters {
        let beta = spec.schedule.at(t);
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::invalid("beta", format!("schedule produced {beta} at iteration {t}")));
        }

        match spec.exp_mode {
            ExpMode::Exact => {
                softmax_into(&y, &mut p);
            }
            ExpMode::Linearized => {
                let mut z = 1.0;
                for (pl, &yl) in p.iter_mut().zip(&y) {
                    *pl = (1.0 + yl).max(0.0);
                    z += *pl;
                }
                for pl in p.iter_mut() {
                    *pl /= z;
                }
            }
        }

        noise.fill_standard_normal(&mut xi);
        let noise_scale = (2.0 * beta).sqrt();

        if let Some((obs, b)) = batch {
            tally.fill(0.0);
            let idx = rand::seq::index::sample(noise.rng(), obs.len(), b);
            for i in idx.iter() {
                let c = obs.categories()[i];
                if c < d {
                    tally[c] += 1.0;
                }
            }
            let rescale = n_total / b as f64;
            for l in 0..d {
                let g = scale * p[l] - (rescale * tally[l] + params[l]);
                y[l] += -beta * g + noise_scale * xi[l];
            }
        } else {
            for l in 0..d {
                let g = scale * p[l] - (counts[l] + params[l]);
                y[l] += -beta * g + noise_scale * xi[l];
            }
        }

        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t + 1 });
        }
        if next_cp < checkpoints.len() && checkpoints[next_cp] == t + 1 {
            visit(next_cp, &y);
            next_cp += 1;
        }
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// positive-orthant baseline
// ---------------------------------------------------------------------------

/// One step of the positive-orthant Riemannian Langevin baseline on
/// unnormalized weights `theta` over all `d + 1` categories:
///
/// ```text
/// theta_l' = | theta_l + eps (n_l + a_l - theta_l) + sqrt(2 eps theta_l) xi_l |
/// ```
///
/// The reflection keeps weights non-negative; `eps = 0` is the identity.
/// Simplex samples are the normalized weights.
pub fn sgrld_step(theta: &mut [f64], shapes: &[f64], eps: f64, xi: &[f64]) -> Result<()> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::invalid("eps", format!("step size must be finite and >= 0, got {eps}")));
    }
    if shapes.len() != theta.len() || xi.len() != theta.len() {
        return Err(Error::Dimension { what: "sgrld_step", expected: theta.len(), got: shapes.len().min(xi.len()) });
    }
    for ((tl, &sl), &xl) in theta.iter_mut().zip(shapes).zip(xi) {
        if !tl.is_finite() || *tl < 0.0 {
            return Err(Error::Domain(format!("sgrld weight must be finite and >= 0, got {tl}")));
        }
        *tl = (*tl + eps * (sl - *tl) + (2.0 * eps * *tl).sqrt() * xl).abs();
    }
    Ok(())
}

/// Normalizes positive-orthant weights to a distribution over all
/// `d + 1` categories.
pub fn normalize_weights(theta: &[f64]) -> Result<Vec<f64>> {
    let sum: f64 = theta.iter().sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::Domain(format!("weights sum to {sum}; cannot normalize")));
    }
    Ok(theta.iter().map(|&t| t / sum).collect())
}

/// Runs the positive-orthant baseline from the given starting weights
/// (conventionally `counts + params`), visiting the raw weights at each
/// checkpoint.
pub fn run_sgrld_chain(
    model: &DirichletModel,
    theta0: &[f64],
    schedule: StepSchedule,
    iters: u64,
    noise: &mut NoiseStream,
    checkpoints: &[u64],
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    schedule.validate()?;
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.iter().any(|&c| c == 0 || c > iters)
    {
        return Err(Error::invalid("checkpoints", "must be strictly ascending within 1..=iters"));
    }
    let shapes = model.posterior_shape();
    if theta0.len() != shapes.len() {
        return Err(Error::Dimension { what: "baseline weights", expected: shapes.len(), got: theta0.len() });
    }
    if theta0.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::Domain("baseline weights must be finite and non-negative".into()));
    }
    let mut theta = theta0.to_vec();
    let mut xi = vec![0.0; theta.len()];
    let mut next_cp = 0usize;
    for t in 0..iters {
        noise.fill_standard_normal(&mut xi);
        sgrld_step(&mut theta, &shapes, schedule.at(t), &xi)?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t + 1 });
        }
        if next_cp < checkpoints.len() && checkpoints[next_cp] == t + 1 {
            visit(next_cp, &theta);
            next_cp += 1;
        }
    }
    Ok(theta)
}

// ---------------------------------------------------------------------------
// exact sampler
// ---------------------------------------------------------------------------

/// Exact posterior draw by Gamma normalization: `g_l ~ Gamma(n_l + a_l, 1)`,
/// `x = g / sum(g)`. The tail coordinate is carried explicitly.
pub fn sample_dirichlet_exact(model: &DirichletModel, noise: &mut NoiseStream) -> Result<SimplexPoint> {
    let shapes = model.posterior_shape();
    let mut g = Vec::with_capacity(shapes.len());
    for &s in &shapes {
        g.push(noise.gamma(s)?);
    }
    let sum: f64 = g.iter().sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::Domain("gamma normalization needs a finite positive sum".into()));
    }
    let tail = g[shapes.len() - 1] / sum;
    g.truncate(shapes.len() - 1);
    for v in g.iter_mut() {
        *v /= sum;
    }
    Ok(SimplexPoint::from_parts(g, tail))
}

// ---------------------------------------------------------------------------
// step-size bound
// ---------------------------------------------------------------------------

/// Step size guaranteeing the mixing bound for the stochastic dual dynamics:
///
/// ```text
/// beta = min{ (2 T R0^2 (L d + sigma^2))^{-1/2}, 1/L }
/// ```
///
/// with horizon `T`, initial divergence `R0^2`, dual smoothness `L`,
/// dimension `d`, and gradient-noise level `sigma^2`.
pub fn smld_step_size_bound(t_steps: u64, r0_sq: f64, l_smooth: f64, dim: usize, sigma_sq: f64) -> Result<f64> {
    if t_steps == 0 {
        return Err(Error::invalid("t_steps", "horizon must be >= 1"));
    }
    if !r0_sq.is_finite() || r0_sq <= 0.0 {
        return Err(Error::invalid("r0_sq", format!("must be finite and > 0, got {r0_sq}")));
    }
    if !l_smooth.is_finite() || l_smooth <= 0.0 {
        return Err(Error::invalid("l_smooth", format!("must be finite and > 0, got {l_smooth}")));
    }
    if dim == 0 {
        return Err(Error::invalid("dim", "must be >= 1"));
    }
    if !sigma_sq.is_finite() || sigma_sq < 0.0 {
        return Err(Error::invalid("sigma_sq", format!("must be finite and >= 0, got {sigma_sq}")));
    }
    let variance_branch =
        1.0 / (2.0 * t_steps as f64 * r0_sq * (l_smooth * dim as f64 + sigma_sq)).sqrt();
    Ok(variance_branch.min(1.0 / l_smooth))
}

/// Default initial-divergence proxy for [`smld_step_size_bound`]: squared
/// distance from `y0` to the dual mode plus `d / (N + G)`, the scale of the
/// stationary dual fluctuations around that mode.
pub fn default_r0_sq(model: &DirichletModel, y0: &[f64]) -> Result<f64> {
    let dim = model.dim();
    if y0.len() != dim {
        return Err(Error::Dimension { what: "y0", expected: dim, got: y0.len() });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("y0", "coordinates must be finite"));
    }
    let mode = model.dual_mode();
    let dist_sq: f64 = y0.iter().zip(&mode).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(dist_sq + dim as f64 / model.dual_smoothness())
}

/// Empirical dual gradient noise: mean squared deviation of mini-batch
/// gradients from the full gradient at `y`, over `samples` random batches.
pub fn estimate_sigma_sq(
    model: &DirichletModel,
    obs: &ObservationList,
    y: &[f64],
    batch_size: usize,
    samples: usize,
    noise: &mut NoiseStream,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    if batch_size == 0 || batch_size > obs.len() {
        return Err(Error::invalid("batch_size", format!("must be in 1..={}", obs.len())));
    }
    let full = model.grad_w(y)?;
    if batch_size == obs.len() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for _ in 0..samples {
        let idx = rand::seq::index::sample(noise.rng(), obs.len(), batch_size).into_vec();
        let g = model.stochastic_grad_w(y, &idx, obs)?;
        acc += g.iter().zip(&full).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(acc / samples as f64)
}

// ---------------------------------------------------------------------------
// square-root diffusion demo
// ---------------------------------------------------------------------------

/// Parameters of the mean-reverting square-root diffusion
/// `dX = a (b - X) dt + c sqrt(X) dB`. Requires `2 a b >= c^2` so the origin
/// is unattainable; the stationary law is Gamma(2ab/c^2, rate 2a/c^2) with
/// mean `b` and variance `b c^2 / (2a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CirParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if 2.0 * a * b < c * c {
            return Err(Error::invalid("c", format!("needs 2ab >= c^2, got 2*{a}*{b} < {c}^2")));
        }
        Ok(CirParams { a, b, c })
    }

    pub fn stationary_mean(&self) -> f64 {
        self.b
    }

    pub fn stationary_var(&self) -> f64 {
        self.b * self.c * self.c / (2.0 * self.a)
    }
}

/// One reflected Euler step of the square-root diffusion:
/// `x' = | x + beta a (b - x) + c sqrt(x) sqrt(beta) xi |`.
pub fn cir_step(x: f64, params: &CirParams, beta: f64, xi: f64) -> Result<f64> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid("beta", format!("step size must be finite and > 0, got {beta}")));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("cir state must be finite and >= 0, got {x}")));
    }
    let next = (x + beta * params.a * (params.b - x) + params.c * x.sqrt() * beta.sqrt() * xi).abs();
    if !next.is_finite() {
        return Err(Error::Domain("cir state became non-finite".into()));
    }
    Ok(next)
}

/// Trajectory moments of the square-root diffusion started at the stationary
/// mean: running mean and variance of `X_t` after discarding `burn_in` steps.
pub fn run_cir_moments(
    params: &CirParams,
    beta: f64,
    iters: u64,
    burn_in: u64,
    noise: &mut NoiseStream,
) -> Result<(f64, f64)> {
    if burn_in >= iters {
        return Err(Error::invalid("burn_in", "must be below iters"));
    }
    let mut x = params.b;
    let mut count = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for t in 0..iters {
        let xi: f64 = StandardNormal.sample(noise.rng());
        x = cir_step(x, params, beta, xi)?;
        if t >= burn_in {
            // Welford update keeps the variance numerically stable over long runs.
            count += 1.0;
            let delta = x - mean;
            mean += delta / count;
            m2 += delta * (x - mean);
        }
    }
    Ok((mean, m2 / count))
}
