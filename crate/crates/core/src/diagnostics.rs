//! Convergence diagnostics for simplex-valued samplers: fixed-support
//! histograms, total-variation distance between them, log-log rate fits
//! with automatic saturation trimming, finite-difference gradient checks,
//! step-size grid search, and a one-dimensional transport distance.

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// histograms and total variation
// ---------------------------------------------------------------------------

/// Equal-width histogram on `[0, 1]`. The value 1 lands in the last bin;
/// anything outside `[0, 1]` is a domain error.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("bins", "need at least one bin"));
        }
        Ok(Histogram { counts: vec![0; bins], total: 0 })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn record(&mut self, v: f64) -> Result<()> {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("histogram value {v} outside [0, 1]")));
        }
        let bins = self.counts.len();
        let idx = ((v * bins as f64) as usize).min(bins - 1);
        self.counts[idx] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn record_all<I: IntoIterator<Item = f64>>(&mut self, values: I) -> Result<()> {
        for v in values {
            self.record(v)?;
        }
        Ok(())
    }

    /// Adds another histogram's counts into this one. Exact integer
    /// addition, so merging is order-independent.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(Error::Dimension {
                what: "histogram merge bins",
                expected: self.counts.len(),
                got: other.counts.len(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    /// Normalized bin masses; requires at least one recorded value.
    pub fn density(&self) -> Result<Vec<f64>> {
        if self.total == 0 {
            return Err(Error::Domain("histogram is empty".into()));
        }
        let t = self.total as f64;
        Ok(self.counts.iter().map(|&c| c as f64 / t).collect())
    }
}

/// Builds a histogram over `[0, 1]` in one call. An empty slice yields an
/// empty histogram (total 0).
pub fn histogram_build(values: &[f64], bins: usize) -> Result<Histogram> {
    let mut h = Histogram::new(bins)?;
    h.record_all(values.iter().copied())?;
    Ok(h)
}

/// Total-variation distance `0.5 * sum |p_k - q_k|` between the normalized
/// histograms. Requires matching bin counts and non-empty histograms.
pub fn tv_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.bins() != b.bins() {
        return Err(Error::Dimension { what: "tv_distance bins", expected: a.bins(), got: b.bins() });
    }
    let pa = a.density()?;
    let pb = b.density()?;
    Ok(0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

// ---------------------------------------------------------------------------
// rate fits
// ---------------------------------------------------------------------------

/// Fit window selection for [`rate_slope`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitWindow {
    /// Drop trailing checkpoints whose local log-log slope is above -0.1
    /// (saturated region), keeping at least three points.
    Auto,
    /// Use every positive point.
    All,
}

/// Result of a log-log least-squares fit: `ln tv ~ intercept + slope ln iter`
/// over the iteration range `window` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (u64, u64),
}

/// Fits a convergence exponent to a `(iteration, tv)` curve. Points with
/// `tv <= 0` are excluded (their log is undefined; exact zeros mean the
/// histogram resolution is exhausted). Needs at least two usable points.
pub fn rate_slope(curve: &[(u64, f64)], window: FitWindow) -> Result<RateFit> {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(curve.len());
    let mut iters: Vec<u64> = Vec::with_capacity(curve.len());
    for &(t, tv) in curve {
        if t == 0 {
            return Err(Error::invalid("curve", "iteration numbers must be >= 1"));
        }
        if !tv.is_finite() {
            return Err(Error::invalid("curve", format!("tv value {tv} is not finite")));
        }
        if tv > 0.0 {
            pts.push(((t as f64).ln(), tv.ln()));
            iters.push(t);
        }
    }
    let mut end = pts.len();
    if window == FitWindow::Auto {
        while end > 3 {
            let (x0, y0) = pts[end - 2];
            let (x1, y1) = pts[end - 1];
            let local = (y1 - y0) / (x1 - x0);
            if local > -0.1 {
                end -= 1;
            } else {
                break;
            }
        }
    }
    if end < 2 {
        return Err(Error::invalid("curve", "need at least two positive tv values to fit a rate"));
    }
    let n = end as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in &pts[..end] {
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut cov, mut var) = (0.0, 0.0);
    for &(x, y) in &pts[..end] {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var == 0.0 {
        return Err(Error::invalid("curve", "fit window spans a single iteration"));
    }
    let slope = cov / var;
    Ok(RateFit { slope, intercept: my - slope * mx, window: (iters[0], iters[end - 1]) })
}

// ---------------------------------------------------------------------------
// gradient check
// ---------------------------------------------------------------------------

/// Compares an analytic gradient against central finite differences of `f`
/// at `point` with step `h`. Returns the worst coordinate's error
/// `|g_i - fd_i| / max(1, |fd_i|)`; a gradient that is wrong by a factor of
/// two therefore scores about 1.
pub fn gradient_check(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    grad: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    point: &[f64],
    h: f64,
) -> Result<f64> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::invalid("h", format!("finite-difference step must be > 0, got {h}")));
    }
    let g = grad(point)?;
    if g.len() != point.len() {
        return Err(Error::Dimension { what: "gradient_check", expected: point.len(), got: g.len() });
    }
    let mut worst = 0.0_f64;
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let fp = f(&x)?;
        x[i] = point[i] - h;
        let fm = f(&x)?;
        x[i] = point[i];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((g[i] - fd).abs() / fd.abs().max(1.0));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// grid search
// ---------------------------------------------------------------------------

/// One step size's outcome in a grid search, ranked by the mean tv over the
/// last tenth of the checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub beta: f64,
    /// Convergence curve; retained for the best `keep` entries.
    pub curve: Vec<(u64, f64)>,
    pub final_tv: f64,
    /// Auto-window rate fit, when one is defined for the curve.
    pub slope: Option<f64>,
    pub diverged: bool,
    /// Ranking score (mean tv over the trailing tenth); NaN when diverged.
    pub score: f64,
}

/// Runs `runner` for every step size and ranks the outcomes: non-divergent
/// entries by trailing mean tv (exact ties toward the smaller step size),
/// divergent ones last. A runner returning a divergence error flags the
/// entry instead of aborting the search; any other error aborts. Errors with
/// `AllDiverged` when nothing survives. Curves are kept for the first `keep`
/// ranked entries and dropped from the rest.
pub fn grid_search(
    grid: &[f64],
    keep: usize,
    runner: &dyn Fn(f64) -> Result<Vec<(u64, f64)>>,
) -> Result<Vec<GridEntry>> {
    if grid.is_empty() {
        return Err(Error::invalid("beta_grid", "grid must be non-empty"));
    }
    if keep == 0 {
        return Err(Error::invalid("keep", "must keep at least one entry"));
    }
    for &b in grid {
        if !b.is_finite() || b <= 0.0 {
            return Err(Error::invalid("beta_grid", format!("step size {b} must be finite and > 0")));
        }
    }
    let mut entries = Vec::with_capacity(grid.len());
    for &beta in grid {
        match runner(beta) {
            Ok(curve) => {
                let bad = curve.iter().any(|&(_, tv)| !tv.is_finite());
                if bad || curve.is_empty() {
                    entries.push(GridEntry {
                        beta,
                        curve: Vec::new(),
                        final_tv: f64::NAN,
                        slope: None,
                        diverged: true,
                        score: f64::NAN,
                    });
                    continue;
                }
                let tail = curve.len().div_ceil(10);
                let score = curve[curve.len() - tail..].iter().map(|&(_, tv)| tv).sum::<f64>()
                    / tail as f64;
                let slope = rate_slope(&curve, FitWindow::Auto).ok().map(|f| f.slope);
                let final_tv = curve.last().map(|&(_, tv)| tv).unwrap();
                entries.push(GridEntry { beta, curve, final_tv, slope, diverged: false, score });
            }
            Err(Error::Divergence { .. }) | Err(Error::AllDiverged { .. }) => {
                entries.push(GridEntry {
                    beta,
                    curve: Vec::new(),
                    final_tv: f64::NAN,
                    slope: None,
                    diverged: true,
                    score: f64::NAN,
                });
            }
            Err(e) => return Err(e),
        }
    }
    if entries.iter().all(|e| e.diverged) {
        return Err(Error::AllDiverged { grid: grid.to_vec() });
    }
    entries.sort_by(|a, b| {
        match (a.diverged, b.diverged) {
            (false, true) => std::cmp::Ordering::Less,
            (true, false) => std::cmp::Ordering::Greater,
            (true, true) => a.beta.total_cmp(&b.beta),
            (false, false) => a.score.total_cmp(&b.score).then(a.beta.total_cmp(&b.beta)),
        }
    });
    for e in entries.iter_mut().skip(keep) {
        e.curve = Vec::new();
    }
    Ok(entries)
}

// ---------------------------------------------------------------------------
// transport distance
// ---------------------------------------------------------------------------

/// Squared 2-Wasserstein distance between two equal-size empirical
/// distributions on the line, via the sorted coupling:
/// `mean((sort(a)_i - sort(b)_i)^2)`.
pub fn wasserstein1d_sq(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Dimension { what: "wasserstein1d_sq", expected: a.len().max(1), got: b.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Domain("wasserstein1d_sq needs finite samples".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    #[test]
    fn histogram_matches_hand_values() {
        let h = histogram_build(&[0.1, 0.9], 2).unwrap();
        assert_eq!(h.counts(), &[1, 1]);
        assert_eq!(h.total(), 2);

        let empty = histogram_build(&[], 4).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(empty.density().is_err());

        let mut edge = Histogram::new(4).unwrap();
        edge.record(1.0).unwrap();
        edge.record(0.0).unwrap();
        assert_eq!(edge.counts(), &[1, 0, 0, 1]);

        assert!(Histogram::new(0).is_err());
        assert!(histogram_build(&[1.2], 2).is_err());
        assert!(histogram_build(&[-0.1], 2).is_err());
        assert!(histogram_build(&[f64::NAN], 2).is_err());
    }

    #[test]
    fn tv_matches_hand_value() {
        let a = histogram_build(&[0.1, 0.1, 0.9, 0.9], 2).unwrap();
        let b = histogram_build(&[0.1, 0.1, 0.1, 0.9], 2).unwrap();
        assert_abs_diff_eq!(tv_distance(&a, &b).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(tv_distance(&a, &a).unwrap(), 0.0, epsilon = 0.0);

        let c = histogram_build(&[0.5], 3).unwrap();
        assert!(tv_distance(&a, &c).is_err());
        let empty = Histogram::new(2).unwrap();
        assert!(tv_distance(&a, &empty).is_err());
    }

    fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<u64> {
        let mut out: Vec<u64> = (0..n)
            .map(|i| (lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).round() as u64)
            .collect();
        out.dedup();
        out
    }

    #[test]
    fn exact_power_laws_are_recovered() {
        for &(c, e) in &[(1.0, -0.5), (3.0, -0.25), (0.5, -1.0)] {
            let curve: Vec<(u64, f64)> = log_spaced(1.0, 1e6, 25)
                .into_iter()
                .map(|t| (t, c * (t as f64).powf(e)))
                .collect();
            let fit = rate_slope(&curve, FitWindow::Auto).unwrap();
            assert_abs_diff_eq!(fit.slope, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_curves_fit_a_zero_slope() {
        let curve: Vec<(u64, f64)> = log_spaced(1.0, 1e4, 10).into_iter().map(|t| (t, 0.2)).collect();
        let fit = rate_slope(&curve, FitWindow::Auto).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mild_floors_keep_the_rate_visible() {
        // Power law with an additive floor that never dominates: the fit
        // must stay within 0.05 of the true exponent.
        let curve: Vec<(u64, f64)> = log_spaced(1.0, 1e3, 20)
            .into_iter()
            .map(|t| (t, (t as f64).powf(-0.5) + 0.01))
            .collect();
        let fit = rate_slope(&curve, FitWindow::Auto).unwrap();
        assert!((fit.slope - (-0.5)).abs() <= 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn hard_plateaus_are_trimmed() {
        // Exact power law clipped at a floor: auto trimming must cut the
        // plateau so the fit recovers the pre-saturation exponent.
        let curve: Vec<(u64, f64)> = (0..=17)
            .map(|k| {
                let t = 1u64 << k;
                (t, (t as f64).powf(-0.5).max(0.02))
            })
            .collect();
        let auto = rate_slope(&curve, FitWindow::Auto).unwrap();
        let all = rate_slope(&curve, FitWindow::All).unwrap();
        assert!((auto.slope - (-0.5)).abs() <= 0.05, "auto slope {}", auto.slope);
        assert!(auto.window.1 <= 4096, "window {:?}", auto.window);
        assert!(all.slope > auto.slope + 0.1, "all {} auto {}", all.slope, auto.slope);
    }

    #[test]
    fn zero_tv_points_are_excluded() {
        let curve = vec![(1u64, 1.0), (10, 0.5), (100, 0.26), (1000, 0.0), (10000, 0.0)];
        let fit = rate_slope(&curve, FitWindow::All).unwrap();
        assert_eq!(fit.window, (1, 100));
        assert!(fit.slope < -0.1);

        assert!(rate_slope(&[(1, 0.0), (2, 0.0)], FitWindow::Auto).is_err());
        assert!(rate_slope(&[(0, 1.0), (2, 0.5)], FitWindow::Auto).is_err());
        assert!(rate_slope(&[(1, f64::NAN)], FitWindow::Auto).is_err());
    }

    #[test]
    fn gradient_check_scores_match_hand_values() {
        let f = |x: &[f64]| Ok(x.iter().map(|v| v * v / 2.0).sum());
        let right = |x: &[f64]| Ok(x.to_vec());
        let wrong = |x: &[f64]| Ok(x.iter().map(|v| 2.0 * v).collect());
        let p = [1.3, -0.4];
        assert!(gradient_check(&f, &right, &p, 1e-6).unwrap() <= 1e-10);
        let score = gradient_check(&f, &wrong, &p, 1e-6).unwrap();
        assert!((score - 1.0).abs() <= 0.1, "score {score}");
    }

    #[test]
    fn gradient_check_validates_the_dirichlet_dual_gradient() {
        use crate::targets::DirichletModel;
        let m = DirichletModel::new(vec![2.0, 1.0, 0.0], vec![1.0, 1.0, 1.0]).unwrap();
        let f = |y: &[f64]| m.w(y);
        let g = |y: &[f64]| m.grad_w(y);
        let err = gradient_check(&f, &g, &[0.3, -0.2], 1e-5).unwrap();
        assert!(err < 1e-6, "error {err}");
    }

    #[test]
    fn grid_search_ranks_by_trailing_tv() {
        // Synthetic runner: final tv grows with beta, so the ranking must
        // come back sorted by step size.
        let runner = |beta: f64| -> crate::error::Result<Vec<(u64, f64)>> {
            Ok((1..=100u64).map(|t| (t, beta + (t as f64).powf(-0.5))).collect())
        };
        let ranked = grid_search(&[0.3, 0.1, 0.2], 3, &runner).unwrap();
        let betas: Vec<f64> = ranked.iter().map(|e| e.beta).collect();
        assert_eq!(betas, vec![0.1, 0.2, 0.3]);
        assert!(ranked.iter().all(|e| !e.diverged && !e.curve.is_empty()));

        // Exact ties resolve toward the smaller step size.
        let flat = |_: f64| -> crate::error::Result<Vec<(u64, f64)>> {
            Ok(vec![(1, 0.5), (2, 0.5)])
        };
        let ranked = grid_search(&[0.2, 0.1], 1, &flat).unwrap();
        assert_eq!(ranked[0].beta, 0.1);
        assert!(ranked[1].curve.is_empty(), "curves beyond keep are dropped");
    }

    #[test]
    fn grid_search_flags_divergence() {
        let runner = |beta: f64| -> crate::error::Result<Vec<(u64, f64)>> {
            if beta > 0.15 {
                Err(crate::error::Error::Divergence { iteration: 3 })
            } else {
                Ok(vec![(1, 0.9), (2, 0.4), (3, 0.2)])
            }
        };
        let ranked = grid_search(&[0.1, 0.2, 0.3], 2, &runner).unwrap();
        assert_eq!(ranked[0].beta, 0.1);
        assert!(!ranked[0].diverged);
        assert!(ranked[1].diverged && ranked[2].diverged);
        assert!(ranked[1].final_tv.is_nan());

        let bad = grid_search(&[0.2, 0.3], 1, &runner).unwrap_err();
        assert!(matches!(bad, Error::AllDiverged { .. }));

        // NaN tv values flag the entry as divergent too.
        let nan_runner = |beta: f64| -> crate::error::Result<Vec<(u64, f64)>> {
            if beta > 0.15 {
                Ok(vec![(1, f64::NAN)])
            } else {
                Ok(vec![(1, 0.9), (2, 0.4)])
            }
        };
        let ranked = grid_search(&[0.1, 0.2], 2, &nan_runner).unwrap();
        assert!(!ranked[0].diverged && ranked[1].diverged);
    }

    #[test]
    fn transport_distance_matches_hand_values() {
        let a = [0.3, 0.1, 0.2];
        assert_eq!(wasserstein1d_sq(&a, &a).unwrap(), 0.0);

        let shifted: Vec<f64> = a.iter().map(|v| v + 0.7).collect();
        assert_abs_diff_eq!(wasserstein1d_sq(&a, &shifted).unwrap(), 0.49, epsilon = 1e-12);

        assert!(wasserstein1d_sq(&a, &[0.1]).is_err());
        assert!(wasserstein1d_sq(&[], &[]).is_err());
        assert!(wasserstein1d_sq(&[f64::NAN, 0.0], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn transport_distance_separates_shifted_gaussians() {
        let mut rng = StdRng::seed_from_u64(14);
        let n = 100_000;
        let a: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng) + 1.0).collect();
        let w = wasserstein1d_sq(&a, &b).unwrap();
        assert!((w - 1.0).abs() <= 0.05, "w2^2 {w}");
    }

    fn standard_normal(rng: &mut StdRng) -> f64 {
        // Box-Muller keeps the test free of distribution crates.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
