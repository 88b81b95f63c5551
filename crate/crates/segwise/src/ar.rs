//! Autoregressive filter estimation, stability tests, sampling and
//! simulation.
//!
//! A filter of order `L` is stored as `L + 1` coefficients
//! `[intercept, psi_1, ..., psi_L]` predicting
//! `y_n = psi_0 + psi_1 y_{n-1} + ... + psi_L y_{n-L} + e_n`.

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Relative pivot threshold below which a design column counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Intercept plus lag coefficients with estimated residual variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArFilter {
    coeffs: Vec<f64>,
    resid_var: f64,
    degenerate: bool,
}

impl ArFilter {
    /// Builds a filter from `[intercept, psi_1, ..., psi_L]`.
    pub fn new(coeffs: Vec<f64>, resid_var: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig("filter needs at least an intercept".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !resid_var.is_finite() || resid_var < 0.0 {
            return Err(Error::InvalidConfig("filter coefficients must be finite".into()));
        }
        Ok(Self { coeffs, resid_var, degenerate: false })
    }

    /// Convenience constructor from lag coefficients with zero intercept.
    pub fn from_lags(lags: &[f64]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(lags.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(lags);
        Self::new(coeffs, 1.0)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn intercept(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn lag_coeffs(&self) -> &[f64] {
        &self.coeffs[1..]
    }

    /// All coefficients, intercept first.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn resid_var(&self) -> f64 {
        self.resid_var
    }

    /// True when the fit fell back to a minimum-norm solution or the input
    /// had no variation.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    fn flag_degenerate(mut self) -> Self {
        self.degenerate = true;
        self
    }

    /// Whether all roots of `1 - psi_1 z - ... - psi_L z^L` lie strictly
    /// outside the unit circle, tested by the step-down recursion: the
    /// filter is stable iff every reflection coefficient has magnitude
    /// below one.
    pub fn is_stable(&self) -> bool {
        let mut a = self.lag_coeffs().to_vec();
        while let Some(&k) = a.last() {
            if k.abs() >= 1.0 {
                return false;
            }
            let m = a.len();
            let denom = 1.0 - k * k;
            let prev: Vec<f64> = (0..m - 1).map(|i| (a[i] + k * a[m - 2 - i]) / denom).collect();
            if prev.iter().any(|c| !c.is_finite()) {
                return false;
            }
            a = prev;
        }
        true
    }
}

/// Output of the Levinson-Durbin recursion on autocovariances `r_0..r_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Levinson {
    /// Lag coefficients of the final order-`L` predictor.
    pub coeffs: Vec<f64>,
    /// Reflection coefficients `k_1..k_L` (the partial autocorrelations).
    pub reflections: Vec<f64>,
    /// Final one-step prediction error variance.
    pub noise_var: f64,
    /// Set when `r_0` vanishes (no variation in the data).
    pub degenerate: bool,
}

/// Levinson-Durbin recursion solving the Yule-Walker system for every order
/// up to `autocov.len() - 1`.
pub fn levinson(autocov: &[f64]) -> Result<Levinson> {
    if autocov.is_empty() {
        return Err(Error::InvalidConfig("need at least the lag-0 autocovariance".into()));
    }
    let order = autocov.len() - 1;
    let r0 = autocov[0];
    if r0 <= 0.0 || r0.is_nan() {
        return Ok(Levinson {
            coeffs: vec![0.0; order],
            reflections: vec![0.0; order],
            noise_var: 0.0,
            degenerate: true,
        });
    }
    let mut coeffs = vec![0.0; order];
    let mut reflections = Vec::with_capacity(order);
    let mut var = r0;
    for m in 1..=order {
        let mut acc = autocov[m];
        for i in 1..m {
            acc -= coeffs[i - 1] * autocov[m - i];
        }
        let k = if var > r0 * 1e-14 { acc / var } else { 0.0 };
        reflections.push(k);
        let mut next = coeffs.clone();
        next[m - 1] = k;
        for i in 1..m {
            next[i - 1] = coeffs[i - 1] - k * coeffs[m - 1 - i];
        }
        coeffs = next;
        var *= 1.0 - k * k;
        if var < 0.0 {
            var = 0.0;
        }
    }
    Ok(Levinson { coeffs, reflections, noise_var: var, degenerate: false })
}

/// Biased sample autocovariances `r_0..r_max_lag` of a demeaned slice.
pub fn sample_autocov(slice: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = slice.len();
    if n <= max_lag {
        return Err(Error::SliceTooShort { needed: max_lag + 1, got: n });
    }
    let mean = slice.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = slice.iter().map(|y| y - mean).collect();
    let mut r = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let s: f64 = (lag..n).map(|t| centered[t] * centered[t - lag]).sum();
        r.push(s / n as f64);
    }
    Ok(r)
}

/// Least-squares AR fit on a one-dimensional slice.
///
/// Solves the regression by Householder QR with column pivoting; a
/// rank-deficient design falls back to the minimum-norm solution and flags
/// the result. Residual variance divides by `rows - L - 1`, floored at one.
pub fn fit_least_squares(slice: &[f64], order: usize) -> Result<ArFilter> {
    let (filter, _) = fit_least_squares_full(slice, order)?;
    Ok(filter)
}

/// As [`fit_least_squares`], additionally returning the residual sum of
/// squares of the fit.
pub fn fit_least_squares_full(slice: &[f64], order: usize) -> Result<(ArFilter, f64)> {
    let n = slice.len();
    let rows = n.saturating_sub(order);
    // Full column rank needs at least L + 1 usable rows.
    if rows < order + 1 {
        return Err(Error::SliceTooShort { needed: 2 * order + 1, got: n });
    }
    let p = order + 1;
    // Column-major design: intercept, then lags 1..=L.
    let mut cols = vec![vec![0.0; rows]; p];
    let mut rhs = vec![0.0; rows];
    for r in 0..rows {
        let t = order + r;
        cols[0][r] = 1.0;
        for lag in 1..=order {
            cols[lag][r] = slice[t - lag];
        }
        rhs[r] = slice[t];
    }
    let sol = solve_pivoted_qr(&mut cols, &mut rhs);

    let mut rss = 0.0;
    for r in 0..rows {
        let t = order + r;
        let mut pred = sol.coeffs[0];
        for lag in 1..=order {
            pred += sol.coeffs[lag] * slice[t - lag];
        }
        let e = slice[t] - pred;
        rss += e * e;
    }
    let dof = rows.saturating_sub(p).max(1);
    let mut filter = ArFilter::new(sol.coeffs, (rss / dof as f64).max(0.0))?;
    if sol.rank < p {
        filter = filter.flag_degenerate();
    }
    Ok((filter, rss))
}

struct LsSolution {
    coeffs: Vec<f64>,
    rank: usize,
}

/// Householder QR with column pivoting; on rank deficiency returns the
/// minimum-norm least-squares solution. Consumes the input columns.
fn solve_pivoted_qr(cols: &mut [Vec<f64>], rhs: &mut [f64]) -> LsSolution {
    let p = cols.len();
    let m = rhs.len();
    let steps = p.min(m);
    let mut perm: Vec<usize> = (0..p).collect();
    let mut norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let tol = RANK_TOL * RANK_TOL * max_norm.max(f64::MIN_POSITIVE);

    let mut rank = 0;
    for k in 0..steps {
        // Pivot the column with the largest remaining norm into place.
        let (best, &best_norm) = norms[k..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i + k, v))
            .unwrap();
        if best_norm <= tol {
            break;
        }
        cols.swap(k, best);
        norms.swap(k, best);
        perm.swap(k, best);

        // Householder reflection zeroing column k below row k.
        let alpha = {
            let x = &cols[k][k..];
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if x[0] >= 0.0 {
                -norm
            } else {
                norm
            }
        };
        if alpha == 0.0 {
            break;
        }
        let v: Vec<f64> = {
            let mut v = cols[k][k..].to_vec();
            v[0] -= alpha;
            v
        };
        let vnorm2: f64 = v.iter().map(|z| z * z).sum();
        if vnorm2 > 0.0 {
            let (head, tail) = cols.split_at_mut(k + 1);
            let _ = head;
            for col in tail.iter_mut() {
                apply_householder(&v, &mut col[k..], vnorm2);
            }
            apply_householder(&v, &mut rhs[k..], vnorm2);
        }
        cols[k][k] = alpha;
        for z in cols[k][k + 1..].iter_mut() {
            *z = 0.0;
        }
        rank += 1;
        for j in k + 1..p {
            norms[j] = (norms[j] - cols[j][k] * cols[j][k]).max(0.0);
        }
    }

    let mut solution = vec![0.0; p];
    if rank == p {
        // Back-substitution on the upper-triangular factor.
        for i in (0..p).rev() {
            let mut acc = rhs[i];
            for j in i + 1..p {
                acc -= cols[j][i] * solution[j];
            }
            solution[i] = acc / cols[i][i];
        }
    } else if rank > 0 {
        // Minimum-norm solution of the rank-truncated system R1 z = c,
        // z = R1^T (R1 R1^T)^{-1} c, with R1 the first `rank` rows of R.
        let r = rank;
        let mut gram = vec![vec![0.0; r]; r];
        for i in 0..r {
            for j in 0..r {
                let mut acc = 0.0;
                for col in cols.iter().take(p) {
                    acc += col[i] * col[j];
                }
                gram[i][j] = acc;
            }
        }
        let c: Vec<f64> = rhs[..r].to_vec();
        if let Some(y) = solve_dense(&mut gram, &c) {
            for (j, col) in cols.iter().enumerate().take(p) {
                let mut acc = 0.0;
                for (i, yi) in y.iter().enumerate() {
                    acc += col[i] * yi;
                }
                solution[j] = acc;
            }
        }
    }

    // Undo column pivoting.
    let mut coeffs = vec![0.0; p];
    for (pos, &orig) in perm.iter().enumerate() {
        coeffs[orig] = solution[pos];
    }
    LsSolution { coeffs, rank }
}

#[inline]
fn apply_householder(v: &[f64], target: &mut [f64], vnorm2: f64) {
    let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
    let scale = 2.0 * dot / vnorm2;
    for (t, w) in target.iter_mut().zip(v) {
        *t -= scale * w;
    }
}

/// Gaussian elimination with partial pivoting for a small dense system.
fn solve_dense(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut x = b.to_vec();
    for k in 0..n {
        let (piv, _) = a
            .iter()
            .enumerate()
            .skip(k)
            .map(|(i, row)| (i, row[k].abs()))
            .max_by(|l, r| l.1.total_cmp(&r.1))?;
        if a[piv][k].abs() < f64::MIN_POSITIVE {
            return None;
        }
        a.swap(k, piv);
        x.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= a[i][j] * x[j];
        }
        x[i] = acc / a[i][i];
    }
    Some(x)
}

/// Yule-Walker AR fit via the Levinson-Durbin recursion on biased sample
/// autocovariances of the demeaned slice. The intercept is recovered as
/// `mean * (1 - sum of lag coefficients)`.
pub fn fit_yule_walker(slice: &[f64], order: usize) -> Result<ArFilter> {
    let n = slice.len();
    if n < order + 2 {
        return Err(Error::SliceTooShort { needed: order + 2, got: n });
    }
    let mean = slice.iter().sum::<f64>() / n as f64;
    let autocov = sample_autocov(slice, order)?;
    let ld = levinson(&autocov)?;
    if ld.degenerate {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = mean;
        return Ok(ArFilter::new(coeffs, 0.0)?.flag_degenerate());
    }
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(mean * (1.0 - ld.coeffs.iter().sum::<f64>()));
    coeffs.extend_from_slice(&ld.coeffs);
    ArFilter::new(coeffs, ld.noise_var.max(0.0))
}

/// Sample partial autocorrelations: the reflection coefficients of the
/// Levinson-Durbin recursion at lags `1..=max_lag`.
pub fn pacf(slice: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if slice.len() < max_lag + 2 {
        return Err(Error::SliceTooShort { needed: max_lag + 2, got: slice.len() });
    }
    let autocov = sample_autocov(slice, max_lag)?;
    Ok(levinson(&autocov)?.reflections)
}

/// Draws a stable zero-intercept AR(L) filter.
///
/// For `L <= 2` the lag coefficients are uniform on the stability region
/// (rejection sampling on a bounding box); for larger orders, reflection
/// coefficients are drawn uniformly from `(-1, 1)` and mapped through the
/// step-up recursion, which guarantees stability but is not area-uniform.
pub fn sample_stable_filter<R: Rng + ?Sized>(order: usize, rng: &mut R) -> Result<ArFilter> {
    if order == 0 {
        return Err(Error::InvalidConfig("stable filter sampling needs order >= 1".into()));
    }
    let lags = match order {
        1 => vec![rng.random_range(-1.0..1.0)],
        2 => loop {
            let p1 = rng.random_range(-2.0..2.0);
            let p2 = rng.random_range(-1.0..1.0);
            if p1 + p2 < 1.0 && p2 - p1 < 1.0 {
                break vec![p1, p2];
            }
        },
        _ => {
            let ks: Vec<f64> = (0..order).map(|_| rng.random_range(-1.0..1.0)).collect();
            step_up(&ks)
        }
    };
    ArFilter::from_lags(&lags)
}

/// Maps reflection coefficients to lag coefficients (inverse step-down).
fn step_up(reflections: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(reflections.len());
    for (m, &k) in reflections.iter().enumerate() {
        let mut next = vec![0.0; m + 1];
        next[m] = k;
        for i in 0..m {
            next[i] = a[i] - k * a[m - 1 - i];
        }
        a = next;
    }
    a
}

/// Default number of warm-up samples discarded before recording.
pub fn default_burn_in(order: usize) -> usize {
    (100 * (order + 1)).min(1000)
}

/// Simulates `y_n = psi_0 + sum_i psi_i y_{n-i} + noise_sd * e_n` with
/// standard Gaussian innovations and zero initial values, discarding the
/// first `burn_in` samples.
pub fn simulate_ar<R: Rng + ?Sized>(
    filter: &ArFilter,
    noise_sd: f64,
    n: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    if !noise_sd.is_finite() || noise_sd < 0.0 {
        return Err(Error::InvalidConfig(
            "noise standard deviation must be finite and >= 0".into(),
        ));
    }
    let mut values = vec![0.0; burn_in + n];
    let mut history = vec![0.0; filter.order()];
    simulate_into(filter, noise_sd, &mut values, &mut history, rng);
    TimeSeries::univariate(values.split_off(burn_in))
}

/// Core recursion: fills `out` continuing from `history` (most recent value
/// last) and leaves the final `order` values back in `history`.
pub(crate) fn simulate_into<R: Rng + ?Sized>(
    filter: &ArFilter,
    noise_sd: f64,
    out: &mut [f64],
    history: &mut Vec<f64>,
    rng: &mut R,
) {
    let order = filter.order();
    debug_assert_eq!(history.len(), order);
    for t in 0..out.len() {
        let mut y = filter.intercept();
        for lag in 1..=order {
            let prev = if t >= lag { out[t - lag] } else { history[history.len() - (lag - t)] };
            y += filter.lag_coeffs()[lag - 1] * prev;
        }
        let e: f64 = rng.sample(StandardNormal);
        out[t] = y + noise_sd * e;
    }
    if order > 0 {
        if out.len() >= order {
            history.clear();
            history.extend_from_slice(&out[out.len() - order..]);
        } else {
            history.extend_from_slice(out);
            let excess = history.len() - order;
            history.drain(..excess);
        }
    }
}

/// Which estimator populates windowed filter features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Estimator {
    LeastSquares,
    YuleWalker,
}

/// AR filters fitted on consecutive disjoint windows, interpreted as an
/// (L+1)-dimensional feature sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSequence {
    filters: Vec<ArFilter>,
    window: usize,
}

impl FilterSequence {
    pub fn filters(&self) -> &[ArFilter] {
        &self.filters
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Stacks the coefficient vectors into an `n_windows x (L+1)` series.
    pub fn feature_series(&self) -> Result<TimeSeries> {
        let rows: Vec<Vec<f64>> = self.filters.iter().map(|f| f.coeffs().to_vec()).collect();
        TimeSeries::from_rows(&rows)
    }
}

/// Fits one AR filter per disjoint window of `w` rows; a trailing remainder
/// shorter than `w` is dropped.
pub fn window_features(
    series: &TimeSeries,
    w: usize,
    order: usize,
    estimator: Estimator,
) -> Result<FilterSequence> {
    if w <= 2 * order {
        return Err(Error::InvalidConfig(format!(
            "window {w} must exceed twice the order {order}"
        )));
    }
    let data = series.as_univariate()?;
    let count = data.len() / w;
    if count == 0 {
        return Err(Error::SliceTooShort { needed: w, got: data.len() });
    }
    let mut filters = Vec::with_capacity(count);
    for i in 0..count {
        let slice = &data[i * w..(i + 1) * w];
        let filter = match estimator {
            Estimator::LeastSquares => fit_least_squares(slice, order)?,
            Estimator::YuleWalker => fit_yule_walker(slice, order)?,
        };
        filters.push(filter);
    }
    Ok(FilterSequence { filters, window: w })
}
