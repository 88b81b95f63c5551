//! Binary segmentation driven by cumulated AR prediction error.
//!
//! Each step scans every admissible split of every current segment,
//! refitting both sides from scratch, and accepts the best split only when
//! the loss reduction exceeds the penalty term. The per-candidate refits
//! make one full scan quadratic in the segment length.

use crate::ar::fit_least_squares_full;
use crate::error::{Error, Result};
use crate::segment::PenaltySpec;
use crate::series::TimeSeries;
use serde::Serialize;

/// Sum of squared one-step prediction errors of the least-squares AR fit
/// on the slice. Slices too short for a meaningful fit (length at most
/// `2L + 2`) return infinity so a split there is never chosen.
///
/// The split scan of binary segmentation calls this once per candidate and
/// side, so the residual sum is accumulated through the normal equations in
/// a single pass; a singular system falls back to the pivoted-QR estimator.
/// Either route minimizes the same quadratic, so the returned value agrees
/// to rounding.
pub fn ar_loss(slice: &[f64], order: usize) -> f64 {
    if slice.len() <= 2 * order + 2 {
        return f64::INFINITY;
    }
    if let Some(rss) = rss_normal_equations(slice, order) {
        return rss;
    }
    match fit_least_squares_full(slice, order) {
        Ok((_, rss)) => rss,
        Err(_) => f64::INFINITY,
    }
}

/// One-pass least-squares residual sum. The slice is demeaned first (the
/// intercept absorbs any shift, leaving the residuals unchanged) to keep
/// the accumulated cross-products well scaled. Returns `None` when the
/// normal equations are numerically singular.
///
/// Dedicated unrolled loops cover orders 0..=2 since the split scan calls
/// this millions of times.
fn rss_normal_equations(slice: &[f64], order: usize) -> Option<f64> {
    let shift = slice.iter().sum::<f64>() / slice.len() as f64;
    match order {
        0 => {
            let rows = slice.len() as f64;
            let mut sy = 0.0;
            let mut syy = 0.0;
            for &v in slice {
                let y = v - shift;
                sy += y;
                syy += y * y;
            }
            Some((syy - sy * sy / rows).max(0.0))
        }
        1 => {
            let rows = (slice.len() - 1) as f64;
            let (mut sa, mut sy, mut saa, mut say, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for w in slice.windows(2) {
                let a = w[0] - shift;
                let y = w[1] - shift;
                sa += a;
                sy += y;
                saa += a * a;
                say += a * y;
                syy += y * y;
            }
            let mut xtx = [rows, sa, sa, saa];
            let mut xty = [sy, say];
            let scale = rows.max(saa);
            let coef = solve_inplace(&mut xtx, &mut xty, 2, scale)?;
            Some((syy - coef[0] * sy - coef[1] * say).max(0.0))
        }
        2 => {
            let rows = (slice.len() - 2) as f64;
            let (mut sa, mut sb) = (0.0, 0.0);
            let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
            let (mut sy, mut say, mut sby, mut syy) = (0.0, 0.0, 0.0, 0.0);
            for w in slice.windows(3) {
                let b = w[0] - shift;
                let a = w[1] - shift;
                let y = w[2] - shift;
                sa += a;
                sb += b;
                saa += a * a;
                sab += a * b;
                sbb += b * b;
                sy += y;
                say += a * y;
                sby += b * y;
                syy += y * y;
            }
            let mut xtx = [rows, sa, sb, sa, saa, sab, sb, sab, sbb];
            let mut xty = [sy, say, sby];
            let scale = rows.max(saa).max(sbb);
            let coef = solve_inplace(&mut xtx, &mut xty, 3, scale)?;
            Some((syy - coef[0] * sy - coef[1] * say - coef[2] * sby).max(0.0))
        }
        _ => rss_normal_equations_generic(slice, order, shift),
    }
}

fn rss_normal_equations_generic(slice: &[f64], order: usize, shift: f64) -> Option<f64> {
    let p = order + 1;
    // Accumulate X'X (symmetric) and X'y over design rows
    // [1, y_{t-1} - shift, ..., y_{t-L} - shift].
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    let mut row = vec![0.0; p];
    for t in order..slice.len() {
        row[0] = 1.0;
        for lag in 1..=order {
            row[lag] = slice[t - lag] - shift;
        }
        let y = slice[t] - shift;
        for i in 0..p {
            xty[i] += row[i] * y;
            for j in i..p {
                xtx[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[i * p + j] = xtx[j * p + i];
        }
    }
    let scale = (0..p).map(|i| xtx[i * p + i]).fold(0.0f64, f64::max);
    let coef = solve_inplace(&mut xtx, &mut xty, p, scale)?;

    let mut rss = 0.0;
    for t in order..slice.len() {
        let mut pred = coef[0];
        for lag in 1..=order {
            pred += coef[lag] * (slice[t - lag] - shift);
        }
        let e = (slice[t] - shift) - pred;
        rss += e * e;
    }
    Some(rss)
}

/// Gaussian elimination with partial pivoting on a row-major buffer;
/// rejects pivots below rounding scale.
fn solve_inplace<'a>(a: &mut [f64], b: &'a mut [f64], p: usize, scale: f64) -> Option<&'a [f64]> {
    let tol = scale * 1e-12 + f64::MIN_POSITIVE;
    for k in 0..p {
        let mut piv = k;
        for i in k + 1..p {
            if a[i * p + k].abs() > a[piv * p + k].abs() {
                piv = i;
            }
        }
        if a[piv * p + k].abs() <= tol {
            return None;
        }
        if piv != k {
            for j in 0..p {
                a.swap(k * p + j, piv * p + j);
            }
            b.swap(k, piv);
        }
        for i in k + 1..p {
            let f = a[i * p + k] / a[k * p + k];
            for j in k..p {
                a[i * p + j] -= f * a[k * p + j];
            }
            b[i] -= f * b[k];
        }
    }
    for i in (0..p).rev() {
        let mut acc = b[i];
        for j in i + 1..p {
            acc -= a[i * p + j] * b[j];
        }
        b[i] = acc / a[i * p + i];
    }
    Some(b)
}

/// Configuration for [`binary_segmentation`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsConfig {
    pub order: usize,
    pub m_max: usize,
    /// Minimum admissible segment length; at least `max(10 * order, 3)`.
    pub min_len: usize,
    pub penalty: PenaltySpec,
}

impl BsConfig {
    pub fn new(order: usize, m_max: usize, penalty: PenaltySpec) -> Self {
        Self { order, m_max, min_len: default_bs_min_len(order), penalty }
    }

    fn validate(&self) -> Result<()> {
        if self.m_max == 0 {
            return Err(Error::InvalidConfig("binary segmentation needs m_max >= 1".into()));
        }
        let floor = default_bs_min_len(self.order);
        if self.min_len < floor {
            return Err(Error::InvalidConfig(format!(
                "min_len {} below the floor {floor} for order {}",
                self.min_len, self.order
            )));
        }
        Ok(())
    }
}

/// `max(10 * L, 3)`: keeps the per-side regressions well conditioned.
pub fn default_bs_min_len(order: usize) -> usize {
    (10 * order).max(3)
}

struct SegmentPlan {
    start: usize,
    end: usize,
    /// Best split position and its loss reduction, when any is admissible.
    best: Option<(usize, f64)>,
}

fn scan_segment(data: &[f64], start: usize, end: usize, config: &BsConfig) -> SegmentPlan {
    let seg = &data[start..end];
    let whole = ar_loss(seg, config.order);
    let mut best: Option<(usize, f64)> = None;
    if whole.is_finite() && end - start >= 2 * config.min_len {
        for m in config.min_len..=(end - start - config.min_len) {
            let left = ar_loss(&seg[..m], config.order);
            let right = ar_loss(&seg[m..], config.order);
            if !left.is_finite() || !right.is_finite() {
                continue;
            }
            let gain = whole - left - right;
            let better = match best {
                None => true,
                Some((_, g)) => gain > g,
            };
            if better {
                best = Some((start + m, gain));
            }
        }
    }
    SegmentPlan { start, end, best }
}

/// Recursive bisection: repeatedly split the segment offering the largest
/// AR-loss reduction, stopping when the reduction no longer exceeds the
/// penalty or `m_max` points were placed. Returns sorted boundaries.
pub fn binary_segmentation(series: &TimeSeries, config: &BsConfig) -> Result<Vec<usize>> {
    config.validate()?;
    let data = series.as_univariate()?;
    let n = data.len();
    let variance_scale =
        if config.penalty.rescale_by_variance { series.mean_dim_variance() } else { 1.0 };
    let threshold = config.penalty.value(n, variance_scale)?;

    let mut segments = vec![scan_segment(data, 0, n, config)];
    let mut cps = Vec::new();
    while cps.len() < config.m_max {
        // Best admissible split across all current segments, leftmost on ties.
        let candidate = segments
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.best.map(|(m, g)| (i, m, g)))
            .max_by(|a, b| a.2.total_cmp(&b.2).then(b.1.cmp(&a.1)));
        let Some((idx, split, gain)) = candidate else { break };
        if gain <= threshold {
            break;
        }
        let seg = segments.swap_remove(idx);
        cps.push(split);
        segments.push(scan_segment(data, seg.start, split, config));
        segments.push(scan_segment(data, split, seg.end, config));
    }
    cps.sort_unstable();
    Ok(cps)
}
