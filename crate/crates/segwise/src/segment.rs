//! Quadratic-loss segmentation with penalized selection of the number of
//! change points.
//!
//! For each candidate count `k` the within-segment quadratic loss is
//! minimized either exactly (dynamic programming over segment boundaries)
//! or by ordered-k-means local search. The sweep over `k` stops as soon as
//! an optimal segmentation produces a segment shorter than the minimum
//! segment length, and the count is then chosen by minimizing
//! `loss_k + k * f(N)` with `f(N)` from one of the penalty families.

use crate::error::{Error, Result};
use crate::series::{default_min_segment_len, SeriesStats, TimeSeries};
use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

/// Penalty term family as a function of the series length.
#[derive(Debug, Clone, Copy)]
pub enum PenaltyFamily {
    /// `f(N) = 1` (AIC-like).
    Constant,
    /// `f(N) = log log N` (HQ-like), defined for `N >= 3`.
    LogLog,
    /// `f(N) = log N` (BIC-like).
    Log,
    /// User-supplied base term.
    Custom(fn(usize) -> f64),
}

impl PartialEq for PenaltyFamily {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (PenaltyFamily::Constant, PenaltyFamily::Constant)
            | (PenaltyFamily::LogLog, PenaltyFamily::LogLog)
            | (PenaltyFamily::Log, PenaltyFamily::Log) => true,
            (PenaltyFamily::Custom(a), PenaltyFamily::Custom(b)) => std::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

impl PenaltyFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyFamily::Constant => "constant",
            PenaltyFamily::LogLog => "loglog",
            PenaltyFamily::Log => "log",
            PenaltyFamily::Custom(_) => "custom",
        }
    }
}

impl Serialize for PenaltyFamily {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Penalty specification: `multiplier * family(N)`, optionally rescaled by
/// the sample variance of the data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub multiplier: f64,
    pub rescale_by_variance: bool,
}

impl PenaltySpec {
    /// Builds a penalty with variance rescaling enabled (the experimental
    /// default).
    pub fn new(family: PenaltyFamily, multiplier: f64) -> Result<Self> {
        if !multiplier.is_finite() || multiplier <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "penalty multiplier must be finite and positive, got {multiplier}"
            )));
        }
        Ok(Self { family, multiplier, rescale_by_variance: true })
    }

    pub fn with_rescale(mut self, on: bool) -> Self {
        self.rescale_by_variance = on;
        self
    }

    /// Base term `multiplier * family(n)` without variance rescaling.
    pub fn base(&self, n: usize) -> Result<f64> {
        let term = match self.family {
            PenaltyFamily::Constant => 1.0,
            PenaltyFamily::LogLog => {
                if n < 3 {
                    return Err(Error::InvalidConfig(format!(
                        "log log penalty needs n >= 3, got {n}"
                    )));
                }
                (n as f64).ln().ln()
            }
            PenaltyFamily::Log => (n as f64).ln(),
            PenaltyFamily::Custom(f) => f(n),
        };
        Ok(self.multiplier * term)
    }

    /// Penalty per change point; `variance_scale` is applied only when
    /// rescaling is enabled.
    pub fn value(&self, n: usize, variance_scale: f64) -> Result<f64> {
        let base = self.base(n)?;
        Ok(if self.rescale_by_variance { base * variance_scale } else { base })
    }
}

/// How per-k minimal losses are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EngineKind {
    /// Exact segment-neighborhood dynamic programming.
    Dp,
    /// Ordered-k-means local search with restarts.
    OrderedKMeans,
}

/// Best segmentation found for one candidate count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub change_points: Vec<usize>,
    pub loss: f64,
    /// Whether the smallest segment reaches the minimum segment length.
    pub feasible: bool,
}

/// Per-k optima for `k = 0..=last`, in candidate order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationProfile {
    pub method: EngineKind,
    /// Minimum segment length used for the feasibility flags.
    pub beta: usize,
    pub entries: Vec<ProfileEntry>,
}

impl SegmentationProfile {
    /// Index of the last entry usable as a candidate: the sweep stops at
    /// the first entry whose smallest segment is shorter than `beta`.
    pub fn ceiling(&self) -> usize {
        for (k, e) in self.entries.iter().enumerate() {
            if !e.feasible {
                return k.saturating_sub(1);
            }
        }
        self.entries.len().saturating_sub(1)
    }
}

/// Detection outcome: selected count, its change points, and the per-k
/// losses and penalties that drove the selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    pub m_hat: usize,
    /// Boundary positions, equal to the 1-based last index of each closed
    /// segment.
    pub change_points: Vec<usize>,
    /// Minimal loss per candidate count `k = 0..`.
    pub losses: Vec<f64>,
    /// `k * f(N)` actually used, aligned with `losses`.
    pub penalty_values: Vec<f64>,
    /// Variance factor applied to the penalty (1 when rescaling is off).
    pub variance_scale: f64,
}

/// Minimum-length rule for the shortest admissible segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BetaRule {
    /// `max(2, ceil(log log n))`.
    Auto,
    Fixed(usize),
}

impl BetaRule {
    pub fn resolve(&self, n: usize) -> usize {
        match self {
            BetaRule::Auto => default_min_segment_len(n),
            BetaRule::Fixed(b) => (*b).max(1),
        }
    }
}

/// Configuration for [`detect`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectConfig {
    pub m_max: usize,
    pub penalty: PenaltySpec,
    pub beta: BetaRule,
    pub engine: EngineKind,
    /// Random restarts per candidate count (ordered-k-means only).
    pub restarts: usize,
    pub seed: u64,
    /// Enforce the minimum segment length inside the per-k optimization
    /// instead of only through the sweep stop rule.
    pub constrain_min_len: bool,
    /// Length at which the penalty term is evaluated; defaults to the
    /// input length. The multi-window pipeline selects the penalty once at
    /// the original series length and hands the value to each round.
    pub penalty_n: Option<usize>,
}

impl DetectConfig {
    pub fn new(m_max: usize, penalty: PenaltySpec) -> Self {
        Self {
            m_max,
            penalty,
            beta: BetaRule::Auto,
            engine: EngineKind::Dp,
            restarts: 0,
            seed: 0,
            constrain_min_len: false,
            penalty_n: None,
        }
    }
}

/// Exact minimal-loss placement of `k` change points, honoring a minimum
/// segment length. Ties resolve to the lexicographically smallest list.
pub fn dp_segment(stats: &SeriesStats, k: usize, min_len: usize) -> Result<(Vec<usize>, f64)> {
    let table = DpTable::build(stats, k, min_len.max(1))?;
    table.solution(k).ok_or(Error::Infeasible { k, n: stats.len(), min_len })
}

/// Suffix dynamic program over segment boundaries.
///
/// `cost[s][i]` is the minimal loss of covering rows `[i, n)` with `s`
/// segments; scanning split candidates in increasing order with strict
/// improvement makes forward reconstruction yield the lexicographically
/// smallest optimal change-point list.
struct DpTable {
    n: usize,
    min_len: usize,
    /// Row `s - 1` holds costs for `s` segments.
    cost: Vec<Vec<f64>>,
    /// `back[s - 1][i]` is the first boundary after `i` (s >= 2).
    back: Vec<Vec<u32>>,
}

impl DpTable {
    fn build(stats: &SeriesStats, k_max: usize, min_len: usize) -> Result<Self> {
        let n = stats.len();
        if n == 0 {
            return Err(Error::EmptySeries);
        }
        let segs_max = k_max + 1;
        let mut cost = Vec::with_capacity(segs_max);
        let mut back = Vec::with_capacity(segs_max.saturating_sub(1));

        let mut base = vec![f64::INFINITY; n + 1];
        for (i, cell) in base.iter_mut().enumerate().take(n) {
            if n - i >= min_len {
                *cell = stats.loss_unchecked(i, n);
            }
        }
        cost.push(base);

        for s in 2..=segs_max {
            let prev = &cost[s - 2];
            let mut row = vec![f64::INFINITY; n + 1];
            let mut bp = vec![u32::MAX; n + 1];
            // Row i is only meaningful when [i, n) can hold s segments.
            for i in 0..n {
                if n - i < s * min_len {
                    continue;
                }
                let mut best = f64::INFINITY;
                let mut best_m = u32::MAX;
                let lo = i + min_len;
                let hi = n - (s - 1) * min_len;
                for m in lo..=hi {
                    let c = prev[m];
                    if !c.is_finite() {
                        continue;
                    }
                    let total = stats.loss_unchecked(i, m) + c;
                    if total < best {
                        best = total;
                        best_m = m as u32;
                    }
                }
                row[i] = best;
                bp[i] = best_m;
            }
            cost.push(row);
            back.push(bp);
        }
        Ok(Self { n, min_len, cost, back })
    }

    fn solution(&self, k: usize) -> Option<(Vec<usize>, f64)> {
        let segs = k + 1;
        if segs > self.cost.len() || self.n < segs * self.min_len {
            return None;
        }
        let total = self.cost[segs - 1][0];
        if !total.is_finite() {
            return None;
        }
        let mut cps = Vec::with_capacity(k);
        let mut i = 0usize;
        for s in (2..=segs).rev() {
            let m = self.back[s - 2][i];
            debug_assert_ne!(m, u32::MAX);
            cps.push(m as usize);
            i = m as usize;
        }
        Some((cps, total))
    }
}

/// Ordered-k-means local search: first-improvement sweeps moving one
/// boundary at a time by geometrically growing shifts, accepting a move
/// only when it strictly reduces the total loss.
pub fn ordered_kmeans(
    stats: &SeriesStats,
    k: usize,
    min_len: usize,
    init: &[usize],
    max_iter: usize,
) -> Result<(Vec<usize>, f64)> {
    let n = stats.len();
    let min_len = min_len.max(1);
    if init.len() != k {
        return Err(Error::InvalidChangePoints(format!(
            "initial segmentation has {} points, expected {k}",
            init.len()
        )));
    }
    let mut cps = init.to_vec();
    let mut prev = 0usize;
    for &cp in &cps {
        if cp <= prev || cp >= n {
            return Err(Error::InvalidChangePoints(format!(
                "initial change point {cp} out of order or range"
            )));
        }
        prev = cp;
    }

    for _ in 0..max_iter {
        let mut improved = false;
        for j in 0..k {
            let a = if j == 0 { 0 } else { cps[j - 1] };
            let b = if j + 1 == k { n } else { cps[j + 1] };
            let m = cps[j];
            let mut t = 1usize;
            loop {
                let mut moved = false;
                // Left shift by t, then right shift by t.
                if m > a + t && m - t >= a + min_len && stats.move_improves(a, m, b, m - t) {
                    cps[j] = m - t;
                    moved = true;
                } else if m + t < b
                    && b - (m + t) >= min_len
                    && m + t - a >= min_len
                    && stats.move_improves(a, m, b, m + t)
                {
                    cps[j] = m + t;
                    moved = true;
                }
                if moved {
                    improved = true;
                    break;
                }
                t *= 2;
                if t >= n {
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let mut loss = 0.0;
    let mut start = 0usize;
    for &cp in &cps {
        loss += stats.loss_unchecked(start, cp);
        start = cp;
    }
    loss += stats.loss_unchecked(start, n);
    Ok((cps, loss))
}

/// `k` boundaries splitting `n` rows as evenly as possible.
fn equally_spaced(n: usize, k: usize) -> Vec<usize> {
    (1..=k).map(|j| j * n / (k + 1)).collect()
}

fn random_ordered_boundaries<R: rand::Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut picks: Vec<usize> =
        index_sample(rng, n - 1, k).into_iter().map(|i| i + 1).collect();
    picks.sort_unstable();
    picks
}

fn best_okm(
    stats: &SeriesStats,
    k: usize,
    min_len: usize,
    restarts: usize,
    seed: u64,
    max_iter: usize,
) -> Result<(Vec<usize>, f64)> {
    let n = stats.len();
    if k == 0 {
        return Ok((Vec::new(), stats.loss_unchecked(0, n)));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let consider = |cand: (Vec<usize>, f64), best: &mut Option<(Vec<usize>, f64)>| {
        let better = match best {
            None => true,
            Some((bc, bl)) => cand.1 < *bl || (cand.1 == *bl && cand.0 < *bc),
        };
        if better {
            *best = Some(cand);
        }
    };

    let spaced = equally_spaced(n, k);
    if is_valid_init(&spaced, n) {
        consider(ordered_kmeans(stats, k, min_len, &spaced, max_iter)?, &mut best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..restarts {
        let init = random_ordered_boundaries(n, k, &mut rng);
        consider(ordered_kmeans(stats, k, min_len, &init, max_iter)?, &mut best);
    }
    best.ok_or(Error::Infeasible { k, n, min_len })
}

fn is_valid_init(cps: &[usize], n: usize) -> bool {
    let mut prev = 0;
    for &cp in cps {
        if cp <= prev || cp >= n {
            return false;
        }
        prev = cp;
    }
    true
}

/// Maximum local-search sweeps before giving up on convergence.
const OKM_MAX_ITER: usize = 200;

/// Computes per-k optimal segmentations for `k = 0..=m_max`, stopping right
/// after the first `k` whose optimum violates the minimum segment length.
pub fn build_profile(
    stats: &SeriesStats,
    m_max: usize,
    beta: usize,
    engine: EngineKind,
    constrain_min_len: bool,
    restarts: usize,
    seed: u64,
) -> Result<SegmentationProfile> {
    let n = stats.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    let beta = beta.max(1);
    let k_cap = m_max.min(n.saturating_sub(1));
    let min_len = if constrain_min_len { beta } else { 1 };

    let dp = match engine {
        EngineKind::Dp => Some(DpTable::build(stats, k_cap, min_len)?),
        EngineKind::OrderedKMeans => None,
    };

    let mut entries = Vec::with_capacity(k_cap + 1);
    for k in 0..=k_cap {
        let solved = match (&dp, engine) {
            (Some(table), _) => table.solution(k),
            (None, _) => match best_okm(stats, k, min_len, restarts, seed, OKM_MAX_ITER) {
                Ok(sol) => Some(sol),
                Err(Error::Infeasible { .. }) => None,
                Err(e) => return Err(e),
            },
        };
        let Some((cps, loss)) = solved else {
            // Infeasible under the constrained engine: treat like a
            // minimum-length violation and stop the sweep.
            entries.push(ProfileEntry { change_points: Vec::new(), loss: f64::INFINITY, feasible: false });
            break;
        };
        let feasible = min_segment(&cps, n) >= beta;
        entries.push(ProfileEntry { change_points: cps, loss, feasible });
        if !entries.last().unwrap().feasible {
            break;
        }
    }
    Ok(SegmentationProfile { method: engine, beta, entries })
}

fn min_segment(cps: &[usize], n: usize) -> usize {
    let mut prev = 0usize;
    let mut min = usize::MAX;
    for &cp in cps {
        min = min.min(cp - prev);
        prev = cp;
    }
    min.min(n - prev)
}

/// Full detection: per-k losses, sweep stop at the minimum-length rule, and
/// penalized choice of the count (ties to the smallest `k`).
pub fn detect(series: &TimeSeries, config: &DetectConfig) -> Result<DetectionResult> {
    let stats = SeriesStats::new(series);
    detect_with_stats(series, &stats, config)
}

/// As [`detect`] for callers that already hold prefix statistics.
pub fn detect_with_stats(
    series: &TimeSeries,
    stats: &SeriesStats,
    config: &DetectConfig,
) -> Result<DetectionResult> {
    if stats.len() != series.len() || stats.dim() != series.dim() {
        return Err(Error::InvalidConfig(
            "prefix statistics do not match the series".into(),
        ));
    }
    let n = series.len();
    let beta = config.beta.resolve(n);
    let variance_scale =
        if config.penalty.rescale_by_variance { series.mean_dim_variance() } else { 1.0 };
    let f_scaled = config.penalty.value(config.penalty_n.unwrap_or(n), variance_scale)?;

    let profile = build_profile(
        stats,
        config.m_max,
        beta,
        config.engine,
        config.constrain_min_len,
        config.restarts,
        config.seed,
    )?;
    let ceiling = profile.ceiling();

    let mut losses = Vec::with_capacity(ceiling + 1);
    let mut penalties = Vec::with_capacity(ceiling + 1);
    let mut m_hat = 0usize;
    let mut best_score = f64::INFINITY;
    for (k, entry) in profile.entries.iter().enumerate().take(ceiling + 1) {
        let penalty = k as f64 * f_scaled;
        let score = entry.loss + penalty;
        losses.push(entry.loss);
        penalties.push(penalty);
        if score < best_score {
            best_score = score;
            m_hat = k;
        }
    }
    let change_points = profile.entries[m_hat].change_points.clone();
    Ok(DetectionResult { m_hat, change_points, losses, penalty_values: penalties, variance_scale })
}

impl DetectionResult {
    /// Selected penalized score `loss + k * f(N)`.
    pub fn score(&self) -> f64 {
        self.losses[self.m_hat] + self.penalty_values[self.m_hat]
    }
}
