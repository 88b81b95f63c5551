//! Multi-window change detection for autoregressive time series.
//!
//! Each round fits AR filters on disjoint windows of one size, detects
//! change points in the resulting coefficient sequence, and votes for the
//! index interval each detection maps back to. Votes accumulate across
//! rounds from the largest window to the smallest; peak ranges of the
//! final score profile are the detected change-point ranges.

use crate::ar::{window_features, Estimator};
use crate::error::{Error, Result};
use crate::segment::{detect_with_stats, BetaRule, DetectConfig, EngineKind, PenaltySpec};
use crate::series::{SeriesStats, TimeSeries};
use serde::Serialize;

/// Inputs of one multi-window run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowPlan {
    /// Strictly decreasing window sizes, each larger than twice the order.
    pub windows: Vec<usize>,
    /// Score tolerance: ranges within `tau` of the peak score qualify.
    pub tau: usize,
    /// Largest candidate number of change points, also the cap on ranges.
    pub m_max: usize,
    /// Penalty handed to the per-round detection on filter features.
    pub penalty: PenaltySpec,
    /// Minimum-segment rule for the per-round detection, resolved at the
    /// feature-sequence length.
    pub beta: BetaRule,
    /// AR order of the windowed fits.
    pub order: usize,
    pub estimator: Estimator,
}

impl WindowPlan {
    pub fn new(windows: Vec<usize>, order: usize, penalty: PenaltySpec) -> Self {
        Self {
            windows,
            tau: 1,
            m_max: 5,
            penalty,
            beta: BetaRule::Auto,
            order,
            estimator: Estimator::LeastSquares,
        }
    }

    /// Default window ladder `n/10, n/20, n/50, n/100`, floored, deduplicated
    /// and filtered to sizes usable at order `order`.
    pub fn auto_windows(n: usize, order: usize) -> Vec<usize> {
        let mut ws: Vec<usize> = [10, 20, 50, 100]
            .iter()
            .map(|f| n / f)
            .filter(|&w| w > 2 * order && n / w >= 2)
            .collect();
        ws.dedup();
        ws
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::InvalidConfig("window plan needs at least one window".into()));
        }
        if !self.windows.windows(2).all(|p| p[0] > p[1]) {
            return Err(Error::InvalidConfig("window sizes must be strictly decreasing".into()));
        }
        for &w in &self.windows {
            if w <= 2 * self.order {
                return Err(Error::InvalidConfig(format!(
                    "window {w} must exceed twice the order {}",
                    self.order
                )));
            }
        }
        if self.m_max == 0 {
            return Err(Error::InvalidConfig("m_max must be at least 1".into()));
        }
        if n < self.windows[0] {
            return Err(Error::InvalidConfig(format!(
                "series of length {n} is shorter than the largest window {}",
                self.windows[0]
            )));
        }
        Ok(())
    }
}

/// Cumulative per-index scores after each executed round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreBoard {
    n: usize,
    rounds: Vec<Vec<u32>>,
}

impl ScoreBoard {
    pub fn new(n: usize) -> Self {
        Self { n, rounds: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of rounds recorded so far.
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// Cumulative scores after round `r` (0-based); index `i` scores the
    /// 1-based series position `i + 1`.
    pub fn round(&self, r: usize) -> &[u32] {
        &self.rounds[r]
    }

    pub fn final_scores(&self) -> Option<&[u32]> {
        self.rounds.last().map(Vec::as_slice)
    }

    pub fn max_score(&self) -> u32 {
        self.final_scores().map_or(0, |s| s.iter().copied().max().unwrap_or(0))
    }

    /// Adds one round: each detected feature-scale boundary `l` votes for
    /// series positions `(l - 1) * w + 1 ..= (l + 1) * w` (1-based, clipped),
    /// and overlapping votes within the round count once.
    pub fn add_round(&mut self, detected: &[usize], w: usize) {
        let mut mask = vec![false; self.n];
        for &l in detected {
            let lo = (l.saturating_sub(1)) * w; // 0-based inclusive
            let hi = ((l + 1) * w).min(self.n); // 0-based exclusive
            for flag in &mut mask[lo..hi] {
                *flag = true;
            }
        }
        let mut next = match self.rounds.last() {
            Some(prev) => prev.clone(),
            None => vec![0; self.n],
        };
        for (score, hit) in next.iter_mut().zip(&mask) {
            if *hit {
                *score += 1;
            }
        }
        self.rounds.push(next);
    }
}

/// Disjoint ordered closed ranges `[lo, hi]` (1-based) with peak scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakRanges {
    pub ranges: Vec<(usize, usize)>,
    /// Score threshold the ranges were cut at (never below 1).
    pub threshold: u32,
    /// Set when no round produced at most `m_max` ranges and the result was
    /// truncated to the highest-scoring ones.
    pub truncated: bool,
    /// True when the peak score exceeds the tolerance; when false the
    /// nominal cut `S - tau` is vacuous and the ranges only reflect
    /// unreplicated single-round votes.
    pub confident: bool,
}

impl PeakRanges {
    pub fn count(&self) -> usize {
        self.ranges.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.ranges.iter().any(|&(lo, hi)| lo <= index && index <= hi)
    }
}

/// Per-round diagnostics of a multi-window run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub window: usize,
    /// Number of windowed filters the round produced (0 when skipped).
    pub feature_len: usize,
    /// Detected boundaries at feature scale.
    pub change_points: Vec<usize>,
    /// Rounds whose window leaves fewer than two features are skipped.
    pub skipped: bool,
}

/// Result of [`detect`]: selected peak ranges plus the full score board.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MwDetection {
    pub peaks: PeakRanges,
    pub board: ScoreBoard,
    pub rounds: Vec<RoundOutcome>,
}

/// Runs the multi-window pipeline on a one-dimensional series.
pub fn detect(series: &TimeSeries, plan: &WindowPlan) -> Result<MwDetection> {
    let data = series.as_univariate()?;
    let n = data.len();
    plan.validate(n)?;

    let mut board = ScoreBoard::new(n);
    let mut rounds = Vec::with_capacity(plan.windows.len());
    for &w in &plan.windows {
        if n / w < 2 {
            rounds.push(RoundOutcome {
                window: w,
                feature_len: n / w,
                change_points: Vec::new(),
                skipped: true,
            });
            continue;
        }
        let features = window_features(series, w, plan.order, plan.estimator)?;
        let feature_series = features.feature_series()?;
        let stats = SeriesStats::new(&feature_series);
        let config = DetectConfig {
            m_max: plan.m_max,
            penalty: plan.penalty.clone(),
            beta: plan.beta,
            engine: EngineKind::Dp,
            restarts: 0,
            seed: 0,
            constrain_min_len: false,
            // The penalty term is selected once at the original length;
            // each round receives its value, rescaled by the variance of
            // the features it actually segments.
            penalty_n: Some(n),
        };
        let inner = detect_with_stats(&feature_series, &stats, &config)?;
        board.add_round(&inner.change_points, w);
        rounds.push(RoundOutcome {
            window: w,
            feature_len: feature_series.len(),
            change_points: inner.change_points,
            skipped: false,
        });
    }
    if board.round_count() == 0 {
        return Err(Error::InvalidConfig(
            "every window was skipped; series too short for the plan".into(),
        ));
    }
    let peaks = select_peaks(&board, plan.tau, plan.m_max);
    Ok(MwDetection { peaks, board, rounds })
}

/// Selects the peak ranges: maximal runs of indices whose score stays
/// within `tau` of the final peak score.
///
/// Scanning goes backward from the last round: earlier rounds exclude the
/// votes of the smallest (least reliable) windows, so the first round from
/// the back with at most `m_max` nonempty runs wins. If no round
/// qualifies, the `m_max` highest-scoring runs of the final round are
/// returned with `truncated` set. A board with no votes yields no ranges.
pub fn select_peaks(board: &ScoreBoard, tau: usize, m_max: usize) -> PeakRanges {
    let peak = board.max_score();
    let confident = peak as i64 - tau as i64 > 0;
    if peak == 0 {
        return PeakRanges { ranges: Vec::new(), threshold: 0, truncated: false, confident };
    }
    // A peak range must contain at least one vote.
    let threshold = (peak as i64 - tau as i64).max(1) as u32;
    for r in (0..board.round_count()).rev() {
        let runs = threshold_runs(board.round(r), threshold);
        if !runs.is_empty() && runs.len() <= m_max {
            return PeakRanges { ranges: runs, threshold, truncated: false, confident };
        }
    }
    // Exhausted every round: keep the strongest final-round runs.
    let scores = board.final_scores().unwrap();
    let runs = threshold_runs(scores, threshold);
    let mut scored: Vec<((usize, usize), (u32, usize))> = runs
        .into_iter()
        .map(|(lo, hi)| {
            let max = scores[lo - 1..hi].iter().copied().max().unwrap_or(0);
            ((lo, hi), (max, hi - lo + 1))
        })
        .collect();
    // Highest score first, then wider, then leftmost.
    scored.sort_by(|a, b| {
        b.1 .0.cmp(&a.1 .0).then(b.1 .1.cmp(&a.1 .1)).then(a.0 .0.cmp(&b.0 .0))
    });
    scored.truncate(m_max);
    let mut ranges: Vec<(usize, usize)> = scored.into_iter().map(|(r, _)| r).collect();
    ranges.sort_unstable();
    PeakRanges { ranges, threshold, truncated: true, confident }
}

/// Maximal runs of consecutive indices with score at or above `threshold`,
/// as 1-based closed ranges.
fn threshold_runs(scores: &[u32], threshold: u32) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s >= threshold {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(a) = start.take() {
            runs.push((a + 1, i));
        }
    }
    if let Some(a) = start {
        runs.push((a + 1, scores.len()));
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::{simulate_ar, ArFilter};
    use crate::segment::PenaltyFamily;
    use crate::synth::{gen_segmentwise_ar, ArSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn board_from(rounds: Vec<Vec<u32>>) -> ScoreBoard {
        let n = rounds[0].len();
        let mut b = ScoreBoard::new(n);
        b.rounds = rounds;
        b
    }

    #[test]
    fn score_round_empty_detection_keeps_scores() {
        let mut b = ScoreBoard::new(10);
        b.add_round(&[3], 2);
        let before = b.final_scores().unwrap().to_vec();
        b.add_round(&[], 1);
        assert_eq!(b.final_scores().unwrap(), &before[..]);
    }

    #[test]
    fn score_round_interval_mapping() {
        let mut b = ScoreBoard::new(1000);
        b.add_round(&[5], 100);
        let s = b.final_scores().unwrap();
        // 1-based positions 401..=600 get the vote.
        assert!(s[..400].iter().all(|&v| v == 0));
        assert!(s[400..600].iter().all(|&v| v == 1));
        assert!(s[600..].iter().all(|&v| v == 0));
    }

    #[test]
    fn score_round_overlap_counts_once() {
        let mut b = ScoreBoard::new(1000);
        b.add_round(&[5, 6], 100);
        let s = b.final_scores().unwrap();
        // Union of 401..=600 and 501..=700: the overlap stays at one.
        assert!(s[400..700].iter().all(|&v| v == 1));
        assert_eq!(s[399], 0);
        assert_eq!(s[700], 0);
        assert_eq!(b.max_score(), 1);
    }

    #[test]
    fn score_bounds_hold_per_round() {
        let mut b = ScoreBoard::new(50);
        b.add_round(&[2], 5);
        b.add_round(&[2, 7], 4);
        b.add_round(&[], 3);
        for (r, scores) in b.rounds.iter().enumerate() {
            for &s in scores {
                assert!(s <= (r + 1) as u32);
            }
        }
        for r in 1..b.round_count() {
            for i in 0..b.len() {
                let d = b.round(r)[i] - b.round(r - 1)[i];
                assert!(d <= 1);
            }
        }
    }

    #[test]
    fn select_peaks_single_plateau() {
        let b = board_from(vec![vec![0, 1, 1, 1, 0, 0]]);
        let p = select_peaks(&b, 0, 5);
        assert_eq!(p.ranges, vec![(2, 4)]);
        assert!(!p.truncated);
    }

    #[test]
    fn select_peaks_two_maxima_at_zero_tolerance() {
        let b = board_from(vec![
            vec![1, 1, 0, 0, 0, 1, 1, 0],
            vec![2, 2, 1, 0, 0, 2, 2, 0],
        ]);
        let p = select_peaks(&b, 0, 5);
        assert_eq!(p.ranges, vec![(1, 2), (6, 7)]);
        assert_eq!(p.threshold, 2);
    }

    #[test]
    fn select_peaks_backward_pruning() {
        // Final round fragments into four runs; the previous round has two.
        let b = board_from(vec![
            vec![0, 2, 2, 2, 0, 0, 2, 2, 2, 0],
            vec![0, 3, 2, 3, 0, 0, 3, 2, 3, 0],
        ]);
        let p = select_peaks(&b, 0, 2);
        // Threshold 3 gives 4 runs in the last round, 0 in the first round
        // (its scores top out at 2), so truncation keeps the two best.
        assert!(p.truncated);
        assert_eq!(p.ranges.len(), 2);

        let p2 = select_peaks(&b, 1, 2);
        // Threshold 2: last round has 2 runs -> accepted untruncated.
        assert!(!p2.truncated);
        assert_eq!(p2.ranges, vec![(2, 4), (7, 9)]);
    }

    #[test]
    fn select_peaks_prunes_to_earlier_round() {
        // tau = 1, peak 2, threshold 1: round 2 has three runs, round 1 one.
        let b = board_from(vec![
            vec![1, 1, 1, 1, 1, 1, 1, 0, 0, 0],
            vec![1, 2, 1, 0, 1, 2, 1, 0, 1, 1],
        ]);
        let p = select_peaks(&b, 1, 2);
        assert_eq!(p.ranges, vec![(1, 7)]);
        assert!(!p.truncated);
    }

    #[test]
    fn select_peaks_empty_board() {
        let b = board_from(vec![vec![0; 12]]);
        let p = select_peaks(&b, 2, 3);
        assert!(p.ranges.is_empty());
        assert!(!p.truncated);
    }

    fn three_regime_series(n: usize, seed: u64) -> (TimeSeries, Vec<usize>) {
        let spec = ArSpec {
            fractions: vec![0.1, 0.3],
            filters: vec![
                ArFilter::from_lags(&[0.8, -0.3]).unwrap(),
                ArFilter::from_lags(&[-0.5, 0.1]).unwrap(),
                ArFilter::from_lags(&[0.5, -0.5]).unwrap(),
            ],
            noise_sd: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gen_segmentwise_ar(n, &spec, &mut rng).unwrap()
    }

    #[test]
    fn detect_three_regime_ar() {
        let (series, cps) = three_regime_series(1000, 7);
        assert_eq!(cps, vec![100, 300]);
        let penalty = PenaltySpec::new(PenaltyFamily::Log, 1.0).unwrap();
        let mut plan = WindowPlan::new(vec![100, 50, 20, 10], 2, penalty);
        plan.tau = 1;
        plan.m_max = 5;
        let out = detect(&series, &plan).unwrap();
        assert!(out.peaks.count() >= 1 && out.peaks.count() <= 5);
        assert!(out.peaks.confident);
        assert!(out.peaks.contains(100), "ranges {:?} miss 100", out.peaks.ranges);
        assert!(out.peaks.contains(300), "ranges {:?} miss 300", out.peaks.ranges);
    }

    #[test]
    fn detect_single_regime_mostly_unconfident() {
        // Homogeneous data: isolated rounds may still vote, but the votes
        // should rarely replicate across rounds beyond the tolerance.
        let filter = ArFilter::from_lags(&[0.6, -0.2]).unwrap();
        let penalty = PenaltySpec::new(PenaltyFamily::Log, 1.0).unwrap();
        let mut quiet = 0;
        let reps = 20;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let series = simulate_ar(&filter, 1.0, 1000, 600, &mut rng).unwrap();
            let mut plan = WindowPlan::new(vec![100, 50, 20, 10], 2, penalty.clone());
            plan.tau = 2;
            let out = detect(&series, &plan).unwrap();
            if out.peaks.count() == 0 || !out.peaks.confident {
                quiet += 1;
            }
        }
        assert!(quiet >= 15, "only {quiet}/{reps} single-regime runs were quiet");
    }

    #[test]
    fn detect_mean_shift_with_order_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 600;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let mean = if i < 200 { 0.0 } else if i < 400 { 3.0 } else { -2.0 };
            values.push(mean + rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal));
        }
        let series = TimeSeries::univariate(values).unwrap();
        let penalty = PenaltySpec::new(PenaltyFamily::Log, 2.0).unwrap();
        let mut plan = WindowPlan::new(vec![60, 30, 10], 0, penalty);
        plan.tau = 1;
        let out = detect(&series, &plan).unwrap();
        let w_last = 10;
        for cp in [200usize, 400] {
            let hit = out
                .peaks
                .ranges
                .iter()
                .any(|&(lo, hi)| (lo.saturating_sub(w_last)) <= cp && cp <= hi + w_last);
            assert!(hit, "ranges {:?} miss {cp} within {w_last}", out.peaks.ranges);
        }
    }

    #[test]
    fn reduction_to_plain_detection_at_unit_window() {
        // Order 0, window 1, one round: the per-round detection sees the
        // raw series, so its boundaries must match plain detection.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 120;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let mean = if i < 60 { 0.0 } else { 4.0 };
            values.push(mean + rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal));
        }
        let series = TimeSeries::univariate(values).unwrap();
        let penalty = PenaltySpec::new(PenaltyFamily::Log, 2.0).unwrap();
        let mut plan = WindowPlan::new(vec![1], 0, penalty.clone());
        plan.tau = 0;
        plan.m_max = 4;
        let out = detect(&series, &plan).unwrap();

        let config = DetectConfig::new(4, penalty);
        let direct = crate::segment::detect(&series, &config).unwrap();
        assert_eq!(out.rounds[0].change_points, direct.change_points);
    }

    #[test]
    fn skips_oversized_windows() {
        let filter = ArFilter::from_lags(&[0.4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let series = simulate_ar(&filter, 1.0, 100, 100, &mut rng).unwrap();
        let penalty = PenaltySpec::new(PenaltyFamily::Log, 1.0).unwrap();
        // 60 leaves one feature only -> skipped; 20 and 10 run.
        let plan = WindowPlan::new(vec![60, 20, 10], 1, penalty);
        let out = detect(&series, &plan).unwrap();
        assert!(out.rounds[0].skipped);
        assert!(!out.rounds[1].skipped);
        assert_eq!(out.board.round_count(), 2);
    }

    #[test]
    fn plan_validation() {
        let penalty = PenaltySpec::new(PenaltyFamily::Log, 1.0).unwrap();
        let series = TimeSeries::univariate(vec![0.0; 50]).unwrap();
        let plan = WindowPlan::new(vec![10, 20], 1, penalty.clone());
        assert!(detect(&series, &plan).is_err());
        let plan = WindowPlan::new(vec![4], 2, penalty.clone());
        assert!(detect(&series, &plan).is_err());
        let plan = WindowPlan::new(vec![80, 10], 1, penalty);
        assert!(detect(&series, &plan).is_err());
    }

    #[test]
    fn peak_ranges_valid_on_random_boards() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.random_range(5..=200);
            let rounds = rng.random_range(1..=5);
            let mut board = ScoreBoard::new(n);
            for _ in 0..rounds {
                let w = rng.random_range(1..=(n / 2).max(1));
                let count = rng.random_range(0..=3);
                let max_feature = (n / w).max(2) - 1;
                let mut detected: Vec<usize> =
                    (0..count).map(|_| rng.random_range(1..=max_feature.max(1))).collect();
                detected.sort_unstable();
                detected.dedup();
                board.add_round(&detected, w);
            }
            let tau = rng.random_range(0..=2);
            let m_max = rng.random_range(1..=4);
            let peaks = select_peaks(&board, tau, m_max);
            assert!(peaks.count() <= m_max);
            let mut prev_end = 0usize;
            let final_scores = board.final_scores().unwrap();
            for &(lo, hi) in &peaks.ranges {
                assert!(lo >= 1 && hi <= n && lo <= hi);
                assert!(lo > prev_end, "ranges overlap or out of order");
                prev_end = hi;
            }
            if !peaks.truncated && peaks.count() > 0 {
                // Non-truncated results come from some round r; the final
                // round dominates all earlier rounds pointwise, so every
                // selected index clears the threshold there too.
                for &(lo, hi) in &peaks.ranges {
                    for i in lo..=hi {
                        assert!(final_scores[i - 1] >= peaks.threshold);
                    }
                }
            }
        }
    }

    #[test]
    fn auto_windows_ladder() {
        assert_eq!(WindowPlan::auto_windows(1000, 2), vec![100, 50, 20, 10]);
        // Small n: 100-divisor window would fall at or below 2L.
        assert_eq!(WindowPlan::auto_windows(200, 2), vec![20, 10]);
        assert_eq!(WindowPlan::auto_windows(40, 2), Vec::<usize>::new());
    }
}
