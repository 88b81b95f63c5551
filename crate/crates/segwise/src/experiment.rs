//! Monte Carlo experiment harness: detection-frequency studies and runtime
//! benchmarks over the detector families.
//!
//! Every repetition draws its generator from a seed derived from the master
//! seed and the repetition index, so reports are reproducible and
//! independent of execution order. Statistical repetitions may run in
//! parallel; timing runs are always sequential.

use crate::ar::{sample_stable_filter, ArFilter, Estimator};
use crate::baseline::{binary_segmentation, BsConfig};
use crate::error::{Error, Result};
use crate::multi_window::{self, WindowPlan};
use crate::segment::{self, DetectConfig, PenaltySpec};
use crate::series::TimeSeries;
use crate::synth::{derive_seed, gen_iid_means, gen_segmentwise_ar, ArSpec, MeanSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Data-generating process of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GeneratorSpec {
    /// Independent Gaussians with segment-wise means.
    IidMeans(MeanSpec),
    /// Segment-wise autoregression with fixed filters.
    SegmentwiseAr(ArSpec),
    /// Segment-wise autoregression with fresh stable filters every rep.
    RandomStableAr { fractions: Vec<f64>, order: usize, noise_sd: f64 },
}

impl GeneratorSpec {
    fn generate(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<(TimeSeries, Vec<usize>)> {
        match self {
            GeneratorSpec::IidMeans(spec) => gen_iid_means(n, spec, rng),
            GeneratorSpec::SegmentwiseAr(spec) => gen_segmentwise_ar(n, spec, rng),
            GeneratorSpec::RandomStableAr { fractions, order, noise_sd } => {
                let filters: Result<Vec<ArFilter>> = (0..fractions.len() + 1)
                    .map(|_| sample_stable_filter(*order, rng))
                    .collect();
                let spec =
                    ArSpec { fractions: fractions.clone(), filters: filters?, noise_sd: *noise_sd };
                gen_segmentwise_ar(n, &spec, rng)
            }
        }
    }

    fn true_count(&self) -> usize {
        match self {
            GeneratorSpec::IidMeans(spec) => spec.fractions.len(),
            GeneratorSpec::SegmentwiseAr(spec) => spec.fractions.len(),
            GeneratorSpec::RandomStableAr { fractions, .. } => fractions.len(),
        }
    }
}

/// Window list given to the multi-window detector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WindowChoice {
    Explicit(Vec<usize>),
    /// `n/10, n/20, n/50, n/100`, filtered to usable sizes.
    Auto,
}

/// Detection method under test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MethodSpec {
    /// Penalized quadratic-loss segmentation on the raw series.
    Quad(DetectConfig),
    /// Multi-window AR-feature detector.
    MultiWindow {
        windows: WindowChoice,
        tau: usize,
        m_max: usize,
        penalty: PenaltySpec,
        order: usize,
        estimator: Estimator,
    },
    /// Binary segmentation with AR loss.
    BinSeg(BsConfig),
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Quad(_) => "quad",
            MethodSpec::MultiWindow { .. } => "mw",
            MethodSpec::BinSeg(_) => "bs",
        }
    }

    /// Smallest window of the resolved plan, when the method has windows.
    fn smallest_window(&self, n: usize) -> Option<usize> {
        match self {
            MethodSpec::MultiWindow { windows, order, .. } => match windows {
                WindowChoice::Explicit(ws) => ws.last().copied(),
                WindowChoice::Auto => WindowPlan::auto_windows(n, *order).last().copied(),
            },
            _ => None,
        }
    }

    fn run(&self, series: &TimeSeries) -> Result<Outcome> {
        match self {
            MethodSpec::Quad(config) => {
                let result = segment::detect(series, config)?;
                Ok(Outcome::Points(result.change_points))
            }
            MethodSpec::MultiWindow { windows, tau, m_max, penalty, order, estimator } => {
                let ws = match windows {
                    WindowChoice::Explicit(ws) => ws.clone(),
                    WindowChoice::Auto => WindowPlan::auto_windows(series.len(), *order),
                };
                if ws.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "no usable windows for series of length {}",
                        series.len()
                    )));
                }
                let mut plan = WindowPlan::new(ws, *order, penalty.clone());
                plan.tau = *tau;
                plan.m_max = *m_max;
                plan.estimator = *estimator;
                let out = multi_window::detect(series, &plan)?;
                Ok(Outcome::Ranges(out.peaks.ranges))
            }
            MethodSpec::BinSeg(config) => {
                Ok(Outcome::Points(binary_segmentation(series, config)?))
            }
        }
    }
}

enum Outcome {
    Points(Vec<usize>),
    Ranges(Vec<(usize, usize)>),
}

impl Outcome {
    fn count(&self) -> usize {
        match self {
            Outcome::Points(p) => p.len(),
            Outcome::Ranges(r) => r.len(),
        }
    }

    /// A true point counts as hit when a sufficiently narrow range covers
    /// it (at most twice the smallest window), or a detected point lands
    /// within the tolerance.
    fn hits(&self, cp: usize, range_width_cap: usize, point_tol: usize) -> bool {
        match self {
            Outcome::Points(points) => points.iter().any(|&p| p.abs_diff(cp) <= point_tol),
            Outcome::Ranges(ranges) => ranges
                .iter()
                .any(|&(lo, hi)| hi - lo < range_width_cap && lo <= cp && cp <= hi),
        }
    }
}

/// One Monte Carlo study: a generator, a method, and the lengths to sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub method: MethodSpec,
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
}

/// Aggregates for one series length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerNStats {
    pub n: usize,
    /// Percentage of repetitions detecting fewer points than true.
    pub f_under: f64,
    pub f_exact: f64,
    pub f_over: f64,
    pub mean_count: f64,
    pub sd_count: f64,
    /// Fraction of true change points detected, averaged over repetitions.
    pub hit_rate: f64,
    /// Median wall-clock per repetition. Measured, not deterministic.
    pub median_ms: f64,
}

/// Study report; everything except `median_ms` is reproducible bit for bit
/// from the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config_echo: ExperimentConfig,
    pub per_n: Vec<PerNStats>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialization cannot fail")
    }

    /// Clears measured timings, leaving only the deterministic fields.
    pub fn strip_timing(&mut self) {
        for row in &mut self.per_n {
            row.median_ms = 0.0;
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

struct RepResult {
    count: usize,
    hits: usize,
    elapsed_ms: f64,
}

fn run_rep(config: &ExperimentConfig, n: usize, n_idx: usize, rep: usize) -> Result<RepResult> {
    let stream = (n_idx as u64) << 32 | rep as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, stream));
    let (series, true_cps) = config.generator.generate(n, &mut rng)?;
    let start = Instant::now();
    let outcome = config.method.run(&series)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let w_last = config.method.smallest_window(n);
    let range_cap = w_last.map_or(usize::MAX, |w| 2 * w);
    let point_tol = w_last.unwrap_or_else(|| (n / 100).max(1));
    let hits = true_cps.iter().filter(|&&cp| outcome.hits(cp, range_cap, point_tol)).count();
    Ok(RepResult { count: outcome.count(), hits, elapsed_ms })
}

/// Runs the full study; repetitions execute in parallel with per-rep seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.reps == 0 {
        return Err(Error::InvalidConfig("experiment needs at least one repetition".into()));
    }
    let true_count = config.generator.true_count();
    let mut per_n = Vec::with_capacity(config.n_values.len());
    for (n_idx, &n) in config.n_values.iter().enumerate() {
        let reps: Result<Vec<RepResult>> = (0..config.reps)
            .into_par_iter()
            .map(|rep| run_rep(config, n, n_idx, rep))
            .collect();
        let reps = reps?;
        let total = reps.len() as f64;
        let mut under = 0usize;
        let mut exact = 0usize;
        let mut over = 0usize;
        let mut hits = 0usize;
        let mut times: Vec<f64> = Vec::with_capacity(reps.len());
        let mut mean = 0.0;
        for r in &reps {
            match r.count.cmp(&true_count) {
                std::cmp::Ordering::Less => under += 1,
                std::cmp::Ordering::Equal => exact += 1,
                std::cmp::Ordering::Greater => over += 1,
            }
            hits += r.hits;
            times.push(r.elapsed_ms);
            mean += r.count as f64;
        }
        mean /= total;
        let var = if reps.len() > 1 {
            reps.iter().map(|r| (r.count as f64 - mean).powi(2)).sum::<f64>() / (total - 1.0)
        } else {
            0.0
        };
        per_n.push(PerNStats {
            n,
            f_under: 100.0 * under as f64 / total,
            f_exact: 100.0 * exact as f64 / total,
            f_over: 100.0 * over as f64 / total,
            mean_count: mean,
            sd_count: var.sqrt(),
            hit_rate: if true_count == 0 {
                1.0
            } else {
                hits as f64 / (total * true_count as f64)
            },
            median_ms: median(&mut times),
        });
    }
    Ok(ExperimentReport { config_echo: config.clone(), per_n })
}

/// One timing row of [`benchmark_runtime`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub method: String,
    pub n: usize,
    pub median_ms: f64,
    pub reps: usize,
}

/// Fitted log-log slope of runtime against length for one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub method: String,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub slopes: Vec<SlopeFit>,
}

impl TimingReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialization cannot fail")
    }

    pub fn median_ms(&self, method: &str, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method && r.n == n).map(|r| r.median_ms)
    }

    pub fn slope(&self, method: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.method == method).map(|s| s.slope)
    }
}

/// Times every method on every length: one discarded warm-up run, then
/// `reps` sequential timed runs on freshly generated data (the same data
/// per repetition across methods), reporting medians and fitted log-log
/// slopes.
pub fn benchmark_runtime(
    generator: &GeneratorSpec,
    methods: &[MethodSpec],
    n_values: &[usize],
    reps: usize,
    master_seed: u64,
) -> Result<TimingReport> {
    if reps == 0 || n_values.is_empty() || methods.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs methods, lengths and reps".into()));
    }
    let mut rows = Vec::new();
    for method in methods {
        for (n_idx, &n) in n_values.iter().enumerate() {
            let mut times = Vec::with_capacity(reps);
            for rep in 0..=reps {
                let stream = (n_idx as u64) << 32 | rep as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, stream));
                let (series, _) = generator.generate(n, &mut rng)?;
                let start = Instant::now();
                let outcome = method.run(&series)?;
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                std::hint::black_box(outcome.count());
                if rep > 0 {
                    // First run is warm-up.
                    times.push(elapsed);
                }
            }
            rows.push(TimingRow {
                method: method.name().to_string(),
                n,
                median_ms: median(&mut times),
                reps,
            });
        }
    }
    let mut slopes = Vec::new();
    for method in methods {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.method == method.name() && r.median_ms > 0.0)
            .map(|r| ((r.n as f64).ln(), r.median_ms.ln()))
            .collect();
        if pts.len() >= 2 {
            slopes.push(SlopeFit { method: method.name().to_string(), slope: ls_slope(&pts) });
        }
    }
    Ok(TimingReport { rows, slopes })
}

fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Configures the global thread pool from a thread-cap environment
/// variable value (0 or unset means automatic). Returns the cap applied.
pub fn configure_threads(cap: Option<usize>) -> Option<usize> {
    match cap {
        Some(t) if t > 0 => {
            // Ignore failure: the pool can only be built once per process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            Some(t)
        }
        _ => None,
    }
}
