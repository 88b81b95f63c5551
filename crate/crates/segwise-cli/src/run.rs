//! Command dispatch: parse, validate, call the library, emit the artifact.

use crate::args::*;
use crate::ingest::{ingest_csv, ColumnSelection};
use crate::output::{csv_table, envelope, render, write_output};
use crate::{CliError, CliResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use segwise::ar::{pacf, ArFilter, Estimator};
use segwise::baseline::{binary_segmentation, BsConfig};
use segwise::experiment::{
    benchmark_runtime, run_experiment, ExperimentConfig, GeneratorSpec, MethodSpec, WindowChoice,
};
use segwise::multi_window::{detect as mw_detect, WindowPlan};
use segwise::segment::{
    detect, BetaRule, DetectConfig, EngineKind, PenaltyFamily, PenaltySpec,
};
use segwise::synth::{gen_iid_means, gen_segmentwise_ar, ArSpec, MeanSpec};
use segwise::TimeSeries;
use serde_json::json;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Mw(args) => cmd_mw(args),
        Command::Bs(args) => cmd_bs(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Pacf(args) => cmd_pacf(args),
    }
}

fn parse_penalty(spec: &str, rescale: bool) -> CliResult<PenaltySpec> {
    let (family_raw, mult_raw) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("penalty '{spec}' is not family:multiplier")))?;
    let family = match family_raw.to_ascii_lowercase().as_str() {
        "aic" | "constant" => PenaltyFamily::Constant,
        "hq" | "loglog" => PenaltyFamily::LogLog,
        "bic" | "log" => PenaltyFamily::Log,
        // A custom penalty is a fixed value applied per change point.
        "custom" => PenaltyFamily::Constant,
        other => {
            return Err(CliError::Config(format!(
                "unknown penalty family '{other}' (use aic, hq, bic or custom)"
            )))
        }
    };
    let multiplier: f64 = mult_raw
        .parse()
        .map_err(|_| CliError::Config(format!("penalty multiplier '{mult_raw}' is not a number")))?;
    Ok(PenaltySpec::new(family, multiplier)?.with_rescale(rescale))
}

fn parse_beta(spec: &str) -> CliResult<BetaRule> {
    if spec.eq_ignore_ascii_case("auto") {
        return Ok(BetaRule::Auto);
    }
    let value: usize = spec
        .parse()
        .map_err(|_| CliError::Config(format!("beta '{spec}' is neither 'auto' nor an integer")))?;
    if value == 0 {
        return Err(CliError::Config("beta must be at least 1".into()));
    }
    Ok(BetaRule::Fixed(value))
}

fn parse_usize_list(spec: &str, what: &str) -> CliResult<Vec<usize>> {
    spec.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| CliError::Config(format!("{what} entry '{t}' is not an integer")))
        })
        .collect()
}

fn parse_f64_list(spec: &str, what: &str) -> CliResult<Vec<f64>> {
    spec.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Config(format!("{what} entry '{t}' is not a number")))
        })
        .collect()
}

fn load_series(input: &InputArgs) -> CliResult<TimeSeries> {
    let columns = ColumnSelection::parse(input.columns.as_deref())?;
    ingest_csv(&input.input, &columns, None)
}

fn cmd_detect(args: DetectArgs) -> CliResult<()> {
    let series = load_series(&args.input)?;
    let penalty = parse_penalty(&args.penalty, args.rescale_var)?;
    let engine = match args.engine {
        EngineArg::Dp => EngineKind::Dp,
        EngineArg::Okm => EngineKind::OrderedKMeans,
    };
    if engine == EngineKind::OrderedKMeans && args.restarts > 0 && args.seed.is_none() {
        return Err(CliError::Config(
            "the okm engine with restarts is randomized: pass --seed".into(),
        ));
    }
    let mut config = DetectConfig::new(args.mmax, penalty);
    config.beta = parse_beta(&args.beta)?;
    config.engine = engine;
    config.restarts = if engine == EngineKind::OrderedKMeans { args.restarts } else { 0 };
    config.seed = args.seed.unwrap_or(0);
    let result = detect(&series, &config)?;

    let params = json!({
        "command": "detect",
        "input": args.input.input.display().to_string(),
        "columns": args.input.columns,
        "penalty": args.penalty,
        "rescale_var": args.rescale_var,
        "mmax": args.mmax,
        "beta": args.beta,
        "engine": format!("{:?}", args.engine).to_lowercase(),
        "restarts": config.restarts,
    });
    let value = envelope(
        args.seed,
        params,
        json!({
            "m_hat": result.m_hat,
            "change_points": result.change_points,
            "losses": result.losses,
            "penalty": result.penalty_values,
            "variance_scale": result.variance_scale,
        }),
    );
    let text = render(args.output.format, &value, || {
        csv_table(
            &["change_point"],
            &result.change_points.iter().map(|cp| vec![cp.to_string()]).collect::<Vec<_>>(),
        )
    });
    write_output(args.output.output.as_deref(), &text)
}

fn cmd_mw(args: MwArgs) -> CliResult<()> {
    let series = load_series(&args.input)?;
    let penalty = parse_penalty(&args.penalty, args.rescale_var)?;
    let windows = if args.windows.eq_ignore_ascii_case("auto") {
        let ws = WindowPlan::auto_windows(series.len(), args.order);
        if ws.is_empty() {
            return Err(CliError::Config(format!(
                "no usable automatic windows for length {} at order {}",
                series.len(),
                args.order
            )));
        }
        ws
    } else {
        parse_usize_list(&args.windows, "window")?
    };
    let mut plan = WindowPlan::new(windows.clone(), args.order, penalty);
    plan.tau = args.tau;
    plan.m_max = args.mmax;
    plan.beta = parse_beta(&args.beta)?;
    plan.estimator = match args.estimator {
        EstimatorArg::Ls => Estimator::LeastSquares,
        EstimatorArg::Yw => Estimator::YuleWalker,
    };
    let out = mw_detect(&series, &plan)?;
    for round in out.rounds.iter().filter(|r| r.skipped) {
        eprintln!(
            "warning: window {} leaves {} feature(s); round skipped",
            round.window, round.feature_len
        );
    }

    let params = json!({
        "command": "mw",
        "input": args.input.input.display().to_string(),
        "columns": args.input.columns,
        "order": args.order,
        "windows": windows,
        "tau": args.tau,
        "mmax": args.mmax,
        "penalty": args.penalty,
        "rescale_var": args.rescale_var,
        "beta": args.beta,
        "estimator": format!("{:?}", args.estimator).to_lowercase(),
    });
    let mut result = json!({
        "m_hat": out.peaks.count(),
        "ranges": out.peaks.ranges,
        "threshold": out.peaks.threshold,
        "max_score": out.board.max_score(),
        "confident": out.peaks.confident,
        "truncated": out.peaks.truncated,
        "rounds": out.rounds.iter().map(|r| json!({
            "window": r.window,
            "feature_len": r.feature_len,
            "change_points": r.change_points,
            "skipped": r.skipped,
        })).collect::<Vec<_>>(),
    });
    if args.emit_scores {
        // One row per index per round, plot-ready.
        let mut scores = Vec::new();
        for (r, round) in out.rounds.iter().filter(|r| !r.skipped).enumerate() {
            for (i, &s) in out.board.round(r).iter().enumerate() {
                scores.push(json!({
                    "round": r + 1,
                    "window": round.window,
                    "index": i + 1,
                    "score": s,
                }));
            }
        }
        result["scores"] = json!(scores);
    }
    let value = envelope(None, params, result);
    let text = render(args.output.format, &value, || {
        if args.emit_scores {
            let mut rows = Vec::new();
            for (r, round) in out.rounds.iter().filter(|r| !r.skipped).enumerate() {
                for (i, &s) in out.board.round(r).iter().enumerate() {
                    rows.push(vec![
                        (r + 1).to_string(),
                        round.window.to_string(),
                        (i + 1).to_string(),
                        s.to_string(),
                    ]);
                }
            }
            csv_table(&["round", "window", "index", "score"], &rows)
        } else {
            csv_table(
                &["range_start", "range_end"],
                &out.peaks
                    .ranges
                    .iter()
                    .map(|(lo, hi)| vec![lo.to_string(), hi.to_string()])
                    .collect::<Vec<_>>(),
            )
        }
    });
    write_output(args.output.output.as_deref(), &text)
}

fn cmd_bs(args: BsArgs) -> CliResult<()> {
    let series = load_series(&args.input)?;
    let penalty = parse_penalty(&args.penalty, args.rescale_var)?;
    let mut config = BsConfig::new(args.order, args.mmax, penalty);
    if let Some(min_len) = args.min_len {
        config.min_len = min_len;
    }
    let cps = binary_segmentation(&series, &config)?;

    let params = json!({
        "command": "bs",
        "input": args.input.input.display().to_string(),
        "columns": args.input.columns,
        "order": args.order,
        "mmax": args.mmax,
        "min_len": config.min_len,
        "penalty": args.penalty,
        "rescale_var": args.rescale_var,
    });
    let value = envelope(
        None,
        params,
        json!({
            "m_hat": cps.len(),
            "change_points": cps,
        }),
    );
    let text = render(args.output.format, &value, || {
        csv_table(
            &["change_point"],
            &cps.iter().map(|cp| vec![cp.to_string()]).collect::<Vec<_>>(),
        )
    });
    write_output(args.output.output.as_deref(), &text)
}

fn parse_filters(spec: &str) -> CliResult<Vec<ArFilter>> {
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let lags = parse_f64_list(s, "filter coefficient")?;
            ArFilter::from_lags(&lags).map_err(CliError::from)
        })
        .collect()
}

fn parse_means(spec: &str) -> CliResult<Vec<Vec<f64>>> {
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64_list(s, "mean"))
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let fractions = parse_f64_list(&args.fractions, "fraction")?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (series, cps, kind_params) = match args.kind {
        SimulateKind::Ar => {
            let filters = parse_filters(args.filters.as_deref().ok_or_else(|| {
                CliError::Config("simulate --kind ar needs --filters".into())
            })?)?;
            for (i, f) in filters.iter().enumerate() {
                if !f.is_stable() {
                    eprintln!("warning: filter {} is unstable; simulation proceeds", i + 1);
                }
            }
            let spec = ArSpec { fractions, filters: filters.clone(), noise_sd: args.noise_sd };
            let (series, cps) = gen_segmentwise_ar(args.n, &spec, &mut rng)?;
            let params = json!({
                "filters": filters.iter().map(|f| f.lag_coeffs().to_vec()).collect::<Vec<_>>(),
            });
            (series, cps, params)
        }
        SimulateKind::Means => {
            let means = parse_means(args.means.as_deref().ok_or_else(|| {
                CliError::Config("simulate --kind means needs --means".into())
            })?)?;
            let spec = MeanSpec { fractions, means: means.clone(), noise_sd: args.noise_sd };
            let (series, cps) = gen_iid_means(args.n, &spec, &mut rng)?;
            (series, cps, json!({ "means": means }))
        }
    };

    let text = match args.output.format {
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = (0..series.len())
                .map(|i| series.row(i).iter().map(|v| format!("{v}")).collect())
                .collect();
            // Headerless so the file re-ingests directly.
            rows.iter().map(|r| r.join(",")).collect::<Vec<_>>().join("\n")
        }
        OutputFormat::Json => {
            let params = json!({
                "command": "simulate",
                "kind": format!("{:?}", args.kind).to_lowercase(),
                "n": args.n,
                "noise_sd": args.noise_sd,
                "spec": kind_params,
            });
            let value = envelope(
                Some(args.seed),
                params,
                json!({
                    "change_points": cps,
                    "values": series.values(),
                    "dim": series.dim(),
                }),
            );
            serde_json::to_string_pretty(&value).expect("json rendering cannot fail")
        }
    };
    write_output(args.output.output.as_deref(), &text)
}

fn cmd_benchmark(args: BenchmarkArgs) -> CliResult<()> {
    let penalty = parse_penalty(&args.penalty, args.rescale_var)?;
    let iid_generator = GeneratorSpec::IidMeans(MeanSpec {
        fractions: vec![0.2, 0.8],
        means: vec![vec![-1.0], vec![0.0], vec![1.0]],
        noise_sd: 1.0,
    });
    let ar_generator = if args.random_filters {
        GeneratorSpec::RandomStableAr { fractions: vec![0.1, 0.3], order: 2, noise_sd: 1.0 }
    } else {
        GeneratorSpec::SegmentwiseAr(ArSpec {
            fractions: vec![0.1, 0.3],
            filters: vec![
                ArFilter::from_lags(&[0.8, -0.3])?,
                ArFilter::from_lags(&[-0.5, 0.1])?,
                ArFilter::from_lags(&[0.5, -0.5])?,
            ],
            noise_sd: 1.0,
        })
    };
    let method_of = |m: BenchMethod| -> MethodSpec {
        match m {
            BenchMethod::Quad => MethodSpec::Quad(DetectConfig::new(10, penalty.clone())),
            BenchMethod::Mw => MethodSpec::MultiWindow {
                windows: WindowChoice::Auto,
                tau: 2,
                m_max: 4,
                penalty: penalty.clone(),
                order: 2,
                estimator: Estimator::LeastSquares,
            },
            BenchMethod::Bs => MethodSpec::BinSeg(BsConfig::new(2, 4, penalty.clone())),
        }
    };

    let params = json!({
        "command": "benchmark",
        "suite": format!("{:?}", args.suite).to_lowercase(),
        "penalty": args.penalty,
        "rescale_var": args.rescale_var,
        "random_filters": args.random_filters,
    });
    let value = match args.suite {
        BenchSuite::Iid | BenchSuite::Ar => {
            let (generator, default_method, default_ns, default_reps) = match args.suite {
                BenchSuite::Iid => (iid_generator, BenchMethod::Quad, vec![100, 300, 1000], 100),
                _ => (ar_generator, BenchMethod::Mw, vec![1000, 10_000], 50),
            };
            let n_values = match &args.n_list {
                Some(list) => parse_usize_list(list, "n")?,
                None => default_ns,
            };
            let config = ExperimentConfig {
                generator,
                method: method_of(args.method.unwrap_or(default_method)),
                n_values,
                reps: args.reps.unwrap_or(default_reps),
                master_seed: args.seed,
            };
            let report = run_experiment(&config)?;
            envelope(Some(args.seed), params, report.to_json())
        }
        BenchSuite::Timing => {
            let n_values = match &args.n_list {
                Some(list) => parse_usize_list(list, "n")?,
                None => vec![1000, 10_000, 50_000],
            };
            let methods = [method_of(BenchMethod::Mw), method_of(BenchMethod::Bs)];
            let generator = GeneratorSpec::RandomStableAr {
                fractions: vec![0.1, 0.3],
                order: 2,
                noise_sd: 1.0,
            };
            let report =
                benchmark_runtime(&generator, &methods, &n_values, args.reps.unwrap_or(3), args.seed)?;
            envelope(Some(args.seed), params, report.to_json())
        }
    };

    let text = render(args.output.format, &value, || {
        // Flatten whichever per-row table the suite produced.
        match value["result"].get("per_n").and_then(|v| v.as_array()) {
            Some(rows) => {
                let header =
                    ["n", "f_under", "f_exact", "f_over", "mean_count", "sd_count", "hit_rate", "median_ms"];
                let body: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| header.iter().map(|k| r[*k].to_string()).collect())
                    .collect();
                csv_table(&header, &body)
            }
            None => {
                let rows = value["result"]["rows"].as_array().cloned().unwrap_or_default();
                let body: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r["method"].as_str().unwrap_or_default().to_string(),
                            r["n"].to_string(),
                            r["median_ms"].to_string(),
                        ]
                    })
                    .collect();
                csv_table(&["method", "n", "median_ms"], &body)
            }
        }
    });
    write_output(args.output.output.as_deref(), &text)
}

fn cmd_pacf(args: PacfArgs) -> CliResult<()> {
    let series = load_series(&args.input)?;
    let data = series.as_univariate().map_err(|_| {
        CliError::Config("pacf needs a single column; use --columns to select one".into())
    })?;
    let coeffs = pacf(data, args.max_lag)?;

    let params = json!({
        "command": "pacf",
        "input": args.input.input.display().to_string(),
        "columns": args.input.columns,
        "max_lag": args.max_lag,
    });
    let value = envelope(
        None,
        params,
        json!({
            "pacf": coeffs,
            "confidence_band": 2.0 / (series.len() as f64).sqrt(),
        }),
    );
    let text = render(args.output.format, &value, || {
        csv_table(
            &["lag", "pacf"],
            &coeffs
                .iter()
                .enumerate()
                .map(|(i, p)| vec![(i + 1).to_string(), format!("{p}")])
                .collect::<Vec<_>>(),
        )
    });
    write_output(args.output.output.as_deref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_grammar() {
        let p = parse_penalty("bic:2", true).unwrap();
        assert_eq!(p.family, PenaltyFamily::Log);
        assert_eq!(p.multiplier, 2.0);
        assert!(p.rescale_by_variance);

        let p = parse_penalty("hq:3.5", false).unwrap();
        assert_eq!(p.family, PenaltyFamily::LogLog);
        assert!(!p.rescale_by_variance);

        assert_eq!(parse_penalty("aic:1", true).unwrap().family, PenaltyFamily::Constant);
        assert_eq!(parse_penalty("log:1", true).unwrap().family, PenaltyFamily::Log);
        assert_eq!(parse_penalty("custom:7", true).unwrap().multiplier, 7.0);

        assert!(parse_penalty("bic", true).is_err());
        assert!(parse_penalty("weird:1", true).is_err());
        assert!(parse_penalty("bic:x", true).is_err());
        assert!(parse_penalty("bic:0", true).is_err());
    }

    #[test]
    fn beta_grammar() {
        assert_eq!(parse_beta("auto").unwrap(), BetaRule::Auto);
        assert_eq!(parse_beta("5").unwrap(), BetaRule::Fixed(5));
        assert!(parse_beta("0").is_err());
        assert!(parse_beta("x").is_err());
    }

    #[test]
    fn filter_and_mean_grammar() {
        let filters = parse_filters("0.8,-0.3;-0.5,0.1").unwrap();
        assert_eq!(filters.len(), 2);
        assert_eq!(filters[0].lag_coeffs(), &[0.8, -0.3]);
        let means = parse_means("-1;0;1").unwrap();
        assert_eq!(means, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let means = parse_means("1,2;3,4").unwrap();
        assert_eq!(means, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }
}
