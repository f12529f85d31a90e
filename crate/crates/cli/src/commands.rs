//! The subcommand implementations. Each one parses and validates its
//! inputs, runs the corresponding library pipeline, and returns the files
//! to write; nothing touches the filesystem on failure.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use ratemig_core::ctmc::ALLOWED_PAIR_THRESHOLD;
use ratemig_core::em::{em_fit, EmConfig, EmInit};
use ratemig_core::mcmc::{fit_mcmc, posterior_summary};
use ratemig_core::momentum::MomentumParams;
use ratemig_core::presets;
use ratemig_core::selection::{bic_compare_with, cox_momentum_test, BicCount, Direction};
use ratemig_core::simulate::{
    monte_carlo_tpm, simulate_ctmc, simulate_momentum, tpm_estimates_to_csv, SimModel,
};
use ratemig_core::wald::{hessian, pd_curve, pd_curve_to_csv, wald_intervals};
use ratemig_core::{
    ctmc, DiscretePanel, Error, EventHistory, GeneratorMatrix, McmcConfig, MomentumModel,
    RatingScale, Result, SimConfig,
};

use crate::manifest::RunOutputs;

// ------------------------------------------------------------ shared bits

fn load_scale(path: &PathBuf) -> Result<RatingScale> {
    RatingScale::from_json_path(path)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    // "start:end:step", inclusive of both ends up to rounding
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Invalid(format!(
            "grid must be start:end:step, got {spec:?}"
        )));
    }
    let bad = |what: &str| Error::Invalid(format!("bad grid {what} in {spec:?}"));
    let start: f64 = parts[0].parse().map_err(|_| bad("start"))?;
    let end: f64 = parts[1].parse().map_err(|_| bad("end"))?;
    let step: f64 = parts[2].parse().map_err(|_| bad("step"))?;
    if !(step > 0.0) || end < start || start < 0.0 {
        return Err(Error::Invalid(format!("degenerate grid {spec:?}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,log_likelihood\n");
    for (k, ll) in trace.iter().enumerate() {
        let _ = writeln!(out, "{},{}", k + 1, ll);
    }
    out
}

// ------------------------------------------------------------ estimate-em

#[derive(Args, Clone)]
pub struct EstimateEmArgs {
    /// Discrete panel CSV (period,dt_years,from,to,count).
    #[arg(long)]
    panel: PathBuf,
    /// Scale definition JSON.
    #[arg(long)]
    scale: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// "uniform", "diagonal-adjacent", or a path to a generator JSON.
    #[arg(long, default_value = "diagonal-adjacent")]
    init: String,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn estimate_em(args: &EstimateEmArgs) -> Result<RunOutputs> {
    let scale = load_scale(&args.scale)?;
    let panel = DiscretePanel::parse_csv(&args.panel, &scale)?;
    let init = match args.init.as_str() {
        "uniform" => EmInit::Uniform,
        "diagonal-adjacent" => EmInit::DiagonalAdjacent,
        path => EmInit::Custom(GeneratorMatrix::from_json_path(path, &scale)?),
    };
    let config = EmConfig {
        epsilon: args.epsilon,
        tol: args.tol,
        max_iter: args.max_iter,
        init,
    };
    let fit = em_fit(&panel, &config)?;
    if !fit.converged {
        crate::diag_warning(&format!(
            "EM stopped at max_iter = {} before reaching tol = {}",
            args.max_iter, args.tol
        ));
    }
    if !fit.boundary_active.is_empty() {
        crate::diag_warning(&format!(
            "constraint clipping active at convergence for {} entr(ies)",
            fit.boundary_active.len()
        ));
    }
    let mut run = RunOutputs::new(&args.out.out, "estimate-em");
    run.inputs = serde_json::json!({
        "panel": args.panel.display().to_string(),
        "scale": args.scale.display().to_string(),
    });
    run.config = serde_json::json!({
        "epsilon": args.epsilon, "tol": args.tol,
        "max_iter": args.max_iter, "init": args.init,
        "converged": fit.converged, "iterations": fit.iterations,
    });
    run.add_file("generator.json", fit.generator.to_json_string());
    run.add_file("trace.csv", trace_csv(&fit.trace));
    Ok(run)
}

// ---------------------------------------------------------------- wald-ci

#[derive(Args, Clone)]
pub struct WaldCiArgs {
    /// Discrete panel CSV the generator was estimated from.
    #[arg(long)]
    panel: PathBuf,
    /// Estimated generator JSON.
    #[arg(long)]
    generator: PathBuf,
    #[arg(long)]
    scale: PathBuf,
    /// Confidence level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Optional default-probability grid "start:end:step".
    #[arg(long)]
    pd_grid: Option<String>,
    /// Initial rating label for the default-probability curve.
    #[arg(long)]
    rating: Option<String>,
    /// Interval output encoding: "json" (matrix form) or "csv" (one row
    /// per allowed pair).
    #[arg(long, default_value = "json")]
    format: String,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn wald_ci(args: &WaldCiArgs) -> Result<RunOutputs> {
    let scale = load_scale(&args.scale)?;
    let panel = DiscretePanel::parse_csv(&args.panel, &scale)?;
    let generator = GeneratorMatrix::from_json_path(&args.generator, &scale)?;
    let pairs = generator.allowed_pairs(ALLOWED_PAIR_THRESHOLD)?;
    let bundle = hessian(&generator, &panel, &pairs)?;
    let intervals = wald_intervals(&generator, &bundle, args.level)?;

    let mut run = RunOutputs::new(&args.out.out, "wald-ci");
    run.inputs = serde_json::json!({
        "panel": args.panel.display().to_string(),
        "generator": args.generator.display().to_string(),
        "scale": args.scale.display().to_string(),
    });
    run.config = serde_json::json!({
        "level": args.level, "pd_grid": args.pd_grid, "rating": args.rating,
        "format": args.format,
    });
    match args.format.as_str() {
        "json" => run.add_file("ci.json", intervals.to_json_string()),
        "csv" => {
            let mut text = String::from("from,to,estimate,lower,upper\n");
            for (a, b) in pairs.iter() {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{}",
                    scale.label(a),
                    scale.label(b),
                    generator.rate(a, b),
                    intervals.lower[(a, b)],
                    intervals.upper[(a, b)]
                );
            }
            run.add_file("ci.csv", text);
        }
        other => {
            return Err(Error::Invalid(format!(
                "--format must be json or csv, got {other:?}"
            )))
        }
    }

    match (&args.pd_grid, &args.rating) {
        (Some(grid_spec), Some(rating)) => {
            let grid = parse_grid(grid_spec)?;
            let i = scale
                .index_of(rating)
                .ok_or_else(|| Error::Invalid(format!("unknown rating label {rating:?}")))?;
            let curve = pd_curve(&generator, &bundle, i, &grid, args.level)?;
            run.add_file("pd_curve.csv", pd_curve_to_csv(&curve));
        }
        (None, None) => {}
        _ => {
            return Err(Error::Invalid(
                "--pd-grid and --rating must be given together".into(),
            ))
        }
    }
    Ok(run)
}

#[derive(Args, Clone)]
pub struct PdCurveArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    generator: PathBuf,
    #[arg(long)]
    scale: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Default-probability grid "start:end:step".
    #[arg(long)]
    pd_grid: String,
    /// Initial rating label.
    #[arg(long)]
    rating: String,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn pd_curve_cmd(args: &PdCurveArgs) -> Result<RunOutputs> {
    let expanded = WaldCiArgs {
        panel: args.panel.clone(),
        generator: args.generator.clone(),
        scale: args.scale.clone(),
        level: args.level,
        pd_grid: Some(args.pd_grid.clone()),
        rating: Some(args.rating.clone()),
        format: "json".into(),
        out: args.out.clone(),
    };
    let mut run = wald_ci(&expanded)?;
    run.command = "pd-curve".into();
    Ok(run)
}

// --------------------------------------------------------- mle-continuous

#[derive(Args, Clone)]
pub struct MleContinuousArgs {
    /// Event history CSV (entity_id,time_years,rating).
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    scale: PathBuf,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn mle_continuous_cmd(args: &MleContinuousArgs) -> Result<RunOutputs> {
    let scale = load_scale(&args.scale)?;
    let history = EventHistory::parse_csv(&args.events, &scale)?;
    let generator = ctmc::mle_continuous(&history)?;
    let mut run = RunOutputs::new(&args.out.out, "mle-continuous");
    run.inputs = serde_json::json!({
        "events": args.events.display().to_string(),
        "scale": args.scale.display().to_string(),
    });
    run.add_file("generator.json", generator.to_json_string());
    Ok(run)
}

// ------------------------------------------------------------ fit-momentum

#[derive(Args, Clone)]
pub struct FitMomentumArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    scale: PathBuf,
    #[arg(long, default_value_t = ratemig_core::mcmc::DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = ratemig_core::mcmc::DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Gamma proposal shape (bigger = smaller steps).
    #[arg(long, default_value_t = 200.0)]
    proposal_shape: f64,
    #[arg(long, default_value_t = 2.0)]
    prior_gamma_shape: f64,
    #[arg(long, default_value_t = 20.0)]
    prior_alpha_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    prior_beta_rate: f64,
    /// Credible-interval level for the summary.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn fit_momentum(args: &FitMomentumArgs) -> Result<RunOutputs> {
    let scale = load_scale(&args.scale)?;
    let history = EventHistory::parse_csv(&args.events, &scale)?;
    let config = McmcConfig {
        iterations: args.iterations,
        burn_in: args.burn_in,
        proposal_shape: args.proposal_shape,
        prior_gamma_shape: args.prior_gamma_shape,
        prior_alpha_rate: args.prior_alpha_rate,
        prior_beta_rate: args.prior_beta_rate,
        seed: args.seed,
        chains: args.chains,
    };
    let mcrun = fit_mcmc(&history, &config)?;
    let summary = posterior_summary(&mcrun, args.level)?;
    let worst_rhat = mcrun
        .rhat
        .iter()
        .copied()
        .fold(f64::NAN, |a, b| if b.is_finite() { a.max(b) } else { a });
    if worst_rhat > 1.05 {
        crate::diag_warning(&format!(
            "split R-hat up to {worst_rhat:.3} exceeds 1.05; pooled summary may be premature"
        ));
    }
    let mut run = RunOutputs::new(&args.out.out, "fit-momentum");
    run.inputs = serde_json::json!({
        "events": args.events.display().to_string(),
        "scale": args.scale.display().to_string(),
    });
    run.config = serde_json::json!({
        "iterations": args.iterations, "burn_in": args.burn_in,
        "proposal_shape": args.proposal_shape,
        "prior_gamma_shape": args.prior_gamma_shape,
        "prior_alpha_rate": args.prior_alpha_rate,
        "prior_beta_rate": args.prior_beta_rate,
        "level": args.level, "chains": args.chains,
    });
    run.seed = Some(args.seed);
    for c in 0..mcrun.chains.len() {
        run.add_file(&format!("chain_{c}.csv"), mcrun.chain_to_csv(c));
    }
    run.add_file("summary.json", summary.to_json_string());
    run.add_file("model.json", summary.model.to_json_string());
    Ok(run)
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Clone)]
pub struct SimulateArgs {
    /// Generator JSON for pure Markov dynamics (needs --scale).
    #[arg(long, conflicts_with = "model")]
    generator: Option<PathBuf>,
    /// Momentum model JSON (scale embedded).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    scale: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    firms_per_rating: usize,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Exponential withdrawal (censoring) intensity per year.
    #[arg(long)]
    withdrawal_rate: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<RunOutputs> {
    let mut config = SimConfig::new(args.firms_per_rating, args.horizon, args.seed);
    config.withdrawal_rate = args.withdrawal_rate;
    let history = match (&args.generator, &args.model) {
        (Some(gpath), None) => {
            let scale_path = args.scale.as_ref().ok_or_else(|| {
                Error::Invalid("--generator needs --scale for the label set".into())
            })?;
            let scale = load_scale(scale_path)?;
            let generator = GeneratorMatrix::from_json_path(gpath, &scale)?;
            simulate_ctmc(&generator, &config)?
        }
        (None, Some(mpath)) => {
            let model = MomentumModel::from_json_path(mpath)?;
            simulate_momentum(&model, &config)?
        }
        _ => {
            return Err(Error::Invalid(
                "exactly one of --generator or --model is required".into(),
            ))
        }
    };
    let mut run = RunOutputs::new(&args.out.out, "simulate");
    run.inputs = serde_json::json!({
        "generator": args.generator.as_ref().map(|p| p.display().to_string()),
        "model": args.model.as_ref().map(|p| p.display().to_string()),
        "scale": args.scale.as_ref().map(|p| p.display().to_string()),
    });
    run.config = serde_json::json!({
        "firms_per_rating": args.firms_per_rating,
        "horizon": args.horizon,
        "withdrawal_rate": args.withdrawal_rate,
    });
    run.seed = Some(args.seed);
    run.add_file("events.csv", history.to_csv_string());
    Ok(run)
}

// --------------------------------------------------------------------- tpm

#[derive(Args, Clone)]
pub struct TpmArgs {
    #[arg(long, conflicts_with = "model")]
    generator: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    scale: Option<PathBuf>,
    /// Snapshot horizons "start:end:step".
    #[arg(long, default_value = "1:10:1")]
    grid: String,
    #[arg(long, default_value_t = 100_000)]
    firms_per_rating: usize,
    #[arg(long)]
    seed: u64,
    /// Matrix output encoding: "csv" (t,from,to,p,se rows) or "json".
    #[arg(long, default_value = "csv")]
    format: String,
    #[command(flatten)]
    out: crate::OutDir,
}

fn tpm_output(
    run: &mut RunOutputs,
    format: &str,
    estimates: &[ratemig_core::simulate::TpmEstimate<f64>],
    scale: &RatingScale,
) -> Result<()> {
    match format {
        "csv" => run.add_file("tpm.csv", tpm_estimates_to_csv(estimates, scale)),
        "json" => {
            let snaps: Vec<serde_json::Value> = estimates
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "t": e.t,
                        "p": e.p.to_rows_f64(),
                        "se": e.se.to_rows_f64(),
                        "row_counts": e.row_counts,
                    })
                })
                .collect();
            let doc = serde_json::json!({"labels": scale.labels(), "snapshots": snaps});
            run.add_file(
                "tpm.json",
                serde_json::to_string_pretty(&doc).expect("tpm serializes"),
            );
        }
        other => {
            return Err(Error::Invalid(format!(
                "--format must be csv or json, got {other:?}"
            )))
        }
    }
    Ok(())
}

pub fn tpm_cmd(args: &TpmArgs) -> Result<RunOutputs> {
    let grid: Vec<f64> = parse_grid(&args.grid)?
        .into_iter()
        .filter(|&t| t > 0.0)
        .collect();
    if grid.is_empty() {
        return Err(Error::Invalid("snapshot grid is empty".into()));
    }
    let horizon = *grid.last().unwrap();
    let mut config = SimConfig::new(args.firms_per_rating, horizon, args.seed);
    config.snapshot_grid = grid;

    enum Loaded {
        Markov(GeneratorMatrix),
        Momentum(MomentumModel),
    }
    let loaded = match (&args.generator, &args.model) {
        (Some(gpath), None) => {
            let scale_path = args.scale.as_ref().ok_or_else(|| {
                Error::Invalid("--generator needs --scale for the label set".into())
            })?;
            let scale = load_scale(scale_path)?;
            Loaded::Markov(GeneratorMatrix::from_json_path(gpath, &scale)?)
        }
        (None, Some(mpath)) => Loaded::Momentum(MomentumModel::from_json_path(mpath)?),
        _ => {
            return Err(Error::Invalid(
                "exactly one of --generator or --model is required".into(),
            ))
        }
    };

    let mut run = RunOutputs::new(&args.out.out, "tpm");
    run.inputs = serde_json::json!({
        "generator": args.generator.as_ref().map(|p| p.display().to_string()),
        "model": args.model.as_ref().map(|p| p.display().to_string()),
        "scale": args.scale.as_ref().map(|p| p.display().to_string()),
    });
    run.config = serde_json::json!({
        "grid": args.grid, "firms_per_rating": args.firms_per_rating,
        "format": args.format,
    });
    run.seed = Some(args.seed);

    match loaded {
        Loaded::Markov(generator) => {
            let estimates = monte_carlo_tpm(SimModel::Markov(&generator), &config)?;
            // cross-check against the analytic matrix exponential
            let mut worst_z = 0.0f64;
            let mut worst_at = (0.0, 0, 0);
            for est in &estimates {
                let exact = generator.tpm(est.t)?;
                for i in 0..generator.h() {
                    for j in 0..generator.h() {
                        let se = est.se[(i, j)];
                        if se > 0.0 {
                            let z = (est.p[(i, j)] - exact[(i, j)]).abs() / se;
                            if z > worst_z {
                                worst_z = z;
                                worst_at = (est.t, i, j);
                            }
                        }
                    }
                }
            }
            run.config["analytic_check"] = serde_json::json!({
                "max_abs_z": worst_z,
                "at": {"t": worst_at.0,
                        "from": generator.scale().label(worst_at.1),
                        "to": generator.scale().label(worst_at.2)},
            });
            println!("max |z| vs analytic TPM: {worst_z:.2}");
            tpm_output(&mut run, &args.format, &estimates, generator.scale())?;
        }
        Loaded::Momentum(model) => {
            let estimates = monte_carlo_tpm(SimModel::Momentum(&model), &config)?;
            tpm_output(&mut run, &args.format, &estimates, model.scale())?;
        }
    }
    Ok(run)
}

// -------------------------------------------------------------- bic-compare

#[derive(Args, Clone)]
pub struct BicCompareArgs {
    #[arg(long)]
    events: PathBuf,
    /// Markov generator JSON.
    #[arg(long)]
    generator: PathBuf,
    /// Momentum model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    scale: PathBuf,
    /// What the log(n) penalty counts: "events" or "firms".
    #[arg(long, default_value = "events")]
    bic_n: String,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn bic_compare_cmd(args: &BicCompareArgs) -> Result<RunOutputs> {
    let scale = load_scale(&args.scale)?;
    let history = EventHistory::parse_csv(&args.events, &scale)?;
    let generator = GeneratorMatrix::from_json_path(&args.generator, &scale)?;
    let model = MomentumModel::from_json_path(&args.model)?;
    if model.scale() != &scale {
        return Err(Error::Invalid(
            "momentum model scale does not match --scale".into(),
        ));
    }
    let count = match args.bic_n.as_str() {
        "events" => BicCount::Events,
        "firms" => BicCount::Firms,
        other => {
            return Err(Error::Invalid(format!(
                "--bic-n must be events or firms, got {other:?}"
            )))
        }
    };
    let report = bic_compare_with(&history, &generator, &model, count)?;
    let mut run = RunOutputs::new(&args.out.out, "bic-compare");
    run.inputs = serde_json::json!({
        "events": args.events.display().to_string(),
        "generator": args.generator.display().to_string(),
        "model": args.model.display().to_string(),
        "scale": args.scale.display().to_string(),
    });
    run.config = serde_json::json!({"bic_n": args.bic_n});
    println!("BIC difference (momentum - markov): {:.3}", report.difference);
    run.add_file("bic.json", report.to_json_string());
    Ok(run)
}

// ------------------------------------------------------------------ cox-test

#[derive(Args, Clone)]
pub struct CoxTestArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    scale: PathBuf,
    /// "downward" or "upward".
    #[arg(long, default_value = "downward")]
    direction: String,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn cox_test_cmd(args: &CoxTestArgs) -> Result<RunOutputs> {
    let scale = load_scale(&args.scale)?;
    let history = EventHistory::parse_csv(&args.events, &scale)?;
    let direction = match args.direction.as_str() {
        "downward" => Direction::Downward,
        "upward" => Direction::Upward,
        other => {
            return Err(Error::Invalid(format!(
                "direction must be downward or upward, got {other:?}"
            )))
        }
    };
    let result = cox_momentum_test(&history, direction)?;
    let mut run = RunOutputs::new(&args.out.out, "cox-test");
    run.inputs = serde_json::json!({
        "events": args.events.display().to_string(),
        "scale": args.scale.display().to_string(),
    });
    run.config = serde_json::json!({"direction": args.direction});
    println!(
        "{} momentum: coefficient {:.5}, p = {:.5}",
        args.direction, result.coefficient, result.p_value
    );
    run.add_file("cox.json", result.to_json_string());
    Ok(run)
}

// --------------------------------------------------------------------- synth

#[derive(Args, Clone)]
pub struct SynthArgs {
    /// Momentum model JSON; defaults to the built-in calibrated model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Override the built-in momentum parameters, format "a1,a2,b1,b2".
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 1000)]
    firms_per_rating: usize,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    #[arg(long)]
    withdrawal_rate: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: crate::OutDir,
}

pub fn synth_cmd(args: &SynthArgs) -> Result<RunOutputs> {
    let model = match &args.model {
        Some(path) => MomentumModel::from_json_path(path)?,
        None => presets::calibrated_momentum_model(),
    };
    let model = match &args.params {
        Some(spec) => {
            let vals: Vec<f64> = spec
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Invalid(format!("bad --params {spec:?}")))?;
            if vals.len() != 4 {
                return Err(Error::Invalid("--params needs a1,a2,b1,b2".into()));
            }
            MomentumModel::new(
                model.base().clone(),
                MomentumParams::new([vals[0], vals[1]], [vals[2], vals[3]])?,
            )?
        }
        None => model,
    };
    let mut config = SimConfig::new(args.firms_per_rating, args.horizon, args.seed);
    config.withdrawal_rate = args.withdrawal_rate;
    let history = simulate_momentum(&model, &config)?;
    let mut run = RunOutputs::new(&args.out.out, "synth");
    run.inputs = serde_json::json!({
        "model": args.model.as_ref().map(|p| p.display().to_string()),
    });
    run.config = serde_json::json!({
        "firms_per_rating": args.firms_per_rating,
        "horizon": args.horizon,
        "withdrawal_rate": args.withdrawal_rate,
        "params": args.params,
    });
    run.seed = Some(args.seed);
    run.add_file("events.csv", history.to_csv_string());
    run.add_file("scale.json", model.scale().to_json_string());
    run.add_file("model.json", model.to_json_string());
    Ok(run)
}
