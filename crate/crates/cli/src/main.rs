//! Batch front end: wires the estimation, simulation and model-selection
//! pipelines together behind reproducible subcommands.
//!
//! Every command writes its outputs plus a `manifest.json` into `--out`.
//! Nothing is written until the computation succeeded, so a failing run
//! leaves no partial files. Stochastic commands require an explicit
//! `--seed`; rerunning with the same flags reproduces outputs byte for
//! byte. Structured diagnostics go to standard error as JSON lines.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure,
//! 4 convergence-diagnostic failure.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ratemig_core::Error;

#[derive(Parser)]
#[command(
    name = "ratemig",
    version,
    about = "Credit-rating migration models: CTMC estimation with error bands and a rating-momentum point process"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Number of worker threads (outputs do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Args, Clone)]
struct OutDir {
    /// Directory for outputs and the run manifest (created if missing).
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a generator from a discrete panel by EM.
    EstimateEm(commands::EstimateEmArgs),
    /// Wald intervals for an estimated generator, optionally with a
    /// delta-method default-probability curve.
    WaldCi(commands::WaldCiArgs),
    /// Default-probability curve with delta-method bands (a focused alias
    /// of wald-ci; requires the grid and rating).
    PdCurve(commands::PdCurveArgs),
    /// Maximum-likelihood generator from a fully observed history.
    MleContinuous(commands::MleContinuousArgs),
    /// Calibrate the momentum model by MCMC.
    FitMomentum(commands::FitMomentumArgs),
    /// Simulate an event history from a generator or a momentum model.
    Simulate(commands::SimulateArgs),
    /// Monte-Carlo transition matrices over snapshot horizons.
    Tpm(commands::TpmArgs),
    /// BIC comparison of the Markov and momentum models on a history.
    BicCompare(commands::BicCompareArgs),
    /// Semi-parametric hazard test for rating momentum.
    CoxTest(commands::CoxTestArgs),
    /// Synthetic events CSV from the built-in calibrated model.
    Synth(commands::SynthArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            diag_error(2, &format!("could not configure {workers} workers: {e}"));
            return ExitCode::from(2);
        }
    }
    let started = std::time::Instant::now();
    let result = match &cli.command {
        Command::EstimateEm(args) => commands::estimate_em(args),
        Command::WaldCi(args) => commands::wald_ci(args),
        Command::PdCurve(args) => commands::pd_curve_cmd(args),
        Command::MleContinuous(args) => commands::mle_continuous_cmd(args),
        Command::FitMomentum(args) => commands::fit_momentum(args),
        Command::Simulate(args) => commands::simulate_cmd(args),
        Command::Tpm(args) => commands::tpm_cmd(args),
        Command::BicCompare(args) => commands::bic_compare_cmd(args),
        Command::CoxTest(args) => commands::cox_test_cmd(args),
        Command::Synth(args) => commands::synth_cmd(args),
    };
    match result {
        Ok(run) => match run.write(started.elapsed()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                diag_error(2, &format!("could not write outputs: {e}"));
                ExitCode::from(2)
            }
        },
        Err(e) => {
            let code = exit_code_for(&e);
            diag_error(code, &e.to_string());
            ExitCode::from(code)
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::Invalid(_)
        | Error::Empty(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_) => 2,
        Error::ImpossibleTransitions { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::Numerical(_) => 3,
        Error::Convergence(_) => 4,
    }
}

fn diag_error(code: u8, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({"level": "error", "exit_code": code, "message": message})
    );
}

pub(crate) fn diag_warning(message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({"level": "warning", "message": message})
    );
}
