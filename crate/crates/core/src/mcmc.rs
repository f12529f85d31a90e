//! Bayesian calibration of the momentum model by single-component
//! Metropolis-Hastings.
//!
//! Each parameter (every allowed baseline rate, then α₁, α₂, β₁, β₂) is
//! updated in turn from a Gamma random-walk proposal with mean at the
//! current value and shape `proposal_shape` (variance current²/shape), so
//! proposals stay positive. Priors: baseline rates are Exponential with
//! mean at the CTMC MLE computed from each entity's first transition only
//! (initial transitions carry no momentum), floored at 1e-4; α and β get
//! Gamma priors with a shared shape and separate rates.
//!
//! Chains are reproducible: a fixed seed fixes every draw, and chain c of a
//! multi-chain run uses seed + c.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::ctmc::{repair_diagonal, AllowedPairs, GeneratorMatrix};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::momentum::{channel_of, MomentumModel, MomentumParams};
use crate::num::Real;
use crate::rating::{EventHistory, RatingScale};
use crate::stats::{quantile_sorted, split_rank_rhat};

pub const DEFAULT_ITERATIONS: usize = 11_000;
pub const DEFAULT_BURN_IN: usize = 1_000;

/// Floor for the exponential prior means of baseline rates.
const PRIOR_MEAN_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct McmcConfig<F> {
    pub iterations: usize,
    pub burn_in: usize,
    /// Gamma proposal shape s: mean stays at the current value, variance is
    /// current²/s. Larger s means smaller steps.
    pub proposal_shape: F,
    /// Shared Gamma prior shape for α and β.
    pub prior_gamma_shape: F,
    /// Gamma prior rate for α₁, α₂ (default mean 0.1).
    pub prior_alpha_rate: F,
    /// Gamma prior rate for β₁, β₂ (default mean 2.0).
    pub prior_beta_rate: F,
    pub seed: u64,
    pub chains: usize,
}

impl<F: Real> McmcConfig<F> {
    pub fn with_seed(seed: u64) -> Self {
        McmcConfig {
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            proposal_shape: F::of(200.0),
            prior_gamma_shape: F::of(2.0),
            prior_alpha_rate: F::of(20.0),
            prior_beta_rate: F::of(1.0),
            seed,
            chains: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Invalid("burn_in must be below iterations".into()));
        }
        if !(self.proposal_shape > F::one()) {
            return Err(Error::Invalid("proposal_shape must exceed 1".into()));
        }
        if !(self.prior_gamma_shape > F::zero())
            || !(self.prior_alpha_rate > F::zero())
            || !(self.prior_beta_rate > F::zero())
        {
            return Err(Error::Invalid("prior parameters must be positive".into()));
        }
        if self.chains == 0 {
            return Err(Error::Invalid("need at least one chain".into()));
        }
        Ok(())
    }
}

/// One retained state of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<F> {
    /// Baseline rates over the allowed pairs, row-major.
    pub q: Vec<F>,
    pub alpha: [F; 2],
    pub beta: [F; 2],
    pub log_posterior: F,
}

/// Post burn-in samples of one chain.
#[derive(Debug, Clone)]
pub struct PosteriorChain<F> {
    pub samples: Vec<Sample<F>>,
    /// Accepted fraction per component (pairs order, then α₁ α₂ β₁ β₂).
    pub acceptance_rates: Vec<F>,
    pub seed: u64,
}

/// A complete run: every chain plus shared structure and diagnostics.
#[derive(Debug, Clone)]
pub struct McmcRun<F> {
    pub scale: RatingScale,
    pub pairs: AllowedPairs,
    pub chains: Vec<PosteriorChain<F>>,
    /// Rank-normalized split-R̂ per parameter (pairs order, then α, β).
    pub rhat: Vec<f64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl<F: Real> McmcRun<F> {
    pub fn n_params(&self) -> usize {
        self.pairs.len() + 4
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .pairs
            .iter()
            .map(|(i, j)| format!("q_{}_{}", self.scale.label(i), self.scale.label(j)))
            .collect();
        names.extend(["alpha1", "alpha2", "beta1", "beta2"].map(String::from));
        names
    }

    /// Chain dump: one row per retained sample.
    pub fn chain_to_csv(&self, chain: usize) -> String {
        let mut out = self.param_names().join(",");
        out.push_str(",log_posterior\n");
        for s in &self.chains[chain].samples {
            for v in &s.q {
                let _ = write!(out, "{},", v);
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.alpha[0], s.alpha[1], s.beta[0], s.beta[1], s.log_posterior
            );
        }
        out
    }
}

/// Posterior means assembled into a model, with equal-tailed credible
/// intervals per parameter.
#[derive(Debug, Clone)]
pub struct PosteriorSummary<F> {
    pub model: MomentumModel<F>,
    pub level: F,
    pub params: Vec<ParamSummary<F>>,
}

#[derive(Debug, Clone)]
pub struct ParamSummary<F> {
    pub name: String,
    pub mean: F,
    pub lower: F,
    pub upper: F,
    pub rhat: f64,
}

impl<F: Real> PosteriorSummary<F> {
    pub fn to_json_string(&self) -> String {
        let params: Vec<serde_json::Value> = self
            .params
            .iter()
            .map(|p| {
                serde_json::json!({
                    "name": p.name,
                    "mean": p.mean.as_f64(),
                    "lower": p.lower.as_f64(),
                    "upper": p.upper.as_f64(),
                    "rhat": if p.rhat.is_finite() { Some(p.rhat) } else { None },
                })
            })
            .collect();
        let v = serde_json::json!({
            "level": self.level.as_f64(),
            "alpha": [self.model.params().alpha[0].as_f64(), self.model.params().alpha[1].as_f64()],
            "beta": [self.model.params().beta[0].as_f64(), self.model.params().beta[1].as_f64()],
            "q": self.model.base().matrix().to_rows_f64(),
            "labels": self.model.scale().labels(),
            "params": params,
        });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }
}

/// Precomputed event structure for fast repeated likelihood evaluation.
/// Everything that does not depend on (q, α, β) is extracted once.
struct Prepared<F> {
    /// Holding time per state, summed over entities.
    holding: Vec<F>,
    /// Upgrade event count per pair index.
    upgrade_counts: Vec<u64>,
    /// Downgrade events: (pair index, 1/N_j, decay gaps per channel).
    downgrades: Vec<DownEvent<F>>,
    /// (terminal − τ) per channel, pooled over entities, for the
    /// closed-form compensator.
    terminal_gaps: [Vec<F>; 2],
    /// Row index of each pair, and which pairs leave each row.
    pair_rows: Vec<usize>,
}

struct DownEvent<F> {
    pair: usize,
    inv_n_down: F,
    gaps: [Vec<F>; 2],
}

fn prepare<F: Real>(
    history: &EventHistory<F>,
    pairs: &AllowedPairs,
    n_down: &[usize],
) -> Prepared<F> {
    let scale = history.scale();
    let h = scale.h();
    let mut holding = vec![F::zero(); h];
    let mut upgrade_counts = vec![0u64; pairs.len()];
    let mut downgrades = Vec::new();
    let mut terminal_gaps: [Vec<F>; 2] = [Vec::new(), Vec::new()];
    for tr in history.tracks() {
        let t_end = tr.terminal_time();
        let mut kernels: Vec<(F, usize)> = Vec::new();
        let mut t_prev = tr.start_time;
        let mut state = tr.start_state;
        for &(t, s) in &tr.events {
            holding[state] += t - t_prev;
            let pair = pairs
                .position((state, s))
                .expect("support covers every observed transition");
            if s > state {
                let mut gaps: [Vec<F>; 2] = [Vec::new(), Vec::new()];
                for &(tau, ch) in &kernels {
                    gaps[ch].push(t - tau);
                }
                downgrades.push(DownEvent {
                    pair,
                    inv_n_down: F::one() / F::of(n_down[state] as f64),
                    gaps,
                });
                kernels.push((t, channel_of(scale, state)));
            } else {
                upgrade_counts[pair] += 1;
            }
            t_prev = t;
            state = s;
        }
        holding[state] += t_end - t_prev;
        for &(tau, ch) in &kernels {
            terminal_gaps[ch].push(t_end - tau);
        }
    }
    let pair_rows = pairs.iter().map(|(i, _)| i).collect();
    Prepared {
        holding,
        upgrade_counts,
        downgrades,
        terminal_gaps,
        pair_rows,
    }
}

impl<F: Real> Prepared<F> {
    /// Exact MPP log-likelihood at (q over pairs, α, β).
    fn log_likelihood(&self, q: &[F], alpha: &[F; 2], beta: &[F; 2]) -> F {
        let mut ll = F::zero();
        for (k, &count) in self.upgrade_counts.iter().enumerate() {
            if count > 0 {
                ll += F::of(count as f64) * q[k].ln();
            }
        }
        for ev in &self.downgrades {
            let mut load = F::zero();
            for ch in 0..2 {
                if alpha[ch] > F::zero() {
                    let w: F = ev.gaps[ch].iter().map(|&g| (-beta[ch] * g).exp()).sum();
                    load += alpha[ch] * beta[ch] * w;
                }
            }
            ll += (q[ev.pair] + load * ev.inv_n_down).ln();
        }
        let mut intensity = vec![F::zero(); self.holding.len()];
        for (k, &row) in self.pair_rows.iter().enumerate() {
            intensity[row] += q[k];
        }
        for (i, &s) in self.holding.iter().enumerate() {
            ll -= intensity[i] * s;
        }
        for ch in 0..2 {
            if alpha[ch] > F::zero() {
                let c: F = self.terminal_gaps[ch]
                    .iter()
                    .map(|&g| F::one() - (-beta[ch] * g).exp())
                    .sum();
                ll -= alpha[ch] * c;
            }
        }
        ll
    }
}

/// log of the Gamma proposal correction ψ(x|x') − ψ(x'|x) for a mean-at-
/// current proposal with shape s; the normalizing Γ(s) cancels.
fn proposal_correction<F: Real>(s: F, current: F, proposed: F) -> F {
    (s + s - F::one()) * (current / proposed).ln()
        + s * (proposed / current - current / proposed)
}

/// One full single-component Metropolis-Hastings sweep: every parameter is
/// proposed from Gamma(shape, mean=current) and accepted against the full
/// conditional. `log_post` must evaluate the joint log-posterior.
pub(crate) fn mh_sweep<F: Real, R: Rng + ?Sized>(
    rng: &mut R,
    params: &mut [F],
    cached_log_post: &mut F,
    shape: F,
    log_post: &mut dyn FnMut(&[F]) -> F,
    accepts: &mut [u64],
) {
    for k in 0..params.len() {
        let current = params[k];
        let proposed = F::gamma(rng, shape, current / shape);
        let u: F = F::open01(rng);
        params[k] = proposed;
        let lp = log_post(params);
        let log_ratio = lp - *cached_log_post + proposal_correction(shape, current, proposed);
        if lp.is_finite() && u.ln() < log_ratio {
            *cached_log_post = lp;
            accepts[k] += 1;
        } else {
            params[k] = current;
        }
    }
}

/// CTMC MLE restricted to each entity's first transition: holding time runs
/// from the start to the first jump (or the terminal when there is none).
pub fn initial_transition_mle<F: Real>(history: &EventHistory<F>) -> (Mat<F>, Vec<F>) {
    let h = history.scale().h();
    let mut jumps: Mat<F> = Mat::zeros(h, h);
    let mut holding = vec![F::zero(); h];
    for tr in history.tracks() {
        match tr.events.first() {
            Some(&(t, s)) => {
                holding[tr.start_state] += t - tr.start_time;
                jumps[(tr.start_state, s)] += F::one();
            }
            None => holding[tr.start_state] += tr.terminal_time() - tr.start_time,
        }
    }
    (jumps, holding)
}

fn observed_pairs<F: Real>(history: &EventHistory<F>) -> Result<AllowedPairs> {
    let h = history.scale().h();
    let mut seen = vec![false; h * h];
    for tr in history.tracks() {
        let mut prev = tr.start_state;
        for &(_, s) in &tr.events {
            seen[prev * h + s] = true;
            prev = s;
        }
    }
    let mut pairs = Vec::new();
    for i in 0..h {
        for j in 0..h {
            if i != j && seen[i * h + j] {
                pairs.push((i, j));
            }
        }
    }
    AllowedPairs::from_pairs(pairs)
        .map_err(|_| Error::Empty("history contains no transitions".into()))
}

/// Calibrates the momentum model on a fully observed history. Returns every
/// chain with post burn-in samples, per-component acceptance rates, and
/// split-R̂ diagnostics (reported, never enforced).
pub fn fit_mcmc<F: Real>(
    history: &EventHistory<F>,
    config: &McmcConfig<F>,
) -> Result<McmcRun<F>> {
    config.validate()?;
    if history.n_transitions() == 0 {
        return Err(Error::Empty("history contains no transitions".into()));
    }
    let scale = history.scale().clone();
    let h = scale.h();
    let d = scale.default_state();
    let pairs = observed_pairs(history)?;
    let na = pairs.len();

    // N_j over the support: downgrade targets that can receive momentum mass.
    let mut n_down = vec![0usize; h];
    for (i, j) in pairs.iter() {
        if j > i {
            n_down[i] += 1;
        }
    }

    // Exponential prior means from the initial-transition MLE, floored.
    let (jumps0, holding0) = initial_transition_mle(history);
    let floor = F::of(PRIOR_MEAN_FLOOR);
    let prior_means: Vec<F> = pairs
        .iter()
        .map(|(i, j)| {
            let m = if holding0[i] > F::zero() {
                jumps0[(i, j)] / holding0[i]
            } else {
                F::zero()
            };
            m.max(floor)
        })
        .collect();

    let prepared = prepare(history, &pairs, &n_down);

    let shape_ab = config.prior_gamma_shape;
    let rate_a = config.prior_alpha_rate;
    let rate_b = config.prior_beta_rate;
    let ln_gamma_shape = F::of(statrs::function::gamma::ln_gamma(shape_ab.as_f64()));
    let prior_means_ref = &prior_means;
    let prepared_ref = &prepared;
    let log_posterior = |params: &[F]| -> F {
        let (q, rest) = params.split_at(na);
        let alpha = [rest[0], rest[1]];
        let beta = [rest[2], rest[3]];
        let mut lp = F::zero();
        for (k, &qk) in q.iter().enumerate() {
            if !(qk > F::zero()) {
                return F::neg_infinity();
            }
            lp += -prior_means_ref[k].ln() - qk / prior_means_ref[k];
        }
        for &x in &[alpha[0], alpha[1]] {
            if !(x > F::zero()) {
                return F::neg_infinity();
            }
            lp += shape_ab * rate_a.ln() - ln_gamma_shape + (shape_ab - F::one()) * x.ln()
                - rate_a * x;
        }
        for &x in &[beta[0], beta[1]] {
            if !(x > F::zero()) {
                return F::neg_infinity();
            }
            lp += shape_ab * rate_b.ln() - ln_gamma_shape + (shape_ab - F::one()) * x.ln()
                - rate_b * x;
        }
        lp + prepared_ref.log_likelihood(q, &alpha, &beta)
    };

    // Initial point: prior means everywhere.
    let mut init: Vec<F> = prior_means.clone();
    init.push(shape_ab / rate_a);
    init.push(shape_ab / rate_a);
    init.push(shape_ab / rate_b);
    init.push(shape_ab / rate_b);
    let lp0 = log_posterior(&init);
    if !lp0.is_finite() {
        return Err(Error::Numerical(
            "log-posterior not finite at the MCMC starting point".into(),
        ));
    }

    let n_params = na + 4;
    let chain_results: Vec<PosteriorChain<F>> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed.wrapping_add(c as u64));
            let mut params = init.clone();
            let mut cached = lp0;
            let mut accepts = vec![0u64; n_params];
            let mut samples = Vec::with_capacity(config.iterations - config.burn_in);
            let mut eval = |p: &[F]| log_posterior(p);
            for it in 0..config.iterations {
                mh_sweep(
                    &mut rng,
                    &mut params,
                    &mut cached,
                    config.proposal_shape,
                    &mut eval,
                    &mut accepts,
                );
                if it >= config.burn_in {
                    samples.push(Sample {
                        q: params[..na].to_vec(),
                        alpha: [params[na], params[na + 1]],
                        beta: [params[na + 2], params[na + 3]],
                        log_posterior: cached,
                    });
                }
            }
            PosteriorChain {
                samples,
                acceptance_rates: accepts
                    .iter()
                    .map(|&a| F::of(a as f64 / config.iterations as f64))
                    .collect(),
                seed: config.seed.wrapping_add(c as u64),
            }
        })
        .collect();

    for chain in &chain_results {
        for (k, &rate) in chain.acceptance_rates.iter().enumerate() {
            if rate == F::zero() {
                return Err(Error::Convergence(format!(
                    "component {k} accepted no moves over the whole run; \
                     the proposal is misconfigured",
                )));
            }
        }
    }

    let mut rhat = Vec::with_capacity(n_params);
    for k in 0..n_params {
        let per_chain: Vec<Vec<F>> = chain_results
            .iter()
            .map(|c| c.samples.iter().map(|s| param_at(s, k, na)).collect())
            .collect();
        rhat.push(split_rank_rhat(&per_chain));
    }

    let _ = d;
    Ok(McmcRun {
        scale,
        pairs,
        chains: chain_results,
        rhat,
        iterations: config.iterations,
        burn_in: config.burn_in,
        seed: config.seed,
    })
}

fn param_at<F: Real>(s: &Sample<F>, k: usize, na: usize) -> F {
    if k < na {
        s.q[k]
    } else {
        match k - na {
            0 => s.alpha[0],
            1 => s.alpha[1],
            2 => s.beta[0],
            _ => s.beta[1],
        }
    }
}

/// Pools the post burn-in samples of every chain into posterior means and
/// equal-tailed credible intervals, and assembles the point-estimate model.
pub fn posterior_summary<F: Real>(run: &McmcRun<F>, level: F) -> Result<PosteriorSummary<F>> {
    let lf = level.as_f64();
    if !(0.0 < lf && lf < 1.0) {
        return Err(Error::Invalid("level must lie in (0,1)".into()));
    }
    let total: usize = run.chains.iter().map(|c| c.samples.len()).sum();
    if total == 0 {
        return Err(Error::Empty("no retained samples to summarize".into()));
    }
    let na = run.pairs.len();
    let names = run.param_names();
    let lo_p = (1.0 - lf) / 2.0;
    let hi_p = 1.0 - lo_p;

    let mut params = Vec::with_capacity(na + 4);
    let mut means = Vec::with_capacity(na + 4);
    for k in 0..na + 4 {
        let mut xs: Vec<F> = run
            .chains
            .iter()
            .flat_map(|c| c.samples.iter().map(|s| param_at(s, k, na)))
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        let mean = xs.iter().copied().sum::<F>() / F::of(total as f64);
        means.push(mean);
        params.push(ParamSummary {
            name: names[k].clone(),
            mean,
            lower: quantile_sorted(&xs, lo_p),
            upper: quantile_sorted(&xs, hi_p),
            rhat: run.rhat[k],
        });
    }

    let h = run.scale.h();
    let mut q = Mat::zeros(h, h);
    for (k, (i, j)) in run.pairs.iter().enumerate() {
        q[(i, j)] = means[k];
    }
    repair_diagonal(&mut q);
    for j in 0..h {
        q[(run.scale.default_state(), j)] = F::zero();
    }
    let base = GeneratorMatrix::new(run.scale.clone(), q)?;
    let model = MomentumModel::new(
        base,
        MomentumParams::new([means[na], means[na + 1]], [means[na + 2], means[na + 3]])?,
    )?;
    Ok(PosteriorSummary {
        model,
        level,
        params,
    })
}
