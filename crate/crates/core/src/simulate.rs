//! Simulation: exact CTMC paths, momentum paths by thinning, Monte-Carlo
//! transition matrices over snapshot horizons, and the empirical cohort
//! estimator.
//!
//! Every firm draws from its own counter-based stream derived from
//! (seed, firm index), so results are bit-identical no matter how work is
//! scheduled across threads.
//!
//! Between events the momentum intensity is non-increasing (the baseline is
//! constant in the occupied state and every kernel decays), so the classic
//! accept/reject scheme applies with the intensity at the last anchor as
//! the dominating rate, refreshed at each rejected candidate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::ctmc::GeneratorMatrix;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::momentum::{channel_of, mark_distribution, MomentumModel};
use crate::num::Real;
use crate::rating::{EntityTrack, EventHistory, RatingScale, Terminal};

#[derive(Debug, Clone)]
pub struct SimConfig<F> {
    pub n_firms_per_rating: usize,
    pub horizon: F,
    /// Horizons at which Monte-Carlo matrices are recorded.
    pub snapshot_grid: Vec<F>,
    pub seed: u64,
    /// Exponential censoring intensity for synthetic-data realism; None
    /// disables withdrawal.
    pub withdrawal_rate: Option<F>,
}

impl<F: Real> SimConfig<F> {
    pub fn new(n_firms_per_rating: usize, horizon: F, seed: u64) -> Self {
        SimConfig {
            n_firms_per_rating,
            horizon,
            snapshot_grid: vec![horizon],
            seed,
            withdrawal_rate: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_firms_per_rating == 0 {
            return Err(Error::Empty("need at least one firm per rating".into()));
        }
        if !(self.horizon > F::zero()) {
            return Err(Error::Invalid("horizon must be positive".into()));
        }
        let mut last = F::zero();
        for &t in &self.snapshot_grid {
            if !(t >= last) {
                return Err(Error::Invalid(
                    "snapshot grid must be ascending and nonnegative".into(),
                ));
            }
            last = t;
        }
        if let Some(&max) = self
            .snapshot_grid
            .iter()
            .max_by(|a, b| a.partial_cmp(b).unwrap())
        {
            if max > self.horizon {
                return Err(Error::Invalid(
                    "snapshot grid extends beyond the horizon".into(),
                ));
            }
        }
        if let Some(w) = self.withdrawal_rate {
            if !(w >= F::zero()) {
                return Err(Error::Invalid("withdrawal rate must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Independent per-firm stream: same (seed, firm) always yields the same
/// draws, regardless of scheduling.
pub fn firm_rng(seed: u64, firm: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(firm);
    rng
}

/// An accepted jump from the thinning sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDraw<F> {
    pub time: F,
    pub to: usize,
}

/// Samples the next event of a firm sitting in `state` since `from_time`
/// with the given active downgrade kernels (time, channel). Returns None if
/// no event occurs before `until`.
pub fn next_jump<F: Real, R: Rng + ?Sized>(
    model: &MomentumModel<F>,
    state: usize,
    kernels: &[(F, usize)],
    from_time: F,
    until: F,
    rng: &mut R,
) -> Option<JumpDraw<F>> {
    let params = model.params();
    let baseline = model.base().state_intensity(state);
    let load_at = |t: F, inclusive: bool| -> F {
        let mut m = F::zero();
        for &(tau, ch) in kernels {
            if tau < t || (inclusive && tau == t) {
                m += params.beta[ch] * params.alpha[ch] * (-params.beta[ch] * (t - tau)).exp();
            }
        }
        m
    };
    let mut anchor = from_time;
    let mut bound = baseline + load_at(anchor, true);
    loop {
        if !(bound > F::zero()) {
            return None;
        }
        let s = anchor + F::std_exp(rng) / bound;
        if s >= until {
            return None;
        }
        let lambda = baseline + load_at(s, false);
        debug_assert!(lambda <= bound * (F::one() + F::of(1e-12)));
        let u: F = F::open01(rng);
        if u * bound <= lambda {
            // accepted: draw the destination from the mark distribution
            let dist = mark_distribution(model, state, load_at(s, false));
            let mut pick: F = F::open01(rng);
            let mut dest = dist.last().expect("validated model has targets").0;
            for &(k, p) in &dist {
                pick -= p;
                if pick <= F::zero() {
                    dest = k;
                    break;
                }
            }
            return Some(JumpDraw { time: s, to: dest });
        }
        anchor = s;
        bound = lambda;
    }
}

fn starting_states(scale: &RatingScale, n_per_rating: usize) -> Vec<usize> {
    let d = scale.default_state();
    (0..scale.h())
        .filter(|&i| i != d)
        .flat_map(|i| std::iter::repeat_n(i, n_per_rating))
        .collect()
}

fn simulate_history<F: Real>(
    scale: &RatingScale,
    config: &SimConfig<F>,
    simulate_firm: impl Fn(u64, usize, &mut ChaCha12Rng) -> EntityTrack<F> + Sync,
) -> Result<EventHistory<F>> {
    config.validate()?;
    let starts = starting_states(scale, config.n_firms_per_rating);
    let tracks: Vec<EntityTrack<F>> = starts
        .par_iter()
        .enumerate()
        .map(|(firm, &state)| {
            let mut rng = firm_rng(config.seed, firm as u64);
            simulate_firm(firm as u64, state, &mut rng)
        })
        .collect();
    EventHistory::new(scale.clone(), tracks)
}

fn ctmc_track<F: Real>(
    generator: &GeneratorMatrix<F>,
    config: &SimConfig<F>,
    firm: u64,
    start: usize,
    rng: &mut ChaCha12Rng,
) -> EntityTrack<F> {
    let d = generator.scale().default_state();
    let censor = config
        .withdrawal_rate
        .filter(|&w| w > F::zero())
        .map(|w| F::std_exp(rng) / w);
    let cutoff = match censor {
        Some(c) if c < config.horizon => c,
        _ => config.horizon,
    };
    let mut t = F::zero();
    let mut state = start;
    let mut events = Vec::new();
    let terminal = loop {
        let rate = generator.state_intensity(state);
        if !(rate > F::zero()) {
            break end_of_observation(censor, config.horizon);
        }
        let t_next = t + F::std_exp(rng) / rate;
        if t_next >= cutoff {
            break end_of_observation(censor, config.horizon);
        }
        // embedded-chain destination
        let mut pick: F = F::open01(rng) * rate;
        let mut dest = state;
        for j in 0..generator.h() {
            if j == state {
                continue;
            }
            let q = generator.rate(state, j);
            if q > F::zero() {
                pick -= q;
                dest = j;
                if pick <= F::zero() {
                    break;
                }
            }
        }
        events.push((t_next, dest));
        t = t_next;
        state = dest;
        if state == d {
            break Terminal::Defaulted(t);
        }
    };
    EntityTrack {
        entity_id: format!("f{firm:07}"),
        start_time: F::zero(),
        start_state: start,
        events,
        terminal,
    }
}

fn end_of_observation<F: Real>(censor: Option<F>, horizon: F) -> Terminal<F> {
    match censor {
        Some(c) if c < horizon => Terminal::Censored(c),
        _ => Terminal::Open(horizon),
    }
}

fn momentum_track<F: Real>(
    model: &MomentumModel<F>,
    config: &SimConfig<F>,
    firm: u64,
    start: usize,
    rng: &mut ChaCha12Rng,
) -> EntityTrack<F> {
    let scale = model.scale();
    let d = scale.default_state();
    let censor = config
        .withdrawal_rate
        .filter(|&w| w > F::zero())
        .map(|w| F::std_exp(rng) / w);
    let cutoff = match censor {
        Some(c) if c < config.horizon => c,
        _ => config.horizon,
    };
    let mut t = F::zero();
    let mut state = start;
    let mut kernels: Vec<(F, usize)> = Vec::new();
    let mut events = Vec::new();
    let terminal = loop {
        match next_jump(model, state, &kernels, t, cutoff, rng) {
            None => break end_of_observation(censor, config.horizon),
            Some(jump) => {
                events.push((jump.time, jump.to));
                if jump.to > state {
                    kernels.push((jump.time, channel_of(scale, state)));
                }
                t = jump.time;
                state = jump.to;
                if state == d {
                    break Terminal::Defaulted(t);
                }
            }
        }
    };
    EntityTrack {
        entity_id: format!("f{firm:07}"),
        start_time: F::zero(),
        start_state: start,
        events,
        terminal,
    }
}

/// Exact CTMC simulation: exponential holding times, embedded-chain jumps,
/// stopped at default, withdrawal, or the horizon.
pub fn simulate_ctmc<F: Real>(
    generator: &GeneratorMatrix<F>,
    config: &SimConfig<F>,
) -> Result<EventHistory<F>> {
    simulate_history(generator.scale(), config, |firm, start, rng| {
        ctmc_track(generator, config, firm, start, rng)
    })
}

/// Momentum-model simulation by accept/reject thinning of the varying
/// intensity. Reduces to [`simulate_ctmc`] in distribution when α = 0.
pub fn simulate_momentum<F: Real>(
    model: &MomentumModel<F>,
    config: &SimConfig<F>,
) -> Result<EventHistory<F>> {
    simulate_history(model.scale(), config, |firm, start, rng| {
        momentum_track(model, config, firm, start, rng)
    })
}

/// Which dynamics to run a Monte-Carlo study under.
#[derive(Debug, Clone, Copy)]
pub enum SimModel<'a, F> {
    Markov(&'a GeneratorMatrix<F>),
    Momentum(&'a MomentumModel<F>),
}

impl<'a, F: Real> SimModel<'a, F> {
    pub fn scale(&self) -> &RatingScale {
        match self {
            SimModel::Markov(g) => g.scale(),
            SimModel::Momentum(m) => m.scale(),
        }
    }
}

/// Empirical state distribution at one snapshot horizon, conditional on the
/// initial rating, with binomial standard errors.
#[derive(Debug, Clone)]
pub struct TpmEstimate<F> {
    pub t: F,
    pub p: Mat<F>,
    pub se: Mat<F>,
    /// Firms simulated per initial rating (the default row is a convention
    /// row with no firms).
    pub row_counts: Vec<usize>,
}

/// `t,from,to,p,se` rows for a set of snapshot estimates.
pub fn tpm_estimates_to_csv<F: Real>(estimates: &[TpmEstimate<F>], scale: &RatingScale) -> String {
    let mut out = String::from("t,from,to,p,se\n");
    let h = scale.h();
    for est in estimates {
        for i in 0..h {
            for j in 0..h {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    est.t,
                    scale.label(i),
                    scale.label(j),
                    est.p[(i, j)],
                    est.se[(i, j)]
                ));
            }
        }
    }
    out
}

/// Monte-Carlo transition matrices: evolves `n_firms_per_rating` firms from
/// each non-default rating (withdrawal disabled) and records the state at
/// each snapshot. The default row is the unit vector by convention.
pub fn monte_carlo_tpm<F: Real>(
    model: SimModel<'_, F>,
    config: &SimConfig<F>,
) -> Result<Vec<TpmEstimate<F>>> {
    config.validate()?;
    if config.snapshot_grid.is_empty() {
        return Err(Error::Invalid("snapshot grid is empty".into()));
    }
    let scale = model.scale().clone();
    let h = scale.h();
    let d = scale.default_state();
    let n = config.n_firms_per_rating;
    let grid = config.snapshot_grid.clone();
    let n_snap = grid.len();

    let starts = starting_states(&scale, n);
    const BLOCK: usize = 2048;
    let blocks: Vec<(usize, usize)> = (0..starts.len())
        .step_by(BLOCK)
        .map(|lo| (lo, (lo + BLOCK).min(starts.len())))
        .collect();

    // counts[snapshot][from][to]
    let zero = || vec![vec![vec![0u64; h]; h]; n_snap];
    let partials: Vec<Vec<Vec<Vec<u64>>>> = blocks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut counts = zero();
            for firm in lo..hi {
                let start = starts[firm];
                let mut rng = firm_rng(config.seed, firm as u64);
                let mut sim_cfg = config.clone();
                sim_cfg.withdrawal_rate = None;
                let track = match model {
                    SimModel::Markov(g) => ctmc_track(g, &sim_cfg, firm as u64, start, &mut rng),
                    SimModel::Momentum(m) => {
                        momentum_track(m, &sim_cfg, firm as u64, start, &mut rng)
                    }
                };
                // walk the path once, reading the state at each snapshot
                let mut snap = 0usize;
                let mut state = start;
                for &(te, se) in &track.events {
                    while snap < n_snap && grid[snap] < te {
                        counts[snap][start][state] += 1;
                        snap += 1;
                    }
                    state = se;
                }
                while snap < n_snap {
                    counts[snap][start][state] += 1;
                    snap += 1;
                }
            }
            counts
        })
        .collect();

    let mut counts = zero();
    for part in partials {
        for s in 0..n_snap {
            for i in 0..h {
                for j in 0..h {
                    counts[s][i][j] += part[s][i][j];
                }
            }
        }
    }

    let nf = F::of(n as f64);
    let mut out = Vec::with_capacity(n_snap);
    for (s, &t) in grid.iter().enumerate() {
        let mut p = Mat::zeros(h, h);
        let mut se = Mat::zeros(h, h);
        for i in 0..h {
            if i == d {
                p[(i, d)] = F::one();
                continue;
            }
            for j in 0..h {
                let phat = F::of(counts[s][i][j] as f64) / nf;
                p[(i, j)] = phat;
                se[(i, j)] = (phat * (F::one() - phat) / nf).sqrt();
            }
        }
        let mut row_counts = vec![n; h];
        row_counts[d] = 0;
        out.push(TpmEstimate {
            t,
            p,
            se,
            row_counts,
        });
    }
    Ok(out)
}

/// Cohort estimator over a fully observed history: every entity that either
/// defaulted or stayed under observation through its own start + T
/// contributes its start rating vs its rating at start + T. Defaults are
/// kept once they occur. Rows never observed stay zero with a zero count.
pub fn empirical_tpm<F: Real>(history: &EventHistory<F>, t_horizon: F) -> Result<TpmEstimate<F>> {
    if !(t_horizon > F::zero()) {
        return Err(Error::Invalid("cohort horizon must be positive".into()));
    }
    let scale = history.scale();
    let h = scale.h();
    let d = scale.default_state();
    let mut counts = vec![vec![0u64; h]; h];
    let mut qualifying = 0usize;
    for tr in history.tracks() {
        let target = tr.start_time + t_horizon;
        let qualifies = match tr.terminal {
            Terminal::Defaulted(_) => true,
            Terminal::Censored(tc) => tc >= target,
            Terminal::Open(te) => te >= target,
        };
        if !qualifies {
            continue;
        }
        let state = tr.state_at(target).expect("target is after the start");
        counts[tr.start_state][state] += 1;
        qualifying += 1;
    }
    if qualifying == 0 {
        return Err(Error::Empty(
            "no entity is observed (or defaulted) through the cohort horizon".into(),
        ));
    }
    let mut p = Mat::zeros(h, h);
    let mut se = Mat::zeros(h, h);
    let mut row_counts = vec![0usize; h];
    for i in 0..h {
        let total: u64 = counts[i].iter().sum();
        row_counts[i] = total as usize;
        if total == 0 {
            if i == d {
                p[(i, d)] = F::one();
            }
            continue;
        }
        let tf = F::of(total as f64);
        for j in 0..h {
            let phat = F::of(counts[i][j] as f64) / tf;
            p[(i, j)] = phat;
            se[(i, j)] = (phat * (F::one() - phat) / tf).sqrt();
        }
    }
    Ok(TpmEstimate {
        t: t_horizon,
        p,
        se,
        row_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::mle_continuous;
    use crate::momentum::MomentumParams;
    use crate::presets;
    use crate::rating::RatingScale;

    fn scale2() -> RatingScale {
        RatingScale::new(vec!["A".into(), "C".into()], "WR", None).unwrap()
    }

    fn absorbing2(a: f64) -> GeneratorMatrix<f64> {
        let q = Mat::from_rows_f64(&[vec![-a, a], vec![0.0, 0.0]]).unwrap();
        GeneratorMatrix::new(scale2(), q).unwrap()
    }

    #[test]
    fn zero_rows_hold_to_horizon() {
        let s = scale2();
        let q = Mat::from_rows_f64(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let g = GeneratorMatrix::new(s, q).unwrap();
        let history = simulate_ctmc(&g, &SimConfig::new(50, 5.0, 1)).unwrap();
        assert_eq!(history.tracks().len(), 50);
        for tr in history.tracks() {
            assert!(tr.events.is_empty());
            assert_eq!(tr.terminal, Terminal::Open(5.0));
        }
    }

    #[test]
    fn absorbing_default_fraction_matches_exponential_law() {
        let g = absorbing2(0.3);
        let n = 100_000;
        let history = simulate_ctmc(&g, &SimConfig::new(n, 1.0, 99)).unwrap();
        let defaults = history
            .tracks()
            .iter()
            .filter(|t| matches!(t.terminal, Terminal::Defaulted(_)))
            .count();
        let p = 1.0 - (-0.3f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let phat = defaults as f64 / n as f64;
        assert!(
            (phat - p).abs() < 3.0 * se,
            "default fraction {phat} vs {p} (se {se})"
        );
    }

    #[test]
    fn same_seed_same_history_any_thread_count() {
        let g = presets::calibrated_generator::<f64>();
        let config = SimConfig::new(500, 5.0, 7);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let h1 = pool1.install(|| simulate_ctmc(&g, &config).unwrap());
        let h4 = pool4.install(|| simulate_ctmc(&g, &config).unwrap());
        assert_eq!(h1, h4);
        let m = presets::calibrated_momentum_model::<f64>();
        let m1 = pool1.install(|| simulate_momentum(&m, &config).unwrap());
        let m4 = pool4.install(|| simulate_momentum(&m, &config).unwrap());
        assert_eq!(m1, m4);
    }

    #[test]
    fn mle_recovers_generator_from_simulation() {
        let g = presets::calibrated_generator::<f64>();
        // ~8 * 2500 * 10 = 2e5 firm-years
        let config = SimConfig::new(2500, 10.0, 21);
        let history = simulate_ctmc(&g, &config).unwrap();
        let est = mle_continuous(&history).unwrap();
        let stats = crate::ctmc::path_statistics(&history);
        for i in 0..8 {
            for j in 0..9 {
                if i == j || g.rate(i, j) == 0.0 {
                    continue;
                }
                // Poisson-count standard error of K/S
                let se = (g.rate(i, j) / stats.holding[i]).sqrt();
                assert!(
                    (est.rate(i, j) - g.rate(i, j)).abs() < 3.5 * se + 1e-4,
                    "entry ({i},{j}): {} vs {} (se {se})",
                    est.rate(i, j),
                    g.rate(i, j)
                );
            }
        }
    }

    #[test]
    fn withdrawal_censors_tracks() {
        let g = presets::calibrated_generator::<f64>();
        let mut config = SimConfig::new(400, 10.0, 5);
        config.withdrawal_rate = Some(0.3);
        let history = simulate_ctmc(&g, &config).unwrap();
        let censored = history
            .tracks()
            .iter()
            .filter(|t| matches!(t.terminal, Terminal::Censored(_)))
            .count();
        // P(censor < 10y) = 1 - e^{-3} ≈ 0.95, modulo prior defaults
        assert!(censored > history.tracks().len() / 2);
        for tr in history.tracks() {
            if let Terminal::Censored(tc) = tr.terminal {
                assert!(tc < 10.0);
            }
        }
    }

    #[test]
    fn momentum_alpha_zero_matches_ctmc_distribution() {
        // Smoke-scale version of the acceptance check: 1y state distribution
        // from thinning at α=0 agrees with the exact CTMC simulator.
        let base = presets::calibrated_generator::<f64>();
        let model =
            MomentumModel::new(base.clone(), MomentumParams::zero_alpha([3.5234, 1.7095]))
                .unwrap();
        let config = SimConfig {
            n_firms_per_rating: 20_000,
            horizon: 1.0,
            snapshot_grid: vec![1.0],
            seed: 17,
            withdrawal_rate: None,
        };
        let mc_momentum = monte_carlo_tpm(SimModel::Momentum(&model), &config).unwrap();
        let mut config2 = config.clone();
        config2.seed = 18;
        let mc_markov = monte_carlo_tpm(SimModel::Markov(&base), &config2).unwrap();
        let (a, b) = (&mc_momentum[0], &mc_markov[0]);
        for i in 0..8 {
            for j in 0..9 {
                let se = (a.se[(i, j)].powi(2) + b.se[(i, j)].powi(2)).sqrt();
                let diff = (a.p[(i, j)] - b.p[(i, j)]).abs();
                assert!(
                    diff <= 4.0 * se + 6.0 / config.n_firms_per_rating as f64,
                    "cell ({i},{j}): {} vs {} (se {se})",
                    a.p[(i, j)],
                    b.p[(i, j)]
                );
            }
        }
    }

    #[test]
    fn monte_carlo_matches_analytic_tpm() {
        let g = presets::calibrated_generator::<f64>();
        let config = SimConfig {
            n_firms_per_rating: 50_000,
            horizon: 5.0,
            snapshot_grid: vec![1.0, 5.0],
            seed: 4,
            withdrawal_rate: None,
        };
        let estimates = monte_carlo_tpm(SimModel::Markov(&g), &config).unwrap();
        let n = config.n_firms_per_rating as f64;
        for est in &estimates {
            let exact = g.tpm(est.t).unwrap();
            for i in 0..8 {
                for j in 0..9 {
                    // binomial error at the true cell probability, with a
                    // small absolute count slack for near-empty cells where
                    // the normal approximation fails
                    let se = (exact[(i, j)] * (1.0 - exact[(i, j)]) / n).sqrt();
                    assert!(
                        (est.p[(i, j)] - exact[(i, j)]).abs() <= 4.0 * se + 6.0 / n,
                        "t={} cell ({i},{j}): {} vs {}",
                        est.t,
                        est.p[(i, j)],
                        exact[(i, j)]
                    );
                }
            }
            // rows are frequencies, so they sum to one exactly
            for i in 0..9 {
                assert!((est.p.row_sum(i) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn snapshot_at_zero_is_identity() {
        let g = presets::calibrated_generator::<f64>();
        let config = SimConfig {
            n_firms_per_rating: 100,
            horizon: 1.0,
            snapshot_grid: vec![0.0, 1.0],
            seed: 2,
            withdrawal_rate: None,
        };
        let estimates = monte_carlo_tpm(SimModel::Markov(&g), &config).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(estimates[0].p[(i, j)], expect);
            }
        }
    }

    #[test]
    fn empirical_tpm_all_defaults_concentrate() {
        let s = presets::corporate_scale();
        let tracks: Vec<EntityTrack<f64>> = (0..10)
            .map(|k| EntityTrack {
                entity_id: format!("e{k}"),
                start_time: 0.0,
                start_state: 2,
                events: vec![(0.25 + 0.01 * k as f64, 8)],
                terminal: Terminal::Defaulted(0.25 + 0.01 * k as f64),
            })
            .collect();
        let history = EventHistory::new(s, tracks).unwrap();
        let est = empirical_tpm(&history, 1.0).unwrap();
        assert_eq!(est.row_counts[2], 10);
        assert_eq!(est.p[(2, 8)], 1.0);
    }

    #[test]
    fn empirical_tpm_matches_analytic_on_simulated_data() {
        let g = presets::calibrated_generator::<f64>();
        let config = SimConfig::new(30_000, 1.0, 33);
        let history = simulate_ctmc(&g, &config).unwrap();
        let est = empirical_tpm(&history, 1.0).unwrap();
        let exact = g.tpm(1.0).unwrap();
        let n = config.n_firms_per_rating as f64;
        for i in 0..8 {
            for j in 0..9 {
                let se = (exact[(i, j)] * (1.0 - exact[(i, j)]) / n).sqrt();
                assert!(
                    (est.p[(i, j)] - exact[(i, j)]).abs() <= 4.0 * se + 6.0 / n,
                    "cell ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn empirical_tpm_requires_coverage() {
        let s = presets::corporate_scale();
        let tracks = vec![EntityTrack::<f64> {
            entity_id: "e".into(),
            start_time: 0.0,
            start_state: 2,
            events: vec![],
            terminal: Terminal::Censored(0.5),
        }];
        let history = EventHistory::new(s, tracks).unwrap();
        assert!(matches!(empirical_tpm(&history, 1.0), Err(Error::Empty(_))));
    }

    #[test]
    fn history_round_trips_through_csv() {
        let m = presets::calibrated_momentum_model::<f64>();
        let mut config = SimConfig::new(60, 6.0, 12);
        config.withdrawal_rate = Some(0.1);
        let history = simulate_momentum(&m, &config).unwrap();
        let text = history.to_csv_string();
        let back = EventHistory::parse_csv_str(&text, m.scale(), "sim").unwrap();
        assert_eq!(history, back);
    }
}
