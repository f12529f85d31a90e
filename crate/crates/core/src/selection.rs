//! Model comparison: BIC between the Markov and momentum models on a fully
//! observed history, and the semi-parametric hazard test for momentum.
//!
//! The hazard test fits λ_in(t) = q_i(t)·exp(c·Z_n(t)) by maximizing the
//! stratified Cox partial likelihood: strata are the occupied rating (so the
//! baseline stays unspecified), events are the transitions of the tested
//! direction, risk sets are the firms occupying the stratum at the event
//! time, and Z marks whether the firm entered its current state by a move of
//! that same direction. Ties are handled by Breslow's approximation; the
//! p-value is a likelihood-ratio test of c = 0 against χ²₁.

use serde::Serialize;

use crate::ctmc::{complete_data_log_likelihood, GeneratorMatrix};
use crate::error::{Error, Result};
use crate::momentum::{mpp_log_likelihood, MomentumModel};
use crate::num::Real;
use crate::rating::{EventHistory, Terminal};
use crate::stats::chi2_1_sf;

/// BIC(M) = 2 log L − log(n)·dim(M); larger is better, and a difference
/// above 10 is conventionally very strong evidence.
#[derive(Debug, Clone, Serialize)]
pub struct BicReport<F> {
    pub loglik_markov: F,
    pub loglik_momentum: F,
    /// Number of observed rating transitions (the likelihood's atoms).
    pub n: usize,
    pub dim_markov: usize,
    pub dim_momentum: usize,
    pub bic_markov: F,
    pub bic_momentum: F,
    /// bic_momentum − bic_markov.
    pub difference: F,
}

impl<F: Real> BicReport<F> {
    pub fn to_json_string(&self) -> String {
        let v = serde_json::json!({
            "loglik_markov": self.loglik_markov.as_f64(),
            "loglik_momentum": self.loglik_momentum.as_f64(),
            "n": self.n,
            "dim_markov": self.dim_markov,
            "dim_momentum": self.dim_momentum,
            "bic_markov": self.bic_markov.as_f64(),
            "bic_momentum": self.bic_momentum.as_f64(),
            "difference": self.difference.as_f64(),
        });
        serde_json::to_string_pretty(&v).expect("report serializes")
    }
}

/// What counts as a data point in the log(n) penalty. Transitions are the
/// likelihood's atoms and the default; firms is the conservative
/// alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BicCount {
    Events,
    Firms,
}

/// Compares the two models on the same history through their exact
/// complete-data likelihoods, with n = number of observed transitions.
pub fn bic_compare<F: Real>(
    history: &EventHistory<F>,
    markov: &GeneratorMatrix<F>,
    momentum: &MomentumModel<F>,
) -> Result<BicReport<F>> {
    bic_compare_with(history, markov, momentum, BicCount::Events)
}

/// [`bic_compare`] with an explicit choice of the penalty's n.
pub fn bic_compare_with<F: Real>(
    history: &EventHistory<F>,
    markov: &GeneratorMatrix<F>,
    momentum: &MomentumModel<F>,
    count: BicCount,
) -> Result<BicReport<F>> {
    let n = match count {
        BicCount::Events => history.n_transitions(),
        BicCount::Firms => history.tracks().len(),
    };
    if history.n_transitions() == 0 {
        return Err(Error::Empty("history contains no transitions".into()));
    }
    let loglik_markov = complete_data_log_likelihood(markov, history)?;
    let loglik_momentum = mpp_log_likelihood(momentum, history)?;
    let count_positive = |g: &GeneratorMatrix<F>| {
        let h = g.h();
        let mut c = 0usize;
        for i in 0..h {
            for j in 0..h {
                if i != j && g.rate(i, j) > F::zero() {
                    c += 1;
                }
            }
        }
        c
    };
    let dim_markov = count_positive(markov);
    let dim_momentum = count_positive(momentum.base()) + 4;
    let ln_n = F::of((n as f64).ln());
    let two = F::of(2.0);
    let bic_markov = two * loglik_markov - ln_n * F::of(dim_markov as f64);
    let bic_momentum = two * loglik_momentum - ln_n * F::of(dim_momentum as f64);
    Ok(BicReport {
        loglik_markov,
        loglik_momentum,
        n,
        dim_markov,
        dim_momentum,
        bic_markov,
        bic_momentum,
        difference: bic_momentum - bic_markov,
    })
}

/// Direction of the tested momentum effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downward,
    Upward,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoxTestResult<F> {
    pub direction: Direction,
    /// Fitted log-hazard-ratio c.
    pub coefficient: F,
    /// Likelihood-ratio p-value against c = 0.
    pub p_value: F,
    pub loglik_null: F,
    pub loglik_alt: F,
}

impl<F: Real> CoxTestResult<F> {
    pub fn to_json_string(&self) -> String {
        let v = serde_json::json!({
            "direction": self.direction,
            "coefficient": self.coefficient.as_f64(),
            "p_value": self.p_value.as_f64(),
            "loglik_null": self.loglik_null.as_f64(),
            "loglik_alt": self.loglik_alt.as_f64(),
        });
        serde_json::to_string_pretty(&v).expect("result serializes")
    }
}

/// One occupancy spell of one firm in one stratum.
struct Spell<F> {
    stratum: usize,
    entry: F,
    exit: F,
    /// Firm entered this state by a transition of the tested direction.
    z: bool,
    /// The spell ends with a transition of the tested direction.
    event: bool,
}

fn spells<F: Real>(history: &EventHistory<F>, direction: Direction) -> Vec<Spell<F>> {
    let mut out = Vec::new();
    let is_tested = |from: usize, to: usize| match direction {
        Direction::Downward => to > from,
        Direction::Upward => to < from,
    };
    for tr in history.tracks() {
        let mut entry = tr.start_time;
        let mut state = tr.start_state;
        let mut z = false; // no imputed pre-sample history
        for &(t, s) in &tr.events {
            out.push(Spell {
                stratum: state,
                entry,
                exit: t,
                z,
                event: is_tested(state, s),
            });
            z = is_tested(state, s);
            entry = t;
            state = s;
        }
        let t_end = tr.terminal_time();
        if t_end > entry && !matches!(tr.terminal, Terminal::Defaulted(_)) {
            out.push(Spell {
                stratum: state,
                entry,
                exit: t_end,
                z,
                event: false,
            });
        }
    }
    out
}

/// Per-event risk-set composition: number at risk with Z=0 and Z=1, plus
/// the event's own covariate. At risk at time t means entry < t ≤ exit.
struct EventTerm {
    n0: f64,
    n1: f64,
    z: bool,
}

fn event_terms<F: Real>(all: &[Spell<F>], h: usize) -> Vec<EventTerm> {
    let mut terms = Vec::new();
    for stratum in 0..h {
        let spells: Vec<&Spell<F>> = all.iter().filter(|s| s.stratum == stratum).collect();
        let mut events: Vec<(F, bool)> = spells
            .iter()
            .filter(|s| s.event)
            .map(|s| (s.exit, s.z))
            .collect();
        if events.is_empty() {
            continue; // stratum contributes nothing
        }
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
        // sweep entries and exits against the ordered event times
        let mut entries: Vec<(F, bool)> = spells.iter().map(|s| (s.entry, s.z)).collect();
        let mut exits: Vec<(F, bool)> = spells.iter().map(|s| (s.exit, s.z)).collect();
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
        exits.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
        let (mut ei, mut xi) = (0usize, 0usize);
        let (mut in0, mut in1) = (0f64, 0f64); // entered so far
        let (mut out0, mut out1) = (0f64, 0f64); // left strictly before t
        for (t, z) in events {
            while ei < entries.len() && entries[ei].0 < t {
                if entries[ei].1 {
                    in1 += 1.0;
                } else {
                    in0 += 1.0;
                }
                ei += 1;
            }
            while xi < exits.len() && exits[xi].0 < t {
                if exits[xi].1 {
                    out1 += 1.0;
                } else {
                    out0 += 1.0;
                }
                xi += 1;
            }
            terms.push(EventTerm {
                n0: in0 - out0,
                n1: in1 - out1,
                z,
            });
        }
    }
    terms
}

fn partial_loglik(terms: &[EventTerm], c: f64) -> f64 {
    let ec = c.exp();
    terms
        .iter()
        .map(|t| {
            let denom = t.n0 + t.n1 * ec;
            (if t.z { c } else { 0.0 }) - denom.ln()
        })
        .sum()
}

/// Fits the scalar momentum coefficient by Newton iteration on the
/// stratified partial likelihood and reports the likelihood-ratio test.
pub fn cox_momentum_test<F: Real>(
    history: &EventHistory<F>,
    direction: Direction,
) -> Result<CoxTestResult<F>> {
    let h = history.scale().h();
    let all = spells(history, direction);
    let terms = event_terms(&all, h);
    if terms.is_empty() {
        return Err(Error::Empty(format!(
            "history has no {} transitions to test",
            match direction {
                Direction::Downward => "downward",
                Direction::Upward => "upward",
            }
        )));
    }

    let mut c = 0.0f64;
    let mut converged = false;
    for _ in 0..100 {
        let ec = c.exp();
        let mut score = 0.0;
        let mut info = 0.0;
        for t in &terms {
            let denom = t.n0 + t.n1 * ec;
            let mean = t.n1 * ec / denom;
            score += (if t.z { 1.0 } else { 0.0 }) - mean;
            info += mean * (1.0 - mean);
        }
        if info <= 0.0 {
            // covariate constant within every risk set: c = 0 exactly
            c = 0.0;
            converged = true;
            break;
        }
        let step = score / info;
        c += step.clamp(-2.0, 2.0);
        if step.abs() < 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(
            "Newton iteration for the momentum coefficient did not converge".into(),
        ));
    }

    let loglik_null = partial_loglik(&terms, 0.0);
    let loglik_alt = partial_loglik(&terms, c);
    let mut lr = 2.0 * (loglik_alt - loglik_null);
    if lr < 0.0 {
        if lr < -1e-10 {
            return Err(Error::Numerical(format!(
                "negative likelihood ratio {lr} in the momentum test"
            )));
        }
        lr = 0.0;
    }
    Ok(CoxTestResult {
        direction,
        coefficient: F::of(c),
        p_value: F::of(chi2_1_sf(lr)),
        loglik_null: F::of(loglik_null),
        loglik_alt: F::of(loglik_alt),
    })
}
