//! Self-exciting marked point process for downward rating momentum.
//!
//! The ground intensity of an entity sitting in state j is
//!
//! ```text
//! λ_g(t) = q_j + M(t),   M(t) = Σ_m Σ_{τ ∈ τ_m(t)} β_m α_m e^{−β_m (t−τ)}
//! ```
//!
//! where τ_m(t) are the entity's own downgrade times strictly before t,
//! typed by the block the downgrade left: channel 1 when the pre-downgrade
//! rating was investment grade, channel 2 otherwise. Upgrades never excite,
//! no history before an entity's first rating is imputed, and an upgrade
//! does not purge previously accumulated kernels.
//!
//! At a jump from j to k the event factor of the likelihood is
//! `q_jk + M(t)/N_j` for downgrades (N_j counts the reachable downgrade
//! targets, i.e. k > j with q_jk > 0) and `q_jk` for upgrades; the exact
//! per-entity log-likelihood subtracts the compensator, whose momentum part
//! integrates in closed form to `Σ_m Σ_τ α_m (1 − e^{−β_m (T−τ)})`.
//!
//! The mark distribution used for simulation spreads the momentum mass
//! `M/N_j` over the reachable downgrade targets only, so it sums to one;
//! the likelihood keeps the displayed event factor verbatim (a downgrade
//! into a zero-rate state still carries its momentum share).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ctmc::GeneratorMatrix;
use crate::error::{Error, ImpossibleTransition, Result};
use crate::linalg::Mat;
use crate::num::Real;
use crate::rating::{EntityTrack, EventHistory, RatingScale};

/// Momentum mass (α) and decay (β) per channel; index 0 is the investment
/// channel, index 1 the speculative one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumParams<F> {
    pub alpha: [F; 2],
    pub beta: [F; 2],
}

impl<F: Real> MomentumParams<F> {
    pub fn new(alpha: [F; 2], beta: [F; 2]) -> Result<Self> {
        for m in 0..2 {
            if !(alpha[m] >= F::zero()) || !alpha[m].is_finite() {
                return Err(Error::Invalid(format!(
                    "alpha[{m}] must be finite and >= 0, got {}",
                    alpha[m]
                )));
            }
            if !(beta[m] > F::zero()) || !beta[m].is_finite() {
                return Err(Error::Invalid(format!(
                    "beta[{m}] must be finite and > 0, got {}",
                    beta[m]
                )));
            }
        }
        Ok(MomentumParams { alpha, beta })
    }

    pub fn zero_alpha(beta: [F; 2]) -> Self {
        MomentumParams {
            alpha: [F::zero(); 2],
            beta,
        }
    }
}

/// Baseline generator plus momentum parameters. The generator supplies the
/// baseline intensities q_j, the jump rates q_jk, and (through its scale)
/// the investment/speculative split.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumModel<F> {
    base: GeneratorMatrix<F>,
    params: MomentumParams<F>,
    /// N_j = #{k > j : q_jk > 0} per state.
    n_down: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    q: Vec<Vec<f64>>,
    alpha: [f64; 2],
    beta: [f64; 2],
    scale: serde_json::Value,
}

impl<F: Real> MomentumModel<F> {
    pub fn new(base: GeneratorMatrix<F>, params: MomentumParams<F>) -> Result<Self> {
        let h = base.h();
        let d = base.scale().default_state();
        let mut n_down = vec![0usize; h];
        for j in 0..h {
            n_down[j] = ((j + 1)..h).filter(|&k| base.rate(j, k) > F::zero()).count();
        }
        // Every occupiable non-default state must have a downgrade target,
        // otherwise the momentum mass has nowhere to go.
        for j in 0..h {
            if j != d && base.state_intensity(j) > F::zero() && n_down[j] == 0 {
                return Err(Error::Invalid(format!(
                    "state {} has positive intensity but no downgrade target",
                    base.scale().label(j)
                )));
            }
        }
        Ok(MomentumModel {
            base,
            params,
            n_down,
        })
    }

    pub fn base(&self) -> &GeneratorMatrix<F> {
        &self.base
    }

    pub fn params(&self) -> &MomentumParams<F> {
        &self.params
    }

    pub fn scale(&self) -> &RatingScale {
        self.base.scale()
    }

    /// Number of reachable downgrade targets from state j.
    pub fn n_down(&self, j: usize) -> usize {
        self.n_down[j]
    }

    pub fn to_json_string(&self) -> String {
        let scale_json: serde_json::Value =
            serde_json::from_str(&self.scale().to_json_string()).expect("scale json");
        let raw = ModelJson {
            q: self.base.matrix().to_rows_f64(),
            alpha: [self.params.alpha[0].as_f64(), self.params.alpha[1].as_f64()],
            beta: [self.params.beta[0].as_f64(), self.params.beta[1].as_f64()],
            scale: scale_json,
        };
        serde_json::to_string_pretty(&raw).expect("model serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ModelJson = serde_json::from_str(s)?;
        let scale = RatingScale::from_json_str(&raw.scale.to_string())?;
        let q = Mat::from_rows_f64(&raw.q)?;
        let base = GeneratorMatrix::new(scale, q)?;
        let params = MomentumParams::new(
            [F::of(raw.alpha[0]), F::of(raw.alpha[1])],
            [F::of(raw.beta[0]), F::of(raw.beta[1])],
        )?;
        MomentumModel::new(base, params)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Downgrade channel: 0 when the pre-downgrade rating is investment grade,
/// 1 when it is speculative.
pub fn channel_of(scale: &RatingScale, pre_downgrade_state: usize) -> usize {
    if scale.is_investment(pre_downgrade_state) {
        0
    } else {
        1
    }
}

/// The entity's typed downgrade times (τ, channel), in time order.
pub fn downgrade_times<F: Real>(track: &EntityTrack<F>, scale: &RatingScale) -> Vec<(F, usize)> {
    let mut out = Vec::new();
    let mut prev = track.start_state;
    for &(t, s) in &track.events {
        if s > prev {
            out.push((t, channel_of(scale, prev)));
        }
        prev = s;
    }
    out
}

/// Sum of decayed kernels at time t given active downgrades (τ < t only).
pub(crate) fn load_from_kernels<F: Real>(
    params: &MomentumParams<F>,
    kernels: &[(F, usize)],
    t: F,
) -> F {
    let mut m = F::zero();
    for &(tau, ch) in kernels {
        if tau < t {
            m += params.beta[ch] * params.alpha[ch] * (-params.beta[ch] * (t - tau)).exp();
        }
    }
    m
}

/// M(t): the momentum term of the intensity, built from the track's own
/// downgrades strictly before t.
pub fn momentum_load<F: Real>(
    track: &EntityTrack<F>,
    params: &MomentumParams<F>,
    scale: &RatingScale,
    t: F,
) -> Result<F> {
    if t < track.start_time {
        return Err(Error::Invalid(format!(
            "{}: momentum queried at {t}, before the track starts at {}",
            track.entity_id, track.start_time
        )));
    }
    let kernels = downgrade_times(track, scale);
    Ok(load_from_kernels(params, &kernels, t))
}

/// λ_g(t) = q_{X(t⁻)} + M(t). Uses the left limit of the state so that the
/// value at a jump time is the intensity that produced the jump.
pub fn intensity<F: Real>(
    model: &MomentumModel<F>,
    track: &EntityTrack<F>,
    t: F,
) -> Result<F> {
    if t < track.start_time || t > track.terminal_time() {
        return Err(Error::Invalid(format!(
            "{}: intensity queried outside the observation window",
            track.entity_id
        )));
    }
    let d = model.scale().default_state();
    let mut state = track.start_state;
    for &(te, se) in &track.events {
        if te < t {
            state = se;
        } else {
            break;
        }
    }
    if state == d {
        return Err(Error::Invalid(format!(
            "{}: no intensity in the absorbing default state",
            track.entity_id
        )));
    }
    let m = momentum_load(track, model.params(), model.scale(), t)?;
    Ok(model.base().state_intensity(state) + m)
}

/// ∫ λ_g(u) du from the track start to T, in closed form: the baseline part
/// is piecewise constant over the occupied states and each momentum kernel
/// integrates to α_m (1 − e^{−β_m (T−τ)}).
pub fn compensator<F: Real>(
    track: &EntityTrack<F>,
    model: &MomentumModel<F>,
    t_end: F,
) -> Result<F> {
    if t_end > track.terminal_time() {
        return Err(Error::Invalid(format!(
            "{}: compensator horizon {t_end} exceeds the observation end {}",
            track.entity_id,
            track.terminal_time()
        )));
    }
    if t_end < track.start_time {
        return Err(Error::Invalid(format!(
            "{}: compensator horizon precedes the track start",
            track.entity_id
        )));
    }
    let params = model.params();
    let scale = model.scale();
    let mut total = F::zero();
    let mut t_prev = track.start_time;
    let mut state = track.start_state;
    let mut prev = track.start_state;
    for &(te, se) in &track.events {
        if te > t_end {
            break;
        }
        total += model.base().state_intensity(state) * (te - t_prev);
        if se > prev {
            let ch = channel_of(scale, prev);
            total += params.alpha[ch] * (F::one() - (-params.beta[ch] * (t_end - te)).exp());
        }
        t_prev = te;
        prev = se;
        state = se;
    }
    if t_end > t_prev {
        total += model.base().state_intensity(state) * (t_end - t_prev);
    }
    Ok(total)
}

/// Mark probabilities from state j at momentum load m: downgrades with
/// q_jk > 0 get (q_jk + m/N_j)/λ, upgrades with q_jk > 0 get q_jk/λ, and
/// unreachable states get zero; λ = q_j + m. Sums to one.
pub(crate) fn mark_distribution<F: Real>(
    model: &MomentumModel<F>,
    j: usize,
    m_load: F,
) -> Vec<(usize, F)> {
    let h = model.base().h();
    let lambda = model.base().state_intensity(j) + m_load;
    let share = if model.n_down(j) > 0 {
        m_load / F::of(model.n_down(j) as f64)
    } else {
        F::zero()
    };
    let mut out = Vec::new();
    for k in 0..h {
        if k == j {
            continue;
        }
        let q = model.base().rate(j, k);
        if q <= F::zero() {
            continue;
        }
        let num = if k > j { q + share } else { q };
        out.push((k, num / lambda));
    }
    out
}

/// Probability that the jump at time t out of state `from` = X(t⁻) lands in
/// `to`, given the track's downgrade history.
pub fn mark_probability<F: Real>(
    model: &MomentumModel<F>,
    track: &EntityTrack<F>,
    t: F,
    from: usize,
    to: usize,
) -> Result<F> {
    let d = model.scale().default_state();
    if from == d {
        return Err(Error::Invalid(
            "no marks out of the absorbing default state".into(),
        ));
    }
    if from == to {
        return Err(Error::Invalid("a mark must change the rating".into()));
    }
    if to < from && model.base().rate(from, to) <= F::zero() {
        return Err(Error::ImpossibleTransitions {
            cells: vec![ImpossibleTransition {
                period: None,
                entity: Some(track.entity_id.clone()),
                from: model.scale().label(from).to_string(),
                to: model.scale().label(to).to_string(),
            }],
        });
    }
    let m = momentum_load(track, model.params(), model.scale(), t)?;
    Ok(mark_distribution(model, from, m)
        .into_iter()
        .find(|&(k, _)| k == to)
        .map(|(_, p)| p)
        .unwrap_or(F::zero()))
}

/// Exact log-likelihood of a set of independent tracks: per jump the log of
/// the event factor, minus each track's compensator up to its terminal time.
pub fn mpp_log_likelihood<F: Real>(
    model: &MomentumModel<F>,
    history: &EventHistory<F>,
) -> Result<F> {
    if history.scale() != model.scale() {
        return Err(Error::Invalid(
            "history and model use different scales".into(),
        ));
    }
    let params = model.params();
    let scale = model.scale();
    let mut total = F::zero();
    let mut impossible = Vec::new();
    for track in history.tracks() {
        let mut kernels: Vec<(F, usize)> = Vec::new();
        let mut prev = track.start_state;
        for &(t, s) in &track.events {
            let q = model.base().rate(prev, s);
            let factor = if s > prev {
                let m = load_from_kernels(params, &kernels, t);
                q + m / F::of(model.n_down(prev) as f64)
            } else {
                q
            };
            if factor <= F::zero() {
                impossible.push(ImpossibleTransition {
                    period: None,
                    entity: Some(track.entity_id.clone()),
                    from: scale.label(prev).to_string(),
                    to: scale.label(s).to_string(),
                });
            } else {
                total += factor.ln();
            }
            if s > prev {
                kernels.push((t, channel_of(scale, prev)));
            }
            prev = s;
        }
        total -= compensator(track, model, track.terminal_time())?;
    }
    if !impossible.is_empty() {
        return Err(Error::ImpossibleTransitions { cells: impossible });
    }
    Ok(total)
}
