//! Generator matrices, transition probability matrices, the discrete-panel
//! log-likelihood, allowed pairs, and the continuous-data MLE.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ImpossibleTransition, Result};
use crate::linalg::Mat;
use crate::matexp::expm;
use crate::num::Real;
use crate::rating::{DiscretePanel, EventHistory, RatingScale};

/// Default cutoff below which an off-diagonal entry is no longer treated as a
/// free parameter after estimation.
pub const ALLOWED_PAIR_THRESHOLD: f64 = 1e-8;

/// A stable, conservative intensity matrix: nonnegative off-diagonal entries,
/// nonpositive diagonal, zero row sums, and an identically zero default row.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix<F> {
    scale: RatingScale,
    q: Mat<F>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorJson {
    labels: Vec<String>,
    q: Vec<Vec<f64>>,
}

impl<F: Real> GeneratorMatrix<F> {
    pub fn new(scale: RatingScale, q: Mat<F>) -> Result<Self> {
        let h = scale.h();
        if q.rows() != h || q.cols() != h {
            return Err(Error::Invalid(format!(
                "generator must be {h}x{h}, got {}x{}",
                q.rows(),
                q.cols()
            )));
        }
        if !q.is_finite() {
            return Err(Error::Invalid("generator has non-finite entries".into()));
        }
        let row_sum_tol = F::of(1e-12).max(F::epsilon() * F::of(256.0) * q.max_abs().max(F::one()));
        for i in 0..h {
            for j in 0..h {
                if i != j && q[(i, j)] < F::zero() {
                    return Err(Error::Invalid(format!(
                        "negative off-diagonal rate {} -> {}",
                        scale.label(i),
                        scale.label(j)
                    )));
                }
            }
            if q[(i, i)] > F::zero() {
                return Err(Error::Invalid(format!(
                    "positive diagonal entry in row {}",
                    scale.label(i)
                )));
            }
            if q.row_sum(i).abs() > row_sum_tol {
                return Err(Error::Invalid(format!(
                    "row {} sums to {:e}, not 0",
                    scale.label(i),
                    q.row_sum(i)
                )));
            }
        }
        let d = scale.default_state();
        if q.row(d).iter().any(|&x| x != F::zero()) {
            return Err(Error::Invalid("default row must be identically zero".into()));
        }
        Ok(GeneratorMatrix { scale, q })
    }

    /// Builds from off-diagonal rates: the diagonal is repaired to make row
    /// sums zero and the default row is forced to zero.
    pub fn from_offdiag(scale: RatingScale, mut q: Mat<F>) -> Result<Self> {
        let h = scale.h();
        if q.rows() != h || q.cols() != h {
            return Err(Error::Invalid(format!(
                "generator must be {h}x{h}, got {}x{}",
                q.rows(),
                q.cols()
            )));
        }
        let d = scale.default_state();
        for j in 0..h {
            q[(d, j)] = F::zero();
        }
        repair_diagonal(&mut q);
        GeneratorMatrix::new(scale, q)
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn matrix(&self) -> &Mat<F> {
        &self.q
    }

    pub fn h(&self) -> usize {
        self.scale.h()
    }

    pub fn rate(&self, i: usize, j: usize) -> F {
        self.q[(i, j)]
    }

    /// Total leaving intensity q_i = Σ_{j≠i} q_ij = −q_ii.
    pub fn state_intensity(&self, i: usize) -> F {
        -self.q[(i, i)]
    }

    /// P(t) = e^{Qt}.
    pub fn tpm(&self, t: F) -> Result<Mat<F>> {
        if t < F::zero() {
            return Err(Error::Invalid(format!("tpm horizon must be >= 0, got {t}")));
        }
        expm(&self.q, t)
    }

    /// Σ_u Σ_s Σ_r N_sr(u) · log exp(QΔt_u)_{sr}. Cells with zero counts
    /// contribute nothing even when the probability vanishes; a positive
    /// count on a zero-probability cell is returned as structured
    /// impossible-transition diagnostics (a tagged -inf).
    pub fn panel_log_likelihood(&self, panel: &DiscretePanel<F>) -> Result<F> {
        if panel.scale() != &self.scale {
            return Err(Error::Invalid(
                "panel and generator use different scales".into(),
            ));
        }
        let h = self.h();
        let mut total = F::zero();
        let mut impossible = Vec::new();
        for (group, periods) in group_by_dt(panel) {
            let p = self.tpm(group)?;
            for u in periods {
                let counts = &panel.observations()[u].counts;
                for s in 0..h {
                    for r in 0..h {
                        let n = counts[s][r];
                        if n == 0 {
                            continue;
                        }
                        let prob = p[(s, r)];
                        if prob <= F::zero() {
                            impossible.push(ImpossibleTransition {
                                period: Some(u + 1),
                                entity: None,
                                from: self.scale.label(s).to_string(),
                                to: self.scale.label(r).to_string(),
                            });
                        } else {
                            total += F::of(n as f64) * prob.ln();
                        }
                    }
                }
            }
        }
        if !impossible.is_empty() {
            return Err(Error::ImpossibleTransitions { cells: impossible });
        }
        Ok(total)
    }

    /// Off-diagonal coordinates with q_ij strictly above `threshold`, in
    /// row-major order, excluding the default row. These are the free
    /// parameters for likelihood inference.
    pub fn allowed_pairs(&self, threshold: F) -> Result<AllowedPairs> {
        if !(threshold > F::zero()) {
            return Err(Error::Invalid("allowed-pair threshold must be > 0".into()));
        }
        let h = self.h();
        let d = self.scale.default_state();
        let mut pairs = Vec::new();
        for i in 0..h {
            if i == d {
                continue;
            }
            for j in 0..h {
                if i != j && self.q[(i, j)] > threshold {
                    pairs.push((i, j));
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::Empty(
                "no generator entry exceeds the allowed-pair threshold".into(),
            ));
        }
        Ok(AllowedPairs { pairs })
    }

    pub fn to_json_string(&self) -> String {
        let raw = GeneratorJson {
            labels: self.scale.labels().to_vec(),
            q: self.q.to_rows_f64(),
        };
        serde_json::to_string_pretty(&raw).expect("generator serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    /// Reads `{ "labels": [...], "q": [[...]] }`; the scale supplies the
    /// withdrawal label and cutoff, and its labels must match.
    pub fn from_json_str(s: &str, scale: &RatingScale) -> Result<Self> {
        let raw: GeneratorJson = serde_json::from_str(s)?;
        if raw.labels != scale.labels() {
            return Err(Error::Invalid(
                "generator labels do not match the scale".into(),
            ));
        }
        let q = Mat::from_rows_f64(&raw.q)?;
        GeneratorMatrix::new(scale.clone(), q)
    }

    pub fn from_json_path(path: impl AsRef<Path>, scale: &RatingScale) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?, scale)
    }
}

/// Sets each diagonal entry to the negated sum of its off-diagonal row.
pub(crate) fn repair_diagonal<F: Real>(q: &mut Mat<F>) {
    let n = q.rows();
    for i in 0..n {
        let mut s = F::zero();
        for j in 0..n {
            if j != i {
                s += q[(i, j)];
            }
        }
        q[(i, i)] = -s;
    }
}

/// Groups panel observations by identical Δt so each horizon is exponentiated
/// once. Returns (dt, period indices).
pub(crate) fn group_by_dt<F: Real>(panel: &DiscretePanel<F>) -> Vec<(F, Vec<usize>)> {
    let mut groups: Vec<(F, Vec<usize>)> = Vec::new();
    for (u, obs) in panel.observations().iter().enumerate() {
        match groups.iter_mut().find(|(dt, _)| *dt == obs.dt) {
            Some((_, list)) => list.push(u),
            None => groups.push((obs.dt, vec![u])),
        }
    }
    groups
}

/// The matrix V_Q of allowed pairs: 0-based off-diagonal coordinates in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowedPairs {
    pairs: Vec<(usize, usize)>,
}

impl AllowedPairs {
    pub fn from_pairs(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("allowed pairs cannot be empty".into()));
        }
        if pairs.iter().any(|&(i, j)| i == j) {
            return Err(Error::Invalid("diagonal coordinates are not allowed".into()));
        }
        Ok(AllowedPairs { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn position(&self, pair: (usize, usize)) -> Option<usize> {
        self.pairs.iter().position(|&p| p == pair)
    }

    /// 1-based coordinates for reports.
    pub fn one_based(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }
}

/// Observed jump counts K_ij and holding times S_i of a fully observed
/// history, accumulated to each entity's terminal time.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStatistics<F> {
    pub jumps: Vec<Vec<u64>>,
    pub holding: Vec<F>,
}

pub fn path_statistics<F: Real>(history: &EventHistory<F>) -> PathStatistics<F> {
    let h = history.scale().h();
    let mut jumps = vec![vec![0u64; h]; h];
    let mut holding = vec![F::zero(); h];
    for tr in history.tracks() {
        let mut t = tr.start_time;
        let mut s = tr.start_state;
        for &(te, se) in &tr.events {
            holding[s] += te - t;
            jumps[s][se] += 1;
            t = te;
            s = se;
        }
        holding[s] += tr.terminal_time() - t;
    }
    PathStatistics { jumps, holding }
}

/// The continuous-data MLE q̂_ij = K_ij(T) / S_i(T); rows that were never
/// occupied stay zero.
pub fn mle_continuous<F: Real>(history: &EventHistory<F>) -> Result<GeneratorMatrix<F>> {
    if history.n_transitions() == 0 {
        return Err(Error::Empty("history contains no transitions".into()));
    }
    let stats = path_statistics(history);
    mle_from_statistics(history.scale(), &stats)
}

pub(crate) fn mle_from_statistics<F: Real>(
    scale: &RatingScale,
    stats: &PathStatistics<F>,
) -> Result<GeneratorMatrix<F>> {
    let h = scale.h();
    let d = scale.default_state();
    let mut q = Mat::zeros(h, h);
    for i in 0..h {
        if i == d || stats.holding[i] <= F::zero() {
            continue;
        }
        for j in 0..h {
            if i != j && stats.jumps[i][j] > 0 {
                q[(i, j)] = F::of(stats.jumps[i][j] as f64) / stats.holding[i];
            }
        }
    }
    GeneratorMatrix::from_offdiag(scale.clone(), q)
}

/// Complete-data CTMC log-likelihood Σ_ij K_ij log q_ij − Σ_i q_i S_i.
/// A jump along a zero rate is reported as an impossible transition.
pub fn complete_data_log_likelihood<F: Real>(
    generator: &GeneratorMatrix<F>,
    history: &EventHistory<F>,
) -> Result<F> {
    if history.scale() != generator.scale() {
        return Err(Error::Invalid(
            "history and generator use different scales".into(),
        ));
    }
    let stats = path_statistics(history);
    let h = generator.h();
    let mut ll = F::zero();
    let mut impossible = Vec::new();
    for i in 0..h {
        for j in 0..h {
            if i == j || stats.jumps[i][j] == 0 {
                continue;
            }
            let q = generator.rate(i, j);
            if q <= F::zero() {
                impossible.push(ImpossibleTransition {
                    period: None,
                    entity: None,
                    from: generator.scale().label(i).to_string(),
                    to: generator.scale().label(j).to_string(),
                });
            } else {
                ll += F::of(stats.jumps[i][j] as f64) * q.ln();
            }
        }
        ll -= generator.state_intensity(i) * stats.holding[i];
    }
    if !impossible.is_empty() {
        return Err(Error::ImpossibleTransitions { cells: impossible });
    }
    Ok(ll)
}
