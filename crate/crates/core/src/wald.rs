//! Likelihood derivatives over the allowed pairs and the confidence
//! machinery built on them: Wald intervals for generator entries and
//! delta-method bands for transition and default probabilities.
//!
//! With D_αβ = e_α e_βᵀ − e_α e_αᵀ (a rate move compensated on the
//! diagonal), G_αβ = ∂P(Δt)/∂q_αβ comes from one block exponential and the
//! log-likelihood derivatives are
//!
//! ```text
//! ∂ℓ/∂q_αβ          = Σ N_sr · G_αβ / P
//! ∂²ℓ/∂q_αβ ∂q_μν   = Σ N_sr · (X_αβ,μν / P − G_αβ G_μν / P²)
//! ```
//!
//! where X is the mixed second derivative block. The Hessian is negative
//! definite at the MLE and the Fisher information is −H; its inverse is
//! produced by an explicit symmetric positive-definite factorization that
//! fails loudly (listing the offending pairs) instead of regularizing.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctmc::{group_by_dt, AllowedPairs, GeneratorMatrix};
use crate::error::{Error, ImpossibleTransition, Result};
use crate::linalg::Mat;
use crate::matexp::{d2expm_block, dexpm_block};
use crate::num::Real;
use crate::rating::DiscretePanel;
use crate::stats::z_for_level;

/// Score, Hessian and inverse Fisher information at a generator, over a
/// fixed set of allowed pairs.
#[derive(Debug, Clone)]
pub struct HessianBundle<F> {
    pub pairs: AllowedPairs,
    pub gradient: Vec<F>,
    /// H(Q) = ∂²ℓ; symmetric, negative definite at the MLE.
    pub hessian: Mat<F>,
    /// (−H)⁻¹: the estimator covariance.
    pub fisher_inverse: Mat<F>,
}

/// What an interval matrix talks about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntervalTarget<F> {
    Generator,
    Tpm(F),
}

/// Elementwise confidence bounds; cells outside the allowed pairs carry
/// degenerate intervals at their fixed value.
#[derive(Debug, Clone)]
pub struct IntervalMatrix<F> {
    pub lower: Mat<F>,
    pub upper: Mat<F>,
    pub level: F,
    pub target: IntervalTarget<F>,
}

#[derive(Serialize, Deserialize)]
struct IntervalJson {
    level: f64,
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

impl<F: Real> IntervalMatrix<F> {
    pub fn to_json_string(&self) -> String {
        let raw = IntervalJson {
            level: self.level.as_f64(),
            lower: self.lower.to_rows_f64(),
            upper: self.upper.to_rows_f64(),
        };
        serde_json::to_string_pretty(&raw).expect("intervals serialize")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// One point of a default-probability curve with its delta-method band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdPoint<F> {
    pub t: F,
    pub pd: F,
    pub lower: F,
    pub upper: F,
    /// Set when the sensitivity vector vanishes at this horizon, where the
    /// delta method degenerates and the band collapses.
    pub degenerate: bool,
}

/// Writes `t,pd,lower,upper,degenerate_flag` rows.
pub fn pd_curve_to_csv<F: Real>(points: &[PdPoint<F>]) -> String {
    let mut out = String::from("t,pd,lower,upper,degenerate_flag\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.t,
            p.pd,
            p.lower,
            p.upper,
            if p.degenerate { 1 } else { 0 }
        ));
    }
    out
}

fn direction<F: Real>(h: usize, alpha: usize, beta: usize) -> Mat<F> {
    let mut d = Mat::zeros(h, h);
    d[(alpha, beta)] = F::one();
    d[(alpha, alpha)] = -F::one();
    d
}

/// Per-dt-group count weights N_sr / P_sr and N_sr / P_sr², with impossible
/// transitions collected for diagnostics.
struct Weights<F> {
    w1: Mat<F>,
    w2: Mat<F>,
}

fn weights_for_group<F: Real>(
    generator: &GeneratorMatrix<F>,
    panel: &DiscretePanel<F>,
    p: &Mat<F>,
    periods: &[usize],
) -> Result<Weights<F>> {
    let h = generator.h();
    let mut w1 = Mat::zeros(h, h);
    let mut w2 = Mat::zeros(h, h);
    let mut impossible = Vec::new();
    for &u in periods {
        let counts = &panel.observations()[u].counts;
        for s in 0..h {
            for r in 0..h {
                let n = counts[s][r];
                if n == 0 {
                    continue;
                }
                if p[(s, r)] <= F::zero() {
                    impossible.push(ImpossibleTransition {
                        period: Some(u + 1),
                        entity: None,
                        from: generator.scale().label(s).to_string(),
                        to: generator.scale().label(r).to_string(),
                    });
                } else {
                    let nf = F::of(n as f64);
                    w1[(s, r)] += nf / p[(s, r)];
                    w2[(s, r)] += nf / (p[(s, r)] * p[(s, r)]);
                }
            }
        }
    }
    if !impossible.is_empty() {
        return Err(Error::ImpossibleTransitions { cells: impossible });
    }
    Ok(Weights { w1, w2 })
}

fn check_inputs<F: Real>(
    generator: &GeneratorMatrix<F>,
    panel: &DiscretePanel<F>,
    pairs: &AllowedPairs,
) -> Result<()> {
    if panel.scale() != generator.scale() {
        return Err(Error::Invalid(
            "panel and generator use different scales".into(),
        ));
    }
    for (a, b) in pairs.iter() {
        if a >= generator.h() || b >= generator.h() || a == b {
            return Err(Error::Invalid(format!("pair ({a},{b}) out of range")));
        }
        if generator.rate(a, b) <= F::zero() {
            return Err(Error::Invalid(format!(
                "pair ({},{}) is not in the interior of the parameter space",
                generator.scale().label(a),
                generator.scale().label(b)
            )));
        }
    }
    Ok(())
}

/// Gradient of the panel log-likelihood over the allowed pairs.
pub fn score<F: Real>(
    generator: &GeneratorMatrix<F>,
    panel: &DiscretePanel<F>,
    pairs: &AllowedPairs,
) -> Result<Vec<F>> {
    check_inputs(generator, panel, pairs)?;
    let h = generator.h();
    let q = generator.matrix();
    let mut grad = vec![F::zero(); pairs.len()];
    for (dt, periods) in group_by_dt(panel) {
        let p = generator.tpm(dt)?;
        let w = weights_for_group(generator, panel, &p, &periods)?;
        let blocks: Vec<Result<Mat<F>>> = pairs
            .pairs()
            .par_iter()
            .map(|&(a, b)| dexpm_block(q, &direction(h, a, b), dt))
            .collect();
        for (k, block) in blocks.into_iter().enumerate() {
            let g = block?;
            let mut acc = F::zero();
            for s in 0..h {
                for r in 0..h {
                    if w.w1[(s, r)] != F::zero() {
                        acc += w.w1[(s, r)] * g[(s, r)];
                    }
                }
            }
            grad[k] += acc;
        }
    }
    Ok(grad)
}

/// Score, Hessian, and (−H)⁻¹ in one pass. Fails with the offending pairs
/// when −H is not positive definite.
pub fn hessian<F: Real>(
    generator: &GeneratorMatrix<F>,
    panel: &DiscretePanel<F>,
    pairs: &AllowedPairs,
) -> Result<HessianBundle<F>> {
    check_inputs(generator, panel, pairs)?;
    let h = generator.h();
    let q = generator.matrix();
    let na = pairs.len();
    let mut grad = vec![F::zero(); na];
    let mut hess: Mat<F> = Mat::zeros(na, na);

    for (dt, periods) in group_by_dt(panel) {
        let p = generator.tpm(dt)?;
        let w = weights_for_group(generator, panel, &p, &periods)?;

        let firsts: Vec<Result<Mat<F>>> = pairs
            .pairs()
            .par_iter()
            .map(|&(a, b)| dexpm_block(q, &direction(h, a, b), dt))
            .collect();
        let mut g_blocks = Vec::with_capacity(na);
        for item in firsts {
            g_blocks.push(item?);
        }

        for (k, g) in g_blocks.iter().enumerate() {
            let mut acc = F::zero();
            for s in 0..h {
                for r in 0..h {
                    if w.w1[(s, r)] != F::zero() {
                        acc += w.w1[(s, r)] * g[(s, r)];
                    }
                }
            }
            grad[k] += acc;
        }

        // Upper triangle of the mixed second-derivative blocks.
        let upper: Vec<(usize, usize)> = (0..na)
            .flat_map(|k| (k..na).map(move |l| (k, l)))
            .collect();
        let seconds: Vec<Result<(usize, usize, F)>> = upper
            .par_iter()
            .map(|&(k, l)| {
                let (a1, b1) = pairs.pairs()[k];
                let (a2, b2) = pairs.pairs()[l];
                let x = d2expm_block(
                    q,
                    &direction(h, a1, b1),
                    &direction(h, a2, b2),
                    dt,
                )?;
                let g1 = &g_blocks[k];
                let g2 = &g_blocks[l];
                let mut acc = F::zero();
                for s in 0..h {
                    for r in 0..h {
                        if w.w1[(s, r)] != F::zero() {
                            acc += w.w1[(s, r)] * x[(s, r)]
                                - w.w2[(s, r)] * g1[(s, r)] * g2[(s, r)];
                        }
                    }
                }
                Ok((k, l, acc))
            })
            .collect();
        for item in seconds {
            let (k, l, v) = item?;
            hess[(k, l)] += v;
            if k != l {
                hess[(l, k)] += v;
            }
        }
    }

    // Fisher information = −H, inverted by Cholesky after symmetrization.
    let mut neg = Mat::zeros(na, na);
    for k in 0..na {
        for l in 0..na {
            neg[(k, l)] = -(hess[(k, l)] + hess[(l, k)]) / F::of(2.0);
        }
    }
    let fisher_inverse = neg.spd_inverse().map_err(|pivot| {
        let mut offending: Vec<(usize, usize)> = vec![pairs.pairs()[pivot]];
        for k in 0..na {
            if neg[(k, k)] <= F::zero() && k != pivot {
                offending.push(pairs.pairs()[k]);
            }
        }
        Error::NotPositiveDefinite {
            pairs: offending.iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
        }
    })?;

    Ok(HessianBundle {
        pairs: pairs.clone(),
        gradient: grad,
        hessian: hess,
        fisher_inverse,
    })
}

/// Wald intervals q̂_ab ± z·√Var for the allowed pairs; everything else is
/// degenerate at its fixed value. Lower bounds may be negative and are not
/// clipped.
pub fn wald_intervals<F: Real>(
    generator: &GeneratorMatrix<F>,
    bundle: &HessianBundle<F>,
    level: F,
) -> Result<IntervalMatrix<F>> {
    let lf = level.as_f64();
    if !(0.0 < lf && lf < 1.0) {
        return Err(Error::Invalid(format!("level must lie in (0,1), got {lf}")));
    }
    let z = F::of(z_for_level(lf));
    let h = generator.h();
    let mut lower = generator.matrix().clone();
    let mut upper = generator.matrix().clone();
    for (k, (a, b)) in bundle.pairs.iter().enumerate() {
        let var = bundle.fisher_inverse[(k, k)];
        if !(var > F::zero()) {
            return Err(Error::NotPositiveDefinite {
                pairs: vec![(a + 1, b + 1)],
            });
        }
        let half = z * var.sqrt();
        lower[(a, b)] = generator.rate(a, b) - half;
        upper[(a, b)] = generator.rate(a, b) + half;
    }
    let _ = h;
    Ok(IntervalMatrix {
        lower,
        upper,
        level,
        target: IntervalTarget::Generator,
    })
}

/// ∂p_ij(t)/∂q over the allowed pairs: component (α,β) is the (i,j) entry
/// of the derivative block for direction D_αβ.
pub fn tpm_sensitivity<F: Real>(
    generator: &GeneratorMatrix<F>,
    pairs: &AllowedPairs,
    i: usize,
    j: usize,
    t: F,
) -> Result<Vec<F>> {
    let h = generator.h();
    if i == generator.scale().default_state() {
        return Err(Error::Invalid(
            "the absorbing default row has no parameters to vary".into(),
        ));
    }
    if i >= h || j >= h {
        return Err(Error::Invalid("state index out of range".into()));
    }
    if t < F::zero() {
        return Err(Error::Invalid("horizon must be nonnegative".into()));
    }
    let q = generator.matrix();
    let blocks: Vec<Result<F>> = pairs
        .pairs()
        .par_iter()
        .map(|&(a, b)| dexpm_block(q, &direction(h, a, b), t).map(|g| g[(i, j)]))
        .collect();
    blocks.into_iter().collect()
}

/// Default-probability curve for initial state i with delta-method bands:
/// pd(t) = P(t)_{i,default}, Var = gᵀ (−H)⁻¹ g. Grid points where the
/// sensitivity vanishes are flagged degenerate and keep a zero-width band.
pub fn pd_curve<F: Real>(
    generator: &GeneratorMatrix<F>,
    bundle: &HessianBundle<F>,
    i: usize,
    t_grid: &[F],
    level: F,
) -> Result<Vec<PdPoint<F>>> {
    let lf = level.as_f64();
    if !(0.0 < lf && lf < 1.0) {
        return Err(Error::Invalid(format!("level must lie in (0,1), got {lf}")));
    }
    let d = generator.scale().default_state();
    if i == d {
        return Err(Error::Invalid(
            "default probability of the default state is trivially 1".into(),
        ));
    }
    let mut last = F::neg_infinity();
    for &t in t_grid {
        if !(t >= F::zero()) {
            return Err(Error::Invalid("grid times must be nonnegative".into()));
        }
        if t <= last {
            return Err(Error::Invalid("grid times must be strictly ascending".into()));
        }
        last = t;
    }
    let z = F::of(z_for_level(lf));
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let pd = generator.tpm(t)?[(i, d)];
        let g = tpm_sensitivity(generator, &bundle.pairs, i, d, t)?;
        let gnorm = g.iter().fold(F::zero(), |m, &x| m.max(x.abs()));
        let mut var = F::zero();
        for (k, &gk) in g.iter().enumerate() {
            if gk == F::zero() {
                continue;
            }
            let mut row = F::zero();
            for (l, &gl) in g.iter().enumerate() {
                row += bundle.fisher_inverse[(k, l)] * gl;
            }
            var += gk * row;
        }
        let mut degenerate = gnorm == F::zero();
        if var < F::zero() {
            var = F::zero();
            degenerate = true;
        }
        let half = z * var.sqrt();
        out.push(PdPoint {
            t,
            pd,
            lower: pd - half,
            upper: pd + half,
            degenerate,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::ALLOWED_PAIR_THRESHOLD;
    use crate::em::{em_fit, EmConfig};
    use crate::rating::{PanelObservation, RatingScale};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    pub(crate) fn random_generator(
        rng: &mut impl Rng,
        labels: &[&str],
        scale_rates: f64,
    ) -> GeneratorMatrix<f64> {
        let s = RatingScale::new(
            labels.iter().map(|l| l.to_string()).collect(),
            "WR",
            None,
        )
        .unwrap();
        let h = s.h();
        let q = Mat::from_fn(h, h, |i, j| {
            if i == j || i == h - 1 {
                0.0
            } else {
                (0.05 + rng.random::<f64>()) * scale_rates
            }
        });
        GeneratorMatrix::from_offdiag(s, q).unwrap()
    }

    pub(crate) fn random_panel(
        rng: &mut impl Rng,
        g: &GeneratorMatrix<f64>,
        periods: usize,
        firms_per_row: u64,
    ) -> DiscretePanel<f64> {
        // multinomial draws from the exact TPM per period
        let h = g.h();
        let mut obs = Vec::new();
        for u in 0..periods {
            let dt = if u % 2 == 0 { 1.0 } else { 0.5 };
            let p = g.tpm(dt).unwrap();
            let mut counts = vec![vec![0u64; h]; h];
            for i in 0..h {
                if i == h - 1 {
                    counts[i][i] = firms_per_row;
                    continue;
                }
                for _ in 0..firms_per_row {
                    let mut u01: f64 = rng.random();
                    let mut dest = h - 1;
                    for j in 0..h {
                        u01 -= p[(i, j)];
                        if u01 <= 0.0 {
                            dest = j;
                            break;
                        }
                    }
                    counts[i][dest] += 1;
                }
            }
            obs.push(PanelObservation { dt, counts });
        }
        DiscretePanel::new(g.scale().clone(), obs).unwrap()
    }

    fn fd_score(g: &GeneratorMatrix<f64>, panel: &DiscretePanel<f64>, a: usize, b: usize) -> f64 {
        let eps = 1e-6;
        let shift = |sgn: f64| {
            let mut q = g.matrix().clone();
            q[(a, b)] += sgn * eps;
            q[(a, a)] -= sgn * eps;
            GeneratorMatrix::new(g.scale().clone(), q)
                .unwrap()
                .panel_log_likelihood(panel)
                .unwrap()
        };
        (shift(1.0) - shift(-1.0)) / (2.0 * eps)
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        for trial in 0..5 {
            let labels: Vec<&str> = ["s1", "s2", "s3", "s4", "s5"][..3 + trial % 3].to_vec();
            let g = random_generator(&mut rng, &labels, 0.4);
            let panel = random_panel(&mut rng, &g, 2, 400);
            let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
            let grad = score(&g, &panel, &pairs).unwrap();
            for (k, (a, b)) in pairs.iter().enumerate() {
                let fd = fd_score(&g, &panel, a, b);
                let denom = fd.abs().max(1.0);
                assert!(
                    ((grad[k] - fd) / denom).abs() < 1e-6,
                    "pair ({a},{b}): {} vs fd {}",
                    grad[k],
                    fd
                );
            }
        }
    }

    #[test]
    fn score_is_zero_on_zero_counts_panel() {
        // an all-diagonal panel of a null generator... counts must be >0
        // somewhere for a valid panel, so park them on the default diagonal
        // where no parameter looks.
        let s = RatingScale::new(vec!["A".into(), "B".into(), "C".into()], "WR", None).unwrap();
        let q = Mat::from_rows_f64(&[
            vec![-0.3, 0.2, 0.1],
            vec![0.1, -0.3, 0.2],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let g = GeneratorMatrix::new(s.clone(), q).unwrap();
        let mut counts = vec![vec![0u64; 3]; 3];
        counts[2][2] = 5;
        let panel = DiscretePanel::new(s, vec![PanelObservation { dt: 1.0, counts }]).unwrap();
        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let grad = score(&g, &panel, &pairs).unwrap();
        assert!(grad.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn score_vanishes_at_the_em_fixed_point() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let g_true = random_generator(&mut rng, &["a", "b", "c", "d"], 0.3);
        let panel = random_panel(&mut rng, &g_true, 3, 500);
        let config = EmConfig {
            tol: 1e-13,
            max_iter: 20_000,
            ..EmConfig::default()
        };
        let fit = em_fit(&panel, &config).unwrap();
        let pairs = fit.generator.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let grad = score(&fit.generator, &panel, &pairs).unwrap();
        let total = panel.total_count() as f64;
        for (k, &gk) in grad.iter().enumerate() {
            assert!(
                gk.abs() < 1e-5 * total,
                "component {k} = {gk} not stationary (scale {total})"
            );
        }
    }

    #[test]
    fn hessian_matches_finite_differences_and_is_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let g = random_generator(&mut rng, &["x", "y", "z"], 0.5);
        let panel = random_panel(&mut rng, &g, 2, 300);
        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let bundle = hessian(&g, &panel, &pairs).unwrap();
        let na = pairs.len();
        for k in 0..na {
            for l in 0..na {
                let rel = (bundle.hessian[(k, l)] - bundle.hessian[(l, k)]).abs()
                    / bundle.hessian[(k, l)].abs().max(1.0);
                assert!(rel < 1e-8, "asymmetric at ({k},{l})");
            }
        }
        // central second differences of the log-likelihood
        let eps = 1e-4;
        let eval = |dq: &[(usize, usize, f64)]| {
            let mut q = g.matrix().clone();
            for &(a, b, delta) in dq {
                q[(a, b)] += delta;
                q[(a, a)] -= delta;
            }
            GeneratorMatrix::new(g.scale().clone(), q)
                .unwrap()
                .panel_log_likelihood(&panel)
                .unwrap()
        };
        for k in 0..na {
            for l in 0..na {
                let (a1, b1) = pairs.pairs()[k];
                let (a2, b2) = pairs.pairs()[l];
                let fd = if k == l {
                    (eval(&[(a1, b1, eps)]) - 2.0 * eval(&[]) + eval(&[(a1, b1, -eps)]))
                        / (eps * eps)
                } else {
                    (eval(&[(a1, b1, eps), (a2, b2, eps)])
                        - eval(&[(a1, b1, eps), (a2, b2, -eps)])
                        - eval(&[(a1, b1, -eps), (a2, b2, eps)])
                        + eval(&[(a1, b1, -eps), (a2, b2, -eps)]))
                        / (4.0 * eps * eps)
                };
                let denom = fd.abs().max(1.0);
                assert!(
                    ((bundle.hessian[(k, l)] - fd) / denom).abs() < 1e-5,
                    "H({k},{l}) = {} vs fd {}",
                    bundle.hessian[(k, l)],
                    fd
                );
            }
        }
    }

    #[test]
    fn hessian_two_state_scalar_calculus() {
        // With one parameter q and Δt = 1 the log-likelihood is
        // n11 log e^{-q} + n12 log(1 - e^{-q}); its second derivative is
        // -n12 e^{-q} / (1 - e^{-q})².
        let s = RatingScale::new(vec!["A".into(), "C".into()], "WR", None).unwrap();
        let q = 0.31;
        let gm = GeneratorMatrix::new(
            s.clone(),
            Mat::from_rows_f64(&[vec![-q, q], vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let (n11, n12) = (700u64, 300u64);
        let counts = vec![vec![n11, n12], vec![0, 0]];
        let panel = DiscretePanel::new(s, vec![PanelObservation { dt: 1.0, counts }]).unwrap();
        let pairs = gm.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let bundle = hessian(&gm, &panel, &pairs).unwrap();
        let e = (-q).exp();
        let expect = -(n12 as f64) * e / (1.0 - e).powi(2);
        assert!(
            (bundle.hessian[(0, 0)] - expect).abs() < 1e-8 * expect.abs(),
            "{} vs {}",
            bundle.hessian[(0, 0)],
            expect
        );
    }

    #[test]
    fn wald_intervals_cover_point_and_degenerate_elsewhere() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let g_true = random_generator(&mut rng, &["a", "b", "c", "d"], 0.3);
        let panel = random_panel(&mut rng, &g_true, 4, 800);
        let fit = em_fit(&panel, &EmConfig::default()).unwrap();
        let g = &fit.generator;
        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let bundle = hessian(g, &panel, &pairs).unwrap();
        let iv = wald_intervals(g, &bundle, 0.95).unwrap();
        for (k, (a, b)) in pairs.iter().enumerate() {
            assert!(iv.lower[(a, b)] < g.rate(a, b));
            assert!(iv.upper[(a, b)] > g.rate(a, b));
            let _ = k;
        }
        // diagonal and default row are degenerate
        assert_eq!(iv.lower[(0, 0)], g.rate(0, 0));
        assert_eq!(iv.upper[(0, 0)], g.rate(0, 0));
        let d = g.scale().default_state();
        for j in 0..g.h() {
            assert_eq!(iv.lower[(d, j)], 0.0);
            assert_eq!(iv.upper[(d, j)], 0.0);
        }
    }

    #[test]
    fn tpm_sensitivity_zero_at_t0_and_matches_fd() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let g = random_generator(&mut rng, &["a", "b", "c", "d"], 0.4);
        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let zero = tpm_sensitivity(&g, &pairs, 0, 3, 0.0).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));

        let t = 2.0;
        let (i, j) = (1, 3);
        let sens = tpm_sensitivity(&g, &pairs, i, j, t).unwrap();
        let eps = 1e-6;
        for (k, (a, b)) in pairs.iter().enumerate() {
            let shift = |sgn: f64| {
                let mut q = g.matrix().clone();
                q[(a, b)] += sgn * eps;
                q[(a, a)] -= sgn * eps;
                GeneratorMatrix::new(g.scale().clone(), q)
                    .unwrap()
                    .tpm(t)
                    .unwrap()[(i, j)]
            };
            let fd = (shift(1.0) - shift(-1.0)) / (2.0 * eps);
            let denom = fd.abs().max(1.0);
            assert!(((sens[k] - fd) / denom).abs() < 1e-6);
        }
    }

    #[test]
    fn tpm_sensitivities_conserve_rows() {
        // Σ_j ∂p_ij/∂q_αβ = 0: stochasticity is preserved by the perturbation.
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let g = random_generator(&mut rng, &["a", "b", "c", "d", "e"], 0.5);
        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let i = 2;
        let mut totals = vec![0.0; pairs.len()];
        for j in 0..g.h() {
            let s = tpm_sensitivity(&g, &pairs, i, j, 1.7).unwrap();
            for (k, v) in s.into_iter().enumerate() {
                totals[k] += v;
            }
        }
        for v in totals {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn tpm_sensitivity_rejects_default_row() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let g = random_generator(&mut rng, &["a", "b", "c"], 0.4);
        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        assert!(tpm_sensitivity(&g, &pairs, 2, 0, 1.0).is_err());
    }

    #[test]
    fn pd_curve_shape() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let g_true = random_generator(&mut rng, &["a", "b", "c", "d"], 0.3);
        let panel = random_panel(&mut rng, &g_true, 4, 600);
        let fit = em_fit(&panel, &EmConfig::default()).unwrap();
        let pairs = fit.generator.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let bundle = hessian(&fit.generator, &panel, &pairs).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let curve = pd_curve(&fit.generator, &bundle, 0, &grid, 0.95).unwrap();
        // t = 0: pd exactly 0, zero width, flagged degenerate
        assert_eq!(curve[0].pd, 0.0);
        assert_eq!(curve[0].lower, 0.0);
        assert_eq!(curve[0].upper, 0.0);
        assert!(curve[0].degenerate);
        // midpoint monotone nondecreasing, bands ordered, later points not degenerate
        for w in curve.windows(2) {
            assert!(w[1].pd >= w[0].pd - 1e-12);
        }
        for p in &curve[1..] {
            assert!(p.lower <= p.pd && p.pd <= p.upper);
            assert!(!p.degenerate);
            assert!(p.upper - p.lower > 0.0);
        }
    }

    #[test]
    fn relabeling_equivariance() {
        // permuting the two middle states permutes every output consistently
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let g = random_generator(&mut rng, &["a", "b", "c", "d"], 0.35);
        let panel = random_panel(&mut rng, &g, 2, 500);

        let perm = [0usize, 2, 1, 3]; // swap states 1 and 2
        let s2 = RatingScale::new(
            vec!["a".into(), "c".into(), "b".into(), "d".into()],
            "WR",
            None,
        )
        .unwrap();
        let qp = Mat::from_fn(4, 4, |i, j| g.matrix()[(perm[i], perm[j])]);
        let gp = GeneratorMatrix::new(s2.clone(), qp).unwrap();
        let obs2: Vec<PanelObservation<f64>> = panel
            .observations()
            .iter()
            .map(|o| PanelObservation {
                dt: o.dt,
                counts: (0..4)
                    .map(|i| (0..4).map(|j| o.counts[perm[i]][perm[j]]).collect())
                    .collect(),
            })
            .collect();
        let panel2 = DiscretePanel::new(s2, obs2).unwrap();

        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let pairs2 = gp.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let b1 = hessian(&g, &panel, &pairs).unwrap();
        let b2 = hessian(&gp, &panel2, &pairs2).unwrap();
        let iv1 = wald_intervals(&g, &b1, 0.95).unwrap();
        let iv2 = wald_intervals(&gp, &b2, 0.95).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (iv1.lower[(perm[i], perm[j])] - iv2.lower[(i, j)]).abs() < 1e-9,
                    "lower mismatch at ({i},{j})"
                );
                assert!((iv1.upper[(perm[i], perm[j])] - iv2.upper[(i, j)]).abs() < 1e-9);
            }
        }
        // pd curves for relabeled initial states agree
        let c1 = pd_curve(&g, &b1, 1, &[1.0, 5.0], 0.95).unwrap();
        let c2 = pd_curve(&gp, &b2, 2, &[1.0, 5.0], 0.95).unwrap();
        for (p1, p2) in c1.iter().zip(&c2) {
            assert!((p1.pd - p2.pd).abs() < 1e-12);
            assert!((p1.lower - p2.lower).abs() < 1e-9);
            assert!((p1.upper - p2.upper).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_direction_is_reported_not_regularized() {
        // A pair the data never visits makes the Fisher matrix singular.
        let s = RatingScale::new(
            vec!["A".into(), "B".into(), "D".into(), "C".into()],
            "WR",
            None,
        )
        .unwrap();
        let q = Mat::from_rows_f64(&[
            vec![-0.3, 0.2, 0.05, 0.05],
            vec![0.1, -0.4, 0.2, 0.1],
            vec![0.05, 0.1, -0.35, 0.2],
            vec![0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let g = GeneratorMatrix::new(s.clone(), q).unwrap();
        // counts only on the default diagonal: no information at all
        let mut counts = vec![vec![0u64; 4]; 4];
        counts[3][3] = 10;
        let panel = DiscretePanel::new(s, vec![PanelObservation { dt: 1.0, counts }]).unwrap();
        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        match hessian(&g, &panel, &pairs) {
            Err(Error::NotPositiveDefinite { pairs }) => assert!(!pairs.is_empty()),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }
}
