//! Scalar statistical helpers used at the reporting surface: quantiles,
//! tail probabilities, and chain diagnostics. These run in f64; generic
//! callers convert through [`crate::num::Real`].

use crate::num::Real;

/// Standard normal CDF through the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF, solved by safeguarded Newton iteration on
/// the erfc-based CDF; converges to full double precision for |z| up to
/// about 37. normal_quantile(0.975) = 1.959963984540054.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");
    if p == 0.5 {
        return 0.0;
    }
    // Tail-accurate starting point, then Newton with the exact density.
    let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let mut x = {
        let t = (-2.0 * q.ln()).sqrt();
        t - (2.30753 + 0.27061 * t) / (1.0 + t * (0.99229 + 0.04481 * t))
    } * sign;
    let inv_sqrt_2pi = 0.3989422804014327;
    for _ in 0..60 {
        let err = normal_cdf(x) - p;
        let pdf = inv_sqrt_2pi * (-0.5 * x * x).exp();
        if pdf == 0.0 {
            break;
        }
        let step = err / pdf;
        x -= step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Two-sided z for a confidence level: normal_quantile((1 + level)/2).
pub fn z_for_level(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "level must lie in (0,1)");
    normal_quantile(0.5 * (1.0 + level))
}

/// Survival function of chi-squared with one degree of freedom,
/// P(X > x) = erfc(sqrt(x/2)). Accurate deep into the tail.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::erf::erfc((x / 2.0).sqrt())
}

/// Asymptotic Kolmogorov-Smirnov p-value for statistic `d` on `n` samples:
/// Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²} at λ = √n·d.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let lambda = (n as f64).sqrt() * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        if term < 1e-300 {
            break;
        }
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov statistic of samples against a CDF.
pub fn ks_statistic<F: Real>(samples: &mut [F], cdf: impl Fn(F) -> F) -> F {
    assert!(!samples.is_empty());
    samples.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in KS samples"));
    let n = samples.len();
    let mut d = F::zero();
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        let hi = F::of((i + 1) as f64 / n as f64) - c;
        let lo = c - F::of(i as f64 / n as f64);
        d = d.max(hi.abs()).max(lo.abs());
    }
    d
}

/// Equal-tailed empirical quantile (linear interpolation) of a sorted slice.
pub fn quantile_sorted<F: Real>(sorted: &[F], p: f64) -> F {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = F::of(pos - lo as f64);
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

/// Rank-normalized split-R̂ (potential scale reduction) for one parameter
/// across chains. Values near 1 indicate the chains agree; > 1.05 is the
/// conventional warning threshold.
pub fn split_rank_rhat<F: Real>(chains: &[Vec<F>]) -> f64 {
    // split every chain in half
    let mut splits: Vec<&[F]> = Vec::new();
    for c in chains {
        let m = c.len() / 2;
        if m == 0 {
            return f64::NAN;
        }
        splits.push(&c[..m]);
        splits.push(&c[m..m * 2]);
    }
    let m = splits.len();
    let n = splits.iter().map(|s| s.len()).min().unwrap_or(0);
    if n < 2 {
        return f64::NAN;
    }

    // rank-normalize across all draws (average ranks for ties)
    let total = m * n;
    let mut tagged: Vec<(f64, usize)> = Vec::with_capacity(total);
    for (ci, s) in splits.iter().enumerate() {
        for &x in s.iter().take(n) {
            tagged.push((x.as_f64(), ci));
        }
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| tagged[a].0.total_cmp(&tagged[b].0));
    let mut z = vec![0.0f64; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && tagged[order[j + 1]].0 == tagged[order[i]].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let u = (avg_rank - 0.375) / (total as f64 + 0.25);
        for &k in &order[i..=j] {
            z[k] = normal_quantile(u);
        }
        i = j + 1;
    }

    // classic R-hat on the normalized draws
    let mut chain_means = vec![0.0f64; m];
    let mut chain_vars = vec![0.0f64; m];
    for ci in 0..m {
        let slice = &z[ci * n..(ci + 1) * n];
        let mean = slice.iter().sum::<f64>() / n as f64;
        let var = slice.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        chain_means[ci] = mean;
        chain_vars[ci] = var;
    }
    let grand = chain_means.iter().sum::<f64>() / m as f64;
    let b = if m > 1 {
        n as f64 / (m as f64 - 1.0)
            * chain_means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>()
    } else {
        0.0
    };
    let w = chain_vars.iter().sum::<f64>() / m as f64;
    if w <= 0.0 {
        return 1.0; // all draws identical
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

/// Standard error of a chain mean by the batch-means method.
pub fn batch_means_se<F: Real>(samples: &[F]) -> f64 {
    let n = samples.len();
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 || n / b < 2 {
        return f64::NAN;
    }
    let k = n / b;
    let means: Vec<f64> = (0..k)
        .map(|i| {
            samples[i * b..(i + 1) * b]
                .iter()
                .map(|x| x.as_f64())
                .sum::<f64>()
                / b as f64
        })
        .collect();
    let grand = means.iter().sum::<f64>() / k as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k as f64 - 1.0);
    (var / k as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_reference_values() {
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
        assert!((normal_quantile(0.5)).abs() < 1e-15);
        assert!((normal_quantile(0.025) + 1.959963984540054).abs() < 1e-9);
        assert!((normal_quantile(0.995) - 2.5758293035489004).abs() < 1e-9);
        assert!((normal_quantile(1e-10) + 6.361340902404056).abs() < 1e-8);
    }

    #[test]
    fn z_for_level_pins_the_wald_constant() {
        assert!((z_for_level(0.95) - 1.959963985).abs() < 1e-9);
    }

    #[test]
    fn chi2_tail_reference_values() {
        // P(chi2_1 > 3.841458820694124) = 0.05
        assert!((chi2_1_sf(3.841458820694124) - 0.05).abs() < 1e-10);
        assert!((chi2_1_sf(0.0) - 1.0).abs() < 1e-15);
        // deep tail stays positive and monotone
        assert!(chi2_1_sf(40.0) > 0.0);
        assert!(chi2_1_sf(40.0) < chi2_1_sf(30.0));
    }

    #[test]
    fn ks_pvalue_reference() {
        // K(1.3581) ≈ 0.95 quantile, so p ≈ 0.05 at lambda = 1.3581
        let p = ks_p_value(1.3581, 1);
        assert!((p - 0.05).abs() < 1e-3);
        assert_eq!(ks_p_value(1e-6, 100), 1.0);
    }

    #[test]
    fn ks_statistic_detects_uniform() {
        let mut xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&mut xs, |x| x);
        assert!(d < 0.001);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
    }

    #[test]
    fn rhat_near_one_for_identical_chains() {
        let c1: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64).collect();
        let chains = vec![c1.clone(), c1];
        let r = split_rank_rhat(&chains);
        assert!((r - 1.0).abs() < 0.05, "rhat {r}");
    }

    #[test]
    fn rhat_flags_disagreeing_chains() {
        let c1: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64).collect();
        let c2: Vec<f64> = c1.iter().map(|x| x + 500.0).collect();
        let r = split_rank_rhat(&[c1, c2]);
        assert!(r > 1.5, "rhat {r}");
    }

    #[test]
    fn batch_means_se_scales_with_noise() {
        let xs: Vec<f64> = (0..10_000)
            .map(|i| ((i * 7919) % 104729) as f64 / 104729.0)
            .collect();
        let se = batch_means_se(&xs);
        // iid-ish uniforms: se ≈ sqrt(1/12)/100 ≈ 0.0029
        assert!(se > 0.0005 && se < 0.01, "se {se}");
    }
}
