//! Cross-module statistical properties and format round-trips that don't
//! belong to a single unit.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ratemig_core::ctmc::{mle_continuous, path_statistics, ALLOWED_PAIR_THRESHOLD};
use ratemig_core::em::{em_fit, EmConfig};
use ratemig_core::linalg::Mat;
use ratemig_core::presets;
use ratemig_core::rating::{
    DiscretePanel, EntityTrack, EventHistory, PanelObservation, RatingScale, Terminal,
};
use ratemig_core::simulate::{simulate_ctmc, SimConfig};
use ratemig_core::wald::{hessian, pd_curve};
use ratemig_core::GeneratorMatrix;

/// RMSE over the allowed entries of the continuous-data MLE halves (within a
/// 2x band) when the firm-year volume quadruples.
#[test]
fn mle_error_halves_when_data_quadruples() {
    let truth = presets::calibrated_generator::<f64>();
    let rmse = |n_firms: usize, seed: u64| -> f64 {
        let history = simulate_ctmc(&truth, &SimConfig::new(n_firms, 10.0, seed)).unwrap();
        let est = mle_continuous(&history).unwrap();
        let mut sq = 0.0;
        let mut k = 0usize;
        for i in 0..8 {
            for j in 0..9 {
                if i != j && truth.rate(i, j) > 0.0 {
                    sq += (est.rate(i, j) - truth.rate(i, j)).powi(2);
                    k += 1;
                }
            }
        }
        (sq / k as f64).sqrt()
    };
    // average a few seeds to tame Monte-Carlo noise in the rate estimate
    let small: f64 = (0..4).map(|s| rmse(400, 100 + s)).sum::<f64>() / 4.0;
    let large: f64 = (0..4).map(|s| rmse(1600, 200 + s)).sum::<f64>() / 4.0;
    let ratio = small / large;
    assert!(
        (1.0..4.0).contains(&ratio),
        "rmse ratio {ratio:.2} outside the 2x band around the sqrt-law value 2"
    );
}

/// Delta-method band widths shrink like 1/sqrt(n) when every panel count is
/// scaled by n in {1, 4, 16} (2x tolerance band).
#[test]
fn pd_band_width_scales_with_information() {
    let truth = presets::calibrated_generator::<f64>();
    let p = truth.tpm(1.0).unwrap();
    let width_at = |count_scale: f64| -> f64 {
        let counts: Vec<Vec<u64>> = (0..9)
            .map(|i| {
                (0..9)
                    .map(|j| (p[(i, j)] * 2e4 * count_scale).round() as u64)
                    .collect()
            })
            .collect();
        let panel = DiscretePanel::new(
            truth.scale().clone(),
            vec![PanelObservation { dt: 1.0, counts }],
        )
        .unwrap();
        let fit = em_fit(&panel, &EmConfig::default()).unwrap();
        let pairs = fit.generator.allowed_pairs(ALLOWED_PAIR_THRESHOLD).unwrap();
        let bundle = hessian(&fit.generator, &panel, &pairs).unwrap();
        let curve = pd_curve(&fit.generator, &bundle, 4, &[5.0], 0.95).unwrap();
        curve[0].upper - curve[0].lower
    };
    let w1 = width_at(1.0);
    let w4 = width_at(4.0);
    let w16 = width_at(16.0);
    for (num, den, label) in [(w1, w4, "1 -> 4"), (w4, w16, "4 -> 16")] {
        let ratio = num / den;
        assert!(
            (1.0..4.0).contains(&ratio),
            "width ratio {ratio:.2} at {label} outside the 2x band around 2"
        );
    }
}

/// EM applied to randomized panels always converges to a valid generator
/// whose likelihood dominates the starting point.
#[test]
fn em_improves_over_its_start_on_random_panels() {
    let mut rng = ChaCha12Rng::seed_from_u64(4242);
    for _ in 0..10 {
        let labels: Vec<String> = (0..4).map(|k| format!("S{k}")).collect();
        let scale = RatingScale::new(labels, "WR", None).unwrap();
        let q = Mat::from_fn(4, 4, |i, j| {
            if i == j || i == 3 {
                0.0
            } else {
                0.05 + rng.random::<f64>() * 0.4
            }
        });
        let truth = GeneratorMatrix::from_offdiag(scale.clone(), q).unwrap();
        let p = truth.tpm(1.0).unwrap();
        let counts: Vec<Vec<u64>> = (0..4)
            .map(|i| (0..4).map(|j| (p[(i, j)] * 500.0).round() as u64).collect())
            .collect();
        let panel =
            DiscretePanel::new(scale, vec![PanelObservation { dt: 1.0, counts }]).unwrap();
        let config = EmConfig {
            max_iter: 400,
            ..EmConfig::default()
        };
        let fit = em_fit(&panel, &config).unwrap();
        assert!(fit.trace.last().unwrap() >= fit.trace.first().unwrap());
    }
}

/// Total observed holding time equals the summed observation windows.
#[test]
fn path_statistics_conserve_time() {
    let truth = presets::calibrated_generator::<f64>();
    let mut config = SimConfig::new(300, 7.0, 3131);
    config.withdrawal_rate = Some(0.1);
    let history = simulate_ctmc(&truth, &config).unwrap();
    let stats = path_statistics(&history);
    let total: f64 = stats.holding.iter().sum();
    let windows: f64 = history
        .tracks()
        .iter()
        .map(|t| t.terminal_time() - t.start_time)
        .sum();
    assert!((total - windows).abs() < 1e-9 * windows);
}

// ------------------------------------------------------- round-trip fuzzing

fn arb_scale() -> impl Strategy<Value = RatingScale> {
    (2usize..7).prop_map(|h| {
        let labels: Vec<String> = (0..h).map(|k| format!("R{k}")).collect();
        RatingScale::new(labels, "WR", None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discrete_panel_round_trips(
        scale in arb_scale(),
        seed in 0u64..1_000_000,
        periods in 1usize..4,
    ) {
        let h = scale.h();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut obs = Vec::new();
        for u in 0..periods {
            let mut counts = vec![vec![0u64; h]; h];
            for i in 0..h {
                for j in 0..h {
                    if i == h - 1 && j != h - 1 {
                        continue;
                    }
                    counts[i][j] = rng.random_range(0..40);
                }
            }
            counts[0][0] += 1; // guarantee a nonzero panel
            obs.push(PanelObservation { dt: 0.5 + 0.5 * u as f64, counts });
        }
        let panel = DiscretePanel::new(scale.clone(), obs).unwrap();
        let back = DiscretePanel::parse_csv_str(&panel.to_csv_string(), &scale, "prop").unwrap();
        prop_assert_eq!(panel, back);
    }

    #[test]
    fn event_history_round_trips(
        scale in arb_scale(),
        seed in 0u64..1_000_000,
        n_tracks in 1usize..8,
    ) {
        let h = scale.h();
        let d = scale.default_state();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut tracks = Vec::new();
        for k in 0..n_tracks {
            let start_state = rng.random_range(0..h - 1);
            let mut t = rng.random_range(0..8) as f64 * 0.25;
            let start_time = t;
            let mut state = start_state;
            let mut events = Vec::new();
            let mut terminal = None;
            for _ in 0..rng.random_range(0..5) {
                t += 0.25 + rng.random_range(0..8) as f64 * 0.25;
                let next = (0..h).filter(|&s| s != state).nth(rng.random_range(0..h - 1)).unwrap();
                events.push((t, next));
                state = next;
                if state == d {
                    terminal = Some(Terminal::Defaulted(t));
                    break;
                }
            }
            let terminal = terminal.unwrap_or_else(|| {
                let t_end = t + rng.random_range(0..5) as f64 * 0.5;
                if rng.random::<bool>() {
                    Terminal::Censored(t_end + 0.25)
                } else {
                    Terminal::Open(t_end)
                }
            });
            tracks.push(EntityTrack {
                entity_id: format!("e{k}"),
                start_time,
                start_state,
                events,
                terminal,
            });
        }
        let history = EventHistory::new(scale.clone(), tracks).unwrap();
        let back = EventHistory::parse_csv_str(&history.to_csv_string(), &scale, "prop").unwrap();
        prop_assert_eq!(history, back);
    }

    #[test]
    fn generator_json_round_trips(seed in 0u64..1_000_000) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let labels: Vec<String> = (0..5).map(|k| format!("R{k}")).collect();
        let scale = RatingScale::new(labels, "WR", None).unwrap();
        let q = Mat::from_fn(5, 5, |i, j| {
            if i == j || i == 4 {
                0.0
            } else {
                rng.random::<f64>() * 0.7
            }
        });
        let g = GeneratorMatrix::from_offdiag(scale.clone(), q).unwrap();
        let back = ratemig_core::ctmc::GeneratorMatrix::<f64>::from_json_str(
            &g.to_json_string(),
            &scale,
        )
        .unwrap();
        prop_assert_eq!(g, back);
    }
}
