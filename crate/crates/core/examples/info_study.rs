//! Error-vs-information study: how generator and transition-probability
//! estimates and their confidence bands evolve as observation years
//! accumulate.
//!
//! Setup: 250 obligors per rating observed annually for 50 years under the
//! built-in calibrated generator. A firm that defaults during a year is
//! replaced at the year end by a fresh firm carrying its pre-default rating,
//! so every year contributes a comparable amount of information. The EM
//! estimator (with Wald and delta-method bands) is then run on growing
//! prefixes of the panel.
//!
//! Rare transitions take years to be observed at all; until then their
//! generator entries sit at zero with degenerate bands, and right after the
//! first observation the bands are at their widest. Watch the Ba -> Ca row
//! of the output for that effect.
//!
//! Usage: cargo run --release --example info_study [-- <out_dir> [seed]]

use std::error::Error;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ratemig_core::ctmc::ALLOWED_PAIR_THRESHOLD;
use ratemig_core::em::{em_fit, EmConfig};
use ratemig_core::presets;
use ratemig_core::rating::{DiscretePanel, PanelObservation};
use ratemig_core::stats::z_for_level;
use ratemig_core::wald::{hessian, tpm_sensitivity, wald_intervals};

const OBLIGORS_PER_RATING: usize = 250;
const YEARS: usize = 50;
const LEVEL: f64 = 0.95;

/// Tracked coordinates (0-based): a dense entry, a moderate one, and the
/// rare Ba -> Ca transition whose uncertainty dominates the study.
const TRACKED: [(usize, usize); 3] = [(0, 1), (4, 5), (4, 7)];

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = std::env::args().collect();
    let out_dir = args.get(1).cloned().unwrap_or_else(|| "info_study_out".into());
    let seed: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(20_24);

    let truth = presets::calibrated_generator::<f64>();
    let scale = truth.scale().clone();
    let h = scale.h();
    let d = scale.default_state();
    let p1 = truth.tpm(1.0)?;

    // Annual counts with defaulters replaced by their pre-default rating.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut population = vec![OBLIGORS_PER_RATING; h];
    population[d] = 0;
    let mut yearly_counts: Vec<Vec<Vec<u64>>> = Vec::with_capacity(YEARS);
    for _ in 0..YEARS {
        let mut counts = vec![vec![0u64; h]; h];
        let mut next = vec![0usize; h];
        for i in 0..h {
            if i == d {
                continue;
            }
            for _ in 0..population[i] {
                let mut u: f64 = rng.random();
                let mut dest = d;
                for j in 0..h {
                    u -= p1[(i, j)];
                    if u <= 0.0 {
                        dest = j;
                        break;
                    }
                }
                counts[i][dest] += 1;
                // replacement: a defaulted firm re-enters at its pre-default
                // rating for the next year
                next[if dest == d { i } else { dest }] += 1;
            }
        }
        yearly_counts.push(counts);
        population = next;
    }

    let z = z_for_level(LEVEL);
    let mut gen_csv = String::from("years,from,to,q_true,q_hat,lower,upper,identified\n");
    let mut tpm_csv = String::from("years,from,to,p_true,p_hat,lower,upper,identified\n");

    for k in 1..=YEARS {
        let observations: Vec<PanelObservation<f64>> = yearly_counts[..k]
            .iter()
            .map(|c| PanelObservation {
                dt: 1.0,
                counts: c.clone(),
            })
            .collect();
        let panel = DiscretePanel::new(scale.clone(), observations)?;
        let fit = em_fit(&panel, &EmConfig::default())?;
        let g = &fit.generator;
        let pairs = g.allowed_pairs(ALLOWED_PAIR_THRESHOLD)?;
        let p_hat = g.tpm(1.0)?;

        // The Fisher information can be singular while rare transitions are
        // still unobserved; report those horizons as unidentified.
        let bundle = match hessian(g, &panel, &pairs) {
            Ok(b) => Some(b),
            Err(e) => {
                eprintln!("{k} years: intervals unavailable ({e})");
                None
            }
        };
        let intervals = bundle
            .as_ref()
            .map(|b| wald_intervals(g, b, LEVEL))
            .transpose()?;

        for &(i, j) in &TRACKED {
            let in_pairs = pairs.position((i, j)).is_some();
            let (lo, hi, ok) = match (&intervals, in_pairs) {
                (Some(iv), true) => (iv.lower[(i, j)], iv.upper[(i, j)], 1),
                _ => (g.rate(i, j), g.rate(i, j), 0),
            };
            let _ = writeln!(
                gen_csv,
                "{k},{},{},{},{},{},{},{}",
                scale.label(i),
                scale.label(j),
                truth.rate(i, j),
                g.rate(i, j),
                lo,
                hi,
                ok
            );

            let (plo, phi, pok) = match &bundle {
                Some(b) => {
                    let sens = tpm_sensitivity(g, &pairs, i, j, 1.0)?;
                    let mut var = 0.0;
                    for (a, &ga) in sens.iter().enumerate() {
                        for (bb, &gb) in sens.iter().enumerate() {
                            var += ga * b.fisher_inverse[(a, bb)] * gb;
                        }
                    }
                    let half = z * var.max(0.0).sqrt();
                    (p_hat[(i, j)] - half, p_hat[(i, j)] + half, 1)
                }
                None => (p_hat[(i, j)], p_hat[(i, j)], 0),
            };
            let _ = writeln!(
                tpm_csv,
                "{k},{},{},{},{},{},{},{}",
                scale.label(i),
                scale.label(j),
                p1[(i, j)],
                p_hat[(i, j)],
                plo,
                phi,
                pok
            );
        }
        if k % 10 == 0 {
            println!("processed {k}/{YEARS} years");
        }
    }

    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(format!("{out_dir}/generator_vs_years.csv"), gen_csv)?;
    std::fs::write(format!("{out_dir}/tpm_vs_years.csv"), tpm_csv)?;
    println!("wrote {out_dir}/generator_vs_years.csv and {out_dir}/tpm_vs_years.csv");
    Ok(())
}
