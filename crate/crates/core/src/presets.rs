//! Built-in reference models: the standard 9-state corporate rating scale
//! and a momentum model calibrated on a large corporate rating history,
//! shipped so simulation and comparison commands work out of the box.

use crate::ctmc::GeneratorMatrix;
use crate::linalg::Mat;
use crate::momentum::{MomentumModel, MomentumParams};
use crate::num::Real;
use crate::rating::RatingScale;

/// Aaa … Ca with C as the absorbing default state and "WR" coding
/// withdrawal. Aaa–Baa form the investment-grade block.
pub fn corporate_scale() -> RatingScale {
    RatingScale::new(
        ["Aaa", "Aa", "A", "Baa", "Ba", "B", "Caa", "Ca", "C"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        "WR",
        Some("Baa"),
    )
    .expect("built-in scale is valid")
}

/// Baseline generator of the calibrated momentum model (annualized rates).
/// Published at 4 decimals; diagonals are repaired so rows sum to zero
/// exactly.
pub fn calibrated_generator<F: Real>() -> GeneratorMatrix<F> {
    #[rustfmt::skip]
    let off: [[f64; 9]; 9] = [
        [0.0,    0.0836, 0.0031, 0.0,    0.0002, 0.0,    0.0,    0.0,    0.0],
        [0.0117, 0.0,    0.0942, 0.0025, 0.0003, 0.0001, 0.0,    0.0,    0.0],
        [0.0006, 0.0240, 0.0,    0.0666, 0.0017, 0.0007, 0.0002, 0.0,    0.0],
        [0.0002, 0.0016, 0.0387, 0.0,    0.0496, 0.0040, 0.0006, 0.0,    0.0],
        [0.0001, 0.0006, 0.0033, 0.0636, 0.0,    0.1060, 0.0037, 0.0001, 0.0],
        [0.0,    0.0003, 0.0012, 0.0035, 0.0503, 0.0,    0.1012, 0.0040, 0.0004],
        [0.0,    0.0002, 0.0001, 0.0013, 0.0048, 0.1028, 0.0,    0.0622, 0.0261],
        [0.0,    0.0,    0.0018, 0.0029, 0.0050, 0.0447, 0.1346, 0.0,    0.0948],
        [0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    0.0],
    ];
    let q = Mat::from_fn(9, 9, |i, j| F::of(off[i][j]));
    GeneratorMatrix::from_offdiag(corporate_scale(), q).expect("built-in generator is valid")
}

/// Calibrated momentum parameters: α = (0.031, 0.1291) and
/// β = (3.5234, 1.7095) for the investment and speculative channels.
pub fn calibrated_params<F: Real>() -> MomentumParams<F> {
    MomentumParams::new([F::of(0.031), F::of(0.1291)], [F::of(3.5234), F::of(1.7095)])
        .expect("built-in parameters are valid")
}

/// The full calibrated momentum model over [`corporate_scale`].
pub fn calibrated_momentum_model<F: Real>() -> MomentumModel<F> {
    MomentumModel::new(calibrated_generator(), calibrated_params())
        .expect("built-in model is valid")
}
