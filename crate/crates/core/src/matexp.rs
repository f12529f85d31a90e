//! Matrix exponential and its first and second directional derivatives.
//!
//! `expm` is the classic order-13 Padé approximant with scaling and squaring.
//! The derivatives are obtained from one exponential of a block-augmented
//! matrix each: the upper-right h×h block of exp([[A, B], [0, A]] t) equals
//! ∫₀ᵗ e^{Av} B e^{A(t−v)} dv, the directional derivative of e^{At} along B,
//! and nesting the construction once more yields the mixed second derivative.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num::Real;

/// Numerator coefficients of the [13/13] Padé approximant to exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Scaling threshold for the order-13 approximant (Higham 2005).
const THETA13: f64 = 5.371920351148152;

/// e^{At} for square A and t ≥ 0 (any finite t works; the sign convention is
/// the caller's). Errors on non-finite input or output rather than returning
/// garbage.
pub fn expm<F: Real>(a: &Mat<F>, t: F) -> Result<Mat<F>> {
    if !a.is_square() {
        return Err(Error::Invalid("expm needs a square matrix".into()));
    }
    if !a.is_finite() || !t.is_finite() {
        return Err(Error::Numerical("non-finite input to expm".into()));
    }
    let m = a.scaled(t);

    // s squarings bring the norm under theta_13.
    let norm = m.one_norm().as_f64();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m.scaled(F::of(0.5f64.powi(s)));

    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    if !r.is_finite() {
        return Err(Error::Numerical("expm overflowed".into()));
    }
    Ok(r)
}

fn pade13<F: Real>(a: &Mat<F>) -> Result<Mat<F>> {
    let n = a.rows();
    let b: Vec<F> = PADE13.iter().map(|&c| F::of(c)).collect();
    let id = Mat::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let mut w = a6.scaled(b[13]);
    w.add_scaled(&a4, b[11]);
    w.add_scaled(&a2, b[9]);
    let mut u = a6.matmul(&w);
    u.add_scaled(&a6, b[7]);
    u.add_scaled(&a4, b[5]);
    u.add_scaled(&a2, b[3]);
    u.add_scaled(&id, b[1]);
    let u = a.matmul(&u);

    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let mut w = a6.scaled(b[12]);
    w.add_scaled(&a4, b[10]);
    w.add_scaled(&a2, b[8]);
    let mut v = a6.matmul(&w);
    v.add_scaled(&a6, b[6]);
    v.add_scaled(&a4, b[4]);
    v.add_scaled(&a2, b[2]);
    v.add_scaled(&id, b[0]);

    // (V - U) R = (V + U)
    let mut num = v.clone();
    num.add_scaled(&u, F::one());
    let mut den = v;
    den.add_scaled(&u, -F::one());
    den.solve(&num)
}

/// ∫₀ᵗ e^{Av} B e^{A(t−v)} dv: the derivative of e^{At} in direction B,
/// read off as the upper-right h×h block of exp([[A, B], [0, A]] t).
pub fn dexpm_block<F: Real>(a: &Mat<F>, b: &Mat<F>, t: F) -> Result<Mat<F>> {
    let h = a.rows();
    if !a.is_square() || !b.is_square() || b.rows() != h {
        return Err(Error::Invalid(
            "dexpm_block needs square matrices of equal dimension".into(),
        ));
    }
    let mut c = Mat::zeros(2 * h, 2 * h);
    c.set_block(0, 0, a);
    c.set_block(0, h, b);
    c.set_block(h, h, a);
    let e = expm(&c, t)?;
    Ok(e.block(0, h, h, h))
}

/// Mixed second directional derivative ∂²(e^{At})/∂B1∂B2, read off as the
/// top-right h×h block (rows 1..h, columns 3h+1..4h) of exp(C t) with
/// C = [[C_eta(B1), dC_eta(B1)/d(direction B2)], [0, C_eta(B1)]] and
/// C_eta(B) = [[A, B], [0, A]].
pub fn d2expm_block<F: Real>(a: &Mat<F>, b1: &Mat<F>, b2: &Mat<F>, t: F) -> Result<Mat<F>> {
    let h = a.rows();
    if !a.is_square()
        || !b1.is_square()
        || !b2.is_square()
        || b1.rows() != h
        || b2.rows() != h
    {
        return Err(Error::Invalid(
            "d2expm_block needs square matrices of equal dimension".into(),
        ));
    }
    // Perturbing A inside C_eta(B1) along B2 moves both diagonal blocks, so
    // the upper-right 2h block is diag(B2, B2).
    let mut c = Mat::zeros(4 * h, 4 * h);
    c.set_block(0, 0, a);
    c.set_block(0, h, b1);
    c.set_block(h, h, a);
    c.set_block(0, 2 * h, b2);
    c.set_block(h, 3 * h, b2);
    c.set_block(2 * h, 2 * h, a);
    c.set_block(2 * h, 3 * h, b1);
    c.set_block(3 * h, 3 * h, a);
    let e = expm(&c, t)?;
    Ok(e.block(0, 3 * h, h, h))
}
