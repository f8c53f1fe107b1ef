//! Logarithmic derivative `Ai'(z)/Ai(z)` for large `|z|`.
//!
//! For `|arg z| ≤ 2π/3` the standard large-argument expansions are summed
//! to their smallest term. Closer to the negative real axis the connection
//! `Ai(z) = -ω Ai(ωz) - ω² Ai(ω²z)`, `ω = e^{2πi/3}`, moves both pieces back
//! into that sector.

use std::f64::consts::PI;

use num_complex::Complex64;

const MAX_TERMS: usize = 80;

/// `ω = e^{2πi/3}`
pub(crate) fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Sums `Σ (-1)^k u_k ξ^{-k}` and `Σ (-1)^k v_k ξ^{-k}`, stopping at the
/// smallest term of the `u` series.
fn series(xi: Complex64) -> (Complex64, Complex64) {
    let inv = 1.0 / xi;
    let mut u = 1.0f64;
    let mut pow = Complex64::new(1.0, 0.0);
    let mut a = Complex64::new(1.0, 0.0);
    let mut b = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        pow *= -inv;
        let term = pow * u;
        let size = term.norm();
        if size >= last {
            break;
        }
        a += term;
        b += pow * v;
        last = size;
        if size < 1e-18 * a.norm() {
            break;
        }
    }
    (a, b)
}

/// `(ξ, z^{1/4}, A, B)` with
/// `Ai(z) = e^{-ξ} z^{-1/4} A / (2√π)` and `Ai'(z) = -e^{-ξ} z^{1/4} B / (2√π)`.
fn sector(z: Complex64) -> (Complex64, Complex64, Complex64, Complex64) {
    let sqrt_z = z.sqrt();
    let xi = 2.0 / 3.0 * z * sqrt_z;
    let (a, b) = series(xi);
    (xi, sqrt_z.sqrt(), a, b)
}

/// `Ai'(z)/Ai(z)`. The expansion error falls like `exp(-4|z|^{3/2}/3)`;
/// callers keep `|z|` at five or more.
pub fn airy_logderiv(z: Complex64) -> Complex64 {
    if z.arg().abs() <= 2.0 * PI / 3.0 {
        let (_, _, a, b) = sector(z);
        return -z.sqrt() * b / a;
    }
    let w = omega();
    let w2 = w * w;
    let (xi1, q1, a1, b1) = sector(w * z);
    let (xi2, q2, a2, b2) = sector(w2 * z);
    // factor out the larger exponential
    let shift = if (-xi1).re >= (-xi2).re { xi1 } else { xi2 };
    let e1 = (shift - xi1).exp();
    let e2 = (shift - xi2).exp();
    let ai = -w * e1 * a1 / q1 - w2 * e2 * a2 / q2;
    let dai = w2 * e1 * q1 * b1 + w * e2 * q2 * b2;
    dai / ai
}
