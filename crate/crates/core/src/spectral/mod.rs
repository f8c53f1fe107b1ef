//! Weyl functions `m±(λ)` and the 2×2 spectral density matrix.
//!
//! `ψ± = φ1 + m± φ2` is the combination that is square integrable toward
//! `±∞` for `Im λ > 0`. Matching `ψ±` to an asymptotic solution with
//! logarithmic derivative `f±` at a point `x` gives
//! `m± = -(φ1' - f± φ1)/(φ2' - f± φ2)`, which is evaluated at a sequence of
//! checkpoints until it stops changing.

pub mod airy;

use std::f64::consts::PI;
use std::io::{self, Write};
use std::ops::ControlFlow;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::potential::{EvalError, PotentialSpec, Side, TailBounds, TailKind};
use crate::propagate::{propagate_raw, ComplexEnergy, PropagationError, SolutionPair, StepControls};

pub use airy::airy_logderiv;

/// How `f±` is obtained at the matching point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AsymptoticModel {
    /// Third-order WKB on the full potential, well tail included. Usable
    /// just past the outer turning point.
    Wkb,
    /// Exact solutions of the linear term alone (Airy functions). Only valid
    /// where the well has died off below the tail tolerance.
    Airy,
}

/// Fixed matching distances `|x|` for the two sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchPoints {
    pub minus: f64,
    pub plus: f64,
}

impl MatchPoints {
    pub fn get(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.minus,
            Side::Plus => self.plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralControls {
    pub step: StepControls,
    pub model: AsymptoticModel,
    /// Agreement required between the last three checkpoint values of `m`.
    pub m_rel_tol: f64,
    /// Distance kept from the outer turning point.
    pub buffer: f64,
    /// Smallest spacing between checkpoints; the spacing also grows as 5% of
    /// `|x|`.
    pub checkpoint_dx: f64,
    pub x_max: f64,
    /// Airy evaluations closer than this to the turning point are refused.
    pub zeta_min: f64,
    /// When set, `m` is taken at exactly these distances (the two preceding
    /// checkpoints are still compared). Keeps `m(E)` smooth across a narrow
    /// energy window.
    pub match_at: Option<MatchPoints>,
}

impl Default for SpectralControls {
    fn default() -> Self {
        SpectralControls {
            step: StepControls::default(),
            model: AsymptoticModel::Wkb,
            m_rel_tol: 1e-6,
            buffer: 10.0,
            checkpoint_dx: 1.0,
            x_max: 2000.0,
            zeta_min: 5.0,
            match_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("imaginary part of the energy must be positive")]
    EpsilonNotPositive,
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Potential(#[from] EvalError),
    #[error("x = {x} is too close to the turning point (|zeta| = {zeta:.3} < {zeta_min}); match farther out")]
    TooCloseToTurningPoint { x: f64, zeta: f64, zeta_min: f64 },
    #[error("x = {x} is not on the {side:?} half-line")]
    WrongSide { x: f64, side: Side },
    #[error("m on the {side:?} side did not settle by |x| = {x_max} ({} checkpoints)", checkpoints.len())]
    NonConvergence {
        side: Side,
        x_max: f64,
        /// `(x, m)` at every checkpoint that was evaluated.
        checkpoints: Vec<(f64, Complex64)>,
    },
    #[error("m- and m+ coincide to machine precision ({m_minus} vs {m_plus}); move off the pole or raise epsilon")]
    DegenerateM { m_minus: Complex64, m_plus: Complex64 },
}

fn side_sign(side: Side) -> f64 {
    // decay toward -∞ needs f > 0, toward +∞ needs f < 0
    -side.sign()
}

/// Third-order WKB logarithmic derivative of the solution that decays toward
/// `side`, built from `Q = 2(V - λ)` and its derivatives at `x`.
pub fn wkb_logderiv(spec: &PotentialSpec, side: Side, x: f64, lambda: Complex64) -> Result<Complex64, EvalError> {
    let [v, d1, d2, d3] = spec.derivatives(x)?;
    let q = 2.0 * (v - lambda);
    let (q1, q2, q3) = (2.0 * d1, 2.0 * d2, 2.0 * d3);
    Ok(wkb_from_q(side_sign(side), q, q1, q2, q3))
}

fn wkb_from_q(s: f64, q: Complex64, q1: f64, q2: f64, q3: f64) -> Complex64 {
    let r = q.sqrt();
    let q_2 = q * q;
    let q_3 = q_2 * q;
    s * r - q1 / (4.0 * q) + s * (q2 / (8.0 * q * r) - 5.0 * q1 * q1 / (32.0 * q_2 * r)) - q3 / (16.0 * q_2)
        + 9.0 * q1 * q2 / (32.0 * q_3)
        - 15.0 * q1 * q1 * q1 / (64.0 * q_3 * q)
}

/// Logarithmic derivative of the solution of the field-only equation
/// `-½θ'' - Fxθ = λθ` that is square integrable toward `side`.
///
/// Uses `ζ = -(2F)^{1/3}(x + λ/F)`: `Ai(ζ)` on the minus side and the
/// outgoing `Ai(ωζ)` on the plus side. Without a field a decaying well falls
/// back to `∓√(-2λ)`; a confining well always uses [`wkb_logderiv`].
pub fn asymptotic_logderiv(
    spec: &PotentialSpec,
    side: Side,
    x: f64,
    lambda: ComplexEnergy,
    zeta_min: f64,
) -> Result<Complex64, SpectralError> {
    if !(x * side.sign() > 0.0) {
        return Err(SpectralError::WrongSide { x, side });
    }
    let lam = lambda.as_complex();
    if spec.well().tail_kind() == TailKind::Confining {
        return Ok(wkb_logderiv(spec, side, x, lam)?);
    }
    let f = spec.field();
    if f == 0.0 {
        return Ok(side_sign(side) * (-2.0 * lam).sqrt());
    }
    let c = (2.0 * f).cbrt();
    let zeta = -c * (x + lam / f);
    if zeta.norm() < zeta_min {
        return Err(SpectralError::TooCloseToTurningPoint {
            x,
            zeta: zeta.norm(),
            zeta_min,
        });
    }
    Ok(match side {
        Side::Minus => -c * airy_logderiv(zeta),
        Side::Plus => {
            let w = airy::omega();
            -w * c * airy_logderiv(w * zeta)
        }
    })
}

/// `m` on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylFunction {
    pub side: Side,
    pub m: Complex64,
    /// Checkpoint at which `m` was taken.
    pub converged_at: f64,
    /// Largest relative change over the last three checkpoints.
    pub residual: f64,
    /// Largest scaled Wronskian defect seen along the trajectory.
    pub wronskian_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylPair {
    pub minus: WeylFunction,
    pub plus: WeylFunction,
}

impl WeylPair {
    pub fn m_minus(&self) -> Complex64 {
        self.minus.m
    }

    pub fn m_plus(&self) -> Complex64 {
        self.plus.m
    }

    pub fn residual(&self) -> f64 {
        self.minus.residual.max(self.plus.residual)
    }

    pub fn match_points(&self) -> MatchPoints {
        MatchPoints {
            minus: self.minus.converged_at.abs(),
            plus: self.plus.converged_at.abs(),
        }
    }
}

/// First checkpoint distance on `side`: past the outer turning point (and
/// any discontinuity) by the buffer, and for the Airy model past the tail.
fn first_checkpoint(
    spec: &PotentialSpec,
    energy: f64,
    side: Side,
    controls: &SpectralControls,
) -> Result<f64, EvalError> {
    let mut base = spec
        .outer_turning_point(energy, side, controls.x_max)?
        .map_or(0.0, f64::abs);
    for bp in spec.breakpoints() {
        if bp * side.sign() > 0.0 {
            base = base.max(bp.abs());
        }
    }
    let mut start = base + controls.buffer;
    if controls.model == AsymptoticModel::Airy {
        if let Ok(TailBounds::Decaying { minus, plus }) = spec.tail_bounds(spec.tail_tol()) {
            let tail = match side {
                Side::Minus => minus.abs(),
                Side::Plus => plus.abs(),
            };
            start = start.max(tail);
        }
    }
    Ok(start)
}

fn logderiv(
    spec: &PotentialSpec,
    side: Side,
    x: f64,
    lambda: ComplexEnergy,
    controls: &SpectralControls,
) -> Result<Complex64, SpectralError> {
    match controls.model {
        AsymptoticModel::Wkb => Ok(wkb_logderiv(spec, side, x, lambda.as_complex())?),
        AsymptoticModel::Airy => asymptotic_logderiv(spec, side, x, lambda, controls.zeta_min),
    }
}

fn m_at(s: &SolutionPair, f: Complex64) -> Option<Complex64> {
    let num = s.dphi1 - f * s.phi1;
    let den = s.dphi2 - f * s.phi2;
    let scale = s.dphi2.norm() + f.norm() * s.phi2.norm();
    if !(den.norm() > 1e-13 * scale) {
        return None;
    }
    let m = -num / den;
    m.is_finite().then_some(m)
}

fn snap(d: f64, dx: f64) -> f64 {
    (d / dx).round().max(1.0) * dx
}

/// Integrates outward on `side` and evaluates `m` at successive checkpoints
/// until the last three agree within `controls.m_rel_tol`, or at the fixed
/// point `controls.match_at`.
pub fn compute_m(
    spec: &PotentialSpec,
    lambda: ComplexEnergy,
    side: Side,
    controls: &SpectralControls,
) -> Result<WeylFunction, SpectralError> {
    if !(lambda.epsilon > 0.0) {
        return Err(SpectralError::EpsilonNotPositive);
    }
    let s = side.sign();
    let dx = controls.step.sample_dx;
    let spacing = |d: f64| snap(controls.checkpoint_dx.max(0.05 * d), dx);
    // checkpoint distances, ascending
    let (mut next, stop) = match controls.match_at {
        Some(mp) => {
            let end = snap(mp.get(side), dx);
            let gap = spacing(end);
            ((end - 2.0 * gap).max(dx), end)
        }
        None => (
            snap(first_checkpoint(spec, lambda.energy, side, controls)?, dx),
            controls.x_max,
        ),
    };
    let gap_for = |d: f64| match controls.match_at {
        Some(_) => spacing(stop),
        None => spacing(d),
    };
    if next >= stop {
        return Err(SpectralError::NonConvergence {
            side,
            x_max: controls.x_max,
            checkpoints: Vec::new(),
        });
    }
    let origin = controls.step.origin;
    let mut checkpoints: Vec<(f64, Complex64)> = Vec::new();
    let mut wronskian_err = 0.0f64;
    let mut result: Option<(f64, Complex64, f64)> = None;
    let mut failure: Option<SpectralError> = None;
    let tol = controls.m_rel_tol;
    let outcome = propagate_raw(
        spec,
        lambda.as_complex(),
        side,
        origin + s * stop,
        &controls.step,
        |pt| {
            wronskian_err = wronskian_err.max(pt.wronskian_err());
            let d = (pt.x - origin).abs();
            if d + 0.25 * dx < next {
                return ControlFlow::Continue(());
            }
            next = d + gap_for(d);
            let f = match logderiv(spec, side, pt.x, lambda, controls) {
                Ok(f) => f,
                Err(SpectralError::TooCloseToTurningPoint { .. }) => return ControlFlow::Continue(()),
                Err(e) => {
                    failure = Some(e);
                    return ControlFlow::Break(());
                }
            };
            let Some(m) = m_at(pt, f) else {
                return ControlFlow::Continue(());
            };
            checkpoints.push((pt.x, m));
            if let [.., (_, a), (_, b), (_, c)] = checkpoints[..] {
                let scale = c.norm();
                let res = [(b - a), (c - b)]
                    .iter()
                    .map(|d| d.re.abs().max(d.im.abs()) / scale)
                    .fold(0.0, f64::max);
                let at_end = controls.match_at.is_some() && d + 0.25 * dx >= stop;
                if res <= tol || at_end {
                    result = Some((pt.x, c, res));
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if let Err(e) = outcome {
        if result.is_none() {
            return Err(e.into());
        }
    }
    match result {
        Some((x, m, residual)) if residual <= tol => Ok(WeylFunction {
            side,
            m,
            converged_at: x,
            residual,
            wronskian_err,
        }),
        _ => Err(SpectralError::NonConvergence {
            side,
            x_max: stop,
            checkpoints,
        }),
    }
}

/// Both Weyl functions, the two sides integrated concurrently.
pub fn compute_weyl_pair(
    spec: &PotentialSpec,
    lambda: ComplexEnergy,
    controls: &SpectralControls,
) -> Result<WeylPair, SpectralError> {
    let (minus, plus) = rayon::join(
        || compute_m(spec, lambda, Side::Minus, controls),
        || compute_m(spec, lambda, Side::Plus, controls),
    );
    Ok(WeylPair {
        minus: minus?,
        plus: plus?,
    })
}

/// `ρ` at finite `ε` with its eigenvalues, `Λ1 ≥ Λ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralMatrix {
    pub rho: [[f64; 2]; 2],
    pub lambda1: f64,
    pub lambda2: f64,
    pub epsilon: f64,
}

impl SpectralMatrix {
    /// `Λ2/Λ1`; small when a single channel carries the weight.
    pub fn eigen_ratio(&self) -> f64 {
        self.lambda2 / self.lambda1
    }

    /// `Λ2 ≥ -tol·Λ1`.
    pub fn is_positive(&self, tol: f64) -> bool {
        self.lambda1 >= 0.0 && self.lambda2 >= -tol * self.lambda1
    }
}

/// `ρ = (1/π) Im[ (1/(m- - m+)) [[1, (m-+m+)/2], [(m-+m+)/2, m- m+]] ]`.
pub fn spectral_matrix(m_minus: Complex64, m_plus: Complex64, epsilon: f64) -> Result<SpectralMatrix, SpectralError> {
    let d = m_minus - m_plus;
    let size = m_minus.norm().max(m_plus.norm()).max(1e-300);
    if !(d.norm() > 4.0 * f64::EPSILON * size) {
        return Err(SpectralError::DegenerateM { m_minus, m_plus });
    }
    let inv = 1.0 / d;
    let r11 = inv.im / PI;
    let r12 = (inv * 0.5 * (m_minus + m_plus)).im / PI;
    let r22 = (inv * m_minus * m_plus).im / PI;
    let half_tr = 0.5 * (r11 + r22);
    let disc = (0.5 * (r11 - r22)).hypot(r12);
    let lambda1 = half_tr + disc;
    // det ρ = -Im m- Im m+ / (π²|m- - m+|²), free of the cancellation in
    // r11 r22 - r12²
    let det = -m_minus.im * m_plus.im / (PI * PI * d.norm_sqr());
    let lambda2 = if lambda1 != 0.0 { det / lambda1 } else { half_tr - disc };
    Ok(SpectralMatrix {
        rho: [[r11, r12], [r12, r22]],
        lambda1,
        lambda2,
        epsilon,
    })
}

/// Everything computed at one probe energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSample {
    pub energy: f64,
    pub epsilon: f64,
    pub weyl: WeylPair,
    pub matrix: SpectralMatrix,
}

pub const SPECTRAL_CSV_HEADER: &str =
    "E,epsilon,re_m_minus,im_m_minus,re_m_plus,im_m_plus,rho11,rho12,rho22,lambda1,lambda2";

impl SpectralSample {
    /// The scalar density `Λ1`.
    pub fn density(&self) -> f64 {
        self.matrix.lambda1
    }

    pub fn csv_row(&self) -> String {
        let (mm, mp) = (self.weyl.m_minus(), self.weyl.m_plus());
        let r = &self.matrix.rho;
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.energy,
            self.epsilon,
            mm.re,
            mm.im,
            mp.re,
            mp.im,
            r[0][0],
            r[0][1],
            r[1][1],
            self.matrix.lambda1,
            self.matrix.lambda2
        )
    }
}

pub fn write_spectrum_csv<W: Write>(mut w: W, samples: &[SpectralSample]) -> io::Result<()> {
    writeln!(w, "{SPECTRAL_CSV_HEADER}")?;
    for s in samples {
        writeln!(w, "{}", s.csv_row())?;
    }
    Ok(())
}

/// `m±` on both sides, then `ρ`.
pub fn spectral_density(
    spec: &PotentialSpec,
    lambda: ComplexEnergy,
    controls: &SpectralControls,
) -> Result<SpectralSample, SpectralError> {
    let weyl = compute_weyl_pair(spec, lambda, controls)?;
    let matrix = spectral_matrix(weyl.m_minus(), weyl.m_plus(), lambda.epsilon)?;
    Ok(SpectralSample {
        energy: lambda.energy,
        epsilon: lambda.epsilon,
        weyl,
        matrix,
    })
}

/// `ψ = φ1 + m- φ2` for `x < origin` and `φ1 + m+ φ2` beyond, sampled on
/// `[-extent, extent]` and scaled to unit maximum modulus.
pub fn wavefunction(
    spec: &PotentialSpec,
    lambda: ComplexEnergy,
    weyl: &WeylPair,
    extent: f64,
    controls: &StepControls,
) -> Result<Vec<(f64, Complex64)>, SpectralError> {
    let origin = controls.origin;
    let mut out = Vec::new();
    for (side, m) in [(Side::Minus, weyl.m_minus()), (Side::Plus, weyl.m_plus())] {
        let mut part = Vec::new();
        propagate_raw(
            spec,
            lambda.as_complex(),
            side,
            origin + side.sign() * extent,
            controls,
            |pt| {
                part.push((pt.x, pt.combine(m).0));
                ControlFlow::Continue(())
            },
        )?;
        if side == Side::Minus {
            part.reverse();
            part.pop();
        }
        out.extend(part);
    }
    let peak = out.iter().map(|(_, p)| p.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        for (_, p) in &mut out {
            *p /= peak;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::WellModel;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matrix_examples() {
        let m = spectral_matrix(c(0.0, -1.0), c(0.0, 1.0), 1e-3).unwrap();
        let q = 0.5 / PI;
        assert!((m.rho[0][0] - q).abs() < 1e-15 && (m.rho[1][1] - q).abs() < 1e-15);
        assert!(m.rho[0][1].abs() < 1e-15);
        assert!((m.lambda1 - q).abs() < 1e-15 && (m.lambda2 - q).abs() < 1e-15);
        assert!((q - 0.159_155).abs() < 1e-6);

        let m = spectral_matrix(c(1.0, -1.0), c(1.0, 1.0), 1e-3).unwrap();
        assert!((m.rho[0][0] - q).abs() < 1e-15);
        assert!((m.rho[0][1] - q).abs() < 1e-15);
        assert!((m.rho[1][1] - 2.0 * q).abs() < 1e-15);
        let s5 = 5f64.sqrt();
        assert!((m.lambda1 - (3.0 + s5) / (4.0 * PI)).abs() < 1e-15);
        assert!((m.lambda2 - (3.0 - s5) / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(m.rho[0][1], m.rho[1][0]);
    }

    #[test]
    fn free_particle_matrix() {
        for k in [0.5, 1.0, 3.0] {
            let m = spectral_matrix(c(0.0, -k), c(0.0, k), 0.0).unwrap();
            assert!((m.rho[0][0] - 1.0 / (2.0 * PI * k)).abs() < 1e-15);
            assert!((m.rho[1][1] - k / (2.0 * PI)).abs() < 1e-15);
            assert!(m.lambda2 > 0.0);
        }
    }

    #[test]
    fn determinant_formula_matches_direct() {
        for &(a, b) in &[
            (c(0.3, -0.7), c(-1.2, 0.4)),
            (c(2.0, -1e-3), c(1.5, 2.0)),
            (c(-0.4, -3.0), c(0.1, 0.02)),
        ] {
            let m = spectral_matrix(a, b, 0.0).unwrap();
            let r = m.rho;
            let det = r[0][0] * r[1][1] - r[0][1] * r[0][1];
            assert!((m.lambda1 * m.lambda2 - det).abs() < 1e-12 * m.lambda1 * m.lambda1);
            assert!((m.lambda1 + m.lambda2 - r[0][0] - r[1][1]).abs() < 1e-12 * m.lambda1);
        }
    }

    #[test]
    fn degenerate_m_is_refused() {
        let z = c(0.5, 0.1);
        assert!(matches!(
            spectral_matrix(z, z, 1e-3),
            Err(SpectralError::DegenerateM { .. })
        ));
    }

    #[test]
    fn field_free_logderiv() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.0).unwrap();
        let lam = ComplexEnergy::new(-0.5, 1e-12).unwrap();
        let f = asymptotic_logderiv(&spec, Side::Plus, 50.0, lam, 5.0).unwrap();
        assert!((f - c(-1.0, 0.0)).norm() < 1e-11);
        let f = asymptotic_logderiv(&spec, Side::Minus, -50.0, lam, 5.0).unwrap();
        assert!((f - c(1.0, 0.0)).norm() < 1e-11);
    }

    #[test]
    fn airy_logderiv_far_from_turning_point() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let lam = ComplexEnergy::new(-0.5, 1e-6).unwrap();
        // uphill: growth toward the origin
        let f = asymptotic_logderiv(&spec, Side::Minus, -200.0, lam, 5.0).unwrap();
        let wkb0 = 21f64.sqrt();
        assert!((wkb0 - 4.583).abs() < 1e-3);
        // leading term plus -Q'/(4Q)
        assert!((f.re - wkb0 - 0.1 / 84.0).abs() < 1e-5, "{f}");
        assert!((f.re - wkb0).abs() < 2e-3);
        // downhill: outgoing wave
        let f = asymptotic_logderiv(&spec, Side::Plus, 200.0, lam, 5.0).unwrap();
        let k = 19f64.sqrt();
        assert!((f.im - k).abs() < 1e-3, "{f}");
        assert!((f.re + 0.1 / 76.0).abs() < 1e-5, "{f}");
        assert!(f.im > 0.0);
    }

    #[test]
    fn airy_and_wkb_agree_on_the_linear_potential() {
        let well = WellModel::SquareWell { depth: 1.0, width: 2.0 };
        for f in [0.02, 0.05, 0.1] {
            let spec = PotentialSpec::new(well.clone(), f).unwrap();
            for e in [-0.8, -0.3, 0.2] {
                let lam = ComplexEnergy::new(e, 1e-5).unwrap();
                for (side, x) in [(Side::Minus, -80.0), (Side::Plus, 150.0)] {
                    let a = asymptotic_logderiv(&spec, side, x, lam, 5.0).unwrap();
                    let w = wkb_logderiv(&spec, side, x, lam.as_complex()).unwrap();
                    // next WKB order is about F³/|Q|^{4.5}
                    let q = 2.0 * (spec.eval_total(x).unwrap() - e).abs();
                    let bound = 10.0 * (2.0 * f).powi(3) / q.powf(4.5) + 1e-12;
                    assert!((a - w).norm() < bound, "F={f} E={e} {side:?}: {a} vs {w}");
                    // first correction size, as a looser sanity bound
                    assert!((a - w).norm() < f / (4.0 * (0.5 * q).powf(1.5)));
                }
            }
        }
    }

    #[test]
    fn airy_refuses_near_turning_point() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let lam = ComplexEnergy::new(-0.5, 1e-6).unwrap();
        let r = asymptotic_logderiv(&spec, Side::Plus, 11.0, lam, 5.0);
        assert!(matches!(r, Err(SpectralError::TooCloseToTurningPoint { .. })));
        let r = asymptotic_logderiv(&spec, Side::Plus, -11.0, lam, 5.0);
        assert!(matches!(r, Err(SpectralError::WrongSide { .. })));
    }

    #[test]
    fn wkb_is_normalization_free_and_solves_riccati() {
        // f' + f² = Q up to the next WKB order
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let lam = c(-0.5, 1e-6);
        for (side, x) in [(Side::Minus, -60.0), (Side::Plus, 80.0)] {
            let h = 1e-3;
            let f = |x| wkb_logderiv(&spec, side, x, lam).unwrap();
            let d = (f(x + h) - f(x - h)) / (2.0 * h);
            let q = 2.0 * (spec.eval_total(x).unwrap() - lam);
            let res = d + f(x) * f(x) - q;
            assert!(res.norm() < 1e-7 * q.norm(), "{side:?}: {res}");
        }
    }

    #[test]
    fn free_particle_weyl_functions() {
        let spec = PotentialSpec::new(
            WellModel::SquareWell {
                depth: 1e-300,
                width: 1e-6,
            },
            0.0,
        )
        .unwrap();
        let k: f64 = 1.3;
        let lam = ComplexEnergy::new(0.5 * k * k, 1e-9).unwrap();
        let pair = compute_weyl_pair(&spec, lam, &SpectralControls::default()).unwrap();
        assert!((pair.m_plus() - c(0.0, k)).norm() < 1e-8, "{}", pair.m_plus());
        assert!((pair.m_minus() - c(0.0, -k)).norm() < 1e-8, "{}", pair.m_minus());
    }

    #[test]
    fn herglotz_signs_and_positivity() {
        let controls = SpectralControls::default();
        for (well, f) in [
            (WellModel::hydrogen(), 0.05),
            (WellModel::hydrogen(), 0.0),
            (WellModel::Harmonic { omega: 1.0 }, 0.0),
            (
                WellModel::DoubleWell {
                    a: std::f64::consts::SQRT_2,
                    r: 6.0,
                },
                0.04,
            ),
        ] {
            let spec = PotentialSpec::new(well, f).unwrap();
            for i in 0..12 {
                let e = -0.7 + 0.1 * i as f64;
                let lam = ComplexEnergy::new(e, 1e-4).unwrap();
                let s = spectral_density(&spec, lam, &controls).unwrap();
                assert!(s.weyl.m_plus().im > 0.0, "{e}: {}", s.weyl.m_plus());
                assert!(s.weyl.m_minus().im < 0.0, "{e}: {}", s.weyl.m_minus());
                assert!(s.matrix.is_positive(1e-12));
                assert!(s.weyl.minus.wronskian_err < 1e-8 && s.weyl.plus.wronskian_err < 1e-8);
            }
        }
    }

    #[test]
    fn psi_decays_on_its_half_line() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let controls = SpectralControls::default();
        for e in [-0.6, -0.3, 0.1] {
            let lam = ComplexEnergy::new(e, 1e-3).unwrap();
            for side in [Side::Minus, Side::Plus] {
                let w = compute_m(&spec, lam, side, &controls).unwrap();
                let t = crate::propagate::integrate_pair(&spec, lam, side, w.converged_at, &controls.step).unwrap();
                let n = t.samples.len();
                let tail = &t.samples[n - n / 5..];
                let first = tail[0].combine(w.m).0.norm();
                let last = tail[tail.len() - 1].combine(w.m).0.norm();
                assert!(last < first, "{e} {side:?}: {first} -> {last}");
            }
        }
    }

    #[test]
    fn airy_model_matches_wkb_model_for_compact_well() {
        let spec = PotentialSpec::new(WellModel::SquareWell { depth: 1.0, width: 2.0 }, 0.05).unwrap();
        let lam = ComplexEnergy::new(-0.4, 1e-4).unwrap();
        let wkb = compute_weyl_pair(&spec, lam, &SpectralControls::default()).unwrap();
        let airy = compute_weyl_pair(
            &spec,
            lam,
            &SpectralControls {
                model: AsymptoticModel::Airy,
                ..SpectralControls::default()
            },
        )
        .unwrap();
        for (a, b) in [(wkb.m_minus(), airy.m_minus()), (wkb.m_plus(), airy.m_plus())] {
            assert!((a - b).norm() < 1e-5 * a.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn non_convergence_carries_checkpoints() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let lam = ComplexEnergy::new(-0.5, 1e-6).unwrap();
        let controls = SpectralControls {
            m_rel_tol: 1e-17,
            x_max: 60.0,
            ..SpectralControls::default()
        };
        match compute_m(&spec, lam, Side::Plus, &controls) {
            Err(SpectralError::NonConvergence { checkpoints, .. }) => assert!(checkpoints.len() >= 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fixed_match_point_is_honored() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let lam = ComplexEnergy::new(-0.52, 1e-5).unwrap();
        let free = compute_weyl_pair(&spec, lam, &SpectralControls::default()).unwrap();
        let controls = SpectralControls {
            match_at: Some(MatchPoints {
                minus: 40.0,
                plus: 120.0,
            }),
            ..SpectralControls::default()
        };
        let fixed = compute_weyl_pair(&spec, lam, &controls).unwrap();
        assert!((fixed.minus.converged_at + 40.0).abs() < 1e-9);
        assert!((fixed.plus.converged_at - 120.0).abs() < 1e-9);
        assert!((fixed.m_plus() - free.m_plus()).norm() < 1e-5 * free.m_plus().norm());
        assert!((fixed.m_minus() - free.m_minus()).norm() < 1e-5 * free.m_minus().norm());
    }
}
