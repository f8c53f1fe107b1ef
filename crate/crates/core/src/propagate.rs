//! Outward integration of the stationary Schrödinger equation at complex
//! energy.
//!
//! Two solutions are carried together from the origin `c`:
//! `φ1(c) = 1, φ1'(c) = 0, φ2(c) = 0, φ2'(c) = 1`, so their Wronskian is one
//! and stays one under `φ'' = 2(V(x) − λ)φ`.

use std::io::{self, Write};
use std::ops::ControlFlow;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::ode::{self, OdeControls, OdeError, StepStats};
use crate::potential::{EvalError, PotentialSpec, Side};

/// `λ = E + iε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexEnergy {
    pub energy: f64,
    pub epsilon: f64,
}

impl ComplexEnergy {
    pub fn new(energy: f64, epsilon: f64) -> Result<Self, PropagationError> {
        if !energy.is_finite() || !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(PropagationError::InvalidEnergy { energy, epsilon });
        }
        Ok(ComplexEnergy { energy, epsilon })
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.energy, self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControls {
    /// Relative local error per step.
    pub rel_tol: f64,
    /// Spacing of stored samples.
    pub sample_dx: f64,
    /// Matching origin `c`.
    pub origin: f64,
    /// Integration stops with [`PropagationError::Overflow`] past this
    /// magnitude.
    pub growth_limit: f64,
    pub max_steps: usize,
    /// Tolerance on the scaled Wronskian defect used by [`Trajectory::check_wronskian`].
    pub wronskian_tol: f64,
}

impl Default for StepControls {
    fn default() -> Self {
        StepControls {
            rel_tol: 1e-10,
            sample_dx: 0.1,
            origin: 0.0,
            growth_limit: 1e200,
            max_steps: 5_000_000,
            wronskian_tol: 1e-8,
        }
    }
}

impl StepControls {
    pub(crate) fn ode(&self) -> OdeControls {
        OdeControls {
            rel_tol: self.rel_tol,
            abs_tol: 1e-300,
            h_init: 1e-3,
            max_steps: self.max_steps,
            growth_limit: self.growth_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("invalid complex energy E = {energy}, epsilon = {epsilon}")]
    InvalidEnergy { energy: f64, epsilon: f64 },
    #[error("imaginary part of the energy must be positive")]
    EpsilonNotPositive,
    #[error("stop point {x_stop} is not beyond the origin {origin} on the {side:?} side")]
    BadStop { x_stop: f64, origin: f64, side: Side },
    #[error(transparent)]
    Potential(#[from] EvalError),
    #[error("solutions reached magnitude {magnitude:.3e} at x = {x}; shorten the range")]
    Overflow { x: f64, magnitude: f64 },
    #[error("step size underflow at x = {x}")]
    Stiffness { x: f64 },
    #[error("step budget exhausted at x = {x}")]
    TooManySteps { x: f64 },
    #[error("non-finite solution at x = {x}")]
    NonFinite { x: f64 },
}

impl From<OdeError> for PropagationError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::Rhs(e) => PropagationError::Potential(e),
            OdeError::StepUnderflow { x } => PropagationError::Stiffness { x },
            OdeError::TooManySteps { x } => PropagationError::TooManySteps { x },
            OdeError::Overflow { x, magnitude } => PropagationError::Overflow { x, magnitude },
            OdeError::NonFinite { x } => PropagationError::NonFinite { x },
        }
    }
}

/// `φ1, φ1', φ2, φ2'` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionPair {
    pub x: f64,
    pub phi1: Complex64,
    pub dphi1: Complex64,
    pub phi2: Complex64,
    pub dphi2: Complex64,
}

impl SolutionPair {
    pub(crate) fn from_state(x: f64, y: &[Complex64; 4]) -> Self {
        SolutionPair {
            x,
            phi1: y[0],
            dphi1: y[1],
            phi2: y[2],
            dphi2: y[3],
        }
    }

    pub fn wronskian(&self) -> Complex64 {
        self.phi1 * self.dphi2 - self.dphi1 * self.phi2
    }

    /// `|W − 1|` divided by the size of the products that form `W`
    /// (at least one). While the solutions are O(1) this is the plain
    /// defect; once they grow, it is the defect relative to what f64
    /// cancellation can resolve.
    pub fn wronskian_err(&self) -> f64 {
        let scale = (self.phi1 * self.dphi2).norm() + (self.dphi1 * self.phi2).norm();
        (self.wronskian() - 1.0).norm() / scale.max(1.0)
    }

    /// `φ1 + m φ2` and its derivative.
    pub fn combine(&self, m: Complex64) -> (Complex64, Complex64) {
        (self.phi1 + m * self.phi2, self.dphi1 + m * self.dphi2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub side: Side,
    pub samples: Vec<SolutionPair>,
    pub stats: StepStats,
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "x,re_phi1,im_phi1,re_dphi1,im_dphi1,re_phi2,im_phi2,re_dphi2,im_dphi2,wronskian_err";

impl Trajectory {
    pub fn max_wronskian_err(&self) -> f64 {
        self.samples.iter().map(SolutionPair::wronskian_err).fold(0.0, f64::max)
    }

    /// Ok when every sample satisfies the Wronskian tolerance; otherwise the
    /// first offending sample.
    pub fn check_wronskian(&self, tol: f64) -> Result<(), SolutionPair> {
        match self.samples.iter().find(|s| !(s.wronskian_err() < tol)) {
            Some(s) => Err(*s),
            None => Ok(()),
        }
    }

    pub fn last(&self) -> &SolutionPair {
        self.samples.last().expect("trajectory always holds the origin")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                s.x,
                s.phi1.re,
                s.phi1.im,
                s.dphi1.re,
                s.dphi1.im,
                s.phi2.re,
                s.phi2.im,
                s.dphi2.re,
                s.dphi2.im,
                s.wronskian_err()
            )?;
        }
        Ok(())
    }
}

/// Integrates from the origin toward `x_stop`, calling `observe` at the
/// origin, at every multiple of `sample_dx` and at `x_stop`. The energy is
/// not restricted to the upper half-plane here.
pub(crate) fn propagate_raw<O>(
    spec: &PotentialSpec,
    lambda: Complex64,
    side: Side,
    x_stop: f64,
    controls: &StepControls,
    mut observe: O,
) -> Result<StepStats, PropagationError>
where
    O: FnMut(&SolutionPair) -> ControlFlow<()>,
{
    let origin = controls.origin;
    if !((x_stop - origin) * side.sign() > 0.0) {
        return Err(PropagationError::BadStop { x_stop, origin, side });
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let y0 = [one, zero, zero, one];
    let bps = spec.breakpoints();
    let stats = ode::integrate(
        origin,
        y0,
        x_stop,
        controls.sample_dx,
        &bps,
        &controls.ode(),
        |x, y| {
            let q = 2.0 * (spec.eval_total(x)? - lambda);
            Ok([y[1], q * y[0], y[3], q * y[2]])
        },
        |x, y| observe(&SolutionPair::from_state(x, y)),
    )?;
    Ok(stats)
}

/// Integrates both normalized solutions from the origin to `x_stop`.
pub fn integrate_pair(
    spec: &PotentialSpec,
    lambda: ComplexEnergy,
    side: Side,
    x_stop: f64,
    controls: &StepControls,
) -> Result<Trajectory, PropagationError> {
    if !(lambda.epsilon > 0.0) {
        return Err(PropagationError::EpsilonNotPositive);
    }
    integrate_pair_raw(spec, lambda.as_complex(), side, x_stop, controls)
}

pub(crate) fn integrate_pair_raw(
    spec: &PotentialSpec,
    lambda: Complex64,
    side: Side,
    x_stop: f64,
    controls: &StepControls,
) -> Result<Trajectory, PropagationError> {
    let mut samples = Vec::new();
    let stats = propagate_raw(spec, lambda, side, x_stop, controls, |s| {
        samples.push(*s);
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory { side, samples, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::WellModel;

    fn free() -> PotentialSpec {
        let c =
            crate::potential::CustomWell::new("0", Default::default(), crate::potential::TailKind::Decaying).unwrap();
        PotentialSpec::new(WellModel::Custom(c), 0.0).unwrap()
    }

    #[test]
    fn free_solution_is_sine() {
        // φ2 = sin(kx)/k with k = 1
        let lam = ComplexEnergy::new(0.5, 1e-14).unwrap();
        let x = std::f64::consts::FRAC_PI_2;
        let t = integrate_pair(&free(), lam, Side::Plus, x, &StepControls::default()).unwrap();
        let end = t.last();
        assert_eq!(end.x, x);
        assert!((end.phi2 - 1.0).norm() < 1e-9, "{}", end.phi2);
        assert!(end.phi1.norm() < 1e-9);
    }

    #[test]
    fn initial_conditions_are_exact() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let lam = ComplexEnergy::new(-0.5, 1e-6).unwrap();
        let t = integrate_pair(&spec, lam, Side::Minus, -5.0, &StepControls::default()).unwrap();
        let s = t.samples[0];
        assert_eq!(s.x, 0.0);
        assert_eq!(s.phi1, Complex64::new(1.0, 0.0));
        assert_eq!(s.dphi1, Complex64::new(0.0, 0.0));
        assert_eq!(s.phi2, Complex64::new(0.0, 0.0));
        assert_eq!(s.dphi2, Complex64::new(1.0, 0.0));
        for w in t.samples.windows(2) {
            assert!(w[1].x < w[0].x);
        }
    }

    #[test]
    fn samples_cover_every_grid_multiple() {
        let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).unwrap();
        let lam = ComplexEnergy::new(0.5, 1e-6).unwrap();
        let t = integrate_pair(&spec, lam, Side::Plus, 3.05, &StepControls::default()).unwrap();
        assert_eq!(t.samples.len(), 32);
        for (k, s) in t.samples.iter().take(31).enumerate() {
            assert!((s.x - 0.1 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn wronskian_is_conserved() {
        let cases = [
            (WellModel::hydrogen(), 0.05, -0.5, Side::Plus, 60.0),
            (WellModel::hydrogen(), 0.05, -0.5, Side::Minus, -30.0),
            (WellModel::hydrogen(), 0.0, -0.2, Side::Plus, 40.0),
            (WellModel::Harmonic { omega: 1.0 }, 0.0, 2.5, Side::Minus, -12.0),
            (
                WellModel::SquareWell { depth: 2.0, width: 4.0 },
                0.0,
                -0.3,
                Side::Plus,
                20.0,
            ),
            (
                WellModel::DoubleWell { a: 2f64.sqrt(), r: 9.0 },
                0.04,
                -0.6,
                Side::Plus,
                80.0,
            ),
        ];
        for (well, f, e, side, stop) in cases {
            let spec = PotentialSpec::new(well, f).unwrap();
            for eps in [1e-10, 1e-4] {
                let lam = ComplexEnergy::new(e, eps).unwrap();
                let t = integrate_pair(&spec, lam, side, stop, &StepControls::default()).unwrap();
                assert!(t.max_wronskian_err() < 1e-8, "{:e}", t.max_wronskian_err());
            }
        }
    }

    #[test]
    fn loose_tolerance_breaks_wronskian() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let lam = ComplexEnergy::new(-0.5, 1e-6).unwrap();
        let loose = StepControls {
            rel_tol: 1e-3,
            ..Default::default()
        };
        let t = integrate_pair(&spec, lam, Side::Plus, 60.0, &loose).unwrap();
        assert!(t.check_wronskian(1e-8).is_err());
    }

    #[test]
    fn conjugate_energy_gives_conjugate_trajectory() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.03).unwrap();
        let lam = Complex64::new(-0.45, 1e-3);
        let c = StepControls::default();
        let a = integrate_pair_raw(&spec, lam, Side::Plus, 30.0, &c).unwrap();
        let b = integrate_pair_raw(&spec, lam.conj(), Side::Plus, 30.0, &c).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (p, q) in a.samples.iter().zip(&b.samples) {
            assert_eq!(p.phi1, q.phi1.conj());
            assert_eq!(p.dphi2, q.dphi2.conj());
        }
    }

    #[test]
    fn rejects_real_axis_and_wrong_direction() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.0).unwrap();
        let c = StepControls::default();
        let real = ComplexEnergy::new(-0.5, 0.0).unwrap();
        assert_eq!(
            integrate_pair(&spec, real, Side::Plus, 1.0, &c).unwrap_err(),
            PropagationError::EpsilonNotPositive
        );
        let lam = ComplexEnergy::new(-0.5, 1e-3).unwrap();
        assert!(matches!(
            integrate_pair(&spec, lam, Side::Plus, -1.0, &c),
            Err(PropagationError::BadStop { .. })
        ));
        assert!(ComplexEnergy::new(-0.5, -1e-3).is_err());
    }

    #[test]
    fn overflow_reports_reach() {
        let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).unwrap();
        let lam = ComplexEnergy::new(0.7, 1e-3).unwrap();
        let err = integrate_pair(&spec, lam, Side::Plus, 100.0, &StepControls::default()).unwrap_err();
        let PropagationError::Overflow { x, magnitude } = err else {
            panic!("{err:?}")
        };
        assert!(x > 20.0 && x < 40.0 && magnitude > 1e200);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.0).unwrap();
        let lam = ComplexEnergy::new(-0.5, 1e-3).unwrap();
        let t = integrate_pair(&spec, lam, Side::Plus, 1.0, &StepControls::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_CSV_HEADER);
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[1].split(',').count(), 10);
    }
}
