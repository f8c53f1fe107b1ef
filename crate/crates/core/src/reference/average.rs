//! Rate curves and their average over field orientations.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CurveError {
    #[error("rate curve is empty")]
    Empty,
    #[error("field values must increase strictly (node {0})")]
    NotIncreasing(usize),
    #[error("rate at node {index} must be positive and finite, got {rate}")]
    BadRate { index: usize, rate: f64 },
    #[error("field must be positive, got {0}")]
    BadField(f64),
    #[error("field {field} lies beyond the last node {last}")]
    OutOfRange { field: f64, last: f64 },
}

/// `(F, Γ)` nodes interpolated linearly in `(F, ln Γ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    nodes: Vec<(f64, f64)>,
    /// Value used below the first node.
    floor: f64,
}

impl RateCurve {
    pub fn new(nodes: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        if nodes.is_empty() {
            return Err(CurveError::Empty);
        }
        for (i, &(f, g)) in nodes.iter().enumerate() {
            if !(g > 0.0 && g.is_finite()) {
                return Err(CurveError::BadRate { index: i, rate: g });
            }
            if !f.is_finite() || (i > 0 && !(f > nodes[i - 1].0)) {
                return Err(CurveError::NotIncreasing(i));
            }
        }
        Ok(RateCurve { nodes, floor: 0.0 })
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn last_field(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].0
    }

    /// `Γ(f)`; the floor below the first node.
    pub fn rate(&self, f: f64) -> Result<f64, CurveError> {
        let last = self.last_field();
        if f > last {
            return Err(CurveError::OutOfRange { field: f, last });
        }
        let i = self.nodes.partition_point(|n| n.0 <= f);
        if i == 0 {
            return Ok(self.floor);
        }
        if i == self.nodes.len() {
            return Ok(self.nodes[i - 1].1);
        }
        let (f0, g0) = self.nodes[i - 1];
        let (f1, g1) = self.nodes[i];
        let t = (f - f0) / (f1 - f0);
        Ok((g0.ln() + t * (g1.ln() - g0.ln())).exp())
    }

    /// Largest rate at fields up to `f`.
    pub fn max_up_to(&self, f: f64) -> f64 {
        self.nodes
            .iter()
            .take_while(|n| n.0 <= f)
            .map(|n| n.1)
            .chain(self.rate(f).ok())
            .fold(self.floor, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngularAverage {
    /// `½∫₀^π Γ(F|cos θ|) sin θ dθ`, the mean over directions.
    pub solid_angle: f64,
    /// Twice the mean, i.e. with a `1/2π` prefactor on `∫dΩ`.
    pub literal: f64,
}

pub const AVERAGE_REL_TOL: f64 = 1e-6;

/// Average of `Γ(F|cos θ|)` over directions. With `u = |cos θ|` this is
/// `∫₀¹ Γ(Fu) du`, integrated node interval by node interval with adaptive
/// Simpson.
pub fn angular_average(curve: &RateCurve, field: f64) -> Result<AngularAverage, CurveError> {
    if !(field > 0.0 && field.is_finite()) {
        return Err(CurveError::BadField(field));
    }
    curve.rate(field)?;
    let mut cuts = vec![0.0];
    cuts.extend(curve.nodes.iter().map(|n| n.0 / field).filter(|&u| u > 0.0 && u < 1.0));
    cuts.push(1.0);
    let g = |u: f64| curve.rate(field * u).unwrap_or(0.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += simpson(&g, w[0], w[1], AVERAGE_REL_TOL);
    }
    Ok(AngularAverage {
        solid_angle: total,
        literal: 2.0 * total,
    })
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
    let left = (m - a) / 6.0 * (fa + 4.0 * lm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * rm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol * (left + right).abs() {
        return left + right + diff / 15.0;
    }
    step(f, a, m, fa, lm, fm, left, tol, depth - 1) + step(f, m, b, fm, rm, fb, right, tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_curve_averages_to_itself() {
        let c = RateCurve::new(vec![(0.0, 3.0), (1.0, 3.0)]).unwrap();
        let a = angular_average(&c, 0.7).unwrap();
        assert!((a.solid_angle - 3.0).abs() < 3e-6);
        assert!((a.literal - 6.0).abs() < 6e-6);
    }

    #[test]
    fn linear_curve_averages_to_half() {
        let nodes: Vec<(f64, f64)> = (1..=4000)
            .map(|i| {
                let f = 1e-3 * i as f64 / 4.0;
                (f, f)
            })
            .collect();
        let c = RateCurve::new(nodes).unwrap();
        let a = angular_average(&c, 1.0).unwrap();
        assert!((a.solid_angle - 0.5).abs() < 1e-6, "{a:?}");
    }

    #[test]
    fn interpolation_is_log_linear() {
        let c = RateCurve::new(vec![(1.0, 1e-4), (2.0, 1e-2)]).unwrap().with_floor(1e-9);
        assert!((c.rate(1.5).unwrap() - 1e-3).abs() < 1e-15);
        assert_eq!(c.rate(0.5).unwrap(), 1e-9);
        assert!(matches!(c.rate(2.5), Err(CurveError::OutOfRange { .. })));
    }

    #[test]
    fn bad_curves_are_refused() {
        assert_eq!(RateCurve::new(vec![]), Err(CurveError::Empty));
        assert_eq!(
            RateCurve::new(vec![(1.0, 1.0), (1.0, 2.0)]),
            Err(CurveError::NotIncreasing(1))
        );
        assert_eq!(
            RateCurve::new(vec![(1.0, 0.0)]),
            Err(CurveError::BadRate { index: 0, rate: 0.0 })
        );
        let c = RateCurve::new(vec![(1.0, 1.0)]).unwrap();
        assert_eq!(angular_average(&c, 0.0), Err(CurveError::BadField(0.0)));
    }
}
