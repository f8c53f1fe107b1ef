//! One-dimensional wells in a static field.
//!
//! The total potential is `V(x) = V_well(x) - F x` in atomic units, with the
//! Hamiltonian `-1/2 d²/dx² + V(x)`. The soft-core atom is written with a
//! leading minus, `-1/sqrt(x² + a²)`: the attractive form is the one that
//! carries a Rydberg series of bound states.

pub mod expr;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use expr::{parse_potential, EvalError, Expr, ParseError};

/// Which half-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    /// Toward `-∞`.
    Minus,
    /// Toward `+∞`.
    Plus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Minus => "-",
            Side::Plus => "+",
        }
    }
}

/// Asymptotic behavior a custom well is declared to have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailKind {
    Decaying,
    Confining,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomWell {
    source: String,
    ast: Expr,
    params: BTreeMap<String, f64>,
    bound: Expr,
    tail: TailKind,
}

impl CustomWell {
    pub fn new(source: &str, params: BTreeMap<String, f64>, tail: TailKind) -> Result<Self, PotentialError> {
        let names: Vec<String> = params.keys().cloned().collect();
        let ast = parse_potential(source, &names)?;
        let bound = ast.bind(&params)?;
        Ok(CustomWell {
            source: source.to_string(),
            ast,
            params,
            bound,
            tail,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn tail(&self) -> TailKind {
        self.tail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WellModel {
    /// `-1/sqrt(x² + a²)`
    SoftCoreAtom {
        a: f64,
    },
    /// Two soft-core centers at `±R/2`.
    DoubleWell {
        a: f64,
        r: f64,
    },
    /// `ω² x² / 2`
    Harmonic {
        omega: f64,
    },
    /// `-depth` on `|x| < width/2`, zero outside.
    SquareWell {
        depth: f64,
        width: f64,
    },
    Custom(CustomWell),
}

impl WellModel {
    /// Soft-core hydrogen, `a = √2`.
    pub fn hydrogen() -> Self {
        WellModel::SoftCoreAtom {
            a: std::f64::consts::SQRT_2,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        Ok(match self {
            WellModel::SoftCoreAtom { a } => -1.0 / (x * x + a * a).sqrt(),
            WellModel::DoubleWell { a, r } => {
                let (l, rr) = (x + 0.5 * r, x - 0.5 * r);
                -1.0 / (l * l + a * a).sqrt() - 1.0 / (rr * rr + a * a).sqrt()
            }
            WellModel::Harmonic { omega } => 0.5 * omega * omega * x * x,
            WellModel::SquareWell { depth, width } => {
                if x.abs() < 0.5 * width {
                    -depth
                } else {
                    0.0
                }
            }
            WellModel::Custom(c) => c.bound.eval(x, &BTreeMap::new())?,
        })
    }

    pub fn tail_kind(&self) -> TailKind {
        match self {
            WellModel::Harmonic { .. } => TailKind::Confining,
            WellModel::Custom(c) => c.tail,
            _ => TailKind::Decaying,
        }
    }

    /// Positions where the well is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            WellModel::SquareWell { width, .. } => vec![-0.5 * width, 0.5 * width],
            _ => Vec::new(),
        }
    }

    /// True when `V(-x) = V(x)` by construction.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self, WellModel::Custom(_))
    }

    fn validate(&self) -> Result<(), PotentialError> {
        let bad = |what: &str, v: f64| {
            Err(PotentialError::InvalidParameter(format!(
                "{what} must be finite and positive, got {v}"
            )))
        };
        match *self {
            WellModel::SoftCoreAtom { a } if !(a > 0.0 && a.is_finite()) => bad("a", a),
            WellModel::DoubleWell { a, .. } if !(a > 0.0 && a.is_finite()) => bad("a", a),
            WellModel::DoubleWell { r, .. } if !(r >= 0.0 && r.is_finite()) => bad("R", r),
            WellModel::Harmonic { omega } if !(omega > 0.0 && omega.is_finite()) => bad("omega", omega),
            WellModel::SquareWell { depth, .. } if !(depth > 0.0 && depth.is_finite()) => bad("depth", depth),
            WellModel::SquareWell { width, .. } if !(width > 0.0 && width.is_finite()) => bad("width", width),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid potential parameter: {0}")]
    InvalidParameter(String),
    #[error("well declared {declared:?} but sampling shows otherwise near x = {x}")]
    TailMismatch { declared: TailKind, x: f64 },
}

/// Where the well term has died off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBounds {
    /// `|V_well| < tol` for `x < minus` and `x > plus`.
    Decaying { minus: f64, plus: f64 },
    /// The well grows without bound; asymptotic matching has to use the
    /// well itself rather than the linear term.
    NonDecaying,
}

pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// A well together with the field strength.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    well: WellModel,
    field: f64,
    tail_tol: f64,
}

impl PotentialSpec {
    pub fn new(well: WellModel, field: f64) -> Result<Self, PotentialError> {
        well.validate()?;
        if !(field >= 0.0 && field.is_finite()) {
            return Err(PotentialError::InvalidParameter(format!(
                "field strength must be finite and non-negative, got {field}"
            )));
        }
        Ok(PotentialSpec {
            well,
            field,
            tail_tol: DEFAULT_TAIL_TOL,
        })
    }

    pub fn with_tail_tol(mut self, tol: f64) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn well(&self) -> &WellModel {
        &self.well
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Same well, different field.
    pub fn with_field(&self, field: f64) -> Result<Self, PotentialError> {
        Ok(PotentialSpec::new(self.well.clone(), field)?.with_tail_tol(self.tail_tol))
    }

    #[inline]
    pub fn eval_well(&self, x: f64) -> Result<f64, EvalError> {
        self.well.eval(x)
    }

    /// `-F x`
    #[inline]
    pub fn eval_external(&self, x: f64) -> f64 {
        -self.field * x
    }

    /// `V_well(x) - F x`
    #[inline]
    pub fn eval_total(&self, x: f64) -> Result<f64, EvalError> {
        Ok(self.well.eval(x)? - self.field * x)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.well.breakpoints()
    }

    /// `[V, V', V'', V''']` of the total potential. The well part is
    /// differenced numerically on a stencil scaled with `|x|`; the field part
    /// is exact.
    pub fn derivatives(&self, x: f64) -> Result<[f64; 4], EvalError> {
        let h = 0.01 * (1.0 + x.abs());
        let f = |k: f64| self.well.eval(x + k * h);
        let (m3, m2, m1, z) = (f(-3.0)?, f(-2.0)?, f(-1.0)?, f(0.0)?);
        let (p1, p2, p3) = (f(1.0)?, f(2.0)?, f(3.0)?);
        let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        let d2 = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
        let d3 = (m3 - 8.0 * m2 + 13.0 * m1 - 13.0 * p1 + 8.0 * p2 - p3) / (8.0 * h * h * h);
        Ok([z - self.field * x, d1 - self.field, d2, d3])
    }

    /// Positions beyond which `|V_well| < tol`, located by sampling outward on
    /// a geometric grid and refining by bisection.
    pub fn tail_bounds(&self, tol: f64) -> Result<TailBounds, PotentialError> {
        const FAR: f64 = 1e7;
        let declared = self.well.tail_kind();
        let mut bounds = [0.0; 2];
        for (slot, side) in [Side::Minus, Side::Plus].into_iter().enumerate() {
            let s = side.sign();
            let mut last_big = 0.0;
            let mut x = 0.5;
            while x < FAR {
                let v = self.well.eval(s * x)?.abs();
                if v >= tol {
                    last_big = x;
                }
                x *= 1.05;
            }
            let far_value = self.well.eval(s * FAR)?.abs();
            if far_value >= tol {
                if declared == TailKind::Decaying {
                    return Err(PotentialError::TailMismatch { declared, x: s * FAR });
                }
                return Ok(TailBounds::NonDecaying);
            }
            if declared == TailKind::Confining {
                return Err(PotentialError::TailMismatch { declared, x: s * FAR });
            }
            // refine between the last sample above tol and the next one
            let (mut lo, mut hi) = (last_big, if last_big == 0.0 { 0.5 } else { last_big * 1.05 });
            if last_big > 0.0 {
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if self.well.eval(s * mid)?.abs() >= tol {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            bounds[slot] = s * hi;
        }
        Ok(TailBounds::Decaying {
            minus: bounds[0],
            plus: bounds[1],
        })
    }

    /// Outermost point on `side` where `V(x) - energy` changes sign, scanning
    /// from the origin out to `x_max`. `None` when there is no sign change.
    pub fn outer_turning_point(&self, energy: f64, side: Side, x_max: f64) -> Result<Option<f64>, EvalError> {
        let s = side.sign();
        let g = |x: f64| -> Result<f64, EvalError> { Ok(self.eval_total(s * x)? - energy) };
        let mut x = 0.0;
        let mut gx = g(0.0)?;
        let mut last: Option<(f64, f64)> = None;
        while x < x_max {
            let nx = (x + 0.01 + 0.01 * x).min(x_max);
            let gn = g(nx)?;
            if (gx > 0.0) != (gn > 0.0) {
                last = Some((x, nx));
            }
            x = nx;
            gx = gn;
        }
        let Some((mut lo, mut hi)) = last else {
            return Ok(None);
        };
        let glo = g(lo)? > 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (g(mid)? > 0.0) == glo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(s * 0.5 * (lo + hi)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn eval_total_examples() {
        let h0 = PotentialSpec::new(WellModel::hydrogen(), 0.0).unwrap();
        assert!((h0.eval_total(0.0).unwrap() + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let h = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let want = -1.0 / 102f64.sqrt() - 0.5;
        assert!((h.eval_total(10.0).unwrap() - want).abs() < 1e-15);
        assert!((want + 0.599_015).abs() < 1e-6);
        let dw = PotentialSpec::new(WellModel::DoubleWell { a: SQRT2, r: 6.0 }, 0.0).unwrap();
        assert!((dw.eval_total(0.0).unwrap() + 2.0 / 11f64.sqrt()).abs() < 1e-15);
        assert!((dw.eval_total(0.0).unwrap() + 0.603_023).abs() < 1e-6);
    }

    #[test]
    fn symmetric_wells_are_even_without_field() {
        for well in [
            WellModel::hydrogen(),
            WellModel::DoubleWell { a: SQRT2, r: 6.0 },
            WellModel::Harmonic { omega: 1.3 },
            WellModel::SquareWell { depth: 2.0, width: 4.0 },
        ] {
            let spec = PotentialSpec::new(well, 0.0).unwrap();
            for i in 0..400 {
                let x = -20.0 + 0.1 * i as f64 + 0.013;
                assert_eq!(spec.eval_total(x).unwrap(), spec.eval_total(-x).unwrap());
            }
        }
    }

    #[test]
    fn field_term_is_linear() {
        let base = PotentialSpec::new(WellModel::DoubleWell { a: SQRT2, r: 9.0 }, 0.0).unwrap();
        for f in [0.01, 0.05, 0.08] {
            let spec = base.with_field(f).unwrap();
            for i in 0..200 {
                let x = -50.0 + 0.5 * i as f64;
                let (t, b) = (spec.eval_total(x).unwrap(), base.eval_total(x).unwrap());
                assert!((t - b + f * x).abs() <= 4.0 * f64::EPSILON * t.abs().max(b.abs()));
            }
        }
    }

    #[test]
    fn tail_bounds_soft_core() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.0).unwrap();
        for (tol, want) in [(1e-3, 1000.0), (1e-2, 100.0)] {
            let TailBounds::Decaying { minus, plus } = spec.tail_bounds(tol).unwrap() else {
                panic!("soft core must decay");
            };
            assert!((plus - want).abs() / want < 1e-3, "{plus}");
            assert!((minus + want).abs() / want < 1e-3, "{minus}");
            for k in 0..50 {
                let x = plus * (1.0 + 0.2 * k as f64);
                assert!(spec.eval_well(x).unwrap().abs() < tol);
                assert!(spec.eval_well(-x).unwrap().abs() < tol);
            }
        }
    }

    #[test]
    fn harmonic_is_non_decaying() {
        let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).unwrap();
        assert_eq!(spec.tail_bounds(1e-6).unwrap(), TailBounds::NonDecaying);
    }

    #[test]
    fn square_well_tail_is_its_edge() {
        let spec = PotentialSpec::new(WellModel::SquareWell { depth: 2.0, width: 4.0 }, 0.0).unwrap();
        let TailBounds::Decaying { minus, plus } = spec.tail_bounds(1e-6).unwrap() else {
            panic!()
        };
        assert!((plus - 2.0).abs() < 1e-9 && (minus + 2.0).abs() < 1e-9);
    }

    #[test]
    fn custom_tail_declaration_is_checked() {
        let c = CustomWell::new("x^2/2", BTreeMap::new(), TailKind::Decaying).unwrap();
        let spec = PotentialSpec::new(WellModel::Custom(c), 0.0).unwrap();
        assert!(matches!(
            spec.tail_bounds(1e-6),
            Err(PotentialError::TailMismatch { .. })
        ));
        let c = CustomWell::new("-exp(-x^2)", BTreeMap::new(), TailKind::Decaying).unwrap();
        let spec = PotentialSpec::new(WellModel::Custom(c), 0.0).unwrap();
        assert!(matches!(spec.tail_bounds(1e-6), Ok(TailBounds::Decaying { .. })));
    }

    #[test]
    fn custom_matches_builtin() {
        let params: BTreeMap<String, f64> = [("a".to_string(), SQRT2)].into_iter().collect();
        let c = CustomWell::new("-1/sqrt(x^2+a^2)", params, TailKind::Decaying).unwrap();
        let custom = PotentialSpec::new(WellModel::Custom(c), 0.03).unwrap();
        let builtin = PotentialSpec::new(WellModel::hydrogen(), 0.03).unwrap();
        for i in 0..100 {
            let x = -25.0 + 0.5 * i as f64;
            let (a, b) = (custom.eval_total(x).unwrap(), builtin.eval_total(x).unwrap());
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_of_soft_core() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        for x in [-40.0, -3.0, 0.7, 12.0, 150.0] {
            let [v, d1, d2, d3] = spec.derivatives(x).unwrap();
            let r2: f64 = x * x + 2.0;
            assert!((v - (-1.0 / r2.sqrt() - 0.05 * x)).abs() < 1e-15);
            let w1 = x / r2.powf(1.5);
            let tol = 1e-6 * (w1.abs() + 1e-3);
            assert!((d1 - (w1 - 0.05)).abs() < tol, "{x}: {d1}");
            let e2 = 1.0 / r2.powf(1.5) - 3.0 * x * x / r2.powf(2.5);
            assert!((d2 - e2).abs() < 1e-5 * (e2.abs() + 1e-3), "{d2} vs {e2}");
            let e3 = -9.0 * x / r2.powf(2.5) + 15.0 * x.powi(3) / r2.powf(3.5);
            assert!((d3 - e3).abs() < 1e-5 * (1.0 + e3.abs()), "{d3} vs {e3}");
        }
    }

    #[test]
    fn turning_points() {
        let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).unwrap();
        let tp = spec.outer_turning_point(0.5, Side::Plus, 100.0).unwrap().unwrap();
        assert!((tp - 1.0).abs() < 1e-9);
        let tp = spec.outer_turning_point(0.5, Side::Minus, 100.0).unwrap().unwrap();
        assert!((tp + 1.0).abs() < 1e-9);
        // outer edge of the barrier: -1/sqrt(x²+2) - 0.05 x = -0.5
        let h = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
        let tp = h.outer_turning_point(-0.5, Side::Plus, 1000.0).unwrap().unwrap();
        assert!((h.eval_total(tp).unwrap() + 0.5).abs() < 1e-9);
        assert!(tp > 5.0 && tp < 10.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialSpec::new(WellModel::SoftCoreAtom { a: 0.0 }, 0.0).is_err());
        assert!(PotentialSpec::new(WellModel::hydrogen(), -0.1).is_err());
        assert!(PotentialSpec::new(WellModel::hydrogen(), f64::NAN).is_err());
    }
}
