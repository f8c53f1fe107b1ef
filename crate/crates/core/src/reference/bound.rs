//! Field-free levels by shooting, dense-grid levels by finite differences,
//! and the static polarizability.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::potential::{EvalError, PotentialError, PotentialSpec, Side, TailKind, WellModel};
use crate::propagate::{propagate_raw, PropagationError, StepControls};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("invalid energy window [{lo}, {hi}]")]
    BadWindow { lo: f64, hi: f64 },
    #[error("no bound state in [{lo}, {hi}]")]
    NoStates { lo: f64, hi: f64 },
    #[error("levels {a} and {b} cannot be separated")]
    Degenerate { a: f64, b: f64 },
    #[error("the decaying region does not end before x = {x}")]
    RangeTooLarge { x: f64 },
    #[error("invalid grid: half width {half_width}, spacing {h}")]
    BadGrid { half_width: f64, h: f64 },
    #[error("quadratic fit of E(F) leaves relative residual {residual:.3e}")]
    NonQuadratic { residual: f64 },
    #[error("{what} changes the result by {change:.3e} (relative)")]
    NotConverged { what: &'static str, change: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootControls {
    pub rel_tol: f64,
    /// Bisection stops once the bracket is this narrow (relative to
    /// `max(1, |E|)`).
    pub energy_tol: f64,
    /// The solutions are followed until the WKB action under the barrier
    /// reaches this value on both sides.
    pub decay_action: f64,
    /// Multiplies the range found from `decay_action`.
    pub range_scale: f64,
    /// Node counting resolution.
    pub sample_dx: f64,
    pub max_range: f64,
    /// For decaying wells the window is cut this far below the threshold.
    pub threshold_gap: f64,
}

impl Default for ShootControls {
    fn default() -> Self {
        ShootControls {
            rel_tol: 1e-11,
            energy_tol: 1e-11,
            decay_action: 25.0,
            range_scale: 1.0,
            sample_dx: 0.01,
            max_range: 5000.0,
            threshold_gap: 1e-3,
        }
    }
}

/// Distance from the origin at which the action `∫√(2(V-E))` past the last
/// classically allowed point reaches `action`.
pub(crate) fn decay_range(
    spec: &PotentialSpec,
    energy: f64,
    side: Side,
    action: f64,
    max_range: f64,
) -> Result<f64, BoundError> {
    let s = side.sign();
    let q = |x: f64| -> Result<f64, EvalError> { Ok(2.0 * (spec.eval_total(s * x)? - energy)) };
    let mut x = 0.0;
    let mut acc = 0.0;
    let mut qx = q(0.0)?;
    while x < max_range {
        let dx = 0.01 * (1.0 + 0.05 * x);
        let qn = q(x + dx)?;
        if qn <= 0.0 {
            acc = 0.0;
        } else {
            acc += 0.5 * dx * (qx.max(0.0).sqrt() + qn.sqrt());
        }
        x += dx;
        qx = qn;
        if acc >= action {
            return Ok(x);
        }
    }
    Err(BoundError::RangeTooLarge { x: max_range })
}

/// Sturm counter. `u_L` starts at `-x_minus` with value 0 and slope 1,
/// `u_R` at `x_plus` with value 0 and slope -1; both are followed inward to
/// the origin, where they grow away from the Dirichlet ends and are stable.
/// Below `energy` lie `n_L + n_R` levels, plus one when the matching
/// Wronskian `u_L u_R' - u_L' u_R` is positive. The ends sit where the
/// decay action at `energy` reaches its target, which is far enough for
/// every level below `energy`.
struct Shooter<'a> {
    spec: &'a PotentialSpec,
    controls: &'a ShootControls,
    step: StepControls,
}

impl Shooter<'_> {
    /// Nodes of the inward solution and its `(value, slope)` at the origin.
    fn side(&self, energy: f64, start: f64) -> Result<(usize, f64, f64), BoundError> {
        let side = if start < 0.0 { Side::Plus } else { Side::Minus };
        let sign = if start < 0.0 { 1.0 } else { -1.0 };
        let step = StepControls {
            origin: start,
            ..self.step
        };
        let mut last = 0.0f64;
        let mut nodes = 0;
        let mut end = (0.0, 0.0);
        propagate_raw(self.spec, Complex64::new(energy, 0.0), side, 0.0, &step, |s| {
            let v = sign * s.phi2.re;
            if v != 0.0 {
                if last != 0.0 && (v > 0.0) != (last > 0.0) {
                    nodes += 1;
                }
                last = v;
            }
            end = (v, sign * s.dphi2.re);
            ControlFlow::Continue(())
        })?;
        Ok((nodes, end.0, end.1))
    }

    fn range(&self, energy: f64, side: Side) -> Result<f64, BoundError> {
        let c = self.controls;
        Ok(c.range_scale * decay_range(self.spec, energy, side, c.decay_action, c.max_range)?)
    }

    fn count(&self, energy: f64) -> Result<usize, BoundError> {
        let (nl, ul, dl) = self.side(energy, -self.range(energy, Side::Minus)?)?;
        let (nr, ur, dr) = self.side(energy, self.range(energy, Side::Plus)?)?;
        let w = ul * dr - dl * ur;
        Ok(nl + nr + usize::from(w > 0.0))
    }
}

/// Field-free levels of `well` in `window`, lowest `count` first, by
/// shooting inward from both ends with node-count bisection.
pub fn shoot_bound_states(well: &WellModel, window: (f64, f64), count: usize) -> Result<Vec<f64>, BoundError> {
    shoot_bound_states_with(well, window, count, &ShootControls::default())
}

pub fn shoot_bound_states_with(
    well: &WellModel,
    window: (f64, f64),
    count: usize,
    controls: &ShootControls,
) -> Result<Vec<f64>, BoundError> {
    let (lo, mut hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(BoundError::BadWindow { lo, hi });
    }
    let spec = PotentialSpec::new(well.clone(), 0.0)?;
    if well.tail_kind() == TailKind::Decaying {
        hi = hi.min(-controls.threshold_gap);
        if !(lo < hi) {
            return Err(BoundError::NoStates { lo, hi: window.1 });
        }
    }
    let shooter = Shooter {
        spec: &spec,
        controls,
        step: StepControls {
            rel_tol: controls.rel_tol,
            sample_dx: controls.sample_dx,
            ..StepControls::default()
        },
    };
    let n_lo = shooter.count(lo)?;
    let n_hi = shooter.count(hi)?;
    if n_hi <= n_lo {
        return Err(BoundError::NoStates { lo, hi });
    }
    let mut levels = Vec::new();
    for k in n_lo..n_hi.min(n_lo + count) {
        let (mut a, mut b) = (lo, hi);
        if let Some(&prev) = levels.last() {
            a = prev;
        }
        while b - a > controls.energy_tol * a.abs().max(b.abs()).max(1.0) {
            let mid = 0.5 * (a + b);
            if shooter.count(mid)? > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        let e = 0.5 * (a + b);
        if let Some(&prev) = levels.last() {
            if e - prev < 10.0 * controls.energy_tol * e.abs().max(1.0) {
                return Err(BoundError::Degenerate { a: prev, b: e });
            }
        }
        levels.push(e);
    }
    Ok(levels)
}

/// A uniform grid on `[-half_width, half_width]` with Dirichlet ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DenseGrid {
    pub half_width: f64,
    pub h: f64,
}

impl DenseGrid {
    fn check(&self) -> Result<usize, BoundError> {
        let n = 2.0 * self.half_width / self.h;
        if !(self.half_width > 0.0 && self.h > 0.0 && (4.0..5e7).contains(&n)) {
            return Err(BoundError::BadGrid {
                half_width: self.half_width,
                h: self.h,
            });
        }
        Ok(n.round() as usize)
    }

    /// Interior nodes.
    pub fn nodes(&self) -> Result<Vec<f64>, BoundError> {
        let n = self.check()?;
        let h = 2.0 * self.half_width / n as f64;
        Ok((1..n).map(|i| -self.half_width + h * i as f64).collect())
    }

    fn halved(&self) -> DenseGrid {
        DenseGrid {
            h: 0.5 * self.h,
            ..*self
        }
    }
}

/// `-½ d²/dx² + V_well(x) - F x` with three-point differences.
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn new(well: &WellModel, field: f64, grid: &DenseGrid) -> Result<Self, BoundError> {
        let xs = grid.nodes()?;
        let h = (xs[1] - xs[0]).abs();
        let k = 1.0 / (h * h);
        let diag = xs
            .iter()
            .map(|&x| Ok(k + well.eval(x)? - field * x))
            .collect::<Result<_, EvalError>>()?;
        Ok(Tridiagonal { diag, off: -0.5 * k })
    }

    /// Eigenvalues below `e`.
    fn count(&self, e: f64) -> usize {
        let b2 = self.off * self.off;
        let mut q = 1.0;
        let mut n = 0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = d - e - if i == 0 { 0.0 } else { b2 / q };
            if q == 0.0 {
                q = f64::EPSILON * b2.sqrt();
            }
            if q < 0.0 {
                n += 1;
            }
        }
        n
    }

    fn lowest(&self, count: usize) -> Vec<f64> {
        let lo0 = self.diag.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * self.off.abs();
        let hi0 = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0 * self.off.abs();
        let count = count.min(self.diag.len());
        (0..count)
            .map(|k| {
                let (mut a, mut b) = (lo0, hi0);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid == a || mid == b {
                        break;
                    }
                    if self.count(mid) > k {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                0.5 * (a + b)
            })
            .collect()
    }

    /// Inverse iteration next to `e`, normalized to `h Σ v² = 1`.
    fn vector(&self, e: f64, h: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = e + 1e-10 * e.abs().max(1.0);
        let mut v = vec![1.0; n];
        for _ in 0..3 {
            // Thomas algorithm on (T - shift) w = v
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            let mut denom = self.diag[0] - shift;
            c[0] = self.off / denom;
            d[0] = v[0] / denom;
            for i in 1..n {
                denom = self.diag[i] - shift - self.off * c[i - 1];
                c[i] = self.off / denom;
                d[i] = (v[i] - self.off * d[i - 1]) / denom;
            }
            for i in (0..n - 1).rev() {
                d[i] -= c[i] * d[i + 1];
            }
            let norm = (h * d.iter().map(|x| x * x).sum::<f64>()).sqrt();
            v = d.iter().map(|x| x / norm).collect();
        }
        let lead = v.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }
}

/// Lowest `count` levels of the grid Hamiltonian at `grid.h` and `grid.h/2`,
/// combined by Richardson extrapolation.
pub fn dense_grid_levels(well: &WellModel, field: f64, grid: DenseGrid, count: usize) -> Result<Vec<f64>, BoundError> {
    let coarse = Tridiagonal::new(well, field, &grid)?.lowest(count);
    let fine = Tridiagonal::new(well, field, &grid.halved())?.lowest(count);
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

/// Grid eigenpairs without extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridStates {
    pub x: Vec<f64>,
    pub energies: Vec<f64>,
    /// Normalized to `h Σ v² = 1`.
    pub vectors: Vec<Vec<f64>>,
}

pub fn dense_grid_states(
    well: &WellModel,
    field: f64,
    grid: DenseGrid,
    count: usize,
) -> Result<GridStates, BoundError> {
    let x = grid.nodes()?;
    let h = x[1] - x[0];
    let t = Tridiagonal::new(well, field, &grid)?;
    let energies = t.lowest(count);
    let vectors = energies.iter().map(|&e| t.vector(e, h)).collect();
    Ok(GridStates { x, energies, vectors })
}

/// Grid sized for the field-free ground state of `well`: its decay region
/// on both sides, with spacing `h`.
pub fn ground_state_grid(well: &WellModel, h: f64) -> Result<DenseGrid, BoundError> {
    let probe = DenseGrid {
        half_width: 50.0,
        h: 0.05,
    };
    let e0 = Tridiagonal::new(well, 0.0, &probe)?.lowest(1)[0];
    let spec = PotentialSpec::new(well.clone(), 0.0)?;
    let d = ShootControls::default();
    let r = decay_range(&spec, e0, Side::Minus, d.decay_action, d.max_range)?.max(decay_range(
        &spec,
        e0,
        Side::Plus,
        d.decay_action,
        d.max_range,
    )?);
    Ok(DenseGrid {
        half_width: (r / h).ceil() * h,
        h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Polarizability {
    pub alpha: f64,
    /// Field-free ground level on the grid.
    pub e0: f64,
    /// Largest fit residual relative to the shift at the largest field.
    pub fit_residual: f64,
    /// Relative change of `alpha` with twice the box.
    pub box_change: f64,
    /// Relative change of `alpha` with half the spacing.
    pub grid_change: f64,
    pub grid: DenseGrid,
}

/// Fields used for the quadratic fit.
pub const POLARIZABILITY_FIELDS: [f64; 5] = [-0.004, -0.002, 0.0, 0.002, 0.004];

fn alpha_on(well: &WellModel, grid: DenseGrid) -> Result<(f64, f64, f64), BoundError> {
    let es = POLARIZABILITY_FIELDS
        .iter()
        .map(|&f| Ok(dense_grid_levels(well, f, grid, 1)?[0]))
        .collect::<Result<Vec<f64>, BoundError>>()?;
    let a = DMatrix::from_fn(POLARIZABILITY_FIELDS.len(), 3, |i, j| {
        POLARIZABILITY_FIELDS[i].powi(j as i32)
    });
    let y = DVector::from_vec(es.clone());
    let c = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|_| BoundError::NonQuadratic {
            residual: f64::INFINITY,
        })?;
    let fmax = POLARIZABILITY_FIELDS.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let shift = (c[2] * fmax * fmax).abs();
    let resid = (&a * &c - y).amax() / shift;
    Ok((-2.0 * c[2], c[0], resid))
}

/// `α` from `E₀(F) ≈ E₀(0) - ½αF²` fitted at [`POLARIZABILITY_FIELDS`].
pub fn polarizability(well: &WellModel) -> Result<Polarizability, BoundError> {
    polarizability_on(well, ground_state_grid(well, 0.02)?)
}

pub fn polarizability_on(well: &WellModel, grid: DenseGrid) -> Result<Polarizability, BoundError> {
    let (alpha, e0, fit_residual) = alpha_on(well, grid)?;
    if fit_residual > 0.01 {
        return Err(BoundError::NonQuadratic { residual: fit_residual });
    }
    let wide = DenseGrid {
        half_width: 2.0 * grid.half_width,
        ..grid
    };
    let box_change = ((alpha_on(well, wide)?.0 - alpha) / alpha).abs();
    let grid_change = ((alpha_on(well, grid.halved())?.0 - alpha) / alpha).abs();
    for (what, change) in [("doubling the box", box_change), ("halving the spacing", grid_change)] {
        if !(change < 0.01) {
            return Err(BoundError::NotConverged { what, change });
        }
    }
    Ok(Polarizability {
        alpha,
        e0,
        fit_residual,
        box_change,
        grid_change,
        grid,
    })
}

/// Levels of `SquareWell { depth, width }` from the matching conditions
/// `k sin(kw/2) = κ cos(kw/2)` (even) and `-k cos(kw/2) = κ sin(kw/2)` (odd),
/// `k = √(2(E+depth))`, `κ = √(-2E)`, solved by bracketing and bisection.
pub fn square_well_levels(depth: f64, width: f64) -> Vec<f64> {
    let g = |e: f64, odd: bool| {
        let k = (2.0 * (e + depth)).sqrt();
        let kappa = (-2.0 * e).max(0.0).sqrt();
        let (s, c) = (0.5 * k * width).sin_cos();
        if odd {
            -k * c - kappa * s
        } else {
            k * s - kappa * c
        }
    };
    // bracket finer than the spacing of the roots in k
    let kmax = (2.0 * depth).sqrt();
    let n = ((kmax * width * 50.0).ceil() as usize).max(1000);
    let mut levels = Vec::new();
    for odd in [false, true] {
        let at = |i: usize| -depth + depth * i as f64 / n as f64;
        for i in 0..n {
            let (mut a, mut b) = (at(i).max(-depth + 1e-15 * depth), at(i + 1));
            let (ga, gb) = (g(a, odd), g(b, odd));
            if ga == 0.0 {
                levels.push(a);
                continue;
            }
            if ga.signum() == gb.signum() {
                continue;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                if g(m, odd).signum() == ga.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            levels.push(0.5 * (a + b));
        }
    }
    levels.sort_by(f64::total_cmp);
    levels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_levels_by_shooting() {
        let w = WellModel::Harmonic { omega: 1.0 };
        let e = shoot_bound_states(&w, (0.0, 3.0), 10).unwrap();
        assert_eq!(e.len(), 3);
        for (k, v) in e.iter().enumerate() {
            assert!((v - (k as f64 + 0.5)).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn harmonic_levels_on_the_grid() {
        let w = WellModel::Harmonic { omega: 2.0 };
        let g = DenseGrid {
            half_width: 8.0,
            h: 0.02,
        };
        let e = dense_grid_levels(&w, 0.0, g, 3).unwrap();
        for (k, v) in e.iter().enumerate() {
            assert!((v - 2.0 * (k as f64 + 0.5)).abs() < 1e-7, "{v}");
        }
    }

    #[test]
    fn grid_vectors_are_normalized_eigenvectors() {
        let w = WellModel::hydrogen();
        let g = DenseGrid {
            half_width: 20.0,
            h: 0.05,
        };
        let s = dense_grid_states(&w, 0.0, g, 2).unwrap();
        let h = s.x[1] - s.x[0];
        let dot: f64 = s.vectors[0].iter().zip(&s.vectors[1]).map(|(a, b)| a * b).sum::<f64>() * h;
        assert!(dot.abs() < 1e-8);
        // residual of H v = E v
        let v = &s.vectors[0];
        let n = v.len();
        let mut r = 0.0f64;
        for i in 0..n {
            let l = if i > 0 { v[i - 1] } else { 0.0 };
            let rr = if i + 1 < n { v[i + 1] } else { 0.0 };
            let hv = -0.5 * (l - 2.0 * v[i] + rr) / (h * h) + w.eval(s.x[i]).unwrap() * v[i];
            r = r.max((hv - s.energies[0] * v[i]).abs());
        }
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn harmonic_polarizability_is_exact() {
        let p = polarizability(&WellModel::Harmonic { omega: 1.0 }).unwrap();
        assert!((p.alpha - 1.0).abs() < 1e-4, "{p:?}");
        let p = polarizability(&WellModel::Harmonic { omega: 2.0 }).unwrap();
        assert!((p.alpha - 0.25).abs() < 0.25e-4, "{p:?}");
    }

    #[test]
    fn square_well_roots_agree_with_shooting() {
        let want = square_well_levels(2.0, 4.0);
        assert_eq!(want.len(), 3);
        let w = WellModel::SquareWell { depth: 2.0, width: 4.0 };
        let got = shoot_bound_states(&w, (-2.0, -0.001), 5).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn empty_window_is_an_error() {
        let w = WellModel::Harmonic { omega: 1.0 };
        assert!(matches!(
            shoot_bound_states(&w, (0.6, 1.4), 1),
            Err(BoundError::NoStates { .. })
        ));
        assert!(matches!(
            shoot_bound_states(&w, (1.0, 0.0), 1),
            Err(BoundError::BadWindow { .. })
        ));
    }
}
