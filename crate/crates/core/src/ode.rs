//! Dormand–Prince 5(4) with step-size control over complex state vectors.
//!
//! The state is laid out as `(value, derivative)` pairs; the error of both
//! entries of a pair is measured against the larger of the two magnitudes,
//! so a solution that starts at zero is still controlled relative to its
//! derivative.

use std::ops::ControlFlow;

use num_complex::Complex64;

use crate::potential::EvalError;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// b - b*, embedded error weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OdeControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub max_steps: usize,
    /// Abort once any component exceeds this magnitude.
    pub growth_limit: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest normalized error estimate among accepted steps (≤ 1).
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum OdeError {
    Rhs(EvalError),
    StepUnderflow { x: f64 },
    TooManySteps { x: f64 },
    Overflow { x: f64, magnitude: f64 },
    NonFinite { x: f64 },
}

impl From<EvalError> for OdeError {
    fn from(e: EvalError) -> Self {
        OdeError::Rhs(e)
    }
}

type State<const N: usize> = [Complex64; N];

fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (coef, k) in terms {
        if *coef == 0.0 {
            continue;
        }
        let s = h * coef;
        for i in 0..N {
            out[i] += k[i] * s;
        }
    }
    out
}

/// Integrates `y' = rhs(x, y)` from `x0` to `x_end`.
///
/// `observe` is called at `x0`, at every `x0 + k·grid_dx` in the direction of
/// integration, and at `x_end`; returning `Break` stops the integration
/// early. Steps never straddle a point in `breakpoints`, and right-hand side
/// evaluations at a breakpoint use the one-sided value of the segment being
/// integrated.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate<const N: usize, F, O>(
    x0: f64,
    y0: State<N>,
    x_end: f64,
    grid_dx: f64,
    breakpoints: &[f64],
    ctrl: &OdeControls,
    mut rhs: F,
    mut observe: O,
) -> Result<StepStats, OdeError>
where
    F: FnMut(f64, &State<N>) -> Result<State<N>, EvalError>,
    O: FnMut(f64, &State<N>) -> ControlFlow<()>,
{
    debug_assert!(N.is_multiple_of(2));
    let mut stats = StepStats::default();
    if observe(x0, &y0).is_break() || x_end == x0 {
        return Ok(stats);
    }
    let dir = (x_end - x0).signum();
    let span = (x_end - x0).abs();

    // breakpoints strictly inside the interval, in integration order
    let mut bps: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| (b - x0) * dir > 0.0 && (x_end - b) * dir > 0.0)
        .collect();
    bps.sort_by(|a, b| ((a - x0) * dir).total_cmp(&((b - x0) * dir)));
    bps.push(x_end);

    let mut x = x0;
    let mut y = y0;
    let mut h_nat = ctrl.h_init.abs().min(span).max(f64::MIN_POSITIVE) * dir;
    let mut next_grid = 1usize;
    let grid_at = |k: usize| x0 + dir * grid_dx * k as f64;

    let mut seg_start_is_bp = false;
    for (seg, &seg_end) in bps.iter().enumerate() {
        let seg_end_is_bp = seg + 1 < bps.len();
        let seg_start = x;
        let nudge = |xs: f64| -> f64 {
            let d = 1e-12 * (1.0 + xs.abs());
            if seg_end_is_bp && xs == seg_end {
                xs - dir * d
            } else if seg_start_is_bp && xs == seg_start {
                xs + dir * d
            } else {
                xs
            }
        };
        let mut k1: Option<State<N>> = None;
        while (seg_end - x) * dir > 0.0 {
            if stats.accepted + stats.rejected >= ctrl.max_steps {
                return Err(OdeError::TooManySteps { x });
            }
            // next stopping point: grid point or segment end
            while grid_dx > 0.0 && (grid_at(next_grid) - x) * dir <= 0.0 {
                next_grid += 1;
            }
            let grid_stop = if grid_dx > 0.0 {
                grid_at(next_grid)
            } else {
                f64::INFINITY * dir
            };
            let stop = if (grid_stop - seg_end) * dir < 0.0 {
                grid_stop
            } else {
                seg_end
            };
            let remaining = stop - x;
            let mut hit_stop = false;
            let mut h = h_nat;
            if h.abs() >= remaining.abs() * (1.0 - 1e-12) {
                h = remaining;
                hit_stop = true;
            } else if h.abs() > 0.5 * remaining.abs() {
                // avoid leaving a sliver before the stop
                h = 0.5 * remaining;
            }
            if h.abs() < 1e-13 * (1.0 + x.abs()) && !hit_stop {
                return Err(OdeError::StepUnderflow { x });
            }

            let ka = match k1 {
                Some(k) => k,
                None => rhs(nudge(x), &y)?,
            };
            let x_new = if hit_stop { stop } else { x + h };
            let stage_x = |c: f64| if c == 1.0 { x_new } else { x + c * h };
            let kb = rhs(nudge(stage_x(C[1])), &axpy(&y, h, &[(A2[0], &ka)]))?;
            let kc = rhs(nudge(stage_x(C[2])), &axpy(&y, h, &[(A3[0], &ka), (A3[1], &kb)]))?;
            let kd = rhs(
                nudge(stage_x(C[3])),
                &axpy(&y, h, &[(A4[0], &ka), (A4[1], &kb), (A4[2], &kc)]),
            )?;
            let ke = rhs(
                nudge(stage_x(C[4])),
                &axpy(&y, h, &[(A5[0], &ka), (A5[1], &kb), (A5[2], &kc), (A5[3], &kd)]),
            )?;
            let kf = rhs(
                nudge(stage_x(C[5])),
                &axpy(
                    &y,
                    h,
                    &[(A6[0], &ka), (A6[1], &kb), (A6[2], &kc), (A6[3], &kd), (A6[4], &ke)],
                ),
            )?;
            let y_new = axpy(
                &y,
                h,
                &[(B[0], &ka), (B[2], &kc), (B[3], &kd), (B[4], &ke), (B[5], &kf)],
            );
            let kg = rhs(nudge(x_new), &y_new)?;

            let mut err: f64 = 0.0;
            for g in 0..N / 2 {
                let scale = ctrl.abs_tol
                    + ctrl.rel_tol
                        * y[2 * g]
                            .norm()
                            .max(y[2 * g + 1].norm())
                            .max(y_new[2 * g].norm())
                            .max(y_new[2 * g + 1].norm());
                for i in [2 * g, 2 * g + 1] {
                    let e =
                        h * (E[0] * ka[i] + E[2] * kc[i] + E[3] * kd[i] + E[4] * ke[i] + E[5] * kf[i] + E[6] * kg[i]);
                    err = err.max(e.norm() / scale);
                }
            }
            if !err.is_finite() {
                stats.rejected += 1;
                h_nat = h * 0.2;
                k1 = Some(ka);
                continue;
            }

            if err <= 1.0 {
                stats.accepted += 1;
                stats.max_error = stats.max_error.max(err);
                x = x_new;
                y = y_new;
                k1 = Some(kg);
                let mag = y.iter().fold(0.0f64, |m, v| m.max(v.norm()));
                if !mag.is_finite() {
                    return Err(OdeError::NonFinite { x });
                }
                if mag > ctrl.growth_limit {
                    return Err(OdeError::Overflow { x, magnitude: mag });
                }
                let at_grid = grid_dx > 0.0 && hit_stop && stop == grid_stop;
                if (at_grid || x == x_end) && observe(x, &y).is_break() {
                    return Ok(stats);
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // a step clipped to a stop point says little about the
                // natural step size
                if h == h_nat || (h * fac).abs() < h_nat.abs() {
                    h_nat = h * fac;
                }
            } else {
                stats.rejected += 1;
                h_nat = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                k1 = Some(ka);
            }
        }
        seg_start_is_bp = seg_end_is_bp;
    }
    Ok(stats)
}
