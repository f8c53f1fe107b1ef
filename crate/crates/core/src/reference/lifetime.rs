//! Decay rate from direct time propagation.
//!
//! The field-free eigenstate is propagated under the full Hamiltonian with
//! Crank–Nicolson on a uniform grid. A quadratic absorbing potential at both
//! ends removes the escaping flux, and the rate is the slope of the
//! logarithm of the remaining norm.

use std::io::{self, Write};
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use super::bound::{dense_grid_states, shoot_bound_states, BoundError, DenseGrid};
use crate::potential::{EvalError, PotentialSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LifetimeError {
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("the grid holds no state with index {0}")]
    NoState(usize),
    #[error("grid level {grid} and shooting level {shooting} disagree")]
    StateMismatch { grid: f64, shooting: f64 },
    #[error("cancelled at t = {t}")]
    Cancelled { t: f64 },
    #[error("only {points} samples in the exponential window")]
    NoWindow { points: usize },
    #[error("absorber reflects about {estimate:.2e} of the outgoing flux")]
    Reflection { estimate: f64 },
    #[error("invalid controls: {0}")]
    BadControls(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeControls {
    pub h: f64,
    pub dt: f64,
    /// The absorber starts at `±inner`.
    pub inner: f64,
    /// Absorber width beyond `inner`.
    pub absorber: f64,
    /// `W(x) = strength · ((|x| - inner)/absorber)²`
    pub strength: f64,
    /// Spacing of the survival samples.
    pub sample_dt: f64,
    pub t_max: f64,
    /// Propagation stops once the norm falls below this.
    pub stop_norm: f64,
    /// The fit starts at this many lifetimes.
    pub transient_lifetimes: f64,
    pub min_window_points: usize,
    pub max_reflection: f64,
}

impl Default for LifetimeControls {
    fn default() -> Self {
        LifetimeControls {
            h: 0.05,
            dt: 0.05,
            inner: 100.0,
            absorber: 50.0,
            strength: 1.0,
            sample_dt: 1.0,
            t_max: 20_000.0,
            stop_norm: 1e-3,
            transient_lifetimes: 5.0,
            min_window_points: 10,
            max_reflection: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Progress {
    pub t: f64,
    pub norm: f64,
    pub t_max: f64,
}

/// Optional cancellation flag and progress callback.
#[derive(Default, Clone, Copy)]
pub struct Monitor<'a> {
    pub cancel: Option<&'a AtomicBool>,
    pub progress: Option<&'a (dyn Fn(Progress) + Sync)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LifetimeRate {
    Resolved {
        rate: f64,
        /// Times bounding the fitted samples.
        window: (f64, f64),
        /// RMS of the `ln P` fit residual.
        fit_residual: f64,
    },
    /// The norm barely moved during the run.
    BelowFloor { floor: f64 },
}

impl LifetimeRate {
    pub fn rate(&self) -> Option<f64> {
        match self {
            LifetimeRate::Resolved { rate, .. } => Some(*rate),
            LifetimeRate::BelowFloor { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lifetime {
    pub rate: LifetimeRate,
    pub grid_energy: f64,
    pub shooting_energy: f64,
    /// `(t, norm)`
    pub survival: Vec<(f64, f64)>,
    /// Estimated reflection probability of the absorber.
    pub reflection: f64,
}

pub const SURVIVAL_CSV_HEADER: &str = "t_au,norm";

pub fn write_survival_csv<W: Write>(mut w: W, survival: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "{SURVIVAL_CSV_HEADER}")?;
    for (t, p) in survival {
        writeln!(w, "{t:e},{p:e}")?;
    }
    Ok(())
}

/// Crank–Nicolson propagator for a fixed tridiagonal `H`, with the
/// forward sweep of `1 + i dt H/2` precomputed.
struct CrankNicolson {
    /// `i dt/2 · H_jj`
    half_diag: Vec<Complex64>,
    /// `i dt/2 · H_j,j±1`
    half_off: Complex64,
    c: Vec<Complex64>,
    inv: Vec<Complex64>,
}

impl CrankNicolson {
    fn new(diag: &[Complex64], off: f64, dt: f64) -> Self {
        let s = Complex64::new(0.0, 0.5 * dt);
        let half_diag: Vec<Complex64> = diag.iter().map(|d| s * d).collect();
        let half_off = s * off;
        let n = diag.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let mut inv = vec![Complex64::new(0.0, 0.0); n];
        let one = Complex64::new(1.0, 0.0);
        for j in 0..n {
            let denom = one + half_diag[j]
                - if j > 0 {
                    half_off * c[j - 1]
                } else {
                    Complex64::new(0.0, 0.0)
                };
            inv[j] = 1.0 / denom;
            c[j] = half_off * inv[j];
        }
        CrankNicolson {
            half_diag,
            half_off,
            c,
            inv,
        }
    }

    fn step(&self, psi: &mut [Complex64], rhs: &mut [Complex64]) {
        let n = psi.len();
        for j in 0..n {
            let l = if j > 0 { psi[j - 1] } else { Complex64::new(0.0, 0.0) };
            let r = if j + 1 < n {
                psi[j + 1]
            } else {
                Complex64::new(0.0, 0.0)
            };
            rhs[j] = psi[j] - self.half_diag[j] * psi[j] - self.half_off * (l + r);
        }
        // forward sweep, then back substitution into psi
        for j in 0..n {
            let prev = if j > 0 {
                self.half_off * rhs[j - 1]
            } else {
                Complex64::new(0.0, 0.0)
            };
            rhs[j] = (rhs[j] - prev) * self.inv[j];
        }
        psi[n - 1] = rhs[n - 1];
        for j in (0..n - 1).rev() {
            psi[j] = rhs[j] - self.c[j] * psi[j + 1];
        }
    }
}

/// Decay rate of the field-free level `state` (0 = ground) of `spec`'s
/// well once the field is switched on.
pub fn lifetime_by_propagation(
    spec: &PotentialSpec,
    state: usize,
    controls: &LifetimeControls,
    monitor: Monitor<'_>,
) -> Result<Lifetime, LifetimeError> {
    let c = controls;
    if !(c.h > 0.0 && c.dt > 0.0 && c.inner > 0.0 && c.absorber > 0.0 && c.sample_dt >= c.dt && c.t_max > 0.0) {
        return Err(LifetimeError::BadControls(
            "spacings, times and widths must be positive",
        ));
    }
    if !(c.stop_norm > 0.0 && c.stop_norm < 0.5) {
        return Err(LifetimeError::BadControls("stop_norm must lie in (0, 0.5)"));
    }
    let well = spec.well();
    let grid = DenseGrid {
        half_width: c.inner + c.absorber,
        h: c.h,
    };
    let states = dense_grid_states(well, 0.0, grid, state + 2)?;
    if states.energies.len() <= state {
        return Err(LifetimeError::NoState(state));
    }
    let grid_energy = states.energies[state];
    let next = states.energies.get(state + 1).copied().unwrap_or(grid_energy + 0.1);
    let window = (
        states.energies[0] - 0.05 * states.energies[0].abs().max(1.0),
        grid_energy + 0.25 * (next - grid_energy),
    );
    let shot = shoot_bound_states(well, window, state + 1)?;
    let shooting_energy = *shot.get(state).ok_or(LifetimeError::NoState(state))?;
    if (shooting_energy - grid_energy).abs() > 1e-3 {
        return Err(LifetimeError::StateMismatch {
            grid: grid_energy,
            shooting: shooting_energy,
        });
    }

    let x = &states.x;
    let h = x[1] - x[0];
    let diag = x
        .iter()
        .map(|&xi| {
            let over = (xi.abs() - c.inner).max(0.0) / c.absorber;
            let v = spec.eval_total(xi)?;
            Ok(Complex64::new(1.0 / (h * h) + v, -c.strength * over * over))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let cn = CrankNicolson::new(&diag, -0.5 / (h * h), c.dt);
    let mut psi: Vec<Complex64> = states.vectors[state].iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut scratch = psi.clone();
    let norm = |p: &[Complex64]| h * p.iter().map(|z| z.norm_sqr()).sum::<f64>();

    let steps_per_sample = (c.sample_dt / c.dt).round().max(1.0) as usize;
    let mut survival = vec![(0.0, norm(&psi))];
    let mut reflections = Vec::new();
    let mut n_steps = 0usize;
    loop {
        for _ in 0..steps_per_sample {
            cn.step(&mut psi, &mut scratch);
        }
        n_steps += steps_per_sample;
        let t = n_steps as f64 * c.dt;
        let p = norm(&psi);
        survival.push((t, p));
        reflections.push((t, reflection_estimate(spec, x, &psi, grid_energy, c)?));
        if let Some(progress) = monitor.progress {
            progress(Progress {
                t,
                norm: p,
                t_max: c.t_max,
            });
        }
        if monitor.cancel.is_some_and(|f| f.load(Ordering::Relaxed)) {
            return Err(LifetimeError::Cancelled { t });
        }
        if p < c.stop_norm || t >= c.t_max {
            break;
        }
    }

    let (t_end, p_end) = survival[survival.len() - 1];
    if p_end > 0.5 {
        let floor = (-p_end.ln()).max(1e-6) / t_end;
        return Ok(Lifetime {
            rate: LifetimeRate::BelowFloor { floor },
            grid_energy,
            shooting_energy,
            survival,
            reflection: 0.0,
        });
    }
    let (t_half, p_half) = *survival.iter().find(|s| s.1 < 0.5).expect("norm fell below one half");
    let estimate = if t_end > t_half {
        (p_half / p_end).ln() / (t_end - t_half)
    } else {
        (2.0f64).ln() / t_half
    };
    let t_start = c.transient_lifetimes / estimate;
    let pts: Vec<(f64, f64)> = survival
        .iter()
        .filter(|s| s.0 >= t_start && s.1 > c.stop_norm)
        .map(|&(t, p)| (t, p.ln()))
        .collect();
    if pts.len() < c.min_window_points {
        return Err(LifetimeError::NoWindow { points: pts.len() });
    }
    let (slope, intercept) = line_fit(&pts);
    let fit_residual = (pts
        .iter()
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    let (t0, t1) = (pts[0].0, pts[pts.len() - 1].0);
    let reflection = reflections
        .iter()
        .filter(|r| r.0 >= t0 && r.0 <= t1)
        .map(|r| r.1)
        .fold(0.0, f64::max);
    if reflection > c.max_reflection {
        return Err(LifetimeError::Reflection { estimate: reflection });
    }
    Ok(Lifetime {
        rate: LifetimeRate::Resolved {
            rate: -slope,
            window: (t0, t1),
            fit_residual,
        },
        grid_energy,
        shooting_energy,
        survival,
        reflection,
    })
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2))
    });
    let slope = sxy / sxx;
    (slope, my - slope * mt)
}

/// Reflection probability from the standing-wave ratio of `k|ψ|²` over two
/// local wavelengths in front of the absorber, on the side carrying more
/// flux. An outgoing WKB wave keeps `k|ψ|²` flat; a reflected wave of
/// amplitude `r` modulates it by `±2r`.
fn reflection_estimate(
    spec: &PotentialSpec,
    x: &[f64],
    psi: &[Complex64],
    energy: f64,
    c: &LifetimeControls,
) -> Result<f64, EvalError> {
    let mut best: Option<(f64, f64)> = None;
    for s in [-1.0, 1.0] {
        let edge = s * c.inner;
        let ke = 2.0 * (energy - spec.eval_total(edge)?);
        if ke <= 0.0 {
            continue;
        }
        let span = 2.0 * 2.0 * std::f64::consts::PI / ke.sqrt();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let mut mean = 0.0;
        let mut n = 0;
        for (xi, p) in x.iter().zip(psi) {
            if s * xi <= c.inner && s * xi >= c.inner - span {
                let k = (2.0 * (energy - spec.eval_total(*xi)?)).max(0.0).sqrt();
                let y = k * p.norm_sqr();
                lo = lo.min(y);
                hi = hi.max(y);
                mean += y;
                n += 1;
            }
        }
        if n == 0 || hi <= 0.0 {
            continue;
        }
        let r = 0.5 * (hi - lo) / (hi + lo);
        let flux = mean / n as f64;
        if best.is_none_or(|b| flux > b.0) {
            best = Some((flux, r * r));
        }
    }
    Ok(best.map(|b| b.1).unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::WellModel;

    #[test]
    fn bound_state_does_not_decay() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.0).unwrap();
        let c = LifetimeControls {
            t_max: 100.0,
            inner: 40.0,
            absorber: 20.0,
            ..Default::default()
        };
        let l = lifetime_by_propagation(&spec, 0, &c, Monitor::default()).unwrap();
        assert!(matches!(l.rate, LifetimeRate::BelowFloor { .. }), "{:?}", l.rate);
        for (_, p) in &l.survival {
            assert!((p - 1.0).abs() < 1e-9, "{p}");
        }
        assert!((l.shooting_energy - l.grid_energy).abs() < 1e-3);
    }

    #[test]
    fn cancellation_stops_the_run() {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.06).unwrap();
        let flag = AtomicBool::new(false);
        let seen = std::sync::atomic::AtomicUsize::new(0);
        let progress = |p: Progress| {
            if seen.fetch_add(1, Ordering::Relaxed) == 3 {
                flag.store(true, Ordering::Relaxed);
            }
            assert!(p.norm <= 1.0 + 1e-9);
        };
        let monitor = Monitor {
            cancel: Some(&flag),
            progress: Some(&progress),
        };
        let r = lifetime_by_propagation(&spec, 0, &LifetimeControls::default(), monitor);
        assert_eq!(r, Err(LifetimeError::Cancelled { t: 4.0 }));
    }
}
