//! Lorentzian-plus-background least squares.
//!
//! Model: `y = A (Γ/2)² / ((E - E_r)² + (Γ/2)²) + B`, optionally with a
//! background slope `C (E - E_r)` for peaks that sit on the edge of a
//! continuum and so rise on one side. The fit runs in
//! coordinates centered on the window and scaled by its half-range, with
//! `y` scaled by its largest magnitude, so that a `Γ` of `1e-10` is as well
//! conditioned as one of order one.

use nalgebra::{Matrix5, Vector5};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitControls {
    pub max_iter: usize,
    /// Largest parameter update, relative to the parameter's scale, at which
    /// the fit is considered converged.
    pub step_tol: f64,
    /// A residual maximum above this fraction of `A` flags a second peak.
    pub overlap_frac: f64,
    /// When the constant-background fit leaves a relative RMS above this, a
    /// sloped background is tried and the better fit kept. `None` disables
    /// the slope.
    pub slope_above: Option<f64>,
}

impl Default for FitControls {
    fn default() -> Self {
        FitControls {
            max_iter: 500,
            step_tol: 1e-8,
            overlap_frac: 0.1,
            slope_above: Some(0.05),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzFit {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub background: f64,
    /// Background slope, zero unless the sloped model was needed.
    pub slope: f64,
    /// RMS residual over the window divided by `A`.
    pub rms: f64,
    pub iterations: usize,
    /// The residual shows a secondary maximum above `overlap_frac · A`.
    pub overlap: bool,
}

impl LorentzFit {
    pub fn eval(&self, e: f64) -> f64 {
        let g = 0.5 * self.fwhm;
        let d = e - self.center;
        self.amplitude * g * g / (d * d + g * g) + self.background + self.slope * d
    }

    /// `∫ (y - B) dE` of the fitted peak over `[lo, hi]`.
    pub fn peak_area(&self, lo: f64, hi: f64) -> f64 {
        let g = 0.5 * self.fwhm;
        self.amplitude * g * (((hi - self.center) / g).atan() - ((lo - self.center) / g).atan())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least 7 points in the window, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite sample in the fit window")]
    NonFinite,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("fitted width is not positive ({0:e})")]
    NegativeWidth(f64),
    #[error("fitted amplitude is not positive ({0:e}); the window holds no peak")]
    NotAPeak(f64),
    #[error("the largest sample sits on the window edge")]
    MaximumAtEdge,
    #[error("fitted center {center} lies outside the window [{lo}, {hi}]")]
    CenterOutside { center: f64, lo: f64, hi: f64 },
}

/// Half width at half prominence around `imax`, by linear interpolation of
/// the crossings; falls back to the grid spacing.
fn half_width_guess(pts: &[(f64, f64)], imax: usize, base: f64) -> f64 {
    let half = base + 0.5 * (pts[imax].1 - base);
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if pts[i].1 <= half {
                let (e0, y0) = pts[prev];
                let (e1, y1) = pts[i];
                let t = (y0 - half) / (y0 - y1);
                return Some(((e0 + t * (e1 - e0)) - pts[imax].0).abs());
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..imax).rev());
    let right = cross(&mut (imax + 1..pts.len()));
    let spacing = (pts[pts.len() - 1].0 - pts[0].0) / (pts.len() - 1) as f64;
    match (left, right) {
        (Some(l), Some(r)) => 0.5 * (l + r),
        (Some(w), None) | (None, Some(w)) => w,
        (None, None) => spacing,
    }
    .max(0.25 * spacing)
}

/// Fits one Lorentzian on a constant background to `(E, y)` samples sorted
/// by `E`, and on a sloped background if that leaves too large a residual.
pub fn fit_lorentzian(pts: &[(f64, f64)], controls: &FitControls) -> Result<LorentzFit, FitError> {
    let flat = fit_lorentzian_with(pts, controls, false);
    let Some(limit) = controls.slope_above else {
        return flat;
    };
    // the slope only refines a window that already fits as a peak
    let flat = flat?;
    if flat.rms <= limit {
        return Ok(flat);
    }
    match fit_lorentzian_with(pts, controls, true) {
        Ok(b) if b.rms < flat.rms => Ok(b),
        _ => Ok(flat),
    }
}

pub fn fit_lorentzian_with(pts: &[(f64, f64)], controls: &FitControls, sloped: bool) -> Result<LorentzFit, FitError> {
    let n = pts.len();
    if n < 7 {
        return Err(FitError::TooFewPoints(n));
    }
    if pts.iter().any(|(e, y)| !e.is_finite() || !y.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let imax = (0..n).fold(0, |b, i| if pts[i].1 > pts[b].1 { i } else { b });
    let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = pts[imax].1;
    if imax == 0 || imax == n - 1 {
        return Err(FitError::MaximumAtEdge);
    }
    let hw0 = half_width_guess(pts, imax, ymin);

    // scaled coordinates
    let e0 = pts[imax].0;
    let span = 0.5 * (pts[n - 1].0 - pts[0].0);
    let ys = ymax.abs().max(ymin.abs()).max(f64::MIN_POSITIVE);
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 - e0) / span).collect();
    let yv: Vec<f64> = pts.iter().map(|p| p.1 / ys).collect();

    let model = |p: &Vector5<f64>, x: f64| {
        let d = x - p[0];
        let g2 = p[1] * p[1];
        p[2] * g2 / (d * d + g2) + p[3] + p[4] * d
    };
    let cost = |p: &Vector5<f64>| -> f64 {
        xs.iter()
            .zip(&yv)
            .map(|(&x, &y)| {
                let r = y - model(p, x);
                r * r
            })
            .sum()
    };

    let mut p = Vector5::new(0.0, hw0 / span, (ymax - ymin) / ys, ymin / ys, 0.0);
    let mut c = cost(&p);
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < controls.max_iter {
        iterations += 1;
        let mut jtj = Matrix5::<f64>::zeros();
        let mut jtr = Vector5::<f64>::zeros();
        for (&x, &y) in xs.iter().zip(&yv) {
            let d = x - p[0];
            let g = p[1];
            let den = d * d + g * g;
            let j = Vector5::new(
                p[2] * g * g * 2.0 * d / (den * den) - p[4],
                p[2] * 2.0 * g * d * d / (den * den),
                g * g / den,
                1.0,
                if sloped { d } else { 0.0 },
            );
            jtj += j * j.transpose();
            jtr += j * (y - model(&p, x));
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj;
            for k in 0..5 {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-30);
            }
            if !sloped {
                a[(4, 4)] = 1.0;
            }
            let Some(delta) = a.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let trial = p + delta;
            if !(trial[1] > 0.0) {
                mu *= 10.0;
                continue;
            }
            let ct = cost(&trial);
            if ct <= c {
                let scale = [trial[1], trial[1], trial[2].abs(), trial[2].abs(), trial[2].abs()];
                let rel = (0..5)
                    .map(|k| delta[k].abs() / (trial[k].abs() + scale[k]).max(1e-300))
                    .fold(0.0, f64::max);
                p = trial;
                c = ct;
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                if rel < controls.step_tol {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no descent direction left: at a minimum to working precision
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FitError::NoConvergence(iterations));
    }
    if !(p[1] > 0.0) {
        return Err(FitError::NegativeWidth(2.0 * p[1] * span));
    }
    if !(p[2] > 0.0) {
        return Err(FitError::NotAPeak(p[2] * ys));
    }
    let center = e0 + p[0] * span;
    let (lo, hi) = (pts[0].0, pts[n - 1].0);
    if !(center >= lo && center <= hi) {
        return Err(FitError::CenterOutside { center, lo, hi });
    }
    let rms = (c / n as f64).sqrt() / p[2];
    // secondary maximum in the residual
    let res: Vec<f64> = xs.iter().zip(&yv).map(|(&x, &y)| y - model(&p, x)).collect();
    let overlap =
        (1..n - 1).any(|i| res[i] > res[i - 1] && res[i] >= res[i + 1] && res[i] > controls.overlap_frac * p[2]);
    Ok(LorentzFit {
        center,
        fwhm: 2.0 * p[1] * span,
        amplitude: p[2] * ys,
        background: p[3] * ys,
        slope: p[4] * ys / span,
        rms,
        iterations,
        overlap,
    })
}
