//! Resonance peaks of `Λ1(E)`: scanning, Lorentzian fits, the `ε` schedule
//! and adiabatic tracking of a state through a parameter sweep.
//!
//! A pole at `E_r - iΓ/2` probed at `E + iε` shows up with full width
//! `Γ + 2ε`, so the reported width is the fitted FWHM minus `2ε`.

pub mod fit;

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::potential::PotentialSpec;
use crate::propagate::{ComplexEnergy, PropagationError};
use crate::spectral::{compute_weyl_pair, spectral_density, SpectralControls, SpectralError, SpectralSample};

pub use fit::{fit_lorentzian, fit_lorentzian_with, FitControls, FitError, LorentzFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanGrid {
    pub e_min: f64,
    pub e_max: f64,
    pub n_points: usize,
    /// Add points around every detected maximum until it holds at least
    /// `ResonanceControls::refine_min_points` samples within three
    /// half-widths.
    pub refine: bool,
}

impl ScanGrid {
    pub fn new(e_min: f64, e_max: f64, n_points: usize) -> Result<Self, ResonanceError> {
        if !(e_min < e_max) || !e_min.is_finite() || !e_max.is_finite() || n_points < 3 {
            return Err(ResonanceError::BadGrid { e_min, e_max, n_points });
        }
        Ok(ScanGrid {
            e_min,
            e_max,
            n_points,
            refine: true,
        })
    }

    pub fn energies(&self) -> Vec<f64> {
        linspace(self.e_min, self.e_max, self.n_points)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceControls {
    pub spectral: SpectralControls,
    pub fit: FitControls,
    pub eps_initial: f64,
    /// `ε` is divided by this at every step of the schedule.
    pub eps_factor: f64,
    /// The schedule stops below this `ε`.
    pub eps_min: f64,
    /// Acceptance needs `Γ ≥ ratio_min · ε`.
    pub ratio_min: f64,
    /// ... and `Γ` within this fraction of the previous step.
    pub stability: f64,
    pub max_iter: usize,
    /// Refinement windows span `± window_widths · FWHM`.
    pub window_widths: f64,
    pub window_points: usize,
    pub refine_min_points: usize,
    /// Maxima with prominence below this fraction of their height are ignored.
    pub min_prominence: f64,
    /// Fits with a larger relative RMS are not accepted.
    pub max_rms: f64,
    /// Match `m±` at one fixed point per refinement window.
    pub fixed_match: bool,
}

impl Default for ResonanceControls {
    fn default() -> Self {
        ResonanceControls {
            spectral: SpectralControls::default(),
            fit: FitControls::default(),
            eps_initial: 1e-4,
            eps_factor: 10.0,
            eps_min: 1e-13,
            ratio_min: 100.0,
            stability: 0.01,
            max_iter: 16,
            window_widths: 5.0,
            window_points: 41,
            refine_min_points: 20,
            min_prominence: 0.05,
            max_rms: 0.05,
            fixed_match: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResonanceError {
    #[error("invalid scan grid [{e_min}, {e_max}] with {n_points} points")]
    BadGrid { e_min: f64, e_max: f64, n_points: usize },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("fit near E = {energy} at epsilon = {epsilon:e}: {source}")]
    Fit {
        energy: f64,
        epsilon: f64,
        #[source]
        source: FitError,
    },
    #[error("fit near E = {energy} at epsilon = {epsilon:e} leaves relative rms {rms:.3e}")]
    PoorFit { energy: f64, epsilon: f64, rms: f64 },
    #[error("too many failed points ({failed} of {total}) in the window around E = {energy}")]
    WindowFailed { energy: f64, failed: usize, total: usize },
    #[error("width did not settle within {iterations} epsilon steps near E = {energy}")]
    IterationCap { energy: f64, iterations: usize },
    #[error("width kept changing by more than the stability limit down to epsilon = {epsilon:e} near E = {energy}")]
    Unstable { energy: f64, epsilon: f64 },
    #[error("no peak found within {window:?} at parameter {parameter}")]
    Lost { parameter: f64, window: (f64, f64) },
    #[error("ambiguous continuation at parameter {parameter}: candidates {candidates:?}")]
    Ambiguous { parameter: f64, candidates: Vec<f64> },
}

impl From<PropagationError> for ResonanceError {
    fn from(e: PropagationError) -> Self {
        ResonanceError::Spectral(e.into())
    }
}

/// A point of the scan that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanGap {
    pub energy: f64,
    pub error: String,
}

/// A local maximum of `Λ1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakSeed {
    pub energy: f64,
    pub half_width: f64,
    pub height: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scan {
    pub epsilon: f64,
    /// Sorted by energy.
    pub samples: Vec<SpectralSample>,
    pub gaps: Vec<ScanGap>,
    pub peaks: Vec<PeakSeed>,
}

impl Scan {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.energy, s.density())).collect()
    }
}

fn evaluate(
    spec: &PotentialSpec,
    energies: &[f64],
    epsilon: f64,
    controls: &SpectralControls,
) -> Vec<Result<SpectralSample, SpectralError>> {
    energies
        .par_iter()
        .map(|&e| {
            let lam = ComplexEnergy::new(e, epsilon).map_err(SpectralError::from)?;
            spectral_density(spec, lam, controls)
        })
        .collect()
}

/// Local maxima of sorted `(E, y)` data whose prominence is at least
/// `min_prominence` of their height.
pub fn find_peaks(pts: &[(f64, f64)], min_prominence: f64) -> Vec<PeakSeed> {
    let n = pts.len();
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let h = pts[i].1;
        if !(h > pts[i - 1].1 && h >= pts[i + 1].1) {
            continue;
        }
        let mut left = h;
        for j in (0..i).rev() {
            if pts[j].1 > h {
                break;
            }
            left = left.min(pts[j].1);
        }
        let mut right = h;
        for p in &pts[i + 1..] {
            if p.1 > h {
                break;
            }
            right = right.min(p.1);
        }
        let base = left.max(right);
        let prominence = h - base;
        if !(prominence >= min_prominence * h.abs()) || prominence <= 0.0 {
            continue;
        }
        let (energy, half_width) = peak_shape(pts, i, base);
        out.push(PeakSeed {
            energy,
            half_width,
            height: h,
            prominence,
        });
    }
    out
}

/// Center and half-width of the maximum at `i`. Resolved peaks use the
/// half-prominence crossings; a peak that is a single raised sample uses the
/// parabola through `1/(y - base)` at the three top samples.
fn peak_shape(pts: &[(f64, f64)], i: usize, base: f64) -> (f64, f64) {
    let n = pts.len();
    let h = pts[i].1;
    let half = base + 0.5 * (h - base);
    let crossing = |j: usize, k: usize| {
        let (e0, y0) = pts[j];
        let (e1, y1) = pts[k];
        e0 + (y0 - half) / (y0 - y1) * (e1 - e0)
    };
    let mut l = i;
    while l > 0 && pts[l - 1].1 > half {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < n && pts[r + 1].1 > half {
        r += 1;
    }
    if l > 0 && r + 1 < n && (r > i || l < i) {
        let el = crossing(l, l - 1);
        let er = crossing(r, r + 1);
        return (pts[i].0, 0.5 * (er - el));
    }
    let (e0, e1, e2) = (pts[i - 1].0, pts[i].0, pts[i + 1].0);
    let z = |y: f64| 1.0 / (y - base).max(f64::MIN_POSITIVE);
    let (z0, z1, z2) = (z(pts[i - 1].1), z(pts[i].1), z(pts[i + 1].1));
    // z = α (E - c)² + β
    let d01 = (z1 - z0) / (e1 - e0);
    let d12 = (z2 - z1) / (e2 - e1);
    let alpha = (d12 - d01) / (e2 - e0);
    let spacing = 0.5 * (e2 - e0);
    if alpha > 0.0 {
        let c = (0.5 * (e0 + e1) - d01 / (2.0 * alpha)).clamp(e0, e2);
        let beta = z1 - alpha * (e1 - c) * (e1 - c);
        if beta > 0.0 {
            return (c, (beta / alpha).sqrt().min(spacing));
        }
    }
    (e1, 0.5 * spacing)
}

/// Samples `Λ1` over the grid in parallel, then refines around every peak.
/// Failed points are kept as gaps and do not stop the scan.
pub fn scan_spectrum(
    spec: &PotentialSpec,
    grid: &ScanGrid,
    epsilon: f64,
    controls: &ResonanceControls,
) -> Result<Scan, ResonanceError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ResonanceError::BadEpsilon(epsilon));
    }
    let mut energies = grid.energies();
    let mut results = evaluate(spec, &energies, epsilon, &controls.spectral);
    let mut scan = assemble(&energies, results.clone(), epsilon, controls);
    if grid.refine {
        for _ in 0..4 {
            let mut extra = Vec::new();
            for p in &scan.peaks {
                let hw = p.half_width.max(1e-15 * p.energy.abs().max(1.0));
                let (lo, hi) = (p.energy - 3.0 * hw, p.energy + 3.0 * hw);
                let inside = scan.samples.iter().filter(|s| s.energy >= lo && s.energy <= hi).count();
                if inside < controls.refine_min_points {
                    extra.extend(linspace(lo, hi, 2 * controls.refine_min_points + 1));
                }
            }
            if extra.is_empty() {
                break;
            }
            let mut all: Vec<f64> = energies.iter().copied().chain(extra).collect();
            all.sort_by(f64::total_cmp);
            all.dedup();
            let new: Vec<f64> = all
                .iter()
                .copied()
                .filter(|e| energies.binary_search_by(|x| x.total_cmp(e)).is_err())
                .collect();
            let fresh = evaluate(spec, &new, epsilon, &controls.spectral);
            let mut merged: Vec<(f64, Result<SpectralSample, SpectralError>)> = energies
                .into_iter()
                .zip(results)
                .chain(new.into_iter().zip(fresh))
                .collect();
            merged.sort_by(|a, b| a.0.total_cmp(&b.0));
            (energies, results) = merged.into_iter().unzip();
            scan = assemble(&energies, results.clone(), epsilon, controls);
        }
    }
    Ok(scan)
}

fn assemble(
    energies: &[f64],
    results: Vec<Result<SpectralSample, SpectralError>>,
    epsilon: f64,
    controls: &ResonanceControls,
) -> Scan {
    let mut samples = Vec::new();
    let mut gaps = Vec::new();
    for (&e, r) in energies.iter().zip(results) {
        match r {
            Ok(s) => samples.push(s),
            Err(err) => gaps.push(ScanGap {
                energy: e,
                error: err.to_string(),
            }),
        }
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.energy, s.density())).collect();
    let peaks = find_peaks(&pts, controls.min_prominence);
    Scan {
        epsilon,
        samples,
        gaps,
        peaks,
    }
}

/// A resolved resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    /// Stark-shifted level, a.u.
    pub center: f64,
    /// Decay rate (FWHM with the `ε` broadening removed), a.u.
    pub gamma: f64,
    pub amplitude: f64,
    pub background: f64,
    /// Linear background term, zero unless the flat fit was too poor.
    pub slope: f64,
    pub epsilon_used: f64,
    pub fit_rms: f64,
    pub overlap: bool,
}

/// Outcome of the `ε` schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Rate {
    Resolved(Resonance),
    /// The width stayed below `ratio_min · ε` down to the smallest usable
    /// `ε`; the rate is below `floor`.
    BelowFloor {
        center: f64,
        floor: f64,
        epsilon: f64,
        fit_rms: f64,
    },
}

impl Rate {
    pub fn center(&self) -> f64 {
        match self {
            Rate::Resolved(r) => r.center,
            Rate::BelowFloor { center, .. } => *center,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Rate::Resolved(r) => Some(r.gamma),
            Rate::BelowFloor { .. } => None,
        }
    }

    pub fn floor(&self) -> Option<f64> {
        match self {
            Rate::Resolved(_) => None,
            Rate::BelowFloor { floor, .. } => Some(*floor),
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Rate::Resolved(r) => r.epsilon_used,
            Rate::BelowFloor { epsilon, .. } => *epsilon,
        }
    }

    pub fn fit_rms(&self) -> f64 {
        match self {
            Rate::Resolved(r) => r.fit_rms,
            Rate::BelowFloor { fit_rms, .. } => *fit_rms,
        }
    }

    /// `Γ`, or the floor for unresolved rates; an upper estimate either way.
    pub fn gamma_or_floor(&self) -> f64 {
        self.gamma().or(self.floor()).unwrap_or(0.0)
    }
}

/// One step of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineStep {
    pub epsilon: f64,
    pub fit: LorentzFit,
    /// `fwhm - 2ε`
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refined {
    pub rate: Rate,
    pub history: Vec<RefineStep>,
}

/// Samples `Λ1` on `center ± window_widths · fwhm` and fits it, moving and
/// resizing the window until the fitted width matches its scale.
pub fn fit_window(
    spec: &PotentialSpec,
    center: f64,
    fwhm: f64,
    epsilon: f64,
    controls: &ResonanceControls,
) -> Result<(LorentzFit, Vec<(f64, f64)>), ResonanceError> {
    let mut center = center;
    let mut w = fwhm.max(2.0 * epsilon);
    let mut last = None;
    for _ in 0..8 {
        let half = controls.window_widths * w;
        let energies = linspace(center - half, center + half, controls.window_points);
        let mut spectral = controls.spectral;
        if controls.fixed_match {
            // points where the center settles well inside the tolerance, so
            // the rest of the window settles there too
            let lam = ComplexEnergy::new(center, epsilon)?;
            let strict = SpectralControls {
                m_rel_tol: 0.01 * controls.spectral.m_rel_tol,
                ..controls.spectral
            };
            let weyl =
                compute_weyl_pair(spec, lam, &strict).or_else(|_| compute_weyl_pair(spec, lam, &controls.spectral))?;
            spectral.match_at = Some(weyl.match_points());
        }
        let results = evaluate(spec, &energies, epsilon, &spectral);
        let total = results.len();
        let pts: Vec<(f64, f64)> = energies
            .iter()
            .zip(&results)
            .filter_map(|(&e, r)| r.as_ref().ok().map(|s| (e, s.density())))
            .collect();
        let failed = total - pts.len();
        if failed * 10 > total {
            if let Some(Err(e)) = results.into_iter().find(|r| r.is_err()) {
                if failed == total {
                    return Err(e.into());
                }
            }
            return Err(ResonanceError::WindowFailed {
                energy: center,
                failed,
                total,
            });
        }
        let fit = fit_lorentzian(&pts, &controls.fit).map_err(|source| ResonanceError::Fit {
            energy: center,
            epsilon,
            source,
        })?;
        let ratio = fit.fwhm / w;
        let moved = (fit.center - center).abs() / half;
        let good = (0.5..=2.0).contains(&ratio) && moved < 0.2;
        last = Some((fit, pts));
        if good {
            break;
        }
        center = fit.center;
        w = fit.fwhm.clamp(w / 50.0, w * 50.0).max(2.0 * epsilon);
    }
    Ok(last.expect("at least one window is fitted"))
}

/// Runs the `ε` schedule on one peak: fit, and while the width is not both
/// `≥ ratio_min · ε` and stable to `stability` against the previous step,
/// divide `ε` by `eps_factor` and refit on a window scaled to the last fit.
pub fn refine_resonance(
    spec: &PotentialSpec,
    seed: &PeakSeed,
    controls: &ResonanceControls,
) -> Result<Refined, ResonanceError> {
    let mut eps = controls.eps_initial;
    let mut center = seed.energy;
    let mut fwhm = (2.0 * seed.half_width).max(2.0 * eps);
    let mut history: Vec<RefineStep> = Vec::new();
    for _ in 0..controls.max_iter {
        let step = match fit_window(spec, center, fwhm, eps, controls) {
            Ok((fit, _)) if fit.rms <= controls.max_rms => Ok(RefineStep {
                epsilon: eps,
                fit,
                gamma: fit.fwhm - 2.0 * eps,
            }),
            Ok((fit, _)) => Err(ResonanceError::PoorFit {
                energy: center,
                epsilon: eps,
                rms: fit.rms,
            }),
            Err(e) => Err(e),
        };
        let step = match step {
            Ok(s) => s,
            // below the precision of m the peak turns to noise; what was
            // resolved before stands as the floor
            Err(e) => return floor_or(e, &history, controls),
        };
        history.push(step);
        let resolved = step.gamma >= controls.ratio_min * eps;
        let stable = history.len() >= 2 && {
            let prev = history[history.len() - 2].gamma;
            (step.gamma - prev).abs() < controls.stability * step.gamma.abs()
        };
        if resolved && stable {
            return Ok(Refined {
                rate: Rate::Resolved(Resonance {
                    center: step.fit.center,
                    gamma: step.gamma,
                    amplitude: step.fit.amplitude,
                    background: step.fit.background,
                    slope: step.fit.slope,
                    epsilon_used: eps,
                    fit_rms: step.fit.rms,
                    overlap: step.fit.overlap,
                }),
                history,
            });
        }
        let next = eps / controls.eps_factor;
        center = step.fit.center;
        if next < controls.eps_min {
            if resolved {
                return Err(ResonanceError::Unstable {
                    energy: center,
                    epsilon: eps,
                });
            }
            return Ok(floor(&history, controls));
        }
        fwhm = step.gamma.max(0.0) + 2.0 * next;
        eps = next;
    }
    Err(ResonanceError::IterationCap {
        energy: center,
        iterations: controls.max_iter,
    })
}

fn floor(history: &[RefineStep], controls: &ResonanceControls) -> Refined {
    let last = history.last().expect("floor needs one fitted step");
    Refined {
        rate: Rate::BelowFloor {
            center: last.fit.center,
            floor: controls.ratio_min * last.epsilon,
            epsilon: last.epsilon,
            fit_rms: last.fit.rms,
        },
        history: history.to_vec(),
    }
}

fn floor_or(
    err: ResonanceError,
    history: &[RefineStep],
    controls: &ResonanceControls,
) -> Result<Refined, ResonanceError> {
    match history.last() {
        Some(last) if last.gamma < controls.ratio_min * last.epsilon => Ok(floor(history, controls)),
        _ => Err(err),
    }
}

/// Relative change of `Γ` when the resonance is refitted at half its `ε`.
pub fn epsilon_halving_change(
    spec: &PotentialSpec,
    res: &Resonance,
    controls: &ResonanceControls,
) -> Result<f64, ResonanceError> {
    let eps = 0.5 * res.epsilon_used;
    let (fit, _) = fit_window(spec, res.center, res.gamma + 2.0 * eps, eps, controls)?;
    Ok(((fit.fwhm - 2.0 * eps) - res.gamma).abs() / res.gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackControls {
    pub resonance: ResonanceControls,
    /// Candidates are searched within this distance of the predicted center.
    pub search_half_width: f64,
    pub search_points: usize,
    /// Two candidates closer than this to the prediction make the step
    /// ambiguous, unless the nearer one is closer by a factor of three.
    pub ambiguity_tol: f64,
}

impl Default for TrackControls {
    fn default() -> Self {
        TrackControls {
            resonance: ResonanceControls::default(),
            search_half_width: 0.04,
            search_points: 81,
            ambiguity_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackPoint {
    pub parameter: f64,
    pub rate: Rate,
}

/// Follows one state through `family` (ordered by parameter), starting from
/// `start_energy`, by nearest-center continuation. Stops at the first
/// failure.
pub fn track_state(
    family: &[(f64, PotentialSpec)],
    start_energy: f64,
    controls: &TrackControls,
) -> Result<Vec<TrackPoint>, ResonanceError> {
    let mut out = Vec::with_capacity(family.len());
    let mut tracker = StateTracker::new(start_energy);
    for (parameter, spec) in family {
        out.push(tracker.step(*parameter, spec, controls)?);
    }
    Ok(out)
}

/// Like [`track_state`], but a failed point is recorded and skipped; the
/// continuation carries on from the points that succeeded.
pub fn track_state_partial(
    family: &[(f64, PotentialSpec)],
    start_energy: f64,
    controls: &TrackControls,
) -> Vec<(f64, Result<TrackPoint, ResonanceError>)> {
    let mut tracker = StateTracker::new(start_energy);
    family
        .iter()
        .map(|(parameter, spec)| (*parameter, tracker.step(*parameter, spec, controls)))
        .collect()
}

/// Continuation state of [`track_state`], for callers that pick their own
/// points as they go. Failed steps leave no trace in the prediction.
#[derive(Debug, Clone)]
pub struct StateTracker {
    start: f64,
    done: Vec<TrackPoint>,
}

impl StateTracker {
    pub fn new(start: f64) -> Self {
        StateTracker {
            start,
            done: Vec::new(),
        }
    }

    /// Linear extrapolation from the last two successful points.
    pub fn predict(&self, parameter: f64) -> f64 {
        match self.done.as_slice() {
            [] => self.start,
            [one] => one.rate.center(),
            [.., a, b] => {
                let slope = (b.rate.center() - a.rate.center()) / (b.parameter - a.parameter);
                b.rate.center() + slope * (parameter - b.parameter)
            }
        }
    }

    pub fn step(
        &mut self,
        parameter: f64,
        spec: &PotentialSpec,
        controls: &TrackControls,
    ) -> Result<TrackPoint, ResonanceError> {
        let seed = locate(spec, parameter, self.predict(parameter), controls)?;
        let refined = refine_resonance(spec, &seed, &controls.resonance)?;
        let point = TrackPoint {
            parameter,
            rate: refined.rate,
        };
        self.done.push(point);
        Ok(point)
    }
}

/// The peak nearest `predicted` in a search window.
pub fn locate(
    spec: &PotentialSpec,
    parameter: f64,
    predicted: f64,
    controls: &TrackControls,
) -> Result<PeakSeed, ResonanceError> {
    let w = controls.search_half_width;
    let mut grid = ScanGrid::new(predicted - w, predicted + w, controls.search_points)?;
    grid.refine = false;
    let spacing = 2.0 * w / (controls.search_points - 1) as f64;
    let eps = controls.resonance.eps_initial.max(0.5 * spacing);
    let scan = scan_spectrum(spec, &grid, eps, &controls.resonance)?;
    let mut cands: Vec<PeakSeed> = scan.peaks;
    cands.sort_by(|a, b| (a.energy - predicted).abs().total_cmp(&(b.energy - predicted).abs()));
    match cands.as_slice() {
        [] => Err(ResonanceError::Lost {
            parameter,
            window: (predicted - w, predicted + w),
        }),
        [a, b, ..]
            if (b.energy - predicted).abs() < controls.ambiguity_tol
                && (b.energy - predicted).abs() < 3.0 * (a.energy - predicted).abs() =>
        {
            Err(ResonanceError::Ambiguous {
                parameter,
                candidates: cands.iter().map(|c| c.energy).collect(),
            })
        }
        [a, ..] => Ok(*a),
    }
}

pub const RATE_CSV_HEADER: &str = "parameter,E_r_au,gamma_au,epsilon_used,fit_rms,state_label,floor_au";

/// Rate-curve rows; unresolved rates leave `gamma_au` empty and fill
/// `floor_au`.
pub fn write_rate_csv<W: Write>(mut w: W, rows: &[(String, TrackPoint)]) -> io::Result<()> {
    writeln!(w, "{RATE_CSV_HEADER}")?;
    for (label, p) in rows {
        let r = &p.rate;
        writeln!(
            w,
            "{:e},{:e},{},{:e},{:e},{},{}",
            p.parameter,
            r.center(),
            r.gamma().map(|g| format!("{g:e}")).unwrap_or_default(),
            r.epsilon(),
            r.fit_rms(),
            label,
            r.floor().map(|f| format!("{f:e}")).unwrap_or_default()
        )?;
    }
    Ok(())
}
