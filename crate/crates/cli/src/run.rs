//! The verbs. Each one writes its files through [`Outputs`], records a task
//! per unit of work and returns the overall status; `Err` is fatal.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use wtk_core::potential::{PotentialSpec, TailKind, WellModel};
use wtk_core::propagate::ComplexEnergy;
use wtk_core::reference::{
    adk_rate, adk_rate_shifted, angular_average, dense_grid_levels, lifetime_by_propagation, polarizability,
    shoot_bound_states, square_well_levels, write_survival_csv, AdkParams, DenseGrid, LifetimeControls, Monitor,
    Progress, RateCurve,
};
use wtk_core::resonance::{
    epsilon_halving_change, fit_lorentzian, refine_resonance, scan_spectrum, write_rate_csv, FitControls, Rate,
    ResonanceControls, ResonanceError, ScanGrid, StateTracker, TrackControls, TrackPoint,
};
use wtk_core::spectral::{spectral_density, write_spectrum_csv, SpectralSample};

use crate::artifacts::{Outputs, RunStatus, TaskRecord, TaskStatus};
use crate::config::{PotentialConfig, RunConfig};

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub outputs: Outputs,
    pub quiet: bool,
    pub tasks: Vec<TaskRecord>,
}

impl Context<'_> {
    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn write(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<(), String> {
        let path = self
            .outputs
            .write(name, fill)
            .map_err(|e| format!("cannot write {name}: {e}"))?;
        self.note(format!("wrote {}", path.display()));
        Ok(())
    }

    fn status(&self) -> RunStatus {
        if self.tasks.iter().any(|t| t.status == TaskStatus::Failed) {
            RunStatus::Partial
        } else {
            RunStatus::Ok
        }
    }

    fn potential(&self) -> Result<&PotentialConfig, String> {
        self.config
            .potential
            .as_ref()
            .ok_or_else(|| "potential is required".to_string())
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Lowest point of the well on a coarse grid, as a lower bracket for the
/// bound-state search.
fn well_minimum(well: &WellModel) -> Result<f64, String> {
    let mut lo = f64::INFINITY;
    for i in 0..=12_000 {
        let x = -60.0 + 0.01 * i as f64;
        let v = well.eval(x).map_err(|e| e.to_string())?;
        lo = lo.min(v);
    }
    Ok(lo)
}

/// The field-free energy of level `state`.
fn level(well: &WellModel, state: usize) -> Result<f64, String> {
    let lo = well_minimum(well)? - 1e-3;
    let hi = match well.tail_kind() {
        TailKind::Decaying => -1e-9,
        TailKind::Confining => lo + 1e3,
    };
    let levels = shoot_bound_states(well, (lo, hi), state + 1).map_err(|e| e.to_string())?;
    levels.get(state).copied().ok_or_else(|| {
        format!(
            "the well holds only {} bound level(s), level {state} requested",
            levels.len()
        )
    })
}

/// One point of a tracked field sweep.
enum Tracked {
    Done(TrackPoint),
    Failed(ResonanceError),
    /// Not attempted: an intermediate point after tracking was lost.
    Skipped,
}

/// Field, whether it was requested, outcome.
type TrackedPoint = (f64, bool, Tracked);

/// Follows `state` from zero field through `requested` fields on a grid of
/// spacing `step`. Intermediate points are dropped after three failures in
/// a row; requested fields are always attempted.
fn track_fields(
    spec: &PotentialSpec,
    start: f64,
    requested: &[f64],
    step: f64,
    controls: &TrackControls,
) -> Result<Vec<TrackedPoint>, String> {
    let top = requested.iter().copied().fold(0.0, f64::max);
    let mut grid: Vec<(f64, bool)> = Vec::new();
    let n = (top / step).floor() as usize;
    for i in 0..=n {
        grid.push((step * i as f64, false));
    }
    for &f in requested {
        match grid.iter_mut().find(|(g, _)| (g - f).abs() <= 1e-12 * f.max(1.0)) {
            Some(slot) => *slot = (f, true),
            None => grid.push((f, true)),
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut tracker = StateTracker::new(start);
    let mut misses = 0;
    let mut out = Vec::with_capacity(grid.len());
    for (f, wanted) in grid {
        if misses >= 3 && !wanted {
            out.push((f, wanted, Tracked::Skipped));
            continue;
        }
        let point = spec.with_field(f).map_err(|e| e.to_string())?;
        match tracker.step(f, &point, controls) {
            Ok(p) => {
                misses = 0;
                out.push((f, wanted, Tracked::Done(p)));
            }
            Err(e) => {
                misses += 1;
                out.push((f, wanted, Tracked::Failed(e)));
            }
        }
    }
    Ok(out)
}

fn track_rows(label: &str, points: &[TrackedPoint]) -> Vec<(String, TrackPoint)> {
    points
        .iter()
        .filter_map(|(_, _, t)| match t {
            Tracked::Done(p) => Some((label.to_string(), *p)),
            _ => None,
        })
        .collect()
}

pub fn scan(ctx: &mut Context) -> Result<RunStatus, String> {
    let pot = ctx.potential()?;
    let spec = pot.spec().map_err(|e| e.to_string())?;
    let cfg = ctx.config.scan.clone().ok_or("scan section is required")?;
    let controls = ctx.config.controls.resonance();
    let mut grid = ScanGrid::new(cfg.e_min, cfg.e_max, cfg.n_points).map_err(|e| e.to_string())?;
    grid.refine = cfg.refine;
    ctx.note(format!(
        "scanning {} points on [{}, {}] at epsilon {:e}",
        cfg.n_points, cfg.e_min, cfg.e_max, cfg.epsilon
    ));
    let scan = scan_spectrum(&spec, &grid, cfg.epsilon, &controls).map_err(|e| e.to_string())?;
    for gap in &scan.gaps {
        ctx.tasks
            .push(TaskRecord::failed(format!("sample E={:e}", gap.energy), &gap.error));
    }
    ctx.tasks
        .push(TaskRecord::ok(format!("scan ({} samples)", scan.samples.len())));
    ctx.note(format!("{} peak(s) found", scan.peaks.len()));

    let refined: Vec<_> = scan
        .peaks
        .par_iter()
        .map(|p| refine_resonance(&spec, p, &controls))
        .collect();
    let mut rows = Vec::new();
    for (i, (peak, r)) in scan.peaks.iter().zip(refined).enumerate() {
        let name = format!("peak {i} near E={:e}", peak.energy);
        match r {
            Ok(r) => {
                rows.push((
                    format!("peak{i}"),
                    TrackPoint {
                        parameter: spec.field(),
                        rate: r.rate,
                    },
                ));
                ctx.tasks.push(TaskRecord::ok(name));
            }
            Err(e) => ctx.tasks.push(TaskRecord::failed(name, e)),
        }
    }
    let samples = scan.samples;
    ctx.write("spectrum.csv", |w| write_spectrum_csv(w, &samples))?;
    ctx.write("resonances.csv", |w| write_rate_csv(w, &rows))?;
    Ok(ctx.status())
}

pub const FSWEEP_CSV_HEADER: &str = "F,E_r,gamma_wtk,gamma_wtk_angavg,gamma_adk,gamma_adk_starkshifted,stark_shift,perturbative_shift,gamma_wtk_angavg_literal,floor_au";

pub fn fsweep(ctx: &mut Context) -> Result<RunStatus, String> {
    let pot = ctx.potential()?;
    let spec = pot.spec().map_err(|e| e.to_string())?;
    let cfg = ctx.config.fsweep.clone().ok_or("fsweep section is required")?;
    let controls = ctx.config.controls.track();
    let well = spec.well().clone();

    let e0 = level(&well, cfg.state)?;
    ctx.note(format!("field-free level {}: {e0:.10}", cfg.state));
    let alpha = if cfg.state == 0 {
        match polarizability(&well) {
            Ok(p) => {
                ctx.note(format!("polarizability {:.6}", p.alpha));
                ctx.tasks.push(TaskRecord::ok("polarizability"));
                Some(p.alpha)
            }
            Err(e) => {
                ctx.tasks.push(TaskRecord::failed("polarizability", e));
                None
            }
        }
    } else {
        ctx.tasks.push(TaskRecord::skipped(
            "polarizability",
            "perturbative shift is for the ground level only",
        ));
        None
    };

    let points = track_fields(&spec, e0, &cfg.fields, cfg.track_step, &controls)?;
    // reference energy for the shift: the tracked zero-field center
    let center0 = points
        .iter()
        .find_map(|(f, _, t)| match t {
            Tracked::Done(p) if *f == 0.0 => Some(p.rate.center()),
            _ => None,
        })
        .unwrap_or(e0);
    let nodes: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|(f, _, t)| match t {
            Tracked::Done(p) if *f > 0.0 => p.rate.gamma().filter(|g| *g > 0.0).map(|g| (*f, g)),
            _ => None,
        })
        .collect();
    let curve = if nodes.is_empty() {
        None
    } else {
        Some(RateCurve::new(nodes).map_err(|e| e.to_string())?)
    };

    let mut lines = Vec::new();
    for &f in &cfg.fields {
        let Some((_, _, t)) = points.iter().find(|(g, w, _)| *w && *g == f) else {
            continue;
        };
        let name = format!("F={f:e}");
        let p = match t {
            Tracked::Done(p) => {
                ctx.tasks.push(TaskRecord::ok(&name));
                Some(p)
            }
            Tracked::Failed(e) => {
                ctx.tasks.push(TaskRecord::failed(&name, e));
                None
            }
            Tracked::Skipped => unreachable!("requested fields are always attempted"),
        };
        let gamma = p.and_then(|p| p.rate.gamma());
        let floor = p.and_then(|p| p.rate.floor());
        let avg = match (&curve, gamma) {
            (Some(c), Some(_)) => angular_average(c, f).ok(),
            _ => None,
        };
        let shift = p.map(|p| p.rate.center() - center0);
        let adk = AdkParams::new(-e0, cfg.charge, f).ok();
        let g_adk = adk.as_ref().and_then(|a| adk_rate(a).ok());
        let g_adk_shifted = match (&adk, shift) {
            (Some(a), Some(s)) => adk_rate_shifted(a, s).ok(),
            _ => None,
        };
        let perturbative = alpha.map(|a| -0.5 * a * f * f);
        lines.push(format!(
            "{:e},{},{},{},{},{},{},{},{},{}",
            f,
            num(p.map(|p| p.rate.center())),
            num(gamma),
            num(avg.map(|a| a.solid_angle)),
            num(g_adk),
            num(g_adk_shifted),
            num(shift),
            num(perturbative),
            num(avg.map(|a| a.literal)),
            num(floor),
        ));
    }
    let skipped = points.iter().filter(|(_, _, t)| matches!(t, Tracked::Skipped)).count();
    let lost = points
        .iter()
        .filter(|(_, w, t)| !*w && matches!(t, Tracked::Failed(_)))
        .count();
    if skipped + lost > 0 {
        ctx.note(format!(
            "{lost} intermediate field(s) failed and {skipped} were skipped; the angular average bridges them"
        ));
    }

    let rows = track_rows(&format!("state{}", cfg.state), &points);
    ctx.write("fsweep.csv", |w| {
        writeln!(w, "{FSWEEP_CSV_HEADER}")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    ctx.write("track.csv", |w| write_rate_csv(w, &rows))?;
    Ok(ctx.status())
}

pub const RSWEEP_CSV_HEADER: &str = "R,state,F,E_r,gamma,floor_au";

pub fn rsweep(ctx: &mut Context) -> Result<RunStatus, String> {
    let pot = ctx.potential()?;
    let PotentialConfig::DoubleWell { a, .. } = pot else {
        return Err("rsweep needs a double_well potential".into());
    };
    let a = *a;
    let cfg = ctx.config.rsweep.clone().ok_or("rsweep section is required")?;
    let controls = ctx.config.controls.track();
    let jobs: Vec<(f64, usize)> = cfg
        .separations
        .iter()
        .flat_map(|&r| cfg.states.iter().map(move |&s| (r, s)))
        .collect();
    ctx.note(format!("{} (R, state) track(s)", jobs.len()));
    let results: Vec<Result<Vec<TrackedPoint>, String>> = jobs
        .par_iter()
        .map(|&(r, s)| {
            let well = WellModel::DoubleWell { a, r };
            let e0 = level(&well, s)?;
            let spec = PotentialSpec::new(well, 0.0).map_err(|e| e.to_string())?;
            track_fields(&spec, e0, &cfg.fields, cfg.track_step, &controls)
        })
        .collect();

    let mut lines = Vec::new();
    let mut track = Vec::new();
    for (&(r, s), res) in jobs.iter().zip(results) {
        let points = match res {
            Ok(p) => p,
            Err(e) => {
                ctx.tasks.push(TaskRecord::failed(format!("R={r:e} state={s}"), e));
                continue;
            }
        };
        for &f in &cfg.fields {
            let Some((_, _, t)) = points.iter().find(|(g, w, _)| *w && *g == f) else {
                continue;
            };
            let name = format!("R={r:e} state={s} F={f:e}");
            match t {
                Tracked::Done(p) => {
                    ctx.tasks.push(TaskRecord::ok(name));
                    lines.push(format!(
                        "{r:e},{s},{f:e},{:e},{},{}",
                        p.rate.center(),
                        num(p.rate.gamma()),
                        num(p.rate.floor())
                    ));
                }
                Tracked::Failed(e) => {
                    ctx.tasks.push(TaskRecord::failed(name, e));
                    lines.push(format!("{r:e},{s},{f:e},,,"));
                }
                Tracked::Skipped => {}
            }
        }
        track.extend(track_rows(&format!("R={r}:state{s}"), &points));
    }
    ctx.write("rsweep.csv", |w| {
        writeln!(w, "{RSWEEP_CSV_HEADER}")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    ctx.write("track.csv", |w| write_rate_csv(w, &track))?;
    Ok(ctx.status())
}

pub fn eval_potential(ctx: &mut Context) -> Result<RunStatus, String> {
    let spec = ctx.potential()?.spec().map_err(|e| e.to_string())?;
    let e = ctx.config.eval.clone();
    let xs: Vec<f64> = (0..e.n_points)
        .map(|i| {
            let (k, n) = (i as f64, (e.n_points - 1) as f64);
            (e.x_min * (n - k) + e.x_max * k) / n
        })
        .collect();
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        match (spec.eval_well(x), spec.eval_total(x)) {
            (Ok(w), Ok(t)) => rows.push(format!("{x:e},{w:e},{t:e}")),
            (Err(err), _) | (_, Err(err)) => {
                ctx.tasks.push(TaskRecord::failed(format!("x={x:e}"), err));
                rows.push(format!("{x:e},,"));
            }
        }
    }
    ctx.tasks.push(TaskRecord::ok(format!("evaluate {} points", xs.len())));
    ctx.write("potential.csv", |w| {
        writeln!(w, "x,V_well,V_total")?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    Ok(ctx.status())
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Checks run by `verify`, with the oracle tables they produce.
struct Verifier {
    controls: ResonanceControls,
    seed: u64,
    checks: Vec<CheckResult>,
    levels: Vec<String>,
    adk: Vec<String>,
    lifetime: Vec<String>,
    survival: Vec<(f64, f64)>,
    quiet: bool,
}

impl Verifier {
    fn record(&mut self, name: &str, outcome: Result<(bool, String), String>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, e));
        if !self.quiet {
            eprintln!("{:<5} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        }
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn peaks(&self, spec: &PotentialSpec, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
        let grid = ScanGrid::new(lo, hi, n).map_err(|e| e.to_string())?;
        let scan = scan_spectrum(spec, &grid, 1e-4, &self.controls).map_err(|e| e.to_string())?;
        scan.peaks
            .par_iter()
            .map(|p| {
                refine_resonance(spec, p, &self.controls)
                    .map(|r| r.rate.center())
                    .map_err(|e| e.to_string())
            })
            .collect()
    }

    fn hydrogen_samples(&self) -> Result<Vec<SpectralSample>, String> {
        let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).map_err(|e| e.to_string())?;
        (0..61)
            .into_par_iter()
            .map(|i| {
                let lam = ComplexEnergy::new(-0.7 + 0.015 * i as f64, 1e-4).map_err(|e| e.to_string())?;
                spectral_density(&spec, lam, &self.controls.spectral).map_err(|e| e.to_string())
            })
            .collect()
    }

    fn wronskian(&mut self) {
        let out = self.hydrogen_samples().map(|s| {
            let worst = s
                .iter()
                .map(|s| s.weyl.minus.wronskian_err.max(s.weyl.plus.wronskian_err))
                .fold(0.0, f64::max);
            (
                worst < 1e-8,
                format!("max |W-1| = {worst:.2e} over {} trajectories", 2 * s.len()),
            )
        });
        self.record("wronskian", out);
    }

    fn positivity(&mut self) {
        let out = self.hydrogen_samples().map(|s| {
            let bad = s
                .iter()
                .filter(|s| !(s.matrix.is_positive(1e-12) && s.weyl.m_plus().im > 0.0 && s.weyl.m_minus().im < 0.0))
                .count();
            (
                bad == 0,
                format!("{bad} of {} samples violate positivity or Herglotz signs", s.len()),
            )
        });
        self.record("positivity", out);
    }

    fn harmonic(&mut self) {
        let out = (|| {
            let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).map_err(|e| e.to_string())?;
            let got = self.peaks(&spec, 0.0, 3.0, 301)?;
            let want = [0.5, 1.5, 2.5];
            for (k, w) in want.iter().enumerate() {
                let g = got.get(k).copied();
                self.levels.push(format!("harmonic,{k},{},{w:e}", num(g)));
            }
            let worst = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
            Ok((
                got.len() == 3 && worst < 1e-6,
                format!("{} peaks, max error {worst:.2e}", got.len()),
            ))
        })();
        self.record("harmonic spectrum", out);
    }

    fn square_well(&mut self) {
        let out = (|| {
            let (depth, width) = (2.0, 4.0);
            let want = square_well_levels(depth, width);
            let spec = PotentialSpec::new(WellModel::SquareWell { depth, width }, 0.0).map_err(|e| e.to_string())?;
            let got = self.peaks(&spec, -depth + 1e-3, -5e-3, 600)?;
            for (k, w) in want.iter().enumerate() {
                self.levels
                    .push(format!("square_well,{k},{},{w:e}", num(got.get(k).copied())));
            }
            let worst = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
            Ok((
                got.len() == want.len() && worst < 1e-6,
                format!("{} of {} levels, max error {worst:.2e}", got.len(), want.len()),
            ))
        })();
        self.record("square-well spectrum", out);
    }

    fn ground_state(&mut self) {
        let out = (|| {
            let w = WellModel::hydrogen();
            let e = shoot_bound_states(&w, (-1.0, -0.3), 1).map_err(|e| e.to_string())?[0];
            let g = dense_grid_levels(
                &w,
                0.0,
                DenseGrid {
                    half_width: 40.0,
                    h: 0.02,
                },
                1,
            )
            .map_err(|e| e.to_string())?[0];
            self.levels.push(format!("soft_core_grid,0,{g:e},"));
            self.levels.push(format!("soft_core_shooting,0,{e:e},"));
            Ok((
                (e + 0.5).abs() <= 0.002 && (e - g).abs() < 1e-6,
                format!("shooting {e:.8}, grid {g:.8}"),
            ))
        })();
        self.record("soft-core ground state", out);
    }

    fn adk(&mut self) {
        let out = (|| {
            let mut worst = 0.0f64;
            for f in [0.05f64, 0.1] {
                let want = 4.0 / f * (-2.0 / (3.0 * f)).exp();
                let got = adk_rate(&AdkParams::hydrogen(f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                worst = worst.max((got - want).abs() / want);
                self.adk.push(format!("{f:e},{got:e},{want:e}"));
            }
            Ok((worst < 1e-6, format!("max relative error {worst:.2e}")))
        })();
        self.record("ADK hydrogen", out);
    }

    fn harmonic_floor(&mut self) {
        let out = (|| {
            let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).map_err(|e| e.to_string())?;
            let grid = ScanGrid::new(0.3, 0.7, 41).map_err(|e| e.to_string())?;
            let scan = scan_spectrum(&spec, &grid, 1e-4, &self.controls).map_err(|e| e.to_string())?;
            let peak = scan.peaks.first().ok_or("no peak near 0.5")?;
            let r = refine_resonance(&spec, peak, &self.controls).map_err(|e| e.to_string())?;
            Ok(match r.rate {
                Rate::BelowFloor { floor, .. } => (true, format!("reported below floor {floor:.1e}")),
                Rate::Resolved(res) => (false, format!("claims a width of {:.2e}", res.gamma)),
            })
        })();
        self.record("bound state reported as floor", out);
    }

    fn lifetime(&mut self) {
        let field = 0.06;
        let out = (|| {
            let spec = PotentialSpec::new(WellModel::hydrogen(), field).map_err(|e| e.to_string())?;
            let grid = ScanGrid::new(-0.56, -0.50, 61).map_err(|e| e.to_string())?;
            let scan = scan_spectrum(&spec, &grid, 1e-4, &self.controls).map_err(|e| e.to_string())?;
            let peak = scan
                .peaks
                .iter()
                .max_by(|a, b| a.height.total_cmp(&b.height))
                .ok_or("no resonance near the ground level")?;
            let r = refine_resonance(&spec, peak, &self.controls).map_err(|e| e.to_string())?;
            let Rate::Resolved(res) = r.rate else {
                return Err("ground resonance unresolved".into());
            };
            let change = epsilon_halving_change(&spec, &res, &self.controls).map_err(|e| e.to_string())?;
            self.checks_push_halving(change);
            let quiet = self.quiet;
            let progress = move |p: Progress| {
                if !quiet && (p.t as u64).is_multiple_of(1000) && p.t > 0.0 {
                    eprintln!(
                        "      propagating: t = {:.0} of {:.0}, norm {:.3e}",
                        p.t, p.t_max, p.norm
                    );
                }
            };
            let lt = lifetime_by_propagation(
                &spec,
                0,
                &LifetimeControls::default(),
                Monitor {
                    cancel: None,
                    progress: Some(&progress),
                },
            )
            .map_err(|e| e.to_string())?;
            let rate = lt.rate.rate().ok_or("propagation rate below its floor")?;
            let rel = (rate - res.gamma).abs() / res.gamma;
            self.lifetime.push(format!(
                "{field:e},{:e},{rate:e},{rel:e},{:e}",
                res.gamma, lt.reflection
            ));
            self.survival = lt.survival;
            Ok((
                rel < 0.15,
                format!(
                    "width {:.4e}, propagation {rate:.4e}, difference {:.1}%",
                    res.gamma,
                    100.0 * rel
                ),
            ))
        })();
        self.record("width vs propagation at F=0.06", out);
    }

    fn checks_push_halving(&mut self, change: f64) {
        self.record(
            "width stable under epsilon halving",
            Ok((change < 0.01, format!("relative change {change:.2e}"))),
        );
    }

    fn noisy_fit(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (c, fwhm) = (0.0, 0.01);
        let pts: Vec<(f64, f64)> = (0..81)
            .map(|i| {
                let e = -0.05 + 0.00125 * i as f64;
                let g = 0.5 * fwhm;
                let y = g * g / ((e - c) * (e - c) + g * g) + 0.05;
                (e, y * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
            })
            .collect();
        let out = fit_lorentzian(&pts, &FitControls::default())
            .map(|f| {
                let rel = (f.fwhm - fwhm).abs() / fwhm;
                (
                    rel < 0.05 && (f.center - c).abs() < 1e-3,
                    format!("seed {}: width off by {:.2}%", self.seed, 100.0 * rel),
                )
            })
            .map_err(|e| e.to_string());
        self.record("fit under 1% noise", out);
    }
}

pub fn verify(ctx: &mut Context) -> Result<RunStatus, String> {
    let mut v = Verifier {
        controls: ctx.config.controls.resonance(),
        seed: ctx.config.seed,
        checks: Vec::new(),
        levels: Vec::new(),
        adk: Vec::new(),
        lifetime: Vec::new(),
        survival: Vec::new(),
        quiet: ctx.quiet,
    };
    v.wronskian();
    v.positivity();
    v.harmonic();
    v.square_well();
    v.ground_state();
    v.adk();
    v.harmonic_floor();
    v.lifetime();
    v.noisy_fit();
    let Verifier {
        checks,
        levels,
        adk,
        lifetime,
        survival,
        ..
    } = v;

    let failed = checks.iter().filter(|c| !c.passed).count();
    if !ctx.quiet {
        println!("{:<40} result", "check");
        for c in &checks {
            println!("{:<40} {}", c.name, if c.passed { "pass" } else { "FAIL" });
        }
        println!("{} of {} checks passed", checks.len() - failed, checks.len());
    }
    for c in &checks {
        ctx.tasks.push(if c.passed {
            TaskRecord::ok(&c.name)
        } else {
            TaskRecord::failed(&c.name, &c.detail)
        });
    }
    let table = |header: &'static str, rows: Vec<String>| {
        move |w: &mut Vec<u8>| -> io::Result<()> {
            writeln!(w, "{header}")?;
            for r in rows {
                writeln!(w, "{r}")?;
            }
            Ok(())
        }
    };
    ctx.write("oracle_levels.csv", table("system,index,computed,reference", levels))?;
    ctx.write("oracle_adk.csv", table("F,gamma_adk,closed_form", adk))?;
    ctx.write(
        "oracle_lifetime.csv",
        table(
            "F,gamma_width,gamma_propagation,relative_difference,reflection",
            lifetime,
        ),
    )?;
    if !survival.is_empty() {
        ctx.write("survival.csv", |w| write_survival_csv(w, &survival))?;
    }
    let report = serde_json::json!({
        "passed": failed == 0,
        "checks": checks,
    });
    ctx.write("verify_report.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(io::Error::other)?;
        writeln!(w)
    })?;
    Ok(if failed == 0 { RunStatus::Ok } else { RunStatus::Failed })
}
