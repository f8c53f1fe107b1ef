use wtk_core::potential::{CustomWell, PotentialSpec, TailKind, WellModel};
use wtk_core::resonance::{
    epsilon_halving_change, fit_window, refine_resonance, scan_spectrum, track_state, Rate, ResonanceControls,
    ScanGrid, TrackControls,
};

fn hydrogen(f: f64) -> PotentialSpec {
    PotentialSpec::new(WellModel::hydrogen(), f).unwrap()
}

fn ground(f: f64, controls: &ResonanceControls) -> Rate {
    let grid = ScanGrid::new(-0.62, -0.45, 61).unwrap();
    let scan = scan_spectrum(&hydrogen(f), &grid, 1e-3, controls).unwrap();
    let seed = scan.peaks.iter().max_by(|a, b| a.height.total_cmp(&b.height)).unwrap();
    refine_resonance(&hydrogen(f), seed, controls).unwrap().rate
}

#[test]
fn harmonic_scan_has_three_peaks() {
    let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).unwrap();
    let controls = ResonanceControls::default();
    let grid = ScanGrid::new(0.0, 3.0, 301).unwrap();
    let scan = scan_spectrum(&spec, &grid, 1e-4, &controls).unwrap();
    assert!(scan.gaps.is_empty());
    let centers: Vec<f64> = scan.peaks.iter().map(|p| p.energy).collect();
    assert_eq!(centers.len(), 3, "{centers:?}");
    for (c, want) in centers.iter().zip([0.5, 1.5, 2.5]) {
        assert!((c - want).abs() < 1e-4, "{c}");
    }
    for p in &scan.peaks {
        let (lo, hi) = (p.energy - 3.0 * p.half_width, p.energy + 3.0 * p.half_width);
        let inside = scan.samples.iter().filter(|s| s.energy >= lo && s.energy <= hi).count();
        assert!(inside >= 20, "{inside} samples near {}", p.energy);
    }
}

#[test]
fn linear_potential_has_no_peaks() {
    let flat = CustomWell::new("0", Default::default(), TailKind::Decaying).unwrap();
    let spec = PotentialSpec::new(WellModel::Custom(flat), 0.05).unwrap();
    let grid = ScanGrid::new(-0.7, 0.0, 71).unwrap();
    let scan = scan_spectrum(&spec, &grid, 1e-3, &ResonanceControls::default()).unwrap();
    assert!(scan.gaps.is_empty());
    assert!(scan.peaks.is_empty(), "{:?}", scan.peaks);
}

#[test]
fn bound_state_reports_floor() {
    let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).unwrap();
    let controls = ResonanceControls::default();
    let grid = ScanGrid::new(0.3, 0.7, 41).unwrap();
    let scan = scan_spectrum(&spec, &grid, 1e-4, &controls).unwrap();
    let r = refine_resonance(&spec, &scan.peaks[0], &controls).unwrap();
    match r.rate {
        Rate::BelowFloor {
            center, floor, epsilon, ..
        } => {
            assert!((center - 0.5).abs() < 1e-6);
            assert!(epsilon <= 10.0 * controls.eps_min);
            assert_eq!(floor, controls.ratio_min * epsilon);
        }
        other => panic!("bound state gave a rate: {other:?}"),
    }
    // the width followed ε down the whole way
    for s in &r.history {
        assert!(s.gamma.abs() < 0.05 * s.epsilon, "{s:?}");
    }
}

#[test]
fn rate_grows_steeply_with_field() {
    let controls = ResonanceControls::default();
    let g3 = ground(0.03, &controls).gamma().unwrap();
    let g6 = ground(0.06, &controls).gamma().unwrap();
    assert!(g6 / g3 > 100.0, "{g6:e} / {g3:e}");
}

#[test]
fn accepted_width_survives_epsilon_halving() {
    let controls = ResonanceControls::default();
    let spec = hydrogen(0.06);
    let Rate::Resolved(r) = ground(0.06, &controls) else {
        panic!("unresolved");
    };
    assert!(r.gamma >= controls.ratio_min * r.epsilon_used);
    assert!(r.fit_rms < controls.max_rms);
    let change = epsilon_halving_change(&spec, &r, &controls).unwrap();
    assert!(change < 0.01, "{change}");
}

#[test]
fn center_is_insensitive_to_scan_density() {
    let controls = ResonanceControls::default();
    let spec = hydrogen(0.05);
    let centers: Vec<(f64, f64)> = [41, 82]
        .iter()
        .map(|&n| {
            let grid = ScanGrid::new(-0.62, -0.45, n).unwrap();
            let scan = scan_spectrum(&spec, &grid, 1e-3, &controls).unwrap();
            let seed = scan.peaks.iter().max_by(|a, b| a.height.total_cmp(&b.height)).unwrap();
            let rate = refine_resonance(&spec, seed, &controls).unwrap().rate;
            (rate.center(), rate.gamma().unwrap())
        })
        .collect();
    let (a, b) = (centers[0], centers[1]);
    assert!((a.0 - b.0).abs() < a.1 / 100.0, "{a:?} {b:?}");
}

#[test]
fn fitted_area_matches_the_samples() {
    let controls = ResonanceControls::default();
    let spec = hydrogen(0.06);
    let rate = ground(0.06, &controls);
    let r = match rate {
        Rate::Resolved(r) => r,
        other => panic!("{other:?}"),
    };
    let (fit, pts) = fit_window(
        &spec,
        r.center,
        r.gamma + 2.0 * r.epsilon_used,
        r.epsilon_used,
        &controls,
    )
    .unwrap();
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    let base = |e: f64| fit.background + fit.slope * (e - fit.center);
    let trap: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 - base(w[0].0) + w[1].1 - base(w[1].0)))
        .sum();
    let area = fit.peak_area(lo, hi);
    assert!((area - trap).abs() < 0.05 * trap, "{area} vs {trap}");
}

#[test]
fn ground_state_rate_is_monotone_in_field() {
    let family: Vec<(f64, PotentialSpec)> = (0..=16)
        .map(|k| {
            let f = 0.005 * k as f64;
            (f, hydrogen(f))
        })
        .collect();
    let track = track_state(&family, -0.5, &TrackControls::default()).unwrap();
    assert_eq!(track.len(), family.len());
    assert!(matches!(track[0].rate, Rate::BelowFloor { .. }));
    let mut last = 0.0;
    let mut resolved = false;
    for p in &track {
        match p.rate {
            Rate::Resolved(r) => {
                assert!(
                    r.gamma > last,
                    "Γ fell at F = {}: {:e} after {last:e}",
                    p.parameter,
                    r.gamma
                );
                last = r.gamma;
                resolved = true;
            }
            Rate::BelowFloor { .. } => assert!(!resolved, "floor after a resolved rate at F = {}", p.parameter),
        }
    }
    assert!(matches!(track.last().unwrap().rate, Rate::Resolved(_)));
}
