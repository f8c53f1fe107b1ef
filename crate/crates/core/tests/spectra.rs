use proptest::prelude::*;
use wtk_core::potential::{PotentialSpec, WellModel};
use wtk_core::propagate::ComplexEnergy;
use wtk_core::resonance::{refine_resonance, scan_spectrum, ResonanceControls, ScanGrid};
use wtk_core::spectral::{compute_weyl_pair, spectral_density, SpectralControls};

fn peak_centers(spec: &PotentialSpec, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let controls = ResonanceControls::default();
    let scan = scan_spectrum(spec, &ScanGrid::new(lo, hi, n).unwrap(), 1e-4, &controls).unwrap();
    scan.peaks
        .iter()
        .map(|p| refine_resonance(spec, p, &controls).unwrap().rate.center())
        .collect()
}

/// Even levels solve `k tan(k w/2) = κ`, odd ones `-k cot(k w/2) = κ`,
/// with `k = √(2(E+V₀))` and `κ = √(-2E)`.
fn square_well_levels(depth: f64, width: f64) -> Vec<f64> {
    let g = |e: f64, odd: bool| {
        let k = (2.0 * (e + depth)).sqrt();
        let kappa = (-2.0 * e).sqrt();
        let (s, c) = (0.5 * k * width).sin_cos();
        if odd {
            -k * c - kappa * s
        } else {
            k * s - kappa * c
        }
    };
    let mut out = Vec::new();
    let n = 200_000;
    for odd in [false, true] {
        let mut prev = (-depth + 1e-12, g(-depth + 1e-12, odd));
        for i in 1..n {
            let e = -depth + depth * i as f64 / n as f64;
            let v = g(e, odd);
            if v.signum() != prev.1.signum() {
                let (mut a, mut b) = (prev.0, e);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if g(m, odd).signum() == g(a, odd).signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
            prev = (e, v);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn harmonic_peaks_sit_on_the_ladder() {
    let spec = PotentialSpec::new(WellModel::Harmonic { omega: 1.0 }, 0.0).unwrap();
    let c = peak_centers(&spec, 0.0, 3.0, 301);
    assert_eq!(c.len(), 3, "{c:?}");
    for (k, e) in c.iter().enumerate() {
        assert!((e - (k as f64 + 0.5)).abs() < 1e-6, "{e}");
    }
}

#[test]
fn square_well_peaks_match_the_transcendental_roots() {
    let (depth, width) = (2.0, 4.0);
    let want = square_well_levels(depth, width);
    assert_eq!(want.len(), 3, "{want:?}");
    let spec = PotentialSpec::new(WellModel::SquareWell { depth, width }, 0.0).unwrap();
    let got = peak_centers(&spec, -1.999, -0.005, 600);
    assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-6, "{g} vs {w}");
    }
}

#[test]
fn wronskian_holds_on_every_trajectory() {
    let spec = PotentialSpec::new(WellModel::hydrogen(), 0.05).unwrap();
    let controls = SpectralControls::default();
    for i in 0..30 {
        let e = -0.7 + 0.025 * i as f64;
        let lam = ComplexEnergy::new(e, 1e-4).unwrap();
        let pair = compute_weyl_pair(&spec, lam, &controls).unwrap();
        assert!(pair.minus.wronskian_err < 1e-8 && pair.plus.wronskian_err < 1e-8, "{e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectral_matrix_is_positive(e in -0.9f64..0.5, f in 0.0f64..0.08, log_eps in -8.0f64..-2.0) {
        let spec = PotentialSpec::new(WellModel::hydrogen(), f).unwrap();
        let lam = ComplexEnergy::new(e, 10f64.powf(log_eps)).unwrap();
        let s = spectral_density(&spec, lam, &SpectralControls::default()).unwrap();
        prop_assert!(s.weyl.m_plus().im > 0.0);
        prop_assert!(s.weyl.m_minus().im < 0.0);
        prop_assert!(s.matrix.lambda1 > 0.0);
        prop_assert!(s.matrix.lambda2 >= -1e-12 * s.matrix.lambda1);
    }
}
