use std::f64::consts::PI;

use super::*;
use crate::autodiff::OptimizerConfig;
use crate::numerics::gauss_legendre;
use proptest::prelude::*;

fn rule() -> QuadratureRule {
    gauss_legendre(DEFAULT_NODES).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn massless_limits_match_stefan_boltzmann() {
    let r = rule();
    let t = 0.3;
    let p_b = t * lnz_boson(0.0, t, 16.0, &r).unwrap();
    assert!(rel(p_b, 16.0 * PI * PI * t.powi(4) / 90.0) < 1e-5);
    assert!(rel(p_b, 0.014212230337568675) < 1e-5);
    let p_f = t * lnz_fermion(0.0, t, 24.0, &r).unwrap();
    assert!(rel(p_f, 0.018653552318058885) < 1e-5);
    let ratio = lnz_fermion(0.0, t, 16.0, &r).unwrap() / lnz_boson(0.0, t, 16.0, &r).unwrap();
    assert!((ratio - 0.875).abs() < 1e-8, "{ratio}");
}

#[test]
fn massive_lnz_matches_bessel_series() {
    // K2 series and adaptive quadrature agree on these to 1e-12.
    let r = rule();
    assert!(rel(lnz_boson(0.6, 0.3, 16.0, &r).unwrap(), 0.02261290059076434) < 1e-8);
    assert!(rel(lnz_fermion(0.3, 0.3, 24.0, &r).unwrap(), 0.05145208884938109) < 1e-8);
    assert!(rel(lnz_fermion(0.4, 0.2, 12.0, &r).unwrap(), 0.00485537480647272) < 1e-8);
}

#[test]
fn heavy_particles_are_suppressed() {
    let r = rule();
    for t in [0.1, 0.3, 1.0] {
        let b = lnz_boson(50.0 * t, t, 1.0, &r).unwrap();
        let f = lnz_fermion(50.0 * t, t, 1.0, &r).unwrap();
        assert!(b.abs() < 1e-20 * t.powi(3), "{b}");
        assert!(f.abs() < 1e-20 * t.powi(3), "{f}");
    }
}

#[test]
fn lnz_decreases_with_mass() {
    let r = rule();
    for stat in [Statistics::Boson, Statistics::Fermion] {
        let vals: Vec<f64> = (0..40)
            .map(|k| lnz(stat, 0.05 * k as f64, 0.3, 16.0, &r).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn mass_derivative_matches_finite_difference() {
    let r = rule();
    for stat in [Statistics::Boson, Statistics::Fermion] {
        for (m, t) in [(0.3, 0.2), (0.6, 0.3), (0.1, 0.5)] {
            let h = 1e-5;
            let fd = (lnz(stat, m + h, t, 16.0, &r).unwrap() - lnz(stat, m - h, t, 16.0, &r).unwrap())
                / (2.0 * h);
            let an = lnz_mass_derivative(stat, m, t, 16.0, &r).unwrap();
            assert!(rel(an, fd) < 1e-6, "{an} vs {fd}");
        }
    }
}

#[test]
fn quadrature_converges_on_massless_checks() {
    let r50 = gauss_legendre(50).unwrap();
    let r100 = gauss_legendre(100).unwrap();
    for t in [0.1, 0.3, 0.5] {
        for stat in [Statistics::Boson, Statistics::Fermion] {
            let a = lnz(stat, 0.0, t, 16.0, &r50).unwrap();
            let b = lnz(stat, 0.0, t, 16.0, &r100).unwrap();
            assert!(rel(a, b) < 1e-8);
        }
    }
}

#[test]
fn lnz_rejects_bad_arguments() {
    let r = rule();
    assert!(lnz_boson(0.1, 0.0, 16.0, &r).is_err());
    assert!(lnz_boson(-0.1, 0.3, 16.0, &r).is_err());
    assert!(lnz_fermion(f64::NAN, 0.3, 16.0, &r).is_err());
}

#[test]
fn massless_eos_point() {
    let pt = eos_point(0.3, &MassModels::massless(), &rule(), None).unwrap();
    assert!(rel(pt.pressure(), 0.04219255881465701) < 1e-4);
    assert!(rel(pt.energy_density(), 3.0 * pt.pressure()) < 1e-4);
    assert!(rel(pt.entropy_density(), 4.0 * pt.pressure() / 0.3) < 1e-4);
}

#[test]
fn constant_mass_energy_matches_analytic_integrand() {
    let r = rule();
    let models = MassModels::constant(0.6, 0.3, 0.4);
    for t in [0.1, 0.2, 0.3, 0.5] {
        let pt = eos_point(t, &models, &r, None).unwrap();
        let analytic: f64 = [(Species::Gluon, 0.6), (Species::Light, 0.3), (Species::Strange, 0.4)]
            .iter()
            .map(|&(s, m)| energy_density_fixed_mass(s.statistics(), m, t, s.dof(), &r).unwrap())
            .sum();
        assert!(rel(pt.energy_density(), analytic) < 1e-4);
    }
}

#[test]
fn constant_mass_entropy_is_pressure_slope() {
    let r = rule();
    let models = MassModels::constant(0.6, 0.3, 0.4);
    for t in [0.15, 0.3, 0.45] {
        let pt = eos_point(t, &models, &r, None).unwrap();
        let h = t / 400.0;
        let p = |t: f64| eos_point(t, &models, &r, None).unwrap().pressure();
        let dp = (p(t + h) - p(t - h)) / (2.0 * h);
        assert!(rel(pt.entropy_density(), dp) < 1e-3);
    }
}

#[test]
fn thermo_point_enforces_identity() {
    assert!(ThermoPoint::new(0.3, 1.0, 2.0, 10.0).is_ok());
    assert!(ThermoPoint::new(0.3, 1.0, 2.0, 10.0 * (1.0 + 1e-8)).is_err());
    assert!(ThermoPoint::new(0.0, 1.0, 2.0, 10.0).is_err());
    assert!(eos_point(0.3, &MassModels::massless(), &rule(), Some(0.3)).is_err());
}

#[test]
fn table_models_interpolate_and_reject_out_of_range() {
    let m = MassModel::Table {
        temps: vec![0.1, 0.3, 0.5],
        masses: vec![1.0, 0.5, 0.7],
    };
    assert!((m.mass(0.2).unwrap() - 0.75).abs() < 1e-15);
    assert_eq!(m.mass(0.5).unwrap(), 0.7);
    assert_eq!(m.mass(0.1).unwrap(), 1.0);
    assert!(m.mass(0.6).is_err());
    let models = MassModels {
        gluon: m,
        ..MassModels::massless()
    };
    assert!(matches!(eos_point(0.5, &models, &rule(), None), Err(Error::InvalidArgument(_))));
    let bad = MassModel::Table {
        temps: vec![0.3, 0.1],
        masses: vec![1.0, 1.0],
    };
    assert!(bad.mass(0.2).is_err());
}

#[test]
fn eos_csv_round_trip() {
    let temps = temperature_grid(0.1, 0.5, 9).unwrap();
    let pts = synthetic_target(&MassModels::constant(0.6, 0.3, 0.4), &temps, &rule()).unwrap();
    let mut buf = Vec::new();
    write_eos_csv(&pts, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("T_GeV,P_over_T4,eps_over_T4,s_over_T3\n"));
    let back = read_eos_csv(&buf[..]).unwrap();
    for (a, b) in pts.iter().zip(&back) {
        assert_eq!(a.t(), b.t());
        assert!(rel(b.p_over_t4(), a.p_over_t4()) < 1e-14);
    }
    let bad = "T_GeV,P_over_T4,eps_over_T4,s_over_T3\n0.3,1.0,3.0,5.0\n";
    assert!(read_eos_csv(bad.as_bytes()).is_err());
    let no_s = "T_GeV,P_over_T4,eps_over_T4\n0.3,1.0,3.0\n";
    assert_eq!(read_eos_csv(no_s.as_bytes()).unwrap()[0].s_over_t3(), 4.0);
    assert!(matches!(read_eos_csv("T_GeV,P_over_T4\nx,1\n".as_bytes()), Err(Error::Format { .. })));
}

proptest! {
    #[test]
    fn eos_is_positive_and_consistent(
        t in 0.05..0.6f64,
        mg in 0.0..1.5f64,
        mq in 0.0..1.0f64,
        ms in 0.0..1.0f64,
    ) {
        let pt = eos_point(t, &MassModels::constant(mg, mq, ms), &rule(), None).unwrap();
        prop_assert!(pt.pressure() > 0.0);
        prop_assert!(pt.energy_density() > 0.0);
        let s = (pt.energy_density() + pt.pressure()) / t;
        prop_assert!((pt.entropy_density() - s).abs() <= 1e-10 * s);
    }
}

fn target() -> Vec<ThermoPoint> {
    let temps = temperature_grid(0.1, 0.5, 17).unwrap();
    synthetic_target(&MassModels::constant(0.6, 0.3, 0.4), &temps, &rule()).unwrap()
}

#[test]
fn zero_epochs_reproduce_the_initialization() {
    let cfg = FitConfig {
        epochs: 0,
        ..FitConfig::default()
    };
    let a = fit_mass_models(&target(), InputMode::Raw, &cfg).unwrap();
    assert!(a.loss_trace.is_empty());
    let one = FitConfig { epochs: 1, ..cfg.clone() };
    let b = fit_mass_models(&target(), InputMode::Raw, &one).unwrap();
    // The first recorded loss is the untrained one.
    let untrained: f64 = a
        .rows
        .iter()
        .map(|r| 0.5 * (r.abs_error_p.powi(2) + r.abs_error_eps.powi(2)))
        .sum::<f64>()
        / a.rows.len() as f64;
    assert!(rel(b.loss_trace[0], untrained) < 1e-12);
}

#[test]
fn fit_reaches_target_in_both_modes() {
    let report = fit_report(&target(), &FitConfig::default()).unwrap();
    for r in [&report.raw, &report.expanded] {
        assert!(r.mae_p_over_t4 < 1e-2, "{} {}", r.mode.name(), r.mae_p_over_t4);
        assert_eq!(r.rows.len(), 17);
        assert!(r.loss_trace.last().unwrap() < &r.loss_trace[0]);
    }
    let again = fit_mass_models(&target(), InputMode::Raw, &FitConfig::default()).unwrap();
    assert_eq!(again, report.raw);
}

#[test]
fn fit_rejects_short_or_unsorted_targets() {
    let t = target();
    assert!(fit_mass_models(&t[..4], InputMode::Raw, &FitConfig::default()).is_err());
    let mut rev = t.clone();
    rev.reverse();
    assert!(fit_mass_models(&rev, InputMode::Raw, &FitConfig::default()).is_err());
}

#[test]
fn fit_divergence_is_reported() {
    let cfg = FitConfig {
        optimizer: OptimizerConfig::sgd(f64::MAX, 0.0),
        epochs: 50,
        ..FitConfig::default()
    };
    let err = fit_mass_models(&target(), InputMode::Raw, &cfg).unwrap_err();
    assert!(matches!(err, Error::TrainingDiverged { .. }), "{err}");
}
