mod common;

use phrec_core::fit::{
    bootstrap, fit, fit_restricted, heart_bounds, nelder_mead, BootstrapConfig, FitConfig,
    FitError, NmOptions,
};
use phrec_core::heart::{
    load_patients, log_likelihood, HeartParams, LikelihoodOptions, PatientRecord,
};

fn subset(n: usize) -> Vec<PatientRecord> {
    let patients = load_patients(&common::stanford_csv()).unwrap();
    patients.into_iter().take(n).collect()
}

#[test]
fn nelder_mead_minimizes_quadratics() {
    let opts = NmOptions::default();
    let res = nelder_mead(
        |x| (x[0] - 3.0).powi(2) + 5.0 * (x[1] + 1.0).powi(2),
        &[0.0, 0.0],
        &opts,
    );
    assert!(res.converged);
    assert!((res.x[0] - 3.0).abs() < 1e-5);
    assert!((res.x[1] + 1.0).abs() < 1e-5);
    assert!(res.value < 1e-9);

    // Rosenbrock from a poor start still lands on the optimum.
    let res = nelder_mead(
        |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
        &[-1.2, 1.0],
        &NmOptions {
            max_evals: 4000,
            ..NmOptions::default()
        },
    );
    assert!((res.x[0] - 1.0).abs() < 1e-4);
    assert!((res.x[1] - 1.0).abs() < 1e-4);
}

#[test]
fn nelder_mead_survives_non_finite_objectives() {
    let res = nelder_mead(
        |x| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                (x[0] - 2.0).powi(2)
            }
        },
        &[1.0],
        &NmOptions::default(),
    );
    assert!((res.x[0] - 2.0).abs() < 1e-5);
}

#[test]
fn one_parameter_profile_matches_golden_section() {
    let patients = subset(30);
    let opts = LikelihoodOptions::default();
    let reference = HeartParams::reference().to_array();

    // Profile over lambda1 with everything else pinned at the reference
    // point, on a log grid bracket.
    let profile = |log_l1: f64| -> f64 {
        let mut theta = reference;
        theta[5] = log_l1.exp();
        log_likelihood(&HeartParams::from_array(theta), &patients, &opts).unwrap()
    };
    let (mut lo, mut hi) = ((1e-4_f64).ln(), (0.1_f64).ln());
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut fc, mut fd) = (profile(c), profile(d));
    for _ in 0..60 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = profile(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = profile(d);
        }
    }
    let golden_loglik = fc.max(fd);

    let frozen: Vec<(usize, f64)> = (0..9).filter(|&i| i != 5).map(|i| (i, reference[i])).collect();
    let config = FitConfig {
        starts: 3,
        ..FitConfig::new(opts)
    };
    let fitted = fit_restricted(&patients, &config, &frozen).unwrap();
    assert!(fitted.converged);
    assert!(
        (fitted.loglik - golden_loglik).abs() < 1e-5,
        "nm {} vs golden {}",
        fitted.loglik,
        golden_loglik
    );
}

#[test]
fn fit_respects_bounds_and_pins() {
    let patients = subset(20);
    let config = FitConfig {
        starts: 2,
        nm: NmOptions {
            max_evals: 300,
            ..NmOptions::default()
        },
        polish_rounds: 0,
        ..FitConfig::new(LikelihoodOptions::default())
    };
    let frozen = [(6usize, 0.0), (7usize, 0.0), (8usize, 0.0)];
    let res = fit_restricted(&patients, &config, &frozen).unwrap();
    let theta = res.params.to_array();
    let bounds = heart_bounds();
    for (i, b) in bounds.iter().enumerate() {
        assert!(theta[i] >= b.lo && theta[i] <= b.hi, "param {i} out of box");
    }
    assert_eq!(theta[6], 0.0);
    assert_eq!(theta[7], 0.0);
    assert_eq!(theta[8], 0.0);
}

#[test]
fn fit_is_deterministic() {
    let patients = subset(15);
    let config = FitConfig {
        starts: 2,
        nm: NmOptions {
            max_evals: 250,
            ..NmOptions::default()
        },
        polish_rounds: 1,
        ..FitConfig::new(LikelihoodOptions::default())
    };
    let one = fit(&patients, &config).unwrap();
    let two = fit(&patients, &config).unwrap();
    assert_eq!(one.loglik.to_bits(), two.loglik.to_bits());
    assert_eq!(
        one.params.to_array().map(f64::to_bits),
        two.params.to_array().map(f64::to_bits)
    );
}

#[test]
fn fit_rejects_degenerate_configs() {
    let patients = subset(5);
    let mut config = FitConfig::new(LikelihoodOptions::default());
    config.frozen = (0..9).map(|i| (i, 0.5)).collect();
    assert!(matches!(
        fit(&patients, &config),
        Err(FitError::NothingFree)
    ));
    let mut config = FitConfig::new(LikelihoodOptions::default());
    config.frozen = vec![(12, 0.0)];
    assert!(matches!(fit(&patients, &config), Err(FitError::BadConfig(_))));
    let config = FitConfig {
        starts: 0,
        ..FitConfig::new(LikelihoodOptions::default())
    };
    assert!(matches!(fit(&patients, &config), Err(FitError::BadConfig(_))));
    assert!(fit(&[], &FitConfig::new(LikelihoodOptions::default())).is_err());
}

#[test]
fn warm_start_alone_suffices() {
    let patients = subset(12);
    let config = FitConfig {
        starts: 0,
        warm: Some(HeartParams::reference()),
        nm: NmOptions {
            max_evals: 400,
            ..NmOptions::default()
        },
        polish_rounds: 0,
        ..FitConfig::new(LikelihoodOptions::default())
    };
    let res = fit(&patients, &config).unwrap();
    let warm_ll =
        log_likelihood(&HeartParams::reference(), &patients, &config.likelihood).unwrap();
    assert!(res.loglik >= warm_ll - 1e-9);
}

#[test]
fn bootstrap_is_seed_reproducible() {
    let patients = subset(20);
    let center = HeartParams::reference();
    let config = BootstrapConfig {
        replicates: 4,
        extra_starts: 0,
        nm: NmOptions {
            max_evals: 3000,
            ftol: 1e-6,
            xtol: 1e-4,
            ..NmOptions::default()
        },
        max_failure_rate: 0.5,
        ..BootstrapConfig::new(LikelihoodOptions::default())
    };
    let one = bootstrap(&patients, &center, &config).unwrap();
    let two = bootstrap(&patients, &center, &config).unwrap();
    assert_eq!(one.estimates.len(), two.estimates.len());
    for (a, b) in one.estimates.iter().zip(&two.estimates) {
        assert_eq!(
            a.to_array().map(f64::to_bits),
            b.to_array().map(f64::to_bits)
        );
    }
    for i in 0..9 {
        assert!(one.std[i].is_finite() && one.std[i] >= 0.0);
        assert!(one.ci95[i].0 <= one.ci95[i].1);
    }
}

#[test]
fn bootstrap_reports_mass_failure() {
    let patients = subset(10);
    let center = HeartParams::reference();
    let config = BootstrapConfig {
        replicates: 3,
        extra_starts: 0,
        nm: NmOptions {
            max_evals: 1,
            ..NmOptions::default()
        },
        ..BootstrapConfig::new(LikelihoodOptions::default())
    };
    assert!(matches!(
        bootstrap(&patients, &center, &config),
        Err(FitError::TooManyFailures { .. })
    ));
}
