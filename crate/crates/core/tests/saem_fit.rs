use mixsaem::baselines::fit_dataset;
use mixsaem::missingness::{inject, Mechanism};
use mixsaem::rng;
use mixsaem::saem::{fit_saem, SaemConfig};
use mixsaem::simulate::{synthetic_spec, SyntheticDesign, TRUE_BETA};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[test]
fn intercept_bias_under_mar_is_small() {
    let design = SyntheticDesign::default();
    let runs = 20;
    let mut total = 0.0;
    for run in 0..runs {
        let seed = rng::derive_seed(31, &[run]);
        let ds = inject(&design.simulate(seed).unwrap(), &synthetic_spec(Mechanism::Mar, 0.3, seed)).unwrap();
        let fit = fit_saem(&ds, &SaemConfig { seed, ..SaemConfig::default() }).unwrap();
        total += fit.params.beta[0] - TRUE_BETA[0];
    }
    let bias = total / runs as f64;
    assert!(bias.abs() <= 0.15, "mean intercept bias {bias}");
}

#[test]
fn observed_loglik_trends_upward() {
    let ds = inject(
        &SyntheticDesign::default().simulate(12).unwrap(),
        &synthetic_spec(Mechanism::Mcar, 0.3, 13),
    )
    .unwrap();
    let cfg = SaemConfig {
        iterations: 150,
        loglik_samples: 40,
        seed: 14,
        ..SaemConfig::default()
    };
    let fit = fit_saem(&ds, &cfg).unwrap();
    let ll: Vec<f64> = fit.trajectory.iter().map(|p| p.loglik).collect();
    assert!(ll.iter().all(|v| v.is_finite()));
    let early = median(ll[..10].to_vec());
    let late = median(ll[ll.len() - 50..].to_vec());
    assert!(late >= early, "late {late} < early {early}");
}

#[test]
fn fits_are_bit_identical_for_a_seed() {
    let ds = inject(
        &SyntheticDesign { n: 300, ..SyntheticDesign::default() }.simulate(5).unwrap(),
        &synthetic_spec(Mechanism::Mcar, 0.4, 6),
    )
    .unwrap();
    let cfg = SaemConfig { iterations: 40, seed: 7, ..SaemConfig::default() };
    let a = fit_saem(&ds, &cfg).unwrap();
    let b = fit_saem(&ds, &cfg).unwrap();
    let bits = |f: &mixsaem::saem::FitResult| -> Vec<u64> {
        f.trajectory
            .iter()
            .flat_map(|p| p.beta.iter().chain([&p.loglik, &p.acceptance_rate]).map(|v| v.to_bits()))
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.params, b.params);
    let other = fit_saem(&ds, &SaemConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.params.beta, other.params.beta);
}

#[test]
fn full_data_logistic_recovers_generating_beta() {
    let design = SyntheticDesign::default();
    let truth = design.truth().unwrap();
    let runs = 20;
    let mut bias = vec![0.0; 8];
    for run in 0..runs {
        let ds = design.simulate(rng::derive_seed(41, &[run])).unwrap();
        let beta = fit_dataset(&ds, &truth.design, 0.0).unwrap();
        for (b, (est, t)) in bias.iter_mut().zip(beta.iter().zip(TRUE_BETA)) {
            *b += (est - t) / runs as f64;
        }
    }
    assert!(bias.iter().all(|b| b.abs() < 0.1), "{bias:?}");
}
