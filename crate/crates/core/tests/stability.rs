mod common;

use phnet::analysis::{self, TraceSelector, Verdict};
use phnet::discretize::{assemble_generator, DiscreteGenerator};
use phnet::linalg;
use phnet::network::Network;
use phnet::scenarios;
use serde_json::json;

fn generator(name: &str, n: usize) -> DiscreteGenerator {
    let net = scenarios::build(name, &json!(null)).unwrap();
    assemble_generator(&net, &vec![n; net.subsystems.len()]).unwrap()
}

/// `(v(0), s(0))` of a string subsystem.
fn left_values(j: usize) -> TraceSelector {
    TraceSelector { entries: vec![(j, 2), (j, 3)] }
}

#[test]
fn damped_wave_resolvent_is_flat() {
    let r = analysis::spectrum(&generator("damped_wave", 48));
    let (v, scan) = analysis::stability_verdict(&r);
    assert!(scan.growth_trend <= 1.1, "trend {}", scan.growth_trend);
    assert!(scan.sup_norm.is_finite());
    assert!(scan.diverged.iter().all(|d| !d));
    assert_eq!(v, Verdict::ExponentiallyStable);
}

#[test]
fn resolvent_norm_bounds_inverse_distance() {
    let r = analysis::spectrum(&generator("damped_wave", 48));
    let scan = analysis::resolvent_scan(&r, 30.0, 200);
    for (&b, &norm) in scan.betas.iter().zip(&scan.norms) {
        let (dist, _) = r.nearest(linalg::c64(0.0, b));
        assert!(norm >= 1.0 / dist - 1e-8, "beta {b}: {norm} < 1/{dist}");
    }
}

#[test]
fn conservative_resolvent_diverges_at_eigenfrequencies() {
    let r = analysis::spectrum(&generator("free_wave", 48));
    let scan = analysis::resolvent_scan(&r, 10.0, 100);
    for k in 0..=3 {
        let w = std::f64::consts::PI * k as f64;
        let hit = scan.betas.iter().zip(&scan.diverged).any(|(&b, &d)| d && (b - w).abs() < 1e-6);
        assert!(hit, "no divergence flagged at {w}");
    }
    // diverged samples are left out of the sup; the closest refinement
    // level sits h/1000 off each frequency
    let h = 10.0 / 99.0;
    assert!(scan.sup_norm >= 0.9 / (1e-3 * h), "sup {}", scan.sup_norm);
    assert_eq!(analysis::stability_verdict(&r).0, Verdict::ImaginarySpectrum);
}

#[test]
fn tip_mass_string_is_not_uniformly_stable() {
    let r = analysis::spectrum(&generator("tip_mass_string", 48));
    assert!(r.abscissa < 0.0);
    let (v, scan) = analysis::stability_verdict(&r);
    assert!(scan.growth_trend > 2.0, "trend {}", scan.growth_trend);
    assert_eq!(v, Verdict::AsymptoticallyStableOnly);
    assert!(v.label().contains("exponential stability NOT indicated"));
}

#[test]
fn chain_is_exponentially_stable() {
    let r = analysis::spectrum(&generator("chain", 32));
    assert_eq!(analysis::stability_verdict(&r).0, Verdict::ExponentiallyStable);
}

#[test]
fn asp_damped_wave_has_no_imaginary_modes() {
    let g = generator("damped_wave", 48);
    let r = analysis::spectrum(&g);
    assert!(analysis::asp_diagnostic(&g, &r, &left_values(0)).is_empty());
}

#[test]
fn asp_free_wave_modes_are_observed() {
    let g = generator("free_wave", 48);
    let r = analysis::spectrum(&g);
    let entries = analysis::asp_diagnostic(&g, &r, &left_values(0));
    let zero = entries.iter().find(|e| e.lambda.norm() < 1e-8).expect("zero mode listed");
    assert!(zero.residual > 1e-3);
    assert!(entries.iter().all(|e| !e.violation));
}

#[test]
fn asp_blind_observer_reports_violation() {
    let damped = scenarios::build("damped_wave", &json!(null)).unwrap();
    let free = scenarios::build("free_wave", &json!(null)).unwrap();
    let k = linalg::block_diag(&[damped.k_mat.clone(), free.k_mat.clone()]);
    let net = Network::new(vec![damped.subsystems[0].clone(), free.subsystems[0].clone()], k);
    let g = assemble_generator(&net, &[48, 48]).unwrap();
    let r = analysis::spectrum(&g);
    let entries = analysis::asp_diagnostic(&g, &r, &left_values(0));
    assert!(!entries.is_empty());
    assert!(entries.iter().all(|e| e.violation && e.residual < 1e-8));
    // observing the free string instead clears every mode
    let entries = analysis::asp_diagnostic(&g, &r, &left_values(1));
    assert!(entries.iter().all(|e| !e.violation));
}
