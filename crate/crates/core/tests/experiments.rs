use dqs_core::experiments::{
    bound_comparison, entanglement_sweep, log_angle_grid, phase_mc, rf_spec, rf_task,
    run_estimation, scaling_sweep, ArmPhase, RfField, RfTask,
};
use dqs_core::protocols::{ProbeKind, SensingTask, SensorNetworkSpec};

fn default_grid() -> Vec<f64> {
    log_angle_grid(1e-3, std::f64::consts::FRAC_PI_4, 40)
}

#[test]
fn heterogeneous_entangled_std_matches_closed_form() {
    // unequal weights and losses, where the two candidate readings of the
    // effective weight norm disagree
    let spec = SensorNetworkSpec::new(
        vec![0.5, -0.3, 0.2],
        vec![0.6, 0.95, 0.8],
        2.0,
        ProbeKind::Entangled,
        SensingTask::Displacement,
    )
    .unwrap();
    let alpha = [0.4, -0.1, 0.7];
    let r = run_estimation(&spec, &alpha, 200_000, 7).unwrap();
    assert!((r.target - (0.2 + 0.03 + 0.14)).abs() < 1e-15);
    assert!(
        (r.std - r.analytic).abs() < 3.0 * r.std_error(),
        "{} vs {}",
        r.std,
        r.analytic
    );
    assert!(r.z_score < 3.0);

    let sep = run_estimation(&spec.with_kind(ProbeKind::Separable), &alpha, 200_000, 8).unwrap();
    assert!((sep.std - sep.analytic).abs() < 3.0 * sep.std_error());
    assert!(r.analytic < sep.analytic);
}

#[test]
fn estimation_is_reproducible() {
    let spec = SensorNetworkSpec::homogeneous(4, 2.0, 0.9, ProbeKind::Entangled).unwrap();
    let a = run_estimation(&spec, &[0.1; 4], 5_000, 11).unwrap();
    let b = run_estimation(&spec, &[0.1; 4], 5_000, 11).unwrap();
    assert_eq!(a, b);
    let c = run_estimation(&spec, &[0.1; 4], 5_000, 12).unwrap();
    assert_ne!(a.mean, c.mean);
}

#[test]
fn zero_trials_rejected() {
    let spec = SensorNetworkSpec::homogeneous(2, 1.0, 1.0, ProbeKind::Entangled).unwrap();
    assert!(run_estimation(&spec, &[0.0; 2], 0, 1).is_err());
}

#[test]
fn scaling_sweep_schema_and_determinism() {
    let a = scaling_sweep(&[1, 2, 4, 8], 1.0, 1.0, 20_000, 3).unwrap();
    assert_eq!(
        a.headers(),
        ["M", "kind", "eta", "delta_analytic", "delta_mc", "mc_err"]
    );
    assert_eq!(a.len(), 8);
    let b = scaling_sweep(&[1, 2, 4, 8], 1.0, 1.0, 20_000, 3).unwrap();
    assert_eq!(a, b);
    let s = &a.metadata.summary;
    assert!(s["entangled_r2_mc"] >= 0.99 && s["separable_r2_mc"] >= 0.99);
    assert!((s["separable_slope_analytic"] + 0.5).abs() < 1e-12);
}

#[test]
fn bound_comparison_limits() {
    let m = 10;
    let t = bound_comparison(10.0, m, &[0.0, 0.5, 0.9, 1.0], 20_000, 5).unwrap();
    let col = |c: &str| t.numeric_column(c).unwrap();
    let floor = 1.0 / (2.0 * (m as f64).sqrt());
    for c in ["delta_E", "delta_P", "delta_E_LB", "delta_C_LB"] {
        assert!((col(c)[0] - floor).abs() < 1e-12, "{c} at eta=0");
    }
    assert!(t.rows()[0][5] == dqs_core::table::Cell::Empty);
    let (de, lb) = (col("delta_E"), col("delta_E_LB"));
    assert!((de[3] - lb[3]).abs() < 1e-10 * lb[3]);
    // Monte Carlo never beats the matching bound beyond 3 standard errors
    let trials = 20_000f64;
    for i in 1..4 {
        for (mc, bound) in [("delta_E_mc", "delta_E_LB"), ("delta_P_mc", "delta_C_LB")] {
            let v = col(mc)[i];
            let se = v / (2.0 * (trials - 1.0)).sqrt();
            assert!(v >= col(bound)[i] - 3.0 * se, "{mc} row {i}");
        }
    }
}

#[test]
fn rf_average_amplitude_target() {
    let field = RfField::new(vec![1.0; 3], vec![0.1; 3], 1.0).unwrap();
    let spec = SensorNetworkSpec::homogeneous(3, 3.0, 0.9, ProbeKind::Entangled).unwrap();
    let r = rf_task(&field, &spec, RfTask::AvgAmplitude, 50_000, 1).unwrap();
    assert!((r.target - 0.1).abs() < 1e-15);
    assert!(r.z_score < 3.0);
}

#[test]
fn rf_zero_field_estimates_zero() {
    let field = RfField::new(vec![0.0; 3], vec![0.3; 3], 2.0).unwrap();
    let spec = SensorNetworkSpec::homogeneous(3, 3.0, 0.9, ProbeKind::Separable).unwrap();
    for task in [
        RfTask::AvgAmplitude,
        RfTask::PhaseDiffCenter,
        RfTask::PhaseDiffEdge,
    ] {
        let r = rf_task(&field, &spec, task, 50_000, 2).unwrap();
        assert_eq!(r.target, 0.0);
        assert!(r.mean.abs() < 3.0 * r.mean_error());
    }
}

#[test]
fn rf_edge_difference_favors_entanglement() {
    let field = RfField::new(vec![1.0, 0.8, 1.2], vec![0.05, -0.02, 0.0], 1.0).unwrap();
    let spec = SensorNetworkSpec::homogeneous(3, 3.0, 0.85, ProbeKind::Entangled).unwrap();
    let dqs = rf_task(&field, &spec, RfTask::PhaseDiffEdge, 100_000, 3).unwrap();
    let dcs = rf_task(
        &field,
        &spec.with_kind(ProbeKind::Separable),
        RfTask::PhaseDiffEdge,
        100_000,
        4,
    )
    .unwrap();
    assert!(dqs.std * dqs.std / (dcs.std * dcs.std) < 1.0);
    assert!(dqs.analytic < dcs.analytic);
}

#[test]
fn entanglement_sweep_average_is_balanced() {
    let spec = rf_spec(
        &SensorNetworkSpec::homogeneous(3, 3.0, 0.9, ProbeKind::Entangled).unwrap(),
        RfTask::AvgAmplitude,
    )
    .unwrap();
    let ratios: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    let t = entanglement_sweep(&spec, &ratios, ArmPhase::Zero, 0, 20_000, 9).unwrap();
    let s = &t.metadata.summary;
    assert!((s["predicted_ratio"] - 1.0 / 3.0).abs() < 1e-12);
    assert!((s["best_ratio"] - 1.0 / 3.0).abs() <= 0.01);
    assert!(s["best_variance"] < s["separable_variance"]);
    // Monte Carlo variance tracks the analytic curve
    let (an, mc, err) = (
        t.numeric_column("variance_analytic").unwrap(),
        t.numeric_column("variance_mc").unwrap(),
        t.numeric_column("mc_err").unwrap(),
    );
    let outliers = (0..an.len())
        .filter(|&i| (an[i] - mc[i]).abs() > 4.0 * err[i])
        .count();
    assert!(outliers <= 1, "{outliers} points beyond 4 SE");
}

#[test]
fn entanglement_sweep_flip_moves_minimum() {
    let spec = rf_spec(
        &SensorNetworkSpec::homogeneous(3, 3.0, 0.9, ProbeKind::Entangled).unwrap(),
        RfTask::PhaseDiffCenter,
    )
    .unwrap();
    let ratios: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
    let zero = entanglement_sweep(&spec, &ratios, ArmPhase::Zero, 1, 0, 0).unwrap();
    let pi = entanglement_sweep(&spec, &ratios, ArmPhase::Pi, 1, 0, 0).unwrap();
    let (z, p) = (&zero.metadata.summary, &pi.metadata.summary);
    assert_ne!(z["best_ratio"], p["best_ratio"]);
    assert!((z["best_ratio"] - z["predicted_ratio"]).abs() <= 0.02);
    assert!(z["best_variance"] <= p["best_variance"]);
    assert!(entanglement_sweep(&spec, &[], ArmPhase::Zero, 0, 0, 0).is_err());
}

#[test]
fn phase_single_mode_reaches_closed_form() {
    let r = phase_mc(
        ProbeKind::Entangled,
        1,
        1.0,
        0.005,
        &default_grid(),
        100_000,
        21,
    )
    .unwrap();
    assert!((r.best.analytic - 0.25).abs() < 1e-12);
    assert!(r.best.std <= 0.275, "{}", r.best.std);
    assert!(r.best.std >= 0.25 * 0.95);
}

#[test]
fn phase_zero_is_unbiased() {
    let r = phase_mc(
        ProbeKind::Entangled,
        2,
        1.0,
        0.0,
        &default_grid(),
        100_000,
        22,
    )
    .unwrap();
    assert!(r.best.mean.abs() < 3.0 * r.best.mean_error());
}

#[test]
fn phase_entangled_beats_separable() {
    let e = phase_mc(
        ProbeKind::Entangled,
        4,
        1.0,
        0.002,
        &default_grid(),
        50_000,
        23,
    )
    .unwrap();
    let s = phase_mc(
        ProbeKind::Separable,
        4,
        1.0,
        0.002,
        &default_grid(),
        50_000,
        24,
    )
    .unwrap();
    assert!(e.best.std < s.best.std);
    assert!(e.best.std <= 1.1 * e.best.analytic);
    assert!(s.best.std <= 1.1 * s.best.analytic);
    assert!(phase_mc(ProbeKind::Entangled, 4, 1.0, 0.05, &default_grid(), 10, 0).is_err());
}
