use dqs_core::experiments::{
    bound_comparison, entanglement_sweep, log_angle_grid, phase_mc, rf_spec, rf_task,
    run_estimation, scaling_sweep, ArmPhase, EstimationResult, RfField, RfTask,
};
use dqs_core::fisher::{
    entangled_max_fisher, fisher_fd, separable_max_fisher, ub_entangled, ub_separable,
    variance_form_fisher, FisherMethod, FisherReport, DEFAULT_FD_STEP,
};
use dqs_core::protocols::{build_plan, ProbeKind, SensorNetworkSpec};
use dqs_core::table::SweepTable;
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::output::{emit, table_to_csv, to_json};
use crate::{Invalid, Name};

const DEFAULT_TRIALS: usize = 10_000;

pub fn dispatch(name: Name, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    match name {
        Name::Estimate => estimate(cfg),
        Name::SweepScaling => sweep_scaling(cfg),
        Name::CompareBounds => compare_bounds(cfg),
        Name::Fisher => fisher(cfg),
        Name::RfTask => rf(cfg),
        Name::OptimizeAllocation => optimize_allocation(cfg),
        Name::Phase => phase(cfg),
        Name::SweepEntanglement => sweep_entanglement(cfg),
    }
}

fn json_only(cfg: &ExperimentConfig, command: &str) -> anyhow::Result<()> {
    if cfg.format == Some(Format::Csv) {
        return Err(Invalid::new("format", format!("{command} writes JSON only")).into());
    }
    Ok(())
}

fn emit_json<T: Serialize>(command: &str, cfg: &ExperimentConfig, value: &T) -> anyhow::Result<()> {
    json_only(cfg, command)?;
    emit::<()>(command, cfg, &to_json(value)?, None)
}

fn emit_table(command: &str, cfg: &ExperimentConfig, table: &SweepTable) -> anyhow::Result<()> {
    let body = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => table_to_csv(table)?,
        Format::Json => to_json(table)?,
    };
    emit(command, cfg, &body, Some(&table.metadata.summary))
}

fn require_finite(values: &[f64], what: &str) -> anyhow::Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(dqs_core::Error::Numeric(format!("{what} is not finite")).into());
    }
    Ok(())
}

fn check_result(r: &EstimationResult) -> anyhow::Result<()> {
    require_finite(&[r.mean, r.std, r.analytic], "estimate")
}

fn reject(cfg_has: bool, field: &'static str, command: &str) -> anyhow::Result<()> {
    if cfg_has {
        return Err(Invalid::new(field, format!("not used by {command}")).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateOut<'a> {
    kind: ProbeKind,
    #[serde(flatten)]
    result: &'a EstimationResult,
}

fn estimate(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let spec = cfg.network(2, 1.0)?;
    let alpha = cfg
        .alpha
        .clone()
        .unwrap_or_else(|| vec![0.0; spec.num_modes()]);
    let result = run_estimation(&spec, &alpha, cfg.trials_or(DEFAULT_TRIALS), cfg.seed())?;
    check_result(&result)?;
    emit_json(
        "estimate",
        cfg,
        &EstimateOut {
            kind: spec.kind(),
            result: &result,
        },
    )
}

fn sweep_scaling(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    reject(cfg.weights.is_some(), "weights", "sweep-scaling")?;
    let grid = cfg
        .modes_grid
        .clone()
        .unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32]);
    let table = scaling_sweep(
        &grid,
        cfg.photons_per_node.unwrap_or(1.0),
        cfg.eta(),
        cfg.trials_or(DEFAULT_TRIALS),
        cfg.seed(),
    )?;
    emit_table("sweep-scaling", cfg, &table)
}

fn compare_bounds(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    reject(cfg.weights.is_some(), "weights", "compare-bounds")?;
    let grid = cfg
        .eta_grid
        .clone()
        .unwrap_or_else(|| (0..=20).map(|k| k as f64 / 20.0).collect());
    let table = bound_comparison(
        cfg.photon_budget.unwrap_or(10.0),
        cfg.modes.unwrap_or(10),
        &grid,
        cfg.trials_or(0),
        cfg.seed(),
    )?;
    emit_table("compare-bounds", cfg, &table)
}

#[derive(Serialize)]
struct FisherOut {
    kind: ProbeKind,
    #[serde(flatten)]
    report: FisherReport,
    precision: f64,
}

fn fisher(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    reject(cfg.weights.is_some(), "weights", "fisher")?;
    reject(cfg.transmissivities.is_some(), "transmissivities", "fisher")?;
    let modes = cfg.modes.unwrap_or(1);
    let photons = cfg.photon_budget.unwrap_or(1.0);
    let eta = cfg.eta();
    let kind = cfg.kind.unwrap_or(ProbeKind::Entangled);
    let report = match cfg.method.unwrap_or(FisherMethod::ClosedForm) {
        FisherMethod::ClosedForm => match kind {
            ProbeKind::Entangled => entangled_max_fisher(modes, photons, eta)?,
            ProbeKind::Separable => separable_max_fisher(modes, photons, eta)?,
        },
        FisherMethod::UpperBound => match kind {
            ProbeKind::Entangled => ub_entangled(modes, photons, eta)?,
            ProbeKind::Separable => ub_separable(modes, photons, eta)?,
        },
        FisherMethod::FidelityFd => {
            let spec = SensorNetworkSpec::homogeneous(modes, photons, eta, kind)?;
            let state = build_plan(&spec)?.probe.pure_loss(&spec.loss_map())?;
            let family = |a: f64| (0..modes).try_fold(state.clone(), |s, m| s.displace_x(m, a));
            fisher_fd(family, 0.0, DEFAULT_FD_STEP)?
        }
        FisherMethod::VarianceForm => {
            let spec = SensorNetworkSpec::homogeneous(modes, photons, eta, kind)?;
            let state = build_plan(&spec)?.probe.pure_loss(&spec.loss_map())?;
            variance_form_fisher(&state, &vec![1.0; modes])?
        }
    };
    require_finite(&[report.value], "Fisher information")?;
    let precision = report.precision();
    emit_json(
        "fisher",
        cfg,
        &FisherOut {
            kind,
            report,
            precision,
        },
    )
}

#[derive(Serialize)]
struct RfOut<'a> {
    task: RfTask,
    kind: ProbeKind,
    weights: &'a [f64],
    displacements: Vec<f64>,
    #[serde(flatten)]
    result: &'a EstimationResult,
}

fn rf(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    reject(
        cfg.weights.is_some(),
        "weights",
        "rf-task (the task sets them)",
    )?;
    let amplitudes = cfg.amplitudes.clone().unwrap_or_else(|| vec![1.0; 3]);
    let phases = cfg
        .phases
        .clone()
        .unwrap_or_else(|| vec![0.1; amplitudes.len()]);
    let field = RfField::new(amplitudes, phases, cfg.coupling.unwrap_or(1.0))?;
    let task = cfg.task.unwrap_or(RfTask::AvgAmplitude);
    let modes = field.amplitudes.len();
    if let Some(m) = cfg.modes.filter(|m| *m != modes) {
        return Err(Invalid::new("modes", format!("{m} nodes but {modes} amplitudes")).into());
    }
    let spec = ExperimentConfig {
        modes: Some(modes),
        ..cfg.clone()
    }
    .network(modes, 3.0)?;
    let spec = rf_spec(&spec, task)?;
    let result = rf_task(
        &field,
        &spec,
        task,
        cfg.trials_or(DEFAULT_TRIALS),
        cfg.seed(),
    )?;
    check_result(&result)?;
    emit_json(
        "rf-task",
        cfg,
        &RfOut {
            task,
            kind: spec.kind(),
            weights: spec.weights(),
            displacements: field.displacements(),
            result: &result,
        },
    )
}

#[derive(Serialize)]
struct AllocationOut<'a> {
    weights: &'a [f64],
    transmissivities: &'a [f64],
    photon_budget: f64,
    photons: &'a [f64],
    objective: f64,
    precision: f64,
    equal_split_precision: f64,
    iterations: usize,
    converged: bool,
}

fn optimize_allocation(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let spec = cfg.network(2, 1.0)?;
    let restarts = cfg
        .restarts
        .unwrap_or(dqs_core::allocation::DEFAULT_RESTARTS);
    let a = dqs_core::allocation::optimize_allocation(
        spec.weights(),
        spec.transmissivities(),
        spec.photon_budget(),
        restarts,
    )?;
    require_finite(&a.photons, "allocation")?;
    let m = spec.num_modes();
    let equal = dqs_core::allocation::separable_objective(
        spec.weights(),
        spec.transmissivities(),
        &vec![spec.photon_budget() / m as f64; m],
    );
    emit_json(
        "optimize-allocation",
        cfg,
        &AllocationOut {
            weights: spec.weights(),
            transmissivities: spec.transmissivities(),
            photon_budget: spec.photon_budget(),
            photons: &a.photons,
            objective: a.objective,
            precision: a.objective.sqrt(),
            equal_split_precision: equal.sqrt(),
            iterations: a.iterations,
            converged: a.converged,
        },
    )
}

fn phase(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    reject(cfg.weights.is_some(), "weights", "phase")?;
    let angles = cfg
        .lo_angles
        .clone()
        .unwrap_or_else(|| log_angle_grid(1e-3, std::f64::consts::FRAC_PI_4, 40));
    let r = phase_mc(
        cfg.kind.unwrap_or(ProbeKind::Entangled),
        cfg.modes.unwrap_or(1),
        cfg.photons_per_node.unwrap_or(1.0),
        cfg.theta.unwrap_or(0.005),
        &angles,
        cfg.trials_or(DEFAULT_TRIALS),
        cfg.seed(),
    )?;
    check_result(&r.best)?;
    emit_json("phase", cfg, &r)
}

fn sweep_entanglement(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let mut spec = cfg.network(3, 3.0)?;
    if let Some(task) = cfg.task {
        reject(
            cfg.weights.is_some(),
            "weights",
            "sweep-entanglement with a task",
        )?;
        spec = rf_spec(&spec, task)?;
    }
    let grid = cfg
        .ratio_grid
        .clone()
        .unwrap_or_else(|| (0..=100).map(|k| k as f64 / 100.0).collect());
    let table = entanglement_sweep(
        &spec,
        &grid,
        cfg.flip.unwrap_or(ArmPhase::Zero),
        cfg.tuned_node.unwrap_or(0),
        cfg.trials_or(0),
        cfg.seed(),
    )?;
    emit_table("sweep-entanglement", cfg, &table)
}
