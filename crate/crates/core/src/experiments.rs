//! Monte Carlo estimation runs and parameter sweeps.
//!
//! Each sweep point gets its own seed derived from the sweep seed and the
//! point's grid index, and points are evaluated in parallel; rows are always
//! emitted in grid order, so a table depends only on its inputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fisher::{entangled_max_fisher, separable_max_fisher, ub_entangled, ub_separable};
use crate::gaussian::GaussianState;
use crate::protocols::{
    build_plan, mean_std, phase_precisions, probe_from_coefficients, weighted_estimate, ProbeKind,
    SensingTask, SensorNetworkSpec,
};
use crate::table::{Cell, SweepMetadata, SweepTable};

/// SplitMix64 finalizer over `seed + index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Sample mean of the per-trial estimates.
    pub mean: f64,
    /// Sample standard deviation of the per-trial estimates.
    pub std: f64,
    /// Predicted standard deviation.
    pub analytic: f64,
    /// True value of the estimated quantity.
    pub target: f64,
    /// `|mean - target| / (std / sqrt(trials))`.
    pub z_score: f64,
    pub trials: usize,
    pub seed: u64,
}

impl EstimationResult {
    fn from_samples(xs: &[f64], analytic: f64, target: f64, seed: u64) -> Self {
        let (mean, std) = mean_std(xs);
        let trials = xs.len();
        let se = std / (trials as f64).sqrt();
        let z_score = if se > 0.0 {
            (mean - target).abs() / se
        } else {
            0.0
        };
        Self {
            mean,
            std,
            analytic,
            target,
            z_score,
            trials,
            seed,
        }
    }

    /// Standard error of the mean.
    pub fn mean_error(&self) -> f64 {
        self.std / (self.trials as f64).sqrt()
    }

    /// Large-sample standard error of the sample standard deviation.
    pub fn std_error(&self) -> f64 {
        self.std / (2.0 * (self.trials as f64 - 1.0)).sqrt()
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    Ok(())
}

/// probe → loss → displacements `α` → x-homodyne on every node → `Σ w_m x'_m`.
pub fn run_estimation(
    spec: &SensorNetworkSpec,
    alpha: &[f64],
    trials: usize,
    seed: u64,
) -> Result<EstimationResult> {
    check_trials(trials)?;
    let target = spec.weighted_target(alpha)?;
    let plan = build_plan(spec)?;
    let mut state = plan.probe.pure_loss(&spec.loss_map())?;
    for (m, a) in alpha.iter().enumerate() {
        state = state.displace_x(m, *a)?;
    }
    let record = state.homodyne_x(trials, seed)?;
    let est = weighted_estimate(&record, &plan.estimator_weights)?;
    Ok(EstimationResult::from_samples(
        &est.per_trial,
        plan.analytic_precision,
        target,
        seed,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `ln y` against `ln x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("xs", "need at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("xs", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("xs", "need at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

pub const SCALING_COLUMNS: [&str; 6] = ["M", "kind", "eta", "delta_analytic", "delta_mc", "mc_err"];

/// Precision versus node count at fixed photons per node, for both probe
/// kinds, with log-log slopes of the Monte Carlo and analytic curves.
pub fn scaling_sweep(
    modes: &[usize],
    photons_per_node: f64,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<SweepTable> {
    check_trials(trials)?;
    if modes.len() < 2 || modes.contains(&0) {
        return Err(Error::invalid(
            "modes",
            "need at least two positive node counts",
        ));
    }
    if !(photons_per_node > 0.0) || !photons_per_node.is_finite() {
        return Err(Error::invalid(
            "photon_budget",
            format!("photons per node must be positive, got {photons_per_node}"),
        ));
    }
    let kinds = [ProbeKind::Entangled, ProbeKind::Separable];
    let jobs: Vec<(usize, ProbeKind, usize)> = kinds
        .iter()
        .flat_map(|k| modes.iter().map(move |m| (*m, *k)))
        .enumerate()
        .map(|(i, (m, k))| (m, k, i))
        .collect();
    let results: Vec<Result<EstimationResult>> = jobs
        .par_iter()
        .map(|(m, kind, idx)| {
            let spec =
                SensorNetworkSpec::homogeneous(*m, *m as f64 * photons_per_node, eta, *kind)?;
            run_estimation(
                &spec,
                &vec![0.0; *m],
                trials,
                derive_seed(seed, *idx as u64),
            )
        })
        .collect();

    let mut table = SweepTable::new(
        &SCALING_COLUMNS,
        SweepMetadata {
            experiment: "scaling_sweep".into(),
            spec: json!({ "modes": modes, "photons_per_node": photons_per_node, "eta": eta }),
            seed,
            trials,
            ..SweepMetadata::default()
        },
    );
    for ((m, kind, _), res) in jobs.iter().zip(results) {
        let res = res?;
        table.push_row(vec![
            (*m).into(),
            kind.as_str().into(),
            eta.into(),
            res.analytic.into(),
            res.std.into(),
            res.std_error().into(),
        ])?;
    }
    let xs: Vec<f64> = modes.iter().map(|m| *m as f64).collect();
    for kind in kinds {
        let pick = |col: &str| -> Vec<f64> {
            let vals = table.numeric_column(col).expect("column exists");
            table
                .rows()
                .iter()
                .zip(vals)
                .filter(|(r, _)| r[1].as_str() == Some(kind.as_str()))
                .map(|(_, v)| v)
                .collect()
        };
        let mc = loglog_fit(&xs, &pick("delta_mc"))?;
        let an = loglog_fit(&xs, &pick("delta_analytic"))?;
        let summary = &mut table.metadata.summary;
        summary.insert(format!("{}_slope_mc", kind.as_str()), mc.slope);
        summary.insert(format!("{}_r2_mc", kind.as_str()), mc.r_squared);
        summary.insert(format!("{}_slope_analytic", kind.as_str()), an.slope);
    }
    Ok(table)
}

pub const BOUND_COLUMNS: [&str; 7] = [
    "eta",
    "delta_E",
    "delta_P",
    "delta_E_LB",
    "delta_C_LB",
    "delta_E_mc",
    "delta_P_mc",
];

/// Optimal Gaussian precisions and the general lower bounds versus loss.
/// Monte Carlo columns are filled when `trials > 0` and `η > 0`.
pub fn bound_comparison(
    photons: f64,
    modes: usize,
    etas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SweepTable> {
    if etas.is_empty() {
        return Err(Error::invalid("eta_grid", "must not be empty"));
    }
    if let Some(e) = etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::invalid(
            "eta_grid",
            format!("entries must lie in [0, 1], got {e}"),
        ));
    }
    let rows: Vec<Result<Vec<Cell>>> = etas
        .par_iter()
        .enumerate()
        .map(|(i, &eta)| {
            let d_e = entangled_max_fisher(modes, photons, eta)?.precision();
            let d_p = separable_max_fisher(modes, photons, eta)?.precision();
            let lb_e = ub_entangled(modes, photons, eta)?.precision();
            let lb_c = ub_separable(modes, photons, eta)?.precision();
            let (mc_e, mc_p) = if trials > 0 && eta > 0.0 {
                let run = |kind, k: u64| -> Result<Cell> {
                    let spec = SensorNetworkSpec::homogeneous(modes, photons, eta, kind)?;
                    let r = run_estimation(
                        &spec,
                        &vec![0.0; modes],
                        trials,
                        derive_seed(seed, 2 * i as u64 + k),
                    )?;
                    Ok(r.std.into())
                };
                (run(ProbeKind::Entangled, 0)?, run(ProbeKind::Separable, 1)?)
            } else {
                (Cell::Empty, Cell::Empty)
            };
            Ok(vec![
                eta.into(),
                d_e.into(),
                d_p.into(),
                lb_e.into(),
                lb_c.into(),
                mc_e,
                mc_p,
            ])
        })
        .collect();
    let mut table = SweepTable::new(
        &BOUND_COLUMNS,
        SweepMetadata {
            experiment: "bound_comparison".into(),
            spec: json!({ "photons": photons, "modes": modes, "eta_grid": etas }),
            seed,
            trials,
            ..SweepMetadata::default()
        },
    );
    for row in rows {
        table.push_row(row?)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfField {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub coupling: f64,
}

impl RfField {
    pub fn new(amplitudes: Vec<f64>, phases: Vec<f64>, coupling: f64) -> Result<Self> {
        if amplitudes.len() != phases.len() || amplitudes.is_empty() {
            return Err(Error::invalid("phases", "need one phase per amplitude"));
        }
        if amplitudes.iter().chain(&phases).any(|v| !v.is_finite()) {
            return Err(Error::invalid("amplitudes", "entries must be finite"));
        }
        if !(coupling > 0.0) || !coupling.is_finite() {
            return Err(Error::invalid(
                "coupling",
                format!("must be positive, got {coupling}"),
            ));
        }
        Ok(Self {
            amplitudes,
            phases,
            coupling,
        })
    }

    /// Quadrature displacement at each sensor: `κ E_m φ_m`.
    pub fn displacements(&self) -> Vec<f64> {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .map(|(e, p)| self.coupling * e * p)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfTask {
    AvgAmplitude,
    PhaseDiffCenter,
    PhaseDiffEdge,
}

impl RfTask {
    /// Weight vector with `Σ|w| = 1`. Center: `(-½, 1, -½)` around the middle
    /// node; edge: `(1, -1)` on the first two nodes.
    pub fn weights(&self, modes: usize) -> Result<Vec<f64>> {
        let mut w = vec![0.0_f64; modes];
        match self {
            RfTask::AvgAmplitude => {
                if modes == 0 {
                    return Err(Error::invalid("modes", "must be at least 1"));
                }
                w.iter_mut().for_each(|v| *v = 1.0);
            }
            RfTask::PhaseDiffCenter => {
                if modes < 3 {
                    return Err(Error::invalid(
                        "modes",
                        "center phase difference needs at least 3 nodes",
                    ));
                }
                let c = modes / 2;
                w[c - 1] = -0.5;
                w[c] = 1.0;
                w[c + 1] = -0.5;
            }
            RfTask::PhaseDiffEdge => {
                if modes < 2 {
                    return Err(Error::invalid(
                        "modes",
                        "edge phase difference needs at least 2 nodes",
                    ));
                }
                w[0] = 1.0;
                w[1] = -1.0;
            }
        }
        let l1: f64 = w.iter().map(|v: &f64| v.abs()).sum();
        Ok(w.into_iter().map(|v| v / l1).collect())
    }
}

/// Spec with the task's weights substituted.
pub fn rf_spec(spec: &SensorNetworkSpec, task: RfTask) -> Result<SensorNetworkSpec> {
    SensorNetworkSpec::new(
        task.weights(spec.num_modes())?,
        spec.transmissivities().to_vec(),
        spec.photon_budget(),
        spec.kind(),
        SensingTask::Displacement,
    )
}

/// Estimates the task's weighted combination of RF-induced displacements.
pub fn rf_task(
    field: &RfField,
    spec: &SensorNetworkSpec,
    task: RfTask,
    trials: usize,
    seed: u64,
) -> Result<EstimationResult> {
    if field.amplitudes.len() != spec.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: spec.num_modes(),
            actual: field.amplitudes.len(),
        });
    }
    run_estimation(&rf_spec(spec, task)?, &field.displacements(), trials, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmPhase {
    Zero,
    Pi,
}

impl ArmPhase {
    pub fn sign(&self) -> f64 {
        match self {
            ArmPhase::Zero => 1.0,
            ArmPhase::Pi => -1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ArmPhase::Zero => "0",
            ArmPhase::Pi => "pi",
        }
    }
}

/// Routing amplitudes of the tunable network: the tuned node receives
/// `±sqrt(r)`, and the remaining `sqrt(1-r)` is split over the other nodes in
/// the fixed proportions of the optimal routing. With `flip = Zero` the
/// optimum is reachable at `r* = v_t²`.
pub fn tunable_coefficients(
    optimal: &[f64],
    tuned: usize,
    ratio: f64,
    flip: ArmPhase,
) -> Result<Vec<f64>> {
    let m = optimal.len();
    if m < 2 || tuned >= m {
        return Err(Error::invalid(
            "tuned_node",
            "need at least two nodes and a valid tuned index",
        ));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid(
            "ratio",
            format!("must lie in [0, 1], got {ratio}"),
        ));
    }
    let orient = if optimal[tuned] < 0.0 { -1.0 } else { 1.0 };
    let mut rest: Vec<f64> = optimal.iter().map(|v| v * orient).collect();
    rest[tuned] = 0.0;
    let norm = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        // everything on the tuned node: park the remainder on the next node
        rest = vec![0.0; m];
        rest[(tuned + 1) % m] = 1.0;
    } else {
        rest.iter_mut().for_each(|v| *v /= norm);
    }
    let keep = (1.0 - ratio).sqrt();
    let mut v: Vec<f64> = rest.into_iter().map(|c| c * keep).collect();
    v[tuned] = flip.sign() * ratio.sqrt();
    Ok(v)
}

pub const ENTANGLEMENT_COLUMNS: [&str; 5] = [
    "ratio",
    "flip",
    "variance_analytic",
    "variance_mc",
    "mc_err",
];

/// Estimator variance versus the splitting ratio of the tuned node's
/// beam splitter, for one arm phase. Summary: argmin ratio, its variance,
/// the ratio predicted from the optimal routing, and the separable variance.
pub fn entanglement_sweep(
    spec: &SensorNetworkSpec,
    ratios: &[f64],
    flip: ArmPhase,
    tuned: usize,
    trials: usize,
    seed: u64,
) -> Result<SweepTable> {
    if ratios.is_empty() {
        return Err(Error::invalid("ratio_grid", "must not be empty"));
    }
    let spec = spec.with_kind(ProbeKind::Entangled);
    let optimal = spec.optimal_coefficients()?;
    let rows: Vec<Result<(f64, Cell, Cell)>> = ratios
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            let v = tunable_coefficients(&optimal, tuned, r, flip)?;
            let plan = probe_from_coefficients(&spec, &v)?;
            let var = plan.analytic_precision.powi(2);
            if trials == 0 {
                return Ok((var, Cell::Empty, Cell::Empty));
            }
            let state = plan.probe.pure_loss(&spec.loss_map())?;
            let rec = state.homodyne_x(trials, derive_seed(seed, i as u64))?;
            let est = weighted_estimate(&rec, spec.weights())?;
            let mc_var = est.std * est.std;
            // standard error of a Gaussian sample variance
            let err = mc_var * (2.0 / (trials as f64 - 1.0).max(1.0)).sqrt();
            Ok((var, mc_var.into(), err.into()))
        })
        .collect();

    let orient = if optimal[tuned] < 0.0 { -1.0 } else { 1.0 };
    let predicted = (optimal[tuned] * orient).powi(2);
    let separable = build_plan(&spec.with_kind(ProbeKind::Separable))?
        .analytic_precision
        .powi(2);
    let mut table = SweepTable::new(
        &ENTANGLEMENT_COLUMNS,
        SweepMetadata {
            experiment: "entanglement_sweep".into(),
            spec: json!({ "network": spec, "ratio_grid": ratios, "flip": flip, "tuned_node": tuned }),
            seed,
            trials,
            ..SweepMetadata::default()
        },
    );
    let mut best = (f64::INFINITY, f64::NAN);
    for (r, row) in ratios.iter().zip(rows) {
        let (var, mc, err) = row?;
        if var < best.0 {
            best = (var, *r);
        }
        table.push_row(vec![(*r).into(), flip.as_str().into(), var.into(), mc, err])?;
    }
    let summary = &mut table.metadata.summary;
    summary.insert("best_ratio".into(), best.1);
    summary.insert("best_variance".into(), best.0);
    summary.insert("predicted_ratio".into(), predicted);
    summary.insert("separable_variance".into(), separable);
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub kind: ProbeKind,
    /// Result at the local-oscillator angle with the smallest Monte Carlo std.
    pub best: EstimationResult,
    pub best_angle: f64,
    /// `(angle, Monte Carlo std)` for every usable angle of the grid.
    pub per_angle: Vec<(f64, f64)>,
}

/// Variance of mode 0's x quadrature at the measurement, as a function of
/// the common phase.
fn phase_pipeline(
    kind: ProbeKind,
    modes: usize,
    photons_per_node: f64,
    theta: f64,
    lo_angle: f64,
) -> Result<GaussianState> {
    match kind {
        ProbeKind::Entangled => {
            let total = modes as f64 * photons_per_node;
            let balanced = vec![1.0 / (modes as f64).sqrt(); modes];
            let array = crate::gaussian::distribution_array(&balanced)?;
            let mut state = GaussianState::squeezed_vacuum(total)?;
            if modes > 1 {
                state = state.tensor(&GaussianState::vacuum(modes - 1)?);
            }
            state = state.apply_symplectic(&array)?;
            for m in 0..modes {
                state = state.phase_rotate(m, theta)?;
            }
            // recombine so the phase information sits in mode 0
            state
                .apply_symplectic(&array.inverse())?
                .phase_rotate(0, lo_angle)
        }
        ProbeKind::Separable => {
            // nodes are independent and identical; one mode describes them all
            GaussianState::squeezed_vacuum(photons_per_node)?
                .phase_rotate(0, theta)?
                .phase_rotate(0, lo_angle)
        }
    }
}

const PHASE_FD_STEP: f64 = 1e-5;

/// Small-angle phase estimation with homodyne detection. The per-trial
/// estimate linearizes the measured quadrature's second moment around zero
/// phase: `θ̂ = (x² - σ₀²) / (dσ²/dθ)`, averaged over nodes for separable
/// probes. The best local-oscillator angle of the grid is reported.
pub fn phase_mc(
    kind: ProbeKind,
    modes: usize,
    photons_per_node: f64,
    theta: f64,
    lo_angles: &[f64],
    trials: usize,
    seed: u64,
) -> Result<PhaseEstimate> {
    check_trials(trials)?;
    if !(theta.abs() <= 0.01) {
        return Err(Error::invalid(
            "theta",
            format!("small-angle estimation needs |θ| <= 0.01, got {theta}"),
        ));
    }
    let (delta_e, delta_p) = phase_precisions(modes, photons_per_node)?;
    let analytic = match kind {
        ProbeKind::Entangled => delta_e,
        ProbeKind::Separable => delta_p,
    };
    let x_var = |th: f64, lo: f64| -> Result<f64> {
        Ok(phase_pipeline(kind, modes, photons_per_node, th, lo)?.cov()[(0, 0)])
    };
    let results: Vec<Result<Option<(f64, EstimationResult)>>> = lo_angles
        .par_iter()
        .enumerate()
        .map(|(i, &lo)| {
            let base = x_var(0.0, lo)?;
            let slope =
                (x_var(PHASE_FD_STEP, lo)? - x_var(-PHASE_FD_STEP, lo)?) / (2.0 * PHASE_FD_STEP);
            if slope.abs() < 1e-9 {
                return Ok(None);
            }
            let state = phase_pipeline(kind, modes, photons_per_node, theta, lo)?;
            let point_seed = derive_seed(seed, i as u64);
            let estimates: Vec<f64> = match kind {
                ProbeKind::Entangled => {
                    let rec = state.homodyne_x(trials, point_seed)?;
                    rec.samples
                        .column(0)
                        .iter()
                        .map(|x| (x * x - base) / slope)
                        .collect()
                }
                ProbeKind::Separable => {
                    let mut product = state.clone();
                    for _ in 1..modes {
                        product = product.tensor(&state);
                    }
                    let rec = product.homodyne_x(trials, point_seed)?;
                    rec.samples
                        .row_iter()
                        .map(|row| {
                            row.iter().map(|x| (x * x - base) / slope).sum::<f64>() / modes as f64
                        })
                        .collect()
                }
            };
            Ok(Some((
                lo,
                EstimationResult::from_samples(&estimates, analytic, theta, point_seed),
            )))
        })
        .collect();

    let mut per_angle = Vec::new();
    let mut best: Option<(f64, EstimationResult)> = None;
    for r in results {
        if let Some((lo, res)) = r? {
            per_angle.push((lo, res.std));
            if best.as_ref().is_none_or(|(_, b)| res.std < b.std) {
                best = Some((lo, res));
            }
        }
    }
    let (best_angle, best) = best.ok_or_else(|| {
        Error::invalid(
            "lo_angles",
            "no angle carries first-order phase information",
        )
    })?;
    Ok(PhaseEstimate {
        kind,
        best,
        best_angle,
        per_angle,
    })
}

/// `n` angles spaced logarithmically on `[lo, hi]`.
pub fn log_angle_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
