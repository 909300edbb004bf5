//! Probe construction and estimators for distributed displacement sensing,
//! plus closed-form precisions for distributed phase sensing.
//!
//! Heterogeneous entangled protocol: with `u_m = w_m sqrt(η_m)`, a single
//! squeezed vacuum is routed onto the network with amplitudes `u/|u|`. The
//! estimator `Σ w_m x'_m` then has standard deviation
//!
//! ```text
//! δ = (w̄/2) sqrt(η̄/s(N) + 1 - η̄),   w̄² = Σ w_m²,   η̄ = Σ w_m² η_m / w̄².
//! ```
//!
//! Note the `w̄` here excludes the transmissivities; the variant that folds
//! `η_m` into `w̄` makes `η̄ ≡ 1` and does not match the simulated estimator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::allocation::{optimize_allocation, Allocation, DEFAULT_RESTARTS};
use crate::error::{Error, Result};
use crate::gaussian::{
    distribution_array, inverse_squeeze_factor, random_state, GaussianState, HomodyneRecord,
    LossMap, SymplecticTransform,
};

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Entangled,
    Separable,
}

impl ProbeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProbeKind::Entangled => "entangled",
            ProbeKind::Separable => "separable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingTask {
    Displacement,
    Phase,
}

/// A sensing task: `M = weights.len()` nodes estimating `ᾱ = Σ w_m α_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorNetworkSpec {
    weights: Vec<f64>,
    transmissivities: Vec<f64>,
    photon_budget: f64,
    kind: ProbeKind,
    task: SensingTask,
}

impl SensorNetworkSpec {
    /// Validates every field. Weights may be signed but must satisfy
    /// `Σ|w_m| = 1`.
    pub fn new(
        weights: Vec<f64>,
        transmissivities: Vec<f64>,
        photon_budget: f64,
        kind: ProbeKind,
        task: SensingTask,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "need at least one node"));
        }
        if transmissivities.len() != weights.len() {
            return Err(Error::invalid(
                "transmissivities",
                format!(
                    "expected {} entries to match weights, got {}",
                    weights.len(),
                    transmissivities.len()
                ),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights", "entries must be finite"));
        }
        let l1: f64 = weights.iter().map(|w| w.abs()).sum();
        if (l1 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(
                "weights",
                format!("absolute values must sum to 1, got {l1}"),
            ));
        }
        if let Some(eta) = transmissivities.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::invalid(
                "transmissivities",
                format!("each entry must lie in (0, 1], got {eta}"),
            ));
        }
        if !(photon_budget >= 0.0) || !photon_budget.is_finite() {
            return Err(Error::invalid(
                "photon_budget",
                format!("must be finite and non-negative, got {photon_budget}"),
            ));
        }
        Ok(Self {
            weights,
            transmissivities,
            photon_budget,
            kind,
            task,
        })
    }

    /// Like [`SensorNetworkSpec::new`] but rescales `weights` to `Σ|w| = 1`.
    pub fn normalized(
        weights: Vec<f64>,
        transmissivities: Vec<f64>,
        photon_budget: f64,
        kind: ProbeKind,
        task: SensingTask,
    ) -> Result<Self> {
        let l1: f64 = weights.iter().map(|w| w.abs()).sum();
        if !(l1 > 0.0) || !l1.is_finite() {
            return Err(Error::invalid(
                "weights",
                "must contain a finite non-zero entry",
            ));
        }
        let weights = weights.into_iter().map(|w| w / l1).collect();
        Self::new(weights, transmissivities, photon_budget, kind, task)
    }

    /// Equal weights `1/M` and a common transmissivity.
    pub fn homogeneous(
        modes: usize,
        photon_budget: f64,
        eta: f64,
        kind: ProbeKind,
    ) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("modes", "must be at least 1"));
        }
        Self::new(
            vec![1.0 / modes as f64; modes],
            vec![eta; modes],
            photon_budget,
            kind,
            SensingTask::Displacement,
        )
    }

    pub fn with_kind(&self, kind: ProbeKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }

    pub fn num_modes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn transmissivities(&self) -> &[f64] {
        &self.transmissivities
    }

    pub fn photon_budget(&self) -> f64 {
        self.photon_budget
    }

    pub fn kind(&self) -> ProbeKind {
        self.kind
    }

    pub fn task(&self) -> SensingTask {
        self.task
    }

    pub fn loss_map(&self) -> LossMap {
        LossMap::new(self.transmissivities.clone()).expect("validated on construction")
    }

    /// `ᾱ = Σ w_m α_m`.
    pub fn weighted_target(&self, alpha: &[f64]) -> Result<f64> {
        if alpha.len() != self.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes(),
                actual: alpha.len(),
            });
        }
        Ok(self.weights.iter().zip(alpha).map(|(w, a)| w * a).sum())
    }

    /// Routing amplitudes `u/|u|` with `u_m = w_m sqrt(η_m)`.
    pub fn optimal_coefficients(&self) -> Result<Vec<f64>> {
        let u: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.transmissivities)
            .map(|(w, eta)| w * eta.sqrt())
            .collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::invalid("weights", "all effective weights are zero"));
        }
        Ok(u.into_iter().map(|v| v / norm).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbePlan {
    /// State sent to the sensors, before loss.
    pub probe: GaussianState,
    pub distribution: SymplecticTransform,
    pub estimator_weights: Vec<f64>,
    /// Predicted standard deviation of the estimator of `ᾱ`.
    pub analytic_precision: f64,
    /// Per-node photons; separable plans only.
    pub allocation: Option<Allocation>,
}

fn require(spec: &SensorNetworkSpec, kind: ProbeKind) -> Result<()> {
    if spec.kind() != kind {
        return Err(Error::invalid(
            "kind",
            format!("expected a {} spec", kind.as_str()),
        ));
    }
    if spec.task() != SensingTask::Displacement {
        return Err(Error::invalid(
            "task",
            "probe construction covers displacement sensing",
        ));
    }
    Ok(())
}

/// Squeezed vacuum carrying the whole budget, spread by the array whose
/// first column is [`SensorNetworkSpec::optimal_coefficients`].
pub fn build_entangled(spec: &SensorNetworkSpec) -> Result<ProbePlan> {
    require(spec, ProbeKind::Entangled)?;
    let coefficients = spec.optimal_coefficients()?;
    let plan = probe_from_coefficients(spec, &coefficients)?;
    Ok(ProbePlan {
        analytic_precision: analytic_precision_entangled(spec)?,
        ..plan
    })
}

/// Entangled probe for arbitrary unit routing amplitudes, with the analytic
/// standard deviation of `Σ w_m x'_m` for that routing.
pub fn probe_from_coefficients(
    spec: &SensorNetworkSpec,
    coefficients: &[f64],
) -> Result<ProbePlan> {
    let m = spec.num_modes();
    if coefficients.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: coefficients.len(),
        });
    }
    let distribution = distribution_array(coefficients)?;
    let mut input = GaussianState::squeezed_vacuum(spec.photon_budget())?;
    if m > 1 {
        input = input.tensor(&GaussianState::vacuum(m - 1)?);
    }
    let probe = input.apply_symplectic(&distribution)?;
    let analytic_precision = estimator_std(&probe, spec)?;
    Ok(ProbePlan {
        probe,
        distribution,
        estimator_weights: spec.weights().to_vec(),
        analytic_precision,
        allocation: None,
    })
}

/// Exact standard deviation of `Σ w_m x'_m` for `probe` behind the spec's
/// losses (displacements only shift the mean).
pub fn estimator_std(probe: &GaussianState, spec: &SensorNetworkSpec) -> Result<f64> {
    let lossy = probe.pure_loss(&spec.loss_map())?;
    let (_, xcov) = lossy.x_marginal();
    let w = nalgebra::DVector::from_column_slice(spec.weights());
    Ok(w.dot(&(xcov * &w)).max(0.0).sqrt())
}

/// `(w̄/2) sqrt(η̄/s(N) + 1 - η̄)` with `w̄² = Σ w²`, `η̄ = Σ w² η / w̄²`.
pub fn analytic_precision_entangled(spec: &SensorNetworkSpec) -> Result<f64> {
    let w2: f64 = spec.weights().iter().map(|w| w * w).sum();
    if !(w2 > 0.0) {
        return Err(Error::invalid("weights", "all weights are zero"));
    }
    let w2_eta: f64 = spec
        .weights()
        .iter()
        .zip(spec.transmissivities())
        .map(|(w, eta)| w * w * eta)
        .sum();
    let eta_bar = w2_eta / w2;
    let inner = eta_bar * inverse_squeeze_factor(spec.photon_budget()) + 1.0 - eta_bar;
    Ok(0.5 * w2.sqrt() * inner.sqrt())
}

/// Independent squeezed vacua with the optimized photon allocation.
pub fn build_separable(spec: &SensorNetworkSpec) -> Result<ProbePlan> {
    require(spec, ProbeKind::Separable)?;
    let allocation = optimize_allocation(
        spec.weights(),
        spec.transmissivities(),
        spec.photon_budget(),
        DEFAULT_RESTARTS,
    )?;
    if !allocation.converged {
        return Err(Error::Numeric(format!(
            "allocation optimizer did not converge; best objective {} at {:?}",
            allocation.objective, allocation.photons
        )));
    }
    let mut probe: Option<GaussianState> = None;
    for n in &allocation.photons {
        let mode = GaussianState::squeezed_vacuum(*n)?;
        probe = Some(match probe {
            None => mode,
            Some(p) => p.tensor(&mode),
        });
    }
    Ok(ProbePlan {
        probe: probe.expect("at least one node"),
        distribution: SymplecticTransform::identity(spec.num_modes()),
        estimator_weights: spec.weights().to_vec(),
        analytic_precision: allocation.objective.sqrt(),
        allocation: Some(allocation),
    })
}

/// Dispatches on the spec's probe kind.
pub fn build_plan(spec: &SensorNetworkSpec) -> Result<ProbePlan> {
    match spec.kind() {
        ProbeKind::Entangled => build_entangled(spec),
        ProbeKind::Separable => build_separable(spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionWitness {
    pub max_deviation: f64,
    pub holds: bool,
}

/// Checks `B† U(α)^{⊗M} B = U(√M α) ⊗ U(0)^{⊗(M-1)}` for the balanced array
/// `B` by applying both sides to a random mixed state.
pub fn reduction_check(modes: usize, alpha: f64, tolerance: f64) -> Result<ReductionWitness> {
    reduction_check_seeded(modes, alpha, tolerance, 0x7ed0_c710)
}

pub fn reduction_check_seeded(
    modes: usize,
    alpha: f64,
    tolerance: f64,
    seed: u64,
) -> Result<ReductionWitness> {
    if modes == 0 {
        return Err(Error::invalid("modes", "must be at least 1"));
    }
    let balanced = distribution_array(&vec![1.0 / (modes as f64).sqrt(); modes])?;
    let mut shift = nalgebra::DVector::zeros(2 * modes);
    for m in 0..modes {
        shift[2 * m] = alpha;
    }
    let lhs = balanced
        .then(&SymplecticTransform::displacement(shift)?)?
        .then(&balanced.inverse())?;
    let mut reduced = nalgebra::DVector::zeros(2 * modes);
    reduced[0] = (modes as f64).sqrt() * alpha;
    let rhs = SymplecticTransform::displacement(reduced)?;

    let state = random_state(modes, seed)?;
    let left = state.apply_symplectic(&lhs)?;
    let right = state.apply_symplectic(&rhs)?;
    let max_deviation = (left.mean() - right.mean())
        .amax()
        .max((left.cov() - right.cov()).amax());
    Ok(ReductionWitness {
        max_deviation,
        holds: max_deviation < tolerance,
    })
}

fn check_positive(field: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(field, format!("must be positive, got {v}")));
    }
    Ok(())
}

/// Lossless phase sensing with equal weights, `n_S` photons per node:
/// `(δ_E, δ_P) = (1/sqrt(8 M n (M n + 1)), 1/sqrt(8 M n (n + 1)))`.
pub fn phase_precisions(modes: usize, photons_per_node: f64) -> Result<(f64, f64)> {
    if modes == 0 {
        return Err(Error::invalid("modes", "must be at least 1"));
    }
    check_positive("photons_per_node", photons_per_node)?;
    let m = modes as f64;
    let total = m * photons_per_node;
    let entangled = (8.0 * total * (total + 1.0)).sqrt().recip();
    let separable = (8.0 * m * photons_per_node * (photons_per_node + 1.0))
        .sqrt()
        .recip();
    Ok((entangled, separable))
}

/// Phase-sensing lower bound for beam-splitter networks fed by product
/// inputs with photon-number fluctuations `n*`: `M |w*|² / (2 |n*|)`.
pub fn ge_lower_bound(weights: &[f64], fluctuations: &[f64]) -> Result<f64> {
    if weights.is_empty() || weights.len() != fluctuations.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            actual: fluctuations.len(),
        });
    }
    let n_norm = fluctuations.iter().map(|n| n * n).sum::<f64>().sqrt();
    if !(n_norm > 0.0) {
        return Err(Error::invalid("fluctuations", "must not all be zero"));
    }
    let w2: f64 = weights.iter().map(|w| w * w).sum();
    Ok(weights.len() as f64 * w2 / (2.0 * n_norm))
}

/// `sqrt(<n²>) = sqrt(N (3N + 2))` for a squeezed vacuum with `N` photons.
pub fn squeezed_vacuum_fluctuation(photons: f64) -> f64 {
    (photons * (3.0 * photons + 2.0)).sqrt()
}

/// Generalized twin-Fock protocol: `2 / sqrt(2 N (N + 2))`.
pub fn twin_fock_precision(photons: f64) -> Result<f64> {
    check_positive("photons", photons)?;
    Ok(2.0 / (2.0 * photons * (photons + 2.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEstimate {
    pub per_trial: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
}

/// `α̃ = Σ w_m x'_m` for every trial of a homodyne record.
pub fn weighted_estimate(record: &HomodyneRecord, weights: &[f64]) -> Result<WeightedEstimate> {
    if weights.len() != record.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: record.num_modes(),
            actual: weights.len(),
        });
    }
    let w = nalgebra::DVector::from_column_slice(weights);
    let per_trial: Vec<f64> = (&record.samples * w).iter().copied().collect();
    let (mean, std) = mean_std(&per_trial);
    Ok(WeightedEstimate {
        per_trial,
        mean,
        std,
    })
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mode matrix (`M×M`) of a passive distribution array.
pub fn mode_matrix(t: &SymplecticTransform) -> DMatrix<f64> {
    let m = t.num_modes();
    DMatrix::from_fn(m, m, |i, j| t.matrix()[(2 * i, 2 * j)])
}
