//! Fisher information for displacement sensing: closed forms, the
//! fidelity finite-difference route, the pure-state variance form, lossy
//! upper bounds and the weighted multi-parameter Cramér–Rao bound.
//!
//! Every value is per probe use, in inverse units of the squared
//! displacement, with the single-mode lossy squeezed-vacuum optimum
//! `4 / (η/s + 1 - η)` as the normalization anchor.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    inverse_squeeze_factor, log_fidelity_equal_covariance, log_fidelity_single_mode,
    squeeze_factor, GaussianState,
};

/// Fisher information of the vacuum for an x-displacement: `1 / (1/4)`.
pub const VACUUM_FISHER: f64 = 4.0;

/// `I_F = PURE_VARIANCE_SCALE · cᵀ V_pp c` for pure states. The displacement
/// generator is `2 p`, so the factor is `4 · 2²`; calibrated against the
/// fidelity route on the vacuum, where it must give [`VACUUM_FISHER`].
pub const PURE_VARIANCE_SCALE: f64 = 16.0;

pub const DEFAULT_FD_STEP: f64 = 1e-4;

const PURITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMethod {
    ClosedForm,
    FidelityFd,
    VarianceForm,
    UpperBound,
}

/// Inputs a Fisher value was computed from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FisherParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photons: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub transmissivity: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub value: f64,
    pub method: FisherMethod,
    pub params: FisherParams,
}

impl FisherReport {
    fn new(value: f64, method: FisherMethod, params: FisherParams) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Numeric(format!(
                "Fisher information {value} is not a finite non-negative number"
            )));
        }
        Ok(Self {
            value,
            method,
            params,
        })
    }

    /// Cramér–Rao standard deviation `1/sqrt(I)` for a single probe use.
    pub fn precision(&self) -> f64 {
        self.value.sqrt().recip()
    }
}

fn network_params(modes: usize, photons: f64, eta: f64) -> FisherParams {
    FisherParams {
        modes: Some(modes),
        photons: Some(photons),
        transmissivity: vec![eta],
        weights: Vec::new(),
    }
}

fn check_photons(photons: f64) -> Result<()> {
    if !(photons >= 0.0) || !photons.is_finite() {
        return Err(Error::invalid(
            "photon_budget",
            format!("must be finite and non-negative, got {photons}"),
        ));
    }
    Ok(())
}

fn check_eta(eta: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero {
        (0.0..=1.0).contains(&eta)
    } else {
        eta > 0.0 && eta <= 1.0
    };
    if !ok {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        return Err(Error::invalid(
            "transmissivity",
            format!("must lie in {range}, got {eta}"),
        ));
    }
    Ok(())
}

fn check_modes(modes: usize) -> Result<()> {
    if modes == 0 {
        return Err(Error::invalid("modes", "must be at least 1"));
    }
    Ok(())
}

/// Single-mode optimum without range checks; `η = 0` gives the vacuum floor.
fn single_mode_optimum(photons: f64, eta: f64) -> f64 {
    VACUUM_FISHER / (eta * inverse_squeeze_factor(photons) + 1.0 - eta)
}

/// Fidelity-based Fisher information of a one-parameter family, by central
/// differences at `α₀ ± ε/2` with one Richardson step.
///
/// Single-mode families use the general Gaussian fidelity; multimode
/// families must keep the covariance fixed (pure displacement), which is the
/// case the equal-covariance fidelity covers.
pub fn fisher_fd<F>(family: F, alpha0: f64, step: f64) -> Result<FisherReport>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(
            "step",
            format!("must be positive, got {step}"),
        ));
    }
    let estimate = |h: f64| -> Result<f64> {
        let a = family(alpha0 - 0.5 * h)?;
        let b = family(alpha0 + 0.5 * h)?;
        let log_f = if a.num_modes() == 1 {
            log_fidelity_single_mode(&a, &b)?
        } else {
            log_fidelity_equal_covariance(&a, &b)?
        };
        // 1 - sqrt(F) without cancellation
        let infidelity = -(0.5 * log_f).exp_m1();
        if infidelity >= 0.1 {
            return Err(Error::invalid(
                "step",
                format!("too large: 1 - sqrt(F) = {infidelity}"),
            ));
        }
        Ok(8.0 * infidelity / (h * h))
    };
    let coarse = estimate(step)?;
    let fine = estimate(0.5 * step)?;
    let value = ((4.0 * fine - coarse) / 3.0).max(0.0);
    FisherReport::new(value, FisherMethod::FidelityFd, FisherParams::default())
}

/// Maximum displacement Fisher information of a single-mode Gaussian probe
/// with `photons` mean photons behind a pure-loss channel `η`, attained by
/// the x-squeezed vacuum: `4 / (η/s + 1 - η)`.
pub fn displacement_qfi_gaussian(photons: f64, eta: f64) -> Result<FisherReport> {
    check_photons(photons)?;
    check_eta(eta, false)?;
    FisherReport::new(
        single_mode_optimum(photons, eta),
        FisherMethod::ClosedForm,
        network_params(1, photons, eta),
    )
}

/// Entangled optimum for `M` identical displacements: the whole budget is
/// squeezed into one mode and spread by a balanced array.
pub fn entangled_max_fisher(modes: usize, photons: f64, eta: f64) -> Result<FisherReport> {
    check_modes(modes)?;
    check_photons(photons)?;
    check_eta(eta, true)?;
    FisherReport::new(
        modes as f64 * single_mode_optimum(photons, eta),
        FisherMethod::ClosedForm,
        network_params(modes, photons, eta),
    )
}

/// Separable optimum: `M` independent squeezed vacua with `N/M` photons each.
pub fn separable_max_fisher(modes: usize, photons: f64, eta: f64) -> Result<FisherReport> {
    check_modes(modes)?;
    check_photons(photons)?;
    check_eta(eta, true)?;
    let m = modes as f64;
    FisherReport::new(
        m * single_mode_optimum(photons / m, eta),
        FisherMethod::ClosedForm,
        network_params(modes, photons, eta),
    )
}

fn lossy_upper_bound(modes: usize, per_mode_photons: f64, eta: f64) -> f64 {
    let m = modes as f64;
    eta * VACUUM_FISHER * m * squeeze_factor(per_mode_photons) + VACUUM_FISHER * (1.0 - eta) * m
}

/// Upper bound over all (not only Gaussian) entangled probes behind loss `η`:
/// `η·4M s(N) + 4(1-η)M`. Tight at `η ∈ {0, 1}`.
pub fn ub_entangled(modes: usize, photons: f64, eta: f64) -> Result<FisherReport> {
    check_modes(modes)?;
    check_photons(photons)?;
    check_eta(eta, true)?;
    FisherReport::new(
        lossy_upper_bound(modes, photons, eta),
        FisherMethod::UpperBound,
        network_params(modes, photons, eta),
    )
}

/// Separable counterpart of [`ub_entangled`], with `s(N/M)`.
pub fn ub_separable(modes: usize, photons: f64, eta: f64) -> Result<FisherReport> {
    check_modes(modes)?;
    check_photons(photons)?;
    check_eta(eta, true)?;
    FisherReport::new(
        lossy_upper_bound(modes, photons / modes as f64, eta),
        FisherMethod::UpperBound,
        network_params(modes, photons, eta),
    )
}

/// Discrete-variable limits for a generator with extreme eigenvalues
/// `λ_min, λ_max` on each of `M` probes: `(separable, entangled)` =
/// `(M Δλ², M² Δλ²)`.
pub fn dv_bounds(
    modes: usize,
    lambda_min: f64,
    lambda_max: f64,
) -> Result<(FisherReport, FisherReport)> {
    check_modes(modes)?;
    if !(lambda_max >= lambda_min) {
        return Err(Error::invalid(
            "lambda_max",
            format!("must be >= lambda_min ({lambda_max} < {lambda_min})"),
        ));
    }
    let gap2 = (lambda_max - lambda_min).powi(2);
    let m = modes as f64;
    let params = FisherParams {
        modes: Some(modes),
        ..FisherParams::default()
    };
    Ok((
        FisherReport::new(m * gap2, FisherMethod::UpperBound, params.clone())?,
        FisherReport::new(m * m * gap2, FisherMethod::UpperBound, params)?,
    ))
}

/// `I_F = 4 Var(G)` for a pure state and generator `G = 2 Σ c_m p_m`, i.e. a
/// common parameter that displaces the x quadrature of mode `m` by `c_m α`.
pub fn variance_form_fisher(state: &GaussianState, weights: &[f64]) -> Result<FisherReport> {
    let m = state.num_modes();
    if weights.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: weights.len(),
        });
    }
    if !state.is_pure(PURITY_TOL)? {
        return Err(Error::invalid(
            "state",
            "variance form holds only for pure states",
        ));
    }
    let cov = state.cov();
    let mut var = 0.0;
    for (i, ci) in weights.iter().enumerate() {
        for (j, cj) in weights.iter().enumerate() {
            var += ci * cj * cov[(2 * i + 1, 2 * j + 1)];
        }
    }
    FisherReport::new(
        PURE_VARIANCE_SCALE * var,
        FisherMethod::VarianceForm,
        FisherParams {
            modes: Some(m),
            weights: weights.to_vec(),
            ..FisherParams::default()
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl FisherMatrix {
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let k = matrix.nrows();
        if matrix.ncols() != k || labels.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: labels.len().max(matrix.ncols()),
            });
        }
        let scale = matrix.amax().max(1.0);
        if (&matrix - matrix.transpose()).amax() > 1e-10 * scale {
            return Err(Error::invalid("matrix", "Fisher matrix must be symmetric"));
        }
        let min_eig = matrix.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(Error::invalid(
                "matrix",
                format!("Fisher matrix must be PSD (min eigenvalue {min_eig})"),
            ));
        }
        Ok(Self { matrix, labels })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

/// Fisher matrix `H = Jᵀ V⁻¹ J` for parameters that only move the mean, with
/// `J[:, k] = ∂μ/∂α_k`.
pub fn fisher_matrix_displacement(
    state: &GaussianState,
    jacobian: &DMatrix<f64>,
) -> Result<FisherMatrix> {
    let dim = 2 * state.num_modes();
    if jacobian.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: jacobian.nrows(),
        });
    }
    let chol = state
        .cov()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("singular covariance matrix".into()))?;
    let solved = chol.solve(jacobian);
    let mut h = jacobian.transpose() * solved;
    let k = h.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let avg = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = avg;
            h[(j, i)] = avg;
        }
    }
    let labels = (0..k).map(|i| format!("alpha_{}", i + 1)).collect();
    FisherMatrix::new(h, labels)
}

/// Weighted Cramér–Rao bound `wᵀ H⁻¹ w` on the variance of `Σ w_k α_k`.
pub fn weighted_cr_bound(fisher: &FisherMatrix, weights: &[f64]) -> Result<f64> {
    let k = fisher.len();
    if weights.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: weights.len(),
        });
    }
    let w = nalgebra::DVector::from_column_slice(weights);
    let chol = fisher
        .matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("Fisher matrix is singular".into()))?;
    let bound = w.dot(&chol.solve(&w));
    if !bound.is_finite() {
        return Err(Error::Numeric("Fisher matrix is singular".into()));
    }
    Ok(bound.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{distribution_array, LossMap};
    use approx::assert_relative_eq;

    fn lossy_squeezed_family(photons: f64, eta: f64) -> impl Fn(f64) -> Result<GaussianState> {
        move |alpha| {
            GaussianState::squeezed_vacuum(photons)?
                .pure_loss(&LossMap::uniform(1, eta)?)?
                .displace_x(0, alpha)
        }
    }

    #[test]
    fn fd_coherent_probe() {
        for a0 in [-1.0, 0.0, 0.7] {
            let r = fisher_fd(lossy_squeezed_family(0.0, 1.0), a0, 1e-4).unwrap();
            assert_relative_eq!(r.value, 4.0, epsilon = 1e-6);
            assert_eq!(r.method, FisherMethod::FidelityFd);
        }
    }

    #[test]
    fn fd_squeezed_probe() {
        let r = fisher_fd(lossy_squeezed_family(1.0, 1.0), 0.0, 1e-4).unwrap();
        // 4 (1 + sqrt 2)²
        assert_relative_eq!(r.value, 23.313_708_498_984_76, max_relative = 1e-6);
        let r = fisher_fd(lossy_squeezed_family(1.0, 0.5), 0.0, 1e-4).unwrap();
        assert_relative_eq!(r.value, 6.828_427_124_746_19, max_relative = 1e-6);
    }

    #[test]
    fn fd_rejects_bad_step() {
        assert!(fisher_fd(lossy_squeezed_family(1.0, 1.0), 0.0, 0.0).is_err());
        assert!(fisher_fd(lossy_squeezed_family(10.0, 1.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_cases() {
        assert_relative_eq!(displacement_qfi_gaussian(0.0, 1.0).unwrap().value, 4.0);
        assert_relative_eq!(
            displacement_qfi_gaussian(1.0, 1.0).unwrap().value,
            23.313_708_498_984_76,
            epsilon = 1e-10
        );
        for n in [0.5, 10.0, 1000.0] {
            assert_relative_eq!(
                displacement_qfi_gaussian(n, 1e-12).unwrap().value,
                4.0,
                epsilon = 1e-6
            );
        }
        assert!(displacement_qfi_gaussian(1.0, 0.0).is_err());
        assert!(displacement_qfi_gaussian(1.0, 1.5).is_err());
        assert!(displacement_qfi_gaussian(-1.0, 0.5).is_err());
    }

    #[test]
    fn network_optima() {
        let e = entangled_max_fisher(10, 10.0, 1.0).unwrap();
        assert_relative_eq!(e.value, 40.0 * 41.976_176_963_403_03, epsilon = 1e-9);
        assert_relative_eq!(e.precision(), 0.024_404_424_085_075_77, epsilon = 1e-12);
        let s = separable_max_fisher(10, 10.0, 1.0).unwrap();
        assert_relative_eq!(s.value, 40.0 * (1.0 + 2f64.sqrt()).powi(2), epsilon = 1e-9);
        assert_relative_eq!(s.precision(), 0.065_492_914_741_560_01, epsilon = 1e-12);
        for (n, eta) in [(0.3, 0.2), (4.0, 0.9), (7.0, 1.0)] {
            assert_relative_eq!(
                entangled_max_fisher(1, n, eta).unwrap().value,
                separable_max_fisher(1, n, eta).unwrap().value
            );
        }
    }

    #[test]
    fn upper_bounds() {
        let ub = ub_entangled(10, 10.0, 1.0).unwrap();
        assert_relative_eq!(
            ub.value,
            entangled_max_fisher(10, 10.0, 1.0).unwrap().value,
            max_relative = 1e-14
        );
        assert_eq!(ub.method, FisherMethod::UpperBound);
        assert_relative_eq!(ub_entangled(10, 10.0, 0.0).unwrap().value, 40.0);
        assert_relative_eq!(ub_separable(10, 10.0, 0.0).unwrap().value, 40.0);
        assert!(
            ub_entangled(10, 10.0, 0.9).unwrap().value
                > entangled_max_fisher(10, 10.0, 0.9).unwrap().value
        );
    }

    #[test]
    fn dv_bound_cases() {
        let (s, e) = dv_bounds(3, 0.0, 1.0).unwrap();
        assert_eq!((s.value, e.value), (3.0, 9.0));
        let (s, e) = dv_bounds(5, 0.5, 0.5).unwrap();
        assert_eq!((s.value, e.value), (0.0, 0.0));
        let (s, e) = dv_bounds(1, -1.0, 2.0).unwrap();
        assert_eq!(s.value, e.value);
        assert!(dv_bounds(2, 1.0, 0.0).is_err());
    }

    #[test]
    fn variance_form_calibration() {
        // calibration anchor: vacuum with unit weight against the fidelity route
        let vac = GaussianState::vacuum(1).unwrap();
        let v = variance_form_fisher(&vac, &[1.0]).unwrap().value;
        let fd = fisher_fd(lossy_squeezed_family(0.0, 1.0), 0.0, 1e-4)
            .unwrap()
            .value;
        assert_relative_eq!(v, fd, max_relative = 1e-6);
        assert_relative_eq!(v, 4.0, epsilon = 1e-12);

        let sq = GaussianState::squeezed_vacuum(1.0).unwrap();
        assert_relative_eq!(
            variance_form_fisher(&sq, &[1.0]).unwrap().value,
            23.313_708_498_984_76,
            epsilon = 1e-10
        );
    }

    #[test]
    fn variance_form_entangled_network() {
        let (m, n_s) = (4usize, 0.75);
        let total = m as f64 * n_s;
        let probe = GaussianState::squeezed_vacuum(total)
            .unwrap()
            .tensor(&GaussianState::vacuum(m - 1).unwrap())
            .apply_symplectic(&distribution_array(&vec![0.5; m]).unwrap())
            .unwrap();
        let v = variance_form_fisher(&probe, &vec![1.0; m]).unwrap().value;
        assert_relative_eq!(
            v,
            entangled_max_fisher(m, total, 1.0).unwrap().value,
            max_relative = 1e-10
        );

        let family = |a: f64| {
            let mut p = probe.clone();
            for k in 0..m {
                p = p.displace_x(k, a)?;
            }
            Ok(p)
        };
        let fd = fisher_fd(family, 0.0, 1e-4).unwrap().value;
        assert_relative_eq!(v, fd, max_relative = 1e-6);
    }

    #[test]
    fn variance_form_rejects_mixed() {
        let mixed = GaussianState::squeezed_vacuum(1.0)
            .unwrap()
            .pure_loss(&LossMap::uniform(1, 0.5).unwrap())
            .unwrap();
        assert!(variance_form_fisher(&mixed, &[1.0]).is_err());
        assert!(variance_form_fisher(&GaussianState::vacuum(2).unwrap(), &[1.0]).is_err());
    }

    #[test]
    fn fisher_matrix_vacuum_anchor() {
        let vac = GaussianState::vacuum(2).unwrap();
        let mut j = DMatrix::zeros(4, 2);
        j[(0, 0)] = 1.0;
        j[(2, 1)] = 1.0;
        let h = fisher_matrix_displacement(&vac, &j).unwrap();
        assert!((h.matrix.clone() - DMatrix::identity(2, 2) * 4.0).amax() < 1e-12);
        assert_eq!(h.labels, vec!["alpha_1", "alpha_2"]);
    }

    #[test]
    fn fisher_matrix_single_column_matches_variance_form() {
        let sq = GaussianState::squeezed_vacuum(2.0).unwrap();
        let j = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let h = fisher_matrix_displacement(&sq, &j).unwrap();
        assert_relative_eq!(
            h.matrix[(0, 0)],
            variance_form_fisher(&sq, &[1.0]).unwrap().value,
            max_relative = 1e-10
        );
    }

    #[test]
    fn fisher_matrix_entangled_slices() {
        let h2 = std::f64::consts::FRAC_1_SQRT_2;
        let probe = GaussianState::squeezed_vacuum(2.0)
            .unwrap()
            .tensor(&GaussianState::vacuum(1).unwrap())
            .apply_symplectic(&distribution_array(&[h2, h2]).unwrap())
            .unwrap()
            .pure_loss(&LossMap::new(vec![0.9, 0.7]).unwrap())
            .unwrap();
        let mut j = DMatrix::zeros(4, 2);
        j[(0, 0)] = 1.0;
        j[(2, 1)] = 1.0;
        let h = fisher_matrix_displacement(&probe, &j).unwrap().matrix;
        assert!(h[(0, 1)].abs() > 0.1);

        let slice = |d: [f64; 2]| {
            let p = probe.clone();
            fisher_fd(
                move |a| p.displace_x(0, a * d[0])?.displace_x(1, a * d[1]),
                0.0,
                1e-4,
            )
            .unwrap()
            .value
        };
        assert_relative_eq!(slice([1.0, 0.0]), h[(0, 0)], max_relative = 1e-6);
        assert_relative_eq!(slice([0.0, 1.0]), h[(1, 1)], max_relative = 1e-6);
        let off = 0.5 * (slice([1.0, 1.0]) - h[(0, 0)] - h[(1, 1)]);
        assert_relative_eq!(off, h[(0, 1)], max_relative = 1e-5);
    }

    #[test]
    fn weighted_cr_cases() {
        let h =
            FisherMatrix::new(DMatrix::identity(2, 2) * 4.0, vec!["a".into(), "b".into()]).unwrap();
        let b = weighted_cr_bound(&h, &[0.5, 0.5]).unwrap();
        assert_relative_eq!(b, 0.125, epsilon = 1e-15);
        assert_relative_eq!(b.sqrt(), 0.353_553_390_593_273_8, epsilon = 1e-12);

        let h1 = FisherMatrix::new(DMatrix::from_element(1, 1, 16.0), vec!["a".into()]).unwrap();
        assert_relative_eq!(weighted_cr_bound(&h1, &[1.0]).unwrap(), 1.0 / 16.0);

        let singular = FisherMatrix::new(
            DMatrix::from_element(2, 2, 1.0),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(weighted_cr_bound(&singular, &[1.0, 0.0]).is_err());
        assert!(weighted_cr_bound(&h, &[1.0]).is_err());
    }

    #[test]
    fn fisher_matrix_rejects_non_psd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(FisherMatrix::new(bad, vec!["a".into(), "b".into()]).is_err());
    }
}
