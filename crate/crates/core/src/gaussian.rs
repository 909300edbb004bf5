//! Gaussian states of `M` bosonic modes and the operations the sensing
//! protocols are built from.
//!
//! Quadratures are `x = Re(a)`, `p = Im(a)`, so `[x, p] = i/2` and the vacuum
//! covariance is `I/4` per mode. Vectors and matrices are interleaved:
//! `(x_1, p_1, x_2, p_2, ...)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Variance of either quadrature of the vacuum.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Absolute tolerance for the uncertainty relation and symplecticity checks.
pub const PHYSICALITY_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_JITTER: f64 = 1e-12;

/// Squeezing factor `s = (sqrt(N + 1) + sqrt(N))^2` of a squeezed vacuum with
/// mean photon number `N`: the squeezed quadrature has variance `1/(4 s)`.
///
/// Some references write the photon constraint as `(cosh r - 1)/2`, which uses
/// an `r` twice as large as the one in `sinh^2 r`; parametrizing by `N`
/// sidesteps that collision.
pub fn squeeze_factor(photons: f64) -> f64 {
    let root = (photons + 1.0).sqrt() + photons.sqrt();
    root * root
}

/// `1/s(N)` computed without cancellation.
pub fn inverse_squeeze_factor(photons: f64) -> f64 {
    let root = (photons + 1.0).sqrt() - photons.sqrt();
    root * root
}

/// Interleaved symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]`.
pub fn symplectic_form(num_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * num_modes, 2 * num_modes);
    for m in 0..num_modes {
        omega[(2 * m, 2 * m + 1)] = 1.0;
        omega[(2 * m + 1, 2 * m)] = -1.0;
    }
    omega
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state after checking dimensions, symmetry and the uncertainty
    /// relation.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::invalid(
                "mean",
                format!("length must be a positive even number, got {dim}"),
            ));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: cov.nrows().max(cov.ncols()),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("cov", "entries must be finite"));
        }
        let scale = cov.amax().max(1.0);
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::invalid(
                "cov",
                format!("not symmetric (max deviation {asym:e})"),
            ));
        }
        let state = Self { mean, cov };
        let min_nu = state.symplectic_eigenvalues()?[0];
        if min_nu < VACUUM_VARIANCE - PHYSICALITY_TOL {
            return Err(Error::invalid(
                "cov",
                format!("violates the uncertainty relation (symplectic eigenvalue {min_nu})"),
            ));
        }
        Ok(state)
    }

    pub(crate) fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn vacuum(num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::invalid("num_modes", "must be at least 1"));
        }
        let dim = 2 * num_modes;
        Ok(Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * VACUUM_VARIANCE,
        })
    }

    /// Single-mode vacuum squeezed in `x`, with `photons` mean photons.
    pub fn squeezed_vacuum(photons: f64) -> Result<Self> {
        if !(photons >= 0.0) || !photons.is_finite() {
            return Err(Error::invalid(
                "photons",
                format!("must be a finite non-negative number, got {photons}"),
            ));
        }
        Ok(Self {
            mean: DVector::zeros(2),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![
                VACUUM_VARIANCE * inverse_squeeze_factor(photons),
                VACUUM_VARIANCE * squeeze_factor(photons),
            ])),
        })
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (d1, d2) = (self.dim(), other.dim());
        let mut mean = DVector::zeros(d1 + d2);
        mean.rows_mut(0, d1).copy_from(&self.mean);
        mean.rows_mut(d1, d2).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(d1 + d2, d1 + d2);
        cov.view_mut((0, 0), (d1, d1)).copy_from(&self.cov);
        cov.view_mut((d1, d1), (d2, d2)).copy_from(&other.cov);
        GaussianState { mean, cov }
    }

    pub fn num_modes(&self) -> usize {
        self.mean.len() / 2
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes() {
            return Err(Error::invalid(
                "mode",
                format!("index {mode} out of range for {} modes", self.num_modes()),
            ));
        }
        Ok(())
    }

    /// `<a†a>` summed over modes: `V_xx + V_pp + μ_x² + μ_p² - 1/2` per mode.
    pub fn mean_photon_number(&self) -> f64 {
        (0..self.num_modes())
            .map(|m| {
                let (ix, ip) = (2 * m, 2 * m + 1);
                self.cov[(ix, ix)]
                    + self.cov[(ip, ip)]
                    + self.mean[ix].powi(2)
                    + self.mean[ip].powi(2)
                    - 2.0 * VACUUM_VARIANCE
            })
            .sum()
    }

    /// Symplectic eigenvalues in ascending order; all are `>= 1/4` for a
    /// physical state and exactly `1/4` for a pure one.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&self.cov)
    }

    pub fn is_pure(&self, tol: f64) -> Result<bool> {
        Ok(self
            .symplectic_eigenvalues()?
            .iter()
            .all(|nu| (nu - VACUUM_VARIANCE).abs() <= tol))
    }

    pub fn apply_symplectic(&self, t: &SymplecticTransform) -> Result<GaussianState> {
        if t.matrix.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: t.matrix.nrows(),
            });
        }
        let s = &t.matrix;
        let mean = s * &self.mean + &t.shift;
        let mut cov = s * &self.cov * s.transpose();
        symmetrize(&mut cov);
        Ok(GaussianState { mean, cov })
    }

    pub fn pure_loss(&self, loss: &LossMap) -> Result<GaussianState> {
        if loss.len() != self.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes(),
                actual: loss.len(),
            });
        }
        let amp: Vec<f64> = (0..self.dim())
            .map(|i| loss.transmissivities()[i / 2].sqrt())
            .collect();
        let mut mean = self.mean.clone();
        let mut cov = self.cov.clone();
        for i in 0..self.dim() {
            mean[i] *= amp[i];
            for j in 0..self.dim() {
                cov[(i, j)] *= amp[i] * amp[j];
            }
            cov[(i, i)] += (1.0 - amp[i] * amp[i]) * VACUUM_VARIANCE;
        }
        Ok(GaussianState { mean, cov })
    }

    /// Shifts the x-quadrature mean of `mode` by `alpha`.
    pub fn displace_x(&self, mode: usize, alpha: f64) -> Result<GaussianState> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        out.mean[2 * mode] += alpha;
        Ok(out)
    }

    /// Applies `exp(-i θ a†a)` to `mode`, i.e. `a -> a e^{-iθ}`.
    pub fn phase_rotate(&self, mode: usize, theta: f64) -> Result<GaussianState> {
        self.check_mode(mode)?;
        let (c, s) = (theta.cos(), theta.sin());
        let (ix, ip) = (2 * mode, 2 * mode + 1);
        let rotate_rows = |m: &mut DMatrix<f64>| {
            for j in 0..m.ncols() {
                let (x, p) = (m[(ix, j)], m[(ip, j)]);
                m[(ix, j)] = c * x + s * p;
                m[(ip, j)] = -s * x + c * p;
            }
        };
        let mut out = self.clone();
        let (x, p) = (out.mean[ix], out.mean[ip]);
        out.mean[ix] = c * x + s * p;
        out.mean[ip] = -s * x + c * p;
        rotate_rows(&mut out.cov);
        out.cov.transpose_mut();
        rotate_rows(&mut out.cov);
        symmetrize(&mut out.cov);
        Ok(out)
    }

    /// Mean and covariance of the x quadratures alone.
    pub fn x_marginal(&self) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.num_modes();
        let mean = DVector::from_fn(m, |i, _| self.mean[2 * i]);
        let cov = DMatrix::from_fn(m, m, |i, j| self.cov[(2 * i, 2 * j)]);
        (mean, cov)
    }

    /// Samples `trials` joint outcomes of x-homodyne detection on every mode.
    ///
    /// Trial `k` draws from its own ChaCha stream keyed by `(seed, k)`, so the
    /// record does not depend on how trials are scheduled across threads.
    pub fn homodyne_x(&self, trials: usize, seed: u64) -> Result<HomodyneRecord> {
        if trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        let (mean, cov) = self.x_marginal();
        let chol = cholesky_with_jitter(&cov)?;
        let m = self.num_modes();
        let mut data = vec![0.0; trials * m];
        data.par_chunks_mut(m).enumerate().for_each(|(k, row)| {
            let mut rng = trial_rng(seed, k as u64);
            let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            for i in 0..m {
                let mut acc = mean[i];
                for j in 0..=i {
                    acc += chol[(i, j)] * z[j];
                }
                row[i] = acc;
            }
        });
        Ok(HomodyneRecord {
            samples: DMatrix::from_row_slice(trials, m, &data),
            seed,
        })
    }
}

/// Random mixed Gaussian state: independent thermal-squeezed-displaced modes
/// mixed by a random orthogonal network. Used to probe identities on
/// generic inputs.
pub fn random_state(num_modes: usize, seed: u64) -> Result<GaussianState> {
    use rand::Rng;
    if num_modes == 0 {
        return Err(Error::invalid("num_modes", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state: Option<GaussianState> = None;
    for _ in 0..num_modes {
        let thermal = 1.0 + 2.0 * rng.random::<f64>();
        let squeeze = (rng.random::<f64>() - 0.5).exp();
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![
            VACUUM_VARIANCE * thermal / squeeze,
            VACUUM_VARIANCE * thermal * squeeze,
        ]));
        let mean = DVector::from_fn(2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let mode = GaussianState::from_parts(mean, cov)
            .phase_rotate(0, rng.random::<f64>() * std::f64::consts::PI)?;
        state = Some(match state {
            None => mode,
            Some(s) => s.tensor(&mode),
        });
    }
    let state = state.expect("num_modes >= 1");
    let gauss = DMatrix::from_fn(num_modes, num_modes, |_, _| StandardNormal.sample(&mut rng));
    let q = gauss.qr().q();
    state.apply_symplectic(&SymplecticTransform::from_orthogonal_modes(&q)?)
}

/// Per-trial generator: ChaCha8 keyed by `seed`, stream selected by trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn cholesky_with_jitter(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let n = cov.nrows();
    let mut jitter = 1e-15;
    while jitter <= MAX_JITTER {
        let shifted = cov + DMatrix::identity(n, n) * jitter;
        if let Some(c) = shifted.cholesky() {
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(
        "x-quadrature covariance is not positive definite".into(),
    ))
}

/// Symplectic eigenvalues of a real symmetric positive semidefinite matrix,
/// ascending. Computed from the antisymmetric matrix `A = V^{1/2} Ω V^{1/2}`,
/// whose singular values are the symplectic eigenvalues, each twice.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = cov.nrows();
    if dim == 0 || !dim.is_multiple_of(2) || cov.ncols() != dim {
        return Err(Error::invalid("cov", "must be square with even dimension"));
    }
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|&l| l < -PHYSICALITY_TOL) {
        return Err(Error::invalid("cov", "not positive semidefinite"));
    }
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let a = &root * symplectic_form(dim / 2) * &root;
    let squares = SymmetricEigen::new(a.transpose() * &a).eigenvalues;
    let mut nu: Vec<f64> = squares.iter().map(|v| v.max(0.0).sqrt()).collect();
    nu.sort_by(|a, b| a.total_cmp(b));
    Ok(nu.into_iter().step_by(2).collect())
}

/// Affine symplectic map `r -> S r + d` on the interleaved quadrature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    matrix: DMatrix<f64>,
    shift: DVector<f64>,
}

impl SymplecticTransform {
    pub fn new(matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || matrix.ncols() != dim {
            return Err(Error::invalid(
                "matrix",
                "must be square with even dimension",
            ));
        }
        if shift.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: shift.len(),
            });
        }
        let omega = symplectic_form(dim / 2);
        let dev = (&matrix * &omega * matrix.transpose() - &omega).amax();
        if dev > PHYSICALITY_TOL {
            return Err(Error::invalid(
                "matrix",
                format!("not symplectic (|SΩSᵀ - Ω| = {dev:e})"),
            ));
        }
        Ok(Self { matrix, shift })
    }

    pub fn identity(num_modes: usize) -> Self {
        let dim = 2 * num_modes;
        Self {
            matrix: DMatrix::identity(dim, dim),
            shift: DVector::zeros(dim),
        }
    }

    /// Promotes a real orthogonal `M×M` mode matrix (a passive linear-optics
    /// network) to act identically on the x and p blocks.
    pub fn from_orthogonal_modes(modes: &DMatrix<f64>) -> Result<Self> {
        let m = modes.nrows();
        if m == 0 || modes.ncols() != m {
            return Err(Error::invalid("modes", "must be a non-empty square matrix"));
        }
        let dev = (modes.transpose() * modes - DMatrix::identity(m, m)).amax();
        if dev > PHYSICALITY_TOL {
            return Err(Error::invalid(
                "modes",
                format!("not orthogonal (deviation {dev:e})"),
            ));
        }
        let mut matrix = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                matrix[(2 * i, 2 * j)] = modes[(i, j)];
                matrix[(2 * i + 1, 2 * j + 1)] = modes[(i, j)];
            }
        }
        Ok(Self {
            matrix,
            shift: DVector::zeros(2 * m),
        })
    }

    /// Pure displacement by `shift`.
    pub fn displacement(shift: DVector<f64>) -> Result<Self> {
        let dim = shift.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::invalid("shift", "length must be positive and even"));
        }
        Ok(Self {
            matrix: DMatrix::identity(dim, dim),
            shift,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    /// `next ∘ self`: apply `self` first, then `next`.
    pub fn then(&self, next: &SymplecticTransform) -> Result<SymplecticTransform> {
        if next.matrix.nrows() != self.matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                actual: next.matrix.nrows(),
            });
        }
        Ok(Self {
            matrix: &next.matrix * &self.matrix,
            shift: &next.matrix * &self.shift + &next.shift,
        })
    }

    /// Exact inverse, using `S⁻¹ = -Ω Sᵀ Ω`.
    pub fn inverse(&self) -> SymplecticTransform {
        let omega = symplectic_form(self.num_modes());
        let inv = -(&omega * self.matrix.transpose() * &omega);
        let shift = -(&inv * &self.shift);
        Self { matrix: inv, shift }
    }
}

/// Beam-splitter array that routes input mode 0 onto the network with real
/// amplitudes `coefficients` (the first column of the mode matrix).
///
/// The remaining columns come from Gram–Schmidt over the standard basis,
/// taking at each step the basis vector with the largest residual (lowest
/// index on ties), so the completion is deterministic.
pub fn distribution_array(coefficients: &[f64]) -> Result<SymplecticTransform> {
    let m = coefficients.len();
    if m == 0 {
        return Err(Error::invalid("coefficients", "must be non-empty"));
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("coefficients", "entries must be finite"));
    }
    let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(
            "coefficients",
            format!("must have unit norm, got {norm}"),
        ));
    }
    let mut columns: Vec<DVector<f64>> = vec![DVector::from_column_slice(coefficients) / norm];
    let mut used = vec![false; m];
    while columns.len() < m {
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for k in 0..m {
            if used[k] {
                continue;
            }
            let mut r = DVector::zeros(m);
            r[k] = 1.0;
            // two passes keep the residual orthogonal to working precision
            for _ in 0..2 {
                for c in &columns {
                    let proj = c.dot(&r);
                    r -= c * proj;
                }
            }
            let rn = r.norm();
            if best.as_ref().is_none_or(|(_, _, bn)| rn > *bn + 1e-14) {
                best = Some((k, r, rn));
            }
        }
        let (k, r, rn) = best.expect("unused basis vector remains");
        used[k] = true;
        if rn > 1e-8 {
            columns.push(r / rn);
        }
    }
    let modes = DMatrix::from_columns(&columns);
    SymplecticTransform::from_orthogonal_modes(&modes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossMap {
    transmissivities: Vec<f64>,
}

impl LossMap {
    /// Transmissivities must lie in `[0, 1]`; `0` is allowed here as the
    /// full-loss limit used by the analyses.
    pub fn new(transmissivities: Vec<f64>) -> Result<Self> {
        if transmissivities.is_empty() {
            return Err(Error::invalid("transmissivities", "must be non-empty"));
        }
        if let Some(eta) = transmissivities.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::invalid(
                "transmissivities",
                format!("each entry must lie in [0, 1], got {eta}"),
            ));
        }
        Ok(Self { transmissivities })
    }

    pub fn uniform(num_modes: usize, eta: f64) -> Result<Self> {
        Self::new(vec![eta; num_modes])
    }

    pub fn transmissivities(&self) -> &[f64] {
        &self.transmissivities
    }

    pub fn len(&self) -> usize {
        self.transmissivities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmissivities.is_empty()
    }

    /// Elementwise product: the map equivalent to applying `self` then `other`.
    pub fn compose(&self, other: &LossMap) -> Result<LossMap> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(LossMap {
            transmissivities: self
                .transmissivities
                .iter()
                .zip(&other.transmissivities)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneRecord {
    /// `trials × M` x-quadrature outcomes.
    pub samples: DMatrix<f64>,
    pub seed: u64,
}

impl HomodyneRecord {
    pub fn trials(&self) -> usize {
        self.samples.nrows()
    }

    pub fn num_modes(&self) -> usize {
        self.samples.ncols()
    }
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(ρ) σ sqrt(ρ)))²` between two single-mode
/// Gaussian states.
pub fn fidelity_single_mode(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    Ok(log_fidelity_single_mode(a, b)?.exp().min(1.0))
}

/// Natural log of [`fidelity_single_mode`], accurate when the fidelity is
/// close to one.
pub fn log_fidelity_single_mode(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.num_modes() != 1 || b.num_modes() != 1 {
        return Err(Error::invalid(
            "state",
            "single-mode fidelity needs two single-mode states",
        ));
    }
    // Rescale to the vacuum = identity convention, where the closed form reads
    // F = 2 / (sqrt(Δ + δ) - sqrt(δ)) · exp(-½ uᵀ (V₁ + V₂)⁻¹ u).
    let v1 = a.cov() * 4.0;
    let v2 = b.cov() * 4.0;
    let u = (b.mean() - a.mean()) * 2.0;
    let sum = &v1 + &v2;
    let big_delta = sum.determinant();
    let small_delta = ((v1.determinant() - 1.0) * (v2.determinant() - 1.0)).max(0.0);
    let denom = (big_delta + small_delta).sqrt() - small_delta.sqrt();
    if !(denom > 0.0) {
        return Err(Error::Numeric("degenerate fidelity denominator".into()));
    }
    let inv = sum
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular covariance sum".into()))?;
    let quad = (u.transpose() * inv * &u)[(0, 0)];
    Ok((2.0 / denom).ln() - 0.5 * quad)
}

/// Fidelity between two `M`-mode states that share a covariance matrix and
/// differ only in their means: `exp(-¼ Δμᵀ V⁻¹ Δμ)`.
pub fn fidelity_equal_covariance(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    Ok(log_fidelity_equal_covariance(a, b)?.exp())
}

pub fn log_fidelity_equal_covariance(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let dev = (a.cov() - b.cov()).amax();
    if dev > 1e-12 * a.cov().amax().max(1.0) {
        return Err(Error::invalid(
            "cov",
            "states must share a covariance matrix",
        ));
    }
    let delta = b.mean() - a.mean();
    let solved = a
        .cov()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?
        .solve(&delta);
    Ok(-0.25 * delta.dot(&solved))
}
