//! Photon-budget allocation for separable probes.
//!
//! Minimizes `Σ_m w_m² (η_m/s(N_m) + 1 - η_m) / 4` over `N_m >= 0`,
//! `Σ N_m = N_S` by projected gradient descent with backtracking, restarted
//! from several points of the simplex.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::inverse_squeeze_factor;

pub const DEFAULT_RESTARTS: usize = 20;
const MAX_ITERS: usize = 20_000;
const RESTART_SEED: u64 = 0x5eed_a110c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub photons: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Objective of the separable allocation problem: the variance of the
/// weighted homodyne estimator with independent squeezed vacua.
pub fn separable_objective(weights: &[f64], transmissivities: &[f64], photons: &[f64]) -> f64 {
    weights
        .iter()
        .zip(transmissivities)
        .zip(photons)
        .map(|((w, eta), n)| w * w * (eta * inverse_squeeze_factor(*n) + 1.0 - eta) / 4.0)
        .sum()
}

fn gradient(coef: &[f64], photons: &[f64]) -> Vec<f64> {
    coef.iter()
        .zip(photons)
        .map(|(c, n)| {
            if *c == 0.0 {
                return 0.0;
            }
            // d/dN (sqrt(N+1) - sqrt(N))² = -(sqrt(N+1) - sqrt(N))² / sqrt(N (N+1))
            let n = n.max(1e-12);
            -c * inverse_squeeze_factor(n) / (n * (n + 1.0)).sqrt() / 4.0
        })
        .collect()
}

/// Euclidean projection onto `{x >= 0, Σ x = total}`.
pub fn project_simplex(y: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - total) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Descends on the photon-dependent part of the objective only; the
/// constant offset would swamp its differences in rounding.
fn descend(coef: &[f64], total: f64, start: Vec<f64>) -> (Vec<f64>, f64, usize, bool) {
    let objective = |x: &[f64]| -> f64 {
        coef.iter()
            .zip(x)
            .map(|(c, n)| c * inverse_squeeze_factor(*n) / 4.0)
            .sum::<f64>()
    };
    let mut x = start;
    let mut fx = objective(&x);
    let mut step = 1.0;
    let tol = 1e-13 * (1.0 + total);
    for iter in 0..MAX_ITERS {
        let g = gradient(coef, &x);
        let mut moved = false;
        let mut t = step * 4.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let next = project_simplex(&trial, total);
            let diff: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
            let lin: f64 = g.iter().zip(&diff).map(|(a, b)| a * b).sum();
            let sq: f64 = diff.iter().map(|d| d * d).sum();
            let f_next = objective(&next);
            if f_next <= fx + lin + sq / (2.0 * t) + 1e-18 {
                let dist = sq.sqrt();
                let decrease = fx - f_next;
                x = next;
                fx = f_next;
                step = t;
                moved = dist > tol && decrease > 1e-15 * fx.abs();
                break;
            }
            t *= 0.5;
            if t < 1e-30 {
                break;
            }
        }
        if !moved {
            return (x, fx, iter + 1, true);
        }
    }
    (x, fx, MAX_ITERS, false)
}

/// `-d/dN (sqrt(N+1) - sqrt(N))² / 4`, decreasing from +inf at 0 to 0.
fn marginal_gain(n: f64) -> f64 {
    inverse_squeeze_factor(n) / (n * (n + 1.0)).sqrt() / 4.0
}

/// Solves `marginal_gain(N) = y` by bisection.
fn invert_gain(y: f64) -> f64 {
    let mut hi = 1.0;
    while marginal_gain(hi) > y {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if marginal_gain(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Stationary point of the convex problem: every node with `c_m > 0` sits
/// at `c_m · gain(N_m) = λ`, with `λ` found by geometric bisection on the
/// budget constraint.
fn water_fill(coef: &[f64], total: f64) -> Vec<f64> {
    let fill = |lambda: f64| -> Vec<f64> {
        coef.iter()
            .map(|c| {
                if *c > 0.0 {
                    invert_gain(lambda / c)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let spent = |lambda: f64| fill(lambda).iter().sum::<f64>();
    let (mut lo, mut hi) = (1e-12, 1.0);
    while spent(lo) < total {
        lo *= 1e-3;
    }
    while spent(hi) > total {
        hi *= 1e3;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if spent(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = fill((lo * hi).sqrt());
    let s: f64 = x.iter().sum();
    x.iter().map(|v| v * total / s).collect()
}

/// Best allocation over `restarts` random starts plus the equal and the
/// weight-proportional starts, finished by an exact stationarity solve.
pub fn optimize_allocation(
    weights: &[f64],
    transmissivities: &[f64],
    budget: f64,
    restarts: usize,
) -> Result<Allocation> {
    let m = weights.len();
    if m == 0 || transmissivities.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: transmissivities.len(),
        });
    }
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::invalid(
            "photon_budget",
            format!("must be finite and non-negative, got {budget}"),
        ));
    }
    let coef: Vec<f64> = weights
        .iter()
        .zip(transmissivities)
        .map(|(w, eta)| w * w * eta)
        .collect();
    let constant: f64 = weights
        .iter()
        .zip(transmissivities)
        .map(|(w, eta)| w * w * (1.0 - eta) / 4.0)
        .sum();
    let active = coef.iter().filter(|c| **c > 0.0).count();
    if budget == 0.0 || active == 0 {
        let photons = if active == 0 {
            vec![budget / m as f64; m]
        } else {
            vec![0.0; m]
        };
        let objective = separable_objective(weights, transmissivities, &photons);
        return Ok(Allocation {
            photons,
            objective,
            iterations: 0,
            converged: true,
        });
    }

    let mut starts = vec![vec![budget / m as f64; m]];
    let coef_sum: f64 = coef.iter().sum();
    starts.push(coef.iter().map(|c| budget * c / coef_sum).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    for _ in 0..restarts {
        // uniform point on the simplex via normalized exponentials
        let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        starts.push(e.iter().map(|v| budget * v / s).collect());
    }

    let mut best: Option<Allocation> = None;
    let mut total_iters = 0;
    for start in starts {
        let (x, fx, iters, converged) = descend(&coef, budget, start);
        let fx = fx + constant;
        total_iters += iters;
        if best.as_ref().is_none_or(|b| fx < b.objective) {
            best = Some(Allocation {
                photons: x,
                objective: fx,
                iterations: 0,
                converged,
            });
        }
    }
    let mut best = best.expect("at least one start");
    let polished = water_fill(&coef, budget);
    let polished_obj = separable_objective(weights, transmissivities, &polished);
    if polished_obj <= best.objective {
        best.photons = polished;
        best.objective = polished_obj;
        best.converged = true;
    }
    best.iterations = total_iters;
    Ok(best)
}
