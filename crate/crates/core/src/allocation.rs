//! Sampling-allocation mathematics.
//!
//! Everything here is a pure function of its inputs. The central objective is
//!
//! ```text
//! S_p(q) = sum_j p_j / sqrt(q_j)
//! ```
//!
//! which governs the achievable simple regret of a history-free policy up to
//! the universal `sqrt(n/T)` factor. This module provides:
//!
//! - [`lp_quasi_norm`]: `(sum_j v_j^r)^(1/r)` for `r` in `(0, 1]`,
//! - [`optimal_active_allocation`]: the unconstrained minimizer `q_j ∝ p_j^(2/3)`,
//! - [`budgeted_allocation`]: the minimizer under the passive floor
//!   `q_j >= (1 - alpha) p_j`, solved by a monotone threshold root-find,
//! - [`alpha_min`]: the smallest budget at which the floor stops binding,
//! - [`active_passive_gap`]: the ratio `R(p)` between the passive and active rates,
//! - [`grid_oracle_allocation`]: a brute-force simplex-grid minimizer used to
//!   cross-check the closed forms in tests.

use crate::error::{Error, Result};
use crate::scalar::{allocation_tol, cast, root_tol, simplex_input_tol, Real};

/// Strictly positive weights over `k` subpopulations, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationDistribution<F: Real = f64> {
    weights: Vec<F>,
}

impl<F: Real> PopulationDistribution<F> {
    /// Validates and wraps a weight vector.
    ///
    /// Requires `k >= 1`, every weight strictly positive and finite, and the
    /// sum within `1e-12` of one (widened for `f32`).
    pub fn new(weights: Vec<F>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution(
                "at least one subpopulation required".into(),
            ));
        }
        for (j, &w) in weights.iter().enumerate() {
            if w <= F::zero() || !w.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "weight {} at index {j} must be strictly positive and finite",
                    w.to_f64().unwrap_or(f64::NAN)
                )));
            }
        }
        let sum: F = weights.iter().copied().sum();
        if (sum - F::one()).abs() > simplex_input_tol::<F>() {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {}, expected 1",
                sum.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { weights })
    }

    /// Divides a strictly positive vector by its sum.
    ///
    /// Used where weights arise from counts or from externally printed values
    /// that carry rounding (e.g. empirical frequencies).
    pub fn normalized(weights: Vec<F>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution(
                "at least one subpopulation required".into(),
            ));
        }
        for (j, &w) in weights.iter().enumerate() {
            if w <= F::zero() || !w.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "weight {} at index {j} must be strictly positive and finite",
                    w.to_f64().unwrap_or(f64::NAN)
                )));
            }
        }
        let sum: F = weights.iter().copied().sum();
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { weights })
    }

    /// Uniform distribution over `k` subpopulations.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution(
                "at least one subpopulation required".into(),
            ));
        }
        let w = F::one() / cast::<F>(k as f64);
        Self::normalized(vec![w; k])
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// Number of subpopulations `k`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // k >= 1 by construction
    }

    pub fn min_weight(&self) -> F {
        self.weights.iter().copied().fold(F::infinity(), F::min)
    }

    pub fn max_weight(&self) -> F {
        self.weights
            .iter()
            .copied()
            .fold(F::neg_infinity(), F::max)
    }
}

/// Expected sampling proportions across subpopulations: nonnegative, sum one.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<F: Real = f64> {
    proportions: Vec<F>,
}

impl<F: Real> Allocation<F> {
    pub fn new(proportions: Vec<F>) -> Result<Self> {
        if proportions.is_empty() {
            return Err(Error::InvalidAllocation(
                "at least one coordinate required".into(),
            ));
        }
        for (j, &q) in proportions.iter().enumerate() {
            if q < F::zero() || !q.is_finite() {
                return Err(Error::InvalidAllocation(format!(
                    "proportion {} at index {j} must be nonnegative and finite",
                    q.to_f64().unwrap_or(f64::NAN)
                )));
            }
        }
        let sum: F = proportions.iter().copied().sum();
        if (sum - F::one()).abs() > allocation_tol::<F>() {
            return Err(Error::InvalidAllocation(format!(
                "proportions sum to {}, expected 1",
                sum.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { proportions })
    }

    pub fn proportions(&self) -> &[F] {
        &self.proportions
    }

    pub fn len(&self) -> usize {
        self.proportions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Solution of the budgeted allocation program at budget `alpha`.
#[derive(Debug, Clone)]
pub struct BudgetSolution<F: Real = f64> {
    /// The optimal allocation `q`.
    pub allocation: Allocation<F>,
    /// The threshold `c*` with `threshold_mass(p, alpha, c*) = 1`.
    pub threshold: F,
    /// `S_p(q)`, the optimal value of the program.
    pub objective_value: F,
    /// The budget the program was solved at.
    pub budget: F,
    /// Indices where the passive floor `(1 - alpha) p_j` is active.
    pub binding_set: Vec<usize>,
}

/// `(sum_j v_j^r)^(1/r)` for `r` in `(0, 1]`; zero for the zero vector.
///
/// Rejects exponents outside `(0, 1]` and negative or non-finite entries.
pub fn lp_quasi_norm<F: Real>(v: &[F], r: F) -> Result<F> {
    if r <= F::zero() || r > F::one() || r.is_nan() {
        return Err(Error::ExponentOutOfRange {
            r: r.to_f64().unwrap_or(f64::NAN),
        });
    }
    for (j, &x) in v.iter().enumerate() {
        if x < F::zero() || !x.is_finite() {
            return Err(Error::NonNegativeRequired {
                index: j,
                value: x.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let sum: F = v.iter().map(|&x| x.powf(r)).sum();
    Ok(sum.powf(F::one() / r))
}

/// `S_p(q) = sum_j p_j / sqrt(q_j)`.
///
/// Errors with [`Error::InfiniteObjective`] when any coordinate with positive
/// weight receives zero mass, where the objective diverges.
pub fn s_value<F: Real>(p: &PopulationDistribution<F>, q: &Allocation<F>) -> Result<F> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "s_value",
            expected: p.len(),
            actual: q.len(),
        });
    }
    let mut sum = F::zero();
    for (j, (&pj, &qj)) in p.weights().iter().zip(q.proportions()).enumerate() {
        if qj <= F::zero() {
            return Err(Error::InfiniteObjective { index: j });
        }
        sum = sum + pj / qj.sqrt();
    }
    Ok(sum)
}

/// The unique minimizer of `S_p` over the open simplex: `q_j ∝ p_j^(2/3)`.
///
/// Its objective value equals `lp_quasi_norm(p, 2/3)`.
pub fn optimal_active_allocation<F: Real>(p: &PopulationDistribution<F>) -> Allocation<F> {
    let two_thirds = cast::<F>(2.0) / cast::<F>(3.0);
    let powered: Vec<F> = p.weights().iter().map(|&x| x.powf(two_thirds)).collect();
    let sum: F = powered.iter().copied().sum();
    Allocation::new(powered.into_iter().map(|x| x / sum).collect())
        .expect("normalized positive vector is a valid allocation")
}

/// Total mass implied by threshold `c`:
/// `sum_j max((1 - alpha) p_j, c * p_j^(2/3))`.
///
/// Nondecreasing and continuous in `c`, with value `1 - alpha` at `c = 0`;
/// the budget solver finds the root of `threshold_mass(..) = 1`.
pub fn threshold_mass<F: Real>(p: &PopulationDistribution<F>, alpha: F, c: F) -> F {
    let two_thirds = cast::<F>(2.0) / cast::<F>(3.0);
    let passive = F::one() - alpha;
    p.weights()
        .iter()
        .map(|&pj| (passive * pj).max(c * pj.powf(two_thirds)))
        .sum()
}

/// Minimizes `S_p(q)` subject to the passive floor `q_j >= (1 - alpha) p_j`.
///
/// The solution has the two-branch form `q_j = max((1 - alpha) p_j, c* p_j^(2/3))`
/// where `c*` is the unique root of [`threshold_mass`]` = 1`, found by bisection
/// on a bracket that provably contains it. At `alpha = 0` the feasible set is
/// the single point `q = p` and no root-find is needed.
pub fn budgeted_allocation<F: Real>(
    p: &PopulationDistribution<F>,
    alpha: F,
) -> Result<BudgetSolution<F>> {
    if alpha < F::zero() || alpha > F::one() || alpha.is_nan() {
        return Err(Error::BudgetOutOfRange {
            alpha: alpha.to_f64().unwrap_or(f64::NAN),
        });
    }
    let two_thirds = cast::<F>(2.0) / cast::<F>(3.0);
    let one_third = F::one() / cast::<F>(3.0);

    if alpha == F::zero() {
        // Only q = p is feasible. Any c <= p_min^(1/3) is consistent with the
        // all-binding solution; report the largest such threshold.
        let allocation = Allocation::new(p.weights().to_vec())?;
        let objective_value = s_value(p, &allocation)?;
        return Ok(BudgetSolution {
            allocation,
            threshold: p.min_weight().powf(one_third),
            objective_value,
            budget: alpha,
            binding_set: (0..p.len()).collect(),
        });
    }

    // Bracket: threshold_mass(p, alpha, 0) = 1 - alpha < 1, and at
    // hi = 2 * p_max^(1/3) / p_min^(2/3) the mass is at least
    // hi * sum_j p_j^(2/3) >= hi >= 2.
    let mut lo = F::zero();
    let mut hi = cast::<F>(2.0) * p.max_weight().powf(one_third) / p.min_weight().powf(two_thirds);
    debug_assert!(threshold_mass(p, alpha, hi) > F::one());

    let tol = root_tol::<F>();
    let mut c = (lo + hi) / cast::<F>(2.0);
    for _ in 0..200 {
        c = (lo + hi) / cast::<F>(2.0);
        let mass = threshold_mass(p, alpha, c);
        if (mass - F::one()).abs() <= tol {
            break;
        }
        if mass < F::one() {
            lo = c;
        } else {
            hi = c;
        }
    }

    let passive = F::one() - alpha;
    let mut q: Vec<F> = Vec::with_capacity(p.len());
    let mut binding_set = Vec::new();
    for (j, &pj) in p.weights().iter().enumerate() {
        let floor = passive * pj;
        let interior = c * pj.powf(two_thirds);
        if floor >= interior {
            binding_set.push(j);
            q.push(floor);
        } else {
            q.push(interior);
        }
    }
    // Renormalize away the root-find residual so q sums to one exactly.
    let sum: F = q.iter().copied().sum();
    for x in &mut q {
        *x = *x / sum;
    }
    let allocation = Allocation::new(q)?;
    let objective_value = s_value(p, &allocation)?;
    Ok(BudgetSolution {
        allocation,
        threshold: c,
        objective_value,
        budget: alpha,
        binding_set,
    })
}

/// Smallest budget at which the budgeted program attains the fully active
/// rate: `1 - p_max^(-1/3) / sum_j p_j^(2/3)`, clamped into `[0, 1)`.
pub fn alpha_min<F: Real>(p: &PopulationDistribution<F>) -> F {
    let two_thirds = cast::<F>(2.0) / cast::<F>(3.0);
    let one_third = F::one() / cast::<F>(3.0);
    let sum: F = p.weights().iter().map(|&x| x.powf(two_thirds)).sum();
    let a = F::one() - p.max_weight().powf(-one_third) / sum;
    // Uniform p gives exactly zero in real arithmetic; snap away the
    // rounding residue (about k eps) the two power sums leave behind.
    let noise_floor = F::epsilon() * cast::<F>(8.0 * p.len() as f64);
    if a <= noise_floor {
        F::zero()
    } else {
        a
    }
}

/// Active-passive gap `R(p) = lp_quasi_norm(p, 1/2)^(1/2) / lp_quasi_norm(p, 2/3)`.
///
/// Always at least one; equals one exactly for the uniform distribution.
pub fn active_passive_gap<F: Real>(p: &PopulationDistribution<F>) -> F {
    let half = F::one() / cast::<F>(2.0);
    let two_thirds = cast::<F>(2.0) / cast::<F>(3.0);
    let passive = lp_quasi_norm(p.weights(), half)
        .expect("valid distribution")
        .sqrt();
    let active = lp_quasi_norm(p.weights(), two_thirds).expect("valid distribution");
    passive / active
}

/// Brute-force minimizer of `S_p` over the simplex grid with step `resolution`,
/// optionally restricted to `q_j >= floor_j`.
///
/// The grid is the set of integer compositions of `m = round(1/resolution)`
/// scaled by `1/m`. The objective is separable and convex per coordinate, so
/// the grid minimum is found exactly by incremental marginal-gain allocation;
/// ties are resolved to the lexicographically smallest grid point (equivalence
/// with raw enumeration is checked in the tests). Limited to `k <= 4`.
pub fn grid_oracle_allocation<F: Real>(
    p: &PopulationDistribution<F>,
    resolution: F,
    constraint_floor: Option<&[F]>,
) -> Result<Allocation<F>> {
    let k = p.len();
    if k > 4 {
        return Err(Error::OracleScaleExceeded { k });
    }
    if resolution < cast::<F>(1e-4) || resolution > cast::<F>(1e-1) || resolution.is_nan() {
        return Err(Error::ResolutionOutOfRange {
            resolution: resolution.to_f64().unwrap_or(f64::NAN),
        });
    }
    let m = (F::one() / resolution)
        .round()
        .to_u64()
        .expect("grid size fits in u64");

    let mut counts: Vec<u64> = vec![0; k];
    if let Some(floors) = constraint_floor {
        if floors.len() != k {
            return Err(Error::DimensionMismatch {
                context: "grid_oracle_allocation floor",
                expected: k,
                actual: floors.len(),
            });
        }
        for (j, &f) in floors.iter().enumerate() {
            if f < F::zero() || !f.is_finite() {
                return Err(Error::NonNegativeRequired {
                    index: j,
                    value: f.to_f64().unwrap_or(f64::NAN),
                });
            }
            // Smallest integer count with count/m >= floor, with a fuzz guard
            // so floors that are exact grid points stay on them.
            let scaled = (f * cast::<F>(m as f64) - cast::<F>(1e-9)).ceil();
            counts[j] = scaled.max(F::zero()).to_u64().unwrap_or(u64::MAX);
        }
    }
    let used: u64 = counts.iter().sum();
    if used > m {
        return Err(Error::EmptyFeasibleGrid);
    }

    // Marginal decrease of p_j / sqrt(c_j / m) from adding one unit to c_j.
    // The common sqrt(m) factor is dropped; it does not affect comparisons.
    let gain = |pj: F, c: u64| -> F {
        if c == 0 {
            F::infinity()
        } else {
            let c = cast::<F>(c as f64);
            pj * (c.sqrt().recip() - (c + F::one()).sqrt().recip())
        }
    };

    let weights = p.weights();
    for _ in used..m {
        // Ties go to the highest index, which yields the lexicographically
        // smallest count vector among grid optima.
        let mut best = 0usize;
        let mut best_gain = F::neg_infinity();
        for j in 0..k {
            let g = gain(weights[j], counts[j]);
            if g >= best_gain {
                best_gain = g;
                best = j;
            }
        }
        counts[best] += 1;
    }

    let m_f = cast::<F>(m as f64);
    Allocation::new(counts.iter().map(|&c| cast::<F>(c as f64) / m_f).collect())
}
