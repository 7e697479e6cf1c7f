//! Unconstrained maximization over a small ground set: exact enumeration
//! and the two double-greedy variants. The sieves run one of these on
//! their first candidate set after the pass, and the solver's
//! approximation ratio γ determines the sieve threshold coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ElementId, MeteredOracle, Solution};

/// Largest ground set the exact enumerators accept (2^n evaluations).
pub const EXACT_MAX_GROUND: usize = 22;

/// Which unconstrained solver a run uses, with its guaranteed ratio γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum SolverKind {
    /// Exhaustive enumeration, γ = 1.
    #[serde(rename = "exact")]
    #[value(name = "exact")]
    Exact,
    /// Deterministic double greedy, γ = 1/3.
    #[serde(rename = "dg")]
    #[value(name = "dg")]
    DoubleGreedy,
    /// Randomized double greedy, γ = 1/2 in expectation over seeds.
    #[serde(rename = "rdg")]
    #[value(name = "rdg")]
    RandomDoubleGreedy,
}

impl SolverKind {
    pub fn gamma(self) -> f64 {
        match self {
            SolverKind::Exact => 1.0,
            SolverKind::DoubleGreedy => 1.0 / 3.0,
            SolverKind::RandomDoubleGreedy => 0.5,
        }
    }
}

/// A solver choice plus the seed used by the randomized variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnconstrainedSolver {
    pub kind: SolverKind,
    pub seed: u64,
}

impl UnconstrainedSolver {
    pub fn new(kind: SolverKind, seed: u64) -> Self {
        UnconstrainedSolver { kind, seed }
    }

    pub fn gamma(&self) -> f64 {
        self.kind.gamma()
    }

    /// Maximizes f over subsets of `ground` (strictly increasing ids).
    /// `empty_value` is the already-known f(∅), so solving over an empty
    /// ground set costs no queries.
    pub fn solve(
        &self,
        oracle: &MeteredOracle<'_>,
        ground: &[ElementId],
        empty_value: f64,
    ) -> Result<Solution> {
        match self.kind {
            SolverKind::Exact => exact_unconstrained(oracle, ground, empty_value),
            SolverKind::DoubleGreedy => double_greedy_det(oracle, ground, empty_value),
            SolverKind::RandomDoubleGreedy => {
                double_greedy_rand(oracle, ground, empty_value, self.seed)
            }
        }
    }
}

fn check_ground(ground: &[ElementId]) -> Result<()> {
    if ground.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("ground set must be strictly increasing"));
    }
    Ok(())
}

/// Exhaustive unconstrained maximum over subsets of `ground`. Ties break
/// toward the subset whose bitmask over `ground` is smallest, making the
/// returned set independent of accidental value collisions elsewhere.
pub fn exact_unconstrained(
    oracle: &MeteredOracle<'_>,
    ground: &[ElementId],
    empty_value: f64,
) -> Result<Solution> {
    check_ground(ground)?;
    let s = ground.len();
    if s > EXACT_MAX_GROUND {
        return Err(Error::too_large(format!(
            "exact unconstrained solve over {s} > {EXACT_MAX_GROUND} elements"
        )));
    }
    let mut best = Solution::empty(empty_value);
    let mut buf: Vec<ElementId> = Vec::with_capacity(s);
    for mask in 1u32..(1u32 << s) {
        buf.clear();
        for (bit, &id) in ground.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                buf.push(id);
            }
        }
        let value = oracle.evaluate(&buf);
        if value > best.value {
            best = Solution { ids: buf.clone(), value };
        }
    }
    Ok(best)
}

/// Deterministic double greedy: grows X from ∅ and shrinks Y from the full
/// ground set, one element at a time in ascending id order. For each
/// element the add-gain a = f(u | X) is weighed against the remove-gain
/// r = f(Y \ u) - f(Y); the element is kept iff a ≥ r. Guarantees
/// f(X) ≥ max_S f(S) / 3 for non-negative submodular f.
pub fn double_greedy_det(
    oracle: &MeteredOracle<'_>,
    ground: &[ElementId],
    empty_value: f64,
) -> Result<Solution> {
    double_greedy(oracle, ground, empty_value, &mut |a, r| a >= r)
}

/// Randomized double greedy: keeps each element with probability
/// a⁺ / (a⁺ + r⁺), drawn from a ChaCha stream seeded by `seed` (one draw
/// per element, so a run is fully reproducible). Achieves half the
/// optimum in expectation over seeds.
pub fn double_greedy_rand(
    oracle: &MeteredOracle<'_>,
    ground: &[ElementId],
    empty_value: f64,
    seed: u64,
) -> Result<Solution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    double_greedy(oracle, ground, empty_value, &mut |a, r| {
        let a_pos = a.max(0.0);
        let r_pos = r.max(0.0);
        let x: f64 = rng.random();
        if a_pos + r_pos == 0.0 {
            true
        } else {
            x < a_pos / (a_pos + r_pos)
        }
    })
}

fn double_greedy(
    oracle: &MeteredOracle<'_>,
    ground: &[ElementId],
    empty_value: f64,
    keep: &mut dyn FnMut(f64, f64) -> bool,
) -> Result<Solution> {
    check_ground(ground)?;
    if ground.is_empty() {
        return Ok(Solution::empty(empty_value));
    }
    let mut lower: Vec<ElementId> = Vec::with_capacity(ground.len());
    let mut lower_value = empty_value;
    let mut upper: Vec<ElementId> = ground.to_vec();
    let mut upper_value = oracle.evaluate(&upper);

    for &u in ground {
        // lower ∪ {u}: u is always larger than everything in lower.
        let mut with_u = lower.clone();
        with_u.push(u);
        let add_value = oracle.evaluate(&with_u);
        let a = add_value - lower_value;

        let pos = upper.binary_search(&u).expect("u still in upper set");
        let mut without_u = upper.clone();
        without_u.remove(pos);
        let drop_value = if without_u.is_empty() { empty_value } else { oracle.evaluate(&without_u) };
        let r = drop_value - upper_value;

        if keep(a, r) {
            lower = with_u;
            lower_value = add_value;
        } else {
            upper = without_u;
            upper_value = drop_value;
        }
    }
    debug_assert_eq!(lower, upper);
    Ok(Solution { ids: lower, value: lower_value })
}

/// Threshold coefficient for the cardinality sieve run with an
/// unconstrained solver of ratio γ.
///
/// The sieve's analysis balances three cases: a filled first candidate set
/// certifies k · (threshold per slot); otherwise combining the two
/// candidate sets bounds the best feasible value by
/// 2·f(best sieve set) + f(S1 ∩ best) + 2τ, and the post-pass solve
/// recovers f(S1 ∩ best) up to 1/γ. Equalizing the cases yields
/// τ = v · γ/(4γ + 1); with the exact solver (γ = 1) the familiar v/6.
pub fn cardinality_threshold_coeff(gamma: f64) -> f64 {
    gamma / (4.0 * gamma + 1.0)
}

/// Threshold coefficient for the d-knapsack sieve with solver ratio γ.
///
/// Same balancing as the cardinality case, but the density test loses a
/// 2τ term per dimension on each side of the exchange argument, giving
/// τ = v · γ/(2γ + 1 + 4dγ); with γ = 1/2 the familiar v/(4(d+1)).
pub fn knapsack_threshold_coeff(gamma: f64, dims: usize) -> f64 {
    let d = dims as f64;
    gamma / (2.0 * gamma + 1.0 + 4.0 * d * gamma)
}
