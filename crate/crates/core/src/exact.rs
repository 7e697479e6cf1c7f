//! Brute-force reference optimum for desk-scale instances, and the ratio
//! check used to verify approximation guarantees against it.

use crate::error::{Error, Result};
use crate::model::{Constraint, ElementId, SetFunction, Solution};

/// Largest ground set the brute-force optimum accepts (2^n subsets).
pub const EXACT_OPT_MAX_GROUND: usize = 22;

/// Output of [`exact_opt`]: the best feasible subset, its value, and how
/// many subsets were feasible at all.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub opt_ids: Vec<ElementId>,
    pub opt_value: f64,
    pub feasible_count: u64,
}

/// Enumerates every subset of the ground set, keeps the feasible ones,
/// and returns the maximum-value subset. Feasibility uses exact cost
/// arithmetic; only feasible subsets are evaluated, so the oracle never
/// sees an infeasible set. Ties break toward the smallest bitmask, i.e.
/// the lexicographically first subset in enumeration order.
pub fn exact_opt(function: &dyn SetFunction, constraint: &Constraint) -> Result<ExactResult> {
    let n = function.ground_size();
    if n > EXACT_OPT_MAX_GROUND {
        return Err(Error::too_large(format!(
            "exhaustive optimum over {n} > {EXACT_OPT_MAX_GROUND} elements"
        )));
    }
    let mut best: Option<Solution> = None;
    let mut feasible_count = 0u64;
    let mut buf: Vec<ElementId> = Vec::with_capacity(n);
    for mask in 0u64..(1u64 << n) {
        buf.clear();
        for i in 0..n as u32 {
            if mask & (1 << i) != 0 {
                buf.push(i);
            }
        }
        if !constraint.is_feasible(&buf, None)? {
            continue;
        }
        feasible_count += 1;
        let value = function.evaluate(&buf);
        match &best {
            Some(b) if value <= b.value => {}
            _ => best = Some(Solution { ids: buf.clone(), value }),
        }
    }
    // The empty set is feasible under every constraint this crate builds
    // (capacities are non-negative, k ≥ 0), so `best` is always present.
    let best = best
        .ok_or_else(|| Error::input("no feasible subset exists, not even the empty set"))?;
    Ok(ExactResult {
        opt_ids: best.ids,
        opt_value: best.value,
        feasible_count,
    })
}

/// Result of comparing a run against the exact optimum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatioCheck {
    pub pass: bool,
    /// run value / optimum value; `None` when the optimum is zero (any
    /// non-negative run passes trivially).
    pub margin: Option<f64>,
}

/// Numeric slack for ratio comparisons: absolute for small optima,
/// relative for large ones.
pub const RATIO_SLACK: f64 = 1e-9;

/// Checks `run_value ≥ bound · opt` up to [`RATIO_SLACK`]. A zero optimum
/// passes automatically: every non-negative value meets any ratio of 0.
pub fn verify_ratio(run_value: f64, opt_value: f64, bound: f64) -> RatioCheck {
    if opt_value <= 0.0 {
        return RatioCheck { pass: run_value >= 0.0, margin: None };
    }
    let slack = RATIO_SLACK * opt_value.max(1.0);
    RatioCheck {
        pass: run_value >= bound * opt_value - slack,
        margin: Some(run_value / opt_value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CostMatrix;
    use crate::oracles::CutOracle;
    use num::BigRational;

    fn path3() -> CutOracle {
        CutOracle::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)], false).unwrap()
    }

    fn rational(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn cardinality_optimum_on_path() {
        let f = path3();
        let res = exact_opt(&f, &Constraint::Cardinality { k: 1 }).unwrap();
        assert_eq!(res.opt_ids, vec![1]);
        assert_eq!(res.opt_value, 2.0);
        // ∅, {0}, {1}, {2}.
        assert_eq!(res.feasible_count, 4);
    }

    #[test]
    fn ties_break_toward_the_smallest_mask() {
        // k = 3 allows {1} and {0, 2}, both cutting 2; {1} is mask 2,
        // {0, 2} is mask 5.
        let f = path3();
        let res = exact_opt(&f, &Constraint::Cardinality { k: 3 }).unwrap();
        assert_eq!(res.opt_ids, vec![1]);
        assert_eq!(res.feasible_count, 8);
    }

    #[test]
    fn knapsack_optimum_respects_exact_costs() {
        let f = path3();
        // Costs 1, 2, 1 under capacity 2: {1} fits exactly, {0, 1} does
        // not, {0, 2} does.
        let costs = CostMatrix::from_rows(vec![vec![rational(1), rational(2), rational(1)]]).unwrap();
        let constraint = Constraint::DKnapsack { costs, capacity: rational(2) };
        let res = exact_opt(&f, &constraint).unwrap();
        // {1} (mask 2) and {0, 2} (mask 5) both cut 2; smaller mask wins.
        assert_eq!(res.opt_ids, vec![1]);
        assert_eq!(res.opt_value, 2.0);
        // ∅, {0}, {1}, {2}, {0, 2}.
        assert_eq!(res.feasible_count, 5);
    }

    #[test]
    fn oversized_ground_is_rejected() {
        let f = CutOracle::new(23, vec![], false).unwrap();
        assert!(matches!(
            exact_opt(&f, &Constraint::Cardinality { k: 1 }),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn ratio_check_passes_at_and_above_the_bound() {
        assert!(verify_ratio(2.0, 6.0, 1.0 / 3.0).pass);
        assert!(verify_ratio(2.0 - 1e-12, 6.0, 1.0 / 3.0).pass);
        assert!(!verify_ratio(1.9, 6.0, 1.0 / 3.0).pass);
        let check = verify_ratio(3.0, 6.0, 1.0 / 3.0);
        assert_eq!(check.margin, Some(0.5));
    }

    #[test]
    fn zero_optimum_passes_any_bound() {
        let check = verify_ratio(0.0, 0.0, 1.0 / 6.0);
        assert!(check.pass);
        assert_eq!(check.margin, None);
    }
}
