//! Geometric guess grid shared by the unknown-optimum sieves.
//!
//! Guesses are powers (1+ε)^i keyed by the integer exponent i, so that an
//! instance created lazily mid-stream and an instance created up front for
//! the same exponent see bit-identical guess values. Range membership is
//! computed in log space with a small inclusive guard band: a guess
//! sitting exactly on a range endpoint is kept, never dropped to rounding.

use std::collections::BTreeMap;

/// Relative width of the guard band applied to exponent bounds.
pub const EXPONENT_GUARD: f64 = 1e-12;

/// Integer exponents i with lower ≤ (1+ε)^i ≤ upper, widened inclusively
/// by the guard band. `None` when the range is empty or degenerate.
pub fn exponent_bounds(eps: f64, lower: f64, upper: f64) -> Option<(i64, i64)> {
    if !(eps > 0.0) || !(lower > 0.0) || !(upper > 0.0) || upper < lower {
        return None;
    }
    let base = (1.0 + eps).ln();
    let lo_t = lower.ln() / base;
    let hi_t = upper.ln() / base;
    let lo = (lo_t - EXPONENT_GUARD * lo_t.abs().max(1.0)).ceil() as i64;
    let hi = (hi_t + EXPONENT_GUARD * hi_t.abs().max(1.0)).floor() as i64;
    if lo > hi {
        None
    } else {
        Some((lo, hi))
    }
}

/// (1+ε)^i by square-and-multiply with a fixed operation order, so the
/// same (ε, i) pair always yields the same bits.
pub fn grid_value(eps: f64, exponent: i64) -> f64 {
    let mut result = 1.0f64;
    let mut base = if exponent >= 0 { 1.0 + eps } else { 1.0 / (1.0 + eps) };
    let mut e = exponent.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        base *= base;
        e >>= 1;
    }
    result
}

/// Ordered collection of per-guess instances keyed by exponent. Iteration
/// is always in ascending exponent order, which fixes tie-breaking
/// downstream.
#[derive(Debug, Clone)]
pub struct GuessGrid<T> {
    eps: f64,
    instances: BTreeMap<i64, T>,
}

impl<T> GuessGrid<T> {
    pub fn new(eps: f64) -> Self {
        GuessGrid { eps, instances: BTreeMap::new() }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Restricts the grid to guesses within [lower, upper]: instances that
    /// fell out of range are dropped, missing exponents are created via
    /// `make(exponent, guess)`. Instances already in range are kept as
    /// they are (they are never rebuilt).
    pub fn update_range<F: FnMut(i64, f64) -> T>(&mut self, lower: f64, upper: f64, mut make: F) {
        match exponent_bounds(self.eps, lower, upper) {
            None => self.instances.clear(),
            Some((lo, hi)) => {
                self.instances.retain(|&i, _| i >= lo && i <= hi);
                for i in lo..=hi {
                    let eps = self.eps;
                    self.instances.entry(i).or_insert_with(|| make(i, grid_value(eps, i)));
                }
            }
        }
    }

    /// Removes and returns all instances in ascending exponent order.
    pub fn drain(&mut self) -> Vec<(i64, T)> {
        std::mem::take(&mut self.instances).into_iter().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &T)> {
        self.instances.iter().map(|(&i, t)| (i, t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (i64, &mut T)> {
        self.instances.iter_mut().map(|(&i, t)| (i, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_value_matches_powers() {
        assert_eq!(grid_value(1.0, 0), 1.0);
        assert_eq!(grid_value(1.0, 3), 8.0);
        assert_eq!(grid_value(1.0, -1), 0.5);
        assert_eq!(grid_value(0.5, 2), 2.25);
        let v = grid_value(0.1, 7);
        assert!((v - 1.1f64.powi(7)).abs() < 1e-12);
    }

    #[test]
    fn exponent_bounds_are_inclusive_at_endpoints() {
        // With ε = 1 the guesses are powers of two; [1, 8] must include
        // exponents 0..=3 even though 1 and 8 sit exactly on the ends.
        assert_eq!(exponent_bounds(1.0, 1.0, 8.0), Some((0, 3)));
        // [m, km] with m = 1, k = 4: guesses {1, 2, 4}.
        assert_eq!(exponent_bounds(1.0, 1.0, 4.0), Some((0, 2)));
        // Range covering no power of 1.5: (1.5^1, 1.5^2) exclusive.
        assert_eq!(exponent_bounds(0.5, 1.6, 2.2), None);
        // Degenerate inputs.
        assert_eq!(exponent_bounds(0.5, 0.0, 4.0), None);
        assert_eq!(exponent_bounds(0.5, 4.0, 2.0), None);
    }

    #[test]
    fn update_range_creates_keeps_and_drops() {
        let mut grid: GuessGrid<String> = GuessGrid::new(1.0);
        grid.update_range(1.0, 4.0, |i, v| format!("first {i} {v}"));
        let exps: Vec<i64> = grid.iter().map(|(i, _)| i).collect();
        assert_eq!(exps, vec![0, 1, 2]);

        // Range moves up: exponent 0, 1 drop, 2 survives untouched, 3..5
        // are created fresh.
        grid.update_range(3.0, 32.0, |i, v| format!("second {i} {v}"));
        let entries: Vec<(i64, String)> = grid.iter().map(|(i, s)| (i, s.clone())).collect();
        assert_eq!(
            entries,
            vec![
                (2, "first 2 4".to_string()),
                (3, "second 3 8".to_string()),
                (4, "second 4 16".to_string()),
                (5, "second 5 32".to_string()),
            ]
        );

        grid.update_range(-1.0, 1.0, |_, _| unreachable!("empty range clears"));
        assert!(grid.is_empty());
    }

    #[test]
    fn lazy_and_eager_instances_get_identical_guesses() {
        for eps in [0.05, 0.1, 0.2, 0.5, 1.0] {
            for i in -60i64..=60 {
                let eager = grid_value(eps, i);
                let lazy = grid_value(eps, i);
                assert_eq!(eager.to_bits(), lazy.to_bits());
            }
        }
    }
}
