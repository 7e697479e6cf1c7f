//! Streaming sieves under d simultaneous knapsack constraints, plus the
//! standardization that reduces arbitrary positive costs and capacities
//! to a common budget with all costs at least 1.
//!
//! The threshold instances mirror the cardinality ones with two changes.
//! Acceptance is by value density: an element joins a candidate set only
//! if its marginal gain per unit of cost clears 2τ/b in every dimension
//! and it fits the remaining budget exactly. And an element that is both
//! expensive (cost at least b/2 in some dimension) and dense enough is a
//! "big element": a feasible singleton already worth τ. The known-optimum
//! sieve stops the stream on the first big element; the guessing sieves
//! record the latest one per instance and keep streaming, because a guess
//! that is too high must not end the run for the guesses below it.

use num::{BigRational, ToPrimitive};

use crate::error::{Error, Result};
use crate::grid::GuessGrid;
use crate::model::{
    consider_candidate, run_stream, snapshot_resident, CandidateSet, Constraint, CostMatrix,
    ElementId, GroundElement, InstanceSnapshot, MeteredOracle, SetFunction, SieveRun, Solution,
    StepOutcome, StreamAlgorithm,
};
use crate::unconstrained::UnconstrainedSolver;

/// Inclusive guard band for float density comparisons, mirroring the
/// grid's endpoint handling: an element sitting exactly on the threshold
/// is accepted, never lost to rounding.
const DENSITY_GUARD: f64 = 1e-12;

fn density_meets(value: f64, threshold: f64) -> bool {
    value >= threshold - DENSITY_GUARD * threshold.abs().max(1.0)
}

/// A d-knapsack instance rescaled to a single shared budget `capacity`
/// with every cost in [1, capacity]. Rescaling is exact and preserves the
/// feasible family: subsets fit after standardization iff they fit
/// before.
#[derive(Debug, Clone)]
pub struct StandardizedInstance {
    pub costs: CostMatrix,
    pub capacity: BigRational,
    /// Largest original capacity (the common budget before cost
    /// rescaling).
    pub cap_scale: BigRational,
    /// Smallest capacity-normalized original cost; dividing by it makes
    /// the smallest cost exactly 1.
    pub cost_scale: BigRational,
}

impl StandardizedInstance {
    /// Checks the standardization postconditions: capacity ≥ 1 and every
    /// cost in [1, capacity]. The sieves require these bounds (they cap
    /// candidate-set sizes and legitimize the big-element rule), so they
    /// refuse instances that fail.
    pub fn validate(&self) -> Result<()> {
        let one = BigRational::from_integer(1.into());
        if self.capacity < one {
            return Err(Error::contract(format!(
                "standardized capacity {} is below 1",
                self.capacity
            )));
        }
        for j in 0..self.costs.len() {
            for (i, c) in self.costs.column(j).iter().enumerate() {
                if *c < one {
                    return Err(Error::contract(format!(
                        "standardized cost of element {j} in dimension {i} is {c} < 1"
                    )));
                }
                if *c > self.capacity {
                    return Err(Error::contract(format!(
                        "standardized cost of element {j} in dimension {i} is {c} > capacity {}",
                        self.capacity
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.costs.dims()
    }

    pub fn capacity_f64(&self) -> f64 {
        self.capacity.to_f64().unwrap_or(f64::NAN)
    }

    pub fn constraint(&self) -> Constraint {
        Constraint::DKnapsack {
            costs: self.costs.clone(),
            capacity: self.capacity.clone(),
        }
    }
}

/// Rescales a d-knapsack instance with per-dimension capacities to the
/// standard form. With b' the largest capacity, each cost is first
/// normalized to the common budget (multiplied by b'/b_i), then all costs
/// are divided by the smallest normalized cost c', and the shared
/// capacity becomes b'/c'. All arithmetic is exact, so the feasible
/// subsets are preserved verbatim, and afterwards the smallest cost is
/// exactly 1.
///
/// Costs must be positive, and no cost may exceed its dimension's
/// capacity (such an element could never be packed; drop it upstream).
pub fn standardize(costs: &CostMatrix, capacities: &[BigRational]) -> Result<StandardizedInstance> {
    let zero = BigRational::from_integer(0.into());
    if capacities.len() != costs.dims() {
        return Err(Error::input(format!(
            "{} capacities given for {} cost dimensions",
            capacities.len(),
            costs.dims()
        )));
    }
    if capacities.iter().any(|b| *b <= zero) {
        return Err(Error::input("capacities must be positive"));
    }
    for j in 0..costs.len() {
        for (i, c) in costs.column(j).iter().enumerate() {
            if *c <= zero {
                return Err(Error::input(format!(
                    "cost of element {j} in dimension {i} must be positive, got {c}"
                )));
            }
            if c > &capacities[i] {
                return Err(Error::input(format!(
                    "cost of element {j} in dimension {i} exceeds capacity {}; the element can never be packed",
                    capacities[i]
                )));
            }
        }
    }

    let cap_scale = capacities.iter().max().cloned().expect("dims >= 1");

    // Capacity-normalized costs: scaled[i][j] = b' * c_ij / b_i.
    let mut scaled_columns: Vec<Vec<BigRational>> = Vec::with_capacity(costs.len());
    for j in 0..costs.len() {
        let col = costs
            .column(j)
            .iter()
            .zip(capacities)
            .map(|(c, b)| &cap_scale * c / b)
            .collect();
        scaled_columns.push(col);
    }

    let cost_scale = scaled_columns
        .iter()
        .flatten()
        .min()
        .cloned()
        // No elements: nothing to rescale, keep the budget as is.
        .unwrap_or_else(|| BigRational::from_integer(1.into()));

    let columns = scaled_columns
        .into_iter()
        .map(|col| col.into_iter().map(|c| c / &cost_scale).collect())
        .collect();
    let capacity = &cap_scale / &cost_scale;

    let standardized = StandardizedInstance {
        costs: CostMatrix::from_columns(costs.dims(), columns)?,
        capacity,
        cap_scale,
        cost_scale,
    };
    standardized.validate()?;
    Ok(standardized)
}

/// Largest singleton value-to-cost ratio over the given elements, the
/// quantity the known-density sieve takes as input. The optimum always
/// lies in [density_max, capacity · density_max] for a standardized
/// instance.
pub fn density_max(function: &dyn SetFunction, elements: &[GroundElement]) -> f64 {
    let mut best = 0.0f64;
    for e in elements {
        let singleton = function.evaluate(&[e.id]);
        for &c in &e.costs_f64 {
            best = best.max(singleton / c);
        }
    }
    best
}

/// Parameters shared by the three knapsack sieves.
#[derive(Debug, Clone)]
pub struct KnapsackParams {
    /// Threshold coefficient: τ = coeff · guess. 1/(4(d+1)) for the exact
    /// unconstrained solver; see
    /// [`crate::unconstrained::knapsack_threshold_coeff`].
    pub coeff: f64,
    pub solver: UnconstrainedSolver,
}

impl KnapsackParams {
    pub fn new(coeff: f64, solver: UnconstrainedSolver) -> Result<Self> {
        if !(coeff > 0.0 && coeff < 1.0) {
            return Err(Error::parameter(format!(
                "threshold coefficient must lie in (0, 1), got {coeff}"
            )));
        }
        Ok(KnapsackParams { coeff, solver })
    }
}

/// One guess's working state for the knapsack sieves.
#[derive(Debug, Clone)]
struct DkInstance {
    guess: f64,
    /// Density floor 2τ/b (τ = coeff · guess) for acceptance and the
    /// big-element rule.
    density_threshold: f64,
    s1: CandidateSet,
    s2: CandidateSet,
    big: Option<(ElementId, f64)>,
}

impl DkInstance {
    fn new(guess: f64, coeff: f64, capacity_f64: f64, empty_value: f64, dims: usize) -> Self {
        DkInstance {
            guess,
            density_threshold: 2.0 * coeff * guess / capacity_f64,
            s1: CandidateSet::new(empty_value, dims),
            s2: CandidateSet::new(empty_value, dims),
            big: None,
        }
    }

    /// Offers an element. `singleton` must be `Some(f({u}))` whenever the
    /// element is big in some dimension (cost ≥ capacity/2); it may be
    /// `None` otherwise. Returns true when the element qualified as a big
    /// element, in which case it was recorded and not offered to S1/S2.
    fn offer(
        &mut self,
        element: &GroundElement,
        singleton: Option<f64>,
        capacity: &BigRational,
        oracle: &MeteredOracle<'_>,
    ) -> Result<bool> {
        if let Some(value) = singleton {
            for (i, c) in element.costs.iter().enumerate() {
                let is_big_dim = &(c + c) >= capacity;
                if is_big_dim && density_meets(value / element.costs_f64[i], self.density_threshold)
                {
                    // Later qualifying elements overwrite: the record
                    // always holds the most recent one.
                    self.big = Some((element.id, value));
                    return Ok(true);
                }
            }
        }
        if self.s1.fits_with(&element.costs, capacity) {
            let val = self.s1.value_with(oracle, element.id)?;
            let marginal = val - self.s1.value();
            if element
                .costs_f64
                .iter()
                .all(|&c| density_meets(marginal / c, self.density_threshold))
            {
                self.s1.insert(element.id, val, &element.costs)?;
                return Ok(false);
            }
        }
        if self.s2.fits_with(&element.costs, capacity) {
            let val = self.s2.value_with(oracle, element.id)?;
            let marginal = val - self.s2.value();
            if element
                .costs_f64
                .iter()
                .all(|&c| density_meets(marginal / c, self.density_threshold))
            {
                self.s2.insert(element.id, val, &element.costs)?;
            }
        }
        Ok(false)
    }

    fn resident(&self) -> usize {
        self.s1.len() + self.s2.len() + usize::from(self.big.is_some())
    }
}

/// Common pieces of the three knapsack sieves: the standardized shape and
/// per-element validation.
#[derive(Debug, Clone)]
struct DkShared {
    capacity: BigRational,
    capacity_f64: f64,
    dims: usize,
}

impl DkShared {
    fn new(std: &StandardizedInstance) -> Result<Self> {
        std.validate()?;
        Ok(DkShared {
            capacity: std.capacity.clone(),
            capacity_f64: std.capacity_f64(),
            dims: std.dims(),
        })
    }

    fn check_element(&self, element: &GroundElement) -> Result<()> {
        if element.costs.len() != self.dims {
            return Err(Error::input(format!(
                "element {} carries {} cost dimensions, expected {}",
                element.id,
                element.costs.len(),
                self.dims
            )));
        }
        let one = BigRational::from_integer(1.into());
        if element.costs.iter().any(|c| *c < one) {
            return Err(Error::contract(format!(
                "element {} has a cost below 1; streams must carry standardized costs",
                element.id
            )));
        }
        Ok(())
    }

    fn has_big_dim(&self, element: &GroundElement) -> bool {
        element.costs.iter().any(|c| &(c + c) >= &self.capacity)
    }
}

fn finalize_dk(
    instances: Vec<(Option<i64>, DkInstance)>,
    params: &KnapsackParams,
    oracle: &MeteredOracle<'_>,
    empty_value: f64,
) -> Result<(Solution, Vec<InstanceSnapshot>)> {
    let mut best = Solution::empty(empty_value);
    let mut snapshots = Vec::with_capacity(instances.len());
    for (exponent, inst) in instances {
        let s3 = params.solver.solve(oracle, inst.s1.sorted_ids(), empty_value)?;
        consider_candidate(&mut best, inst.s1.sorted_ids(), inst.s1.value());
        consider_candidate(&mut best, inst.s2.sorted_ids(), inst.s2.value());
        consider_candidate(&mut best, &s3.ids, s3.value);
        if let Some((id, value)) = inst.big {
            consider_candidate(&mut best, &[id], value);
        }
        snapshots.push(InstanceSnapshot {
            exponent,
            guess: inst.guess,
            s1_ids: inst.s1.ids().to_vec(),
            s2_ids: inst.s2.ids().to_vec(),
            s1_value: inst.s1.value(),
            s2_value: inst.s2.value(),
            s3_ids: s3.ids,
            s3_value: s3.value,
            big: inst.big,
        });
    }
    Ok((best, snapshots))
}

/// Sieve for a known guess v of the optimum, with τ = coeff · v. The
/// first big element ends the run: it alone is a feasible set worth τ,
/// which already meets the guarantee.
#[derive(Debug)]
pub struct KnapsackKnownOpt {
    params: KnapsackParams,
    shared: DkShared,
    guess: f64,
    empty_value: f64,
    inst: Option<DkInstance>,
    early: Option<(ElementId, f64)>,
    snapshots: Vec<InstanceSnapshot>,
}

impl KnapsackKnownOpt {
    pub fn new(params: KnapsackParams, std: &StandardizedInstance, guess: f64) -> Result<Self> {
        if !(guess > 0.0 && guess.is_finite()) {
            return Err(Error::parameter(format!("optimum guess must be positive, got {guess}")));
        }
        Ok(KnapsackKnownOpt {
            params,
            shared: DkShared::new(std)?,
            guess,
            empty_value: 0.0,
            inst: None,
            early: None,
            snapshots: Vec::new(),
        })
    }
}

impl StreamAlgorithm for KnapsackKnownOpt {
    fn begin(&mut self, oracle: &MeteredOracle<'_>) -> Result<()> {
        self.empty_value = oracle.evaluate(&[]);
        self.inst = Some(DkInstance::new(
            self.guess,
            self.params.coeff,
            self.shared.capacity_f64,
            self.empty_value,
            self.shared.dims,
        ));
        Ok(())
    }

    fn step(&mut self, element: &GroundElement, oracle: &MeteredOracle<'_>) -> Result<StepOutcome> {
        self.shared.check_element(element)?;
        let singleton = if self.shared.has_big_dim(element) {
            Some(oracle.evaluate(&[element.id]))
        } else {
            None
        };
        let inst = self.inst.as_mut().expect("begin ran");
        if inst.offer(element, singleton, &self.shared.capacity, oracle)? {
            self.early = inst.big;
            return Ok(StepOutcome::EarlyReturn);
        }
        Ok(StepOutcome::Continue)
    }

    fn live_instances(&self) -> usize {
        usize::from(self.inst.is_some())
    }

    fn resident_elements(&self) -> usize {
        self.inst.as_ref().map_or(0, DkInstance::resident) + snapshot_resident(&self.snapshots)
    }

    fn finish(&mut self, oracle: &MeteredOracle<'_>) -> Result<Solution> {
        let inst = self.inst.take().expect("begin ran");
        if let Some((id, value)) = self.early {
            // No post-pass solve: the big element is the answer.
            self.snapshots = vec![InstanceSnapshot {
                exponent: None,
                guess: inst.guess,
                s1_ids: inst.s1.ids().to_vec(),
                s2_ids: inst.s2.ids().to_vec(),
                s1_value: inst.s1.value(),
                s2_value: inst.s2.value(),
                s3_ids: Vec::new(),
                s3_value: self.empty_value,
                big: inst.big,
            }];
            return Ok(Solution { ids: vec![id], value });
        }
        let (best, snapshots) =
            finalize_dk(vec![(None, inst)], &self.params, oracle, self.empty_value)?;
        self.snapshots = snapshots;
        Ok(best)
    }
}

/// Sieve for a known maximum singleton density m: a static geometric grid
/// over [m/(1+ε), b·m], which always brackets the optimum. Big elements
/// are recorded per instance instead of ending the run, and compete in
/// the final argmax.
#[derive(Debug)]
pub struct KnapsackKnownDensity {
    params: KnapsackParams,
    shared: DkShared,
    density: f64,
    eps: f64,
    empty_value: f64,
    grid: GuessGrid<DkInstance>,
    snapshots: Vec<InstanceSnapshot>,
}

impl KnapsackKnownDensity {
    /// A non-positive density is accepted and yields the empty output:
    /// it means every singleton value is 0, and then no set has positive
    /// value (by submodularity and non-negativity).
    pub fn new(
        params: KnapsackParams,
        std: &StandardizedInstance,
        density: f64,
        eps: f64,
    ) -> Result<Self> {
        check_eps(eps)?;
        if !density.is_finite() {
            return Err(Error::parameter(format!("density must be finite, got {density}")));
        }
        Ok(KnapsackKnownDensity {
            params,
            shared: DkShared::new(std)?,
            density,
            eps,
            empty_value: 0.0,
            grid: GuessGrid::new(eps),
            snapshots: Vec::new(),
        })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::parameter(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

impl StreamAlgorithm for KnapsackKnownDensity {
    fn begin(&mut self, oracle: &MeteredOracle<'_>) -> Result<()> {
        self.empty_value = oracle.evaluate(&[]);
        if self.density > 0.0 {
            let lower = self.density / (1.0 + self.eps);
            let upper = self.shared.capacity_f64 * self.density;
            let (params, shared, empty_value) = (&self.params, &self.shared, self.empty_value);
            self.grid.update_range(lower, upper, |_, guess| {
                DkInstance::new(guess, params.coeff, shared.capacity_f64, empty_value, shared.dims)
            });
        }
        Ok(())
    }

    fn step(&mut self, element: &GroundElement, oracle: &MeteredOracle<'_>) -> Result<StepOutcome> {
        self.shared.check_element(element)?;
        if self.grid.is_empty() {
            return Ok(StepOutcome::Continue);
        }
        // One shared singleton query serves every instance's big test.
        let singleton = if self.shared.has_big_dim(element) {
            Some(oracle.evaluate(&[element.id]))
        } else {
            None
        };
        for (_, inst) in self.grid.iter_mut() {
            inst.offer(element, singleton, &self.shared.capacity, oracle)?;
        }
        Ok(StepOutcome::Continue)
    }

    fn live_instances(&self) -> usize {
        self.grid.len()
    }

    fn resident_elements(&self) -> usize {
        self.grid.iter().map(|(_, i)| i.resident()).sum::<usize>()
            + snapshot_resident(&self.snapshots)
    }

    fn finish(&mut self, oracle: &MeteredOracle<'_>) -> Result<Solution> {
        let instances: Vec<(Option<i64>, DkInstance)> =
            self.grid.drain().into_iter().map(|(i, inst)| (Some(i), inst)).collect();
        let (best, snapshots) = finalize_dk(instances, &self.params, oracle, self.empty_value)?;
        self.snapshots = snapshots;
        Ok(best)
    }
}

/// Fully stream-oblivious sieve: tracks the running maximum singleton
/// density m and keeps a lazy grid over [m/(1+ε), b·m/(2·coeff)].
/// Instances below the window are deleted for good (m only grows), and
/// instances created late start in exactly the state a fresh run with
/// that guess would have reached: earlier elements all had densities
/// below the window, so they could be neither big nor acceptable for any
/// in-window guess.
#[derive(Debug)]
pub struct KnapsackOnePass {
    params: KnapsackParams,
    shared: DkShared,
    eps: f64,
    empty_value: f64,
    running_density: f64,
    grid: GuessGrid<DkInstance>,
    snapshots: Vec<InstanceSnapshot>,
}

impl KnapsackOnePass {
    pub fn new(params: KnapsackParams, std: &StandardizedInstance, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(KnapsackOnePass {
            params,
            shared: DkShared::new(std)?,
            eps,
            empty_value: 0.0,
            running_density: 0.0,
            grid: GuessGrid::new(eps),
            snapshots: Vec::new(),
        })
    }
}

impl StreamAlgorithm for KnapsackOnePass {
    fn begin(&mut self, oracle: &MeteredOracle<'_>) -> Result<()> {
        self.empty_value = oracle.evaluate(&[]);
        Ok(())
    }

    fn step(&mut self, element: &GroundElement, oracle: &MeteredOracle<'_>) -> Result<StepOutcome> {
        self.shared.check_element(element)?;
        let singleton = oracle.evaluate(&[element.id]);
        for &c in &element.costs_f64 {
            self.running_density = self.running_density.max(singleton / c);
        }
        if self.running_density > 0.0 {
            let lower = self.running_density / (1.0 + self.eps);
            let upper =
                self.shared.capacity_f64 * self.running_density / (2.0 * self.params.coeff);
            let (params, shared, empty_value) = (&self.params, &self.shared, self.empty_value);
            self.grid.update_range(lower, upper, |_, guess| {
                DkInstance::new(guess, params.coeff, shared.capacity_f64, empty_value, shared.dims)
            });
        }
        for (_, inst) in self.grid.iter_mut() {
            inst.offer(element, Some(singleton), &self.shared.capacity, oracle)?;
        }
        Ok(StepOutcome::Continue)
    }

    fn live_instances(&self) -> usize {
        self.grid.len()
    }

    fn resident_elements(&self) -> usize {
        self.grid.iter().map(|(_, i)| i.resident()).sum::<usize>()
            + snapshot_resident(&self.snapshots)
    }

    fn finish(&mut self, oracle: &MeteredOracle<'_>) -> Result<Solution> {
        let instances: Vec<(Option<i64>, DkInstance)> =
            self.grid.drain().into_iter().map(|(i, inst)| (Some(i), inst)).collect();
        let (best, snapshots) = finalize_dk(instances, &self.params, oracle, self.empty_value)?;
        self.snapshots = snapshots;
        Ok(best)
    }
}

/// Worst-case bound on resident element slots for the knapsack sieves
/// with standardized capacity b. Each live instance holds at most b ids
/// per candidate set (all costs are ≥ 1), b more for its post-pass solve,
/// and one big element. The one-pass window spans a value ratio of
/// (1+ε) · b/(2·coeff), so at most ⌈log_{1+ε}(b·(1+ε)/(2·coeff))⌉ + 2
/// guesses are live at once (the known-density window is narrower). One
/// extra instance-width absorbs the in-flight element.
pub fn knapsack_memory_cap(capacity: f64, eps: Option<f64>, coeff: f64) -> f64 {
    let guesses = match eps {
        None => 1.0,
        Some(e) => (((1.0 + e) * capacity / (2.0 * coeff)).ln() / (1.0 + e).ln()).ceil() + 2.0,
    };
    (3.0 * capacity + 1.0) * (guesses + 1.0)
}

pub fn sieve_knapsack_known_opt(
    function: &dyn SetFunction,
    stream: &[GroundElement],
    params: KnapsackParams,
    std: &StandardizedInstance,
    guess: f64,
) -> Result<SieveRun> {
    let mut alg = KnapsackKnownOpt::new(params, std, guess)?;
    let (solution, instrumentation) = run_stream(function, stream, &mut alg)?;
    Ok(SieveRun { solution, instrumentation, instances: alg.snapshots })
}

pub fn sieve_knapsack_known_density(
    function: &dyn SetFunction,
    stream: &[GroundElement],
    params: KnapsackParams,
    std: &StandardizedInstance,
    density: f64,
    eps: f64,
) -> Result<SieveRun> {
    let mut alg = KnapsackKnownDensity::new(params, std, density, eps)?;
    let (solution, instrumentation) = run_stream(function, stream, &mut alg)?;
    Ok(SieveRun { solution, instrumentation, instances: alg.snapshots })
}

pub fn sieve_knapsack_onepass(
    function: &dyn SetFunction,
    stream: &[GroundElement],
    params: KnapsackParams,
    std: &StandardizedInstance,
    eps: f64,
) -> Result<SieveRun> {
    let mut alg = KnapsackOnePass::new(params, std, eps)?;
    let (solution, instrumentation) = run_stream(function, stream, &mut alg)?;
    Ok(SieveRun { solution, instrumentation, instances: alg.snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_opt;
    use crate::model::make_elements;
    use crate::oracles::{CutOracle, TableOracle};
    use crate::unconstrained::{knapsack_threshold_coeff, SolverKind, UnconstrainedSolver};

    fn path3() -> CutOracle {
        CutOracle::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)], false).unwrap()
    }

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn params_d(d: usize) -> KnapsackParams {
        KnapsackParams::new(
            knapsack_threshold_coeff(1.0 / 2.0, d),
            UnconstrainedSolver::new(SolverKind::Exact, 0),
        )
        .unwrap()
    }

    /// Path fixture with costs (1, 2, 1) under capacity 4: already
    /// standardized.
    fn path3_std() -> StandardizedInstance {
        let costs = CostMatrix::from_rows(vec![vec![rat(1), rat(2), rat(1)]]).unwrap();
        standardize(&costs, &[rat(4)]).unwrap()
    }

    #[test]
    fn standardize_two_dimensional_example() {
        // Capacities (10, 5), costs [[2, 4], [1, 3]]: the second row is
        // normalized by 10/5 = 2 giving [2, 6], the smallest scaled cost
        // is 2, so the final costs are [[1, 2], [1, 3]] under budget 5.
        let costs = CostMatrix::from_rows(vec![
            vec![rat(2), rat(4)],
            vec![rat(1), rat(3)],
        ])
        .unwrap();
        let std = standardize(&costs, &[rat(10), rat(5)]).unwrap();
        assert_eq!(std.capacity, rat(5));
        assert_eq!(std.cap_scale, rat(10));
        assert_eq!(std.cost_scale, rat(2));
        assert_eq!(std.costs.column(0), &[rat(1), rat(1)]);
        assert_eq!(std.costs.column(1), &[rat(2), rat(3)]);
    }

    #[test]
    fn standardize_produces_fractional_costs_when_needed() {
        let costs = CostMatrix::from_rows(vec![vec![rat(5), rat(2)]]).unwrap();
        let std = standardize(&costs, &[rat(10)]).unwrap();
        assert_eq!(std.capacity, rat(5));
        assert_eq!(std.costs.column(0), &[ratio(5, 2)]);
        assert_eq!(std.costs.column(1), &[rat(1)]);
    }

    #[test]
    fn standardize_preserves_feasibility_exactly() {
        let costs = CostMatrix::from_rows(vec![
            vec![ratio(3, 2), rat(2), ratio(1, 3), rat(1)],
            vec![rat(1), ratio(5, 4), rat(2), ratio(2, 3)],
        ])
        .unwrap();
        let caps = [ratio(7, 2), rat(3)];
        let std = standardize(&costs, &caps).unwrap();
        let raw = Constraint::DKnapsack {
            costs: costs.clone(),
            capacity: rat(0), // unused below; feasibility checked per dim
        };
        drop(raw);
        let std_constraint = std.constraint();
        for mask in 0u32..16 {
            let set: Vec<ElementId> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
            let mut raw_ok = true;
            for (i, cap) in caps.iter().enumerate() {
                let total: BigRational = set
                    .iter()
                    .map(|&j| costs.column(j as usize)[i].clone())
                    .fold(rat(0), |a, b| a + b);
                raw_ok &= total <= *cap;
            }
            let std_ok = std_constraint.is_feasible(&set, None).unwrap();
            assert_eq!(raw_ok, std_ok, "mask {mask}");
        }
    }

    #[test]
    fn standardize_rejects_bad_inputs() {
        let zero_cost = CostMatrix::from_rows(vec![vec![rat(0), rat(1)]]).unwrap();
        assert!(standardize(&zero_cost, &[rat(2)]).is_err());

        let oversized = CostMatrix::from_rows(vec![vec![rat(3)]]).unwrap();
        assert!(standardize(&oversized, &[rat(2)]).is_err());

        let fine = CostMatrix::from_rows(vec![vec![rat(1)]]).unwrap();
        assert!(standardize(&fine, &[rat(0)]).is_err());
        assert!(standardize(&fine, &[rat(2), rat(2)]).is_err());
    }

    #[test]
    fn density_max_scans_all_dimensions() {
        let f = path3();
        let stream = make_elements(3, Some(&path3_std().costs)).unwrap();
        // Densities: 1/1, 2/2, 1/1.
        assert_eq!(density_max(&f, &stream), 1.0);
    }

    #[test]
    fn known_opt_returns_the_first_big_element() {
        let f = path3();
        let std = path3_std();
        let stream = make_elements(3, Some(&std.costs)).unwrap();
        let run = sieve_knapsack_known_opt(&f, &stream, params_d(1), &std, 2.0).unwrap();
        // Element 1 costs 2 = b/2 and has density 1 ≥ 2τ/b = 1/8: big.
        assert_eq!(run.solution.ids, vec![1]);
        assert_eq!(run.solution.value, 2.0);
        assert!(run.instrumentation.early_terminated);
        assert_eq!(run.instrumentation.elements_seen, 2);
        // f(∅), S1 test for element 0, singleton for element 1.
        assert_eq!(run.instrumentation.oracle_queries_total, 3);
        assert_eq!(run.instrumentation.oracle_queries_post, 0);
        assert_eq!(run.instances[0].big, Some((1, 2.0)));
        assert_eq!(run.instances[0].s1_ids, vec![0]);
    }

    #[test]
    fn known_density_records_big_elements_and_keeps_streaming() {
        let f = path3();
        let std = path3_std();
        let stream = make_elements(3, Some(&std.costs)).unwrap();
        let run =
            sieve_knapsack_known_density(&f, &stream, params_d(1), &std, 1.0, 0.5).unwrap();
        // Window [1/1.5, 4] holds guesses 1.5^-1 .. 1.5^3.
        assert_eq!(run.instances.len(), 5);
        for snap in &run.instances {
            assert_eq!(snap.big, Some((1, 2.0)), "guess {}", snap.guess);
            assert_eq!(snap.s1_ids, vec![0, 2], "guess {}", snap.guess);
            assert!(snap.s2_ids.is_empty());
        }
        assert!(!run.instrumentation.early_terminated);
        assert_eq!(run.instrumentation.elements_seen, 3);
        // S1 = {0, 2} cuts 2, tying the big element; S1 comes first.
        assert_eq!(run.solution.ids, vec![0, 2]);
        assert_eq!(run.solution.value, 2.0);
    }

    #[test]
    fn known_density_accepts_zero_density_with_empty_output() {
        let f = TableOracle::new(2, vec![0.0; 4]).unwrap();
        let costs = CostMatrix::from_rows(vec![vec![rat(1), rat(1)]]).unwrap();
        let std = standardize(&costs, &[rat(2)]).unwrap();
        let stream = make_elements(2, Some(&std.costs)).unwrap();
        let run = sieve_knapsack_known_density(&f, &stream, params_d(1), &std, 0.0, 0.5).unwrap();
        assert!(run.instances.is_empty());
        assert_eq!(run.solution.ids, Vec::<ElementId>::new());
        assert_eq!(run.solution.value, 0.0);
    }

    #[test]
    fn one_pass_covers_the_path_fixture() {
        let f = path3();
        let std = path3_std();
        let stream = make_elements(3, Some(&std.costs)).unwrap();
        let run = sieve_knapsack_onepass(&f, &stream, params_d(1), &std, 0.5).unwrap();
        // m settles at 1; window [1/1.5, 4·1/(2/8)] = [2/3, 16]:
        // exponents -1..=6.
        assert_eq!(run.instances.len(), 8);
        for snap in &run.instances {
            assert_eq!(snap.big, Some((1, 2.0)), "guess {}", snap.guess);
        }
        assert_eq!(run.solution.ids, vec![0, 2]);
        assert_eq!(run.solution.value, 2.0);
        assert!(run.instrumentation.per_element_query_bound_ok);
    }

    #[test]
    fn one_pass_instances_match_fresh_known_opt_replays() {
        let f = CutOracle::new(
            5,
            vec![(0, 1, 1.1), (0, 2, 0.6), (1, 3, 2.3), (2, 4, 1.7), (3, 4, 0.9)],
            false,
        )
        .unwrap();
        let costs = CostMatrix::from_rows(vec![
            vec![rat(1), rat(2), rat(1), rat(3), rat(2)],
            vec![rat(2), rat(1), rat(1), rat(2), rat(4)],
        ])
        .unwrap();
        let std = standardize(&costs, &[rat(5), rat(5)]).unwrap();
        let stream = make_elements(5, Some(&std.costs)).unwrap();
        let run = sieve_knapsack_onepass(&f, &stream, params_d(2), &std, 0.2).unwrap();
        assert!(!run.instances.is_empty());
        for snap in &run.instances {
            let replay =
                sieve_knapsack_known_opt(&f, &stream, params_d(2), &std, snap.guess).unwrap();
            if replay.instrumentation.early_terminated {
                // The replay stopped at its first big element; the lazy
                // instance must also have found one worth τ.
                let (_, value) = snap.big.expect("lazy instance saw a big element too");
                let tau = params_d(2).coeff * snap.guess;
                assert!(value >= tau - 1e-9, "guess {}", snap.guess);
            } else {
                assert_eq!(replay.instances[0].s1_ids, snap.s1_ids, "guess {}", snap.guess);
                assert_eq!(replay.instances[0].s2_ids, snap.s2_ids, "guess {}", snap.guess);
                assert_eq!(replay.instances[0].big, snap.big, "guess {}", snap.guess);
            }
        }
    }

    #[test]
    fn one_pass_meets_its_ratio_on_the_fixture() {
        let f = path3();
        let std = path3_std();
        let stream = make_elements(3, Some(&std.costs)).unwrap();
        let run = sieve_knapsack_onepass(&f, &stream, params_d(1), &std, 0.1).unwrap();
        let exact = exact_opt(&f, &std.constraint()).unwrap();
        assert_eq!(exact.opt_value, 2.0);
        let bound = 1.0 / 8.0 - 0.1;
        assert!(run.solution.value >= bound * exact.opt_value);
    }

    #[test]
    fn sieves_reject_non_standardized_instances() {
        let std = StandardizedInstance {
            costs: CostMatrix::from_rows(vec![vec![ratio(1, 2), rat(1)]]).unwrap(),
            capacity: rat(2),
            cap_scale: rat(2),
            cost_scale: rat(1),
        };
        let err = KnapsackKnownOpt::new(params_d(1), &std, 1.0).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn memory_cap_formula_matches_hand_values() {
        // Single guess: (3b + 1) · 2 = 26 at b = 4.
        assert_eq!(knapsack_memory_cap(4.0, None, 1.0 / 8.0), 26.0);
        // b = 4, ε = 0.5, coeff = 1/8: ⌈log1.5 24⌉ + 2 = 10 guesses,
        // cap 13 · 11.
        assert_eq!(knapsack_memory_cap(4.0, Some(0.5), 1.0 / 8.0), 143.0);
    }
}
