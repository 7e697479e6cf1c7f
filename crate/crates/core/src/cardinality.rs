//! Streaming sieves for maximizing a non-negative submodular function
//! under a cardinality constraint |S| ≤ k, in three knowledge regimes:
//! the optimum value is known up to a factor, the maximum singleton value
//! is known, or nothing is known ahead of the single pass.
//!
//! All three share one building block: a threshold instance holding two
//! disjoint candidate sets. An arriving element is offered to the first
//! set, and on rejection to the second; acceptance requires a marginal
//! gain of at least τ/k where τ = coeff · guess. Keeping a second set
//! protects against non-monotonicity: elements rejected from the first
//! set because it already "used up" their gain still certify value in the
//! second. After the pass an unconstrained solver is run on the first set
//! (its subsets can beat the full set when f is non-monotone), and the
//! best of all stored sets wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GuessGrid;
use crate::model::{
    consider_candidate, run_stream, snapshot_resident, CandidateSet, ElementId, GroundElement,
    InstanceSnapshot, MeteredOracle, SetFunction, SieveRun, Solution, StepOutcome,
    StreamAlgorithm,
};
use crate::unconstrained::UnconstrainedSolver;

/// Placement of the guess grid's lower end relative to the running
/// maximum singleton value m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    /// Lower end m/(1+ε). Guarantees some guess is within (1+ε) of any
    /// optimum in [m, km], including an optimum equal to m itself sitting
    /// just below the smallest on-grid power. Default.
    Safe,
    /// Lower end exactly m, the textbook range. Slightly fewer instances,
    /// but an optimum close to m can fall below every live guess, and the
    /// stated approximation factor is then lost.
    Paper,
}

impl GridMode {
    fn lower(self, m: f64, eps: f64) -> f64 {
        match self {
            GridMode::Safe => m / (1.0 + eps),
            GridMode::Paper => m,
        }
    }
}

/// Parameters shared by the three cardinality sieves.
#[derive(Debug, Clone)]
pub struct CardinalityParams {
    pub k: usize,
    /// Threshold coefficient: τ = coeff · guess. 1/6 for the exact
    /// unconstrained solver; see
    /// [`crate::unconstrained::cardinality_threshold_coeff`].
    pub coeff: f64,
    pub solver: UnconstrainedSolver,
}

impl CardinalityParams {
    pub fn new(k: usize, coeff: f64, solver: UnconstrainedSolver) -> Result<Self> {
        if k == 0 {
            return Err(Error::parameter("cardinality bound k must be at least 1"));
        }
        if !(coeff > 0.0 && coeff < 1.0) {
            return Err(Error::parameter(format!(
                "threshold coefficient must lie in (0, 1), got {coeff}"
            )));
        }
        Ok(CardinalityParams { k, coeff, solver })
    }
}

/// One guess's working state: two disjoint candidate sets filled greedily
/// by marginal-gain threshold.
#[derive(Debug, Clone)]
struct CardInstance {
    guess: f64,
    /// Minimum marginal gain per accepted element: coeff · guess / k.
    slot_threshold: f64,
    s1: CandidateSet,
    s2: CandidateSet,
}

impl CardInstance {
    fn new(guess: f64, params: &CardinalityParams, empty_value: f64) -> Self {
        CardInstance {
            guess,
            slot_threshold: params.coeff * guess / params.k as f64,
            s1: CandidateSet::new(empty_value, 0),
            s2: CandidateSet::new(empty_value, 0),
        }
    }

    /// Offers `u` to S1 and then, if S1 declined, to S2. At most one
    /// oracle query per non-full set.
    fn offer(&mut self, k: usize, u: ElementId, oracle: &MeteredOracle<'_>) -> Result<()> {
        if self.s1.len() < k {
            let val = self.s1.value_with(oracle, u)?;
            if val - self.s1.value() >= self.slot_threshold {
                self.s1.insert(u, val, &[])?;
                return Ok(());
            }
        }
        if self.s2.len() < k {
            let val = self.s2.value_with(oracle, u)?;
            if val - self.s2.value() >= self.slot_threshold {
                self.s2.insert(u, val, &[])?;
            }
        }
        Ok(())
    }

    fn resident(&self) -> usize {
        self.s1.len() + self.s2.len()
    }
}

/// Runs the post-pass solve on every instance and picks the best stored
/// set. Instances must arrive in ascending guess order; within one
/// instance the order is S1, S2, S3.
fn finalize(
    instances: Vec<(Option<i64>, CardInstance)>,
    params: &CardinalityParams,
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
        snapshots.push(InstanceSnapshot {
            exponent,
            guess: inst.guess,
            s1_ids: inst.s1.ids().to_vec(),
            s2_ids: inst.s2.ids().to_vec(),
            s1_value: inst.s1.value(),
            s2_value: inst.s2.value(),
            s3_ids: s3.ids,
            s3_value: s3.value,
            big: None,
        });
    }
    Ok((best, snapshots))
}

/// Sieve for a known guess v of the optimum: a single threshold instance
/// with τ = coeff · v. When αOPT ≤ v ≤ OPT, the output is at least
/// coeff · α · OPT with the exact post-pass solver.
#[derive(Debug)]
pub struct CardinalityKnownOpt {
    params: CardinalityParams,
    guess: f64,
    empty_value: f64,
    inst: Option<CardInstance>,
    snapshots: Vec<InstanceSnapshot>,
}

impl CardinalityKnownOpt {
    pub fn new(params: CardinalityParams, guess: f64) -> Result<Self> {
        if !(guess > 0.0 && guess.is_finite()) {
            return Err(Error::parameter(format!("optimum guess must be positive, got {guess}")));
        }
        Ok(CardinalityKnownOpt {
            params,
            guess,
            empty_value: 0.0,
            inst: None,
            snapshots: Vec::new(),
        })
    }
}

impl StreamAlgorithm for CardinalityKnownOpt {
    fn begin(&mut self, oracle: &MeteredOracle<'_>) -> Result<()> {
        self.empty_value = oracle.evaluate(&[]);
        self.inst = Some(CardInstance::new(self.guess, &self.params, self.empty_value));
        Ok(())
    }

    fn step(&mut self, element: &GroundElement, oracle: &MeteredOracle<'_>) -> Result<StepOutcome> {
        let inst = self.inst.as_mut().expect("begin ran");
        inst.offer(self.params.k, element.id, oracle)?;
        Ok(StepOutcome::Continue)
    }

    fn live_instances(&self) -> usize {
        usize::from(self.inst.is_some())
    }

    fn resident_elements(&self) -> usize {
        self.inst.as_ref().map_or(0, CardInstance::resident) + snapshot_resident(&self.snapshots)
    }

    fn finish(&mut self, oracle: &MeteredOracle<'_>) -> Result<Solution> {
        let inst = self.inst.take().expect("begin ran");
        let (best, snapshots) = finalize(vec![(None, inst)], &self.params, oracle, self.empty_value)?;
        self.snapshots = snapshots;
        Ok(best)
    }
}

/// Sieve for a known maximum singleton value m: a static geometric grid
/// of guesses covering [m, km], each run as an independent threshold
/// instance. Output is at least (coeff − ε)·OPT for the exact solver.
#[derive(Debug)]
pub struct CardinalityKnownMax {
    params: CardinalityParams,
    max_singleton: f64,
    eps: f64,
    mode: GridMode,
    empty_value: f64,
    grid: GuessGrid<CardInstance>,
    snapshots: Vec<InstanceSnapshot>,
}

impl CardinalityKnownMax {
    pub fn new(params: CardinalityParams, max_singleton: f64, eps: f64, mode: GridMode) -> Result<Self> {
        if !(max_singleton > 0.0 && max_singleton.is_finite()) {
            return Err(Error::parameter(format!(
                "maximum singleton value must be positive, got {max_singleton}"
            )));
        }
        check_eps(eps)?;
        Ok(CardinalityKnownMax {
            params,
            max_singleton,
            eps,
            mode,
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

impl StreamAlgorithm for CardinalityKnownMax {
    fn begin(&mut self, oracle: &MeteredOracle<'_>) -> Result<()> {
        self.empty_value = oracle.evaluate(&[]);
        let lower = self.mode.lower(self.max_singleton, self.eps);
        let upper = self.params.k as f64 * self.max_singleton;
        let (params, empty_value) = (&self.params, self.empty_value);
        self.grid.update_range(lower, upper, |_, guess| {
            CardInstance::new(guess, params, empty_value)
        });
        Ok(())
    }

    fn step(&mut self, element: &GroundElement, oracle: &MeteredOracle<'_>) -> Result<StepOutcome> {
        for (_, inst) in self.grid.iter_mut() {
            inst.offer(self.params.k, element.id, oracle)?;
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
        let instances: Vec<(Option<i64>, CardInstance)> =
            self.grid.drain().into_iter().map(|(i, inst)| (Some(i), inst)).collect();
        let (best, snapshots) = finalize(instances, &self.params, oracle, self.empty_value)?;
        self.snapshots = snapshots;
        Ok(best)
    }
}

/// Fully stream-oblivious sieve: tracks the running maximum singleton
/// value m and keeps a lazy geometric grid over [m, k·m/coeff]. Instances
/// whose guess falls below the window are deleted and never revived (m
/// only grows); instances entering from above start empty, which is
/// exactly the state a fresh run with that guess would be in, because
/// every earlier element's singleton value was below guess · coeff / k
/// and submodularity caps its marginal into any set by that.
#[derive(Debug)]
pub struct CardinalityOnePass {
    params: CardinalityParams,
    eps: f64,
    mode: GridMode,
    empty_value: f64,
    running_max: f64,
    grid: GuessGrid<CardInstance>,
    snapshots: Vec<InstanceSnapshot>,
}

impl CardinalityOnePass {
    pub fn new(params: CardinalityParams, eps: f64, mode: GridMode) -> Result<Self> {
        check_eps(eps)?;
        Ok(CardinalityOnePass {
            params,
            eps,
            mode,
            empty_value: 0.0,
            running_max: 0.0,
            grid: GuessGrid::new(eps),
            snapshots: Vec::new(),
        })
    }
}

impl StreamAlgorithm for CardinalityOnePass {
    fn begin(&mut self, oracle: &MeteredOracle<'_>) -> Result<()> {
        self.empty_value = oracle.evaluate(&[]);
        Ok(())
    }

    fn step(&mut self, element: &GroundElement, oracle: &MeteredOracle<'_>) -> Result<StepOutcome> {
        let singleton = oracle.evaluate(&[element.id]);
        self.running_max = self.running_max.max(singleton);
        if self.running_max > 0.0 {
            let lower = self.mode.lower(self.running_max, self.eps);
            let upper = self.params.k as f64 * self.running_max / self.params.coeff;
            let (params, empty_value) = (&self.params, self.empty_value);
            self.grid.update_range(lower, upper, |_, guess| {
                CardInstance::new(guess, params, empty_value)
            });
        }
        for (_, inst) in self.grid.iter_mut() {
            inst.offer(self.params.k, element.id, oracle)?;
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
        let instances: Vec<(Option<i64>, CardInstance)> =
            self.grid.drain().into_iter().map(|(i, inst)| (Some(i), inst)).collect();
        let (best, snapshots) = finalize(instances, &self.params, oracle, self.empty_value)?;
        self.snapshots = snapshots;
        Ok(best)
    }
}

/// Worst-case bound on resident element slots for the cardinality
/// sieves. `eps = None` means a single-guess run. Each live instance
/// stores at most 2k ids during the pass and k more for its post-pass
/// solve; the grid window spans a value ratio of (k / coeff) · (1 + ε),
/// so at most ⌈log_{1+ε}(k / coeff)⌉ + 2 guesses are ever live at once.
/// One extra instance-width absorbs the in-flight element.
pub fn cardinality_memory_cap(k: usize, eps: Option<f64>, coeff: f64) -> f64 {
    let guesses = match eps {
        None => 1.0,
        Some(e) => ((k as f64 / coeff).ln() / (1.0 + e).ln()).ceil() + 2.0,
    };
    3.0 * k as f64 * (guesses + 1.0)
}

pub fn sieve_cardinality_known_opt(
    function: &dyn SetFunction,
    stream: &[GroundElement],
    params: CardinalityParams,
    guess: f64,
) -> Result<SieveRun> {
    let mut alg = CardinalityKnownOpt::new(params, guess)?;
    let (solution, instrumentation) = run_stream(function, stream, &mut alg)?;
    Ok(SieveRun { solution, instrumentation, instances: alg.snapshots })
}

pub fn sieve_cardinality_known_max(
    function: &dyn SetFunction,
    stream: &[GroundElement],
    params: CardinalityParams,
    max_singleton: f64,
    eps: f64,
    mode: GridMode,
) -> Result<SieveRun> {
    let mut alg = CardinalityKnownMax::new(params, max_singleton, eps, mode)?;
    let (solution, instrumentation) = run_stream(function, stream, &mut alg)?;
    Ok(SieveRun { solution, instrumentation, instances: alg.snapshots })
}

pub fn sieve_cardinality_onepass(
    function: &dyn SetFunction,
    stream: &[GroundElement],
    params: CardinalityParams,
    eps: f64,
    mode: GridMode,
) -> Result<SieveRun> {
    let mut alg = CardinalityOnePass::new(params, eps, mode)?;
    let (solution, instrumentation) = run_stream(function, stream, &mut alg)?;
    Ok(SieveRun { solution, instrumentation, instances: alg.snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_elements;
    use crate::oracles::{CutOracle, TableOracle};
    use crate::unconstrained::{SolverKind, UnconstrainedSolver};

    fn path3() -> CutOracle {
        CutOracle::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)], false).unwrap()
    }

    fn exact_params(k: usize) -> CardinalityParams {
        CardinalityParams::new(k, 1.0 / 6.0, UnconstrainedSolver::new(SolverKind::Exact, 0)).unwrap()
    }

    #[test]
    fn known_opt_on_path_keeps_the_center() {
        let f = path3();
        let stream = make_elements(3, None).unwrap();
        let run = sieve_cardinality_known_opt(&f, &stream, exact_params(1), 2.0).unwrap();
        assert_eq!(run.solution.ids, vec![1]);
        assert_eq!(run.solution.value, 2.0);
        // Element 0 fills S1, element 1 fills S2, element 2 is offered to
        // neither (both full): queries are 1 init + 2 stream + 1 solve.
        assert_eq!(run.instrumentation.oracle_queries_total, 4);
        assert_eq!(run.instrumentation.oracle_queries_init, 1);
        assert_eq!(run.instrumentation.oracle_queries_stream, 2);
        assert_eq!(run.instrumentation.oracle_queries_post, 1);
        assert_eq!(run.instances.len(), 1);
        assert_eq!(run.instances[0].s1_ids, vec![0]);
        assert_eq!(run.instances[0].s2_ids, vec![1]);
        assert_eq!(run.instances[0].s3_ids, vec![0]);
    }

    #[test]
    fn known_opt_rejected_elements_fall_through_to_s2() {
        // Unit star with center 0: every leaf has marginal -1 into S1
        // once the center is there, so the leaves land in S2 until it
        // fills. v = 3, k = 2 puts the per-slot threshold at 0.25.
        let f = CutOracle::new(4, vec![(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], false).unwrap();
        let stream = make_elements(4, None).unwrap();
        let run = sieve_cardinality_known_opt(&f, &stream, exact_params(2), 3.0).unwrap();
        assert_eq!(run.instances[0].s1_ids, vec![0]);
        assert_eq!(run.instances[0].s2_ids, vec![1, 2]);
        assert_eq!(run.solution.ids, vec![0]);
        assert_eq!(run.solution.value, 3.0);
    }

    #[test]
    fn known_max_uses_a_static_grid() {
        let f = path3();
        let stream = make_elements(3, None).unwrap();
        let mut p = exact_params(1);
        p.solver = UnconstrainedSolver::new(SolverKind::Exact, 0);
        let run =
            sieve_cardinality_known_max(&f, &stream, p, 2.0, 0.5, GridMode::Safe).unwrap();
        // Safe window [2/1.5, 2] holds the single guess 1.5.
        assert_eq!(run.instances.len(), 1);
        assert_eq!(run.instances[0].guess, 1.5);
        assert_eq!(run.solution.ids, vec![1]);
        assert_eq!(run.solution.value, 2.0);
    }

    #[test]
    fn paper_grid_can_be_empty_where_safe_is_not() {
        // With m = 2, ε = 0.5 no power of 1.5 lies in [2, 2]: the
        // textbook window is empty and the run returns the empty set,
        // while the safe window still carries guess 1.5.
        let f = path3();
        let stream = make_elements(3, None).unwrap();
        let run =
            sieve_cardinality_known_max(&f, &stream, exact_params(1), 2.0, 0.5, GridMode::Paper)
                .unwrap();
        assert!(run.instances.is_empty());
        assert_eq!(run.solution.ids, Vec::<ElementId>::new());
        assert_eq!(run.solution.value, 0.0);
    }

    #[test]
    fn one_pass_traces_the_path_fixture() {
        let f = path3();
        let stream = make_elements(3, None).unwrap();
        let run =
            sieve_cardinality_onepass(&f, &stream, exact_params(1), 1.0, GridMode::Safe).unwrap();
        assert_eq!(run.solution.ids, vec![1]);
        assert_eq!(run.solution.value, 2.0);
        // Final window after m = 2: guesses 1, 2, 4, 8 (the guess 0.5
        // instance was deleted when m rose).
        let guesses: Vec<f64> = run.instances.iter().map(|s| s.guess).collect();
        assert_eq!(guesses, vec![1.0, 2.0, 4.0, 8.0]);
        // Guess 8 was created at element 1 and accepted it into S1; the
        // smaller guesses were already full with element 0.
        assert_eq!(run.instances[3].s1_ids, vec![1]);
        assert_eq!(run.instances[0].s1_ids, vec![0]);
        assert_eq!(run.instances[0].s2_ids, vec![1]);
        assert_eq!(run.instrumentation.oracle_queries_total, 17);
        assert_eq!(run.instrumentation.peak_resident_elements, 11);
        assert_eq!(run.instrumentation.elements_seen, 3);
        assert!(run.instrumentation.per_element_query_bound_ok);
        assert!(!run.instrumentation.early_terminated);
    }

    #[test]
    fn one_pass_handles_an_all_zero_function() {
        let f = TableOracle::new(3, vec![0.0; 8]).unwrap();
        let stream = make_elements(3, None).unwrap();
        let run =
            sieve_cardinality_onepass(&f, &stream, exact_params(2), 0.5, GridMode::Safe).unwrap();
        assert!(run.instances.is_empty());
        assert_eq!(run.solution.ids, Vec::<ElementId>::new());
        assert_eq!(run.solution.value, 0.0);
        // One singleton probe per element, nothing else.
        assert_eq!(run.instrumentation.oracle_queries_stream, 3);
    }

    #[test]
    fn one_pass_instances_match_fresh_known_opt_replays() {
        let f = CutOracle::new(
            6,
            vec![
                (0, 1, 0.7),
                (0, 2, 1.3),
                (1, 3, 2.1),
                (2, 4, 0.4),
                (3, 5, 1.9),
                (1, 4, 0.8),
            ],
            false,
        )
        .unwrap();
        let stream = make_elements(6, None).unwrap();
        let run =
            sieve_cardinality_onepass(&f, &stream, exact_params(2), 0.2, GridMode::Safe).unwrap();
        assert!(!run.instances.is_empty());
        for snap in &run.instances {
            let replay =
                sieve_cardinality_known_opt(&f, &stream, exact_params(2), snap.guess).unwrap();
            assert_eq!(replay.instances[0].s1_ids, snap.s1_ids, "guess {}", snap.guess);
            assert_eq!(replay.instances[0].s2_ids, snap.s2_ids, "guess {}", snap.guess);
        }
    }

    #[test]
    fn memory_cap_formula_matches_hand_values() {
        // Single guess: 3k · 2.
        assert_eq!(cardinality_memory_cap(4, None, 1.0 / 6.0), 24.0);
        // k = 1, ε = 1: ⌈log2 6⌉ + 2 = 5 guesses, cap 3 · 6 = 18.
        assert_eq!(cardinality_memory_cap(1, Some(1.0), 1.0 / 6.0), 18.0);
    }

    #[test]
    fn params_validation_rejects_bad_inputs() {
        let solver = UnconstrainedSolver::new(SolverKind::Exact, 0);
        assert!(CardinalityParams::new(0, 1.0 / 6.0, solver).is_err());
        assert!(CardinalityParams::new(2, 0.0, solver).is_err());
        assert!(CardinalityKnownOpt::new(exact_params(1), 0.0).is_err());
        assert!(CardinalityKnownMax::new(exact_params(1), 0.0, 0.1, GridMode::Safe).is_err());
        assert!(CardinalityKnownMax::new(exact_params(1), 1.0, 0.0, GridMode::Safe).is_err());
        assert!(CardinalityOnePass::new(exact_params(1), -0.5, GridMode::Safe).is_err());
    }
}
