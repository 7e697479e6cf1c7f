//! Ground-set and stream abstractions shared by every algorithm: element
//! ids, the value-oracle interface with query accounting, feasibility
//! constraints with exact cost arithmetic, candidate sets that cache their
//! own value, and the single-pass stream driver that collects
//! instrumentation.

use std::cell::Cell;
use std::cmp::Ordering;

use num::{BigRational, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense element identifier in `0..ground_size`.
pub type ElementId = u32;

/// One stream item: an element id plus its per-dimension costs. The cost
/// vector is empty for cardinality-only runs. `costs_f64` holds rounded
/// copies for density comparisons; feasibility always uses the exact
/// values.
#[derive(Debug, Clone)]
pub struct GroundElement {
    pub id: ElementId,
    pub costs: Vec<BigRational>,
    pub costs_f64: Vec<f64>,
}

impl GroundElement {
    pub fn new(id: ElementId) -> Self {
        GroundElement {
            id,
            costs: Vec::new(),
            costs_f64: Vec::new(),
        }
    }

    pub fn with_costs(id: ElementId, costs: Vec<BigRational>) -> Self {
        let costs_f64 = costs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        GroundElement {
            id,
            costs,
            costs_f64,
        }
    }
}

/// A non-negative set function given by a value oracle. `set` must be
/// strictly increasing and within `0..ground_size()`.
pub trait SetFunction {
    fn ground_size(&self) -> usize;
    fn evaluate(&self, set: &[ElementId]) -> f64;
}

/// Query-counting wrapper around a set function. Every oracle call made
/// during a run goes through one of these so instrumentation can attribute
/// queries to the init, stream, and post-processing phases.
pub struct MeteredOracle<'a> {
    inner: &'a dyn SetFunction,
    queries: Cell<u64>,
}

impl<'a> MeteredOracle<'a> {
    pub fn new(inner: &'a dyn SetFunction) -> Self {
        MeteredOracle {
            inner,
            queries: Cell::new(0),
        }
    }

    pub fn ground_size(&self) -> usize {
        self.inner.ground_size()
    }

    pub fn evaluate(&self, set: &[ElementId]) -> f64 {
        debug_assert!(set.windows(2).all(|w| w[0] < w[1]), "set must be strictly increasing");
        debug_assert!(set.last().map_or(true, |&u| (u as usize) < self.inner.ground_size()));
        self.queries.set(self.queries.get() + 1);
        self.inner.evaluate(set)
    }

    pub fn queries(&self) -> u64 {
        self.queries.get()
    }
}

/// Exact d-row cost matrix stored column-major: `column(j)` is the cost
/// vector of element `j` across the d dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    dims: usize,
    columns: Vec<Vec<BigRational>>,
}

impl CostMatrix {
    /// Builds from d rows of n entries each (the file layout).
    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::input("cost matrix needs at least one dimension"));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::input("cost matrix rows have unequal lengths"));
        }
        let dims = rows.len();
        let mut columns = vec![Vec::with_capacity(dims); n];
        for row in &rows {
            for (j, c) in row.iter().enumerate() {
                columns[j].push(c.clone());
            }
        }
        Ok(CostMatrix { dims, columns })
    }

    pub fn from_columns(dims: usize, columns: Vec<Vec<BigRational>>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::input("cost matrix needs at least one dimension"));
        }
        if columns.iter().any(|c| c.len() != dims) {
            return Err(Error::input("cost column length does not match dimension count"));
        }
        Ok(CostMatrix { dims, columns })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of elements (columns).
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, j: usize) -> &[BigRational] {
        &self.columns[j]
    }

    pub fn rows(&self) -> Vec<Vec<BigRational>> {
        let mut rows = vec![Vec::with_capacity(self.len()); self.dims];
        for col in &self.columns {
            for (i, c) in col.iter().enumerate() {
                rows[i].push(c.clone());
            }
        }
        rows
    }
}

/// Feasibility side of a run: either a size bound or d exact packing
/// constraints sharing one capacity (instances are standardized so every
/// dimension has the same budget).
#[derive(Debug, Clone)]
pub enum Constraint {
    Cardinality { k: usize },
    DKnapsack { costs: CostMatrix, capacity: BigRational },
}

impl Constraint {
    /// Whether `set` (plus an optional extra element) satisfies the
    /// constraint. Cost sums are exact; no rounding is involved.
    pub fn is_feasible(&self, set: &[ElementId], extra: Option<ElementId>) -> Result<bool> {
        match self {
            Constraint::Cardinality { k } => {
                let size = set.len() + usize::from(extra.is_some());
                Ok(size <= *k)
            }
            Constraint::DKnapsack { costs, capacity } => {
                let mut totals = vec![BigRational::from_integer(0.into()); costs.dims()];
                let mut add = |id: ElementId| -> Result<()> {
                    let j = id as usize;
                    if j >= costs.len() {
                        return Err(Error::input(format!("element id {id} outside cost matrix")));
                    }
                    for (t, c) in totals.iter_mut().zip(costs.column(j)) {
                        *t += c;
                    }
                    Ok(())
                };
                for &id in set {
                    add(id)?;
                }
                if let Some(id) = extra {
                    add(id)?;
                }
                Ok(totals.iter().all(|t| t <= capacity))
            }
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            Constraint::Cardinality { .. } => 0,
            Constraint::DKnapsack { costs, .. } => costs.dims(),
        }
    }
}

/// A set under construction during the pass. Remembers insertion order
/// (needed to compare against replayed runs), keeps a sorted copy for
/// oracle calls, and caches its own value and exact cost totals so that
/// testing an element costs exactly one oracle query.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    ids: Vec<ElementId>,
    sorted: Vec<ElementId>,
    value: f64,
    cost_totals: Vec<BigRational>,
}

impl CandidateSet {
    /// `empty_value` is f(∅); `dims` is the cost dimension count (0 for
    /// cardinality runs).
    pub fn new(empty_value: f64, dims: usize) -> Self {
        CandidateSet {
            ids: Vec::new(),
            sorted: Vec::new(),
            value: empty_value,
            cost_totals: vec![BigRational::from_integer(0.into()); dims],
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Ids in insertion order.
    pub fn ids(&self) -> &[ElementId] {
        &self.ids
    }

    pub fn sorted_ids(&self) -> &[ElementId] {
        &self.sorted
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.sorted.binary_search(&id).is_ok()
    }

    pub fn cost_totals(&self) -> &[BigRational] {
        &self.cost_totals
    }

    /// f(S ∪ {u}) via a single oracle query. Errors if `u` is already in
    /// the set.
    pub fn value_with(&self, oracle: &MeteredOracle<'_>, u: ElementId) -> Result<f64> {
        match self.sorted.binary_search(&u) {
            Ok(_) => Err(Error::contract(format!("element {u} already in candidate set"))),
            Err(pos) => {
                let mut probe = Vec::with_capacity(self.sorted.len() + 1);
                probe.extend_from_slice(&self.sorted[..pos]);
                probe.push(u);
                probe.extend_from_slice(&self.sorted[pos..]);
                Ok(oracle.evaluate(&probe))
            }
        }
    }

    /// Marginal gain f(u | S) = f(S ∪ {u}) - f(S); one oracle query.
    pub fn marginal(&self, oracle: &MeteredOracle<'_>, u: ElementId) -> Result<f64> {
        Ok(self.value_with(oracle, u)? - self.value)
    }

    /// Inserts `u` given the already-queried value of f(S ∪ {u}); costs no
    /// oracle query. `costs` must match the set's dimension count.
    pub fn insert(&mut self, u: ElementId, new_value: f64, costs: &[BigRational]) -> Result<()> {
        if costs.len() != self.cost_totals.len() {
            return Err(Error::input(format!(
                "cost vector has {} dimensions, candidate set expects {}",
                costs.len(),
                self.cost_totals.len()
            )));
        }
        match self.sorted.binary_search(&u) {
            Ok(_) => Err(Error::contract(format!("element {u} already in candidate set"))),
            Err(pos) => {
                self.sorted.insert(pos, u);
                self.ids.push(u);
                self.value = new_value;
                for (t, c) in self.cost_totals.iter_mut().zip(costs) {
                    *t += c;
                }
                Ok(())
            }
        }
    }

    /// Exact capacity test: totals + costs fit under `capacity` in every
    /// dimension.
    pub fn fits_with(&self, costs: &[BigRational], capacity: &BigRational) -> bool {
        self.cost_totals
            .iter()
            .zip(costs)
            .all(|(t, c)| t + c <= *capacity)
    }
}

/// Counters collected by the stream driver. Byte-for-byte reproducible for
/// a fixed config, so reports can be compared directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instrumentation {
    pub elements_seen: u64,
    pub passes: u64,
    pub oracle_queries_total: u64,
    pub oracle_queries_init: u64,
    pub oracle_queries_stream: u64,
    pub oracle_queries_post: u64,
    pub oracle_queries_per_element_max: u64,
    pub peak_resident_elements: u64,
    pub max_live_instances: u64,
    pub per_element_query_bound_ok: bool,
    pub early_terminated: bool,
}

impl Instrumentation {
    fn new() -> Self {
        Instrumentation {
            elements_seen: 0,
            passes: 0,
            oracle_queries_total: 0,
            oracle_queries_init: 0,
            oracle_queries_stream: 0,
            oracle_queries_post: 0,
            oracle_queries_per_element_max: 0,
            peak_resident_elements: 0,
            max_live_instances: 0,
            per_element_query_bound_ok: true,
            early_terminated: false,
        }
    }
}

/// Final output of a run: ids ascending plus the oracle value of that set.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub ids: Vec<ElementId>,
    pub value: f64,
}

impl Solution {
    pub fn empty(value: f64) -> Self {
        Solution { ids: Vec::new(), value }
    }
}

/// Whether the algorithm wants to keep consuming the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    /// The algorithm already holds its final answer; the driver stops the
    /// pass without reading further elements.
    EarlyReturn,
}

/// A streaming algorithm driven by [`run_stream`]: one `begin`, one `step`
/// per element (single pass), one `finish`.
pub trait StreamAlgorithm {
    fn begin(&mut self, oracle: &MeteredOracle<'_>) -> Result<()>;
    fn step(&mut self, element: &GroundElement, oracle: &MeteredOracle<'_>) -> Result<StepOutcome>;
    /// Number of live threshold instances (1 for single-guess algorithms).
    fn live_instances(&self) -> usize;
    /// Total element slots currently held across all candidate sets.
    fn resident_elements(&self) -> usize;
    fn finish(&mut self, oracle: &MeteredOracle<'_>) -> Result<Solution>;
}

/// Drives `alg` over `stream` in a single pass, enforcing stream hygiene
/// (unique, in-range ids) and recording instrumentation.
///
/// The per-element query bound is checked inline: after each step the
/// query count for that element must be at most `2 * live + 1`, where
/// `live` is the number of instances alive after the step.
pub fn run_stream<A: StreamAlgorithm + ?Sized>(
    function: &dyn SetFunction,
    stream: &[GroundElement],
    alg: &mut A,
) -> Result<(Solution, Instrumentation)> {
    let oracle = MeteredOracle::new(function);
    let mut instr = Instrumentation::new();
    let mut seen = vec![false; function.ground_size()];

    alg.begin(&oracle)?;
    instr.oracle_queries_init = oracle.queries();
    instr.passes = 1;

    let mut resident_peak = alg.resident_elements() as u64;
    for element in stream {
        let idx = element.id as usize;
        if idx >= seen.len() {
            return Err(Error::input(format!(
                "element id {} outside ground set of size {}",
                element.id,
                seen.len()
            )));
        }
        if seen[idx] {
            return Err(Error::stream(format!("duplicate element id {} in stream", element.id)));
        }
        seen[idx] = true;
        instr.elements_seen += 1;

        let before = oracle.queries();
        let outcome = alg.step(element, &oracle)?;
        let used = oracle.queries() - before;

        instr.oracle_queries_per_element_max = instr.oracle_queries_per_element_max.max(used);
        let live = alg.live_instances() as u64;
        instr.max_live_instances = instr.max_live_instances.max(live);
        if used > 2 * live + 1 {
            instr.per_element_query_bound_ok = false;
        }
        // The element just examined is in flight alongside whatever the
        // instances retained.
        resident_peak = resident_peak.max(alg.resident_elements() as u64 + 1);

        if outcome == StepOutcome::EarlyReturn {
            instr.early_terminated = true;
            break;
        }
    }
    instr.oracle_queries_stream = oracle.queries() - instr.oracle_queries_init;

    let solution = alg.finish(&oracle)?;
    instr.oracle_queries_post =
        oracle.queries() - instr.oracle_queries_init - instr.oracle_queries_stream;
    resident_peak = resident_peak.max(alg.resident_elements() as u64);

    instr.peak_resident_elements = resident_peak;
    instr.oracle_queries_total = oracle.queries();
    debug_assert_eq!(
        instr.oracle_queries_total,
        instr.oracle_queries_init + instr.oracle_queries_stream + instr.oracle_queries_post
    );
    Ok((solution, instr))
}

/// Post-run view of one threshold instance: which elements each candidate
/// set accepted (in arrival order), the post-pass solve result, and the
/// recorded big element if any. Used to compare a lazily created instance
/// against a fresh run with the same guess.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSnapshot {
    /// Grid exponent of the guess; `None` for single-guess algorithms.
    pub exponent: Option<i64>,
    pub guess: f64,
    /// First/second candidate set ids in insertion order.
    pub s1_ids: Vec<ElementId>,
    pub s2_ids: Vec<ElementId>,
    pub s1_value: f64,
    pub s2_value: f64,
    /// Post-pass unconstrained solve over the first set (ids ascending).
    pub s3_ids: Vec<ElementId>,
    pub s3_value: f64,
    /// High-cost single element recorded by the knapsack sieves.
    pub big: Option<(ElementId, f64)>,
}

/// Everything a sieve run produces: the winning set, the instrumentation
/// counters, and a snapshot of every instance that survived to the end.
#[derive(Debug, Clone)]
pub struct SieveRun {
    pub solution: Solution,
    pub instrumentation: Instrumentation,
    pub instances: Vec<InstanceSnapshot>,
}

/// Replaces `best` when `value` is strictly greater, so the earliest
/// candidate in iteration order keeps ties and the winner is
/// deterministic.
pub(crate) fn consider_candidate(best: &mut Solution, ids: &[ElementId], value: f64) {
    if value > best.value {
        *best = Solution { ids: ids.to_vec(), value };
    }
}

/// Element slots held by finished instances (used for post-pass resident
/// accounting).
pub(crate) fn snapshot_resident(snapshots: &[InstanceSnapshot]) -> usize {
    snapshots
        .iter()
        .map(|s| s.s1_ids.len() + s.s2_ids.len() + s.s3_ids.len() + usize::from(s.big.is_some()))
        .sum()
}

/// Stream arrival order: file order, or a seeded in-memory shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamOrder {
    File,
    Shuffle { seed: u64 },
}

/// Builds the element stream for a ground set of size `n`, attaching cost
/// columns when a cost matrix is given.
pub fn make_elements(n: usize, costs: Option<&CostMatrix>) -> Result<Vec<GroundElement>> {
    if let Some(m) = costs {
        if m.len() != n {
            return Err(Error::input(format!(
                "cost matrix covers {} elements but ground set has {n}",
                m.len()
            )));
        }
    }
    Ok((0..n as ElementId)
        .map(|id| match costs {
            Some(m) => GroundElement::with_costs(id, m.column(id as usize).to_vec()),
            None => GroundElement::new(id),
        })
        .collect())
}

/// Applies the requested arrival order. Shuffling is a seeded
/// Fisher-Yates, so a given (stream, seed) pair always yields the same
/// permutation.
pub fn order_stream(mut elements: Vec<GroundElement>, order: StreamOrder) -> Vec<GroundElement> {
    if let StreamOrder::Shuffle { seed } = order {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for i in (1..elements.len()).rev() {
            let j = rng.random_range(0..=i);
            elements.swap(i, j);
        }
    }
    elements
}

/// Compares two f64 values, treating them as totally ordered (no NaNs are
/// produced by the oracles in this crate).
pub fn total_cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::CutOracle;

    fn path3() -> CutOracle {
        CutOracle::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)], false).unwrap()
    }

    #[test]
    fn metered_oracle_counts_queries() {
        let f = path3();
        let oracle = MeteredOracle::new(&f);
        assert_eq!(oracle.queries(), 0);
        oracle.evaluate(&[]);
        oracle.evaluate(&[1]);
        assert_eq!(oracle.queries(), 2);
    }

    #[test]
    fn candidate_set_marginals_and_inserts() {
        let f = path3();
        let oracle = MeteredOracle::new(&f);
        let mut s = CandidateSet::new(0.0, 0);
        assert_eq!(s.marginal(&oracle, 0).unwrap(), 1.0);
        let v = s.value_with(&oracle, 0).unwrap();
        s.insert(0, v, &[]).unwrap();
        // f({0, 1}) = 1, so the marginal of 1 given {0} is 0.
        assert_eq!(s.marginal(&oracle, 1).unwrap(), 0.0);
        assert_eq!(s.marginal(&oracle, 2).unwrap(), 1.0);
        assert!(s.contains(0));
        assert!(!s.contains(1));
        assert!(s.value_with(&oracle, 0).is_err());
    }

    #[test]
    fn candidate_set_tracks_exact_costs() {
        let half = BigRational::new(1.into(), 2.into());
        let cap = BigRational::from_integer(1.into());
        let mut s = CandidateSet::new(0.0, 1);
        assert!(s.fits_with(std::slice::from_ref(&half), &cap));
        s.insert(0, 1.0, std::slice::from_ref(&half)).unwrap();
        // 1/2 + 1/2 = 1 fits exactly; anything above does not.
        assert!(s.fits_with(std::slice::from_ref(&half), &cap));
        s.insert(1, 1.5, std::slice::from_ref(&half)).unwrap();
        assert!(!s.fits_with(std::slice::from_ref(&half), &cap));
    }

    #[test]
    fn cardinality_feasibility_counts_extra() {
        let c = Constraint::Cardinality { k: 2 };
        assert!(c.is_feasible(&[0, 1], None).unwrap());
        assert!(!c.is_feasible(&[0, 1], Some(2)).unwrap());
    }

    #[test]
    fn knapsack_feasibility_is_exact() {
        let third = BigRational::new(1.into(), 3.into());
        let costs = CostMatrix::from_rows(vec![vec![third.clone(), third.clone(), third.clone()]]).unwrap();
        let c = Constraint::DKnapsack {
            costs,
            capacity: BigRational::from_integer(1.into()),
        };
        // 1/3 * 3 = 1 exactly: feasible with no rounding slack needed.
        assert!(c.is_feasible(&[0, 1, 2], None).unwrap());
        assert!(c.is_feasible(&[0, 1], Some(2)).unwrap());
        assert!(c.is_feasible(&[0], None).unwrap());
    }

    struct CountingAlg {
        stop_at: Option<u64>,
        seen: u64,
        kept: Vec<ElementId>,
    }

    impl StreamAlgorithm for CountingAlg {
        fn begin(&mut self, oracle: &MeteredOracle<'_>) -> Result<()> {
            oracle.evaluate(&[]);
            Ok(())
        }
        fn step(&mut self, element: &GroundElement, oracle: &MeteredOracle<'_>) -> Result<StepOutcome> {
            oracle.evaluate(&[element.id]);
            self.seen += 1;
            self.kept.push(element.id);
            if self.stop_at == Some(self.seen) {
                return Ok(StepOutcome::EarlyReturn);
            }
            Ok(StepOutcome::Continue)
        }
        fn live_instances(&self) -> usize {
            1
        }
        fn resident_elements(&self) -> usize {
            self.kept.len()
        }
        fn finish(&mut self, _oracle: &MeteredOracle<'_>) -> Result<Solution> {
            Ok(Solution::empty(0.0))
        }
    }

    #[test]
    fn driver_rejects_duplicate_ids() {
        let f = path3();
        let stream = vec![GroundElement::new(1), GroundElement::new(1)];
        let mut alg = CountingAlg { stop_at: None, seen: 0, kept: Vec::new() };
        let err = run_stream(&f, &stream, &mut alg).unwrap_err();
        assert!(matches!(err, Error::Stream(_)));
    }

    #[test]
    fn driver_rejects_out_of_range_ids() {
        let f = path3();
        let stream = vec![GroundElement::new(7)];
        let mut alg = CountingAlg { stop_at: None, seen: 0, kept: Vec::new() };
        let err = run_stream(&f, &stream, &mut alg).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn driver_accounts_queries_by_phase() {
        let f = path3();
        let stream = make_elements(3, None).unwrap();
        let mut alg = CountingAlg { stop_at: None, seen: 0, kept: Vec::new() };
        let (_, instr) = run_stream(&f, &stream, &mut alg).unwrap();
        assert_eq!(instr.elements_seen, 3);
        assert_eq!(instr.passes, 1);
        assert_eq!(instr.oracle_queries_init, 1);
        assert_eq!(instr.oracle_queries_stream, 3);
        assert_eq!(instr.oracle_queries_post, 0);
        assert_eq!(instr.oracle_queries_total, 4);
        assert_eq!(instr.oracle_queries_per_element_max, 1);
        assert!(instr.per_element_query_bound_ok);
        assert!(!instr.early_terminated);
        // 3 retained elements plus the one in flight.
        assert_eq!(instr.peak_resident_elements, 4);
    }

    #[test]
    fn driver_records_early_termination() {
        let f = path3();
        let stream = make_elements(3, None).unwrap();
        let mut alg = CountingAlg { stop_at: Some(2), seen: 0, kept: Vec::new() };
        let (_, instr) = run_stream(&f, &stream, &mut alg).unwrap();
        assert!(instr.early_terminated);
        assert_eq!(instr.elements_seen, 2);
    }

    #[test]
    fn shuffle_is_seed_deterministic_and_a_permutation() {
        let base = make_elements(10, None).unwrap();
        let a = order_stream(base.clone(), StreamOrder::Shuffle { seed: 7 });
        let b = order_stream(base.clone(), StreamOrder::Shuffle { seed: 7 });
        let c = order_stream(base.clone(), StreamOrder::Shuffle { seed: 8 });
        let ids = |v: &[GroundElement]| v.iter().map(|e| e.id).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_ne!(ids(&a), ids(&c));
        let mut sorted = ids(&a);
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }
}
