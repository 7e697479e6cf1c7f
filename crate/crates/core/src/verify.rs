//! Verification batteries: seeded instance sweeps that check the
//! approximation ratios against the brute-force optimum, the density
//! bounds, memory and query caps, single-pass discipline, report
//! determinism, late-instantiation equivalence, standardization, and the
//! unconstrained solvers. The `verify` subcommand and the acceptance test
//! suite both run these.
//!
//! Suites never abort on a failing property: every check is tallied into
//! [`CheckStats`] with the first failure recorded verbatim, so one bad
//! instance yields a readable report instead of a panic.

use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cardinality::{sieve_cardinality_known_opt, sieve_cardinality_onepass, CardinalityParams, GridMode};
use crate::exact::{exact_opt, verify_ratio};
use crate::gen::{gen_cut, gen_raw_knapsack, gen_table, CutGenParams};
use crate::grid::grid_value;
use crate::harness::{
    execute_with, AlgorithmKind, LoadedOracle, OracleSpec, OrderKind, RunConfig, RunReport,
};
use crate::knapsack::{
    density_max, sieve_knapsack_known_opt, sieve_knapsack_onepass, standardize, KnapsackParams,
    StandardizedInstance,
};
use crate::model::{
    make_elements, order_stream, Constraint, CostMatrix, ElementId, MeteredOracle, StreamOrder,
};
use crate::oracles::CoverageOracle;
use crate::unconstrained::{
    cardinality_threshold_coeff, knapsack_threshold_coeff, SolverKind, UnconstrainedSolver,
};

/// Grid resolution used by the ratio batteries.
pub const BATTERY_EPS: f64 = 0.1;

/// Numeric slack, relative for magnitudes above 1: the batteries compare
/// float oracle values, so exact-tie comparisons get this much room.
const SLACK: f64 = 1e-9;

fn slack_for(x: f64) -> f64 {
    SLACK * x.abs().max(1.0)
}

/// Tally for one named property across many runs.
#[derive(Debug, Clone, Serialize)]
pub struct CheckStats {
    pub name: String,
    pub runs: u64,
    pub passes: u64,
    pub failures: u64,
    /// Runs where the property was vacuous (e.g. a zero optimum makes a
    /// positivity-scaled guess meaningless); counted separately so a
    /// battery that only ever skips cannot look green.
    pub skips: u64,
    /// Smallest margin observed across runs, where the margin is the
    /// check's own figure of merit (achieved/required ratio, or remaining
    /// slack factor). Failures contribute too.
    pub worst_margin: Option<f64>,
    pub first_failure: Option<String>,
}

impl CheckStats {
    fn new(name: &str) -> Self {
        CheckStats {
            name: name.to_string(),
            runs: 0,
            passes: 0,
            failures: 0,
            skips: 0,
            worst_margin: None,
            first_failure: None,
        }
    }

    fn record(&mut self, pass: bool, margin: Option<f64>, detail: impl FnOnce() -> String) {
        self.runs += 1;
        if let Some(m) = margin {
            self.worst_margin = Some(self.worst_margin.map_or(m, |w| w.min(m)));
        }
        if pass {
            self.passes += 1;
        } else {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    fn skip(&mut self) {
        self.runs += 1;
        self.skips += 1;
    }

    /// Green means nothing failed, and if the property was exercised at all
    /// it passed at least once — a check that only ever skipped stays red,
    /// while an empty battery (zero instances requested) is trivially green.
    pub fn ok(&self) -> bool {
        self.failures == 0 && (self.passes > 0 || self.runs == 0)
    }
}

/// One suite's whole tally.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<CheckStats>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(CheckStats::ok)
    }

    pub fn check(&self, name: &str) -> Option<&CheckStats> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let verdict = if self.all_pass() { "PASS" } else { "FAIL" };
        let mut out = format!("suite {} ... {verdict}\n", self.name);
        for c in &self.checks {
            let mark = if c.ok() { "PASS" } else { "FAIL" };
            let margin = c
                .worst_margin
                .map_or_else(|| "-".to_string(), |m| format!("{m:.6}"));
            out.push_str(&format!(
                "  {mark} {:<34} runs={:<6} passes={:<6} failures={:<3} skips={:<3} worst_margin={margin}\n",
                c.name, c.runs, c.passes, c.failures, c.skips
            ));
            if let Some(f) = &c.first_failure {
                out.push_str(&format!("       first failure: {f}\n"));
            }
        }
        out
    }
}

/// How many instances each battery sweeps. `full()` is the acceptance
/// scale; `quick()` keeps `verify` and the unit tests fast.
#[derive(Debug, Clone, Copy)]
pub struct BatteryScale {
    pub card_instances: usize,
    pub dk_instances: usize,
    pub equivalence_streams: usize,
    pub standardization_instances: usize,
    pub determinism_configs: usize,
    pub unconstrained_tables: usize,
    pub rdg_seeds: u64,
}

impl BatteryScale {
    pub fn quick() -> Self {
        BatteryScale {
            card_instances: 60,
            dk_instances: 45,
            equivalence_streams: 24,
            standardization_instances: 20,
            determinism_configs: 12,
            unconstrained_tables: 40,
            rdg_seeds: 200,
        }
    }

    pub fn full() -> Self {
        BatteryScale {
            card_instances: 500,
            dk_instances: 300,
            equivalence_streams: 200,
            standardization_instances: 100,
            determinism_configs: 50,
            unconstrained_tables: 200,
            rdg_seeds: 1000,
        }
    }

    /// Same instance count for every battery; `0` yields an empty (and
    /// trivially passing) summary.
    pub fn with_instances(count: usize) -> Self {
        BatteryScale {
            card_instances: count,
            dk_instances: count,
            equivalence_streams: count,
            standardization_instances: count,
            determinism_configs: count,
            unconstrained_tables: count,
            rdg_seeds: 200,
        }
    }
}

fn memory_label(oracle: &LoadedOracle, seed: u64) -> OracleSpec {
    let kind = oracle.kind();
    OracleSpec {
        kind,
        path: format!("<memory:{kind:?}:seed={seed}>").to_lowercase(),
    }
}

/// Cardinality battery oracle rotation: random cut graphs (mostly
/// undirected, some directed) and validated random value tables.
fn battery_oracle(n: usize, idx: usize) -> LoadedOracle {
    let seed = idx as u64;
    if idx % 2 == 0 {
        LoadedOracle::Graph(gen_cut(
            CutGenParams {
                n,
                edge_prob: 0.5,
                weight_min: 0.5,
                weight_max: 2.0,
                directed: idx % 6 == 0,
            },
            seed,
        ))
    } else {
        LoadedOracle::Table(gen_table(n, seed).expect("generated table is submodular"))
    }
}

fn card_config(oracle_spec: OracleSpec, k: usize, order: OrderKind, seed: u64) -> RunConfig {
    RunConfig {
        algorithm: AlgorithmKind::CardOnePass,
        oracle: oracle_spec,
        k: Some(k),
        eps: Some(BATTERY_EPS),
        v: None,
        m: None,
        costs: None,
        caps: None,
        solver: SolverKind::Exact,
        order,
        seed,
        grid: GridMode::Safe,
        gamma: None,
        verify_exact: false,
    }
}

/// Records the four per-run invariants from a report into shared stats.
fn record_invariants(
    report: &RunReport,
    feasible: &mut CheckStats,
    memory: &mut CheckStats,
    query: &mut CheckStats,
    single_pass: &mut CheckStats,
    label: &str,
) {
    let c = &report.checks;
    let peak = report.instrumentation.peak_resident_elements as f64;
    let mem_margin = if peak > 0.0 { c.memory_cap / peak } else { c.memory_cap.max(1.0) };
    feasible.record(c.output_feasible, None, || format!("{label}: infeasible output"));
    memory.record(c.memory_within_cap, Some(mem_margin), || {
        format!("{label}: peak {peak} exceeds cap {}", c.memory_cap)
    });
    query.record(c.query_bound_ok, None, || {
        format!("{label}: per-element query bound violated")
    });
    single_pass.record(c.single_pass, None, || {
        format!(
            "{label}: passes={} seen={} early={}",
            report.instrumentation.passes,
            report.instrumentation.elements_seen,
            report.instrumentation.early_terminated
        )
    });
}

/// Three arrival orders per instance: file order plus two distinct
/// shuffles.
fn battery_orders(idx: usize) -> [(OrderKind, u64); 3] {
    [
        (OrderKind::File, idx as u64),
        (OrderKind::Shuffle, 1_000_000 + idx as u64),
        (OrderKind::Shuffle, 2_000_000 + idx as u64),
    ]
}

/// Ratio and invariant battery for the cardinality sieves: the one-pass
/// sieve against (coeff − ε)·OPT on every instance and order, the
/// known-optimum sieve at v = OPT against coeff·OPT, and the known-max
/// sieve at the true maximum singleton against (coeff − ε)·OPT.
pub fn cardinality_suite(scale: &BatteryScale) -> SuiteReport {
    let mut onepass_ratio = CheckStats::new("card_onepass_ratio");
    let mut knownopt_ratio = CheckStats::new("card_knownopt_ratio");
    let mut knownmax_ratio = CheckStats::new("card_knownmax_ratio");
    let mut feasible = CheckStats::new("card_output_feasible");
    let mut memory = CheckStats::new("card_memory_within_cap");
    let mut query = CheckStats::new("card_query_bound");
    let mut single_pass = CheckStats::new("card_single_pass");

    for idx in 0..scale.card_instances {
        let n = 4 + (idx % 9); // 4..=12
        let k = 1 + (idx % 4);
        let oracle = battery_oracle(n, idx);
        let function = oracle.as_fn();
        let spec = memory_label(&oracle, idx as u64);
        let opt = match exact_opt(function, &Constraint::Cardinality { k }) {
            Ok(o) => o,
            Err(e) => {
                onepass_ratio.record(false, None, || format!("instance {idx}: exact_opt: {e}"));
                continue;
            }
        };

        // Maximum singleton value, the known-max sieve's input.
        let max_singleton = (0..n as ElementId)
            .map(|id| function.evaluate(&[id]))
            .fold(0.0f64, f64::max);

        for (order, seed) in battery_orders(idx) {
            let label = format!("card instance {idx} (n={n} k={k} order={order:?} seed={seed})");

            let config = card_config(spec.clone(), k, order, seed);
            match execute_with(&config, function, None) {
                Ok(report) => {
                    let rc = verify_ratio(report.output_value, opt.opt_value, report.guarantee_bound);
                    onepass_ratio.record(rc.pass, rc.margin, || {
                        format!(
                            "{label}: one-pass value {} < {} · OPT {}",
                            report.output_value, report.guarantee_bound, opt.opt_value
                        )
                    });
                    record_invariants(&report, &mut feasible, &mut memory, &mut query, &mut single_pass, &label);
                }
                Err(e) => onepass_ratio.record(false, None, || format!("{label}: {e}")),
            }

            if opt.opt_value > 0.0 {
                let mut config = card_config(spec.clone(), k, order, seed);
                config.algorithm = AlgorithmKind::CardKnownOpt;
                config.eps = None;
                config.v = Some(opt.opt_value);
                match execute_with(&config, function, None) {
                    Ok(report) => {
                        let rc =
                            verify_ratio(report.output_value, opt.opt_value, report.guarantee_bound);
                        knownopt_ratio.record(rc.pass, rc.margin, || {
                            format!(
                                "{label}: known-opt value {} < {} · OPT {}",
                                report.output_value, report.guarantee_bound, opt.opt_value
                            )
                        });
                        record_invariants(&report, &mut feasible, &mut memory, &mut query, &mut single_pass, &label);
                    }
                    Err(e) => knownopt_ratio.record(false, None, || format!("{label}: {e}")),
                }
            } else {
                // OPT = 0: any feasible output meets coeff · OPT, and the
                // sieve needs a positive guess, so the run is vacuous.
                knownopt_ratio.skip();
            }
        }

        // Known-max at the true maximum singleton, file order.
        let mut config = card_config(spec.clone(), k, OrderKind::File, idx as u64);
        config.algorithm = AlgorithmKind::CardKnownMax;
        config.m = Some(max_singleton);
        match execute_with(&config, function, None) {
            Ok(report) => {
                let rc = verify_ratio(report.output_value, opt.opt_value, report.guarantee_bound);
                knownmax_ratio.record(rc.pass, rc.margin, || {
                    format!(
                        "card instance {idx}: known-max value {} < {} · OPT {}",
                        report.output_value, report.guarantee_bound, opt.opt_value
                    )
                });
                let label = format!("card instance {idx} known-max");
                record_invariants(&report, &mut feasible, &mut memory, &mut query, &mut single_pass, &label);
            }
            Err(e) => knownmax_ratio.record(false, None, || format!("card instance {idx}: {e}")),
        }
    }

    SuiteReport {
        name: "cardinality".to_string(),
        checks: vec![onepass_ratio, knownopt_ratio, knownmax_ratio, feasible, memory, query, single_pass],
    }
}

/// Draws a cost matrix already in standard form: capacity b, every cost a
/// rational in [1, b] with denominator at most 4.
fn standard_form_costs(dims: usize, n: usize, b: u32, rng: &mut ChaCha8Rng) -> CostMatrix {
    let columns: Vec<Vec<BigRational>> = (0..n)
        .map(|_| {
            (0..dims)
                .map(|_| {
                    let q = rng.random_range(1..=4u32);
                    let p = rng.random_range(0..=(b - 1) * q);
                    BigRational::new((q + p).into(), q.into())
                })
                .collect()
        })
        .collect();
    CostMatrix::from_columns(dims, columns).expect("generated columns are consistent")
}

fn dk_config(
    oracle_spec: OracleSpec,
    algorithm: AlgorithmKind,
    order: OrderKind,
    seed: u64,
) -> RunConfig {
    RunConfig {
        algorithm,
        oracle: oracle_spec,
        k: None,
        eps: Some(BATTERY_EPS),
        v: None,
        m: None,
        costs: Some("<memory>".to_string()),
        caps: Some("<memory>".to_string()),
        solver: SolverKind::Exact,
        order,
        seed,
        grid: GridMode::Safe,
        gamma: None,
        verify_exact: false,
    }
}

/// Ratio, density-bound, grid-coverage, and standardization battery for
/// the knapsack sieves. Instances are generated directly in standard form
/// (capacity b ∈ {2..6}, rational costs in [1, b], d ∈ {1,2,3}); the
/// standardization checks run on separately generated raw instances.
pub fn knapsack_suite(scale: &BatteryScale) -> SuiteReport {
    let mut onepass_ratio = CheckStats::new("dk_onepass_ratio");
    let mut onepass_ratio_d1 = CheckStats::new("dk_onepass_ratio_d1");
    let mut knownopt_ratio = CheckStats::new("dk_knownopt_ratio");
    let mut knowndensity_ratio = CheckStats::new("dk_knowndensity_ratio");
    let mut lemma = CheckStats::new("dk_density_bounds");
    let mut grid_cover = CheckStats::new("dk_grid_contains_near_opt");
    let mut feasible = CheckStats::new("dk_output_feasible");
    let mut memory = CheckStats::new("dk_memory_within_cap");
    let mut query = CheckStats::new("dk_query_bound");
    let mut single_pass = CheckStats::new("dk_single_pass");

    for idx in 0..scale.dk_instances {
        let d = 1 + idx % 3;
        let b = 2 + ((idx / 3) % 5) as u32; // 2..=6
        let n = 4 + (idx % 7); // 4..=10
        let mut rng = ChaCha8Rng::seed_from_u64(0xd0_c057 ^ idx as u64);
        let std = StandardizedInstance {
            costs: standard_form_costs(d, n, b, &mut rng),
            capacity: BigRational::from_integer(b.into()),
            cap_scale: BigRational::from_integer(b.into()),
            cost_scale: BigRational::from_integer(1.into()),
        };
        std.validate().expect("standard-form generation is in range");

        let oracle = battery_oracle(n, idx);
        let function = oracle.as_fn();
        let spec = memory_label(&oracle, idx as u64);
        let constraint = std.constraint();
        let opt = match exact_opt(function, &constraint) {
            Ok(o) => o,
            Err(e) => {
                onepass_ratio.record(false, None, || format!("dk instance {idx}: exact_opt: {e}"));
                continue;
            }
        };

        let elements = make_elements(n, Some(&std.costs)).expect("cost matrix covers ground set");
        let m_density = density_max(function, &elements);

        // Density bounds: m ≤ OPT ≤ b·m, exactly the window the grids use.
        let lemma_ok = opt.opt_value >= m_density - slack_for(m_density)
            && opt.opt_value <= b as f64 * m_density + slack_for(opt.opt_value);
        lemma.record(lemma_ok, None, || {
            format!(
                "dk instance {idx}: OPT {} outside [m, b·m] = [{}, {}]",
                opt.opt_value,
                m_density,
                b as f64 * m_density
            )
        });

        for (order, seed) in battery_orders(idx) {
            let label = format!("dk instance {idx} (n={n} d={d} b={b} order={order:?} seed={seed})");

            let config = dk_config(spec.clone(), AlgorithmKind::DkOnePass, order, seed);
            match execute_with(&config, function, Some(&std)) {
                Ok(report) => {
                    let rc = verify_ratio(report.output_value, opt.opt_value, report.guarantee_bound);
                    onepass_ratio.record(rc.pass, rc.margin, || {
                        format!(
                            "{label}: one-pass value {} < {} · OPT {}",
                            report.output_value, report.guarantee_bound, opt.opt_value
                        )
                    });
                    if d == 1 {
                        // The d = 1 specialization: the same run must clear
                        // 1/8 − ε explicitly.
                        let rc1 = verify_ratio(report.output_value, opt.opt_value, 0.125 - BATTERY_EPS);
                        onepass_ratio_d1.record(rc1.pass, rc1.margin, || {
                            format!(
                                "{label}: one-pass value {} < (1/8 − ε) · OPT {}",
                                report.output_value, opt.opt_value
                            )
                        });
                    }
                    record_invariants(&report, &mut feasible, &mut memory, &mut query, &mut single_pass, &label);
                }
                Err(e) => onepass_ratio.record(false, None, || format!("{label}: {e}")),
            }

            if opt.opt_value > 0.0 {
                let mut config = dk_config(spec.clone(), AlgorithmKind::DkKnownOpt, order, seed);
                config.eps = None;
                config.v = Some(opt.opt_value);
                match execute_with(&config, function, Some(&std)) {
                    Ok(report) => {
                        let rc =
                            verify_ratio(report.output_value, opt.opt_value, report.guarantee_bound);
                        knownopt_ratio.record(rc.pass, rc.margin, || {
                            format!(
                                "{label}: known-opt value {} < {} · OPT {}",
                                report.output_value, report.guarantee_bound, opt.opt_value
                            )
                        });
                        record_invariants(&report, &mut feasible, &mut memory, &mut query, &mut single_pass, &label);
                    }
                    Err(e) => knownopt_ratio.record(false, None, || format!("{label}: {e}")),
                }
            } else {
                knownopt_ratio.skip();
            }
        }

        // Known-density at the true maximum density, file order.
        let mut config = dk_config(spec.clone(), AlgorithmKind::DkKnownDensity, OrderKind::File, idx as u64);
        config.m = Some(m_density);
        match execute_with(&config, function, Some(&std)) {
            Ok(report) => {
                let rc = verify_ratio(report.output_value, opt.opt_value, report.guarantee_bound);
                knowndensity_ratio.record(rc.pass, rc.margin, || {
                    format!(
                        "dk instance {idx}: known-density value {} < {} · OPT {}",
                        report.output_value, report.guarantee_bound, opt.opt_value
                    )
                });
                let label = format!("dk instance {idx} known-density");
                record_invariants(&report, &mut feasible, &mut memory, &mut query, &mut single_pass, &label);
            }
            Err(e) => knowndensity_ratio.record(false, None, || format!("dk instance {idx}: {e}")),
        }

        // Grid coverage: the one-pass run's surviving grid must hold some
        // guess within (1+ε) below the optimum.
        if opt.opt_value > 0.0 {
            let params = KnapsackParams::new(
                knapsack_threshold_coeff(0.5, d),
                UnconstrainedSolver::new(SolverKind::Exact, 0),
            )
            .expect("battery coefficient is in range");
            let stream = order_stream(elements.clone(), StreamOrder::File);
            match sieve_knapsack_onepass(function, &stream, params, &std, BATTERY_EPS) {
                Ok(run) => {
                    let lo = opt.opt_value / (1.0 + BATTERY_EPS) - slack_for(opt.opt_value);
                    let hi = opt.opt_value + slack_for(opt.opt_value);
                    let covered = run
                        .instances
                        .iter()
                        .any(|s| s.guess >= lo && s.guess <= hi);
                    grid_cover.record(covered, None, || {
                        let guesses: Vec<f64> = run.instances.iter().map(|s| s.guess).collect();
                        format!(
                            "dk instance {idx}: no guess in [OPT/(1+ε), OPT] = [{lo}, {hi}]; grid {guesses:?}"
                        )
                    });
                }
                Err(e) => grid_cover.record(false, None, || format!("dk instance {idx}: {e}")),
            }
        } else {
            grid_cover.skip();
        }
    }

    let (std_equiv, std_range) = standardization_checks(scale);

    SuiteReport {
        name: "knapsack".to_string(),
        checks: vec![
            onepass_ratio,
            onepass_ratio_d1,
            knownopt_ratio,
            knowndensity_ratio,
            lemma,
            grid_cover,
            feasible,
            memory,
            query,
            single_pass,
            std_equiv,
            std_range,
        ],
    }
}

/// Exhaustive feasibility equivalence across standardization, plus the
/// postcondition that standardized entries land in [1, b].
fn standardization_checks(scale: &BatteryScale) -> (CheckStats, CheckStats) {
    let mut equivalence = CheckStats::new("standardization_equivalence");
    let mut range = CheckStats::new("standardization_entries_in_range");

    for idx in 0..scale.standardization_instances {
        let d = 1 + idx % 3;
        let n = 3 + idx % 8; // 3..=10
        let (costs, caps) = gen_raw_knapsack(d, n, 0xbeef ^ idx as u64);
        let std = match standardize(&costs, &caps) {
            Ok(s) => s,
            Err(e) => {
                equivalence.record(false, None, || format!("raw instance {idx}: {e}"));
                continue;
            }
        };

        range.record(std.validate().is_ok(), None, || {
            format!("raw instance {idx}: standardized entries out of [1, b]")
        });

        // Raw side: per-dimension capacities. Standardized side: the shared
        // capacity from the rescaled constraint. Both exact.
        let std_constraint = std.constraint();
        let mut all_masks_agree = true;
        let mut witness = String::new();
        for mask in 0u64..(1u64 << n) {
            let ids: Vec<ElementId> =
                (0..n as u32).filter(|i| mask & (1 << i) != 0).collect();
            let raw_feasible = (0..d).all(|dim| {
                let total: BigRational = ids
                    .iter()
                    .map(|&j| costs.column(j as usize)[dim].clone())
                    .sum();
                total <= caps[dim]
            });
            let std_feasible = std_constraint
                .is_feasible(&ids, None)
                .expect("ids are in range");
            if raw_feasible != std_feasible {
                all_masks_agree = false;
                witness = format!(
                    "raw instance {idx}: mask {mask:#b} raw={raw_feasible} standardized={std_feasible}"
                );
                break;
            }
        }
        equivalence.record(all_masks_agree, None, || witness.clone());
    }

    (equivalence, range)
}

/// Late-instantiation equivalence: every surviving grid instance of a
/// one-pass run must equal a fresh single-guess run at that guess over the
/// same stream. For the knapsack pair the fresh run may end early on a big
/// element; the lazy instance must then hold a qualifying big element of
/// its own (possibly a later one, since records overwrite).
pub fn equivalence_suite(scale: &BatteryScale) -> SuiteReport {
    let mut card = CheckStats::new("card_lazy_equivalence");
    let mut dk = CheckStats::new("dk_lazy_equivalence");
    let mut compared = CheckStats::new("instances_compared");

    let per_family = scale.equivalence_streams / 2;
    let solver = || UnconstrainedSolver::new(SolverKind::Exact, 0);

    for idx in 0..per_family {
        let n = 5 + idx % 8; // 5..=12
        let k = 1 + idx % 4;
        let eps = if idx % 2 == 0 { BATTERY_EPS } else { 0.2 };
        let oracle = battery_oracle(n, idx);
        let function = oracle.as_fn();
        let order = if idx % 3 == 0 {
            StreamOrder::File
        } else {
            StreamOrder::Shuffle { seed: idx as u64 }
        };
        let stream = order_stream(
            make_elements(n, None).expect("element ids fit"),
            order,
        );
        let coeff = cardinality_threshold_coeff(0.5);
        let params = CardinalityParams::new(k, coeff, solver()).expect("valid battery params");

        let run = match sieve_cardinality_onepass(function, &stream, params.clone(), eps, GridMode::Safe) {
            Ok(r) => r,
            Err(e) => {
                card.record(false, None, || format!("card stream {idx}: {e}"));
                continue;
            }
        };

        let mut stream_ok = true;
        let mut witness = String::new();
        for snap in &run.instances {
            let exponent = snap.exponent.expect("one-pass instances are grid-backed");
            let guess = grid_value(eps, exponent);
            let fresh =
                match sieve_cardinality_known_opt(function, &stream, params.clone(), guess) {
                    Ok(f) => f,
                    Err(e) => {
                        stream_ok = false;
                        witness = format!("card stream {idx} guess {guess}: {e}");
                        break;
                    }
                };
            let f = &fresh.instances[0];
            compared.record(true, None, String::new);
            if f.s1_ids != snap.s1_ids
                || f.s2_ids != snap.s2_ids
                || f.s1_value != snap.s1_value
                || f.s2_value != snap.s2_value
                || f.s3_ids != snap.s3_ids
                || f.s3_value != snap.s3_value
            {
                stream_ok = false;
                witness = format!(
                    "card stream {idx} exponent {exponent}: lazy S1={:?} S2={:?} vs fresh S1={:?} S2={:?}",
                    snap.s1_ids, snap.s2_ids, f.s1_ids, f.s2_ids
                );
                break;
            }
        }
        card.record(stream_ok, None, || witness.clone());
    }

    for idx in 0..scale.equivalence_streams - per_family {
        let n = 4 + idx % 7; // 4..=10
        let d = 1 + idx % 3;
        let b = 2 + (idx % 5) as u32;
        let eps = if idx % 2 == 0 { BATTERY_EPS } else { 0.2 };
        let mut rng = ChaCha8Rng::seed_from_u64(0x0e9_f00d ^ idx as u64);
        let std = StandardizedInstance {
            costs: standard_form_costs(d, n, b, &mut rng),
            capacity: BigRational::from_integer(b.into()),
            cap_scale: BigRational::from_integer(b.into()),
            cost_scale: BigRational::from_integer(1.into()),
        };
        let oracle = battery_oracle(n, idx + 7);
        let function = oracle.as_fn();
        let order = if idx % 3 == 0 {
            StreamOrder::File
        } else {
            StreamOrder::Shuffle { seed: 31 + idx as u64 }
        };
        let stream = order_stream(
            make_elements(n, Some(&std.costs)).expect("costs cover ground set"),
            order,
        );
        let coeff = knapsack_threshold_coeff(0.5, d);
        let params = KnapsackParams::new(coeff, solver()).expect("valid battery params");

        let run = match sieve_knapsack_onepass(function, &stream, params.clone(), &std, eps) {
            Ok(r) => r,
            Err(e) => {
                dk.record(false, None, || format!("dk stream {idx}: {e}"));
                continue;
            }
        };

        let mut stream_ok = true;
        let mut witness = String::new();
        for snap in &run.instances {
            let exponent = snap.exponent.expect("one-pass instances are grid-backed");
            let guess = grid_value(eps, exponent);
            let fresh = match sieve_knapsack_known_opt(function, &stream, params.clone(), &std, guess)
            {
                Ok(f) => f,
                Err(e) => {
                    stream_ok = false;
                    witness = format!("dk stream {idx} guess {guess}: {e}");
                    break;
                }
            };
            compared.record(true, None, String::new);
            let f = &fresh.instances[0];
            if fresh.instrumentation.early_terminated {
                // The fresh run stopped on a big element worth at least
                // τ = coeff · guess; the lazy instance must hold one too.
                let needed = coeff * guess;
                let holds = snap
                    .big
                    .map_or(false, |(_, value)| value >= needed - slack_for(needed));
                if !holds {
                    stream_ok = false;
                    witness = format!(
                        "dk stream {idx} exponent {exponent}: fresh run ended early on a big \
                         element but lazy instance has big={:?} (needed ≥ {needed})",
                        snap.big
                    );
                    break;
                }
            } else if f.s1_ids != snap.s1_ids
                || f.s2_ids != snap.s2_ids
                || f.s1_value != snap.s1_value
                || f.s2_value != snap.s2_value
                || f.big != snap.big
            {
                stream_ok = false;
                witness = format!(
                    "dk stream {idx} exponent {exponent}: lazy S1={:?} S2={:?} big={:?} vs \
                     fresh S1={:?} S2={:?} big={:?}",
                    snap.s1_ids, snap.s2_ids, snap.big, f.s1_ids, f.s2_ids, f.big
                );
                break;
            }
        }
        dk.record(stream_ok, None, || witness.clone());
    }

    SuiteReport { name: "equivalence".to_string(), checks: vec![card, dk, compared] }
}

/// Report determinism: every config is executed twice and the two reports
/// must agree byte for byte once the wall-clock field is zeroed. Configs
/// rotate through all six algorithms, the three solvers, both orders, both
/// grid modes, and all three oracle kinds.
pub fn determinism_suite(scale: &BatteryScale) -> SuiteReport {
    let mut identical = CheckStats::new("byte_identical_reports");
    let mut invariants = CheckStats::new("determinism_run_checks");

    let algorithms = [
        AlgorithmKind::CardKnownOpt,
        AlgorithmKind::CardKnownMax,
        AlgorithmKind::CardOnePass,
        AlgorithmKind::DkKnownOpt,
        AlgorithmKind::DkKnownDensity,
        AlgorithmKind::DkOnePass,
    ];
    let solvers = [SolverKind::Exact, SolverKind::DoubleGreedy, SolverKind::RandomDoubleGreedy];

    for idx in 0..scale.determinism_configs {
        let algorithm = algorithms[idx % algorithms.len()];
        let n = 5 + idx % 6; // 5..=10
        let oracle = match idx % 3 {
            0 | 1 => battery_oracle(n, idx),
            _ => LoadedOracle::Family(crate::gen::gen_family(
                crate::gen::FamilyGenParams {
                    universe: 2 * n,
                    n_sets: n,
                    cover_prob: 0.3,
                    weight_min: 0.5,
                    weight_max: 2.0,
                },
                idx as u64,
            )),
        };
        let function = oracle.as_fn();

        let std = if algorithm.is_knapsack() {
            let d = 1 + idx % 3;
            let b = 2 + (idx % 4) as u32;
            let mut rng = ChaCha8Rng::seed_from_u64(0xde7e_55 ^ idx as u64);
            Some(StandardizedInstance {
                costs: standard_form_costs(d, n, b, &mut rng),
                capacity: BigRational::from_integer(b.into()),
                cap_scale: BigRational::from_integer(b.into()),
                cost_scale: BigRational::from_integer(1.into()),
            })
        } else {
            None
        };

        let config = RunConfig {
            algorithm,
            oracle: memory_label(&oracle, idx as u64),
            k: algorithm.is_cardinality().then_some(1 + idx % 3),
            eps: algorithm.needs_eps().then_some([0.5, 0.2, 0.1][idx % 3]),
            v: (!algorithm.needs_eps()).then_some(1.0 + 0.25 * (idx % 5) as f64),
            m: matches!(algorithm, AlgorithmKind::CardKnownMax | AlgorithmKind::DkKnownDensity)
                .then_some(0.5 + 0.5 * (idx % 4) as f64),
            costs: std.as_ref().map(|_| "<memory>".to_string()),
            caps: std.as_ref().map(|_| "<memory>".to_string()),
            solver: solvers[idx % solvers.len()],
            order: if idx % 2 == 0 { OrderKind::File } else { OrderKind::Shuffle },
            seed: idx as u64,
            grid: if idx % 5 == 0 { GridMode::Paper } else { GridMode::Safe },
            gamma: None,
            verify_exact: idx % 2 == 0,
        };

        let label = format!("determinism config {idx} ({algorithm:?})");
        let first = execute_with(&config, function, std.as_ref());
        let second = execute_with(&config, function, std.as_ref());
        match (first, second) {
            (Ok(a), Ok(b)) => {
                identical.record(a.normalized_json() == b.normalized_json(), None, || {
                    format!("{label}: repeated runs differ")
                });
                invariants.record(a.checks.all_ok(), None, || {
                    format!("{label}: run checks failed: {:?}", a.checks)
                });
            }
            (Err(e), _) | (_, Err(e)) => {
                identical.record(false, None, || format!("{label}: {e}"));
            }
        }
    }

    SuiteReport { name: "determinism".to_string(), checks: vec![identical, invariants] }
}

/// Memory sweep: a fixed modular instance (disjoint singleton coverage,
/// weights in [1, 2], n = 24, k = 8) swept over ε. Checks that every peak
/// stays under the closed-form cap, that peaks grow as ε shrinks, and that
/// consecutive growth ratios track the (1/ε)·k·log k formula within a
/// factor of two. The sweep itself has a fixed shape; a zero-instance scale
/// disables it so an empty battery stays empty.
pub fn memory_suite(scale: &BatteryScale) -> SuiteReport {
    let mut within = CheckStats::new("sweep_within_cap");
    let mut monotone = CheckStats::new("sweep_peaks_monotone");
    let mut shape = CheckStats::new("sweep_shape_factor2");
    if scale.card_instances == 0 {
        return SuiteReport { name: "memory".to_string(), checks: vec![within, monotone, shape] };
    }

    let n = 24usize;
    let k = 8usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e_a5);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..=2.0)).collect();
    let members: Vec<Vec<u32>> = (0..n as u32).map(|j| vec![j]).collect();
    let oracle = CoverageOracle::new(weights, members).expect("disjoint singletons are valid");
    let spec = OracleSpec { kind: crate::harness::OracleKind::Family, path: "<memory:sweep>".into() };

    let sweep = [0.5, 0.2, 0.1, 0.05];
    let mut peaks = Vec::new();
    for (i, &eps) in sweep.iter().enumerate() {
        let mut config = card_config(spec.clone(), k, OrderKind::File, i as u64);
        config.eps = Some(eps);
        match execute_with(&config, &oracle, None) {
            Ok(report) => {
                let peak = report.instrumentation.peak_resident_elements as f64;
                let cap = report.checks.memory_cap;
                within.record(report.checks.memory_within_cap, Some(cap / peak.max(1.0)), || {
                    format!("ε={eps}: peak {peak} exceeds cap {cap}")
                });
                peaks.push((eps, peak));
            }
            Err(e) => within.record(false, None, || format!("ε={eps}: {e}")),
        }
    }

    for w in peaks.windows(2) {
        let ((e1, p1), (e2, p2)) = (w[0], w[1]);
        monotone.record(p2 >= p1, None, || {
            format!("peak fell from {p1} (ε={e1}) to {p2} (ε={e2})")
        });
        // Formula ratio for (1/ε)·k·log k at fixed k: (1/e2)/(1/e1).
        let formula = e1 / e2;
        let observed = p2 / p1.max(1.0);
        let factor = observed / formula;
        shape.record((0.5..=2.0).contains(&factor), Some(factor.min(1.0 / factor)), || {
            format!(
                "ε {e1}→{e2}: peak ratio {observed:.3} vs formula ratio {formula:.3} (factor {factor:.3})"
            )
        });
    }

    SuiteReport { name: "memory".to_string(), checks: vec![within, monotone, shape] }
}

/// Unconstrained solver battery over validated random tables: exhaustive
/// enumeration must match an independent scan of the table, deterministic
/// double greedy must land in [exact/3, exact], and randomized double
/// greedy's seed-averaged value must clear 0.45·exact.
pub fn unconstrained_suite(scale: &BatteryScale) -> SuiteReport {
    let mut exact_matches = CheckStats::new("exact_matches_enumeration");
    let mut dg_bounds = CheckStats::new("dg_within_bounds");
    let mut rdg_mean = CheckStats::new("rdg_mean_above_045");

    for idx in 0..scale.unconstrained_tables {
        let n = 3 + idx % 10; // 3..=12
        let table = gen_table(n, 0x7ab1e ^ idx as u64).expect("generated table is submodular");
        let ground: Vec<ElementId> = (0..n as ElementId).collect();
        let metered = MeteredOracle::new(&table);
        let empty_value = table.value_of_mask(0);

        // Independent ground truth: a direct scan of the stored table.
        let brute = table.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let exact = match UnconstrainedSolver::new(SolverKind::Exact, 0)
            .solve(&metered, &ground, empty_value)
        {
            Ok(s) => s,
            Err(e) => {
                exact_matches.record(false, None, || format!("table {idx}: {e}"));
                continue;
            }
        };
        exact_matches.record(exact.value == brute, None, || {
            format!("table {idx}: exact_unconstrained {} != table max {brute}", exact.value)
        });

        let tol = slack_for(exact.value);
        match UnconstrainedSolver::new(SolverKind::DoubleGreedy, 0)
            .solve(&metered, &ground, empty_value)
        {
            Ok(dg) => {
                let ok = dg.value >= exact.value / 3.0 - tol && dg.value <= exact.value + tol;
                let margin = if exact.value > 0.0 { Some(dg.value / exact.value) } else { None };
                dg_bounds.record(ok, margin, || {
                    format!("table {idx}: DG {} outside [exact/3, exact] = [{}, {}]",
                        dg.value, exact.value / 3.0, exact.value)
                });
            }
            Err(e) => dg_bounds.record(false, None, || format!("table {idx}: {e}")),
        }

        let mut sum = 0.0;
        let mut rdg_err = None;
        for seed in 0..scale.rdg_seeds {
            match UnconstrainedSolver::new(SolverKind::RandomDoubleGreedy, seed)
                .solve(&metered, &ground, empty_value)
            {
                Ok(s) => sum += s.value,
                Err(e) => {
                    rdg_err = Some(format!("table {idx} seed {seed}: {e}"));
                    break;
                }
            }
        }
        if let Some(e) = rdg_err {
            rdg_mean.record(false, None, || e);
        } else {
            let mean = sum / scale.rdg_seeds as f64;
            let ok = mean >= 0.45 * exact.value - tol;
            let margin = if exact.value > 0.0 { Some(mean / exact.value) } else { None };
            rdg_mean.record(ok, margin, || {
                format!(
                    "table {idx}: RDG mean {mean} over {} seeds below 0.45 · exact {}",
                    scale.rdg_seeds, exact.value
                )
            });
        }
    }

    SuiteReport {
        name: "unconstrained".to_string(),
        checks: vec![exact_matches, dg_bounds, rdg_mean],
    }
}

/// All suites in a fixed order.
pub fn run_all(scale: &BatteryScale) -> Vec<SuiteReport> {
    vec![
        cardinality_suite(scale),
        knapsack_suite(scale),
        equivalence_suite(scale),
        determinism_suite(scale),
        memory_suite(scale),
        unconstrained_suite(scale),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_cardinality_suite_passes() {
        let report = cardinality_suite(&BatteryScale::quick());
        assert!(report.all_pass(), "\n{}", report.render());
    }

    #[test]
    fn quick_knapsack_suite_passes() {
        let report = knapsack_suite(&BatteryScale::quick());
        assert!(report.all_pass(), "\n{}", report.render());
    }

    #[test]
    fn quick_equivalence_suite_passes() {
        let report = equivalence_suite(&BatteryScale::quick());
        assert!(report.all_pass(), "\n{}", report.render());
    }

    #[test]
    fn quick_determinism_suite_passes() {
        let report = determinism_suite(&BatteryScale::quick());
        assert!(report.all_pass(), "\n{}", report.render());
    }

    #[test]
    fn memory_sweep_passes() {
        let report = memory_suite(&BatteryScale::quick());
        assert!(report.all_pass(), "\n{}", report.render());
    }

    #[test]
    fn zero_instance_battery_is_trivially_green() {
        let reports = run_all(&BatteryScale::with_instances(0));
        for report in &reports {
            assert!(report.all_pass(), "\n{}", report.render());
            for check in &report.checks {
                assert_eq!(check.runs, 0, "{} ran despite empty scale", check.name);
            }
        }
    }

    #[test]
    fn quick_unconstrained_suite_passes() {
        let report = unconstrained_suite(&BatteryScale::quick());
        assert!(report.all_pass(), "\n{}", report.render());
    }

    #[test]
    fn render_reports_failures_with_witness() {
        let mut stats = CheckStats::new("demo");
        stats.record(true, Some(1.25), String::new);
        stats.record(false, Some(0.5), || "witness line".to_string());
        let suite = SuiteReport { name: "demo".to_string(), checks: vec![stats] };
        assert!(!suite.all_pass());
        let rendered = suite.render();
        assert!(rendered.contains("FAIL demo"), "{rendered}");
        assert!(rendered.contains("witness line"), "{rendered}");
        assert!(rendered.contains("worst_margin=0.5"), "{rendered}");
    }
}
