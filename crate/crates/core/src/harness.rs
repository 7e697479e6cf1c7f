//! Run engine: declarative run configuration, instance loading, execution,
//! invariant checks, and a reproducible JSON report.
//!
//! A [`RunConfig`] fully determines a run. The resulting [`RunReport`] echoes
//! the config, the output set, instrumentation counters, and the results of
//! the per-run checks (feasibility, memory cap, query bound, single pass),
//! plus an optional comparison against the brute-force optimum. Reports are
//! deterministic for a fixed config; [`RunReport::normalized_json`] zeroes
//! the single wall-clock field so two runs can be compared byte for byte.

use std::fs;
use std::path::Path;
use std::time::Instant;

use num::{BigInt, BigRational, One, Signed};
use serde::{Deserialize, Serialize};

use crate::cardinality::{
    cardinality_memory_cap, sieve_cardinality_known_max, sieve_cardinality_known_opt,
    sieve_cardinality_onepass, CardinalityParams, GridMode,
};
use crate::error::{Error, Result};
use crate::exact::{exact_opt, verify_ratio, RatioCheck};
use crate::knapsack::{
    knapsack_memory_cap, sieve_knapsack_known_density, sieve_knapsack_known_opt,
    sieve_knapsack_onepass, standardize, KnapsackParams, StandardizedInstance,
};
use crate::model::{
    make_elements, order_stream, Constraint, CostMatrix, ElementId, Instrumentation, SetFunction,
    SieveRun, StreamOrder,
};
use crate::oracles::{
    load_family, load_graph, load_table, parse_token, CoverageOracle, CutOracle, LineReader,
    TableOracle,
};
use crate::unconstrained::{
    cardinality_threshold_coeff, knapsack_threshold_coeff, SolverKind, UnconstrainedSolver,
};

/// The six streaming algorithms exposed by the tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum AlgorithmKind {
    /// Cardinality constraint, optimum value supplied (`--v`); single threshold.
    #[serde(rename = "card-opt")]
    #[value(name = "card-opt")]
    CardKnownOpt,
    /// Cardinality constraint, maximum singleton value supplied (`--m`);
    /// static guess grid.
    #[serde(rename = "card-max")]
    #[value(name = "card-max")]
    CardKnownMax,
    /// Cardinality constraint, nothing known up front; lazy guess grid.
    #[serde(rename = "card-1pass")]
    #[value(name = "card-1pass")]
    CardOnePass,
    /// d-knapsack constraint, optimum value supplied (`--v`); single
    /// threshold, may stop the pass early on a big element.
    #[serde(rename = "dk-opt")]
    #[value(name = "dk-opt")]
    DkKnownOpt,
    /// d-knapsack constraint, maximum singleton density supplied (`--m`);
    /// static guess grid.
    #[serde(rename = "dk-density")]
    #[value(name = "dk-density")]
    DkKnownDensity,
    /// d-knapsack constraint, nothing known up front; lazy guess grid.
    #[serde(rename = "dk-1pass")]
    #[value(name = "dk-1pass")]
    DkOnePass,
}

impl AlgorithmKind {
    pub fn is_cardinality(self) -> bool {
        matches!(
            self,
            AlgorithmKind::CardKnownOpt | AlgorithmKind::CardKnownMax | AlgorithmKind::CardOnePass
        )
    }

    pub fn is_knapsack(self) -> bool {
        !self.is_cardinality()
    }

    /// Whether the algorithm runs a guess grid and therefore needs `--eps`.
    pub fn needs_eps(self) -> bool {
        !matches!(self, AlgorithmKind::CardKnownOpt | AlgorithmKind::DkKnownOpt)
    }
}

/// Instance file formats understood by the loader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Edge list; the function is the (directed or undirected) cut value.
    Graph,
    /// Weighted set family; the function is coverage weight.
    Family,
    /// Explicit value table over all subsets (validated on load).
    Table,
}

/// An oracle reference as given on the command line: `kind:path`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub kind: OracleKind,
    pub path: String,
}

/// Parses `kind:path`, e.g. `graph:instances/line.graph`.
pub fn parse_oracle_spec(s: &str) -> Result<OracleSpec> {
    let (kind, path) = s
        .split_once(':')
        .ok_or_else(|| Error::parameter(format!("oracle spec `{s}` is not of the form kind:path")))?;
    let kind = match kind {
        "graph" => OracleKind::Graph,
        "family" => OracleKind::Family,
        "table" => OracleKind::Table,
        other => {
            return Err(Error::parameter(format!(
                "unknown oracle kind `{other}` (expected graph, family, or table)"
            )))
        }
    };
    if path.is_empty() {
        return Err(Error::parameter(format!("oracle spec `{s}` has an empty path")));
    }
    Ok(OracleSpec { kind, path: path.to_string() })
}

/// Stream arrival order selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OrderKind {
    /// Elements arrive in id order (the order implied by the instance file).
    File,
    /// Seeded Fisher-Yates shuffle of the id order.
    Shuffle,
}

/// Everything that determines a run. Serializes to the `config` block of
/// the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: AlgorithmKind,
    pub oracle: OracleSpec,
    /// Cardinality bound; required by the cardinality algorithms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Grid resolution in (0, 1]; required when [`AlgorithmKind::needs_eps`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Known optimum value (card-opt, dk-opt).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    /// Known maximum singleton value (card-max) or density (dk-density).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Path to the cost matrix file; required by the knapsack algorithms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<String>,
    /// Comma-separated capacities, one per cost dimension, as integers or
    /// fractions `p/q`; required by the knapsack algorithms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<String>,
    pub solver: SolverKind,
    pub order: OrderKind,
    /// Seed for the stream shuffle and the randomized solver.
    pub seed: u64,
    /// Lower-end placement for the cardinality guess grids.
    pub grid: GridMode,
    /// Overrides the solver ratio γ used for the threshold coefficient.
    /// Defaults to min(solver γ, 1/2), which reproduces the reference
    /// coefficients (1/6 and 1/(4(d+1))) for the exact and randomized
    /// solvers and a sound smaller coefficient for deterministic double
    /// greedy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Also compute the brute-force optimum and the achieved ratio
    /// (ground sets up to 22 elements).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub verify_exact: bool,
}

/// Threshold-coefficient ratio used when `--gamma` is absent: γ = 1/2,
/// giving the standard coefficients 1/6 (cardinality) and 1/(4(d+1))
/// (knapsack). The deterministic double-greedy solver only attains γ = 1/3,
/// so pass `--gamma 0.3333…` with `--solver dg` when the reported guarantee
/// bound should match what that solver actually certifies.
pub fn default_gamma() -> f64 {
    0.5
}

/// A loaded set-function instance.
#[derive(Debug, Clone)]
pub enum LoadedOracle {
    Graph(CutOracle),
    Family(CoverageOracle),
    Table(TableOracle),
}

impl LoadedOracle {
    pub fn as_fn(&self) -> &dyn SetFunction {
        match self {
            LoadedOracle::Graph(o) => o,
            LoadedOracle::Family(o) => o,
            LoadedOracle::Table(o) => o,
        }
    }

    pub fn kind(&self) -> OracleKind {
        match self {
            LoadedOracle::Graph(_) => OracleKind::Graph,
            LoadedOracle::Family(_) => OracleKind::Family,
            LoadedOracle::Table(_) => OracleKind::Table,
        }
    }
}

/// The loaded inputs of a run: the oracle plus, for knapsack algorithms,
/// the standardized cost structure.
#[derive(Debug)]
pub struct RunInputs {
    pub oracle: LoadedOracle,
    pub std: Option<StandardizedInstance>,
}

/// Per-run invariant checks, all of which should hold for every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunChecks {
    /// The output set satisfies the constraint (exact cost arithmetic).
    pub output_feasible: bool,
    /// Worst-case bound on resident element slots for this configuration.
    pub memory_cap: f64,
    /// Observed peak resident count stayed within `memory_cap`.
    pub memory_within_cap: bool,
    /// No element cost more than 2·(live instances) + 1 oracle queries.
    pub query_bound_ok: bool,
    /// Exactly one pass, covering the whole stream unless the algorithm
    /// returned early.
    pub single_pass: bool,
}

impl RunChecks {
    pub fn all_ok(&self) -> bool {
        self.output_feasible && self.memory_within_cap && self.query_bound_ok && self.single_pass
    }
}

/// Brute-force comparison section of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSection {
    pub opt_ids: Vec<ElementId>,
    pub opt_value: f64,
    pub feasible_count: u64,
    /// Ratio check of the run value against `guarantee_bound · opt_value`.
    pub check: RatioCheck,
}

/// Everything a run produces, minus the per-instance snapshots (those stay
/// in [`SieveRun`] for in-process inspection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub ground_size: usize,
    /// Output ids in ascending order.
    pub output_ids: Vec<ElementId>,
    pub output_value: f64,
    /// The approximation factor this configuration claims against the
    /// optimum: the threshold coefficient for the known-optimum
    /// algorithms (meaningful when `--v` is the true optimum), and
    /// coefficient − ε for the grid algorithms.
    pub guarantee_bound: f64,
    /// Capacity of the standardized instance (knapsack runs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardized_capacity: Option<f64>,
    pub instrumentation: Instrumentation,
    pub checks: RunChecks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSection>,
    pub wall_time_ms: u64,
}

impl RunReport {
    /// Pretty JSON with a trailing newline; field order is declaration
    /// order, so output is stable.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// [`RunReport::to_json`] with the wall-clock field zeroed, for
    /// byte-for-byte comparison of repeated runs.
    pub fn normalized_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_ms = 0;
        copy.to_json()
    }
}

fn parse_rational(tok: &str, line: usize) -> Result<BigRational> {
    let make = |s: &str| -> Result<BigInt> { parse_token::<BigInt>(s, line, "integer") };
    if let Some((p, q)) = tok.split_once('/') {
        let p = make(p)?;
        let q = make(q)?;
        if q == BigInt::from(0) {
            return Err(Error::parse(line, format!("zero denominator in `{tok}`")));
        }
        Ok(BigRational::new(p, q))
    } else {
        Ok(BigRational::from_integer(make(tok)?))
    }
}

/// Renders a rational as `p` or `p/q`, matching what [`parse_costs`]
/// accepts.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses a cost matrix file: a `dims n` header line, then `dims` rows of
/// `n` non-negative rationals (`p` or `p/q`). Blank lines and `#` comments
/// are skipped.
pub fn parse_costs(text: &str) -> Result<CostMatrix> {
    let mut reader = LineReader::new(text);
    let (line, header) = reader
        .next_content()
        .ok_or_else(|| Error::parse(1, "empty cost file; expected `dims n` header"))?;
    let mut toks = header.split_whitespace();
    let dims: usize = parse_token(toks.next().unwrap_or(""), line, "dimension count")?;
    let n: usize = parse_token(toks.next().unwrap_or(""), line, "element count")?;
    if toks.next().is_some() {
        return Err(Error::parse(line, "expected exactly `dims n` on the header line"));
    }
    if dims == 0 {
        return Err(Error::parse(line, "cost matrix needs at least one dimension"));
    }
    let mut rows = Vec::with_capacity(dims);
    for i in 0..dims {
        let (line, row) = reader.next_content().ok_or_else(|| {
            Error::parse(line, format!("expected {dims} cost rows, found {i}"))
        })?;
        let toks: Vec<&str> = row.split_whitespace().collect();
        if toks.len() != n {
            return Err(Error::parse(
                line,
                format!("cost row {} has {} entries, expected {n}", i + 1, toks.len()),
            ));
        }
        let mut entries = Vec::with_capacity(n);
        for tok in toks {
            let r = parse_rational(tok, line)?;
            if r.is_negative() {
                return Err(Error::parse(line, format!("negative cost `{tok}`")));
            }
            entries.push(r);
        }
        rows.push(entries);
    }
    if let Some((line, extra)) = reader.next_content() {
        return Err(Error::parse(line, format!("unexpected trailing content `{extra}`")));
    }
    CostMatrix::from_rows(rows)
}

/// Inverse of [`parse_costs`]; byte-deterministic.
pub fn costs_to_string(m: &CostMatrix) -> String {
    let mut out = format!("{} {}\n", m.dims(), m.len());
    for row in m.rows() {
        let rendered: Vec<String> = row.iter().map(format_rational).collect();
        out.push_str(&rendered.join(" "));
        out.push('\n');
    }
    out
}

pub fn load_costs(path: &Path) -> Result<CostMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_costs(&text)
}

/// Parses a comma-separated capacity list; must have exactly one positive
/// entry per cost dimension.
pub fn parse_caps(list: &str, dims: usize) -> Result<Vec<BigRational>> {
    let toks: Vec<&str> = list.split(',').map(str::trim).collect();
    if toks.len() != dims {
        return Err(Error::parameter(format!(
            "capacity list has {} entries but the cost matrix has {dims} dimensions",
            toks.len()
        )));
    }
    let mut caps = Vec::with_capacity(dims);
    for tok in toks {
        let r = parse_rational(tok, 1)
            .map_err(|_| Error::parameter(format!("capacity `{tok}` is not an integer or p/q")))?;
        if !r.is_positive() {
            return Err(Error::parameter(format!("capacity `{tok}` must be positive")));
        }
        caps.push(r);
    }
    Ok(caps)
}

/// Loads the oracle file and, for knapsack algorithms, the cost matrix and
/// capacities, standardizing the latter.
pub fn prepare_run(config: &RunConfig) -> Result<RunInputs> {
    let path = Path::new(&config.oracle.path);
    let oracle = match config.oracle.kind {
        OracleKind::Graph => LoadedOracle::Graph(load_graph(path)?),
        OracleKind::Family => LoadedOracle::Family(load_family(path)?),
        OracleKind::Table => LoadedOracle::Table(load_table(path)?),
    };
    let std = if config.algorithm.is_knapsack() {
        let costs_path = config
            .costs
            .as_ref()
            .ok_or_else(|| Error::parameter("knapsack algorithms require --costs"))?;
        let caps_list = config
            .caps
            .as_ref()
            .ok_or_else(|| Error::parameter("knapsack algorithms require --caps"))?;
        let costs = load_costs(Path::new(costs_path))?;
        if costs.len() != oracle.as_fn().ground_size() {
            return Err(Error::input(format!(
                "cost matrix covers {} elements but the oracle ground set has {}",
                costs.len(),
                oracle.as_fn().ground_size()
            )));
        }
        let caps = parse_caps(caps_list, costs.dims())?;
        Some(standardize(&costs, &caps)?)
    } else {
        None
    };
    Ok(RunInputs { oracle, std })
}

/// Loads the inputs named by `config` and executes the run.
pub fn execute_run(config: &RunConfig) -> Result<RunReport> {
    let inputs = prepare_run(config)?;
    execute_with(config, inputs.oracle.as_fn(), inputs.std.as_ref())
}

fn require(opt: Option<f64>, flag: &str, alg: &str) -> Result<f64> {
    opt.ok_or_else(|| Error::parameter(format!("{alg} requires {flag}")))
}

/// Executes `config` against an already-loaded oracle (and, for knapsack
/// algorithms, an already-standardized instance). The batteries use this
/// entry point to run in-memory instances; the config's oracle path is then
/// just a label echoed into the report.
pub fn execute_with(
    config: &RunConfig,
    function: &dyn SetFunction,
    std: Option<&StandardizedInstance>,
) -> Result<RunReport> {
    let started = Instant::now();
    let n = function.ground_size();

    let gamma = match config.gamma {
        Some(g) if g.is_finite() && g > 0.0 && g <= 1.0 => g,
        Some(g) => {
            return Err(Error::parameter(format!("gamma {g} is outside (0, 1]")));
        }
        None => default_gamma(),
    };
    let solver = UnconstrainedSolver::new(config.solver, config.seed);
    let order = match config.order {
        OrderKind::File => StreamOrder::File,
        OrderKind::Shuffle => StreamOrder::Shuffle { seed: config.seed },
    };

    let (run, constraint, coeff, std_capacity): (SieveRun, Constraint, f64, Option<f64>) =
        if config.algorithm.is_cardinality() {
            let k = config
                .k
                .ok_or_else(|| Error::parameter("cardinality algorithms require --k"))?;
            let coeff = cardinality_threshold_coeff(gamma);
            let params = CardinalityParams::new(k, coeff, solver)?;
            let stream = order_stream(make_elements(n, None)?, order);
            let run = match config.algorithm {
                AlgorithmKind::CardKnownOpt => {
                    let v = require(config.v, "--v", "card-opt")?;
                    sieve_cardinality_known_opt(function, &stream, params, v)?
                }
                AlgorithmKind::CardKnownMax => {
                    let m = require(config.m, "--m", "card-max")?;
                    let eps = require(config.eps, "--eps", "card-max")?;
                    sieve_cardinality_known_max(function, &stream, params, m, eps, config.grid)?
                }
                AlgorithmKind::CardOnePass => {
                    let eps = require(config.eps, "--eps", "card-1pass")?;
                    sieve_cardinality_onepass(function, &stream, params, eps, config.grid)?
                }
                _ => unreachable!("cardinality dispatch"),
            };
            (run, Constraint::Cardinality { k }, coeff, None)
        } else {
            let std = std.ok_or_else(|| {
                Error::parameter("knapsack algorithms require --costs and --caps")
            })?;
            let coeff = knapsack_threshold_coeff(gamma, std.dims());
            let params = KnapsackParams::new(coeff, solver)?;
            let stream = order_stream(make_elements(n, Some(&std.costs))?, order);
            let run = match config.algorithm {
                AlgorithmKind::DkKnownOpt => {
                    let v = require(config.v, "--v", "dk-opt")?;
                    sieve_knapsack_known_opt(function, &stream, params, std, v)?
                }
                AlgorithmKind::DkKnownDensity => {
                    let m = require(config.m, "--m", "dk-density")?;
                    let eps = require(config.eps, "--eps", "dk-density")?;
                    sieve_knapsack_known_density(function, &stream, params, std, m, eps)?
                }
                AlgorithmKind::DkOnePass => {
                    let eps = require(config.eps, "--eps", "dk-1pass")?;
                    sieve_knapsack_onepass(function, &stream, params, std, eps)?
                }
                _ => unreachable!("knapsack dispatch"),
            };
            (run, std.constraint(), coeff, Some(std.capacity_f64()))
        };

    let guarantee_bound = if config.algorithm.needs_eps() {
        (coeff - config.eps.expect("eps checked above")).max(0.0)
    } else {
        coeff
    };

    let eps_for_cap = if config.algorithm.needs_eps() { config.eps } else { None };
    let memory_cap = if config.algorithm.is_cardinality() {
        cardinality_memory_cap(config.k.expect("k checked above"), eps_for_cap, coeff)
    } else {
        knapsack_memory_cap(std_capacity.expect("knapsack capacity"), eps_for_cap, coeff)
    };

    let instr: &Instrumentation = &run.instrumentation;
    let checks = RunChecks {
        output_feasible: constraint.is_feasible(&run.solution.ids, None)?,
        memory_cap,
        memory_within_cap: (instr.peak_resident_elements as f64) <= memory_cap,
        query_bound_ok: instr.per_element_query_bound_ok,
        single_pass: instr.passes == 1
            && (instr.elements_seen == n as u64 || instr.early_terminated),
    };

    let exact = if config.verify_exact {
        let res = exact_opt(function, &constraint)?;
        let check = verify_ratio(run.solution.value, res.opt_value, guarantee_bound);
        Some(ExactSection {
            opt_ids: res.opt_ids,
            opt_value: res.opt_value,
            feasible_count: res.feasible_count,
            check,
        })
    } else {
        None
    };

    let mut output_ids = run.solution.ids.clone();
    output_ids.sort_unstable();

    Ok(RunReport {
        config: config.clone(),
        ground_size: n,
        output_ids,
        output_value: run.solution.value,
        guarantee_bound,
        standardized_capacity: std_capacity,
        instrumentation: run.instrumentation,
        checks,
        exact,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::CutOracle;

    fn base_card_config() -> RunConfig {
        RunConfig {
            algorithm: AlgorithmKind::CardKnownOpt,
            oracle: OracleSpec { kind: OracleKind::Graph, path: "<memory>".into() },
            k: Some(1),
            eps: None,
            v: Some(2.0),
            m: None,
            costs: None,
            caps: None,
            solver: SolverKind::Exact,
            order: OrderKind::File,
            seed: 0,
            grid: GridMode::Safe,
            gamma: None,
            verify_exact: true,
        }
    }

    fn path3() -> CutOracle {
        CutOracle::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)], false).unwrap()
    }

    #[test]
    fn oracle_spec_parses_kind_and_path() {
        let spec = parse_oracle_spec("graph:a/b.txt").unwrap();
        assert_eq!(spec.kind, OracleKind::Graph);
        assert_eq!(spec.path, "a/b.txt");
        assert!(parse_oracle_spec("nofile").is_err());
        assert!(parse_oracle_spec("weird:x").is_err());
        assert!(parse_oracle_spec("table:").is_err());
    }

    #[test]
    fn default_gamma_gives_reference_coefficients() {
        assert_eq!(default_gamma(), 0.5);
        assert_eq!(cardinality_threshold_coeff(default_gamma()), 1.0 / 6.0);
        assert_eq!(knapsack_threshold_coeff(default_gamma(), 1), 1.0 / 8.0);
    }

    #[test]
    fn costs_round_trip() {
        let text = "2 3\n1 2 1/2\n3/4 1 5\n";
        let m = parse_costs(text).unwrap();
        assert_eq!(m.dims(), 2);
        assert_eq!(m.len(), 3);
        assert_eq!(costs_to_string(&m), text);
    }

    #[test]
    fn costs_parse_errors_carry_line_numbers() {
        let err = parse_costs("2 3\n1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        let err = parse_costs("1 2\n1 x\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
        let err = parse_costs("1 2\n1 2\n7\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn caps_list_is_validated() {
        let caps = parse_caps("4, 7/2", 2).unwrap();
        assert_eq!(caps[0], BigRational::from_integer(4.into()));
        assert_eq!(caps[1], BigRational::new(7.into(), 2.into()));
        assert!(parse_caps("4", 2).is_err());
        assert!(parse_caps("4,0", 2).is_err());
        assert!(parse_caps("4,x", 2).is_err());
    }

    #[test]
    fn config_serde_uses_cli_names() {
        let config = base_card_config();
        let json = serde_json::to_string(&config).unwrap();
        assert!(json.contains("\"card-opt\""), "{json}");
        assert!(json.contains("\"exact\""), "{json}");
        assert!(json.contains("\"file\""), "{json}");
        assert!(json.contains("\"safe\""), "{json}");
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn known_opt_report_matches_hand_trace() {
        let oracle = path3();
        let config = base_card_config();
        let report = execute_with(&config, &oracle, None).unwrap();
        assert_eq!(report.ground_size, 3);
        assert_eq!(report.output_ids, vec![1]);
        assert_eq!(report.output_value, 2.0);
        assert!((report.guarantee_bound - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(report.instrumentation.oracle_queries_total, 4);
        assert!(report.checks.all_ok());
        let exact = report.exact.as_ref().unwrap();
        assert_eq!(exact.opt_ids, vec![1]);
        assert_eq!(exact.opt_value, 2.0);
        assert_eq!(exact.feasible_count, 4);
        assert!(exact.check.pass);
        assert_eq!(exact.check.margin, Some(1.0));
    }

    #[test]
    fn missing_parameters_are_reported() {
        let oracle = path3();
        let mut config = base_card_config();
        config.k = None;
        assert!(matches!(execute_with(&config, &oracle, None), Err(Error::Parameter(_))));
        let mut config = base_card_config();
        config.v = None;
        assert!(matches!(execute_with(&config, &oracle, None), Err(Error::Parameter(_))));
        let mut config = base_card_config();
        config.gamma = Some(1.5);
        assert!(matches!(execute_with(&config, &oracle, None), Err(Error::Parameter(_))));
        let mut config = base_card_config();
        config.algorithm = AlgorithmKind::DkOnePass;
        config.eps = Some(0.5);
        assert!(matches!(execute_with(&config, &oracle, None), Err(Error::Parameter(_))));
    }

    #[test]
    fn normalized_json_is_reproducible() {
        let oracle = path3();
        let mut config = base_card_config();
        config.algorithm = AlgorithmKind::CardOnePass;
        config.v = None;
        config.eps = Some(1.0);
        let a = execute_with(&config, &oracle, None).unwrap();
        let b = execute_with(&config, &oracle, None).unwrap();
        assert_eq!(a.normalized_json(), b.normalized_json());
        let mut hacked = a.clone();
        hacked.wall_time_ms = 999;
        assert_eq!(hacked.normalized_json(), a.normalized_json());
        assert!(a.normalized_json().contains("\"wall_time_ms\": 0"));
    }

    #[test]
    fn execute_run_loads_files() {
        let dir = tempfile::tempdir().unwrap();
        let graph = dir.path().join("p3.graph");
        std::fs::write(&graph, path3().to_file_string()).unwrap();
        let costs = dir.path().join("p3.costs");
        std::fs::write(&costs, "1 3\n1 2 1\n").unwrap();

        let config = RunConfig {
            algorithm: AlgorithmKind::DkKnownOpt,
            oracle: OracleSpec {
                kind: OracleKind::Graph,
                path: graph.display().to_string(),
            },
            k: None,
            eps: None,
            v: Some(2.0),
            m: None,
            costs: Some(costs.display().to_string()),
            caps: Some("4".into()),
            solver: SolverKind::Exact,
            order: OrderKind::File,
            seed: 0,
            grid: GridMode::Safe,
            gamma: None,
            verify_exact: true,
        };
        let report = execute_run(&config).unwrap();
        assert_eq!(report.output_ids, vec![1]);
        assert_eq!(report.output_value, 2.0);
        assert_eq!(report.standardized_capacity, Some(4.0));
        assert!((report.guarantee_bound - 1.0 / 8.0).abs() < 1e-15);
        assert!(report.checks.all_ok());
        assert!(report.exact.as_ref().unwrap().check.pass);
        assert!(report.instrumentation.early_terminated);

        // Missing cost file surfaces as an io error with the path.
        let mut broken = config.clone();
        broken.costs = Some(dir.path().join("absent").display().to_string());
        assert!(matches!(execute_run(&broken), Err(Error::Io { .. })));
    }

    #[test]
    fn cost_count_must_match_ground_size() {
        let dir = tempfile::tempdir().unwrap();
        let graph = dir.path().join("p3.graph");
        std::fs::write(&graph, path3().to_file_string()).unwrap();
        let costs = dir.path().join("bad.costs");
        std::fs::write(&costs, "1 2\n1 2\n").unwrap();
        let config = RunConfig {
            algorithm: AlgorithmKind::DkOnePass,
            oracle: OracleSpec {
                kind: OracleKind::Graph,
                path: graph.display().to_string(),
            },
            k: None,
            eps: Some(0.5),
            v: None,
            m: None,
            costs: Some(costs.display().to_string()),
            caps: Some("4".into()),
            solver: SolverKind::Exact,
            order: OrderKind::File,
            seed: 0,
            grid: GridMode::Safe,
            gamma: None,
            verify_exact: false,
        };
        assert!(matches!(execute_run(&config), Err(Error::Input(_))));
    }
}
