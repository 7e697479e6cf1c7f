//! Concrete set-function oracles and their file formats.
//!
//! Three oracle families cover the test surface: weighted (di)graph cut
//! functions, weighted coverage functions, and explicit value tables for
//! small ground sets. Loaders report 1-based line numbers on malformed
//! input; writers produce text that round-trips through the loaders.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ElementId, SetFunction};

/// Weighted cut function of a graph on `n` vertices. For an undirected
/// graph, f(S) sums the weights of edges with exactly one endpoint in S;
/// for a directed graph, of edges leaving S. Non-negative and submodular,
/// non-monotone in general (f(V) = 0 whenever f is not identically zero
/// on an undirected graph).
#[derive(Debug, Clone)]
pub struct CutOracle {
    n: usize,
    edges: Vec<(u32, u32, f64)>,
    directed: bool,
}

impl CutOracle {
    pub fn new(n: usize, edges: Vec<(u32, u32, f64)>, directed: bool) -> Result<Self> {
        for &(u, v, w) in &edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::input(format!("edge ({u}, {v}) has an endpoint outside 0..{n}")));
            }
            if !(w >= 0.0) {
                return Err(Error::input(format!("edge ({u}, {v}) has negative weight {w}")));
            }
        }
        Ok(CutOracle { n, edges, directed })
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    /// Cut value with input validation; the trait method assumes a valid
    /// set and skips the checks.
    pub fn cut_value(&self, set: &[ElementId]) -> Result<f64> {
        validate_set(set, self.n)?;
        Ok(self.evaluate(set))
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let kind = if self.directed { "directed" } else { "undirected" };
        out.push_str(&format!("{} {} {}\n", self.n, self.edges.len(), kind));
        for &(u, v, w) in &self.edges {
            out.push_str(&format!("{u} {v} {w}\n"));
        }
        out
    }
}

impl SetFunction for CutOracle {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn evaluate(&self, set: &[ElementId]) -> f64 {
        // Summation runs in fixed edge order so values are reproducible
        // bit for bit.
        let mut total = 0.0;
        for &(u, v, w) in &self.edges {
            let in_u = set.binary_search(&u).is_ok();
            let in_v = set.binary_search(&v).is_ok();
            let crossing = if self.directed { in_u && !in_v } else { in_u != in_v };
            if crossing {
                total += w;
            }
        }
        total
    }
}

/// Weighted coverage function: ground elements are sets over a universe of
/// weighted items, f(S) is the total weight of items covered by the union.
/// Monotone submodular.
#[derive(Debug, Clone)]
pub struct CoverageOracle {
    item_weights: Vec<f64>,
    members: Vec<Vec<u32>>,
}

impl CoverageOracle {
    pub fn new(item_weights: Vec<f64>, members: Vec<Vec<u32>>) -> Result<Self> {
        if let Some(w) = item_weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::input(format!("item weight {w} is negative")));
        }
        for (j, items) in members.iter().enumerate() {
            for &it in items {
                if it as usize >= item_weights.len() {
                    return Err(Error::input(format!(
                        "element {j} covers item {it} outside universe of size {}",
                        item_weights.len()
                    )));
                }
            }
        }
        Ok(CoverageOracle { item_weights, members })
    }

    pub fn universe_size(&self) -> usize {
        self.item_weights.len()
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.item_weights.len(), self.members.len()));
        let weights: Vec<String> = self.item_weights.iter().map(|w| w.to_string()).collect();
        out.push_str(&weights.join(" "));
        out.push('\n');
        for items in &self.members {
            let ids: Vec<String> = items.iter().map(|i| i.to_string()).collect();
            out.push_str(&ids.join(" "));
            out.push('\n');
        }
        out
    }
}

impl SetFunction for CoverageOracle {
    fn ground_size(&self) -> usize {
        self.members.len()
    }

    fn evaluate(&self, set: &[ElementId]) -> f64 {
        let mut covered = vec![false; self.item_weights.len()];
        for &u in set {
            for &it in &self.members[u as usize] {
                covered[it as usize] = true;
            }
        }
        // Item-index order keeps the sum deterministic.
        self.item_weights
            .iter()
            .zip(&covered)
            .filter(|(_, &c)| c)
            .map(|(w, _)| w)
            .sum()
    }
}

/// Maximum ground-set size for explicit value tables (2^n entries).
pub const TABLE_MAX_GROUND: usize = 20;

/// Explicit value table over subsets of `0..n`, indexed by bitmask.
#[derive(Debug, Clone)]
pub struct TableOracle {
    n: usize,
    values: Vec<f64>,
}

/// Witness for a failed table validation.
#[derive(Debug, Clone, PartialEq)]
pub enum TableIssue {
    NegativeValue { mask: u32, value: f64 },
    /// Adding `added` to `base` gains strictly less than adding it to
    /// `base ∪ {context}`: diminishing returns fail at this triple.
    DiminishingReturns { base: u32, added: ElementId, context: ElementId, gap: f64 },
}

impl std::fmt::Display for TableIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TableIssue::NegativeValue { mask, value } => {
                write!(f, "f(mask {mask:#b}) = {value} is negative")
            }
            TableIssue::DiminishingReturns { base, added, context, gap } => write!(
                f,
                "marginal of {added} given mask {base:#b} falls short of its marginal given mask {base:#b} plus {context} by {gap}"
            ),
        }
    }
}

impl TableOracle {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > TABLE_MAX_GROUND {
            return Err(Error::too_large(format!(
                "table oracle supports at most {TABLE_MAX_GROUND} elements, got {n}"
            )));
        }
        if values.len() != 1usize << n {
            return Err(Error::input(format!(
                "table for {n} elements needs {} values, got {}",
                1usize << n,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("table value {v} is not finite")));
        }
        Ok(TableOracle { n, values })
    }

    /// Tabulates any set function over its full ground set.
    pub fn from_function(f: &dyn SetFunction) -> Result<Self> {
        let n = f.ground_size();
        if n > TABLE_MAX_GROUND {
            return Err(Error::too_large(format!(
                "cannot tabulate a function on {n} > {TABLE_MAX_GROUND} elements"
            )));
        }
        let mut values = Vec::with_capacity(1usize << n);
        let mut buf: Vec<ElementId> = Vec::with_capacity(n);
        for mask in 0..(1u32 << n) {
            buf.clear();
            for i in 0..n as u32 {
                if mask & (1 << i) != 0 {
                    buf.push(i);
                }
            }
            values.push(f.evaluate(&buf));
        }
        TableOracle::new(n, values)
    }

    pub fn value_of_mask(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Checks non-negativity and the diminishing-returns inequality over
    /// every (base set, added, context) triple, returning the first
    /// violation in scan order (mask, then added, then context,
    /// ascending). Comparisons allow a relative slack of 1e-9 so that
    /// tables tabulated from float arithmetic do not trip on rounding of
    /// ties.
    pub fn validate_submodular(&self) -> std::result::Result<(), TableIssue> {
        let scale = self
            .values
            .iter()
            .fold(1.0f64, |acc, v| acc.max(v.abs()));
        let slack = 1e-9 * scale;
        for (mask, &v) in self.values.iter().enumerate() {
            if v < 0.0 {
                return Err(TableIssue::NegativeValue { mask: mask as u32, value: v });
            }
        }
        let n = self.n as u32;
        for base in 0..(1u32 << n) {
            for u in 0..n {
                if base & (1 << u) != 0 {
                    continue;
                }
                let gain_u = self.values[(base | 1 << u) as usize] - self.values[base as usize];
                for v in 0..n {
                    if v == u || base & (1 << v) != 0 {
                        continue;
                    }
                    let wider = base | 1 << v;
                    let gain_u_wider =
                        self.values[(wider | 1 << u) as usize] - self.values[wider as usize];
                    if gain_u < gain_u_wider - slack {
                        return Err(TableIssue::DiminishingReturns {
                            base,
                            added: u,
                            context: v,
                            gap: gain_u_wider - gain_u,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{}\n", self.n));
        for (mask, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{mask} {v}\n"));
        }
        out
    }
}

impl SetFunction for TableOracle {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn evaluate(&self, set: &[ElementId]) -> f64 {
        let mut mask = 0u32;
        for &u in set {
            mask |= 1 << u;
        }
        self.values[mask as usize]
    }
}

fn validate_set(set: &[ElementId], n: usize) -> Result<()> {
    for w in set.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::input("set ids must be strictly increasing"));
        }
    }
    if let Some(&last) = set.last() {
        if last as usize >= n {
            return Err(Error::input(format!("set id {last} outside ground set of size {n}")));
        }
    }
    Ok(())
}

pub(crate) struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        LineReader { lines: text.lines(), line_no: 0 }
    }

    /// Next line verbatim (possibly empty); `None` at end of input.
    pub(crate) fn next_raw(&mut self) -> Option<(usize, &'a str)> {
        self.lines.next().map(|l| {
            self.line_no += 1;
            (self.line_no, l)
        })
    }

    /// Next line with content, skipping blank lines.
    pub(crate) fn next_content(&mut self) -> Option<(usize, &'a str)> {
        loop {
            let (no, line) = self.next_raw()?;
            if !line.trim().is_empty() {
                return Some((no, line.trim()));
            }
        }
    }
}

pub(crate) fn parse_token<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from {tok:?}")))
}

/// Parses the graph format: a `n m directed|undirected` header followed by
/// `m` lines of `u v w`. Blank lines are ignored.
pub fn parse_graph(text: &str) -> Result<CutOracle> {
    let mut rd = LineReader::new(text);
    let (hline, header) = rd
        .next_content()
        .ok_or_else(|| Error::parse(1, "missing graph header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 {
        return Err(Error::parse(hline, "graph header must be: n m directed|undirected"));
    }
    let n: usize = parse_token(toks[0], hline, "vertex count")?;
    let m: usize = parse_token(toks[1], hline, "edge count")?;
    let directed = match toks[2] {
        "directed" => true,
        "undirected" => false,
        other => {
            return Err(Error::parse(hline, format!("expected directed|undirected, got {other:?}")))
        }
    };
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (lno, line) = rd
            .next_content()
            .ok_or_else(|| Error::parse(rd.line_no + 1, format!("expected {m} edge lines")))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(Error::parse(lno, "edge line must be: u v w"));
        }
        let u: u32 = parse_token(t[0], lno, "edge endpoint")?;
        let v: u32 = parse_token(t[1], lno, "edge endpoint")?;
        let w: f64 = parse_token(t[2], lno, "edge weight")?;
        if u as usize >= n || v as usize >= n {
            return Err(Error::parse(lno, format!("edge endpoint outside 0..{n}")));
        }
        if !(w >= 0.0) {
            return Err(Error::parse(lno, format!("edge weight {w} must be non-negative")));
        }
        edges.push((u, v, w));
    }
    if let Some((lno, _)) = rd.next_content() {
        return Err(Error::parse(lno, "trailing content after last edge"));
    }
    CutOracle::new(n, edges, directed)
}

/// Parses the coverage format: a `n_universe n_sets` header, one line of
/// item weights, then one line per ground element listing covered item
/// ids. An element line may be empty (the element covers nothing); missing
/// trailing lines are treated the same way.
pub fn parse_family(text: &str) -> Result<CoverageOracle> {
    let mut rd = LineReader::new(text);
    let (hline, header) = rd
        .next_content()
        .ok_or_else(|| Error::parse(1, "missing coverage header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(Error::parse(hline, "coverage header must be: n_universe n_sets"));
    }
    let universe: usize = parse_token(toks[0], hline, "universe size")?;
    let n_sets: usize = parse_token(toks[1], hline, "set count")?;

    let (wline, weights_line) = rd
        .next_raw()
        .ok_or_else(|| Error::parse(hline + 1, "missing item weight line"))?;
    let mut weights = Vec::with_capacity(universe);
    for tok in weights_line.split_whitespace() {
        let w: f64 = parse_token(tok, wline, "item weight")?;
        if !(w >= 0.0) {
            return Err(Error::parse(wline, format!("item weight {w} must be non-negative")));
        }
        weights.push(w);
    }
    if weights.len() != universe {
        return Err(Error::parse(
            wline,
            format!("expected {universe} item weights, got {}", weights.len()),
        ));
    }

    let mut members = Vec::with_capacity(n_sets);
    for _ in 0..n_sets {
        match rd.next_raw() {
            Some((lno, line)) => {
                let mut items = Vec::new();
                for tok in line.split_whitespace() {
                    let it: u32 = parse_token(tok, lno, "item id")?;
                    if it as usize >= universe {
                        return Err(Error::parse(lno, format!("item id {it} outside universe of size {universe}")));
                    }
                    items.push(it);
                }
                members.push(items);
            }
            // A file may drop trailing newlines of empty sets.
            None => members.push(Vec::new()),
        }
    }
    if let Some((lno, line)) = rd.next_raw() {
        if !line.trim().is_empty() {
            return Err(Error::parse(lno, "trailing content after last element line"));
        }
    }
    CoverageOracle::new(weights, members)
}

/// Parses the table format: a ground-set size `n`, then one `mask value`
/// line for each of the 2^n subsets (any order, each mask exactly once).
/// Blank lines are ignored. The parsed table is NOT validated here; use
/// [`load_table`] or call [`TableOracle::validate_submodular`].
pub fn parse_table(text: &str) -> Result<TableOracle> {
    let mut rd = LineReader::new(text);
    let (hline, header) = rd
        .next_content()
        .ok_or_else(|| Error::parse(1, "missing table header"))?;
    let n: usize = parse_token(header, hline, "ground set size")?;
    if n > TABLE_MAX_GROUND {
        return Err(Error::too_large(format!(
            "table oracle supports at most {TABLE_MAX_GROUND} elements, got {n}"
        )));
    }
    let count = 1usize << n;
    let mut values = vec![f64::NAN; count];
    let mut filled = vec![false; count];
    for _ in 0..count {
        let (lno, line) = rd
            .next_content()
            .ok_or_else(|| Error::parse(rd.line_no + 1, format!("expected {count} table lines")))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 2 {
            return Err(Error::parse(lno, "table line must be: mask value"));
        }
        let mask: usize = parse_token(t[0], lno, "subset mask")?;
        let v: f64 = parse_token(t[1], lno, "subset value")?;
        if mask >= count {
            return Err(Error::parse(lno, format!("mask {mask} outside 0..{count}")));
        }
        if filled[mask] {
            return Err(Error::parse(lno, format!("mask {mask} listed twice")));
        }
        filled[mask] = true;
        values[mask] = v;
    }
    if let Some((lno, _)) = rd.next_content() {
        return Err(Error::parse(lno, "trailing content after last table line"));
    }
    TableOracle::new(n, values)
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_graph(path: &Path) -> Result<CutOracle> {
    parse_graph(&read_file(path)?)
}

pub fn load_family(path: &Path) -> Result<CoverageOracle> {
    parse_family(&read_file(path)?)
}

/// Loads and validates a table oracle; a table that is negative somewhere
/// or not submodular is rejected with the violating witness in the
/// message.
pub fn load_table(path: &Path) -> Result<TableOracle> {
    let table = parse_table(&read_file(path)?)?;
    table
        .validate_submodular()
        .map_err(|issue| Error::validation(issue.to_string()))?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path graph a(0) - b(1) - c(2) with unit weights: the standing small
    /// fixture. Values by mask: [0, 1, 2, 1, 1, 2, 1, 0].
    pub(crate) fn path3() -> CutOracle {
        CutOracle::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)], false).unwrap()
    }

    #[test]
    fn path3_cut_values() {
        let f = path3();
        let expect = [0.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 0.0];
        let sets: [&[ElementId]; 8] =
            [&[], &[0], &[1], &[0, 1], &[2], &[0, 2], &[1, 2], &[0, 1, 2]];
        for (set, want) in sets.iter().zip(expect) {
            assert_eq!(f.evaluate(set), want, "cut of {set:?}");
        }
    }

    #[test]
    fn directed_cut_counts_leaving_edges_only() {
        let f = CutOracle::new(2, vec![(0, 1, 3.0)], true).unwrap();
        assert_eq!(f.evaluate(&[0]), 3.0);
        assert_eq!(f.evaluate(&[1]), 0.0);
        assert_eq!(f.evaluate(&[0, 1]), 0.0);
    }

    #[test]
    fn cut_value_validates_input() {
        let f = path3();
        assert!(f.cut_value(&[1, 0]).is_err());
        assert!(f.cut_value(&[0, 3]).is_err());
        assert_eq!(f.cut_value(&[0, 2]).unwrap(), 2.0);
    }

    #[test]
    fn coverage_counts_union_weight() {
        let f = CoverageOracle::new(
            vec![1.0, 2.0, 4.0],
            vec![vec![0, 1], vec![1, 2], vec![]],
        )
        .unwrap();
        assert_eq!(f.evaluate(&[]), 0.0);
        assert_eq!(f.evaluate(&[0]), 3.0);
        assert_eq!(f.evaluate(&[0, 1]), 7.0);
        assert_eq!(f.evaluate(&[2]), 0.0);
        assert_eq!(f.evaluate(&[0, 1, 2]), 7.0);
    }

    #[test]
    fn tabulation_matches_direct_evaluation() {
        let f = path3();
        let t = TableOracle::from_function(&f).unwrap();
        assert_eq!(t.values(), &[0.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 0.0]);
        assert!(t.validate_submodular().is_ok());
        assert_eq!(t.evaluate(&[0, 2]), 2.0);
    }

    #[test]
    fn supermodular_table_is_rejected_with_witness() {
        // f(ab) = 3 gains more for a given {b} than given ∅.
        let t = TableOracle::new(2, vec![0.0, 1.0, 1.0, 3.0]).unwrap();
        match t.validate_submodular() {
            Err(TableIssue::DiminishingReturns { base, added, context, gap }) => {
                assert_eq!(base, 0);
                assert_eq!(added, 0);
                assert_eq!(context, 1);
                assert_eq!(gap, 1.0);
            }
            other => panic!("expected diminishing-returns witness, got {other:?}"),
        }
    }

    #[test]
    fn negative_table_is_rejected() {
        let t = TableOracle::new(1, vec![0.0, -0.5]).unwrap();
        assert_eq!(
            t.validate_submodular(),
            Err(TableIssue::NegativeValue { mask: 1, value: -0.5 })
        );
    }

    #[test]
    fn graph_round_trips_through_text() {
        let f = path3();
        let text = f.to_file_string();
        let g = parse_graph(&text).unwrap();
        assert_eq!(g.ground_size(), 3);
        assert_eq!(g.edges(), f.edges());
        assert!(!g.directed());
    }

    #[test]
    fn family_round_trips_including_empty_sets() {
        let f = CoverageOracle::new(vec![0.5, 1.25], vec![vec![1], vec![], vec![0, 1]]).unwrap();
        let g = parse_family(&f.to_file_string()).unwrap();
        assert_eq!(g.ground_size(), 3);
        for set in [&[] as &[ElementId], &[0], &[1], &[2], &[0, 1, 2]] {
            assert_eq!(f.evaluate(set), g.evaluate(set));
        }
    }

    #[test]
    fn table_round_trips_through_text() {
        let t = TableOracle::from_function(&path3()).unwrap();
        let u = parse_table(&t.to_file_string()).unwrap();
        assert_eq!(t.values(), u.values());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_graph("3 1 undirected\n0 bad 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = parse_graph("3 2 undirected\n0 1 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");

        let err = parse_family("2 1\n0.5\n0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = parse_table("1\n0 0.0\n0 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn graph_rejects_negative_weights() {
        let err = parse_graph("2 1 undirected\n0 1 -2.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
