//! Undirected, annotated AS-graph snapshots.
//!
//! A snapshot accumulates the AS paths of one time window. Accumulation is
//! commutative and associative, so partial builders produced in parallel can
//! be merged in any order and still freeze into an identical snapshot; a
//! finished snapshot is immutable and canonically ordered, which makes the
//! dump format byte-exact.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::ingest::{AsPath, AsPathElement};
use crate::resolution::{Asn, IxpId};

/// Snapshot identifier in `YYYY-MM` form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SnapshotLabel(String);

impl SnapshotLabel {
    pub fn new(s: &str) -> Result<SnapshotLabel, SnapshotError> {
        let b = s.as_bytes();
        let ok = b.len() == 7
            && b[0..4].iter().all(|c| c.is_ascii_digit())
            && b[4] == b'-'
            && b[5..7].iter().all(|c| c.is_ascii_digit());
        if ok {
            Ok(SnapshotLabel(s.to_string()))
        } else {
            Err(SnapshotError::BadLabel(s.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SnapshotLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Per-edge metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeAnnotation {
    /// Seen as two ASes directly following each other on a trace.
    pub direct: bool,
    /// Exchanges observed bridging this pair.
    pub via_ixps: BTreeSet<IxpId>,
    /// Number of traces that crossed this edge (once per trace).
    pub trace_count: u64,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot label `{0}` does not match YYYY-MM")]
    BadLabel(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("inconsistent snapshot: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("AS {0} is not a node of this snapshot")]
    UnknownAs(Asn),
}

#[derive(Debug, Clone, Default)]
struct NodeCounters {
    appearances: u64,
    mid_trace: u64,
}

/// Accumulates paths into the node/edge/counter sets. Merge-friendly: all
/// state is unions and sums.
#[derive(Debug, Default)]
pub struct SnapshotBuilder {
    nodes: BTreeSet<Asn>,
    edges: BTreeMap<(Asn, Asn), EdgeAnnotation>,
    counters: BTreeMap<Asn, NodeCounters>,
    total_traces: u64,
}

fn edge_key(a: Asn, b: Asn) -> (Asn, Asn) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SnapshotBuilder {
    pub fn new() -> SnapshotBuilder {
        SnapshotBuilder::default()
    }

    /// Folds one AS path into the builder.
    ///
    /// Adjacent AS hops yield a direct edge; an (AS, IXP, AS) triple yields
    /// an edge annotated with the exchange. Breaks contribute nothing, and a
    /// triple with the same AS on both sides would be a self-loop and is
    /// dropped. Edge trace counts and the per-AS appearance / mid-trace
    /// counters increment at most once per path.
    pub fn add_path(&mut self, path: &AsPath) {
        self.total_traces += 1;
        let elems = path.elements();

        let mut path_edges: BTreeMap<(Asn, Asn), (bool, BTreeSet<IxpId>)> = BTreeMap::new();
        let mut seen: BTreeSet<Asn> = BTreeSet::new();
        let mut seen_mid: BTreeSet<Asn> = BTreeSet::new();

        for (i, e) in elems.iter().enumerate() {
            if let AsPathElement::AsHop(asn) = e {
                self.nodes.insert(*asn);
                seen.insert(*asn);
                if i > 0 && i + 1 < elems.len() {
                    seen_mid.insert(*asn);
                }
            }
        }
        for pair in elems.windows(2) {
            if let (AsPathElement::AsHop(a), AsPathElement::AsHop(b)) = (&pair[0], &pair[1]) {
                path_edges.entry(edge_key(*a, *b)).or_default().0 = true;
            }
        }
        for triple in elems.windows(3) {
            if let (
                AsPathElement::AsHop(a),
                AsPathElement::IxpHop(x),
                AsPathElement::AsHop(b),
            ) = (&triple[0], &triple[1], &triple[2])
            {
                if a != b {
                    path_edges
                        .entry(edge_key(*a, *b))
                        .or_default()
                        .1
                        .insert(x.clone());
                }
            }
        }

        for (key, (direct, ixps)) in path_edges {
            let ann = self.edges.entry(key).or_default();
            ann.direct |= direct;
            ann.via_ixps.extend(ixps);
            ann.trace_count += 1;
        }
        for asn in &seen {
            self.counters.entry(*asn).or_default().appearances += 1;
        }
        for asn in &seen_mid {
            self.counters.entry(*asn).or_default().mid_trace += 1;
        }
    }

    /// Merges another partial builder; commutative and associative.
    pub fn merge(&mut self, other: SnapshotBuilder) {
        self.total_traces += other.total_traces;
        self.nodes.extend(other.nodes);
        for (key, ann) in other.edges {
            let e = self.edges.entry(key).or_default();
            e.direct |= ann.direct;
            e.via_ixps.extend(ann.via_ixps);
            e.trace_count += ann.trace_count;
        }
        for (asn, c) in other.counters {
            let mine = self.counters.entry(asn).or_default();
            mine.appearances += c.appearances;
            mine.mid_trace += c.mid_trace;
        }
    }

    /// Freezes the accumulated state into an immutable snapshot.
    pub fn finish(self, label: SnapshotLabel) -> AsGraphSnapshot {
        AsGraphSnapshot::from_parts(
            label,
            self.nodes,
            self.edges,
            self.counters,
            self.total_traces,
        )
    }
}

/// Builds a snapshot from a batch of paths.
pub fn build_snapshot(label: SnapshotLabel, paths: &[AsPath]) -> AsGraphSnapshot {
    let mut b = SnapshotBuilder::new();
    for p in paths {
        b.add_path(p);
    }
    b.finish(label)
}

/// Immutable undirected AS graph for one time window.
pub struct AsGraphSnapshot {
    label: SnapshotLabel,
    /// Node AS numbers, ascending; index into this vec is the dense node id.
    nodes: Vec<Asn>,
    index: HashMap<Asn, u32>,
    /// Sorted adjacency per dense node id.
    adj: Vec<Vec<u32>>,
    /// Edges sorted by (low, high) endpoint.
    edges: Vec<((Asn, Asn), EdgeAnnotation)>,
    appearances: Vec<u64>,
    mid_trace: Vec<u64>,
    total_traces: u64,
}

/// Whole-graph size and density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    pub n: usize,
    pub m: usize,
    /// 2m / (n(n-1)); undefined for fewer than two nodes.
    pub density: Option<f64>,
}

impl AsGraphSnapshot {
    fn from_parts(
        label: SnapshotLabel,
        node_set: BTreeSet<Asn>,
        edge_map: BTreeMap<(Asn, Asn), EdgeAnnotation>,
        counters: BTreeMap<Asn, NodeCounters>,
        total_traces: u64,
    ) -> AsGraphSnapshot {
        let nodes: Vec<Asn> = node_set.into_iter().collect();
        let index: HashMap<Asn, u32> = nodes
            .iter()
            .enumerate()
            .map(|(i, asn)| (*asn, i as u32))
            .collect();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
        for (a, b) in edge_map.keys() {
            let ia = index[a];
            let ib = index[b];
            adj[ia as usize].push(ib);
            adj[ib as usize].push(ia);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let mut appearances = vec![0u64; nodes.len()];
        let mut mid_trace = vec![0u64; nodes.len()];
        for (asn, c) in counters {
            if let Some(&i) = index.get(&asn) {
                appearances[i as usize] = c.appearances;
                mid_trace[i as usize] = c.mid_trace;
            }
        }
        AsGraphSnapshot {
            label,
            nodes,
            index,
            adj,
            edges: edge_map.into_iter().collect(),
            appearances,
            mid_trace,
            total_traces,
        }
    }

    pub fn label(&self) -> &SnapshotLabel {
        &self.label
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_traces(&self) -> u64 {
        self.total_traces
    }

    pub fn contains(&self, asn: Asn) -> bool {
        self.index.contains_key(&asn)
    }

    /// Node AS numbers in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = Asn> + '_ {
        self.nodes.iter().copied()
    }

    /// Edges with annotations, ascending by (low, high) endpoint.
    pub fn edges(&self) -> impl Iterator<Item = (Asn, Asn, &EdgeAnnotation)> {
        self.edges.iter().map(|((a, b), ann)| (*a, *b, ann))
    }

    /// Annotation of the undirected edge {a, b}, if present.
    pub fn edge(&self, a: Asn, b: Asn) -> Option<&EdgeAnnotation> {
        let key = edge_key(a, b);
        self.edges
            .binary_search_by(|(k, _)| k.cmp(&key))
            .ok()
            .map(|i| &self.edges[i].1)
    }

    pub fn degree(&self, asn: Asn) -> Result<usize, GraphError> {
        let i = self.idx(asn)?;
        Ok(self.adj[i as usize].len())
    }

    /// Neighbouring AS numbers, ascending; excludes `asn` itself (the graph
    /// holds no self-loops).
    pub fn neighbors(&self, asn: Asn) -> Result<impl Iterator<Item = Asn> + '_, GraphError> {
        let i = self.idx(asn)?;
        Ok(self.adj[i as usize].iter().map(|&j| self.nodes[j as usize]))
    }

    /// Number of traces in which the AS appeared anywhere on the path.
    pub fn appearance_count(&self, asn: Asn) -> Result<u64, GraphError> {
        Ok(self.appearances[self.idx(asn)? as usize])
    }

    /// Number of traces in which the AS appeared at an interior path
    /// position (neither first nor last element).
    pub fn mid_trace_count(&self, asn: Asn) -> Result<u64, GraphError> {
        Ok(self.mid_trace[self.idx(asn)? as usize])
    }

    pub fn stats(&self) -> GraphStats {
        let n = self.node_count();
        let m = self.edge_count();
        let density = if n < 2 {
            None
        } else {
            Some(2.0 * m as f64 / (n as f64 * (n as f64 - 1.0)))
        };
        GraphStats { n, m, density }
    }

    fn idx(&self, asn: Asn) -> Result<u32, GraphError> {
        self.index
            .get(&asn)
            .copied()
            .ok_or(GraphError::UnknownAs(asn))
    }

    // Dense-index accessors for the metric kernels.
    pub(crate) fn idx_of(&self, asn: Asn) -> Option<u32> {
        self.index.get(&asn).copied()
    }

    pub(crate) fn asn_at(&self, i: u32) -> Asn {
        self.nodes[i as usize]
    }

    pub(crate) fn adj_of(&self, i: u32) -> &[u32] {
        &self.adj[i as usize]
    }

    pub(crate) fn mid_trace_at(&self, i: u32) -> u64 {
        self.mid_trace[i as usize]
    }
}

const DUMP_MAGIC: &str = "#astopo-snapshot v1";
const COUNTERS_MARK: &str = "#counters";

/// Writes the canonical snapshot dump. The output is byte-exact for a given
/// snapshot: edges ascending by endpoints, `N` lines for isolated nodes,
/// then the counter section.
pub fn write_snapshot<W: Write>(snap: &AsGraphSnapshot, mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "{} {} {} {}",
        DUMP_MAGIC,
        snap.label,
        snap.node_count(),
        snap.edge_count()
    )?;
    for ((a, b), ann) in &snap.edges {
        let ixps = if ann.via_ixps.is_empty() {
            "-".to_string()
        } else {
            let ids: Vec<&str> = ann.via_ixps.iter().map(|x| x.as_str()).collect();
            ids.join(",")
        };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            a,
            b,
            if ann.direct { 1 } else { 0 },
            ixps,
            ann.trace_count
        )?;
    }
    for (i, asn) in snap.nodes.iter().enumerate() {
        if snap.adj[i].is_empty() {
            writeln!(w, "N\t{asn}")?;
        }
    }
    writeln!(w, "{COUNTERS_MARK}")?;
    writeln!(w, "T\t{}", snap.total_traces)?;
    for (i, asn) in snap.nodes.iter().enumerate() {
        writeln!(w, "C\t{}\t{}\t{}", asn, snap.appearances[i], snap.mid_trace[i])?;
    }
    Ok(())
}

/// Reads a snapshot dump produced by [`write_snapshot`], validating the
/// structural invariants (self-loop-free, endpoint ordering, counter bounds).
pub fn read_snapshot<R: BufRead>(reader: R) -> Result<AsGraphSnapshot, SnapshotError> {
    let perr = |line: usize, reason: &str| SnapshotError::Parse {
        line,
        reason: reason.to_string(),
    };
    let parse_asn = |line: usize, field: &str| -> Result<Asn, SnapshotError> {
        field
            .parse::<u32>()
            .ok()
            .and_then(Asn::new)
            .ok_or_else(|| perr(line, &format!("invalid AS number `{field}`")))
    };

    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| perr(1, "empty snapshot file"))?;
    let header = header?;
    let rest = header
        .strip_prefix(DUMP_MAGIC)
        .ok_or_else(|| perr(1, "missing snapshot header"))?;
    let head: Vec<&str> = rest.split_whitespace().collect();
    if head.len() != 3 {
        return Err(perr(1, "header must be `<label> <n> <m>`"));
    }
    let label = SnapshotLabel::new(head[0])?;
    let n: usize = head[1].parse().map_err(|_| perr(1, "bad node count"))?;
    let m: usize = head[2].parse().map_err(|_| perr(1, "bad edge count"))?;

    let mut nodes: BTreeSet<Asn> = BTreeSet::new();
    let mut edges: BTreeMap<(Asn, Asn), EdgeAnnotation> = BTreeMap::new();
    let mut counters: BTreeMap<Asn, NodeCounters> = BTreeMap::new();
    let mut total: Option<u64> = None;
    let mut in_counters = false;

    for (i, line) in lines {
        let line_no = i + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if line == COUNTERS_MARK {
            in_counters = true;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if in_counters {
            match fields[0] {
                "T" if fields.len() == 2 => {
                    total = Some(
                        fields[1]
                            .parse()
                            .map_err(|_| perr(line_no, "bad trace total"))?,
                    );
                }
                "C" if fields.len() == 4 => {
                    let asn = parse_asn(line_no, fields[1])?;
                    let appearances = fields[2]
                        .parse()
                        .map_err(|_| perr(line_no, "bad appearance count"))?;
                    let mid_trace = fields[3]
                        .parse()
                        .map_err(|_| perr(line_no, "bad mid-trace count"))?;
                    counters.insert(
                        asn,
                        NodeCounters {
                            appearances,
                            mid_trace,
                        },
                    );
                }
                _ => return Err(perr(line_no, "malformed counter line")),
            }
            continue;
        }
        if fields[0] == "N" {
            if fields.len() != 2 {
                return Err(perr(line_no, "malformed node line"));
            }
            nodes.insert(parse_asn(line_no, fields[1])?);
            continue;
        }
        if fields.len() != 5 {
            return Err(perr(line_no, "malformed edge line"));
        }
        let a = parse_asn(line_no, fields[0])?;
        let b = parse_asn(line_no, fields[1])?;
        if a >= b {
            return Err(perr(line_no, "edge endpoints must satisfy a < b"));
        }
        let direct = match fields[2] {
            "0" => false,
            "1" => true,
            _ => return Err(perr(line_no, "direct flag must be 0 or 1")),
        };
        let mut via_ixps = BTreeSet::new();
        if fields[3] != "-" {
            for tok in fields[3].split(',') {
                let id = IxpId::new(tok)
                    .ok_or_else(|| perr(line_no, &format!("invalid IXP id `{tok}`")))?;
                via_ixps.insert(id);
            }
        }
        let trace_count: u64 = fields[4]
            .parse()
            .map_err(|_| perr(line_no, "bad trace count"))?;
        if trace_count == 0 {
            return Err(perr(line_no, "edge trace count must be >= 1"));
        }
        if !direct && via_ixps.is_empty() {
            return Err(perr(line_no, "edge is neither direct nor via an IXP"));
        }
        nodes.insert(a);
        nodes.insert(b);
        if edges
            .insert(
                (a, b),
                EdgeAnnotation {
                    direct,
                    via_ixps,
                    trace_count,
                },
            )
            .is_some()
        {
            return Err(perr(line_no, "duplicate edge"));
        }
    }

    let inconsistent = |reason: String| SnapshotError::Inconsistent(reason);
    let total = total.ok_or_else(|| inconsistent("missing trace total".to_string()))?;
    if nodes.len() != n {
        return Err(inconsistent(format!(
            "{} nodes but header claims {n}",
            nodes.len()
        )));
    }
    if edges.len() != m {
        return Err(inconsistent(format!(
            "{} edges but header claims {m}",
            edges.len()
        )));
    }
    for asn in &nodes {
        let c = counters
            .get(asn)
            .ok_or_else(|| inconsistent(format!("missing counters for AS {asn}")))?;
        if c.mid_trace > c.appearances || c.appearances > total {
            return Err(inconsistent(format!("counter bounds violated for AS {asn}")));
        }
    }
    if counters.len() != nodes.len() {
        return Err(inconsistent("counters for unknown AS".to_string()));
    }

    Ok(AsGraphSnapshot::from_parts(label, nodes, edges, counters, total))
}
