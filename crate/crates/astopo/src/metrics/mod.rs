//! Per-AS and whole-graph metrics over a frozen snapshot.
//!
//! Everything here is read-only; callers may fan metric computations out
//! across threads freely. The heavy kernels live in the submodules.

mod betweenness;
mod kshell;
mod pagerank;

pub use betweenness::{betweenness, Betweenness};
pub use kshell::{kshell_decompose, ShellIndex};
pub use pagerank::{pagerank, PageRankError, PageRankVector};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::graph::{AsGraphSnapshot, GraphError};
use crate::resolution::{as_country, AsEntry, Asn, CountryCode, IxpId, PrefixTable};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("snapshot has no ingested traces")]
    NoTraces,
    #[error("classification line {line}: {reason}")]
    ClassParse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mean degree of the neighbours of `asn`; `None` for an isolated node.
pub fn avg_neighbor_degree(g: &AsGraphSnapshot, asn: Asn) -> Result<Option<f64>, GraphError> {
    let d = g.degree(asn)?;
    if d == 0 {
        return Ok(None);
    }
    let sum: usize = g
        .neighbors(asn)?
        .map(|nb| g.degree(nb).expect("neighbor is a node"))
        .sum();
    Ok(Some(sum as f64 / d as f64))
}

/// Local clustering coefficient: edges among neighbours out of d(d-1)/2.
/// Defined as 0 for degree below two.
pub fn clustering_coefficient(g: &AsGraphSnapshot, asn: Asn) -> Result<f64, GraphError> {
    let idx = match g.idx_of(asn) {
        Some(i) => i,
        None => return Err(GraphError::UnknownAs(asn)),
    };
    let neighbors = g.adj_of(idx);
    let d = neighbors.len();
    if d < 2 {
        return Ok(0.0);
    }
    // Count inter-neighbour edges via sorted-list intersections; each edge
    // {u, w} among neighbours is seen from both sides.
    let mut links = 0usize;
    for &u in neighbors {
        links += sorted_intersection_count(neighbors, g.adj_of(u));
    }
    let links = links / 2;
    Ok(links as f64 / (d as f64 * (d as f64 - 1.0) / 2.0))
}

fn sorted_intersection_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Degree assortativity: the Pearson correlation of endpoint degrees over the
/// edge list with every undirected edge counted in both orientations.
/// `None` on an empty edge set or when the endpoint degrees have zero
/// variance (e.g. a cycle).
pub fn assortativity(g: &AsGraphSnapshot) -> Option<f64> {
    if g.edge_count() == 0 {
        return None;
    }
    // Accumulate over both orientations; by symmetry the x and y moments
    // coincide.
    let mut count = 0.0f64;
    let mut sum_x = 0.0f64;
    let mut sum_xx = 0.0f64;
    let mut sum_xy = 0.0f64;
    for (a, b, _) in g.edges() {
        let da = g.degree(a).expect("endpoint is a node") as f64;
        let db = g.degree(b).expect("endpoint is a node") as f64;
        count += 2.0;
        sum_x += da + db;
        sum_xx += da * da + db * db;
        sum_xy += 2.0 * da * db;
    }
    let mean = sum_x / count;
    let var = sum_xx / count - mean * mean;
    let cov = sum_xy / count - mean * mean;
    if var <= 0.0 {
        None
    } else {
        Some(cov / var)
    }
}

/// Fraction of traces that crossed each AS at an interior path position.
/// Errors when the snapshot ingested no traces at all.
pub fn trace_betweenness(g: &AsGraphSnapshot) -> Result<BTreeMap<Asn, f64>, MetricsError> {
    let total = g.total_traces();
    if total == 0 {
        return Err(MetricsError::NoTraces);
    }
    Ok(g.nodes()
        .map(|asn| {
            let i = g.idx_of(asn).expect("iterating nodes");
            (asn, g.mid_trace_at(i) as f64 / total as f64)
        })
        .collect())
}

/// The Dhamdhere–Dovrolis style AS classes consumed from a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AsClass {
    Ec,
    Stp,
    Ltp,
    Cahp,
    /// Not present in the classification input.
    Na,
}

impl AsClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AsClass::Ec => "EC",
            AsClass::Stp => "STP",
            AsClass::Ltp => "LTP",
            AsClass::Cahp => "CAHP",
            AsClass::Na => "N/A",
        }
    }

    fn parse(s: &str) -> Option<AsClass> {
        match s {
            "EC" => Some(AsClass::Ec),
            "STP" => Some(AsClass::Stp),
            "LTP" => Some(AsClass::Ltp),
            "CAHP" => Some(AsClass::Cahp),
            _ => None,
        }
    }
}

impl fmt::Display for AsClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// AS-number to class map; unknown ASes are implicitly `N/A`.
#[derive(Debug, Clone, Default)]
pub struct AsClassification {
    map: HashMap<Asn, AsClass>,
}

impl AsClassification {
    pub fn empty() -> AsClassification {
        AsClassification::default()
    }

    /// Loads `<asn><TAB><label>` lines, label one of EC, STP, LTP, CAHP.
    pub fn from_reader(reader: impl BufRead) -> Result<AsClassification, MetricsError> {
        let mut map = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| MetricsError::ClassParse {
                line: line_no,
                reason,
            };
            let (asn, label) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `<asn><TAB><label>`".to_string()))?;
            let asn = asn
                .parse::<u32>()
                .ok()
                .and_then(Asn::new)
                .ok_or_else(|| err(format!("invalid AS number `{asn}`")))?;
            let label = AsClass::parse(label)
                .ok_or_else(|| err(format!("unknown class label `{label}`")))?;
            map.insert(asn, label);
        }
        Ok(AsClassification { map })
    }

    pub fn class_of(&self, asn: Asn) -> AsClass {
        self.map.get(&asn).copied().unwrap_or(AsClass::Na)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Class share within the nucleus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassShare {
    pub count: u64,
    pub fraction: f64,
}

/// Counts the class labels of the nucleus (highest shell) members.
/// Fractions sum to one whenever the nucleus is non-empty.
pub fn nucleus_composition(
    shells: &ShellIndex,
    classes: &AsClassification,
) -> BTreeMap<AsClass, ClassShare> {
    let mut counts: BTreeMap<AsClass, u64> = BTreeMap::new();
    let mut total = 0u64;
    for asn in shells.nucleus() {
        *counts.entry(classes.class_of(asn)).or_insert(0) += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|(class, count)| {
            (
                class,
                ClassShare {
                    count,
                    fraction: count as f64 / total as f64,
                },
            )
        })
        .collect()
}

/// Number of neighbours per class; counts sum to the degree.
pub fn neighbor_type_distribution(
    g: &AsGraphSnapshot,
    asn: Asn,
    classes: &AsClassification,
) -> Result<BTreeMap<AsClass, u64>, GraphError> {
    let mut counts = BTreeMap::new();
    for nb in g.neighbors(asn)? {
        *counts.entry(classes.class_of(nb)).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Number of neighbours per majority country. Neighbours that cannot be
/// geolocated land in the `None` bucket (serialized as `--`).
pub fn neighbor_country_distribution(
    g: &AsGraphSnapshot,
    asn: Asn,
    as_table: &PrefixTable<AsEntry>,
    geo_table: &PrefixTable<CountryCode>,
) -> Result<BTreeMap<Option<CountryCode>, u64>, GraphError> {
    let mut counts = BTreeMap::new();
    for nb in g.neighbors(asn)? {
        let country = as_country(as_table, geo_table, nb);
        *counts.entry(country).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Exchange usage of one AS.
#[derive(Debug, Clone, PartialEq)]
pub struct IxpStats {
    /// Distinct exchanges on incident edges.
    pub ixp_count: usize,
    /// Incident edges that run through at least one exchange.
    pub ixp_link_count: usize,
    /// ixp_link_count / degree; `None` for an isolated node.
    pub ixp_link_fraction: Option<f64>,
}

pub fn ixp_stats(g: &AsGraphSnapshot, asn: Asn) -> Result<IxpStats, GraphError> {
    let degree = g.degree(asn)?;
    let mut ixps: std::collections::BTreeSet<&IxpId> = std::collections::BTreeSet::new();
    let mut ixp_links = 0usize;
    for nb in g.neighbors(asn)? {
        let ann = g.edge(asn, nb).expect("incident edge exists");
        if !ann.via_ixps.is_empty() {
            ixp_links += 1;
            ixps.extend(ann.via_ixps.iter());
        }
    }
    Ok(IxpStats {
        ixp_count: ixps.len(),
        ixp_link_count: ixp_links,
        ixp_link_fraction: if degree == 0 {
            None
        } else {
            Some(ixp_links as f64 / degree as f64)
        },
    })
}
