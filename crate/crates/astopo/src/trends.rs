//! Longitudinal metric series across snapshots and CSV export.
//!
//! Scalar metrics export as `metric,asn,snapshot,value` rows; distribution
//! metrics (neighbor types and countries) as
//! `metric,asn,snapshot,key,value`. Output is byte-deterministic: rows are
//! fully sorted, newlines are LF, and real values print as the shortest
//! round-trip form capped at ten significant digits.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{AsGraphSnapshot, SnapshotLabel};
use crate::metrics::{
    assortativity, avg_neighbor_degree, betweenness, clustering_coefficient, ixp_stats,
    kshell_decompose, neighbor_country_distribution, neighbor_type_distribution, pagerank,
    trace_betweenness, AsClassification,
};
use crate::resolution::{AsEntry, Asn, CountryCode, PrefixTable};

#[derive(Debug, Error)]
pub enum TrendsError {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("snapshot labels must be strictly increasing (offender: {0})")]
    UnorderedLabels(SnapshotLabel),
    #[error("pagerank: {0}")]
    PageRank(#[from] crate::metrics::PageRankError),
    #[error("csv line {line}: {reason}")]
    CsvParse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// PageRank knobs threaded through series construction.
#[derive(Debug, Clone, Copy)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

/// Scalar metric selectors, named exactly as they appear in the CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricName {
    Degree,
    AvgNeighborDegree,
    Cc,
    Assortativity,
    Density,
    Shell,
    NucleusIndex,
    BcRaw,
    BcNorm,
    TraceBc,
    Pagerank,
    IxpCount,
    IxpLinks,
    IxpLinkFraction,
}

impl MetricName {
    pub const ALL: [MetricName; 14] = [
        MetricName::Degree,
        MetricName::AvgNeighborDegree,
        MetricName::Cc,
        MetricName::Assortativity,
        MetricName::Density,
        MetricName::Shell,
        MetricName::NucleusIndex,
        MetricName::BcRaw,
        MetricName::BcNorm,
        MetricName::TraceBc,
        MetricName::Pagerank,
        MetricName::IxpCount,
        MetricName::IxpLinks,
        MetricName::IxpLinkFraction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricName::Degree => "degree",
            MetricName::AvgNeighborDegree => "avg_neighbor_degree",
            MetricName::Cc => "cc",
            MetricName::Assortativity => "assortativity",
            MetricName::Density => "density",
            MetricName::Shell => "shell",
            MetricName::NucleusIndex => "nucleus_index",
            MetricName::BcRaw => "bc_raw",
            MetricName::BcNorm => "bc_norm",
            MetricName::TraceBc => "trace_bc",
            MetricName::Pagerank => "pagerank",
            MetricName::IxpCount => "ixp_count",
            MetricName::IxpLinks => "ixp_links",
            MetricName::IxpLinkFraction => "ixp_link_fraction",
        }
    }

    /// Whole-graph metrics carry `-` in the asn column.
    pub fn is_graph_level(&self) -> bool {
        matches!(
            self,
            MetricName::Assortativity | MetricName::Density | MetricName::NucleusIndex
        )
    }
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = TrendsError;

    fn from_str(s: &str) -> Result<MetricName, TrendsError> {
        MetricName::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| TrendsError::UnknownMetric(s.to_string()))
    }
}

/// Distribution metric selectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DistributionName {
    /// Neighbour AS classes; key is the class label.
    NeighborTypes,
    /// Neighbour majority countries; key is the ISO code or `--`.
    NeighborCountries,
}

impl DistributionName {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistributionName::NeighborTypes => "ntype",
            DistributionName::NeighborCountries => "country",
        }
    }

    pub fn parse(s: &str) -> Option<DistributionName> {
        match s {
            "ntype" => Some(DistributionName::NeighborTypes),
            "country" => Some(DistributionName::NeighborCountries),
            _ => None,
        }
    }
}

impl std::fmt::Display for DistributionName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (metric, AS) curve over an ordered set of snapshots. A `None` value
/// marks the AS as absent from that snapshot (or the metric as undefined
/// there); the point is kept rather than dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub metric: MetricName,
    /// `None` for whole-graph metrics (serialized as `-`).
    pub asn: Option<Asn>,
    pub points: Vec<(SnapshotLabel, Option<f64>)>,
}

/// Per-snapshot values of one metric, either per-AS or whole-graph.
enum MetricValues {
    PerAs(std::collections::BTreeMap<Asn, Option<f64>>),
    Graph(Option<f64>),
}

fn compute_metric(
    g: &AsGraphSnapshot,
    metric: MetricName,
    params: &PageRankParams,
) -> Result<MetricValues, TrendsError> {
    let per_as = |f: &mut dyn FnMut(Asn) -> Option<f64>| {
        MetricValues::PerAs(g.nodes().map(|a| (a, f(a))).collect())
    };
    Ok(match metric {
        MetricName::Degree => per_as(&mut |a| Some(g.degree(a).expect("node") as f64)),
        MetricName::AvgNeighborDegree => {
            per_as(&mut |a| avg_neighbor_degree(g, a).expect("node"))
        }
        MetricName::Cc => per_as(&mut |a| Some(clustering_coefficient(g, a).expect("node"))),
        MetricName::Assortativity => MetricValues::Graph(assortativity(g)),
        MetricName::Density => MetricValues::Graph(g.stats().density),
        MetricName::Shell => {
            let shells = kshell_decompose(g);
            per_as(&mut |a| shells.shell(a).map(|s| s as f64))
        }
        MetricName::NucleusIndex => {
            if g.node_count() == 0 {
                MetricValues::Graph(None)
            } else {
                MetricValues::Graph(Some(kshell_decompose(g).nucleus_index as f64))
            }
        }
        MetricName::BcRaw => {
            let bc = betweenness(g);
            per_as(&mut |a| bc.raw(a))
        }
        MetricName::BcNorm => {
            let bc = betweenness(g);
            per_as(&mut |a| bc.normalized(a))
        }
        MetricName::TraceBc => match trace_betweenness(g) {
            Ok(tb) => per_as(&mut |a| tb.get(&a).copied()),
            Err(_) => per_as(&mut |_| None),
        },
        MetricName::Pagerank => {
            let pr = pagerank(g, params.damping, params.tol, params.max_iter)?;
            per_as(&mut |a| pr.score(a))
        }
        MetricName::IxpCount => per_as(&mut |a| {
            Some(ixp_stats(g, a).expect("node").ixp_count as f64)
        }),
        MetricName::IxpLinks => per_as(&mut |a| {
            Some(ixp_stats(g, a).expect("node").ixp_link_count as f64)
        }),
        MetricName::IxpLinkFraction => {
            per_as(&mut |a| ixp_stats(g, a).expect("node").ixp_link_fraction)
        }
    })
}

fn check_labels(snapshots: &[AsGraphSnapshot]) -> Result<(), TrendsError> {
    for pair in snapshots.windows(2) {
        if pair[1].label() <= pair[0].label() {
            return Err(TrendsError::UnorderedLabels(pair[1].label().clone()));
        }
    }
    Ok(())
}

/// Builds one series per target AS (or a single `-` series for whole-graph
/// metrics) across the given snapshots, whose labels must be strictly
/// increasing. An empty target set selects every AS present in any snapshot.
pub fn build_series(
    snapshots: &[AsGraphSnapshot],
    metric: MetricName,
    targets: &[Asn],
    params: &PageRankParams,
) -> Result<Vec<MetricSeries>, TrendsError> {
    check_labels(snapshots)?;

    if metric.is_graph_level() {
        let mut points = Vec::with_capacity(snapshots.len());
        for g in snapshots {
            let v = match compute_metric(g, metric, params)? {
                MetricValues::Graph(v) => v,
                MetricValues::PerAs(_) => unreachable!("graph-level metric"),
            };
            points.push((g.label().clone(), v));
        }
        return Ok(vec![MetricSeries {
            metric,
            asn: None,
            points,
        }]);
    }

    let targets: BTreeSet<Asn> = if targets.is_empty() {
        snapshots.iter().flat_map(|g| g.nodes()).collect()
    } else {
        targets.iter().copied().collect()
    };

    let mut series: Vec<MetricSeries> = targets
        .iter()
        .map(|asn| MetricSeries {
            metric,
            asn: Some(*asn),
            points: Vec::with_capacity(snapshots.len()),
        })
        .collect();
    for g in snapshots {
        let values = match compute_metric(g, metric, params)? {
            MetricValues::PerAs(v) => v,
            MetricValues::Graph(_) => unreachable!("per-AS metric"),
        };
        for s in series.iter_mut() {
            let asn = s.asn.expect("per-AS series");
            let v = values.get(&asn).copied().flatten();
            s.points.push((g.label().clone(), v));
        }
    }
    Ok(series)
}

/// Formats a value with at most ten significant digits, then prints the
/// shortest decimal string that round-trips to that rounded number.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.9e}").parse().expect("rounded float");
    format!("{rounded}")
}

fn asn_field(asn: Option<Asn>) -> String {
    match asn {
        Some(a) => a.to_string(),
        None => "-".to_string(),
    }
}

/// Writes the scalar CSV: header `metric,asn,snapshot,value`, rows sorted by
/// (metric, asn, snapshot), absent values as empty fields, LF newlines.
pub fn export_csv(series: &[MetricSeries], mut w: impl Write) -> std::io::Result<()> {
    let mut rows: Vec<(MetricName, Option<Asn>, SnapshotLabel, Option<f64>)> = series
        .iter()
        .flat_map(|s| {
            s.points
                .iter()
                .map(|(label, v)| (s.metric, s.asn, label.clone(), *v))
        })
        .collect();
    // Sort by the serialized metric name; `None` (the `-` whole-graph
    // marker) sorts before any AS number.
    rows.sort_by(|a, b| (a.0.as_str(), a.1, &a.2).cmp(&(b.0.as_str(), b.1, &b.2)));

    w.write_all(b"metric,asn,snapshot,value\n")?;
    for (metric, asn, label, value) in rows {
        let value = value.map(format_value).unwrap_or_default();
        writeln!(w, "{},{},{},{}", metric, asn_field(asn), label, value)?;
    }
    Ok(())
}

/// Parses a scalar CSV produced by [`export_csv`] back into series.
pub fn parse_csv(reader: impl BufRead) -> Result<Vec<MetricSeries>, TrendsError> {
    let mut lines = reader.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l)
        .transpose()?
        .unwrap_or_default();
    if header != "metric,asn,snapshot,value" {
        return Err(TrendsError::CsvParse {
            line: 1,
            reason: "missing scalar CSV header".to_string(),
        });
    }
    let mut series: Vec<MetricSeries> = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| TrendsError::CsvParse {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err("expected 4 fields".to_string()));
        }
        let metric = MetricName::from_str(fields[0])?;
        let asn = if fields[1] == "-" {
            None
        } else {
            Some(
                fields[1]
                    .parse::<u32>()
                    .ok()
                    .and_then(Asn::new)
                    .ok_or_else(|| err(format!("invalid asn `{}`", fields[1])))?,
            )
        };
        let label = SnapshotLabel::new(fields[2])
            .map_err(|_| err(format!("invalid snapshot label `{}`", fields[2])))?;
        let value = if fields[3].is_empty() {
            None
        } else {
            Some(
                fields[3]
                    .parse::<f64>()
                    .map_err(|_| err(format!("invalid value `{}`", fields[3])))?,
            )
        };
        match series.last_mut() {
            Some(s) if s.metric == metric && s.asn == asn => {
                s.points.push((label, value));
            }
            _ => series.push(MetricSeries {
                metric,
                asn,
                points: vec![(label, value)],
            }),
        }
    }
    Ok(series)
}

/// One row of a distribution metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionRow {
    pub metric: DistributionName,
    pub asn: Asn,
    pub snapshot: SnapshotLabel,
    pub key: String,
    pub value: u64,
}

/// Everything the distribution metrics may need besides the snapshot.
pub struct DistributionContext<'a> {
    pub classes: &'a AsClassification,
    pub as_table: Option<&'a PrefixTable<AsEntry>>,
    pub geo_table: Option<&'a PrefixTable<CountryCode>>,
}

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("the country distribution needs both an AS prefix table and a geo table")]
    MissingTables,
}

/// Computes distribution rows for the targets across snapshots. ASes absent
/// from a snapshot contribute no rows for it.
pub fn build_distribution(
    snapshots: &[AsGraphSnapshot],
    name: DistributionName,
    targets: &[Asn],
    ctx: &DistributionContext<'_>,
) -> Result<Vec<DistributionRow>, DistributionError> {
    let targets: BTreeSet<Asn> = if targets.is_empty() {
        snapshots.iter().flat_map(|g| g.nodes()).collect()
    } else {
        targets.iter().copied().collect()
    };
    let mut rows = Vec::new();
    for g in snapshots {
        for asn in &targets {
            if !g.contains(*asn) {
                continue;
            }
            match name {
                DistributionName::NeighborTypes => {
                    let dist =
                        neighbor_type_distribution(g, *asn, ctx.classes).expect("node present");
                    for (class, count) in dist {
                        rows.push(DistributionRow {
                            metric: name,
                            asn: *asn,
                            snapshot: g.label().clone(),
                            key: class.as_str().to_string(),
                            value: count,
                        });
                    }
                }
                DistributionName::NeighborCountries => {
                    let (as_table, geo_table) = match (ctx.as_table, ctx.geo_table) {
                        (Some(a), Some(g)) => (a, g),
                        _ => return Err(DistributionError::MissingTables),
                    };
                    let dist = neighbor_country_distribution(g, *asn, as_table, geo_table)
                        .expect("node present");
                    for (country, count) in dist {
                        rows.push(DistributionRow {
                            metric: name,
                            asn: *asn,
                            snapshot: g.label().clone(),
                            key: country
                                .map(|c| c.as_str().to_string())
                                .unwrap_or_else(|| "--".to_string()),
                            value: count,
                        });
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.metric, a.asn, &a.snapshot, &a.key).cmp(&(b.metric, b.asn, &b.snapshot, &b.key))
    });
    Ok(rows)
}

/// Writes the distribution CSV: header `metric,asn,snapshot,key,value`.
pub fn export_distribution_csv(
    rows: &[DistributionRow],
    mut w: impl Write,
) -> std::io::Result<()> {
    w.write_all(b"metric,asn,snapshot,key,value\n")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.metric, r.asn, r.snapshot, r.key, r.value)?;
    }
    Ok(())
}
