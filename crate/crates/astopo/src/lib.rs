//! AS-level Internet topology snapshots from traceroute corpora.
//!
//! The pipeline: load prefix datasets ([`resolution`]), parse traceroutes and
//! derive AS paths ([`ingest`]), accumulate the paths of one time window into
//! an annotated undirected graph ([`graph`]), compute connectivity, hierarchy
//! and centrality metrics ([`metrics`]), and export longitudinal per-AS CSV
//! series ([`trends`]).

pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod resolution;
pub mod trends;

pub use graph::{
    build_snapshot, read_snapshot, write_snapshot, AsGraphSnapshot, EdgeAnnotation, GraphError,
    GraphStats, SnapshotBuilder, SnapshotError, SnapshotLabel,
};
pub use ingest::{
    trace_to_as_path, AsPath, AsPathElement, Hop, IngestSummary, TraceKey, TraceStream,
    TracerouteRecord,
};
pub use metrics::{
    assortativity, avg_neighbor_degree, betweenness, clustering_coefficient, ixp_stats,
    kshell_decompose, nucleus_composition, pagerank, trace_betweenness, AsClass,
    AsClassification, Betweenness, ClassShare, IxpStats, MetricsError, PageRankError,
    PageRankVector, ShellIndex,
};
pub use resolution::{
    as_country, load_as_prefix_table, load_geo_prefix_table, load_ixp_prefix_table, AsEntry,
    Asn, CountryCode, IxpId, IxpIdentity, Prefix, PrefixTable, TableError,
};
pub use trends::{
    build_distribution, build_series, export_csv, export_distribution_csv, format_value,
    parse_csv, DistributionContext, DistributionError, DistributionName, DistributionRow,
    MetricName, MetricSeries, PageRankParams, TrendsError,
};
