//! `astopo` — build AS-graph snapshots from traceroute corpora, compute
//! per-AS metrics, and export longitudinal trend CSVs.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 empty result (no
//! parseable trace records). `ASTOPO_THREADS` caps worker parallelism
//! (0 or unset = auto).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use astopo::{
    build_distribution, build_series, export_csv, export_distribution_csv, load_as_prefix_table,
    load_geo_prefix_table, load_ixp_prefix_table, read_snapshot, trace_to_as_path,
    write_snapshot, AsClassification, AsGraphSnapshot, Asn, DistributionContext,
    DistributionName, MetricName, MetricSeries, PageRankParams, SnapshotBuilder, SnapshotLabel,
    TraceStream,
};

const EXIT_INPUT: u8 = 2;
const EXIT_EMPTY: u8 = 3;

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn empty(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_EMPTY,
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "astopo",
    about = "AS-level topology snapshots and metrics from traceroute data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a snapshot from trace files and write `<out>/<label>.snap`.
    Build(BuildArgs),
    /// Compute metrics over snapshot files and emit CSV.
    Metric(MetricArgs),
    /// Export per-AS metric series across two or more snapshots.
    Trend(TrendArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Prefix-to-AS table (`<CIDR><TAB><asn|list|SET>`).
    #[arg(long, value_name = "FILE")]
    as_prefixes: PathBuf,
    /// Prefix-to-IXP table (`<CIDR><TAB><id><TAB><name>`).
    #[arg(long, value_name = "FILE")]
    ixp_prefixes: PathBuf,
    /// Trace file; repeat for multiple inputs.
    #[arg(long, value_name = "FILE", required = true)]
    traces: Vec<PathBuf>,
    /// Snapshot label, YYYY-MM.
    #[arg(long)]
    label: String,
    /// Output directory for the snapshot dump.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct MetricArgs {
    /// Snapshot file; repeat for multiple snapshots.
    #[arg(long, value_name = "FILE", required = true)]
    snapshots: Vec<PathBuf>,
    /// Metric name; repeat for several. Defaults to all scalar metrics.
    #[arg(long = "name", value_name = "METRIC")]
    names: Vec<String>,
    /// Restrict to these AS numbers; repeatable. Defaults to all ASes.
    #[arg(long = "as", value_name = "ASN")]
    as_targets: Vec<u32>,
    /// AS classification file for the `ntype` distribution.
    #[arg(long, value_name = "FILE")]
    classes: Option<PathBuf>,
    /// Prefix-to-AS table, needed by the `country` distribution.
    #[arg(long, value_name = "FILE")]
    as_prefixes: Option<PathBuf>,
    /// Prefix-to-country table, needed by the `country` distribution.
    #[arg(long, value_name = "FILE")]
    geo: Option<PathBuf>,
    #[command(flatten)]
    pagerank: PageRankArgs,
    /// Write CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrendArgs {
    /// Snapshot file; repeat (at least two).
    #[arg(long, value_name = "FILE", required = true)]
    snapshots: Vec<PathBuf>,
    /// Scalar metric name; repeat for several. Defaults to all.
    #[arg(long = "name", value_name = "METRIC")]
    names: Vec<String>,
    /// Restrict to these AS numbers; repeatable. Defaults to all ASes.
    #[arg(long = "as", value_name = "ASN")]
    as_targets: Vec<u32>,
    #[command(flatten)]
    pagerank: PageRankArgs,
    /// Write CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PageRankArgs {
    /// PageRank damping factor, in (0, 1).
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    /// PageRank convergence tolerance (L1 change).
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// PageRank iteration cap.
    #[arg(long, default_value_t = 100)]
    max_iter: u32,
}

impl PageRankArgs {
    fn params(&self) -> PageRankParams {
        PageRankParams {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

fn main() -> ExitCode {
    if let Err(e) = init_threads() {
        eprintln!("astopo: {}", e.message);
        return ExitCode::from(e.code);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Metric(args) => cmd_metric(args),
        Command::Trend(args) => cmd_trend(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("astopo: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn init_threads() -> CliResult<()> {
    let Some(raw) = std::env::var_os("ASTOPO_THREADS") else {
        return Ok(());
    };
    let raw = raw.to_string_lossy();
    let n: usize = raw
        .parse()
        .map_err(|_| CliError::input(format!("ASTOPO_THREADS must be an integer, got `{raw}`")))?;
    if n == 0 {
        return Ok(()); // auto
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))
}

fn cmd_build(args: BuildArgs) -> CliResult<()> {
    let label =
        SnapshotLabel::new(&args.label).map_err(|e| CliError::input(e.to_string()))?;
    let as_table = load_as_prefix_table(open(&args.as_prefixes)?)
        .map_err(|e| CliError::input(format!("{}: {e}", args.as_prefixes.display())))?;
    let ixp_table = load_ixp_prefix_table(open(&args.ixp_prefixes)?)
        .map_err(|e| CliError::input(format!("{}: {e}", args.ixp_prefixes.display())))?;

    let mut builder = SnapshotBuilder::new();
    let mut parsed = 0u64;
    let mut skipped = 0u64;
    for trace_path in &args.traces {
        let mut stream = TraceStream::new(open(trace_path)?);
        loop {
            // Convert records to paths in parallel one batch at a time and
            // fold them in; accumulation is commutative, so the snapshot is
            // identical for any thread count.
            let batch: Vec<_> = (&mut stream)
                .take(8192)
                .collect::<std::io::Result<_>>()
                .map_err(|e| {
                    CliError::input(format!("reading {}: {e}", trace_path.display()))
                })?;
            if batch.is_empty() {
                break;
            }
            let partial = batch
                .par_iter()
                .fold(SnapshotBuilder::new, |mut b, record| {
                    b.add_path(&trace_to_as_path(record, &as_table, &ixp_table));
                    b
                })
                .reduce(SnapshotBuilder::new, |mut a, b| {
                    a.merge(b);
                    a
                });
            builder.merge(partial);
        }
        let summary = stream.summary();
        parsed += summary.parsed;
        skipped += summary.skipped;
    }

    if parsed == 0 {
        return Err(CliError::empty("no parseable trace records in the input"));
    }

    let snapshot = builder.finish(label.clone());
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", args.out.display())))?;
    let out_path = args.out.join(format!("{label}.snap"));
    let file = File::create(&out_path)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", out_path.display())))?;
    let mut w = BufWriter::new(file);
    write_snapshot(&snapshot, &mut w)
        .and_then(|()| w.flush())
        .map_err(|e| CliError::input(format!("writing {}: {e}", out_path.display())))?;

    let ixp_links = snapshot
        .edges()
        .filter(|(_, _, ann)| !ann.via_ixps.is_empty())
        .count();
    println!("records parsed: {parsed}");
    println!("records skipped: {skipped}");
    println!("nodes: {}", snapshot.node_count());
    println!("edges: {}", snapshot.edge_count());
    println!("ixp links: {ixp_links}");
    println!("snapshot: {}", out_path.display());
    Ok(())
}

fn load_snapshots(paths: &[PathBuf]) -> CliResult<Vec<AsGraphSnapshot>> {
    let mut snapshots = Vec::with_capacity(paths.len());
    for path in paths {
        let snap = read_snapshot(open(path)?)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        snapshots.push(snap);
    }
    snapshots.sort_by(|a, b| a.label().cmp(b.label()));
    for pair in snapshots.windows(2) {
        if pair[0].label() == pair[1].label() {
            return Err(CliError::input(format!(
                "duplicate snapshot label {}",
                pair[0].label()
            )));
        }
    }
    Ok(snapshots)
}

fn parse_targets(raw: &[u32]) -> CliResult<Vec<Asn>> {
    raw.iter()
        .map(|v| Asn::new(*v).ok_or_else(|| CliError::input(format!("invalid AS number {v}"))))
        .collect()
}

enum Selection {
    Scalar(Vec<MetricName>),
    Distribution(DistributionName),
}

/// Parses `--name` values. All-scalar when empty; a distribution name must
/// stand alone since its CSV shape differs.
fn parse_selection(names: &[String]) -> CliResult<Selection> {
    if names.is_empty() {
        return Ok(Selection::Scalar(MetricName::ALL.to_vec()));
    }
    let distributions: Vec<DistributionName> = names
        .iter()
        .filter_map(|n| DistributionName::parse(n))
        .collect();
    if !distributions.is_empty() {
        if names.len() > 1 {
            return Err(CliError::input(
                "a distribution metric (ntype, country) cannot be combined with other metrics",
            ));
        }
        return Ok(Selection::Distribution(distributions[0]));
    }
    let mut metrics = Vec::with_capacity(names.len());
    for name in names {
        let m: MetricName = name
            .parse()
            .map_err(|_| CliError::input(format!("unknown metric `{name}`")))?;
        metrics.push(m);
    }
    metrics.sort();
    metrics.dedup();
    Ok(Selection::Scalar(metrics))
}

fn write_output(out: Option<&PathBuf>, body: &[u8]) -> CliResult<()> {
    match out {
        None => std::io::stdout()
            .write_all(body)
            .map_err(|e| CliError::input(format!("writing stdout: {e}"))),
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display()))),
    }
}

fn scalar_csv(
    snapshots: &[AsGraphSnapshot],
    metrics: &[MetricName],
    targets: &[Asn],
    params: &PageRankParams,
) -> CliResult<Vec<u8>> {
    let mut all: Vec<MetricSeries> = Vec::new();
    for metric in metrics {
        let series = build_series(snapshots, *metric, targets, params)
            .map_err(|e| CliError::input(e.to_string()))?;
        all.extend(series);
    }
    let mut buf = Vec::new();
    export_csv(&all, &mut buf).map_err(|e| CliError::input(format!("export: {e}")))?;
    Ok(buf)
}

fn cmd_metric(args: MetricArgs) -> CliResult<()> {
    let snapshots = load_snapshots(&args.snapshots)?;
    let targets = parse_targets(&args.as_targets)?;
    let body = match parse_selection(&args.names)? {
        Selection::Scalar(metrics) => {
            scalar_csv(&snapshots, &metrics, &targets, &args.pagerank.params())?
        }
        Selection::Distribution(name) => {
            let classes = match &args.classes {
                Some(path) => AsClassification::from_reader(open(path)?)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?,
                None => AsClassification::empty(),
            };
            let as_table = args
                .as_prefixes
                .as_ref()
                .map(|p| {
                    load_as_prefix_table(open(p)?)
                        .map_err(|e| CliError::input(format!("{}: {e}", p.display())))
                })
                .transpose()?;
            let geo_table = args
                .geo
                .as_ref()
                .map(|p| {
                    load_geo_prefix_table(open(p)?)
                        .map_err(|e| CliError::input(format!("{}: {e}", p.display())))
                })
                .transpose()?;
            let ctx = DistributionContext {
                classes: &classes,
                as_table: as_table.as_ref(),
                geo_table: geo_table.as_ref(),
            };
            let rows = build_distribution(&snapshots, name, &targets, &ctx)
                .map_err(|e| CliError::input(e.to_string()))?;
            let mut buf = Vec::new();
            export_distribution_csv(&rows, &mut buf)
                .map_err(|e| CliError::input(format!("export: {e}")))?;
            buf
        }
    };
    write_output(args.out.as_ref(), &body)
}

fn cmd_trend(args: TrendArgs) -> CliResult<()> {
    if args.snapshots.len() < 2 {
        return Err(CliError::input("trend needs at least two snapshots"));
    }
    let snapshots = load_snapshots(&args.snapshots)?;
    let targets = parse_targets(&args.as_targets)?;
    let metrics = match parse_selection(&args.names)? {
        Selection::Scalar(metrics) => metrics,
        Selection::Distribution(name) => {
            return Err(CliError::input(format!(
                "`{name}` is a distribution metric; trend exports scalar series only"
            )));
        }
    };
    let body = scalar_csv(&snapshots, &metrics, &targets, &args.pagerank.params())?;
    write_output(args.out.as_ref(), &body)
}
