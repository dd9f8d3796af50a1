use criterion::{black_box, criterion_group, criterion_main, Criterion};

use astopo::{betweenness, kshell_decompose, load_as_prefix_table, pagerank};
use astopo_bench::{random_connected_edges, snapshot_from_edges, synthetic_as_prefix_text};

fn bench_betweenness(c: &mut Criterion) {
    let edges = random_connected_edges(2_000, 8_000, 1);
    let snap = snapshot_from_edges("2010-01", &edges);
    c.bench_function("betweenness_2k_nodes_8k_edges", |b| {
        b.iter(|| betweenness(black_box(&snap)))
    });
}

fn bench_pagerank(c: &mut Criterion) {
    let edges = random_connected_edges(30_000, 100_000, 2);
    let snap = snapshot_from_edges("2010-01", &edges);
    c.bench_function("pagerank_30k_nodes_100k_edges", |b| {
        b.iter(|| pagerank(black_box(&snap), 0.85, 1e-10, 200).unwrap())
    });
}

fn bench_kshell(c: &mut Criterion) {
    let edges = random_connected_edges(30_000, 100_000, 3);
    let snap = snapshot_from_edges("2010-01", &edges);
    c.bench_function("kshell_30k_nodes_100k_edges", |b| {
        b.iter(|| kshell_decompose(black_box(&snap)))
    });
}

fn bench_prefix_lookup(c: &mut Criterion) {
    let text = synthetic_as_prefix_text(100_000, 10_000, 4);
    let table = load_as_prefix_table(text.as_bytes()).unwrap();
    let probes: Vec<std::net::Ipv4Addr> = (0..10_000u32)
        .map(|i| std::net::Ipv4Addr::from(i.wrapping_mul(2_654_435_761)))
        .collect();
    c.bench_function("lpm_10k_probes_100k_prefixes", |b| {
        b.iter(|| {
            let mut hits = 0usize;
            for ip in &probes {
                if table.lookup(*ip).is_some() {
                    hits += 1;
                }
            }
            black_box(hits)
        })
    });
}

criterion_group!(
    benches,
    bench_betweenness,
    bench_pagerank,
    bench_kshell,
    bench_prefix_lookup
);
criterion_main!(benches);
