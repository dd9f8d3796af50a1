//! Synthetic-input generators shared by the benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::BTreeSet;

use astopo::{build_snapshot, AsGraphSnapshot, AsPath, AsPathElement, Asn, SnapshotLabel, TraceKey};

fn trace_key() -> TraceKey {
    TraceKey {
        timestamp: 0,
        src: "198.18.0.1".parse().unwrap(),
        dst: "198.18.0.2".parse().unwrap(),
    }
}

/// Connected random graph: a random spanning tree plus extra random edges,
/// `n` nodes and exactly `m >= n - 1` edges.
pub fn random_connected_edges(n: u32, m: usize, seed: u64) -> Vec<(u32, u32)> {
    assert!(n >= 2);
    assert!(m >= n as usize - 1);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    for v in 2..=n {
        let u = rng.gen_range(1..v);
        edges.insert((u, v));
    }
    while edges.len() < m {
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        edges.insert(key);
    }
    edges.into_iter().collect()
}

/// Snapshot whose edge set is exactly `edges` (one two-hop path per edge).
pub fn snapshot_from_edges(label: &str, edges: &[(u32, u32)]) -> AsGraphSnapshot {
    let paths: Vec<AsPath> = edges
        .iter()
        .map(|(a, b)| {
            AsPath::new(
                vec![
                    AsPathElement::AsHop(Asn::new(*a).unwrap()),
                    AsPathElement::AsHop(Asn::new(*b).unwrap()),
                ],
                trace_key(),
            )
            .unwrap()
        })
        .collect();
    build_snapshot(SnapshotLabel::new(label).unwrap(), &paths)
}

/// Prefix table text with `count` distinct random prefixes spread over
/// `as_count` AS numbers.
pub fn synthetic_as_prefix_text(count: usize, as_count: u32, seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut seen: BTreeSet<(u32, u8)> = BTreeSet::new();
    let mut out = String::with_capacity(count * 24);
    let mut i = 0u32;
    while seen.len() < count {
        let len: u8 = rng.gen_range(8..=28);
        let base: u32 = rng.gen::<u32>() & (u32::MAX << (32 - len));
        if !seen.insert((base, len)) {
            continue;
        }
        let octets = base.to_be_bytes();
        let asn = 1 + (i % as_count);
        out.push_str(&format!(
            "{}.{}.{}.{}/{}\t{}\n",
            octets[0], octets[1], octets[2], octets[3], len, asn
        ));
        i += 1;
    }
    out
}
