//! Exact betweenness centrality on the undirected, unweighted AS graph.
//!
//! One BFS per source with shortest-path counting and dependency
//! accumulation. Endpoints are excluded (`s != v != t`); pairs in different
//! components contribute nothing. The normalized score divides the raw value
//! by `n(n-1)`, the number of ordered vertex pairs.
//!
//! Sources are processed in fixed-size chunks; each chunk accumulates
//! sequentially and chunk partials are reduced in chunk order, so the
//! floating-point result is identical for every thread count.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;

use crate::graph::AsGraphSnapshot;
use crate::resolution::Asn;

const SOURCE_CHUNK: usize = 128;

/// Per-AS betweenness scores.
#[derive(Debug, Clone)]
pub struct Betweenness {
    raw: BTreeMap<Asn, f64>,
    normalized: BTreeMap<Asn, f64>,
}

impl Betweenness {
    pub fn raw(&self, asn: Asn) -> Option<f64> {
        self.raw.get(&asn).copied()
    }

    pub fn normalized(&self, asn: Asn) -> Option<f64> {
        self.normalized.get(&asn).copied()
    }

    pub fn iter_raw(&self) -> impl Iterator<Item = (Asn, f64)> + '_ {
        self.raw.iter().map(|(a, v)| (*a, *v))
    }

    pub fn iter_normalized(&self) -> impl Iterator<Item = (Asn, f64)> + '_ {
        self.normalized.iter().map(|(a, v)| (*a, *v))
    }
}

/// BFS state reused across the sources of one chunk.
struct SourceScratch {
    dist: Vec<i32>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    preds: Vec<Vec<u32>>,
    order: Vec<u32>,
    queue: VecDeque<u32>,
}

impl SourceScratch {
    fn new(n: usize) -> SourceScratch {
        SourceScratch {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            preds: vec![Vec::new(); n],
            order: Vec::with_capacity(n),
            queue: VecDeque::new(),
        }
    }

    /// Runs one source and adds its dependencies into `acc`.
    fn accumulate(&mut self, g: &AsGraphSnapshot, source: u32, acc: &mut [f64]) {
        self.order.clear();
        self.queue.clear();
        self.dist[source as usize] = 0;
        self.sigma[source as usize] = 1.0;
        self.queue.push_back(source);

        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            let dv = self.dist[v as usize];
            let sv = self.sigma[v as usize];
            for &w in g.adj_of(v) {
                let wi = w as usize;
                if self.dist[wi] < 0 {
                    self.dist[wi] = dv + 1;
                    self.queue.push_back(w);
                }
                if self.dist[wi] == dv + 1 {
                    self.sigma[wi] += sv;
                    self.preds[wi].push(v);
                }
            }
        }

        for &w in self.order.iter().rev() {
            let wi = w as usize;
            let coeff = (1.0 + self.delta[wi]) / self.sigma[wi];
            for &v in &self.preds[wi] {
                self.delta[v as usize] += self.sigma[v as usize] * coeff;
            }
            if w != source {
                acc[wi] += self.delta[wi];
            }
        }

        // Reset only what this source touched.
        for &v in &self.order {
            let vi = v as usize;
            self.dist[vi] = -1;
            self.sigma[vi] = 0.0;
            self.delta[vi] = 0.0;
            self.preds[vi].clear();
        }
    }
}

/// Computes exact betweenness for every node of the snapshot.
pub fn betweenness(g: &AsGraphSnapshot) -> Betweenness {
    let n = g.node_count();
    let sources: Vec<u32> = (0..n as u32).collect();

    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut scratch = SourceScratch::new(n);
            let mut acc = vec![0.0f64; n];
            for &s in chunk {
                scratch.accumulate(g, s, &mut acc);
            }
            acc
        })
        .collect();

    let mut raw = vec![0.0f64; n];
    for partial in partials {
        for (r, p) in raw.iter_mut().zip(partial) {
            *r += p;
        }
    }

    let pairs = n as f64 * (n as f64 - 1.0);
    let raw_map: BTreeMap<Asn, f64> = raw
        .iter()
        .enumerate()
        .map(|(i, v)| (g.asn_at(i as u32), *v))
        .collect();
    let normalized = raw_map
        .iter()
        .map(|(a, v)| (*a, if pairs > 0.0 { v / pairs } else { 0.0 }))
        .collect();
    Betweenness {
        raw: raw_map,
        normalized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_snapshot, SnapshotLabel};
    use crate::ingest::{AsPath, AsPathElement, TraceKey};

    fn asn(v: u32) -> Asn {
        Asn::new(v).unwrap()
    }

    fn snapshot(edges: &[(u32, u32)]) -> AsGraphSnapshot {
        let key = TraceKey {
            timestamp: 0,
            src: "9.0.0.1".parse().unwrap(),
            dst: "9.0.0.2".parse().unwrap(),
        };
        let paths: Vec<AsPath> = edges
            .iter()
            .map(|(a, b)| {
                AsPath::new(
                    vec![
                        AsPathElement::AsHop(asn(*a)),
                        AsPathElement::AsHop(asn(*b)),
                    ],
                    key,
                )
                .unwrap()
            })
            .collect();
        build_snapshot(SnapshotLabel::new("2010-01").unwrap(), &paths)
    }

    #[test]
    fn star_center_takes_all_pairs() {
        // K_{1,3}: raw center = 3*2 = 6, normalized = 6/(4*3) = 0.5.
        let g = snapshot(&[(1, 2), (1, 3), (1, 4)]);
        let bc = betweenness(&g);
        assert_eq!(bc.raw(asn(1)), Some(6.0));
        assert_eq!(bc.normalized(asn(1)), Some(0.5));
        for leaf in [2, 3, 4] {
            assert_eq!(bc.raw(asn(leaf)), Some(0.0));
        }
    }

    #[test]
    fn path_middle_node() {
        let g = snapshot(&[(1, 2), (2, 3)]);
        let bc = betweenness(&g);
        assert_eq!(bc.raw(asn(2)), Some(2.0));
        assert_eq!(bc.normalized(asn(2)), Some(2.0 / 6.0));
        assert_eq!(bc.normalized(asn(2)), Some(1.0 / 3.0));
    }

    #[test]
    fn disconnected_pairs_contribute_nothing() {
        // Two separate paths: 1-2-3 and 4-5-6.
        let g = snapshot(&[(1, 2), (2, 3), (4, 5), (5, 6)]);
        let bc = betweenness(&g);
        assert_eq!(bc.raw(asn(2)), Some(2.0));
        assert_eq!(bc.raw(asn(5)), Some(2.0));
        // Normalization still uses the full n.
        assert_eq!(bc.normalized(asn(2)), Some(2.0 / 30.0));
    }

    #[test]
    fn even_path_splits_between_two_middles() {
        // 1-2-3-4: raw(2) = raw(3) = 2 interior pairs * ... enumerate:
        // pairs through 2: (1,3),(3,1),(1,4),(4,1) -> 4. Same for 3.
        let g = snapshot(&[(1, 2), (2, 3), (3, 4)]);
        let bc = betweenness(&g);
        assert_eq!(bc.raw(asn(2)), Some(4.0));
        assert_eq!(bc.raw(asn(3)), Some(4.0));
    }

    #[test]
    fn equal_shortest_paths_share_credit() {
        // 4-cycle 1-2-3-4-1: opposite corners have two shortest paths, each
        // middle vertex gets half per ordered pair -> raw 1.0 each.
        let g = snapshot(&[(1, 2), (2, 3), (3, 4), (4, 1)]);
        let bc = betweenness(&g);
        for v in 1..=4 {
            assert!((bc.raw(asn(v)).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
