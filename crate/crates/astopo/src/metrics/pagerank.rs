//! PageRank over the undirected AS graph.
//!
//! Power iteration of `PR(u) = (1-d)/n + d * sum_{v ~ u} PR(v)/deg(v)`,
//! started from the uniform vector. Degree-zero nodes have no neighbours to
//! pass mass to; their mass is redistributed uniformly each iteration, which
//! keeps the score sum at one.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::AsGraphSnapshot;
use crate::resolution::Asn;

#[derive(Debug, Error, PartialEq)]
pub enum PageRankError {
    #[error("damping factor {0} outside (0, 1)")]
    BadDamping(f64),
    #[error("tolerance {0} must be positive")]
    BadTolerance(f64),
    #[error("max_iter must be at least 1")]
    BadMaxIter,
    #[error("PageRank is undefined on an empty graph")]
    EmptyGraph,
}

/// Converged (or iteration-capped) PageRank scores.
#[derive(Debug, Clone)]
pub struct PageRankVector {
    scores: BTreeMap<Asn, f64>,
    pub iterations_used: u32,
    /// L1 change of the final iteration.
    pub residual: f64,
}

impl PageRankVector {
    pub fn score(&self, asn: Asn) -> Option<f64> {
        self.scores.get(&asn).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Asn, f64)> + '_ {
        self.scores.iter().map(|(a, v)| (*a, *v))
    }

    pub fn sum(&self) -> f64 {
        self.scores.values().sum()
    }
}

/// Runs power iteration until the L1 change drops to `tol` or `max_iter`
/// iterations have been performed.
pub fn pagerank(
    g: &AsGraphSnapshot,
    damping: f64,
    tol: f64,
    max_iter: u32,
) -> Result<PageRankVector, PageRankError> {
    if damping.is_nan() || damping <= 0.0 || damping >= 1.0 {
        return Err(PageRankError::BadDamping(damping));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(PageRankError::BadTolerance(tol));
    }
    if max_iter == 0 {
        return Err(PageRankError::BadMaxIter);
    }
    let n = g.node_count();
    if n == 0 {
        return Err(PageRankError::EmptyGraph);
    }

    let nf = n as f64;
    let base = (1.0 - damping) / nf;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0f64; n];
    let mut iterations_used = 0;
    let mut residual = f64::INFINITY;

    for _ in 0..max_iter {
        let dangling: f64 = (0..n)
            .filter(|&i| g.adj_of(i as u32).is_empty())
            .map(|i| rank[i])
            .sum();
        let spread = base + damping * dangling / nf;
        for v in next.iter_mut() {
            *v = spread;
        }
        for (i, mass) in rank.iter().enumerate() {
            let neighbors = g.adj_of(i as u32);
            if neighbors.is_empty() {
                continue;
            }
            let share = damping * mass / neighbors.len() as f64;
            for &w in neighbors {
                next[w as usize] += share;
            }
        }
        residual = rank
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut rank, &mut next);
        iterations_used += 1;
        if residual <= tol {
            break;
        }
    }

    let scores = rank
        .iter()
        .enumerate()
        .map(|(i, v)| (g.asn_at(i as u32), *v))
        .collect();
    Ok(PageRankVector {
        scores,
        iterations_used,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_snapshot, SnapshotLabel};
    use crate::ingest::{AsPath, AsPathElement, TraceKey};

    fn asn(v: u32) -> Asn {
        Asn::new(v).unwrap()
    }

    fn snapshot(edges: &[(u32, u32)], isolated: &[u32]) -> AsGraphSnapshot {
        let key = TraceKey {
            timestamp: 0,
            src: "9.0.0.1".parse().unwrap(),
            dst: "9.0.0.2".parse().unwrap(),
        };
        let mut paths: Vec<AsPath> = edges
            .iter()
            .map(|(a, b)| {
                AsPath::new(
                    vec![AsPathElement::AsHop(asn(*a)), AsPathElement::AsHop(asn(*b))],
                    key,
                )
                .unwrap()
            })
            .collect();
        for v in isolated {
            paths.push(AsPath::new(vec![AsPathElement::AsHop(asn(*v))], key).unwrap());
        }
        build_snapshot(SnapshotLabel::new("2010-01").unwrap(), &paths)
    }

    #[test]
    fn five_cycle_is_uniform() {
        let g = snapshot(&[(1, 2), (2, 3), (3, 4), (4, 5), (5, 1)], &[]);
        let pr = pagerank(&g, 0.85, 1e-12, 200).unwrap();
        for v in 1..=5 {
            assert!((pr.score(asn(v)).unwrap() - 0.2).abs() < 1e-9);
        }
        assert!((pr.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_nodes_split_evenly() {
        let g = snapshot(&[(1, 2)], &[]);
        let pr = pagerank(&g, 0.85, 1e-12, 200).unwrap();
        assert!((pr.score(asn(1)).unwrap() - 0.5).abs() < 1e-12);
        assert!((pr.score(asn(2)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn isolated_nodes_keep_mass_in_the_system() {
        let g = snapshot(&[(1, 2)], &[3]);
        let pr = pagerank(&g, 0.85, 1e-12, 500).unwrap();
        assert!((pr.sum() - 1.0).abs() < 1e-9);
        assert!(pr.score(asn(3)).unwrap() > 0.0);
        assert!(pr.score(asn(1)).unwrap() > pr.score(asn(3)).unwrap());
    }

    #[test]
    fn sum_is_one_at_every_iteration() {
        let g = snapshot(&[(1, 2), (2, 3), (3, 4), (4, 1), (1, 3)], &[5]);
        for k in 1..=30 {
            let pr = pagerank(&g, 0.85, 1e-300, k).unwrap();
            assert!((pr.sum() - 1.0).abs() < 1e-9, "iteration {k}");
        }
    }

    #[test]
    fn parameters_are_validated() {
        let g = snapshot(&[(1, 2)], &[]);
        assert_eq!(
            pagerank(&g, 1.0, 1e-10, 10).unwrap_err(),
            PageRankError::BadDamping(1.0)
        );
        assert_eq!(
            pagerank(&g, 0.85, 0.0, 10).unwrap_err(),
            PageRankError::BadTolerance(0.0)
        );
        assert_eq!(pagerank(&g, 0.85, 1e-10, 0).unwrap_err(), PageRankError::BadMaxIter);
    }

    #[test]
    fn reports_iterations_and_residual() {
        let g = snapshot(&[(1, 2), (2, 3)], &[]);
        // Tight tolerance with a low cap: runs to the cap.
        let capped = pagerank(&g, 0.85, 1e-10, 50).unwrap();
        assert_eq!(capped.iterations_used, 50);
        assert!(capped.residual > 1e-10);
        // Generous cap: stops at the tolerance.
        let converged = pagerank(&g, 0.85, 1e-10, 1000).unwrap();
        assert!(converged.iterations_used < 1000);
        assert!(converged.residual <= 1e-10);
    }
}
