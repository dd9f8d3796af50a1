//! k-shell decomposition of the AS graph.
//!
//! Shell k holds the nodes removed in round k of the pruning process: for
//! k = 1, 2, ... repeatedly delete every node whose remaining degree is at
//! most k until none is left. The shell index equals the classic core number,
//! computed here with the linear-time bin-sort peeling, so the result is
//! independent of removal order. Degree-zero nodes land in shell 0; the
//! nucleus is the shell with the highest index.

use std::collections::BTreeMap;

use crate::graph::AsGraphSnapshot;
use crate::resolution::Asn;

/// Shell assignment for every node plus the nucleus index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShellIndex {
    shells: BTreeMap<Asn, u32>,
    pub nucleus_index: u32,
}

impl ShellIndex {
    pub fn shell(&self, asn: Asn) -> Option<u32> {
        self.shells.get(&asn).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Asn, u32)> + '_ {
        self.shells.iter().map(|(a, s)| (*a, *s))
    }

    /// Nodes in the highest-index shell.
    pub fn nucleus(&self) -> impl Iterator<Item = Asn> + '_ {
        let top = self.nucleus_index;
        self.shells
            .iter()
            .filter(move |(_, s)| **s == top)
            .map(|(a, _)| *a)
    }
}

pub fn kshell_decompose(g: &AsGraphSnapshot) -> ShellIndex {
    let n = g.node_count();
    if n == 0 {
        return ShellIndex {
            shells: BTreeMap::new(),
            nucleus_index: 0,
        };
    }

    let mut core: Vec<usize> = (0..n).map(|i| g.adj_of(i as u32).len()).collect();
    let max_degree = core.iter().copied().max().unwrap_or(0);

    // Bin sort nodes by degree.
    let mut bin_start = vec![0usize; max_degree + 2];
    for &d in &core {
        bin_start[d + 1] += 1;
    }
    for i in 1..bin_start.len() {
        bin_start[i] += bin_start[i - 1];
    }
    let mut position = vec![0usize; n];
    let mut ordered = vec![0u32; n];
    {
        let mut cursor = bin_start.clone();
        for v in 0..n {
            let d = core[v];
            position[v] = cursor[d];
            ordered[cursor[d]] = v as u32;
            cursor[d] += 1;
        }
    }

    // Peel in increasing current-degree order, shifting a neighbour down one
    // bin whenever its degree drops.
    for i in 0..n {
        let v = ordered[i] as usize;
        for k in 0..g.adj_of(v as u32).len() {
            let w = g.adj_of(v as u32)[k] as usize;
            if core[w] > core[v] {
                let dw = core[w];
                let pw = position[w];
                let start = bin_start[dw];
                let u = ordered[start] as usize;
                if w != u {
                    ordered.swap(pw, start);
                    position[w] = start;
                    position[u] = pw;
                }
                bin_start[dw] = start + 1;
                core[w] -= 1;
            }
        }
    }

    let shells: BTreeMap<Asn, u32> = core
        .iter()
        .enumerate()
        .map(|(i, c)| (g.asn_at(i as u32), *c as u32))
        .collect();
    let nucleus_index = shells.values().copied().max().unwrap_or(0);
    ShellIndex {
        shells,
        nucleus_index,
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

    fn k4_edges() -> Vec<(u32, u32)> {
        vec![(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
    }

    #[test]
    fn complete_graph_is_one_shell() {
        let g = snapshot(&k4_edges(), &[]);
        let shells = kshell_decompose(&g);
        for v in 1..=4 {
            assert_eq!(shells.shell(asn(v)), Some(3));
        }
        assert_eq!(shells.nucleus_index, 3);
        assert_eq!(shells.nucleus().count(), 4);
    }

    #[test]
    fn pendant_node_lands_in_shell_one() {
        let mut edges = k4_edges();
        edges.push((4, 5));
        let g = snapshot(&edges, &[]);
        let shells = kshell_decompose(&g);
        assert_eq!(shells.shell(asn(5)), Some(1));
        for v in 1..=4 {
            assert_eq!(shells.shell(asn(v)), Some(3), "AS{v}");
        }
        assert_eq!(shells.nucleus_index, 3);
    }

    #[test]
    fn isolated_node_is_shell_zero() {
        let g = snapshot(&[(1, 2)], &[9]);
        let shells = kshell_decompose(&g);
        assert_eq!(shells.shell(asn(9)), Some(0));
        assert_eq!(shells.shell(asn(1)), Some(1));
        assert_eq!(shells.nucleus_index, 1);
    }

    #[test]
    fn long_chain_peels_at_one() {
        let g = snapshot(&[(1, 2), (2, 3), (3, 4), (4, 5)], &[]);
        let shells = kshell_decompose(&g);
        for v in 1..=5 {
            assert_eq!(shells.shell(asn(v)), Some(1));
        }
    }

    #[test]
    fn shell_never_exceeds_degree() {
        let g = snapshot(&[(1, 2), (2, 3), (3, 1), (3, 4), (4, 5), (5, 3)], &[7]);
        let shells = kshell_decompose(&g);
        for (a, s) in shells.iter() {
            assert!(s as usize <= g.degree(a).unwrap());
        }
    }

    #[test]
    fn removing_a_pendant_preserves_other_shells() {
        let mut edges = k4_edges();
        edges.push((4, 5));
        let with = kshell_decompose(&snapshot(&edges, &[]));
        let without = kshell_decompose(&snapshot(&k4_edges(), &[]));
        for v in 1..=4 {
            assert_eq!(with.shell(asn(v)), without.shell(asn(v)));
        }
    }
}
