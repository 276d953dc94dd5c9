//! Strongly connected components with a deterministic output order.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

/// Components of the graph given as adjacency lists. Each component is
/// sorted, and components are ordered by their smallest vertex.
pub fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(adj.len(), 0);
    let nodes: Vec<_> = (0..adj.len()).map(|_| g.add_node(())).collect();
    for (u, succ) in adj.iter().enumerate() {
        for &v in succ {
            g.add_edge(nodes[u], nodes[v], ());
        }
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    comps.sort_unstable_by_key(|c| c[0]);
    comps
}

/// Index of the component containing each vertex.
pub fn component_index(comps: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut idx = vec![usize::MAX; n];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            idx[v] = i;
        }
    }
    idx
}

/// Components with no edge leaving them.
pub fn bottom_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let comps = components(adj);
    let idx = component_index(&comps, adj.len());
    comps
        .into_iter()
        .enumerate()
        .filter(|(i, c)| c.iter().all(|&u| adj[u].iter().all(|&v| idx[v] == *i)))
        .map(|(_, c)| c)
        .collect()
}

/// True when the component has at least one internal edge, i.e. a walk can
/// stay inside it forever.
pub fn is_nontrivial(comp: &[usize], adj: &[Vec<usize>]) -> bool {
    comp.len() > 1 || adj[comp[0]].contains(&comp[0])
}
