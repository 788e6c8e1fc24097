//! Exact and beam-search graph edit distance under uniform edit costs.
//!
//! Every node insertion, deletion and relabeling costs 1, as does every edge
//! insertion and deletion. Edges are unlabeled, so edge substitution is free.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::bipartite::{assignment_ged, CostVariant, LsapAlgorithm};
use crate::graph::{bfs_order, Graph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GedError {
    #[error("graph with {nodes} nodes exceeds the limit of {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("search expanded more than {0} states")]
    BudgetExceeded(usize),
}

/// Uniform unit edit costs. Kept as a type so the cost model is explicit at
/// call sites that reason about it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditCostModel {
    pub node_insert: u32,
    pub node_delete: u32,
    pub node_relabel: u32,
    pub edge_insert: u32,
    pub edge_delete: u32,
}

pub const UNIT_COSTS: EditCostModel = EditCostModel {
    node_insert: 1,
    node_delete: 1,
    node_relabel: 1,
    edge_insert: 1,
    edge_delete: 1,
};

/// Largest graph accepted by [`brute_force_ged`].
pub const BRUTE_FORCE_LIMIT: usize = 7;
/// Largest graph accepted by the search-based solvers (bitmask width).
pub const SEARCH_LIMIT: usize = 64;
/// Default cap on expanded states for [`astar_ged`].
pub const DEFAULT_ASTAR_BUDGET: usize = 20_000_000;

/// Cost of the complete edit path induced by a node mapping.
///
/// `mapping[u]` is the image of source node `u` in `g2`, or `None` when `u`
/// is deleted. Target nodes that are not images are inserted.
pub fn mapping_cost(g1: &Graph, g2: &Graph, mapping: &[Option<usize>]) -> u32 {
    let c = UNIT_COSTS;
    let mut cost = 0;
    let mut used = vec![false; g2.node_count()];
    for (u, image) in mapping.iter().enumerate() {
        match *image {
            Some(v) => {
                used[v] = true;
                if g1.label(u) != g2.label(v) {
                    cost += c.node_relabel;
                }
            }
            None => cost += c.node_delete,
        }
    }
    cost += used.iter().filter(|&&u| !u).count() as u32 * c.node_insert;

    let mut preimage = vec![None; g2.node_count()];
    for (u, image) in mapping.iter().enumerate() {
        if let Some(v) = *image {
            preimage[v] = Some(u);
        }
    }
    for &(u, w) in g1.edges() {
        let kept = match (mapping[u], mapping[w]) {
            (Some(a), Some(b)) => g2.has_edge(a, b),
            _ => false,
        };
        if !kept {
            cost += c.edge_delete;
        }
    }
    for &(a, b) in g2.edges() {
        let kept = match (preimage[a], preimage[b]) {
            (Some(u), Some(w)) => g1.has_edge(u, w),
            _ => false,
        };
        if !kept {
            cost += c.edge_insert;
        }
    }
    cost
}

/// Exhaustive GED: minimum of [`mapping_cost`] over every injective partial
/// mapping from `g1` into `g2`.
pub fn brute_force_ged(g1: &Graph, g2: &Graph) -> Result<u32, GedError> {
    for g in [g1, g2] {
        if g.node_count() > BRUTE_FORCE_LIMIT {
            return Err(GedError::TooLarge {
                nodes: g.node_count(),
                limit: BRUTE_FORCE_LIMIT,
            });
        }
    }
    fn recurse(
        g1: &Graph,
        g2: &Graph,
        mapping: &mut Vec<Option<usize>>,
        used: &mut [bool],
        best: &mut u32,
    ) {
        if mapping.len() == g1.node_count() {
            *best = (*best).min(mapping_cost(g1, g2, mapping));
            return;
        }
        for v in 0..g2.node_count() {
            if !used[v] {
                used[v] = true;
                mapping.push(Some(v));
                recurse(g1, g2, mapping, used, best);
                mapping.pop();
                used[v] = false;
            }
        }
        mapping.push(None);
        recurse(g1, g2, mapping, used, best);
        mapping.pop();
    }
    let mut best = u32::MAX;
    let mut used = vec![false; g2.node_count()];
    recurse(g1, g2, &mut Vec::new(), &mut used, &mut best);
    Ok(best)
}

const DELETED: u8 = u8::MAX;

/// Pair-local view shared by the search-based solvers: labels interned to
/// small integers, source nodes in BFS order and target candidates in the
/// target's BFS order.
struct SearchProblem<'a> {
    g1: &'a Graph,
    g2: &'a Graph,
    labels1: Vec<u32>,
    labels2: Vec<u32>,
    label_count: usize,
    source_order: Vec<usize>,
    target_order: Vec<usize>,
}

/// Node of the search tree: sources `source_order[..depth]` are mapped.
#[derive(Debug, Clone)]
struct SearchState {
    /// Image of `source_order[k]`, or `DELETED`.
    images: Vec<u8>,
    used: u64,
    g_cost: u32,
    h_cost: u32,
}

impl SearchState {
    fn depth(&self) -> usize {
        self.images.len()
    }

    fn f_cost(&self) -> u32 {
        self.g_cost + self.h_cost
    }
}

impl<'a> SearchProblem<'a> {
    fn new(g1: &'a Graph, g2: &'a Graph) -> Result<Self, GedError> {
        for g in [g1, g2] {
            if g.node_count() > SEARCH_LIMIT {
                return Err(GedError::TooLarge {
                    nodes: g.node_count(),
                    limit: SEARCH_LIMIT,
                });
            }
        }
        let mut names: Vec<&str> = g1
            .labels()
            .iter()
            .chain(g2.labels())
            .map(String::as_str)
            .collect();
        names.sort_unstable();
        names.dedup();
        let intern = |g: &Graph| -> Vec<u32> {
            g.labels()
                .iter()
                .map(|l| names.binary_search(&l.as_str()).unwrap() as u32)
                .collect()
        };
        Ok(SearchProblem {
            g1,
            g2,
            labels1: intern(g1),
            labels2: intern(g2),
            label_count: names.len(),
            source_order: bfs_order(g1),
            target_order: bfs_order(g2),
        })
    }

    fn root(&self) -> SearchState {
        let mut root = SearchState {
            images: Vec::new(),
            used: 0,
            g_cost: 0,
            h_cost: 0,
        };
        if self.g1.node_count() == 0 {
            root.g_cost = self.closure_cost(&root);
        }
        root.h_cost = self.heuristic(&root);
        root
    }

    fn is_complete(&self, s: &SearchState) -> bool {
        s.depth() == self.g1.node_count()
    }

    /// Cost of inserting every unused target node and its incident edges.
    fn closure_cost(&self, s: &SearchState) -> u32 {
        let c = UNIT_COSTS;
        let unused = |v: usize| s.used & (1u64 << v) == 0;
        let nodes = (0..self.g2.node_count()).filter(|&v| unused(v)).count() as u32;
        let edges = self
            .g2
            .edges()
            .iter()
            .filter(|&&(a, b)| unused(a) || unused(b))
            .count() as u32;
        nodes * c.node_insert + edges * c.edge_insert
    }

    /// Admissible lower bound on the cost still to pay from `s`: the optimal
    /// node cost between the remaining label multisets, plus the difference
    /// between the numbers of undecided edges on each side.
    fn heuristic(&self, s: &SearchState) -> u32 {
        if self.is_complete(s) {
            return 0;
        }
        let depth = s.depth();
        let mut remaining1 = vec![false; self.g1.node_count()];
        let mut counts = vec![0i32; self.label_count];
        for &u in &self.source_order[depth..] {
            remaining1[u] = true;
            counts[self.labels1[u] as usize] += 1;
        }
        let n1 = self.g1.node_count() - depth;
        let mut n2 = 0;
        let mut common = 0;
        for v in 0..self.g2.node_count() {
            if s.used & (1u64 << v) == 0 {
                n2 += 1;
                let slot = &mut counts[self.labels2[v] as usize];
                if *slot > 0 {
                    *slot -= 1;
                    common += 1;
                }
            }
        }
        let node_bound = n1.max(n2) - common;

        let open1 = self
            .g1
            .edges()
            .iter()
            .filter(|&&(a, b)| remaining1[a] || remaining1[b])
            .count();
        let open2 = self
            .g2
            .edges()
            .iter()
            .filter(|&&(a, b)| s.used & (1u64 << a) == 0 || s.used & (1u64 << b) == 0)
            .count();
        (node_bound + open1.abs_diff(open2)) as u32
    }

    /// Successors of `s`: the next source node mapped to every unused target
    /// (in target BFS order), then deleted.
    fn expand(&self, s: &SearchState, out: &mut Vec<SearchState>) {
        let c = UNIT_COSTS;
        let depth = s.depth();
        let u = self.source_order[depth];
        let candidates = self
            .target_order
            .iter()
            .map(|&v| Some(v))
            .filter(|v| v.is_some_and(|v| s.used & (1u64 << v) == 0))
            .chain(std::iter::once(None));
        for target in candidates {
            let mut g = s.g_cost;
            match target {
                Some(v) => {
                    if self.labels1[u] != self.labels2[v] {
                        g += c.node_relabel;
                    }
                }
                None => g += c.node_delete,
            }
            for (k, &image) in s.images.iter().enumerate() {
                let w = self.source_order[k];
                let e1 = self.g1.has_edge(u, w);
                match (target, image) {
                    (Some(v), img) if img != DELETED => {
                        let e2 = self.g2.has_edge(v, img as usize);
                        if e1 && !e2 {
                            g += c.edge_delete;
                        } else if e2 && !e1 {
                            g += c.edge_insert;
                        }
                    }
                    _ => {
                        if e1 {
                            g += c.edge_delete;
                        }
                    }
                }
            }
            let mut images = Vec::with_capacity(depth + 1);
            images.extend_from_slice(&s.images);
            let mut used = s.used;
            match target {
                Some(v) => {
                    images.push(v as u8);
                    used |= 1u64 << v;
                }
                None => images.push(DELETED),
            }
            let mut child = SearchState {
                images,
                used,
                g_cost: g,
                h_cost: 0,
            };
            if self.is_complete(&child) {
                child.g_cost += self.closure_cost(&child);
            } else {
                child.h_cost = self.heuristic(&child);
            }
            out.push(child);
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
struct QueueKey {
    f: u32,
    g: u32,
    seq: u64,
}

impl Ord for QueueKey {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.f, self.g, self.seq).cmp(&(other.f, other.g, other.seq))
    }
}

impl PartialOrd for QueueKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact GED by best-first search with an admissible heuristic.
pub fn astar_ged(g1: &Graph, g2: &Graph) -> Result<u32, GedError> {
    astar_ged_with_budget(g1, g2, DEFAULT_ASTAR_BUDGET)
}

pub fn astar_ged_with_budget(g1: &Graph, g2: &Graph, budget: usize) -> Result<u32, GedError> {
    let problem = SearchProblem::new(g1, g2)?;
    let mut states: Vec<Option<SearchState>> = Vec::new();
    let mut heap: BinaryHeap<Reverse<(QueueKey, usize)>> = BinaryHeap::new();
    let mut seq = 0u64;

    let mut push = |s: SearchState, heap: &mut BinaryHeap<_>, states: &mut Vec<_>| {
        let key = QueueKey {
            f: s.f_cost(),
            g: s.g_cost,
            seq,
        };
        seq += 1;
        states.push(Some(s));
        heap.push(Reverse((key, states.len() - 1)));
    };
    push(problem.root(), &mut heap, &mut states);

    let mut expanded = 0usize;
    let mut children = Vec::new();
    while let Some(Reverse((_, idx))) = heap.pop() {
        let state = states[idx].take().expect("each state is popped once");
        if problem.is_complete(&state) {
            return Ok(state.g_cost);
        }
        expanded += 1;
        if expanded > budget {
            return Err(GedError::BudgetExceeded(budget));
        }
        children.clear();
        problem.expand(&state, &mut children);
        for child in children.drain(..) {
            push(child, &mut heap, &mut states);
        }
    }
    unreachable!("the search tree always contains a complete mapping")
}

/// Beam width for [`beam_ged`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamWidth {
    Bounded(usize),
    Unbounded,
}

/// Depth-synchronized beam search: at each depth only the `width` best
/// states by `f = g + h` survive (ties by lower `g`, then generation order).
///
/// The result is the cost of a real edit path, hence an upper bound on the
/// GED. With [`BeamWidth::Unbounded`] nothing is dropped except states whose
/// lower bound already exceeds a known edit-path cost, so the result is exact.
pub fn beam_ged(g1: &Graph, g2: &Graph, width: BeamWidth) -> Result<u32, GedError> {
    if let BeamWidth::Bounded(0) = width {
        panic!("beam width must be at least 1");
    }
    let problem = SearchProblem::new(g1, g2)?;
    let incumbent = match width {
        BeamWidth::Unbounded => Some(assignment_ged(
            g1,
            g2,
            LsapAlgorithm::Hungarian,
            CostVariant::DegreeEnriched,
        )),
        BeamWidth::Bounded(_) => None,
    };

    let mut beam = vec![problem.root()];
    let mut children = Vec::new();
    while !problem.is_complete(&beam[0]) {
        children.clear();
        for state in &beam {
            problem.expand(state, &mut children);
        }
        if let Some(bound) = incumbent {
            children.retain(|s| s.f_cost() <= bound);
        }
        if let BeamWidth::Bounded(w) = width {
            // Stable sort keeps generation order among equal keys.
            children.sort_by_key(|s| (s.f_cost(), s.g_cost));
            children.truncate(w);
        }
        std::mem::swap(&mut beam, &mut children);
        if beam.is_empty() {
            // Only reachable when the incumbent was already optimal.
            return Ok(incumbent.expect("bounded beams never empty"));
        }
    }
    Ok(beam.iter().map(|s| s.g_cost).min().unwrap())
}

/// GED normalized by the mean graph size.
pub fn normalized_ged(ged: f64, n1: usize, n2: usize) -> f64 {
    ged / ((n1 + n2) as f64 / 2.0)
}

/// `exp(-nGED)`: maps a GED into a similarity in `(0, 1]`.
pub fn ged_to_similarity(ged: u32, n1: usize, n2: usize) -> f64 {
    (-normalized_ged(ged as f64, n1, n2)).exp()
}

/// Inverse of [`ged_to_similarity`], extended to real-valued similarities.
pub fn similarity_to_ged(sim: f64, n1: usize, n2: usize) -> f64 {
    -sim.ln() * (n1 + n2) as f64 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unl(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::unlabeled("g", n, edges).unwrap()
    }

    fn lab(ls: &[&str], edges: &[(usize, usize)]) -> Graph {
        Graph::new("g", ls.iter().map(|s| s.to_string()).collect(), edges).unwrap()
    }

    #[test]
    fn brute_force_examples() {
        let g = lab(&["C", "N", "O"], &[(0, 1), (1, 2)]);
        assert_eq!(brute_force_ged(&g, &g).unwrap(), 0);
        assert_eq!(brute_force_ged(&lab(&["C"], &[]), &lab(&["N"], &[])).unwrap(), 1);
        let p3 = unl(3, &[(0, 1), (1, 2)]);
        let c3 = unl(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(brute_force_ged(&p3, &c3).unwrap(), 1);
    }

    #[test]
    fn brute_force_size_guard() {
        let big = unl(8, &[]);
        assert_eq!(
            brute_force_ged(&big, &unl(1, &[])).unwrap_err(),
            GedError::TooLarge { nodes: 8, limit: 7 }
        );
    }

    #[test]
    fn brute_force_size_difference() {
        // K2 -> single node: delete a node and its edge.
        assert_eq!(brute_force_ged(&unl(2, &[(0, 1)]), &unl(1, &[])).unwrap(), 2);
        assert_eq!(brute_force_ged(&unl(1, &[]), &unl(2, &[(0, 1)])).unwrap(), 2);
    }

    #[test]
    fn astar_examples() {
        let g = lab(&["C", "N", "O", "C"], &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(astar_ged(&g, &g).unwrap(), 0);
        assert_eq!(astar_ged(&unl(2, &[]), &unl(2, &[(0, 1)])).unwrap(), 1);
        let p3 = unl(3, &[(0, 1), (1, 2)]);
        let c3 = unl(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(astar_ged(&p3, &c3).unwrap(), 1);
    }

    #[test]
    fn astar_budget_is_enforced() {
        let a = unl(6, &[(0, 1), (2, 3), (4, 5)]);
        let b = unl(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        assert_eq!(
            astar_ged_with_budget(&a, &b, 1).unwrap_err(),
            GedError::BudgetExceeded(1)
        );
    }

    #[test]
    fn beam_identical_width_one() {
        let g = lab(&["C", "C", "N", "C", "O"], &[(0, 1), (1, 2), (2, 3), (1, 4)]);
        assert_eq!(beam_ged(&g, &g, BeamWidth::Bounded(1)).unwrap(), 0);
    }

    #[test]
    fn beam_unbounded_is_exact() {
        let a = lab(&["C", "N", "C", "O"], &[(0, 1), (1, 2), (2, 3)]);
        let b = lab(&["C", "C", "O"], &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(
            beam_ged(&a, &b, BeamWidth::Unbounded).unwrap(),
            brute_force_ged(&a, &b).unwrap()
        );
    }

    #[test]
    fn heuristic_of_root_is_admissible_on_example() {
        let a = lab(&["C", "N", "C", "O"], &[(0, 1), (1, 2), (2, 3)]);
        let b = lab(&["C", "C", "O"], &[(0, 1), (0, 2), (1, 2)]);
        let p = SearchProblem::new(&a, &b).unwrap();
        assert!(p.root().h_cost <= brute_force_ged(&a, &b).unwrap());
    }

    #[test]
    fn similarity_transform() {
        assert_eq!(ged_to_similarity(0, 3, 5), 1.0);
        assert!((ged_to_similarity(2, 4, 4) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((ged_to_similarity(2, 4, 4) - 0.60653).abs() < 1e-5);
        let s = ged_to_similarity(3, 5, 6);
        assert!((similarity_to_ged(s, 5, 6) - 3.0).abs() < 1e-12);
    }
}
