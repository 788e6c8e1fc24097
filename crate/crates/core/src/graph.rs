//! Labeled undirected graphs and the per-graph preprocessing used by the
//! similarity model: canonical BFS ordering, initial node features and the
//! symmetrically normalized adjacency with self loops.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("self loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) has an endpoint outside 0..{2}")]
    OutOfRangeEndpoint(usize, usize, usize),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

/// Graph as it appears on disk, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    pub labels: Vec<String>,
    pub edges: Vec<[usize; 2]>,
}

/// Validated undirected, unweighted graph with string node labels.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    id: String,
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Validates a raw record and canonicalizes its edge list.
    pub fn validate(raw: GraphRecord) -> Result<Graph, GraphError> {
        let n = raw.labels.len();
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut seen = BTreeSet::new();
        for &[u, v] in &raw.edges {
            if u >= n || v >= n {
                return Err(GraphError::OutOfRangeEndpoint(u, v, n));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
        }
        let edges: Vec<(usize, usize)> = seen.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Graph {
            id: raw.id,
            labels: raw.labels,
            edges,
            adjacency,
        })
    }

    /// Convenience constructor for in-memory graphs.
    pub fn new<S: Into<String>>(
        id: S,
        labels: Vec<String>,
        edges: &[(usize, usize)],
    ) -> Result<Graph, GraphError> {
        Graph::validate(GraphRecord {
            id: id.into(),
            labels,
            edges: edges.iter().map(|&(u, v)| [u, v]).collect(),
        })
    }

    /// Graph whose nodes all carry the same label.
    pub fn unlabeled<S: Into<String>>(
        id: S,
        n: usize,
        edges: &[(usize, usize)],
    ) -> Result<Graph, GraphError> {
        Graph::new(id, vec![UNLABELED.to_string(); n], edges)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord {
            id: self.id.clone(),
            labels: self.labels.clone(),
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
        }
    }

    /// Returns the graph with node `order[k]` renamed to `k`.
    pub fn permuted(&self, order: &[usize]) -> Graph {
        assert_eq!(order.len(), self.node_count(), "order must cover every node");
        let mut position = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let labels = order.iter().map(|&old| self.labels[old].clone()).collect();
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(u, v)| (position[u], position[v]))
            .collect();
        Graph::new(self.id.clone(), labels, &edges).expect("permutation preserves validity")
    }

    /// Returns the graph relabeled into its canonical BFS order.
    pub fn bfs_canonical(&self) -> Graph {
        self.permuted(&bfs_order(self))
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.node_count()
    }
}

/// Label assigned to every node of an unlabeled graph.
pub const UNLABELED: &str = "_";

/// Priority of a node during BFS: higher degree first, then smaller label,
/// then smaller index.
fn node_priority(g: &Graph, a: usize, b: usize) -> Ordering {
    g.degree(b)
        .cmp(&g.degree(a))
        .then_with(|| g.label(a).cmp(g.label(b)))
        .then_with(|| a.cmp(&b))
}

/// Deterministic breadth-first node ordering.
///
/// Each connected component is started from its best node under
/// [`node_priority`]; neighbors are enqueued in the same priority order.
pub fn bfs_order(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut by_priority: Vec<usize> = (0..n).collect();
    by_priority.sort_by(|&a, &b| node_priority(g, a, b));

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &start in &by_priority {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = g
                .neighbors(u)
                .iter()
                .copied()
                .filter(|&v| !visited[v])
                .collect();
            next.sort_by(|&a, &b| node_priority(g, a, b));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order
}

/// Ordered label vocabulary used for one-hot node features.
///
/// An empty vocabulary (or one containing only [`UNLABELED`]) selects the
/// unlabeled mode: every node gets the constant feature `[1.0]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    labels: Vec<String>,
}

impl Vocab {
    pub fn new<I, S>(labels: I) -> Vocab
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        Vocab {
            labels: set.into_iter().collect(),
        }
    }

    pub fn from_graphs<'a, I: IntoIterator<Item = &'a Graph>>(graphs: I) -> Vocab {
        Vocab::new(graphs.into_iter().flat_map(|g| g.labels().iter().cloned()))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_unlabeled(&self) -> bool {
        self.labels.is_empty() || (self.labels.len() == 1 && self.labels[0] == UNLABELED)
    }

    /// Width of the initial feature vectors.
    pub fn feature_dim(&self) -> usize {
        if self.is_unlabeled() {
            1
        } else {
            self.labels.len()
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }
}

/// Dense row-major `rows × cols` matrix of node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// One-hot features against `vocab`, or the constant vector in unlabeled mode.
pub fn initial_features(g: &Graph, vocab: &Vocab) -> Result<FeatureMatrix, GraphError> {
    let n = g.node_count();
    if vocab.is_unlabeled() {
        return Ok(FeatureMatrix {
            rows: n,
            cols: 1,
            values: vec![1.0; n],
        });
    }
    let d = vocab.feature_dim();
    let mut values = vec![0.0; n * d];
    for (i, label) in g.labels().iter().enumerate() {
        let col = vocab
            .index_of(label)
            .ok_or_else(|| GraphError::UnknownLabel(label.clone()))?;
        values[i * d + col] = 1.0;
    }
    Ok(FeatureMatrix {
        rows: n,
        cols: d,
        values,
    })
}

/// `Ã[i][j] = 1 / sqrt(d_i d_j)` for `j` adjacent to or equal to `i`, with
/// `d_i` the degree plus one. Row-major `N × N`.
pub fn normalized_adjacency(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let d: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0 / d[i];
        for &j in g.neighbors(i) {
            a[i * n + j] = 1.0 / (d[i] * d[j]).sqrt();
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn minimal_graph_is_valid() {
        let g = Graph::new("g", labels(&["C"]), &[]).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn rejects_bad_records() {
        assert_eq!(
            Graph::new("g", vec![], &[]).unwrap_err(),
            GraphError::EmptyGraph
        );
        assert_eq!(
            Graph::new("g", labels(&["C", "C"]), &[(0, 1), (1, 0)]).unwrap_err(),
            GraphError::DuplicateEdge(1, 0)
        );
        assert_eq!(
            Graph::new("g", labels(&["C", "C", "C"]), &[(2, 2)]).unwrap_err(),
            GraphError::SelfLoop(2)
        );
        assert!(matches!(
            Graph::new("g", labels(&["C", "C"]), &[(0, 2)]).unwrap_err(),
            GraphError::OutOfRangeEndpoint(0, 2, 2)
        ));
    }

    #[test]
    fn edges_are_canonical() {
        let g = Graph::new("g", labels(&["C", "C", "C"]), &[(2, 1), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.has_edge(2, 1));
    }

    #[test]
    fn bfs_single_node() {
        let g = Graph::new("g", labels(&["C"]), &[]).unwrap();
        assert_eq!(bfs_order(&g), vec![0]);
    }

    #[test]
    fn bfs_star_starts_at_center() {
        let g = Graph::unlabeled("star", 4, &[(2, 0), (2, 1), (2, 3)]).unwrap();
        let order = bfs_order(&g);
        assert_eq!(order[0], 2);
        assert_eq!(order, vec![2, 0, 1, 3]);
    }

    #[test]
    fn bfs_path_hand_trace() {
        // Path 0-1-2 labeled C,N,C: node 1 has the highest degree and starts.
        // Its neighbors 0 and 2 tie on degree and label, so index decides.
        let g = Graph::new("p", labels(&["C", "N", "C"]), &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(bfs_order(&g), vec![1, 0, 2]);
    }

    #[test]
    fn bfs_label_breaks_degree_ties() {
        // Path 0-1-2 with the two leaves labeled O and C: the C leaf comes first.
        let g = Graph::new("p", labels(&["O", "N", "C"]), &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(bfs_order(&g), vec![1, 2, 0]);
    }

    #[test]
    fn bfs_restarts_per_component() {
        // Components {0,1} and {2,3,4} (path 2-3-4); node 3 has degree 2.
        let g = Graph::unlabeled("d", 5, &[(0, 1), (2, 3), (3, 4)]).unwrap();
        assert_eq!(bfs_order(&g), vec![3, 2, 4, 0, 1]);
    }

    #[test]
    fn one_hot_features() {
        let g = Graph::new("g", labels(&["C", "N"]), &[(0, 1)]).unwrap();
        let vocab = Vocab::new(["C", "N", "O"]);
        let f = initial_features(&g, &vocab).unwrap();
        assert_eq!((f.rows, f.cols), (2, 3));
        assert_eq!(f.values, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn unlabeled_features_are_constant() {
        let g = Graph::unlabeled("g", 3, &[(0, 1)]).unwrap();
        let vocab = Vocab::from_graphs([&g]);
        assert!(vocab.is_unlabeled());
        let f = initial_features(&g, &vocab).unwrap();
        assert_eq!((f.rows, f.cols), (3, 1));
        assert_eq!(f.values, vec![1.0; 3]);
    }

    #[test]
    fn unknown_label_is_rejected() {
        let g = Graph::new("g", labels(&["X"]), &[]).unwrap();
        let vocab = Vocab::new(["C", "N"]);
        assert_eq!(
            initial_features(&g, &vocab).unwrap_err(),
            GraphError::UnknownLabel("X".into())
        );
    }

    #[test]
    fn adjacency_examples() {
        let iso = Graph::unlabeled("g", 1, &[]).unwrap();
        assert_eq!(normalized_adjacency(&iso), vec![1.0]);

        let k2 = Graph::unlabeled("g", 2, &[(0, 1)]).unwrap();
        assert_eq!(normalized_adjacency(&k2), vec![0.5; 4]);

        let p3 = Graph::unlabeled("g", 3, &[(0, 1), (1, 2)]).unwrap();
        let a = normalized_adjacency(&p3);
        assert!((a[1] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a[4] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a[2], 0.0);
    }

    #[test]
    fn permutation_roundtrip() {
        let g = Graph::new("g", labels(&["A", "B", "C"]), &[(0, 2)]).unwrap();
        let p = g.permuted(&[2, 0, 1]);
        assert_eq!(p.labels(), &labels(&["C", "A", "B"]));
        assert_eq!(p.edges(), &[(0, 1)]);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bfs_order_is_a_permutation(n in 1usize..12, mask in proptest::collection::vec(any::<bool>(), 66)) {
            let edges: Vec<_> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .zip(mask)
                .filter(|(_, keep)| *keep)
                .map(|(e, _)| e)
                .collect();
            let g = Graph::unlabeled("g", n, &edges).unwrap();
            let mut order = bfs_order(&g);
            let canonical = g.bfs_canonical();
            prop_assert_eq!(canonical.edge_count(), g.edge_count());
            order.sort_unstable();
            prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        }
    }
}
