//! Undirected graphs and the position bookkeeping that turns a graph into
//! constraints on a symmetric matrix.
//!
//! Vertices are `0..p` in the Rust API. The text file format (and every
//! other user-facing rendering) uses 1-based labels.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linops::{self, vech_index, PositionSet};

/// Undirected simple graph on `p` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    p: usize,
    /// Edges as `(larger, smaller)` pairs.
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn empty(p: usize) -> Self {
        Graph {
            p,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(p: usize) -> Self {
        let edges = (0..p).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
        Graph { p, edges }
    }

    /// Chordless cycle `0 - 1 - ... - (p-1) - 0`.
    pub fn cycle(p: usize) -> Result<Self> {
        if p < 3 {
            return Err(Error::InvalidGraph(format!("a cycle needs p >= 3, got {p}")));
        }
        Graph::from_edges(p, (0..p).map(|i| (i, (i + 1) % p)))
    }

    pub fn from_edges(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::empty(p);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop at vertex {}", i + 1)));
        }
        if i >= self.p || j >= self.p {
            return Err(Error::InvalidGraph(format!(
                "edge {}-{} outside vertex range 1..{}",
                i + 1,
                j + 1,
                self.p
            )));
        }
        self.edges.insert((i.max(j), i.min(j)));
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        self.edges.remove(&(i.max(j), i.min(j)))
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&(i.max(j), i.min(j)))
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of absent edges.
    pub fn q(&self) -> usize {
        self.p * (self.p.saturating_sub(1)) / 2 - self.edges.len()
    }

    /// Edges as `(larger, smaller)` 0-based pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&u| self.has_edge(u, v))
    }

    /// Edges of `self` missing from `other`.
    pub fn edges_not_in<'a>(&'a self, other: &'a Graph) -> impl Iterator<Item = (usize, usize)> + 'a {
        self.edges().filter(move |&(i, j)| !other.has_edge(i, j))
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.p == other.p && self.edges_not_in(other).next().is_none()
    }

    /// Chordality by maximum cardinality search followed by a check that the
    /// reversed visit order is a perfect elimination ordering.
    pub fn is_chordal(&self) -> bool {
        let p = self.p;
        let mut weight = vec![0usize; p];
        let mut visited = vec![false; p];
        let mut rank = vec![0usize; p];
        let mut order = Vec::with_capacity(p);
        for step in 0..p {
            let v = (0..p)
                .filter(|&v| !visited[v])
                .max_by_key(|&v| (weight[v], std::cmp::Reverse(v)))
                .expect("unvisited vertex remains");
            visited[v] = true;
            rank[v] = step;
            order.push(v);
            for u in self.neighbors(v) {
                if !visited[u] {
                    weight[u] += 1;
                }
            }
        }
        // Neighbors visited earlier than v must, apart from the latest of
        // them, all be adjacent to that latest one.
        for &v in &order {
            let earlier: Vec<usize> = self.neighbors(v).filter(|&u| rank[u] < rank[v]).collect();
            let Some(&parent) = earlier.iter().max_by_key(|&&u| rank[u]) else {
                continue;
            };
            if earlier.iter().any(|&u| u != parent && !self.has_edge(u, parent)) {
                return false;
            }
        }
        true
    }

    /// All maximal cliques (Bron-Kerbosch with pivoting), each sorted, the
    /// list sorted lexicographically. Isolated vertices appear as singletons.
    ///
    /// Exponential in the worst case; intended for sparse graphs of modest
    /// size.
    pub fn maximal_cliques(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let candidates: BTreeSet<usize> = (0..self.p).collect();
        self.bron_kerbosch(&mut Vec::new(), candidates, BTreeSet::new(), &mut out);
        for c in &mut out {
            c.sort_unstable();
        }
        out.sort();
        out
    }

    fn bron_kerbosch(
        &self,
        r: &mut Vec<usize>,
        mut candidates: BTreeSet<usize>,
        mut excluded: BTreeSet<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if candidates.is_empty() {
            if excluded.is_empty() {
                out.push(r.clone());
            }
            return;
        }
        let pivot = candidates
            .iter()
            .chain(excluded.iter())
            .copied()
            .max_by_key(|&u| candidates.iter().filter(|&&v| self.has_edge(u, v)).count())
            .expect("non-empty");
        let branch: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&v| !self.has_edge(pivot, v))
            .collect();
        for v in branch {
            let c_next = candidates.iter().copied().filter(|&u| self.has_edge(u, v)).collect();
            let x_next = excluded.iter().copied().filter(|&u| self.has_edge(u, v)).collect();
            r.push(v);
            self.bron_kerbosch(r, c_next, x_next, out);
            r.pop();
            candidates.remove(&v);
            excluded.insert(v);
        }
    }

    /// Parses the text graph format: a `p <n>` line followed by one
    /// whitespace-separated 1-based edge `i j` per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut graph: Option<Graph> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::InvalidGraph(format!("line {}: {msg}: `{raw}`", lineno + 1));
            match graph.as_mut() {
                None => {
                    if fields.len() != 2 || fields[0] != "p" {
                        return Err(bad("expected header `p <integer>`"));
                    }
                    let p: usize = fields[1].parse().map_err(|_| bad("invalid dimension"))?;
                    if p == 0 {
                        return Err(bad("dimension must be positive"));
                    }
                    graph = Some(Graph::empty(p));
                }
                Some(g) => {
                    if fields.len() != 2 {
                        return Err(bad("expected an edge `i j`"));
                    }
                    let i: usize = fields[0].parse().map_err(|_| bad("invalid vertex"))?;
                    let j: usize = fields[1].parse().map_err(|_| bad("invalid vertex"))?;
                    if i == 0 || j == 0 {
                        return Err(bad("vertices are 1-based"));
                    }
                    g.add_edge(i - 1, j - 1).map_err(|e| bad(&e.to_string()))?;
                }
            }
        }
        graph.ok_or_else(|| Error::InvalidGraph("missing `p <integer>` header".into()))
    }
}

impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Graph::parse(s)
    }
}

impl fmt::Display for Graph {
    /// Renders the text graph format (1-based, smaller label first).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p {}", self.p)?;
        let mut edges: Vec<(usize, usize)> = self.edges().map(|(i, j)| (j, i)).collect();
        edges.sort_unstable();
        for (j, i) in edges {
            writeln!(f, "{} {}", j + 1, i + 1)?;
        }
        Ok(())
    }
}

/// Position sets induced by a graph: `D` holds the sub-diagonal non-edge
/// positions, `K` the diagonal and the sub-diagonal edge positions.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphIndex {
    graph: Graph,
    d: PositionSet,
    k: PositionSet,
    /// vech indices of `K` and `D`, in the same order.
    k_vech: Vec<usize>,
    d_vech: Vec<usize>,
}

impl GraphIndex {
    pub fn new(graph: Graph) -> Self {
        let p = graph.dim();
        let (k, d): (Vec<_>, Vec<_>) = PositionSet::lower_triangle(p)
            .iter()
            .partition(|&(i, j)| i == j || graph.has_edge(i, j));
        let k_vech = k.iter().map(|&pos| vech_index(pos, p)).collect();
        let d_vech = d.iter().map(|&pos| vech_index(pos, p)).collect();
        GraphIndex {
            d: PositionSet::new(p, d).expect("lower triangle is ordered"),
            k: PositionSet::new(p, k).expect("lower triangle is ordered"),
            graph,
            k_vech,
            d_vech,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.graph.dim()
    }

    /// `p (p + 1) / 2`.
    pub fn m(&self) -> usize {
        let p = self.dim();
        p * (p + 1) / 2
    }

    pub fn q(&self) -> usize {
        self.d.len()
    }

    pub fn d_positions(&self) -> &PositionSet {
        &self.d
    }

    pub fn k_positions(&self) -> &PositionSet {
        &self.k
    }

    pub fn k_vech_indices(&self) -> &[usize] {
        &self.k_vech
    }

    pub fn d_vech_indices(&self) -> &[usize] {
        &self.d_vech
    }

    pub fn q_d(&self) -> Result<DMatrix<f64>> {
        linops::selection_matrix(&self.d)
    }

    pub fn q_k(&self) -> Result<DMatrix<f64>> {
        linops::selection_matrix(&self.k)
    }

    /// `Q_D D_p`, a `q x m` selection from `v(A)`.
    pub fn q_tilde_d(&self) -> DMatrix<f64> {
        vech_selection(&self.d_vech, self.m())
    }

    /// `Q_K D_p`, an `(m - q) x m` selection from `v(A)`.
    pub fn q_tilde_k(&self) -> DMatrix<f64> {
        vech_selection(&self.k_vech, self.m())
    }

    /// `Q~_K` stacked over `Q~_D`; an `m x m` permutation matrix.
    pub fn p_tilde(&self) -> DMatrix<f64> {
        let m = self.m();
        let order: Vec<usize> = self.k_vech.iter().chain(&self.d_vech).copied().collect();
        vech_selection(&order, m)
    }

    /// `<a; b>_G`: the `m`-vector whose `K` entries are `a` and `D` entries
    /// are `b`.
    pub fn embed(&self, a: &[f64], b: &[f64]) -> Result<DVector<f64>> {
        if a.len() != self.k_vech.len() {
            return Err(Error::Dimension {
                expected: self.k_vech.len(),
                actual: a.len(),
            });
        }
        if b.len() != self.d_vech.len() {
            return Err(Error::Dimension {
                expected: self.d_vech.len(),
                actual: b.len(),
            });
        }
        let mut x = DVector::zeros(self.m());
        for (&idx, &val) in self.k_vech.iter().zip(a) {
            x[idx] = val;
        }
        for (&idx, &val) in self.d_vech.iter().zip(b) {
            x[idx] = val;
        }
        Ok(x)
    }

    /// Splits an `m`-vector into its `K` and `D` parts.
    pub fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let pick = |ids: &[usize]| DVector::from_iterator(ids.len(), ids.iter().map(|&i| x[i]));
        (pick(&self.k_vech), pick(&self.d_vech))
    }
}

impl From<Graph> for GraphIndex {
    fn from(g: Graph) -> Self {
        GraphIndex::new(g)
    }
}

fn vech_selection(ids: &[usize], m: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(ids.len(), m);
    for (row, &col) in ids.iter().enumerate() {
        q[(row, col)] = 1.0;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_of_small_graphs() {
        let idx = GraphIndex::new(Graph::complete(3));
        assert_eq!(idx.q(), 0);
        assert_eq!(idx.k_positions().len(), 6);

        let cycle = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(cycle, Graph::cycle(4).unwrap());
        let idx = GraphIndex::new(cycle);
        assert_eq!(idx.d_positions().positions(), &[(2, 0), (3, 1)]);
        assert_eq!(idx.q(), 2);

        assert_eq!(Graph::cycle(7).unwrap().q(), 14);
    }

    #[test]
    fn embed_round_trip_and_errors() {
        let idx = GraphIndex::new(Graph::cycle(4).unwrap());
        let x = DVector::from_fn(10, |k, _| (k as f64).sin());
        let (a, b) = idx.split(&x);
        assert_eq!(idx.embed(a.as_slice(), b.as_slice()).unwrap(), x);
        assert_eq!(&idx.q_tilde_k() * &x, a);
        assert_eq!(&idx.q_tilde_d() * &x, b);
        assert_eq!(idx.embed(&[0.0; 8], &[0.0; 2]).unwrap(), DVector::zeros(10));
        assert!(idx.embed(&[0.0; 7], &[0.0; 2]).is_err());

        let full = GraphIndex::new(Graph::complete(3));
        let a: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let e = full.embed(&a, &[]).unwrap();
        assert_eq!(full.p_tilde().transpose() * DVector::from_vec(a), e);
    }

    #[test]
    fn chordality_examples() {
        assert!(Graph::complete(5).is_chordal());
        assert!(!Graph::cycle(4).unwrap().is_chordal());
        assert!(Graph::cycle(3).unwrap().is_chordal());
        assert!(Graph::empty(4).is_chordal());
        let mut g = Graph::cycle(5).unwrap();
        g.add_edge(0, 2).unwrap();
        g.add_edge(0, 3).unwrap();
        assert!(g.is_chordal());
    }

    #[test]
    fn clique_examples() {
        let c5 = Graph::cycle(5).unwrap();
        let cl = c5.maximal_cliques();
        assert_eq!(cl.len(), 5);
        assert!(cl.iter().all(|c| c.len() == 2));
        assert_eq!(Graph::complete(4).maximal_cliques(), vec![vec![0, 1, 2, 3]]);
        let path = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.maximal_cliques(), vec![vec![0, 1], vec![1, 2]]);
        let mut iso = Graph::empty(3);
        iso.add_edge(0, 1).unwrap();
        assert_eq!(iso.maximal_cliques(), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn graph_file_format() {
        let text = "# a 4-cycle\np 4\n1 2\n2 3 # inline\n\n3 4\n4 1\n";
        let g: Graph = text.parse().unwrap();
        assert_eq!(g, Graph::cycle(4).unwrap());
        assert_eq!(Graph::parse(&g.to_string()).unwrap(), g);
        assert!(Graph::parse("1 2\n").is_err());
        assert!(Graph::parse("p 3\n1 1\n").is_err());
        assert!(Graph::parse("p 3\n1 4\n").is_err());
        let err = Graph::parse("p 3\n1 2\n0 2\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(Graph::parse("# nothing\n").is_err());
    }

    #[test]
    fn edge_bookkeeping() {
        let mut g = Graph::complete(4);
        assert_eq!(g.q(), 0);
        assert!(g.remove_edge(2, 1));
        assert!(!g.remove_edge(1, 2));
        assert_eq!(g.q(), 1);
        assert!(g.is_subgraph_of(&Graph::complete(4)));
        assert!(!Graph::complete(4).is_subgraph_of(&g));
        assert_eq!(Graph::complete(4).edges_not_in(&g).collect::<Vec<_>>(), vec![(2, 1)]);
        assert!(g.add_edge(0, 0).is_err());
    }
}
