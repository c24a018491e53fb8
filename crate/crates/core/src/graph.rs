//! Weighted directed communication graphs.
//!
//! A positive weight `a_ij` means agent `i` receives information from agent
//! `j`, i.e. an edge `j -> i`. In code, nodes are 0-based indices. The file
//! formats (JSON and CSV) use 1-based labels and explicit `[from, to, weight]`
//! triples.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::fmt::Write as _;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// The network: `n` nodes and strictly positive weights keyed by `(from, to)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct WeightedDigraph {
    n: usize,
    weights: BTreeMap<(usize, usize), f64>,
}

/// On-disk form: `{"nodes": n, "edges": [[from, to, weight], ...]}` with 1-based labels.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl TryFrom<GraphFile> for WeightedDigraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        WeightedDigraph::from_labels(file.nodes, &file.edges)
    }
}

impl From<WeightedDigraph> for GraphFile {
    fn from(g: WeightedDigraph) -> Self {
        GraphFile {
            nodes: g.n,
            edges: g.weights.iter().map(|(&(f, t), &w)| (f + 1, t + 1, w)).collect(),
        }
    }
}

impl WeightedDigraph {
    /// Builds a graph from 0-based edges. Self-loops, duplicate edges and
    /// non-positive or non-finite weights are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for Edge { from, to, weight } in edges {
            for node in [from, to] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node: node + 1, n });
                }
            }
            if from == to {
                return Err(Error::SelfLoop { node: from + 1 });
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::InvalidWeight {
                    from: from + 1,
                    to: to + 1,
                    weight,
                });
            }
            if weights.insert((from, to), weight).is_some() {
                return Err(Error::DuplicateEdge {
                    from: from + 1,
                    to: to + 1,
                });
            }
        }
        Ok(WeightedDigraph { n, weights })
    }

    /// Builds a graph from 1-based `(from, to, weight)` triples.
    pub fn from_labels(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut zero_based = Vec::with_capacity(edges.len());
        for &(from, to, weight) in edges {
            for node in [from, to] {
                if node == 0 || node > n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            zero_based.push(Edge {
                from: from - 1,
                to: to - 1,
                weight,
            });
        }
        Self::new(n, zero_based)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphFile::from(self.clone())).expect("graph serializes")
    }

    /// Reads a `from,to,weight` CSV edge list (1-based labels). The node count
    /// is the largest label unless `nodes` is given.
    pub fn from_csv(reader: impl Read, nodes: Option<usize>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            from: usize,
            to: usize,
            weight: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut edges = Vec::new();
        for row in rdr.deserialize() {
            let Row { from, to, weight } = row?;
            edges.push((from, to, weight));
        }
        let n = nodes.unwrap_or_else(|| edges.iter().map(|&(f, t, _)| f.max(t)).max().unwrap_or(0));
        Self::from_labels(n, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.weights.iter().map(|(&(from, to), &weight)| Edge { from, to, weight })
    }

    /// `a_ij` in the adjacency convention: weight of the edge `j -> i`.
    pub fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.weights.get(&(from, to)).copied()
    }

    /// Weighted adjacency matrix `A = [a_ij]`.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in self.edges() {
            a[(e.to, e.from)] = e.weight;
        }
        a
    }

    pub fn in_degrees(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for e in self.edges() {
            d[e.to] += e.weight;
        }
        d
    }

    /// `ℓ_ii = Σ_k a_ik`, `ℓ_ij = -a_ij`. The diagonal is accumulated from the
    /// same weights that are negated off the diagonal, so every row sums to
    /// exactly zero.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::<f64>::zeros(self.n, self.n);
        for e in self.edges() {
            l[(e.to, e.from)] -= e.weight;
        }
        for i in 0..self.n {
            let off: f64 = (0..self.n).filter(|&j| j != i).map(|j| -l[(i, j)]).sum();
            l[(i, i)] = off;
        }
        l
    }

    /// Row-stochastic coupling `d_ij = a_ij / (1 + q_i)`, `d_ii = 1 - Σ_{j≠i} d_ij`.
    pub fn row_stochastic(&self, cfg: &RowStochasticConfig) -> Result<DMatrix<f64>> {
        cfg.check(self)?;
        let mut d = DMatrix::zeros(self.n, self.n);
        for e in self.edges() {
            d[(e.to, e.from)] = e.weight / (1.0 + cfg.q[e.to]);
        }
        for i in 0..self.n {
            let off: f64 = (0..self.n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
            d[(i, i)] = 1.0 - off;
        }
        Ok(d)
    }

    /// Strongly connected components, classified basic / non-basic.
    pub fn bicomponents(&self) -> BicomponentPartition {
        let mut succ = vec![Vec::new(); self.n];
        for e in self.edges() {
            succ[e.from].push(e.to);
        }
        let sccs = tarjan(&succ);

        let mut comp_of = vec![0; self.n];
        for (c, nodes) in sccs.iter().enumerate() {
            for &v in nodes {
                comp_of[v] = c;
            }
        }
        let mut basic = vec![true; sccs.len()];
        let mut comp_succ = vec![Vec::new(); sccs.len()];
        for e in self.edges() {
            let (cf, ct) = (comp_of[e.from], comp_of[e.to]);
            if cf != ct {
                basic[ct] = false;
                comp_succ[cf].push(ct);
            }
        }

        let min_node = |c: usize| sccs[c].iter().copied().min().unwrap_or(usize::MAX);

        // non-basic components, sinks first, ties by smallest node
        let mut pending_succ: Vec<usize> = comp_succ
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort_unstable();
                s.dedup();
                s.len()
            })
            .collect();
        let mut preds = vec![Vec::new(); sccs.len()];
        for (c, s) in comp_succ.iter().enumerate() {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            for t in s {
                preds[t].push(c);
            }
        }
        let mut ready: BinaryHeap<Reverse<(usize, usize)>> = (0..sccs.len())
            .filter(|&c| !basic[c] && pending_succ[c] == 0)
            .map(|c| Reverse((min_node(c), c)))
            .collect();
        let mut order = Vec::with_capacity(sccs.len());
        while let Some(Reverse((_, c))) = ready.pop() {
            order.push(c);
            for &p in &preds[c] {
                pending_succ[p] -= 1;
                if pending_succ[p] == 0 && !basic[p] {
                    ready.push(Reverse((min_node(p), p)));
                }
            }
        }
        let mut basic_comps: Vec<usize> = (0..sccs.len()).filter(|&c| basic[c]).collect();
        basic_comps.sort_by_key(|&c| min_node(c));
        order.extend(basic_comps);

        let components = order
            .into_iter()
            .map(|c| {
                let mut nodes = sccs[c].clone();
                nodes.sort_unstable();
                Bicomponent {
                    nodes,
                    basic: basic[c],
                }
            })
            .collect();
        BicomponentPartition { n: self.n, components }
    }

    pub fn block_decomposition(&self) -> LaplacianBlocks {
        self.bicomponents()
            .split(&self.laplacian())
            .expect("the Laplacian has the bicomponent block pattern")
    }

    pub fn has_spanning_tree(&self) -> bool {
        self.n > 0 && self.bicomponents().basic_count() == 1
    }

    /// Copy of the graph without the listed 0-based `(from, to)` edges.
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> Result<Self> {
        let mut g = self.clone();
        for &(from, to) in removed {
            if g.weights.remove(&(from, to)).is_none() {
                return Err(Error::UnknownEdge {
                    from: from + 1,
                    to: to + 1,
                });
            }
        }
        Ok(g)
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n, "permutation length");
        let weights = self
            .weights
            .iter()
            .map(|(&(f, t), &w)| ((perm[f], perm[t]), w))
            .collect();
        WeightedDigraph { n: self.n, weights }
    }

    /// Condensation DAG in Graphviz DOT, basic bicomponents filled blue and
    /// non-basic ones yellow. Edge labels carry summed weights.
    pub fn condensation_dot(&self) -> String {
        let partition = self.bicomponents();
        let comp_of = partition.component_index();
        let mut links: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in self.edges() {
            let (cf, ct) = (comp_of[e.from], comp_of[e.to]);
            if cf != ct {
                *links.entry((cf, ct)).or_default() += e.weight;
            }
        }
        let mut out = String::from("digraph condensation {\n  node [shape=box, style=filled];\n");
        for (c, comp) in partition.components().iter().enumerate() {
            let labels: Vec<String> = comp.nodes.iter().map(|v| (v + 1).to_string()).collect();
            let color = if comp.basic { "lightblue" } else { "khaki" };
            let _ = writeln!(
                out,
                "  c{c} [label=\"{{{}}}\", fillcolor={color}];",
                labels.join(",")
            );
        }
        for ((cf, ct), w) in links {
            let _ = writeln!(out, "  c{cf} -> c{ct} [label=\"{w}\"];");
        }
        out.push_str("}\n");
        out
    }
}

/// Iterative Tarjan: components are emitted sinks-first.
fn tarjan(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut calls: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(frame) = calls.last_mut() {
            let v = frame.0;
            if let Some(&w) = succ[v].get(frame.1) {
                frame.1 += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                calls.pop();
                if let Some(&(u, _)) = calls.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Upper bounds `q_i ≥ d_in(i)` used to normalize the discrete-time coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowStochasticConfig {
    pub q: Vec<f64>,
}

impl RowStochasticConfig {
    /// Smallest admissible bounds, `q_i = d_in(i)`.
    pub fn minimal(g: &WeightedDigraph) -> Self {
        RowStochasticConfig {
            q: g.in_degrees().iter().copied().collect(),
        }
    }

    /// `q_i = d_in(i) + margin`.
    pub fn with_margin(g: &WeightedDigraph, margin: f64) -> Self {
        RowStochasticConfig {
            q: g.in_degrees().iter().map(|d| d + margin).collect(),
        }
    }

    pub fn check(&self, g: &WeightedDigraph) -> Result<()> {
        if self.q.len() != g.node_count() {
            return Err(Error::dims("q bounds", g.node_count(), self.q.len()));
        }
        for (i, (&q, d)) in self.q.iter().zip(g.in_degrees().iter()).enumerate() {
            if !q.is_finite() || q < *d {
                return Err(Error::BoundViolation {
                    node: i + 1,
                    q,
                    in_degree: *d,
                });
            }
        }
        Ok(())
    }

    pub fn as_diagonal(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.q))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bicomponent {
    /// Sorted 0-based node indices.
    pub nodes: Vec<usize>,
    /// No incoming edge from outside the component.
    pub basic: bool,
}

/// Bicomponents in block order: non-basic components first (sinks of the
/// condensation first, ties by smallest node), then basic components by
/// smallest node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BicomponentPartition {
    n: usize,
    components: Vec<Bicomponent>,
}

impl BicomponentPartition {
    pub fn components(&self) -> &[Bicomponent] {
        &self.components
    }

    pub fn basic(&self) -> impl Iterator<Item = &Bicomponent> {
        self.components.iter().filter(|c| c.basic)
    }

    pub fn non_basic(&self) -> impl Iterator<Item = &Bicomponent> {
        self.components.iter().filter(|c| !c.basic)
    }

    pub fn basic_count(&self) -> usize {
        self.basic().count()
    }

    /// Position → node: non-basic nodes first, then each basic bicomponent.
    pub fn permutation(&self) -> Vec<usize> {
        self.components.iter().flat_map(|c| c.nodes.iter().copied()).collect()
    }

    /// Node → index into [`components`](Self::components).
    pub fn component_index(&self) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for (c, comp) in self.components.iter().enumerate() {
            for &v in &comp.nodes {
                idx[v] = c;
            }
        }
        idx
    }

    /// Cuts a matrix with the Laplacian sparsity pattern (e.g. `L` or `I - D`)
    /// into the blocks of the partition. Fails if an entry that must vanish is
    /// nonzero.
    pub fn split(&self, m: &DMatrix<f64>) -> Result<LaplacianBlocks> {
        if m.shape() != (self.n, self.n) {
            return Err(Error::dims("block split", format!("{0}x{0}", self.n), format!("{:?}", m.shape())));
        }
        let perm = self.permutation();
        let pm = DMatrix::from_fn(self.n, self.n, |i, j| m[(perm[i], perm[j])]);

        let nonbasic: Vec<usize> = self.non_basic().flat_map(|c| c.nodes.iter().copied()).collect();
        let basic: Vec<Vec<usize>> = self.basic().map(|c| c.nodes.clone()).collect();
        let k0 = nonbasic.len();
        let mut offsets = vec![k0];
        for b in &basic {
            offsets.push(offsets.last().unwrap() + b.len());
        }

        for (i, b) in basic.iter().enumerate() {
            let start = offsets[i];
            for r in start..start + b.len() {
                for c in 0..self.n {
                    if (c < start || c >= start + b.len()) && pm[(r, c)] != 0.0 {
                        return Err(Error::Inconsistent(format!(
                            "basic bicomponent row {} couples to node {}",
                            perm[r] + 1,
                            perm[c] + 1
                        )));
                    }
                }
            }
        }

        let l0 = pm.view((0, 0), (k0, k0)).into_owned();
        let l0i = basic
            .iter()
            .enumerate()
            .map(|(i, b)| pm.view((0, offsets[i]), (k0, b.len())).into_owned())
            .collect();
        let li = basic
            .iter()
            .enumerate()
            .map(|(i, b)| pm.view((offsets[i], offsets[i]), (b.len(), b.len())).into_owned())
            .collect();
        Ok(LaplacianBlocks {
            permutation: perm,
            nonbasic,
            basic,
            l0,
            l0i,
            li,
        })
    }
}

/// Block form of a Laplacian-patterned matrix after permuting non-basic nodes
/// first:
///
/// ```text
/// [ L0  L01 ... L0k ]
/// [  0  L1        0 ]
/// [  0      ...     ]
/// [  0   0      Lk  ]
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianBlocks {
    permutation: Vec<usize>,
    nonbasic: Vec<usize>,
    basic: Vec<Vec<usize>>,
    l0: DMatrix<f64>,
    l0i: Vec<DMatrix<f64>>,
    li: Vec<DMatrix<f64>>,
}

impl LaplacianBlocks {
    /// Number of basic bicomponents.
    pub fn k(&self) -> usize {
        self.basic.len()
    }

    pub fn k0(&self) -> usize {
        self.nonbasic.len()
    }

    pub fn node_count(&self) -> usize {
        self.permutation.len()
    }

    /// Position → original node.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Non-basic nodes in `L0` order.
    pub fn nonbasic_nodes(&self) -> &[usize] {
        &self.nonbasic
    }

    /// Nodes of each basic bicomponent in `Li` order.
    pub fn basic_nodes(&self) -> &[Vec<usize>] {
        &self.basic
    }

    pub fn l0(&self) -> &DMatrix<f64> {
        &self.l0
    }

    pub fn l0i(&self) -> &[DMatrix<f64>] {
        &self.l0i
    }

    pub fn li(&self) -> &[DMatrix<f64>] {
        &self.li
    }

    /// The permuted matrix, assembled from the blocks.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let k0 = self.k0();
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (k0, k0)).copy_from(&self.l0);
        let mut off = k0;
        for (l0i, li) in self.l0i.iter().zip(&self.li) {
            let s = li.nrows();
            m.view_mut((0, off), (k0, s)).copy_from(l0i);
            m.view_mut((off, off), (s, s)).copy_from(li);
            off += s;
        }
        m
    }

    /// The matrix in original node order.
    pub fn to_original(&self) -> DMatrix<f64> {
        let pm = self.reassemble();
        let n = self.node_count();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(self.permutation[i], self.permutation[j])] = pm[(i, j)];
            }
        }
        m
    }
}
