//! Undirected weighted graphs: loading, preprocessing, derived matrices and the
//! edge split used by the link-prediction protocol.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};
use std::io::BufRead;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{validation, Error, Result};
use crate::rng;

/// Dense adjacency is only materialized for graphs up to this many nodes.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// An undirected graph with strictly positive edge weights.
///
/// Nodes are dense indices `0..n`; `names` keeps the identifier each node had
/// in the input so that label files and outputs can refer back to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    names: Vec<String>,
    // Sorted by neighbor index. A self-loop appears once in its own list.
    neighbors: Vec<Vec<(usize, f64)>>,
    // Each undirected edge once, with i <= j, sorted.
    edges: Vec<(usize, usize, f64)>,
    degrees: Vec<f64>,
}

impl Graph {
    /// Builds a graph whose node names are their indices. Duplicate edges (in
    /// either orientation) are summed.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let names = (0..node_count).map(|i| i.to_string()).collect();
        Self::with_names(names, edges)
    }

    pub fn with_names<I>(names: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = names.len();
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return validation(format!("edge ({a}, {b}) out of range for {n} nodes"));
            }
            if !(w.is_finite() && w > 0.0) {
                return validation(format!("edge ({a}, {b}) has non-positive weight {w}"));
            }
            *merged.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
        let mut edges: Vec<(usize, usize, f64)> =
            merged.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        Ok(Self::from_sorted_edges(names, edges))
    }

    fn from_sorted_edges(names: Vec<String>, edges: Vec<(usize, usize, f64)>) -> Self {
        let n = names.len();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b, w) in &edges {
            neighbors[a].push((b, w));
            if a != b {
                neighbors[b].push((a, w));
            }
        }
        for list in &mut neighbors {
            list.sort_by_key(|&(j, _)| j);
        }
        let degrees = neighbors
            .iter()
            .map(|list| list.iter().map(|&(_, w)| w).sum())
            .collect();
        Graph { names, neighbors, edges, degrees }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges `(i, j, w)` with `i <= j`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> f64 {
        self.degrees[node]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    /// `A[i][j]`, zero when there is no edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let list = &self.neighbors[i];
        match list.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => list[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weight(i, j) > 0.0
    }

    /// Sum of all adjacency entries, `vol(G) = sum_ij A_ij`.
    pub fn volume(&self) -> f64 {
        self.degrees.iter().sum()
    }

    pub fn has_self_loops(&self) -> bool {
        self.edges.iter().any(|&(a, b, _)| a == b)
    }

    /// True when every edge weight equals one.
    pub fn is_unweighted(&self) -> bool {
        self.edges.iter().all(|&(_, _, w)| w == 1.0)
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() > 0 && connected_components(self).len() == 1
    }

    pub fn dense_adjacency(&self) -> Result<Array2<f64>> {
        self.dense_adjacency_capped(DEFAULT_DENSE_CAP)
    }

    pub fn dense_adjacency_capped(&self, cap: usize) -> Result<Array2<f64>> {
        let n = self.node_count();
        if n > cap {
            return validation(format!("{n} nodes exceeds the dense storage cap of {cap}"));
        }
        let mut a = Array2::zeros((n, n));
        for &(i, j, w) in &self.edges {
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
        Ok(a)
    }

    /// Subgraph induced by `nodes` (must be sorted, distinct). Node `k` of the
    /// result is `nodes[k]` of `self`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        self.subgraph_with_edges(nodes, self.edges.iter().copied())
    }

    fn subgraph_with_edges<I>(&self, nodes: &[usize], edges: I) -> Graph
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut index = vec![usize::MAX; self.node_count()];
        for (k, &v) in nodes.iter().enumerate() {
            index[v] = k;
        }
        let names = nodes.iter().map(|&v| self.names[v].clone()).collect();
        let mut kept: Vec<(usize, usize, f64)> = edges
            .into_iter()
            .filter(|&(a, b, _)| index[a] != usize::MAX && index[b] != usize::MAX)
            .map(|(a, b, w)| {
                let (x, y) = (index[a], index[b]);
                (x.min(y), x.max(y), w)
            })
            .collect();
        kept.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        Graph::from_sorted_edges(names, kept)
    }
}

/// How the two directions of a directed input are merged into one undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectedMerge {
    #[default]
    Max,
    Sum,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Treat each line as an arc `src -> dst`. Arcs are summed per direction,
    /// then both directions are merged with `merge`.
    pub directed: bool,
    pub merge: DirectedMerge,
}

/// Parses an undirected edge list; see [`load_edge_list_with`].
pub fn load_edge_list<R: BufRead>(source: R) -> Result<Graph> {
    load_edge_list_with(source, LoadOptions::default())
}

/// Parses `src dst [weight]` lines. Blank lines and lines starting with `#` are
/// skipped. Node ids are assigned dense indices in first-seen order.
pub fn load_edge_list_with<R: BufRead>(source: R, options: LoadOptions) -> Result<Graph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut arcs: HashMap<(usize, usize), f64> = HashMap::new();

    for (lineno, line) in source.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() < 2 || tokens.len() > 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `src dst [weight]`, found {} fields", tokens.len()),
            });
        }
        let mut intern = |token: &str| -> Result<usize> {
            check_node_token(token, lineno)?;
            Ok(*ids.entry(token.to_string()).or_insert_with(|| {
                names.push(token.to_string());
                names.len() - 1
            }))
        };
        let src = intern(tokens[0])?;
        let dst = intern(tokens[1])?;
        let weight = match tokens.get(2) {
            None => 1.0,
            Some(tok) => {
                let w: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("invalid weight `{tok}`"),
                })?;
                if !w.is_finite() || w <= 0.0 {
                    return validation(format!("line {lineno}: edge weight must be positive, got {w}"));
                }
                w
            }
        };
        let key = if options.directed { (src, dst) } else { (src.min(dst), src.max(dst)) };
        *arcs.entry(key).or_insert(0.0) += weight;
    }

    let edges: Vec<(usize, usize, f64)> = if options.directed {
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        for (&(a, b), &w) in &arcs {
            let key = (a.min(b), a.max(b));
            let slot = merged.entry(key).or_insert(0.0);
            *slot = match options.merge {
                // A self-loop arc has no reverse direction to merge with.
                _ if a == b => w,
                DirectedMerge::Max => slot.max(w),
                DirectedMerge::Sum => *slot + w,
            };
        }
        merged.into_iter().map(|((a, b), w)| (a, b, w)).collect()
    } else {
        arcs.into_iter().map(|((a, b), w)| (a, b, w)).collect()
    };
    Graph::with_names(names, edges)
}

// Tokens that start like a number must be a nonnegative integer; anything else
// starting with a letter or underscore is an opaque identifier.
fn check_node_token(token: &str, line: usize) -> Result<()> {
    let first = token.chars().next().unwrap_or(' ');
    let numeric_like = first.is_ascii_digit() || first == '-' || first == '+' || first == '.';
    if numeric_like && token.parse::<u64>().is_err() {
        return Err(Error::Parse { line, message: format!("invalid node id `{token}`") });
    }
    Ok(())
}

/// Ordering of original node ids: integers numerically, before any other token.
fn name_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Connected components by breadth-first search, each sorted by node index.
pub fn connected_components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for &(u, _) in g.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Largest component; equal sizes are resolved by the smallest original id.
fn largest_component(g: &Graph) -> Vec<usize> {
    let smallest_name = |comp: &[usize]| {
        comp.iter()
            .map(|&v| g.name(v))
            .min_by(|a, b| name_order(a, b))
            .unwrap_or("")
            .to_string()
    };
    connected_components(g)
        .into_iter()
        .max_by(|a, b| {
            a.len()
                .cmp(&b.len())
                .then_with(|| name_order(&smallest_name(b), &smallest_name(a)))
        })
        .unwrap_or_default()
}

/// Removes self-loops, keeps the largest connected component and reindexes its
/// nodes by ascending original id.
pub fn preprocess(g: &Graph) -> Result<Graph> {
    let no_loops: Vec<(usize, usize, f64)> =
        g.edges().iter().copied().filter(|&(a, b, _)| a != b).collect();
    let cleaned = Graph::from_sorted_edges(g.names.clone(), no_loops);
    if cleaned.edge_count() == 0 {
        return validation("graph has no edges to embed");
    }
    let mut keep = largest_component(&cleaned);
    keep.sort_by(|&a, &b| name_order(cleaned.name(a), cleaned.name(b)));

    let mut index = vec![usize::MAX; cleaned.node_count()];
    for (k, &v) in keep.iter().enumerate() {
        index[v] = k;
    }
    let names = keep.iter().map(|&v| cleaned.names[v].clone()).collect();
    let mut edges: Vec<(usize, usize, f64)> = cleaned
        .edges()
        .iter()
        .filter(|&&(a, _, _)| index[a] != usize::MAX)
        .map(|&(a, b, w)| (index[a].min(index[b]), index[a].max(index[b]), w))
        .collect();
    edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    Ok(Graph::from_sorted_edges(names, edges))
}

/// Row-stochastic random-walk matrix `P = D^-1 A`, stored by rows.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(k, _)| k).map(|p| row[p].1).unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.node_count();
        let mut p = Array2::zeros((n, n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                p[[i, j]] = v;
            }
        }
        p
    }
}

pub fn transition_matrix(g: &Graph) -> Result<TransitionMatrix> {
    let mut rows = Vec::with_capacity(g.node_count());
    for i in 0..g.node_count() {
        let d = g.degree(i);
        if d <= 0.0 {
            return validation(format!("node {} has zero degree", g.name(i)));
        }
        rows.push(g.neighbors(i).iter().map(|&(j, w)| (j, w / d)).collect());
    }
    Ok(TransitionMatrix { rows })
}

/// Edge costs `C_ij = 1 / A_ij`; `+inf` off edges.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl CostMatrix {
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(k, _)| k)
            .map(|p| row[p].1)
            .unwrap_or(f64::INFINITY)
    }
}

pub fn cost_matrix(g: &Graph) -> CostMatrix {
    let rows = (0..g.node_count())
        .map(|i| g.neighbors(i).iter().map(|&(j, w)| (j, 1.0 / w)).collect())
        .collect();
    CostMatrix { rows }
}

/// Train/test material for link prediction. All pairs are `(i, j)` with
/// `i < j` in the node indexing of `train_graph` (shared by `induced_graph`).
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    /// Largest component of the graph left after edge removal (G').
    pub train_graph: Graph,
    /// Original graph restricted to the nodes of `train_graph` (G'').
    pub induced_graph: Graph,
    /// `node_map[k]` is the index in the original graph of train node `k`.
    pub node_map: Vec<usize>,
    /// Removed edges as `(i, j)` pairs of original-graph indices.
    pub removed_edges: Vec<(usize, usize)>,
    pub test_positive_pairs: Vec<(usize, usize)>,
    pub negative_pairs_train: Vec<(usize, usize)>,
    pub negative_pairs_test: Vec<(usize, usize)>,
    pub removal_fraction: f64,
    pub seed: u64,
}

impl EdgeSplit {
    pub fn train_positive_pairs(&self) -> Vec<(usize, usize)> {
        self.train_graph.edges().iter().map(|&(a, b, _)| (a, b)).collect()
    }
}

pub fn split_edges_for_link_prediction(
    g: &Graph,
    removal_fraction: f64,
    seed: u64,
) -> Result<EdgeSplit> {
    if !(removal_fraction > 0.0 && removal_fraction < 1.0) {
        return validation(format!("removal fraction must lie in (0, 1), got {removal_fraction}"));
    }
    let m = g.edge_count();
    let removed_count = (removal_fraction * m as f64).floor() as usize;
    if removed_count >= m {
        return validation("edge removal would leave an empty graph");
    }
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut removed = vec![false; m];
    for &e in &order[..removed_count] {
        removed[e] = true;
    }

    let remainder_edges: Vec<(usize, usize, f64)> = g
        .edges()
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(&e, _)| e)
        .collect();
    let remainder = Graph::from_sorted_edges(g.names.clone(), remainder_edges.clone());
    let mut keep = largest_component(&remainder);
    keep.sort_unstable();
    if keep.len() < 2 {
        return validation("edge removal leaves no connected pair of nodes");
    }

    let train_graph = g.subgraph_with_edges(&keep, remainder_edges);
    let induced_graph = g.induced_subgraph(&keep);
    let mut index = vec![usize::MAX; g.node_count()];
    for (k, &v) in keep.iter().enumerate() {
        index[v] = k;
    }
    let test_positive_pairs: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .zip(&removed)
        .filter(|(&(a, b, _), &r)| r && index[a] != usize::MAX && index[b] != usize::MAX)
        .map(|(&(a, b, _), _)| (index[a].min(index[b]), index[a].max(index[b])))
        .collect();

    let train_count = train_graph.edge_count();
    let needed = train_count + test_positive_pairs.len();
    let negatives = sample_non_edges(&induced_graph, needed, &mut rng)?;
    let (train_neg, test_neg) = negatives.split_at(train_count);

    Ok(EdgeSplit {
        train_graph,
        induced_graph,
        node_map: keep,
        removed_edges: order[..removed_count]
            .iter()
            .map(|&e| (g.edges()[e].0, g.edges()[e].1))
            .collect(),
        test_positive_pairs,
        negative_pairs_train: train_neg.to_vec(),
        negative_pairs_test: test_neg.to_vec(),
        removal_fraction,
        seed,
    })
}

/// Uniform sample without replacement of `count` unordered non-adjacent pairs.
fn sample_non_edges(g: &Graph, count: usize, rng: &mut rng::Rng) -> Result<Vec<(usize, usize)>> {
    let n = g.node_count();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let available = total_pairs - g.edge_count();
    if count > available {
        return validation(format!(
            "need {count} negative pairs but only {available} non-edges exist"
        ));
    }
    if count * 2 <= available {
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            if !g.has_edge(pair.0, pair.1) && chosen.insert(pair) {
                out.push(pair);
            }
        }
        Ok(out)
    } else {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| !g.has_edge(a, b))
            .collect();
        all.shuffle(rng);
        all.truncate(count);
        Ok(all)
    }
}

/// Node labels aligned with a graph's node indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    labels: Vec<Vec<usize>>,
    names: Vec<String>,
    multi_label: bool,
}

impl LabelSet {
    /// Builds a label set from per-node label ids; `names` are the label names
    /// (label id `k` is `names[k]`).
    pub fn new(labels: Vec<Vec<usize>>, names: Vec<String>) -> Result<Self> {
        let num = names.len();
        let mut labels = labels;
        for (node, ls) in labels.iter_mut().enumerate() {
            ls.sort_unstable();
            ls.dedup();
            if ls.is_empty() {
                return validation(format!("node {node} has no label"));
            }
            if let Some(&bad) = ls.iter().find(|&&l| l >= num) {
                return validation(format!("label id {bad} out of range for {num} labels"));
            }
        }
        let multi_label = labels.iter().any(|ls| ls.len() > 1);
        Ok(LabelSet { labels, names, multi_label })
    }

    /// Single-label set from one class id per node.
    pub fn from_classes(classes: &[usize]) -> Result<Self> {
        let num = classes.iter().copied().max().map_or(0, |m| m + 1);
        Self::new(
            classes.iter().map(|&c| vec![c]).collect(),
            (0..num).map(|c| c.to_string()).collect(),
        )
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn num_labels(&self) -> usize {
        self.names.len()
    }

    pub fn is_multi_label(&self) -> bool {
        self.multi_label
    }

    pub fn labels_of(&self, node: usize) -> &[usize] {
        &self.labels[node]
    }

    pub fn label_names(&self) -> &[String] {
        &self.names
    }

    /// One class per node; fails for multi-label data.
    pub fn classes(&self) -> Result<Vec<usize>> {
        if self.multi_label {
            return Err(Error::Unsupported("multi-label data has no single class per node".into()));
        }
        Ok(self.labels.iter().map(|ls| ls[0]).collect())
    }

    /// Restricts to a subset of nodes; `nodes[k]` becomes node `k`.
    pub fn select(&self, nodes: &[usize]) -> LabelSet {
        let labels: Vec<Vec<usize>> = nodes.iter().map(|&v| self.labels[v].clone()).collect();
        let multi_label = labels.iter().any(|ls| ls.len() > 1);
        LabelSet { labels, names: self.names.clone(), multi_label }
    }
}

/// Reads `node_id label[,label...]` lines and aligns them with `g`. Labels of
/// nodes absent from `g` are ignored; every node of `g` must have a label.
pub fn load_labels<R: BufRead>(source: R, g: &Graph) -> Result<LabelSet> {
    let index: HashMap<&str, usize> =
        g.names().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut labels = vec![Vec::new(); g.node_count()];

    for (lineno, line) in source.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.splitn(2, char::is_whitespace);
        let node = parts.next().unwrap_or_default();
        let rest = parts.next().unwrap_or("").trim();
        let tokens: Vec<&str> = rest
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            return Err(Error::Parse { line: lineno, message: format!("node `{node}` has no label") });
        }
        let Some(&v) = index.get(node) else { continue };
        for t in tokens {
            let id = *label_ids.entry(t.to_string()).or_insert_with(|| {
                label_names.push(t.to_string());
                label_names.len() - 1
            });
            labels[v].push(id);
        }
    }
    if let Some(v) = labels.iter().position(|ls| ls.is_empty()) {
        return validation(format!("node `{}` has no label", g.name(v)));
    }
    LabelSet::new(labels, label_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Graph> {
        load_edge_list(text.as_bytes())
    }

    #[test]
    fn loads_unit_weights() {
        let g = parse("0 1\n1 2").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert!(g.edges().iter().all(|&(_, _, w)| w == 1.0));
    }

    #[test]
    fn duplicate_lines_are_summed() {
        let g = parse("a b 2.5\nb a 2.5").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), &[(0, 1, 5.0)]);
    }

    #[test]
    fn malformed_token_reports_line() {
        match parse("0 1\n1 -1weight") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn nonpositive_weight_is_rejected() {
        assert!(matches!(parse("0 1 0"), Err(Error::Validation(_))));
        assert!(matches!(parse("0 1 -2"), Err(Error::Validation(_))));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let g = parse("# header\n\n0 1\n  # indented comment\n1 2 3\n").unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.weight(1, 2), 3.0);
    }

    #[test]
    fn directed_input_merges_by_max_or_sum() {
        let text = "0 1\n1 0\n1 2 2\n";
        let max = load_edge_list_with(text.as_bytes(), LoadOptions { directed: true, merge: DirectedMerge::Max }).unwrap();
        assert_eq!(max.weight(0, 1), 1.0);
        assert_eq!(max.weight(1, 2), 2.0);
        let sum = load_edge_list_with(text.as_bytes(), LoadOptions { directed: true, merge: DirectedMerge::Sum }).unwrap();
        assert_eq!(sum.weight(0, 1), 2.0);
    }

    #[test]
    fn preprocess_drops_self_loops() {
        let g = parse("0 1\n1 2\n2 0\n1 1").unwrap();
        let p = preprocess(&g).unwrap();
        assert_eq!(p.node_count(), 3);
        assert_eq!(p.edge_count(), 3);
        assert!(!p.has_self_loops());
    }

    #[test]
    fn preprocess_keeps_largest_component() {
        let g = parse("0 1\n2 3\n3 4").unwrap();
        let p = preprocess(&g).unwrap();
        assert_eq!(p.node_count(), 3);
        assert_eq!(p.names(), &["2", "3", "4"]);
        assert_eq!(p.edges(), &[(0, 1, 1.0), (1, 2, 1.0)]);
    }

    #[test]
    fn preprocess_sorts_by_original_id() {
        let g = parse("10 2\n2 7\n7 10").unwrap();
        let p = preprocess(&g).unwrap();
        assert_eq!(p.names(), &["2", "7", "10"]);
    }

    #[test]
    fn component_tie_goes_to_smallest_id() {
        let g = parse("5 6\n1 9").unwrap();
        let p = preprocess(&g).unwrap();
        assert_eq!(p.names(), &["1", "9"]);
    }

    #[test]
    fn preprocess_rejects_edgeless_graph() {
        let g = Graph::from_edges(1, []).unwrap();
        assert!(matches!(preprocess(&g), Err(Error::Validation(_))));
        let loops = parse("3 3").unwrap();
        assert!(matches!(preprocess(&loops), Err(Error::Validation(_))));
    }

    #[test]
    fn transition_rows() {
        let path = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let p = transition_matrix(&path).unwrap();
        assert_eq!(p.get(1, 0), 0.5);
        assert_eq!(p.get(1, 2), 0.5);
        assert_eq!(p.get(0, 1), 1.0);

        let edge = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let dense = transition_matrix(&edge).unwrap().to_dense();
        assert_eq!(dense, ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]]));

        let star = Graph::from_edges(3, [(0, 1, 1.0), (0, 2, 3.0)]).unwrap();
        let p = transition_matrix(&star).unwrap();
        assert_eq!(p.get(0, 1), 0.25);
        assert_eq!(p.get(0, 2), 0.75);
    }

    #[test]
    fn zero_degree_rejected() {
        let g = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        assert!(transition_matrix(&g).is_err());
    }

    #[test]
    fn costs_are_reciprocal_weights() {
        let g = Graph::from_edges(3, [(0, 1, 2.0), (1, 2, 1.0)]).unwrap();
        let c = cost_matrix(&g);
        assert_eq!(c.get(0, 1), 0.5);
        assert_eq!(c.get(1, 0), 0.5);
        assert_eq!(c.get(1, 2), 1.0);
        assert_eq!(c.get(0, 2), f64::INFINITY);
        assert_eq!(c.get(0, 0), f64::INFINITY);
    }

    fn ten_edge_graph() -> Graph {
        // Cycle on 8 nodes plus two chords.
        let mut edges: Vec<(usize, usize, f64)> = (0..8).map(|i| (i, (i + 1) % 8, 1.0)).collect();
        edges.push((0, 4, 1.0));
        edges.push((2, 6, 1.0));
        Graph::from_edges(8, edges).unwrap()
    }

    #[test]
    fn split_removes_floor_fraction() {
        let g = ten_edge_graph();
        assert_eq!(g.edge_count(), 10);
        let split = split_edges_for_link_prediction(&g, 0.3, 3).unwrap();
        assert_eq!(split.removed_edges.len(), 3);
        let kept = split.train_graph.edge_count();
        // Nodes isolated by the removal drop out of G', together with their removed edges.
        assert!(kept <= 7);
        let total = split.induced_graph.edge_count();
        assert_eq!(total, kept + split.test_positive_pairs.len());
    }

    #[test]
    fn split_is_deterministic() {
        let g = ten_edge_graph();
        let a = split_edges_for_link_prediction(&g, 0.3, 11).unwrap();
        let b = split_edges_for_link_prediction(&g, 0.3, 11).unwrap();
        assert_eq!(a.train_graph, b.train_graph);
        assert_eq!(a.test_positive_pairs, b.test_positive_pairs);
        assert_eq!(a.negative_pairs_train, b.negative_pairs_train);
        assert_eq!(a.negative_pairs_test, b.negative_pairs_test);
    }

    #[test]
    fn split_of_complete_graph_has_no_negatives() {
        let edges = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b, 1.0)));
        let k4 = Graph::from_edges(4, edges).unwrap();
        assert!(matches!(
            split_edges_for_link_prediction(&k4, 0.3, 0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn split_invariants() {
        let g = ten_edge_graph();
        for seed in 0..20 {
            let s = split_edges_for_link_prediction(&g, 0.3, seed).unwrap();
            assert!(s.train_graph.is_connected());
            assert_eq!(s.negative_pairs_train.len(), s.train_graph.edge_count());
            assert_eq!(s.negative_pairs_test.len(), s.test_positive_pairs.len());
            for &(a, b) in &s.test_positive_pairs {
                assert!(!s.train_graph.has_edge(a, b));
                assert!(g.has_edge(s.node_map[a], s.node_map[b]));
            }
            for &(a, b) in s.negative_pairs_train.iter().chain(&s.negative_pairs_test) {
                assert!(a < b);
                assert!(!s.induced_graph.has_edge(a, b));
            }
            let mut all: Vec<_> = s.negative_pairs_train.iter().chain(&s.negative_pairs_test).collect();
            let before = all.len();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), before);
        }
    }

    #[test]
    fn labels_align_with_graph_names() {
        let g = parse("a b\nb c").unwrap();
        let labels = load_labels("# comment\nc x\na y,x\nb y\nzz q\n".as_bytes(), &g).unwrap();
        assert!(labels.is_multi_label());
        assert_eq!(labels.num_labels(), 2);
        assert_eq!(labels.labels_of(2), &[0]);
        assert_eq!(labels.labels_of(0), &[0, 1]);
        assert!(labels.classes().is_err());
    }

    #[test]
    fn missing_label_is_an_error() {
        let g = parse("a b").unwrap();
        assert!(load_labels("a x\n".as_bytes(), &g).is_err());
    }
}
