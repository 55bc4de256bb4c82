//! ISOMAP baseline on raw pixel vectors: neighborhood graph, all-pairs
//! shortest paths, classical MDS.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::embedding::{classical_mds, Embedding};
use crate::error::{Error, Result};
use crate::transport::SquaredDistanceMatrix;

/// How neighbors are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphRule {
    /// Connect every pair at Euclidean distance `<= eps`.
    Epsilon(f64),
    /// Connect each node to its `k` nearest neighbors, symmetrized by union.
    Knn(usize),
}

/// Undirected weighted proximity graph. Edges are stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub rule: GraphRule,
}

impl NeighborGraph {
    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < members.len() {
                let u = members[head];
                head += 1;
                for &(v, _) in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = id;
                        members.push(v);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    /// One `i j weight` line per edge.
    pub fn to_edge_list(&self) -> String {
        self.edges.iter().map(|(i, j, w)| format!("{i} {j} {w:.16e}\n")).collect()
    }

    pub fn from_edge_list(n: usize, rule: GraphRule, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse_err = || Error::Parse(format!("edge line {line:?}"));
            if parts.len() != 3 {
                return Err(parse_err());
            }
            let i: usize = parts[0].parse().map_err(|_| parse_err())?;
            let j: usize = parts[1].parse().map_err(|_| parse_err())?;
            let w: f64 = parts[2].parse().map_err(|_| parse_err())?;
            if i >= n || j >= n || i == j {
                return Err(parse_err());
            }
            edges.push((i.min(j), i.max(j), w));
        }
        Ok(Self { n, edges, rule })
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Builds the ε-neighborhood or symmetrized kNN graph on `vectors`.
pub fn build_graph(vectors: &[Vec<f64>], rule: GraphRule) -> Result<NeighborGraph> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 vectors, got {n}")));
    }
    let dim = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
    }
    match rule {
        GraphRule::Epsilon(eps) if !(eps > 0.0) => {
            return Err(Error::UnsupportedInstance(format!("epsilon {eps} must be positive")))
        }
        GraphRule::Knn(k) if k == 0 || k >= n => {
            return Err(Error::UnsupportedInstance(format!("k = {k} must satisfy 1 <= k < {n}")))
        }
        _ => {}
    }

    let dist: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (0..n).map(|j| euclidean(&vectors[i], &vectors[j])).collect()).collect();

    let mut edges = Vec::new();
    match rule {
        GraphRule::Epsilon(eps) => {
            for i in 0..n {
                for j in i + 1..n {
                    if dist[i][j] <= eps {
                        edges.push((i, j, dist[i][j]));
                    }
                }
            }
        }
        GraphRule::Knn(k) => {
            let mut linked = vec![false; n * n];
            for i in 0..n {
                let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]).then(a.cmp(&b)));
                for &j in &others[..k] {
                    linked[i.min(j) * n + i.max(j)] = true;
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    if linked[i * n + j] {
                        edges.push((i, j, dist[i][j]));
                    }
                }
            }
        }
    }
    Ok(NeighborGraph { n, edges, rule })
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry { dist: 0.0, node: source });
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let candidate = d + w;
            if candidate < dist[next] {
                dist[next] = candidate;
                heap.push(Entry { dist: candidate, node: next });
            }
        }
    }
    dist
}

/// Squared shortest-path distances. Fails if the graph is disconnected.
pub fn geodesic_squared_distances(g: &NeighborGraph) -> Result<SquaredDistanceMatrix> {
    let comps = g.components();
    if comps.len() > 1 {
        return Err(Error::DisconnectedGraph { sizes: comps.iter().map(Vec::len).collect() });
    }
    squared_geodesics(g)
}

/// Largest connected component of a possibly disconnected graph.
#[derive(Debug, Clone)]
pub struct ComponentRestriction {
    pub distances: SquaredDistanceMatrix,
    /// Original indices of the rows of `distances`.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Squared geodesics restricted to the largest component (ties go to the
/// component containing the smallest index).
pub fn geodesic_squared_distances_largest(g: &NeighborGraph) -> Result<ComponentRestriction> {
    let comps = g.components();
    let largest = comps
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .map(|(k, _)| k)
        .expect("graph has nodes");
    let full = squared_geodesics(g)?;
    let kept = comps[largest].clone();
    let mut in_kept = vec![false; g.n];
    for &k in &kept {
        in_kept[k] = true;
    }
    let dropped = (0..g.n).filter(|&k| !in_kept[k]).collect();
    Ok(ComponentRestriction { distances: full.submatrix(&kept), kept, dropped })
}

fn squared_geodesics(g: &NeighborGraph) -> Result<SquaredDistanceMatrix> {
    let adj = g.adjacency();
    let rows: Vec<Vec<f64>> = (0..g.n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let n = g.n;
    // Shortest paths are symmetric in exact arithmetic; take the upper
    // triangle so the matrix is exactly symmetric. Unreachable pairs are
    // zeroed out here and only ever survive inside a component restriction.
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for (i, row) in rows.iter().enumerate() {
        for d in &row[i + 1..] {
            upper.push(if d.is_finite() { d * d } else { 0.0 });
        }
    }
    SquaredDistanceMatrix::from_upper(n, &upper)
}

/// ISOMAP embedding of `vectors` into `R^d`.
pub fn isomap(vectors: &[Vec<f64>], rule: GraphRule, d: usize) -> Result<Embedding> {
    let graph = build_graph(vectors, rule)?;
    classical_mds(&geodesic_squared_distances(&graph)?, d)
}

/// ISOMAP on the largest connected component; returns the embedding and
/// the original indices of its rows.
pub fn isomap_largest_component(vectors: &[Vec<f64>], rule: GraphRule, d: usize) -> Result<(Embedding, Vec<usize>)> {
    let graph = build_graph(vectors, rule)?;
    let restricted = geodesic_squared_distances_largest(&graph)?;
    Ok((classical_mds(&restricted.distances, d)?, restricted.kept))
}
