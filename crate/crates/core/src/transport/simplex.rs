//! Transportation network simplex for the quadratic-cost Kantorovich problem.
//!
//! The bipartite network has one node per source atom and one per target atom.
//! A basis is a spanning tree of `n1 + n2 - 1` arcs. Every non-root node stores
//! the flow on the arc to its parent, so re-hanging a subtree only touches the
//! nodes on the path being reversed plus the subtree itself.
//!
//! Pricing uses a block search over a candidate arc list. Small problems use
//! every arc; large ones start from the initial tree and grow the list with
//! full pricing passes until a pass finds no arc with negative reduced cost.
//! The leaving arc follows the strongly feasible tree rule, and after a long
//! streak of degenerate pivots the solver falls back to Bland's rule (lowest
//! index in and out) until the objective moves again.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

const NO_PARENT: usize = usize::MAX;

/// Relative tolerance on reduced costs, scaled by the squared diameter of the
/// joint support.
const REDUCED_COST_TOLERANCE: f64 = 1e-12;

/// Problems with at most this many arcs are priced over the full arc set;
/// larger ones run on a candidate list grown by full pricing passes.
const FULL_PRICING_ARCS: usize = 1 << 16;

/// Violated arcs admitted per source in one full pricing pass.
const ARCS_PER_SOURCE: usize = 4;

/// Violated arcs admitted per source in one certification round.
const CERTIFY_ARCS_PER_SOURCE: usize = 16;

/// Nearest targets of each matched target seeded as candidate arcs before
/// certification.
const SEED_NEIGHBORS: usize = 8;

/// Shortest-path rounds spent trying to certify the initial flow.
const CERTIFY_ROUNDS: usize = 30;

/// Degenerate pivots (per node) tolerated before falling back to Bland's rule.
const BLAND_STREAK_FACTOR: usize = 10;

/// One positive entry of a coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// Optimal coupling between two discrete measures together with the dual
/// potentials certifying its optimality.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Strictly positive entries, sorted by `(source, target)`.
    pub entries: Vec<PlanEntry>,
    /// `sum pi_ij |x_i - y_j|^2`.
    pub cost: f64,
    /// `phi_i` with `phi_i + psi_j <= |x_i - y_j|^2` (up to solver tolerance).
    pub source_potentials: Vec<f64>,
    pub target_potentials: Vec<f64>,
    pub pivots: usize,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.rows];
        for e in &self.entries {
            sums[e.source] += e.mass;
        }
        sums
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for e in &self.entries {
            sums[e.target] += e.mass;
        }
        sums
    }

    /// `sum phi_i mu_i + sum psi_j nu_j`.
    pub fn dual_objective(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let a: f64 = self.source_potentials.iter().zip(mu.weights()).map(|(p, w)| p * w).sum();
        let b: f64 = self.target_potentials.iter().zip(nu.weights()).map(|(p, w)| p * w).sum();
        a + b
    }

    /// Largest violation of `phi_i + psi_j <= c_ij` over all pairs.
    pub fn max_dual_violation(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let mut worst = 0.0f64;
        for (i, phi) in self.source_potentials.iter().enumerate() {
            for (j, psi) in self.target_potentials.iter().enumerate() {
                let c = squared_distance(mu.location(i), nu.location(j));
                worst = worst.max(phi + psi - c);
            }
        }
        worst
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Solves the discrete Kantorovich problem with cost `|x - y|^2` exactly.
pub fn solve_w2(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportPlan> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let (src_order, src) = sorted_side(mu);
    let (dst_order, dst) = sorted_side(nu);
    let mut net = Network::new(mu.dim(), &src, &dst);
    net.run()?;

    let n1 = mu.len();
    let mut source_potentials = vec![0.0; n1];
    let mut target_potentials = vec![0.0; nu.len()];
    for (k, &orig) in src_order.iter().enumerate() {
        source_potentials[orig] = net.pot[k];
    }
    for (k, &orig) in dst_order.iter().enumerate() {
        target_potentials[orig] = net.pot[n1 + k];
    }

    let mut entries = Vec::with_capacity(net.n1 + net.n2 - 1);
    for node in 0..net.nodes() {
        if net.parent[node] == NO_PARENT || net.flow[node] <= 0.0 {
            continue;
        }
        let (i, j) = net.arc_of(node);
        entries.push(PlanEntry { source: src_order[i], target: dst_order[j], mass: net.flow[node] });
    }
    entries.sort_by_key(|e| (e.source, e.target));
    let cost = entries
        .iter()
        .map(|e| e.mass * squared_distance(mu.location(e.source), nu.location(e.target)))
        .sum::<f64>()
        .max(0.0);

    Ok(TransportPlan {
        rows: n1,
        cols: nu.len(),
        entries,
        cost,
        source_potentials,
        target_potentials,
        pivots: net.pivots,
    })
}

/// Atoms in lexicographic coordinate order. The northwest-corner start on
/// lexicographically sorted sides is already optimal whenever the target is a
/// coordinate-wise increasing affine image of the source.
fn sorted_side(mu: &DiscreteMeasure) -> (Vec<usize>, Side) {
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| {
        mu.location(a)
            .iter()
            .zip(mu.location(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut coords = Vec::with_capacity(mu.locations().len());
    let mut mass = Vec::with_capacity(mu.len());
    for &k in &order {
        coords.extend_from_slice(mu.location(k));
        mass.push(mu.weights()[k]);
    }
    (order, Side { coords, mass })
}

struct Side {
    coords: Vec<f64>,
    mass: Vec<f64>,
}

struct Network<'a> {
    dim: usize,
    n1: usize,
    n2: usize,
    src: &'a Side,
    dst: &'a Side,
    parent: Vec<usize>,
    /// Flow on the arc between a node and its parent.
    flow: Vec<f64>,
    depth: Vec<usize>,
    pot: Vec<f64>,
    adj: Vec<Vec<usize>>,
    eps: f64,
    /// Arcs the restricted simplex prices, and a bitset over all arcs
    /// marking membership.
    candidates: Vec<(u32, u32)>,
    candidate_bits: Vec<u64>,
    next_arc: usize,
    block: usize,
    pivots: usize,
}

impl<'a> Network<'a> {
    fn new(dim: usize, src: &'a Side, dst: &'a Side) -> Self {
        let n1 = src.mass.len();
        let n2 = dst.mass.len();
        let n = n1 + n2;
        let total = n1 * n2;
        let block = ((total as f64).sqrt() as usize).max(32).min(total);
        let mut net = Self {
            dim,
            n1,
            n2,
            src,
            dst,
            parent: vec![NO_PARENT; n],
            flow: vec![0.0; n],
            depth: vec![0; n],
            pot: vec![0.0; n],
            adj: vec![Vec::new(); n],
            eps: REDUCED_COST_TOLERANCE * support_scale(dim, src, dst),
            candidates: Vec::new(),
            candidate_bits: if total > FULL_PRICING_ARCS { vec![0; total.div_ceil(64)] } else { Vec::new() },
            next_arc: 0,
            block,
            pivots: 0,
        };
        net.northwest_corner();
        net
    }

    fn nodes(&self) -> usize {
        self.n1 + self.n2
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        let d = self.dim;
        squared_distance(&self.src.coords[i * d..(i + 1) * d], &self.dst.coords[j * d..(j + 1) * d])
    }

    /// `(row, col)` of the tree arc joining `node` to its parent.
    #[inline]
    fn arc_of(&self, node: usize) -> (usize, usize) {
        let p = self.parent[node];
        if node < self.n1 {
            (node, p - self.n1)
        } else {
            (p, node - self.n1)
        }
    }

    #[inline]
    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        self.cost(i, j) - self.pot[i] - self.pot[self.n1 + j]
    }

    /// Staircase initial basis; degenerate zero arcs keep it a spanning tree.
    fn northwest_corner(&mut self) {
        let (n1, n2) = (self.n1, self.n2);
        let mut arcs = Vec::with_capacity(n1 + n2 - 1);
        let (mut i, mut j) = (0, 0);
        let (mut supply, mut demand) = (self.src.mass[0], self.dst.mass[0]);
        loop {
            let f = supply.min(demand).max(0.0);
            arcs.push((i, j, f));
            if i + 1 == n1 && j + 1 == n2 {
                break;
            }
            supply -= f;
            demand -= f;
            if j + 1 == n2 || (i + 1 < n1 && supply <= demand) {
                i += 1;
                supply = self.src.mass[i];
            } else {
                j += 1;
                demand = self.dst.mass[j];
            }
        }

        let mut arc_flow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.nodes()];
        for &(i, j, f) in &arcs {
            self.adj[i].push(n1 + j);
            self.adj[n1 + j].push(i);
            arc_flow[i].push((n1 + j, f));
            arc_flow[n1 + j].push((i, f));
        }
        let mut stack = vec![0usize];
        let mut seen = vec![false; self.nodes()];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(v, f) in &arc_flow[u] {
                if !seen[v] {
                    seen[v] = true;
                    self.parent[v] = u;
                    self.flow[v] = f;
                    self.depth[v] = self.depth[u] + 1;
                    let (r, c) = self.arc_of(v);
                    self.pot[v] = self.cost(r, c) - self.pot[u];
                    stack.push(v);
                }
            }
        }
    }

    fn run(&mut self) -> Result<()> {
        let total = self.n1 * self.n2;
        let limit = 1_000 + total.max(100 * self.nodes());
        if total <= FULL_PRICING_ARCS {
            self.candidates = (0..total).map(|k| ((k / self.n2) as u32, (k % self.n2) as u32)).collect();
            return self.run_restricted(limit);
        }
        for node in 0..self.nodes() {
            if self.parent[node] != NO_PARENT {
                let (i, j) = self.arc_of(node);
                self.add_candidate(i, j);
            }
        }
        if self.certify_start() {
            return Ok(());
        }
        loop {
            self.run_restricted(limit)?;
            if self.price_all_arcs(ARCS_PER_SOURCE) == 0 {
                return Ok(());
            }
        }
    }

    /// Simplex iterations over the current candidate arcs only.
    fn run_restricted(&mut self, limit: usize) -> Result<()> {
        let mut degenerate_streak = 0usize;
        loop {
            let bland = degenerate_streak > BLAND_STREAK_FACTOR * self.nodes();
            let entering = if bland { self.first_improving_arc() } else { self.block_search() };
            let Some((i, j)) = entering else {
                return Ok(());
            };
            if self.pivots >= limit {
                return Err(Error::NonConvergence { pivots: self.pivots });
            }
            let theta = self.pivot(i, j, bland);
            self.pivots += 1;
            if theta > 0.0 {
                degenerate_streak = 0;
            } else {
                degenerate_streak += 1;
            }
        }
    }

    fn add_candidate(&mut self, i: usize, j: usize) -> bool {
        let k = i * self.n2 + j;
        let (word, bit) = (k / 64, 1u64 << (k % 64));
        if self.candidate_bits[word] & bit != 0 {
            return false;
        }
        self.candidate_bits[word] |= bit;
        self.candidates.push((i as u32, j as u32));
        true
    }

    /// Scans every arc and adds, per source, the most violated ones to the
    /// candidate list. Returns the number of arcs added; zero certifies
    /// optimality over the full arc set.
    ///
    /// Reduced costs are screened in the expanded form
    /// `(|x_i|^2 - u_i) + (|y_j|^2 - v_j) - 2 x_i . y_j` over per-axis target
    /// arrays, which vectorizes; survivors are re-checked with the direct cost.
    fn price_all_arcs(&mut self, per_source: usize) -> usize {
        let (d, n1, n2) = (self.dim, self.n1, self.n2);
        let axes: Vec<Vec<f64>> = (0..d).map(|k| (0..n2).map(|j| self.dst.coords[j * d + k]).collect()).collect();
        let offsets: Vec<f64> = (0..n2)
            .map(|j| {
                let y = &self.dst.coords[j * d..(j + 1) * d];
                y.iter().map(|t| t * t).sum::<f64>() - self.pot[n1 + j]
            })
            .collect();
        let screen = -0.5 * self.eps;
        let mut scratch = vec![0.0; n2];
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(per_source + 1);
        let mut added = 0;
        for i in 0..n1 {
            let x = &self.src.coords[i * d..(i + 1) * d];
            let a = x.iter().map(|t| t * t).sum::<f64>() - self.pot[i];
            let row_min = if d == 2 {
                planar_min(&offsets, &axes[0], &axes[1], 2.0 * x[0], 2.0 * x[1])
            } else {
                scratch.copy_from_slice(&offsets);
                for (axis, xk) in axes.iter().zip(x) {
                    let two_x = 2.0 * xk;
                    for (s, y) in scratch.iter_mut().zip(axis) {
                        *s -= two_x * y;
                    }
                }
                lane_min(&scratch)
            };
            if row_min + a >= screen {
                continue;
            }
            if d == 2 {
                for j in 0..n2 {
                    scratch[j] = offsets[j] - 2.0 * x[0] * axes[0][j] - 2.0 * x[1] * axes[1][j];
                }
            }
            best.clear();
            for (j, s) in scratch.iter().enumerate() {
                if s + a >= screen {
                    continue;
                }
                let rc = self.reduced_cost(i, j);
                if rc < -self.eps && (best.len() < per_source || rc < best[best.len() - 1].0) {
                    let pos = best.partition_point(|&(b, _)| b <= rc);
                    best.insert(pos, (rc, j));
                    best.truncate(per_source);
                }
            }
            for k in 0..best.len() {
                if self.add_candidate(i, best[k].1) {
                    added += 1;
                }
            }
        }
        self.block = ((self.candidates.len() as f64).sqrt() as usize).max(32).min(self.candidates.len());
        added
    }

    /// Tries to prove the initial flow optimal without pivoting. Potentials
    /// come from shortest paths in the graph whose arcs encode
    /// `u_i + v_j <= c_ij` on candidate arcs and equality on arcs carrying
    /// flow. A full pricing pass then either certifies them or contributes
    /// violated arcs for the next round. On failure the tree potentials are
    /// restored and the candidates found along the way are kept.
    fn certify_start(&mut self) -> bool {
        let nodes = self.nodes();
        let neighbors = self.nearest_targets(SEED_NEIGHBORS);
        for node in 0..nodes {
            if self.parent[node] != NO_PARENT && self.flow[node] > 0.0 {
                let (i, j) = self.arc_of(node);
                for &t in &neighbors[j] {
                    self.add_candidate(i, t);
                }
            }
        }
        let mut dist = vec![0.0; nodes];
        let mut dirty: Vec<usize> = (0..nodes).collect();
        let mut certified = false;
        for _ in 0..CERTIFY_ROUNDS {
            if !self.relax_potentials(&mut dist, dirty) {
                break;
            }
            for r in 0..self.n1 {
                self.pot[r] = dist[r];
            }
            for c in self.n1..nodes {
                self.pot[c] = -dist[c];
            }
            let before = self.candidates.len();
            if self.price_all_arcs(CERTIFY_ARCS_PER_SOURCE) == 0 {
                certified = true;
                break;
            }
            dirty = self.candidates[before..].iter().map(|&(_, j)| self.n1 + j as usize).collect();
            dirty.sort_unstable();
            dirty.dedup();
        }
        if !certified {
            self.pot[0] = 0.0;
            for &v in &self.adj[0].clone() {
                self.refresh_subtree(v);
            }
        }
        certified
    }

    /// Queue-based Bellman-Ford on the dual constraint graph, starting from
    /// the labels in `dist` with `dirty` queued. Row node `i` carries `u_i`,
    /// column node `j` carries `-v_j`; every label is at most zero (a virtual
    /// source reaches each node with a zero arc). Returns false when a
    /// negative cycle shows up, i.e. the current flow is not optimal on the
    /// candidate arcs.
    fn relax_potentials(&self, dist: &mut [f64], dirty: Vec<usize>) -> bool {
        let nodes = self.nodes();
        let mut out: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nodes];
        for &(i, j) in &self.candidates {
            out[self.n1 + j as usize].push((i, self.cost(i as usize, j as usize)));
        }
        for node in 0..nodes {
            if self.parent[node] != NO_PARENT && self.flow[node] > 0.0 {
                let (i, j) = self.arc_of(node);
                out[i].push(((self.n1 + j) as u32, -self.cost(i, j)));
            }
        }
        let mut queued = vec![false; nodes];
        for &u in &dirty {
            queued[u] = true;
        }
        let mut visits = vec![0usize; nodes];
        let mut queue: std::collections::VecDeque<usize> = dirty.into();
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            visits[u] += 1;
            if visits[u] > nodes {
                return false;
            }
            for &(v, w) in &out[u] {
                let v = v as usize;
                let candidate = dist[u] + w;
                if candidate < dist[v] - self.eps {
                    dist[v] = candidate;
                    if !queued[v] {
                        queued[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        true
    }

    /// The `k` nearest targets of every target (itself included), found by a
    /// sweep along the first coordinate, by which the side is sorted.
    fn nearest_targets(&self, k: usize) -> Vec<Vec<usize>> {
        let (d, n2) = (self.dim, self.n2);
        let y = |j: usize| &self.dst.coords[j * d..(j + 1) * d];
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        (0..n2)
            .map(|j| {
                best.clear();
                let yj = y(j);
                let consider = |t: usize, best: &mut Vec<(f64, usize)>| {
                    let dt = squared_distance(yj, y(t));
                    if best.len() < k || dt < best[best.len() - 1].0 {
                        let pos = best.partition_point(|&(b, _)| b <= dt);
                        best.insert(pos, (dt, t));
                        best.truncate(k);
                    }
                };
                let bound = |t: usize, best: &Vec<(f64, usize)>| {
                    let gap = y(t)[0] - yj[0];
                    best.len() == k && gap * gap > best[k - 1].0
                };
                for t in j..n2 {
                    if bound(t, &best) {
                        break;
                    }
                    consider(t, &mut best);
                }
                for t in (0..j).rev() {
                    if bound(t, &best) {
                        break;
                    }
                    consider(t, &mut best);
                }
                best.iter().map(|&(_, t)| t).collect()
            })
            .collect()
    }

    fn block_search(&mut self) -> Option<(usize, usize)> {
        let total = self.candidates.len();
        let mut best: Option<(f64, usize, usize)> = None;
        let mut checked = 0;
        let mut k = self.next_arc % total;
        while checked < total {
            let end = (checked + self.block).min(total);
            while checked < end {
                let (i, j) = self.candidates[k];
                let (i, j) = (i as usize, j as usize);
                let rc = self.reduced_cost(i, j);
                if rc < -self.eps {
                    let idx = i * self.n2 + j;
                    let better = match best {
                        None => true,
                        Some((b, _, b_idx)) => rc < b || (rc == b && idx < b_idx),
                    };
                    if better {
                        best = Some((rc, k, idx));
                    }
                }
                k += 1;
                if k == total {
                    k = 0;
                }
                checked += 1;
            }
            if best.is_some() {
                break;
            }
        }
        self.next_arc = k;
        best.map(|(_, _, idx)| (idx / self.n2, idx % self.n2))
    }

    /// Lowest-index candidate arc with negative reduced cost.
    fn first_improving_arc(&self) -> Option<(usize, usize)> {
        self.candidates
            .iter()
            .map(|&(i, j)| (i as usize, j as usize))
            .filter(|&(i, j)| self.reduced_cost(i, j) < -self.eps)
            .min_by_key(|&(i, j)| i * self.n2 + j)
    }

    /// Pushes flow around the cycle closed by arc `(i, j)` and updates the
    /// tree. Returns the step length.
    fn pivot(&mut self, i: usize, j: usize, bland: bool) -> f64 {
        let row = i;
        let col = self.n1 + j;

        // Path nodes (each standing for the arc to its parent) from both ends
        // up to the common ancestor.
        let mut row_side = Vec::new();
        let mut col_side = Vec::new();
        let (mut a, mut b) = (row, col);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                row_side.push(a);
                a = self.parent[a];
            } else {
                col_side.push(b);
                b = self.parent[b];
            }
        }

        // Flow runs row -> col on the entering arc and back to the row
        // through the tree. Going up from the column end, arcs above columns
        // are traversed col -> row; coming down to the row end, arcs above
        // rows are traversed col -> row. Those arcs lose flow.
        let n1 = self.n1;
        let decreasing = |node: usize, on_row_side: bool| (node < n1) == on_row_side;

        let mut theta = f64::INFINITY;
        for (nodes, on_row_side) in [(&row_side, true), (&col_side, false)] {
            for &node in nodes.iter() {
                if decreasing(node, on_row_side) {
                    theta = theta.min(self.flow[node]);
                }
            }
        }
        let leave = if bland {
            // Lowest arc index among the blocking arcs.
            row_side
                .iter()
                .map(|&v| (v, true))
                .chain(col_side.iter().map(|&v| (v, false)))
                .filter(|&(v, side)| decreasing(v, side) && self.flow[v] == theta)
                .min_by_key(|&(v, _)| {
                    let (r, c) = self.arc_of(v);
                    r * self.n2 + c
                })
        } else {
            // Last blocking arc met when walking the cycle from the apex in
            // the direction of the entering arc: apex -> row, row -> col,
            // col -> apex. This keeps zero-flow arcs pointing at the root.
            col_side
                .iter()
                .rev()
                .find(|&&v| decreasing(v, false) && self.flow[v] == theta)
                .map(|&v| (v, false))
                .or_else(|| {
                    row_side.iter().find(|&&v| decreasing(v, true) && self.flow[v] == theta).map(|&v| (v, true))
                })
        };
        let (leave_node, leave_on_row_side) = leave.expect("every cycle has a reverse arc");

        if theta > 0.0 {
            for (nodes, on_row_side) in [(&row_side, true), (&col_side, false)] {
                for &node in nodes.iter() {
                    if decreasing(node, on_row_side) {
                        self.flow[node] -= theta;
                    } else {
                        self.flow[node] += theta;
                    }
                }
            }
        }

        // Detach the subtree under the leaving arc and hang it from the
        // entering arc, reversing parent links along the way.
        let (inner, outer) = if leave_on_row_side { (row, col) } else { (col, row) };
        let old_parent = self.parent[leave_node];
        remove_neighbor(&mut self.adj[leave_node], old_parent);
        remove_neighbor(&mut self.adj[old_parent], leave_node);
        self.adj[row].push(col);
        self.adj[col].push(row);

        let mut prev = outer;
        let mut prev_flow = theta;
        let mut node = inner;
        loop {
            let next = self.parent[node];
            let next_flow = self.flow[node];
            self.parent[node] = prev;
            self.flow[node] = prev_flow;
            if node == leave_node {
                break;
            }
            prev = node;
            prev_flow = next_flow;
            node = next;
        }

        self.refresh_subtree(inner);
        theta
    }

    /// Recomputes depth and potentials below (and including) `top`.
    fn refresh_subtree(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(u) = stack.pop() {
            let p = self.parent[u];
            self.depth[u] = self.depth[p] + 1;
            let (r, c) = self.arc_of(u);
            self.pot[u] = self.cost(r, c) - self.pot[p];
            for &v in &self.adj[u] {
                if v != p {
                    stack.push(v);
                }
            }
        }
    }
}

/// `min_j offsets[j] - p * xs[j] - q * ys[j]`, accumulated in lanes.
fn planar_min(offsets: &[f64], xs: &[f64], ys: &[f64], p: f64, q: f64) -> f64 {
    let mut lanes = [f64::INFINITY; 8];
    let n = offsets.len() / 8 * 8;
    for ((o, x), y) in offsets[..n].chunks_exact(8).zip(xs[..n].chunks_exact(8)).zip(ys[..n].chunks_exact(8)) {
        for k in 0..8 {
            let s = o[k] - p * x[k] - q * y[k];
            lanes[k] = if s < lanes[k] { s } else { lanes[k] };
        }
    }
    let mut m = f64::INFINITY;
    for j in n..offsets.len() {
        let s = offsets[j] - p * xs[j] - q * ys[j];
        m = if s < m { s } else { m };
    }
    for l in lanes {
        m = if l < m { l } else { m };
    }
    m
}

/// Minimum of a slice, accumulated in independent lanes so it vectorizes.
fn lane_min(values: &[f64]) -> f64 {
    let mut lanes = [f64::INFINITY; 8];
    let chunks = values.chunks_exact(8);
    let tail = chunks.remainder();
    for chunk in chunks {
        for (l, v) in lanes.iter_mut().zip(chunk) {
            *l = if *v < *l { *v } else { *l };
        }
    }
    let mut m = tail.iter().fold(f64::INFINITY, |m, v| if *v < m { *v } else { m });
    for l in lanes {
        m = if l < m { l } else { m };
    }
    m
}

fn remove_neighbor(list: &mut Vec<usize>, node: usize) {
    let pos = list.iter().position(|&v| v == node).expect("tree arc present in adjacency");
    list.swap_remove(pos);
}

/// Squared diameter of the bounding box of both supports.
fn support_scale(dim: usize, src: &Side, dst: &Side) -> f64 {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for x in src.coords.chunks_exact(dim).chain(dst.coords.chunks_exact(dim)) {
        for k in 0..dim {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| (h - l) * (h - l)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_plan(plan: &TransportPlan, mu: &DiscreteMeasure, nu: &DiscreteMeasure) {
        for (s, w) in plan.row_sums().iter().zip(mu.weights()) {
            assert!((s - w).abs() <= 1e-9, "row sum {s} vs {w}");
        }
        for (s, w) in plan.col_sums().iter().zip(nu.weights()) {
            assert!((s - w).abs() <= 1e-9, "col sum {s} vs {w}");
        }
        assert!(plan.entries.len() <= mu.len() + nu.len() - 1);
        assert!(plan.entries.iter().all(|e| e.mass > 0.0));
        assert!(plan.max_dual_violation(mu, nu) <= 1e-8);
        let dual = plan.dual_objective(mu, nu);
        assert!((dual - plan.cost).abs() <= 1e-7 * plan.cost.max(1e-12) + 1e-12);
    }

    #[test]
    fn single_atoms() {
        let mu = DiscreteMeasure::dirac(&[0.0, 0.0]);
        let nu = DiscreteMeasure::dirac(&[3.0, 4.0]);
        let plan = solve_w2(&mu, &nu).unwrap();
        assert_eq!(plan.cost, 25.0);
        check_plan(&plan, &mu, &nu);
    }

    #[test]
    fn two_point_translation() {
        let mu = DiscreteMeasure::uniform(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let nu = mu.translate(&[2.0, 3.0]).unwrap();
        let plan = solve_w2(&mu, &nu).unwrap();
        assert!((plan.cost - 13.0).abs() < 1e-12);
        check_plan(&plan, &mu, &nu);
    }

    #[test]
    fn crossing_assignment_is_repaired() {
        // Lexicographic order pairs these badly; the solver must pivot.
        let mu = DiscreteMeasure::uniform(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(&[vec![-1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let plan = solve_w2(&mu, &nu).unwrap();
        assert!((plan.cost - 1.0).abs() < 1e-12);
        check_plan(&plan, &mu, &nu);
    }

    #[test]
    fn unbalanced_counts() {
        let mu = DiscreteMeasure::from_points(&[vec![0.0], vec![1.0], vec![5.0]], vec![0.2, 0.3, 0.5]).unwrap();
        let nu = DiscreteMeasure::from_points(&[vec![2.0], vec![4.0]], vec![0.6, 0.4]).unwrap();
        let plan = solve_w2(&mu, &nu).unwrap();
        // Monotone 1-D coupling: 0->2 (0.2), 1->2 (0.3), 5->2 (0.1), 5->4 (0.4).
        let expected = 0.2 * 4.0 + 0.3 * 1.0 + 0.1 * 9.0 + 0.4 * 1.0;
        assert!((plan.cost - expected).abs() < 1e-12);
        check_plan(&plan, &mu, &nu);
    }

    #[test]
    fn dimension_mismatch() {
        let mu = DiscreteMeasure::dirac(&[0.0]);
        let nu = DiscreteMeasure::dirac(&[0.0, 1.0]);
        assert!(matches!(solve_w2(&mu, &nu), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let mu = DiscreteMeasure::from_points(&[vec![0.3, 0.1], vec![2.0, -1.0], vec![0.0, 4.0]], vec![1.0, 2.0, 3.0])
            .unwrap();
        let plan = solve_w2(&mu, &mu).unwrap();
        assert_eq!(plan.cost, 0.0);
        check_plan(&plan, &mu, &mu);
    }
}
