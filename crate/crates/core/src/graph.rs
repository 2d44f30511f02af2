//! Multi-valued lift of a control grid onto the set of stable equilibria and
//! minimum-cost planning over the lifted graph.
//!
//! The control grid ("bottom graph") is lifted fiber by fiber: every stable
//! equilibrium over a grid vertex becomes a node, and a directed edge is
//! created toward the branch-matched node over each adjacent vertex, weighted
//! by the squared-Hessian quadratic form at the source.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::equilibrium::{find_equilibria, lex_cmp, tangent_step, SolverConfig, Stability};
use crate::error::{Error, Result};
use crate::metric::{quadratic_cost, squared_hessian};
use crate::potential::PotentialSystem;

/// Control-space sampling graph: grid vertices plus undirected adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct BottomGraph {
    pub vertices: Vec<DVector<f64>>,
    /// Unordered vertex pairs, stored with `a < b`, no duplicates.
    pub edges: Vec<(usize, usize)>,
}

/// Regular grid over a box, with optional diagonal adjacency.
pub fn build_bottom_grid(
    bounds: &[(f64, f64)],
    resolution: &[usize],
    diagonals: bool,
) -> Result<BottomGraph> {
    if bounds.is_empty() || bounds.len() != resolution.len() {
        return Err(Error::InvalidBounds(alloc::format!(
            "need one (lo, hi) pair per axis ({} bounds, {} resolutions)",
            bounds.len(),
            resolution.len()
        )));
    }
    for (axis, (&(lo, hi), &res)) in bounds.iter().zip(resolution.iter()).enumerate() {
        if !lo.is_finite() || !hi.is_finite() || res == 0 {
            return Err(Error::InvalidBounds(alloc::format!(
                "axis {axis}: non-finite bounds or zero resolution"
            )));
        }
        if res >= 2 && !(hi > lo) {
            return Err(Error::InvalidBounds(alloc::format!(
                "axis {axis}: degenerate bounds [{lo}, {hi}]"
            )));
        }
    }

    let dims = bounds.len();
    let total: usize = resolution.iter().product();
    let coordinate = |axis: usize, i: usize| -> f64 {
        let (lo, hi) = bounds[axis];
        if resolution[axis] == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * (i as f64) / ((resolution[axis] - 1) as f64)
        }
    };

    let mut vertices = Vec::with_capacity(total);
    let mut index = vec![0usize; dims];
    for _ in 0..total {
        let v = DVector::from_iterator(dims, (0..dims).map(|a| coordinate(a, index[a])));
        vertices.push(v);
        for a in (0..dims).rev() {
            index[a] += 1;
            if index[a] < resolution[a] {
                break;
            }
            index[a] = 0;
        }
    }

    // Offsets in {-1, 0, 1}^dims, positive in lexicographic order so each
    // undirected edge appears once.
    let mut offsets: Vec<Vec<isize>> = Vec::new();
    let mut stack: Vec<Vec<isize>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == dims {
            if prefix.iter().any(|&o| o != 0) {
                offsets.push(prefix);
            }
            continue;
        }
        for o in [-1isize, 0, 1] {
            let mut next = prefix.clone();
            next.push(o);
            stack.push(next);
        }
    }
    offsets.retain(|o| o.iter().find(|&&v| v != 0).copied().unwrap_or(0) > 0);
    if !diagonals {
        offsets.retain(|o| o.iter().filter(|&&v| v != 0).count() == 1);
    }

    let linear_index = |idx: &[usize]| -> usize {
        idx.iter()
            .zip(resolution.iter())
            .fold(0usize, |acc, (&i, &r)| acc * r + i)
    };

    let mut edges = Vec::new();
    let mut index = vec![0usize; dims];
    for from in 0..total {
        'offsets: for offset in &offsets {
            let mut neighbor = vec![0usize; dims];
            for a in 0..dims {
                let shifted = index[a] as isize + offset[a];
                if shifted < 0 || shifted >= resolution[a] as isize {
                    continue 'offsets;
                }
                neighbor[a] = shifted as usize;
            }
            edges.push((from, linear_index(&neighbor)));
        }
        for a in (0..dims).rev() {
            index[a] += 1;
            if index[a] < resolution[a] {
                break;
            }
            index[a] = 0;
        }
    }

    Ok(BottomGraph { vertices, edges })
}

/// One stable equilibrium over a bottom vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TopNode {
    pub equilibrium: crate::equilibrium::EquilibriumPoint,
    pub bottom_index: usize,
}

/// Directed weighted connection between branch-matched nodes over adjacent
/// bottom vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TopEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    /// Fiber distance between the two endpoint states, cached for
    /// branch-switch detection.
    pub fiber_jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopGraph {
    pub nodes: Vec<TopNode>,
    pub edges: Vec<TopEdge>,
    /// Node ids over each bottom vertex.
    pub fibers: Vec<Vec<usize>>,
    /// Unstable or critical solutions, kept out of the planning graph.
    pub diagnostics: Vec<TopNode>,
    /// Branch-match threshold actually used during the lift.
    pub match_threshold: f64,
    /// Fiber jump above which a traversal counts as a branch switch.
    pub switch_threshold: f64,
}

impl TopGraph {
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push((e.to, e.weight));
        }
        adj
    }
}

/// Lift parameters on top of the equilibrium solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftConfig {
    pub solver: SolverConfig,
    /// Seeds per fiber handed to the multi-solution search.
    pub seed_count: usize,
    /// Branch-match threshold; `None` selects 3x the median within-fiber
    /// solution spacing (floor 1e-3), or no limit when every fiber carries a
    /// single solution.
    pub match_threshold: Option<f64>,
    /// Fiber jump above which an edge is flagged as a branch switch;
    /// `None` reuses the match threshold.
    pub switch_threshold: Option<f64>,
    /// Extra weight added to branch-switch edges.
    pub switch_penalty: f64,
    /// Replace the two directed weights of each adjacent pair by their mean.
    pub symmetric_weights: bool,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            seed_count: 16,
            match_threshold: None,
            switch_threshold: None,
            switch_penalty: 0.0,
            symmetric_weights: false,
        }
    }
}

/// Among the candidate nodes over one bottom vertex, picks the one closest
/// (in fiber distance) to the tangent continuation of `from`, provided that
/// distance stays within `threshold`. Ties break toward the lower fiber
/// coordinate. Critical source nodes match nothing.
pub fn match_branch(
    system: &dyn PotentialSystem,
    from: &TopNode,
    candidates: &[TopNode],
    target_u: &DVector<f64>,
    threshold: f64,
) -> Option<usize> {
    if from.equilibrium.stability == Stability::Critical {
        return None;
    }
    let delta_u = target_u - &from.equilibrium.u;
    let delta_z = tangent_step(&from.equilibrium, &delta_u).ok()?;
    let predicted = system.canonical_fiber(&from.equilibrium.z_star + delta_z);
    let mut best: Option<(usize, f64)> = None;
    for (idx, cand) in candidates.iter().enumerate() {
        let dist = system.fiber_distance(&cand.equilibrium.z_star, &predicted);
        let better = match best {
            None => true,
            Some((best_idx, best_dist)) => {
                dist < best_dist
                    || (dist == best_dist
                        && lex_cmp(
                            &cand.equilibrium.z_star,
                            &candidates[best_idx].equilibrium.z_star,
                        ) == core::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some((idx, dist));
        }
    }
    match best {
        Some((idx, dist)) if dist <= threshold => Some(idx),
        _ => None,
    }
}

/// Lifts the bottom grid: solves every fiber, keeps the stable equilibria as
/// nodes and connects branch-matched nodes over adjacent vertices with
/// squared-Hessian weights evaluated at the source.
pub fn lift(system: &dyn PotentialSystem, bottom: &BottomGraph, config: &LiftConfig) -> TopGraph {
    let seeds = system.fiber_seeds(config.seed_count);
    let mut nodes: Vec<TopNode> = Vec::new();
    let mut diagnostics: Vec<TopNode> = Vec::new();
    let mut fibers: Vec<Vec<usize>> = Vec::with_capacity(bottom.vertices.len());

    for (bottom_index, u) in bottom.vertices.iter().enumerate() {
        let mut fiber = Vec::new();
        for point in find_equilibria(system, u, &seeds, &config.solver) {
            let node = TopNode {
                equilibrium: point,
                bottom_index,
            };
            if node.equilibrium.stability == Stability::Stable {
                fiber.push(nodes.len());
                nodes.push(node);
            } else {
                diagnostics.push(node);
            }
        }
        fibers.push(fiber);
    }

    let match_threshold = config
        .match_threshold
        .unwrap_or_else(|| default_match_threshold(system, &nodes, &fibers));
    let switch_threshold = config.switch_threshold.unwrap_or(match_threshold);

    // Squared Hessian at every source node, computed once.
    let metrics: Vec<Option<nalgebra::DMatrix<f64>>> = nodes
        .iter()
        .map(|n| squared_hessian(&n.equilibrium).ok())
        .collect();

    let mut edges: Vec<TopEdge> = Vec::new();
    for &(i, j) in &bottom.edges {
        for (src_vertex, dst_vertex) in [(i, j), (j, i)] {
            let target_u = &bottom.vertices[dst_vertex];
            for &from_id in &fibers[src_vertex] {
                let Some(g2) = metrics[from_id].as_ref() else {
                    continue;
                };
                let candidates: Vec<TopNode> = fibers[dst_vertex]
                    .iter()
                    .map(|&id| nodes[id].clone())
                    .collect();
                let Some(best) =
                    match_branch(system, &nodes[from_id], &candidates, target_u, match_threshold)
                else {
                    continue;
                };
                let to_id = fibers[dst_vertex][best];
                let delta_u = target_u - &nodes[from_id].equilibrium.u;
                let fiber_jump = system.fiber_distance(
                    &nodes[to_id].equilibrium.z_star,
                    &nodes[from_id].equilibrium.z_star,
                );
                let mut weight = quadratic_cost(g2, &delta_u);
                if fiber_jump > switch_threshold {
                    weight += config.switch_penalty;
                }
                edges.push(TopEdge {
                    from: from_id,
                    to: to_id,
                    weight,
                    fiber_jump,
                });
            }
        }
    }

    if config.symmetric_weights {
        symmetrize(&mut edges);
    }

    TopGraph {
        nodes,
        edges,
        fibers,
        diagnostics,
        match_threshold,
        switch_threshold,
    }
}

/// 3x the median pairwise fiber spacing between distinct solutions over the
/// same vertex, floored at 1e-3. With single-valued fibers everywhere there
/// is no cross-branch confusion to guard against and matching is unlimited.
fn default_match_threshold(
    system: &dyn PotentialSystem,
    nodes: &[TopNode],
    fibers: &[Vec<usize>],
) -> f64 {
    let mut spacings: Vec<f64> = Vec::new();
    for fiber in fibers {
        for (pos, &a) in fiber.iter().enumerate() {
            for &b in &fiber[pos + 1..] {
                spacings.push(
                    system.fiber_distance(&nodes[a].equilibrium.z_star, &nodes[b].equilibrium.z_star),
                );
            }
        }
    }
    if spacings.is_empty() {
        return f64::INFINITY;
    }
    spacings.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let median = spacings[spacings.len() / 2];
    (3.0 * median).max(1e-3)
}

fn symmetrize(edges: &mut [TopEdge]) {
    use alloc::collections::BTreeMap;
    let mut by_pair: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in edges.iter() {
        by_pair.insert((e.from, e.to), e.weight);
    }
    for e in edges.iter_mut() {
        if let Some(&reverse) = by_pair.get(&(e.to, e.from)) {
            e.weight = 0.5 * (e.weight + reverse);
        }
    }
}

/// Planner output: ordered node ids, summed edge weights, and the indices of
/// steps whose fiber jump exceeded the switch threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBranchPath {
    pub node_ids: Vec<usize>,
    pub total_cost: f64,
    /// Index `i` marks the step from `node_ids[i]` to `node_ids[i + 1]`.
    pub switch_markers: Vec<usize>,
}

#[derive(PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        // Min-heap by cost, then node id for determinism.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over the directed nonnegative-weight lift.
pub fn shortest_path(graph: &TopGraph, start: usize, goal: usize) -> Result<MultiBranchPath> {
    let n = graph.nodes.len();
    if start >= n || goal >= n {
        return Err(Error::InvalidParameter(alloc::format!(
            "node id out of range (start {start}, goal {goal}, {n} nodes)"
        )));
    }
    if start == goal {
        return Ok(MultiBranchPath {
            node_ids: vec![start],
            total_cost: 0.0,
            switch_markers: Vec::new(),
        });
    }

    let adj = graph.adjacency();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(HeapEntry {
        cost: 0.0,
        node: start,
    });

    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if node == goal {
            break;
        }
        for &(next, weight) in &adj[node] {
            let candidate = cost + weight;
            if candidate < dist[next] {
                dist[next] = candidate;
                prev[next] = node;
                heap.push(HeapEntry {
                    cost: candidate,
                    node: next,
                });
            }
        }
    }

    if !done[goal] {
        return Err(Error::NoPath {
            reachable: done.iter().filter(|&&d| d).count(),
        });
    }

    let mut node_ids = vec![goal];
    let mut cursor = goal;
    while cursor != start {
        cursor = prev[cursor];
        node_ids.push(cursor);
    }
    node_ids.reverse();

    let jump_of = |a: usize, b: usize| -> f64 {
        graph
            .edges
            .iter()
            .find(|e| e.from == a && e.to == b)
            .map(|e| e.fiber_jump)
            .unwrap_or(0.0)
    };
    let switch_markers = node_ids
        .windows(2)
        .enumerate()
        .filter(|(_, pair)| jump_of(pair[0], pair[1]) > graph.switch_threshold)
        .map(|(i, _)| i)
        .collect();

    Ok(MultiBranchPath {
        node_ids,
        total_cost: dist[goal],
        switch_markers,
    })
}
