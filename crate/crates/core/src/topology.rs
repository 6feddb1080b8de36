//! Seed-post lattices and random device multigraphs.
//!
//! Wires are placed by picking a start post, drawing a normalized length
//! from a beta distribution and snapping to the post whose normalized
//! distance from the start is closest to that length.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::device::{sample_unchecked, DeviceParams, DeviceState, ParamRanges};
use crate::error::{Error, Result};

/// Distances closer than this are treated as ties when snapping.
const TIE_TOLERANCE: f64 = 1e-12;

/// Square lattice of seed posts.
///
/// Interface posts sit on every `(subdivision + 1)`-th lattice position;
/// the rest are supporting posts. Nodes are numbered row-major from the
/// upper-left corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub interface_dim: usize,
    pub subdivision: usize,
    pub side: usize,
    pub node_positions: Vec<[f64; 2]>,
    pub interface_flags: Vec<bool>,
}

impl Grid {
    pub fn node_count(&self) -> usize {
        self.node_positions.len()
    }

    /// Grid node indices of interface posts, row-major.
    pub fn interface_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.interface_flags[i]).collect()
    }

    pub fn row_col(&self, node: usize) -> (usize, usize) {
        (node / self.side, node % self.side)
    }

    pub fn node_at(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    /// Upper-left interface post.
    pub fn upper_left(&self) -> usize {
        0
    }

    /// Lower-right interface post.
    pub fn lower_right(&self) -> usize {
        self.node_count() - 1
    }

    fn lattice_neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = self.row_col(node);
        let side = self.side;
        [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)]
            .into_iter()
            .filter(move |&(rr, cc)| rr < side && cc < side)
            .map(move |(rr, cc)| rr * side + cc)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = build_grid(self.interface_dim, self.subdivision)?;
        if *self != expected {
            return Err(Error::param("grid descriptor is inconsistent with its dimensions"));
        }
        Ok(())
    }
}

/// Build the lattice for `interface_dim` x `interface_dim` interface posts
/// with `subdivision` supporting posts between neighbouring interface posts.
pub fn build_grid(interface_dim: usize, subdivision: usize) -> Result<Grid> {
    if interface_dim < 2 {
        return Err(Error::param(format!("interface_dim must be >= 2, got {interface_dim}")));
    }
    let side = interface_dim + (interface_dim - 1) * subdivision;
    let pitch = subdivision + 1;
    let mut node_positions = Vec::with_capacity(side * side);
    let mut interface_flags = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            node_positions.push([col as f64, row as f64]);
            interface_flags.push(row % pitch == 0 && col % pitch == 0);
        }
    }
    Ok(Grid { interface_dim, subdivision, side, node_positions, interface_flags })
}

/// Dense symmetric table of normalized Euclidean distances.
#[derive(Debug, Clone)]
pub struct DistanceMap {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMap {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

pub fn distance_map(grid: &Grid) -> DistanceMap {
    let pos = &grid.node_positions;
    let n = pos.len();
    let mut d = vec![0.0; n * n];
    let mut max = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (pos[i][0] - pos[j][0]).hypot(pos[i][1] - pos[j][1]);
            d[i * n + j] = dist;
            d[j * n + i] = dist;
            max = max.max(dist);
        }
    }
    if max > 0.0 {
        for v in &mut d {
            *v /= max;
        }
    }
    DistanceMap { n, d }
}

/// Beta-distribution shape controlling wire lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaShape {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShape {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let s = Self { alpha, beta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::param(format!(
                "beta shape requires alpha > 0 and beta > 0, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn skewness(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        2.0 * (b - a) * (a + b + 1.0).sqrt() / ((a + b + 2.0) * (a * b).sqrt())
    }

    fn distribution(&self) -> Result<Beta<f64>> {
        self.validate()?;
        Beta::new(self.alpha, self.beta).map_err(|e| Error::param(format!("beta shape: {e}")))
    }
}

/// One normalized wire length drawn from `shape`.
pub fn beta_sample<R: Rng + ?Sized>(shape: &BetaShape, rng: &mut R) -> Result<f64> {
    Ok(shape.distribution()?.sample(rng))
}

/// A resistive switch between two grid posts. Orientation `a -> b` defines
/// the sign of the branch voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub params: DeviceParams,
    pub state: DeviceState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkTopology {
    pub grid: Grid,
    pub edges: Vec<Edge>,
    pub input_node: usize,
    pub ground_node: usize,
    pub seed: u64,
    /// Edges appended by [`ensure_connected`].
    #[serde(default)]
    pub added_edges: usize,
}

impl NetworkTopology {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let n = self.grid.node_count();
        for (k, e) in self.edges.iter().enumerate() {
            if e.a >= n || e.b >= n {
                return Err(Error::param(format!("edge {k} endpoint out of range ({}, {})", e.a, e.b)));
            }
            if e.a == e.b {
                return Err(Error::param(format!("edge {k} is a self-loop on node {}", e.a)));
            }
            e.params.validate().map_err(|err| Error::param(format!("edge {k}: {err}")))?;
            if !(0.0..=1.0).contains(&e.state.w_prime) {
                return Err(Error::param(format!("edge {k}: w_prime out of [0, 1]")));
            }
        }
        check_terminals(&self.grid, self.input_node, self.ground_node)?;
        if self.added_edges > self.edges.len() {
            return Err(Error::param("added_edges exceeds edge count"));
        }
        Ok(())
    }

    /// True if some chain of devices joins input and ground.
    pub fn is_connected(&self) -> bool {
        let comp = components(self.grid.node_count(), &self.edges);
        comp[self.input_node] == comp[self.ground_node]
    }

    /// Mean normalized length of the generated (non-augmented) edges.
    pub fn mean_edge_length(&self) -> f64 {
        let dm = distance_map(&self.grid);
        let generated = &self.edges[..self.edges.len() - self.added_edges];
        if generated.is_empty() {
            return 0.0;
        }
        generated.iter().map(|e| dm.get(e.a, e.b)).sum::<f64>() / generated.len() as f64
    }
}

fn check_terminals(grid: &Grid, input: usize, ground: usize) -> Result<()> {
    let n = grid.node_count();
    if input >= n || ground >= n {
        return Err(Error::param(format!("terminal index out of range: input {input}, ground {ground}")));
    }
    if input == ground {
        return Err(Error::param("input and ground must be distinct nodes"));
    }
    if !grid.interface_flags[input] || !grid.interface_flags[ground] {
        return Err(Error::param("input and ground must be interface nodes"));
    }
    Ok(())
}

/// Connected-component label per node (labels are the smallest member index).
pub(crate) fn components(n: usize, edges: &[Edge]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in edges {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Everything needed to generate one network besides the grid and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSpec {
    pub shape: BetaShape,
    /// Average devices per grid node.
    pub xi: usize,
    /// Overrides `node_count * xi` when set.
    #[serde(default)]
    pub edge_count: Option<usize>,
    /// Defaults to the upper-left interface post.
    #[serde(default)]
    pub input_node: Option<usize>,
    /// Defaults to the lower-right interface post.
    #[serde(default)]
    pub ground_node: Option<usize>,
    #[serde(default)]
    pub ranges: ParamRanges,
}

impl GenerationSpec {
    pub fn new(shape: BetaShape, xi: usize) -> Self {
        Self { shape, xi, edge_count: None, input_node: None, ground_node: None, ranges: ParamRanges::default() }
    }

    pub fn terminals(&self, grid: &Grid) -> (usize, usize) {
        (self.input_node.unwrap_or(grid.upper_left()), self.ground_node.unwrap_or(grid.lower_right()))
    }

    pub fn target_edges(&self, grid: &Grid) -> usize {
        self.edge_count.unwrap_or(grid.node_count() * self.xi)
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.shape.validate()?;
        if self.xi < 1 {
            return Err(Error::param("xi must be >= 1"));
        }
        if self.edge_count == Some(0) {
            return Err(Error::param("edge_count must be >= 1"));
        }
        self.ranges.validate()?;
        let (input, ground) = self.terminals(grid);
        check_terminals(grid, input, ground)
    }
}

/// Generate a network from `seed` and connect input to ground if needed.
pub fn generate_network(grid: &Grid, spec: &GenerationSpec, seed: u64) -> Result<NetworkTopology> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topo = generate_unconnected(grid, spec, seed, &mut rng)?;
    ensure_connected(&mut topo, &spec.ranges, &mut rng)?;
    Ok(topo)
}

/// Raw wire placement without connectivity augmentation.
pub fn generate_unconnected<R: Rng + ?Sized>(
    grid: &Grid,
    spec: &GenerationSpec,
    seed: u64,
    rng: &mut R,
) -> Result<NetworkTopology> {
    spec.validate(grid)?;
    let dist = spec.shape.distribution()?;
    let dm = distance_map(grid);
    let n = grid.node_count();
    let count = spec.target_edges(grid);
    let (input_node, ground_node) = spec.terminals(grid);

    let mut edges = Vec::with_capacity(count);
    let mut ties = Vec::new();
    for _ in 0..count {
        let start = rng.random_range(0..n);
        let length = dist.sample(rng);
        let end = snap(dm.row(start), start, length, &mut ties, rng)
            .ok_or_else(|| Error::Generation(format!("no target node reachable from {start}")))?;
        let params = sample_unchecked(&spec.ranges, rng);
        edges.push(Edge { a: start, b: end, params, state: DeviceState::default() });
    }
    Ok(NetworkTopology { grid: grid.clone(), edges, input_node, ground_node, seed, added_edges: 0 })
}

/// Node (other than `start`) whose distance is nearest to `length`, ties
/// broken uniformly.
fn snap<R: Rng + ?Sized>(row: &[f64], start: usize, length: f64, ties: &mut Vec<usize>, rng: &mut R) -> Option<usize> {
    let mut best = f64::INFINITY;
    ties.clear();
    for (j, &d) in row.iter().enumerate() {
        if j == start {
            continue;
        }
        let gap = (d - length).abs();
        if gap < best - TIE_TOLERANCE {
            best = gap;
            ties.clear();
            ties.push(j);
        } else if gap <= best + TIE_TOLERANCE {
            ties.push(j);
        }
    }
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        k => Some(ties[rng.random_range(0..k)]),
    }
}

/// Join input and ground with the fewest extra lattice-neighbour devices.
///
/// Existing devices are free to traverse; each lattice step that is not
/// already covered adds one device drawn from `ranges`. Returns the number
/// of devices added (zero when already connected).
pub fn ensure_connected<R: Rng + ?Sized>(t: &mut NetworkTopology, ranges: &ParamRanges, rng: &mut R) -> Result<usize> {
    let n = t.grid.node_count();
    let comp = components(n, &t.edges);
    if comp[t.input_node] == comp[t.ground_node] {
        return Ok(0);
    }

    // 0-1 BFS: moving within a component costs nothing, a lattice step costs one device
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &c) in comp.iter().enumerate() {
        members[c].push(i);
    }
    let mut cost = vec![usize::MAX; n];
    let mut via: Vec<Option<(usize, bool)>> = vec![None; n];
    let mut queue = VecDeque::new();
    cost[t.input_node] = 0;
    queue.push_back(t.input_node);
    while let Some(u) = queue.pop_front() {
        if u == t.ground_node {
            break;
        }
        for &v in &members[comp[u]] {
            if cost[u] < cost[v] {
                cost[v] = cost[u];
                via[v] = Some((u, false));
                queue.push_front(v);
            }
        }
        for v in t.grid.lattice_neighbors(u) {
            if cost[u] + 1 < cost[v] {
                cost[v] = cost[u] + 1;
                via[v] = Some((u, true));
                queue.push_back(v);
            }
        }
    }
    if cost[t.ground_node] == usize::MAX {
        return Err(Error::Generation("ground unreachable on the lattice".into()));
    }

    let mut path = Vec::new();
    let mut node = t.ground_node;
    while let Some((prev, new_edge)) = via[node] {
        if new_edge {
            path.push((prev, node));
        }
        node = prev;
    }
    path.reverse();
    for &(a, b) in &path {
        let params = sample_unchecked(ranges, rng);
        t.edges.push(Edge { a, b, params, state: DeviceState::default() });
    }
    t.added_edges += path.len();
    log::info!("connectivity augmentation added {} device(s)", path.len());
    Ok(path.len())
}
