//! Finite metric spaces with integer graph metrics, coarse disjoint unions,
//! entourages and coarse-component diagnostics.
//!
//! Distances are exact. Inside a single graph they are hop counts; across the
//! pieces of a [`CoarseUnion`] they are assembled by gluing every piece to a
//! ray through its basepoint, so they can grow far beyond `u64` when pieces
//! are placed deep inside an annular decomposition.

use std::collections::VecDeque;

use crate::error::{input, Error, Result};

/// Exact distance between two points.
pub type Dist = u128;

/// A finite metric space with an underlying graph.
pub trait Metric {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `None` when the points lie in different connected components of a
    /// single graph space.
    fn dist(&self, x: usize, y: usize) -> Option<Dist>;

    /// Undirected edges of the underlying graph, each once with `u < v`.
    fn edges(&self) -> Vec<(usize, usize)>;

    /// Which piece (connected component, or coarse-union component) `x` is in.
    fn component_of(&self, x: usize) -> usize;

    /// All points at distance at most `r` from `x`, with their distances.
    fn within(&self, x: usize, r: Dist) -> Vec<(usize, Dist)> {
        (0..self.len())
            .filter_map(|y| self.dist(x, y).filter(|&d| d <= r).map(|d| (y, d)))
            .collect()
    }

    /// Distance from every point to the nearest point flagged in `targets`.
    fn distances_to_set(&self, targets: &[bool]) -> Vec<Option<Dist>> {
        (0..self.len())
            .map(|x| {
                (0..self.len())
                    .filter(|&y| targets[y])
                    .filter_map(|y| self.dist(x, y))
                    .min()
            })
            .collect()
    }

    /// Connected components of the graph joining points at distance `<= r`.
    fn coarse_components(&self, r: Dist) -> CoarsePartition {
        let mut uf = UnionFind::new(self.len());
        for x in 0..self.len() {
            for (y, _) in self.within(x, r) {
                uf.union(x, y);
            }
        }
        CoarsePartition::from_union_find(&mut uf)
    }
}

#[derive(Clone, Debug)]
enum DistTable {
    Narrow(Vec<u16>),
    Wide(Vec<u32>),
}

impl DistTable {
    fn get(&self, idx: usize) -> Option<u32> {
        match self {
            DistTable::Narrow(v) => match v[idx] {
                u16::MAX => None,
                d => Some(d as u32),
            },
            DistTable::Wide(v) => match v[idx] {
                u32::MAX => None,
                d => Some(d),
            },
        }
    }
}

/// A finite graph with its shortest-path hop metric.
#[derive(Clone, Debug)]
pub struct MetricSpace {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    table: DistTable,
    component_of: Vec<usize>,
    component_count: usize,
    labels: Option<Vec<String>>,
}

/// Build the hop metric of an undirected graph on `n` points.
///
/// Duplicate edges are merged. Disconnected graphs are accepted; their
/// cross-component distances are reported as `None` and
/// [`CoarseUnion::from_disconnected`] turns them into a coarse union.
pub fn build_graph_space(n: usize, edges: &[(usize, usize)]) -> Result<MetricSpace> {
    let mut adjacency = vec![Vec::new(); n];
    let mut list = Vec::with_capacity(edges.len());
    for &(u, v) in edges {
        for w in [u, v] {
            if w >= n {
                return Err(Error::VertexOutOfRange { vertex: w, n });
            }
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        list.push((u.min(v), u.max(v)));
    }
    list.sort_unstable();
    list.dedup();
    for &(u, v) in &list {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }
    for row in &mut adjacency {
        row.sort_unstable();
    }

    let mut component_of = vec![usize::MAX; n];
    let mut component_count = 0;
    for s in 0..n {
        if component_of[s] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([s]);
        component_of[s] = component_count;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if component_of[v] == usize::MAX {
                    component_of[v] = component_count;
                    queue.push_back(v);
                }
            }
        }
        component_count += 1;
    }

    let table = if n < u16::MAX as usize {
        DistTable::Narrow(bfs_table(&adjacency, u16::MAX, |d| d as u16))
    } else {
        DistTable::Wide(bfs_table(&adjacency, u32::MAX, |d| d as u32))
    };

    Ok(MetricSpace {
        n,
        adjacency,
        edges: list,
        table,
        component_of,
        component_count,
        labels: None,
    })
}

fn bfs_table<W: Copy + PartialEq>(adjacency: &[Vec<usize>], unreachable: W, cast: impl Fn(usize) -> W) -> Vec<W> {
    let n = adjacency.len();
    let mut table = vec![unreachable; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut table[s * n..(s + 1) * n];
        row[s] = cast(0);
        queue.clear();
        queue.push_back((s, 0usize));
        while let Some((u, d)) = queue.pop_front() {
            for &v in &adjacency[u] {
                if row[v] == unreachable {
                    row[v] = cast(d + 1);
                    queue.push_back((v, d + 1));
                }
            }
        }
    }
    table
}

impl MetricSpace {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    pub fn edge_list(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Hop distance, `None` across connected components.
    pub fn hops(&self, x: usize, y: usize) -> Option<u32> {
        self.table.get(x * self.n + y)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count <= 1
    }

    pub fn connected_components(&self) -> usize {
        self.component_count
    }

    /// `None` for disconnected spaces.
    pub fn diameter(&self) -> Option<u32> {
        if !self.is_connected() {
            return None;
        }
        (0..self.n * self.n).filter_map(|i| self.table.get(i)).max().or(Some(0))
    }

    pub fn eccentricity(&self, x: usize) -> Option<u32> {
        (0..self.n).map(|y| self.hops(x, y)).collect::<Option<Vec<_>>>()?.into_iter().max()
    }

    /// `N_R` for `R = 0..=max_r`: the largest ball cardinality at each radius.
    pub fn ball_profile(&self, max_r: u32) -> Vec<usize> {
        let mut profile = vec![0usize; max_r as usize + 1];
        let mut counts = vec![0usize; max_r as usize + 1];
        for x in 0..self.n {
            counts.iter_mut().for_each(|c| *c = 0);
            for y in 0..self.n {
                if let Some(d) = self.hops(x, y) {
                    if d <= max_r {
                        counts[d as usize] += 1;
                    }
                }
            }
            let mut acc = 0;
            for (r, c) in counts.iter().enumerate() {
                acc += c;
                profile[r] = profile[r].max(acc);
            }
        }
        profile
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, x: usize) -> String {
        match &self.labels {
            Some(l) => l[x].clone(),
            None => x.to_string(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return input(format!("{} labels for {} points", labels.len(), self.n));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Split into connected components, each renumbered in increasing order of
    /// original id. Returns the pieces and, per piece, the original ids.
    pub fn split_components(&self) -> (Vec<MetricSpace>, Vec<Vec<usize>>) {
        let mut members = vec![Vec::new(); self.component_count];
        for x in 0..self.n {
            members[self.component_of[x]].push(x);
        }
        let pieces = members
            .iter()
            .map(|ids| self.induced(ids).expect("component ids are valid"))
            .collect();
        (pieces, members)
    }

    /// Induced subgraph on `ids` (in the given order).
    pub fn induced(&self, ids: &[usize]) -> Result<MetricSpace> {
        let mut local = vec![usize::MAX; self.n];
        for (i, &x) in ids.iter().enumerate() {
            if x >= self.n {
                return Err(Error::VertexOutOfRange { vertex: x, n: self.n });
            }
            local[x] = i;
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter(|(u, v)| local[*u] != usize::MAX && local[*v] != usize::MAX)
            .map(|&(u, v)| (local[u], local[v]))
            .collect();
        let space = build_graph_space(ids.len(), &edges)?;
        match &self.labels {
            Some(l) => space.with_labels(ids.iter().map(|&x| l[x].clone()).collect()),
            None => Ok(space),
        }
    }
}

impl Metric for MetricSpace {
    fn len(&self) -> usize {
        self.n
    }

    fn dist(&self, x: usize, y: usize) -> Option<Dist> {
        self.hops(x, y).map(Dist::from)
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.edges.clone()
    }

    fn component_of(&self, x: usize) -> usize {
        self.component_of[x]
    }

    fn within(&self, x: usize, r: Dist) -> Vec<(usize, Dist)> {
        (0..self.n)
            .filter_map(|y| self.hops(x, y).map(Dist::from).filter(|&d| d <= r).map(|d| (y, d)))
            .collect()
    }

    fn distances_to_set(&self, targets: &[bool]) -> Vec<Option<Dist>> {
        multi_source_bfs(&self.adjacency, targets).into_iter().map(|d| d.map(Dist::from)).collect()
    }
}

fn multi_source_bfs(adjacency: &[Vec<usize>], targets: &[bool]) -> Vec<Option<u32>> {
    let mut out = vec![None; adjacency.len()];
    let mut queue = VecDeque::new();
    for (x, &t) in targets.iter().enumerate() {
        if t {
            out[x] = Some(0);
            queue.push_back(x);
        }
    }
    while let Some(u) = queue.pop_front() {
        let d = out[u].unwrap();
        for &v in &adjacency[u] {
            if out[v].is_none() {
                out[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    out
}

/// A coarse disjoint union of finite connected graphs, glued to a ray.
///
/// Component `i` hangs off the ray at integer position `o_i` through its
/// basepoint `p_i`; for `x` in component `i` and `y` in component `j != i`,
/// `d(x, y) = d_i(x, p_i) + |o_i - o_j| + d_j(p_j, y)`. Offsets satisfy
/// `o_{i+1} >= o_i + diam(X_i) + diam(X_{i+1}) + i + 1`.
#[derive(Clone, Debug)]
pub struct CoarseUnion {
    components: Vec<MetricSpace>,
    offsets: Vec<Dist>,
    basepoints: Vec<usize>,
    starts: Vec<usize>,
    owner: Vec<usize>,
    to_base: Vec<u32>,
    diameters: Vec<u32>,
}

/// Coarse union with the minimal offsets and every basepoint at local id 0.
pub fn coarse_union(spaces: Vec<MetricSpace>) -> Result<CoarseUnion> {
    let basepoints = vec![0; spaces.len()];
    CoarseUnion::with_basepoints(spaces, basepoints)
}

impl CoarseUnion {
    pub fn with_basepoints(spaces: Vec<MetricSpace>, basepoints: Vec<usize>) -> Result<Self> {
        let diameters = Self::check_components(&spaces)?;
        let mut offsets = Vec::with_capacity(spaces.len());
        let mut o: Dist = 0;
        for i in 0..spaces.len() {
            if i > 0 {
                o += Self::gap(&diameters, i - 1);
            }
            offsets.push(o);
        }
        Self::assemble(spaces, offsets, basepoints, diameters)
    }

    /// Coarse union with caller-chosen offsets, which must satisfy the gap
    /// recurrence.
    pub fn with_offsets(spaces: Vec<MetricSpace>, offsets: Vec<Dist>, basepoints: Vec<usize>) -> Result<Self> {
        let diameters = Self::check_components(&spaces)?;
        if offsets.len() != spaces.len() {
            return input(format!("{} offsets for {} components", offsets.len(), spaces.len()));
        }
        for i in 1..offsets.len() {
            let need = offsets[i - 1] + Self::gap(&diameters, i - 1);
            if offsets[i] < need {
                return input(format!(
                    "offset {} of component {i} is below the required {need}",
                    offsets[i]
                ));
            }
        }
        Self::assemble(spaces, offsets, basepoints, diameters)
    }

    /// Split a (possibly disconnected) graph into its connected components,
    /// in order of their smallest vertex, and glue them with minimal offsets.
    /// The returned ids map the union's points back to the original vertices.
    pub fn from_disconnected(space: &MetricSpace) -> Result<(Self, Vec<usize>)> {
        let (pieces, members) = space.split_components();
        let order: Vec<usize> = members.into_iter().flatten().collect();
        Ok((coarse_union(pieces)?, order))
    }

    /// Minimal distance between offsets `o_i` and `o_{i+1}`.
    pub fn required_gap(&self, i: usize) -> Dist {
        Self::gap(&self.diameters, i)
    }

    fn gap(diameters: &[u32], i: usize) -> Dist {
        Dist::from(diameters[i]) + Dist::from(diameters[i + 1]) + i as Dist + 1
    }

    fn check_components(spaces: &[MetricSpace]) -> Result<Vec<u32>> {
        if spaces.is_empty() {
            return input("a coarse union needs at least one component");
        }
        spaces
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.n() == 0 {
                    return input(format!("component {i} is empty"));
                }
                s.diameter().ok_or_else(|| Error::Input(format!("component {i} is disconnected")))
            })
            .collect()
    }

    fn assemble(spaces: Vec<MetricSpace>, offsets: Vec<Dist>, basepoints: Vec<usize>, diameters: Vec<u32>) -> Result<Self> {
        if basepoints.len() != spaces.len() {
            return input(format!("{} basepoints for {} components", basepoints.len(), spaces.len()));
        }
        let mut starts = Vec::with_capacity(spaces.len());
        let mut owner = Vec::new();
        let mut to_base = Vec::new();
        for (i, (s, &p)) in spaces.iter().zip(&basepoints).enumerate() {
            if p >= s.n() {
                return Err(Error::VertexOutOfRange { vertex: p, n: s.n() });
            }
            starts.push(owner.len());
            for x in 0..s.n() {
                owner.push(i);
                to_base.push(s.hops(x, p).expect("components are connected"));
            }
        }
        Ok(Self {
            components: spaces,
            offsets,
            basepoints,
            starts,
            owner,
            to_base,
            diameters,
        })
    }

    pub fn components(&self) -> &[MetricSpace] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &MetricSpace {
        &self.components[i]
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn offsets(&self) -> &[Dist] {
        &self.offsets
    }

    /// Local ids of the basepoints.
    pub fn basepoints(&self) -> &[usize] {
        &self.basepoints
    }

    pub fn basepoint_global(&self, i: usize) -> usize {
        self.starts[i] + self.basepoints[i]
    }

    pub fn diameters(&self) -> &[u32] {
        &self.diameters
    }

    pub fn component_range(&self, i: usize) -> std::ops::Range<usize> {
        let end = self.starts.get(i + 1).copied().unwrap_or(self.owner.len());
        self.starts[i]..end
    }

    pub fn local(&self, x: usize) -> (usize, usize) {
        let i = self.owner[x];
        (i, x - self.starts[i])
    }

    pub fn global(&self, component: usize, local: usize) -> usize {
        self.starts[component] + local
    }

    /// `d_i(x, p_i)` for `x` in component `i`.
    pub fn depth(&self, x: usize) -> u32 {
        self.to_base[x]
    }

    /// Distance between two components: `|o_i - o_j|` (attained at basepoints).
    pub fn component_distance(&self, i: usize, j: usize) -> Dist {
        if i == j {
            0
        } else {
            self.offsets[i].abs_diff(self.offsets[j])
        }
    }
}

impl Metric for CoarseUnion {
    fn len(&self) -> usize {
        self.owner.len()
    }

    fn dist(&self, x: usize, y: usize) -> Option<Dist> {
        let (i, lx) = self.local(x);
        let (j, ly) = self.local(y);
        if i == j {
            self.components[i].dist(lx, ly)
        } else {
            Some(Dist::from(self.to_base[x]) + self.component_distance(i, j) + Dist::from(self.to_base[y]))
        }
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                let s = self.starts[i];
                c.edge_list().iter().map(move |&(u, v)| (s + u, s + v))
            })
            .collect()
    }

    fn component_of(&self, x: usize) -> usize {
        self.owner[x]
    }

    fn within(&self, x: usize, r: Dist) -> Vec<(usize, Dist)> {
        let (i, lx) = self.local(x);
        let mut out: Vec<(usize, Dist)> = self.components[i]
            .within(lx, r)
            .into_iter()
            .map(|(ly, d)| (self.starts[i] + ly, d))
            .collect();
        let dx = Dist::from(self.to_base[x]);
        for j in 0..self.components.len() {
            if j == i {
                continue;
            }
            let reach = dx + self.component_distance(i, j);
            if reach > r {
                continue;
            }
            for y in self.component_range(j) {
                let d = reach + Dist::from(self.to_base[y]);
                if d <= r {
                    out.push((y, d));
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn distances_to_set(&self, targets: &[bool]) -> Vec<Option<Dist>> {
        let mut internal: Vec<Option<Dist>> = Vec::with_capacity(self.len());
        // nearest target to each basepoint, per component
        let mut from_base: Vec<Option<Dist>> = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let range = self.component_range(i);
            let local = c.distances_to_set(&targets[range.clone()]);
            from_base.push(
                range
                    .clone()
                    .filter(|&y| targets[y])
                    .map(|y| Dist::from(self.to_base[y]))
                    .min(),
            );
            internal.extend(local);
        }
        // best path leaving component i through the ray
        let via_ray: Vec<Option<Dist>> = (0..self.components.len())
            .map(|i| {
                (0..self.components.len())
                    .filter(|&j| j != i)
                    .filter_map(|j| from_base[j].map(|m| m + self.component_distance(i, j)))
                    .min()
            })
            .collect();
        (0..self.len())
            .map(|x| {
                let i = self.owner[x];
                let out = via_ray[i].map(|v| v + Dist::from(self.to_base[x]));
                match (internal[x], out) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                }
            })
            .collect()
    }

    fn coarse_components(&self, r: Dist) -> CoarsePartition {
        let mut uf = UnionFind::new(self.len());
        if r == 0 {
            return CoarsePartition::from_union_find(&mut uf);
        }
        for i in 0..self.components.len() {
            let range = self.component_range(i);
            for x in range.clone().skip(1) {
                uf.union(range.start, x);
            }
            for j in i + 1..self.components.len() {
                if self.component_distance(i, j) <= r {
                    uf.union(range.start, self.starts[j]);
                }
            }
        }
        CoarsePartition::from_union_find(&mut uf)
    }
}

/// The set of pairs at distance at most `radius`, avoiding `excluded` in both
/// coordinates. Stored once per unordered pair (`x <= y`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entourage {
    radius: Dist,
    excluded: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl Entourage {
    pub fn radius(&self) -> Dist {
        self.radius
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    /// Unordered pairs with `x <= y`, sorted.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pairs.binary_search(&(x.min(y), x.max(y))).is_ok()
    }

    /// Number of unordered pairs, diagonal included.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of ordered pairs `(x, y)`.
    pub fn ordered_len(&self) -> usize {
        self.pairs.iter().map(|(x, y)| if x == y { 1 } else { 2 }).sum()
    }

    pub fn is_subset_of(&self, other: &Entourage) -> bool {
        self.pairs.iter().all(|&(x, y)| other.contains(x, y))
    }
}

/// `Delta_R` restricted to the complement of `excluded`.
pub fn entourage<M: Metric + ?Sized>(space: &M, radius: Dist, excluded: &[usize]) -> Entourage {
    let mut skip = vec![false; space.len()];
    for &k in excluded {
        if k < skip.len() {
            skip[k] = true;
        }
    }
    let mut pairs = Vec::new();
    for x in 0..space.len() {
        if skip[x] {
            continue;
        }
        for (y, _) in space.within(x, radius) {
            if y >= x && !skip[y] {
                pairs.push((x, y));
            }
        }
    }
    pairs.sort_unstable();
    let mut excluded = excluded.to_vec();
    excluded.sort_unstable();
    excluded.dedup();
    Entourage {
        radius,
        excluded,
        pairs,
    }
}

/// Blocks of a partition, largest first (ties broken by smallest member).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoarsePartition {
    pub blocks: Vec<Vec<usize>>,
}

impl CoarsePartition {
    fn from_union_find(uf: &mut UnionFind) -> Self {
        let n = uf.parent.len();
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for x in 0..n {
            let r = uf.find(x);
            by_root[r].push(x);
        }
        let mut blocks: Vec<Vec<usize>> = by_root.into_iter().filter(|b| !b.is_empty()).collect();
        blocks.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        Self { blocks }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Edges of the cycle `C_n` (vertex `k` adjacent to `k +- 1 mod n`).
pub fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|k| (k, (k + 1) % n)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> MetricSpace {
        build_graph_space(n, &cycle_edges(n)).unwrap()
    }

    #[test]
    fn six_cycle_antipodal_distance() {
        let c6 = cycle(6);
        assert_eq!(c6.dist(0, 3), Some(3));
        assert_eq!(c6.dist(1, 5), Some(2));
        assert_eq!(c6.diameter(), Some(3));
    }

    #[test]
    fn single_edge_and_single_point() {
        let e = build_graph_space(2, &[(0, 1)]).unwrap();
        assert_eq!(e.dist(0, 1), Some(1));
        let p = build_graph_space(1, &[]).unwrap();
        assert_eq!(p.dist(0, 0), Some(0));
        assert!(p.is_connected());
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(matches!(build_graph_space(3, &[(1, 1)]), Err(Error::SelfLoop(1))));
        assert!(matches!(
            build_graph_space(3, &[(0, 3)]),
            Err(Error::VertexOutOfRange { vertex: 3, n: 3 })
        ));
    }

    #[test]
    fn disconnected_pairs_are_infinite() {
        let g = build_graph_space(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.dist(0, 2), None);
        assert_eq!(g.diameter(), None);
        let (u, order) = CoarseUnion::from_disconnected(&g).unwrap();
        assert_eq!(order, vec![0, 1, 2, 3]);
        assert_eq!(u.component_count(), 2);
        // gap = 1 + 1 + 0 + 1
        assert_eq!(u.dist(0, 2), Some(3));
        assert_eq!(u.dist(1, 3), Some(5));
    }

    #[test]
    fn entourage_counts_on_six_cycle() {
        let c6 = cycle(6);
        let diag = entourage(&c6, 0, &[]);
        assert_eq!(diag.ordered_len(), 6);
        assert!(diag.pairs().iter().all(|(x, y)| x == y));

        let e1 = entourage(&c6, 1, &[]);
        assert_eq!(e1.ordered_len(), 18);

        let a1 = entourage(&c6, 1, &[0]);
        assert!(a1.pairs().iter().all(|&(x, y)| x != 0 && y != 0));
        assert!(a1.contains(2, 1));
        assert!(!a1.contains(0, 1));
        // 5 diagonal, edges 1-2, 2-3, 3-4, 4-5
        assert_eq!(a1.ordered_len(), 5 + 8);
    }

    #[test]
    fn coarse_components_of_two_cycles() {
        let u = coarse_union(vec![cycle(4), cycle(8)]).unwrap();
        let first_gap = u.offsets()[1];
        let parts = u.coarse_components(first_gap - 1);
        assert_eq!(parts.sizes(), vec![8, 4]);
        assert_eq!(u.coarse_components(first_gap).sizes(), vec![12]);
        assert_eq!(u.coarse_components(0).sizes(), vec![1; 12]);
        // generic union-find path agrees
        let generic = Metric::coarse_components(&cycle(8), 1);
        assert_eq!(generic.sizes(), vec![8]);
    }

    #[test]
    fn single_component_union_is_isometric() {
        let c = cycle(7);
        let u = coarse_union(vec![c.clone()]).unwrap();
        for x in 0..7 {
            for y in 0..7 {
                assert_eq!(u.dist(x, y), c.dist(x, y));
            }
        }
    }

    #[test]
    fn union_cross_distance_formula() {
        let u = coarse_union(vec![cycle(4), cycle(8)]).unwrap();
        // diam 2 + diam 4 + 0 + 1
        assert_eq!(u.offsets(), &[0, 7]);
        let x = u.global(0, 2);
        let y = u.global(1, 3);
        assert_eq!(u.dist(x, y), Some(2 + 7 + 3));
    }

    #[test]
    fn offsets_must_respect_recurrence() {
        let err = CoarseUnion::with_offsets(vec![cycle(4), cycle(8)], vec![0, 6], vec![0, 0]);
        assert!(err.is_err());
        let ok = CoarseUnion::with_offsets(vec![cycle(4), cycle(8)], vec![0, 1_000_000], vec![0, 0]).unwrap();
        assert_eq!(ok.dist(0, 4), Some(1_000_000));
        assert!(coarse_union(Vec::new()).is_err());
    }

    #[test]
    fn distances_to_set_matches_brute_force() {
        let u = coarse_union(vec![cycle(4), cycle(6), cycle(9)]).unwrap();
        let targets: Vec<bool> = (0..u.len()).map(|x| x % 5 == 3).collect();
        let fast = u.distances_to_set(&targets);
        for x in 0..u.len() {
            let brute = (0..u.len()).filter(|&y| targets[y]).filter_map(|y| u.dist(x, y)).min();
            assert_eq!(fast[x], brute, "point {x}");
        }
    }

    #[test]
    fn within_matches_brute_force_on_union() {
        let u = coarse_union(vec![cycle(4), cycle(5)]).unwrap();
        for x in 0..u.len() {
            for r in [0, 1, 3, 8, 12] {
                let mut brute: Vec<_> = (0..u.len())
                    .filter_map(|y| u.dist(x, y).filter(|&d| d <= r).map(|d| (y, d)))
                    .collect();
                brute.sort_unstable();
                assert_eq!(u.within(x, r), brute);
            }
        }
    }

    #[test]
    fn ball_profile_of_cycle() {
        let c = cycle(10);
        assert_eq!(c.ball_profile(6), vec![1, 3, 5, 7, 9, 10, 10]);
    }
}
