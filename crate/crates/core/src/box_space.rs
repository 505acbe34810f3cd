//! Finite groups, Cayley graphs, box spaces and the finite-level invariant
//! mean.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::metric_space::{build_graph_space, CoarseUnion, Dist, Metric, MetricSpace};

/// Orders up to this size get an exhaustive axiom check.
pub const FULL_CHECK_ORDER: usize = 1000;
const SAMPLED_TRIPLES: usize = 100_000;

/// An element of the ambient group, reduced into each finite quotient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupElement {
    Int(i64),
    Tuple(Vec<i64>),
    Matrix([[i64; 2]; 2]),
}

impl std::fmt::Display for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupElement::Int(k) => write!(f, "{k}"),
            GroupElement::Tuple(t) => {
                let parts: Vec<String> = t.iter().map(i64::to_string).collect();
                write!(f, "({})", parts.join(","))
            }
            GroupElement::Matrix([[a, b], [c, d]]) => write!(f, "[[{a},{b}],[{c},{d}]]"),
        }
    }
}

/// A finite group with elements numbered `0..order`.
#[derive(Clone, Debug)]
pub enum FiniteGroup {
    /// `Z/n`.
    Cyclic(usize),
    /// `Z/n_1 x ... x Z/n_k`, elements in mixed radix (last factor fastest).
    Product(Vec<usize>),
    /// `SL(2, Z/p)` for a prime `p`.
    Sl2(Sl2Group),
    /// An explicit multiplication table.
    Table(TableGroup),
}

#[derive(Clone, Debug)]
pub struct Sl2Group {
    p: u32,
    elements: Vec<[u32; 4]>,
    index: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct TableGroup {
    mul: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return input("cyclic group of order 0");
        }
        Ok(FiniteGroup::Cyclic(n))
    }

    pub fn product(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.contains(&0) {
            return input("product factors must be a nonempty list of positive orders");
        }
        let group = FiniteGroup::Product(factors);
        group.verify()?;
        Ok(group)
    }

    pub fn sl2(p: u32) -> Result<Self> {
        if !(2..=61).contains(&p) || (2..p).any(|q| q * q <= p && p.is_multiple_of(q)) {
            return input(format!("SL(2, Z/p) needs a prime 2 <= p <= 61, got {p}"));
        }
        let mut elements = vec![[1, 0, 0, 1]];
        for a in 0..p {
            for b in 0..p {
                for c in 0..p {
                    for d in 0..p {
                        let m = [a, b, c, d];
                        if m != [1, 0, 0, 1] && (a * d + p * p - (b * c) % p) % p == 1 {
                            elements.push(m);
                        }
                    }
                }
            }
        }
        let mut index = vec![u32::MAX; (p as usize).pow(4)];
        for (i, m) in elements.iter().enumerate() {
            index[Self::encode(p, m)] = i as u32;
        }
        let group = FiniteGroup::Sl2(Sl2Group { p, elements, index });
        group.verify()?;
        Ok(group)
    }

    /// Build from a multiplication table `mul[a][b] = a * b`.
    pub fn table(mul: Vec<Vec<usize>>) -> Result<Self> {
        let n = mul.len();
        if n == 0 {
            return input("empty multiplication table");
        }
        if mul.iter().any(|row| row.len() != n || row.iter().any(|&v| v >= n)) {
            return input("multiplication table must be square with entries in range");
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| mul[e][x] == x && mul[x][e] == x))
            .ok_or_else(|| Error::Input("multiplication table has no identity".into()))?;
        let inverse = (0..n)
            .map(|x| {
                (0..n)
                    .find(|&y| mul[x][y] == identity && mul[y][x] == identity)
                    .ok_or_else(|| Error::Input(format!("element {x} has no inverse")))
            })
            .collect::<Result<Vec<_>>>()?;
        let group = FiniteGroup::Table(TableGroup { mul, identity, inverse });
        group.verify()?;
        Ok(group)
    }

    fn encode(p: u32, m: &[u32; 4]) -> usize {
        let p = p as usize;
        ((m[0] as usize * p + m[1] as usize) * p + m[2] as usize) * p + m[3] as usize
    }

    pub fn order(&self) -> usize {
        match self {
            FiniteGroup::Cyclic(n) => *n,
            FiniteGroup::Product(f) => f.iter().product(),
            FiniteGroup::Sl2(g) => g.elements.len(),
            FiniteGroup::Table(t) => t.mul.len(),
        }
    }

    pub fn identity(&self) -> usize {
        match self {
            FiniteGroup::Table(t) => t.identity,
            _ => 0,
        }
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        match self {
            FiniteGroup::Cyclic(n) => (a + b) % n,
            FiniteGroup::Product(f) => {
                let (da, db) = (self.digits(f, a), self.digits(f, b));
                let sum: Vec<usize> = da.iter().zip(&db).zip(f).map(|((x, y), n)| (x + y) % n).collect();
                self.undigits(f, &sum)
            }
            FiniteGroup::Sl2(g) => {
                let p = g.p as u64;
                let (x, y) = (g.elements[a].map(u64::from), g.elements[b].map(u64::from));
                let m = [
                    ((x[0] * y[0] + x[1] * y[2]) % p) as u32,
                    ((x[0] * y[1] + x[1] * y[3]) % p) as u32,
                    ((x[2] * y[0] + x[3] * y[2]) % p) as u32,
                    ((x[2] * y[1] + x[3] * y[3]) % p) as u32,
                ];
                g.index[Self::encode(g.p, &m)] as usize
            }
            FiniteGroup::Table(t) => t.mul[a][b],
        }
    }

    pub fn inv(&self, a: usize) -> usize {
        match self {
            FiniteGroup::Cyclic(n) => (n - a) % n,
            FiniteGroup::Product(f) => {
                let d: Vec<usize> = self.digits(f, a).iter().zip(f).map(|(x, n)| (n - x) % n).collect();
                self.undigits(f, &d)
            }
            FiniteGroup::Sl2(g) => {
                let [a0, b, c, d] = g.elements[a];
                let p = g.p;
                let m = [d, (p - b) % p, (p - c) % p, a0];
                g.index[Self::encode(p, &m)] as usize
            }
            FiniteGroup::Table(t) => t.inverse[a],
        }
    }

    fn digits(&self, factors: &[usize], mut a: usize) -> Vec<usize> {
        let mut d = vec![0; factors.len()];
        for (slot, n) in d.iter_mut().zip(factors).rev() {
            *slot = a % n;
            a /= n;
        }
        d
    }

    fn undigits(&self, factors: &[usize], d: &[usize]) -> usize {
        d.iter().zip(factors).fold(0, |acc, (x, n)| acc * n + x)
    }

    pub fn label(&self, a: usize) -> String {
        self.spec_of(a).to_string()
    }

    /// The canonical ambient representative of element `a`.
    pub fn spec_of(&self, a: usize) -> GroupElement {
        match self {
            FiniteGroup::Cyclic(_) | FiniteGroup::Table(_) => GroupElement::Int(a as i64),
            FiniteGroup::Product(f) => GroupElement::Tuple(self.digits(f, a).into_iter().map(|x| x as i64).collect()),
            FiniteGroup::Sl2(g) => {
                let [a0, b, c, d] = g.elements[a].map(i64::from);
                GroupElement::Matrix([[a0, b], [c, d]])
            }
        }
    }

    /// Reduce an ambient element into this quotient.
    pub fn element(&self, g: &GroupElement) -> Result<usize> {
        let fail = || Error::NotRepresentable {
            element: g.to_string(),
            quotient: self.order(),
        };
        match (self, g) {
            (FiniteGroup::Cyclic(n), GroupElement::Int(k)) => Ok(k.rem_euclid(*n as i64) as usize),
            (FiniteGroup::Product(f), GroupElement::Tuple(t)) if t.len() == f.len() => {
                let d: Vec<usize> = t.iter().zip(f).map(|(x, n)| x.rem_euclid(*n as i64) as usize).collect();
                Ok(self.undigits(f, &d))
            }
            (FiniteGroup::Sl2(s), GroupElement::Matrix(m)) => {
                let p = i64::from(s.p);
                let r = [m[0][0], m[0][1], m[1][0], m[1][1]].map(|v| v.rem_euclid(p) as u32);
                match s.index[Self::encode(s.p, &r)] {
                    u32::MAX => Err(fail()),
                    i => Ok(i as usize),
                }
            }
            (FiniteGroup::Table(t), GroupElement::Int(k)) if *k >= 0 && (*k as usize) < t.mul.len() => Ok(*k as usize),
            _ => Err(fail()),
        }
    }

    /// A small standard generating set.
    pub fn standard_generators(&self) -> Vec<GroupElement> {
        match self {
            FiniteGroup::Cyclic(_) => vec![GroupElement::Int(1)],
            FiniteGroup::Product(f) => (0..f.len())
                .map(|i| GroupElement::Tuple((0..f.len()).map(|j| i64::from(i == j)).collect()))
                .collect(),
            FiniteGroup::Sl2(_) => vec![GroupElement::Matrix([[1, 1], [0, 1]]), GroupElement::Matrix([[1, 0], [1, 1]])],
            FiniteGroup::Table(t) => (0..t.mul.len())
                .filter(|&x| x != t.identity)
                .map(|x| GroupElement::Int(x as i64))
                .collect(),
        }
    }

    /// Check identity, inverses and associativity: exhaustively up to
    /// [`FULL_CHECK_ORDER`], on seeded random triples beyond.
    pub fn verify(&self) -> Result<()> {
        let n = self.order();
        let e = self.identity();
        for x in 0..n {
            if self.mul(e, x) != x || self.mul(x, e) != x {
                return input(format!("identity axiom fails at {}", self.label(x)));
            }
            let y = self.inv(x);
            if self.mul(x, y) != e || self.mul(y, x) != e {
                return input(format!("inverse axiom fails at {}", self.label(x)));
            }
        }
        let assoc = |a: usize, b: usize, c: usize| self.mul(self.mul(a, b), c) == self.mul(a, self.mul(b, c));
        if n <= FULL_CHECK_ORDER {
            for a in 0..n {
                for b in 0..n {
                    let ab = self.mul(a, b);
                    for c in 0..n {
                        if self.mul(ab, c) != self.mul(a, self.mul(b, c)) {
                            return input(format!("associativity fails at ({a}, {b}, {c})"));
                        }
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            for _ in 0..SAMPLED_TRIPLES {
                let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if !assoc(a, b, c) {
                    return input(format!("associativity fails at ({a}, {b}, {c})"));
                }
            }
        }
        Ok(())
    }
}

/// A symmetric generating set without the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratingSet {
    elements: Vec<usize>,
}

impl GeneratingSet {
    /// Close `elements` under inverses, drop the identity, and check that the
    /// result generates `group`.
    pub fn new(group: &FiniteGroup, elements: &[usize]) -> Result<Self> {
        let n = group.order();
        let mut set = Vec::new();
        for &s in elements {
            if s >= n {
                return Err(Error::VertexOutOfRange { vertex: s, n });
            }
            if s != group.identity() {
                set.push(s);
                set.push(group.inv(s));
            }
        }
        set.sort_unstable();
        set.dedup();
        let gens = Self { elements: set };
        let reached = gens.reachable(group);
        if let Some(x) = (0..n).find(|&x| !reached[x]) {
            return Err(Error::NotGenerating(group.label(x)));
        }
        Ok(gens)
    }

    pub fn from_specs(group: &FiniteGroup, specs: &[GroupElement]) -> Result<Self> {
        let ids = specs.iter().map(|s| group.element(s)).collect::<Result<Vec<_>>>()?;
        Self::new(group, &ids)
    }

    pub fn standard(group: &FiniteGroup) -> Result<Self> {
        Self::from_specs(group, &group.standard_generators())
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    fn reachable(&self, group: &FiniteGroup) -> Vec<bool> {
        let mut seen = vec![false; group.order()];
        let e = group.identity();
        seen[e] = true;
        let mut queue = VecDeque::from([e]);
        while let Some(g) = queue.pop_front() {
            for &s in &self.elements {
                let h = group.mul(g, s);
                if !seen[h] {
                    seen[h] = true;
                    queue.push_back(h);
                }
            }
        }
        seen
    }
}

/// Cayley graph with edges `{g, g s}`; points are labelled by element.
pub fn cayley_graph(group: &FiniteGroup, gens: &GeneratingSet) -> Result<MetricSpace> {
    let n = group.order();
    let mut edges = Vec::with_capacity(n * gens.elements.len());
    for g in 0..n {
        for &s in &gens.elements {
            let h = group.mul(g, s);
            if g < h {
                edges.push((g, h));
            }
        }
    }
    let space = build_graph_space(n, &edges)?;
    if let Some(x) = (1..n).find(|&x| space.hops(group.identity(), x).is_none()) {
        return Err(Error::NotGenerating(group.label(x)));
    }
    space.with_labels((0..n).map(|g| group.label(g)).collect())
}

/// Coarse disjoint union of Cayley graphs of finite quotients.
#[derive(Clone, Debug)]
pub struct BoxSpace {
    groups: Vec<FiniteGroup>,
    generators: Vec<GeneratingSet>,
    union: CoarseUnion,
}

/// Box space of `quotients`, each generated by the reduction of `gens`.
/// Orders must be strictly increasing.
pub fn box_space(quotients: Vec<FiniteGroup>, gens: &[GroupElement]) -> Result<BoxSpace> {
    let sets = quotients
        .iter()
        .map(|q| GeneratingSet::from_specs(q, gens))
        .collect::<Result<Vec<_>>>()?;
    BoxSpace::from_parts(quotients, sets)
}

/// Box space of `Z` with generator `1`: a coarse union of cycles.
pub fn cycle_box_space(lengths: &[usize]) -> Result<BoxSpace> {
    let groups = lengths.iter().map(|&n| FiniteGroup::cyclic(n)).collect::<Result<Vec<_>>>()?;
    box_space(groups, &[GroupElement::Int(1)])
}

impl BoxSpace {
    pub fn from_parts(groups: Vec<FiniteGroup>, generators: Vec<GeneratingSet>) -> Result<Self> {
        if groups.is_empty() {
            return input("a box space needs at least one quotient");
        }
        if groups.len() != generators.len() {
            return input("one generating set per quotient required");
        }
        for w in groups.windows(2) {
            if w[1].order() <= w[0].order() {
                return input(format!(
                    "quotient orders must strictly increase ({} then {})",
                    w[0].order(),
                    w[1].order()
                ));
            }
        }
        let graphs = groups
            .iter()
            .zip(&generators)
            .map(|(g, s)| cayley_graph(g, s))
            .collect::<Result<Vec<_>>>()?;
        let basepoints = groups.iter().map(FiniteGroup::identity).collect();
        let union = CoarseUnion::with_basepoints(graphs, basepoints)?;
        Ok(Self { groups, generators, union })
    }

    /// Same components placed at other admissible offsets.
    pub fn with_offsets(self, offsets: Vec<Dist>) -> Result<Self> {
        let union = CoarseUnion::with_offsets(
            self.union.components().to_vec(),
            offsets,
            self.union.basepoints().to_vec(),
        )?;
        Ok(Self { union, ..self })
    }

    pub fn groups(&self) -> &[FiniteGroup] {
        &self.groups
    }

    pub fn generators(&self) -> &[GeneratingSet] {
        &self.generators
    }

    pub fn union(&self) -> &CoarseUnion {
        &self.union
    }

    pub fn into_union(self) -> CoarseUnion {
        self.union
    }
}

/// `max_i |mean_i(f o L_g) - mean_i(f)|` with `L_g` left translation by the
/// image of `g` in the `i`-th quotient; `f` is indexed by the box's points.
pub fn invariant_mean_defect(space: &BoxSpace, f: &[f64], g: &GroupElement) -> Result<f64> {
    if f.len() != space.union.len() {
        return input(format!("function has {} values for {} points", f.len(), space.union.len()));
    }
    let mut worst: f64 = 0.0;
    for (i, group) in space.groups.iter().enumerate() {
        let h = group.element(g)?;
        let range = space.union.component_range(i);
        let local = &f[range];
        let n = local.len() as f64;
        let mean: f64 = local.iter().sum::<f64>() / n;
        let moved: f64 = (0..local.len()).map(|x| local[group.mul(h, x)]).sum::<f64>() / n;
        worst = worst.max((moved - mean).abs());
    }
    Ok(worst)
}

/// Length of the shortest cycle, `None` for forests.
pub fn girth(space: &MetricSpace) -> Option<usize> {
    let n = space.n();
    let mut best: Option<usize> = None;
    let mut depth = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        depth.iter_mut().for_each(|d| *d = usize::MAX);
        depth[root] = 0;
        parent[root] = usize::MAX;
        queue.clear();
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            if best.is_some_and(|b| 2 * depth[u] + 1 >= b) {
                break;
            }
            for &v in space.neighbors(u) {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if parent[u] != v {
                    let len = depth[u] + depth[v] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best
}

/// Smallest girth over the components of a coarse union.
pub fn union_girth(space: &CoarseUnion) -> Option<usize> {
    space.components().iter().filter_map(girth).min()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z6_cayley_graph_is_a_cycle() {
        let g = FiniteGroup::cyclic(6).unwrap();
        let s = GeneratingSet::standard(&g).unwrap();
        assert_eq!(s.elements(), &[1, 5]);
        let c = cayley_graph(&g, &s).unwrap();
        assert!((0..6).all(|x| c.degree(x) == 2));
        assert_eq!(c.dist(0, 3), Some(3));
        assert_eq!(girth(&c), Some(6));
    }

    #[test]
    fn z2_is_one_edge() {
        let b = cycle_box_space(&[2]).unwrap();
        assert_eq!(b.union().len(), 2);
        assert_eq!(b.union().dist(0, 1), Some(1));
        assert_eq!(b.union().edges(), vec![(0, 1)]);
    }

    #[test]
    fn sl2_mod_3_has_24_elements() {
        let g = FiniteGroup::sl2(3).unwrap();
        assert_eq!(g.order(), 24);
        let s = GeneratingSet::standard(&g).unwrap();
        let c = cayley_graph(&g, &s).unwrap();
        assert_eq!(c.n(), 24);
        assert!(c.is_connected());
    }

    #[test]
    fn non_generating_set_names_unreachable_element() {
        let g = FiniteGroup::cyclic(6).unwrap();
        match GeneratingSet::new(&g, &[2]) {
            Err(Error::NotGenerating(label)) => assert_eq!(label, "1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn box_space_requires_increasing_orders() {
        assert!(cycle_box_space(&[8, 4]).is_err());
        assert!(cycle_box_space(&[4, 4]).is_err());
        let b = cycle_box_space(&[4, 8, 16]).unwrap();
        assert_eq!(b.union().component_count(), 3);
        let o = b.union().offsets();
        assert!(o[2] - o[1] > o[1] - o[0]);
    }

    #[test]
    fn invariant_mean_of_indicator() {
        let b = cycle_box_space(&[4, 8]).unwrap();
        let mut f = vec![0.0; 12];
        f[5] = 1.0;
        assert_eq!(invariant_mean_defect(&b, &f, &GroupElement::Int(3)).unwrap(), 0.0);
        let ones = vec![1.0; 12];
        assert_eq!(invariant_mean_defect(&b, &ones, &GroupElement::Int(1)).unwrap(), 0.0);
    }

    #[test]
    fn matrix_not_representable_in_cyclic_quotient() {
        let b = cycle_box_space(&[4]).unwrap();
        let g = GroupElement::Matrix([[1, 1], [0, 1]]);
        assert!(matches!(
            invariant_mean_defect(&b, &[0.0; 4], &g),
            Err(Error::NotRepresentable { .. })
        ));
        let sl = FiniteGroup::sl2(5).unwrap();
        assert!(sl.element(&GroupElement::Matrix([[2, 0], [0, 2]])).is_err());
    }

    #[test]
    fn trees_have_unbounded_girth() {
        let t = build_graph_space(5, &[(0, 1), (0, 2), (2, 3), (2, 4)]).unwrap();
        assert_eq!(girth(&t), None);
    }

    #[test]
    fn table_group_round_trip() {
        // Klein four-group
        let mul = vec![vec![0, 1, 2, 3], vec![1, 0, 3, 2], vec![2, 3, 0, 1], vec![3, 2, 1, 0]];
        let g = FiniteGroup::table(mul).unwrap();
        assert_eq!(g.identity(), 0);
        let s = GeneratingSet::from_specs(&g, &[GroupElement::Int(1), GroupElement::Int(2)]).unwrap();
        let c = cayley_graph(&g, &s).unwrap();
        assert_eq!(girth(&c), Some(4));
        assert!(FiniteGroup::table(vec![vec![0, 0], vec![0, 1]]).is_err());
    }

    #[test]
    fn product_of_cyclics() {
        let g = FiniteGroup::product(vec![2, 3]).unwrap();
        assert_eq!(g.order(), 6);
        let x = g.element(&GroupElement::Tuple(vec![1, 2])).unwrap();
        assert_eq!(g.label(x), "(1,2)");
        assert_eq!(g.mul(x, g.inv(x)), g.identity());
    }
}
