//! Fibred coarse embeddings of coarse disjoint unions: representation,
//! validation, generators for cycles and large-girth graphs, and the scale
//! families `k_R` they induce.
//!
//! Every fibre is a copy of `T^dim`. A chart at `x` assigns an affine isometry
//! `t_x(z)` to each `z` in the ball `B_{l_i}(x)` of its component, and a
//! transition `t_xy` relates the charts at `x` and `y` on the overlap of their
//! balls.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::box_space::{cycle_box_space, girth, BoxSpace};
use crate::error::{input, Error, Result};
use crate::kernels::{control_envelopes, ControlFunctions, Envelopes, Kernel, ScaleEntry, ScaleFamily};
use crate::metric_space::{coarse_union, CoarseUnion, Dist, Metric, MetricSpace};
use crate::scalar::Scalar;

/// Linear part of an affine isometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Linear<T> {
    Identity,
    Diagonal(Vec<T>),
    /// `Q e_j = signs[j] e_{perm[j]}`.
    SignedPermutation { perm: Vec<usize>, signs: Vec<T> },
    /// Row-major `dim x dim` matrix.
    Dense(Vec<T>),
}

/// `v -> Q v + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineIsometry<T> {
    pub dim: usize,
    pub linear: Linear<T>,
    pub shift: Vec<T>,
}

impl<T: Scalar> AffineIsometry<T> {
    pub fn identity(dim: usize) -> Self {
        Self::translation(vec![T::zero(); dim])
    }

    pub fn translation(shift: Vec<T>) -> Self {
        Self {
            dim: shift.len(),
            linear: Linear::Identity,
            shift,
        }
    }

    /// Entry `(i, j)` of the linear part.
    pub fn entry(&self, i: usize, j: usize) -> T {
        match &self.linear {
            Linear::Identity => one_if(i == j),
            Linear::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    T::zero()
                }
            }
            Linear::SignedPermutation { perm, signs } => {
                if perm[j] == i {
                    signs[j]
                } else {
                    T::zero()
                }
            }
            Linear::Dense(m) => m[i * self.dim + j],
        }
    }

    pub fn apply_linear(&self, v: &[T]) -> Vec<T> {
        match &self.linear {
            Linear::Identity => v.to_vec(),
            Linear::Diagonal(d) => v.iter().zip(d).map(|(&a, &s)| a * s).collect(),
            Linear::SignedPermutation { perm, signs } => {
                let mut out = vec![T::zero(); self.dim];
                for j in 0..self.dim {
                    out[perm[j]] = signs[j] * v[j];
                }
                out
            }
            Linear::Dense(m) => (0..self.dim)
                .map(|i| (0..self.dim).fold(T::zero(), |acc, j| acc + m[i * self.dim + j] * v[j]))
                .collect(),
        }
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let mut out = self.apply_linear(v);
        out.iter_mut().zip(&self.shift).for_each(|(a, &b)| *a = *a + b);
        out
    }

    /// `self o other`.
    pub fn compose(&self, other: &Self) -> Self {
        let d = self.dim;
        let linear = match (&self.linear, &other.linear) {
            (Linear::Identity, l) => l.clone(),
            (l, Linear::Identity) => l.clone(),
            (Linear::Diagonal(a), Linear::Diagonal(b)) => Linear::Diagonal(a.iter().zip(b).map(|(&x, &y)| x * y).collect()),
            _ => {
                let mut m = vec![T::zero(); d * d];
                for i in 0..d {
                    for j in 0..d {
                        m[i * d + j] = (0..d).fold(T::zero(), |acc, k| acc + self.entry(i, k) * other.entry(k, j));
                    }
                }
                Linear::Dense(m)
            }
        };
        let shift = self.apply(&other.shift);
        Self { dim: d, linear, shift }
    }

    /// Largest entrywise difference of linear parts and shifts.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        let mut bump = |a: T, b: T| {
            let v = (a - b).magnitude();
            if v > worst {
                worst = v;
            }
        };
        match (&self.linear, &other.linear) {
            (Linear::Identity | Linear::Diagonal(_), Linear::Identity | Linear::Diagonal(_)) => {
                for i in 0..self.dim {
                    bump(self.entry(i, i), other.entry(i, i));
                }
            }
            _ => {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        bump(self.entry(i, j), other.entry(i, j));
                    }
                }
            }
        }
        for (&a, &b) in self.shift.iter().zip(&other.shift) {
            bump(a, b);
        }
        worst
    }

    /// `max |Q^T Q - I|` entrywise.
    pub fn orthogonality_defect(&self) -> T {
        let d = self.dim;
        match &self.linear {
            Linear::Identity => T::zero(),
            Linear::Diagonal(s) => s.iter().fold(T::zero(), |w, &x| max_of(w, (x * x - T::one()).magnitude())),
            Linear::SignedPermutation { perm, signs } => {
                let mut hit = vec![false; d];
                let mut w = T::zero();
                for j in 0..d {
                    if perm[j] >= d || hit[perm[j]] {
                        return T::one();
                    }
                    hit[perm[j]] = true;
                    w = max_of(w, (signs[j] * signs[j] - T::one()).magnitude());
                }
                w
            }
            Linear::Dense(m) => {
                let mut w = T::zero();
                for i in 0..d {
                    for j in 0..d {
                        let g = (0..d).fold(T::zero(), |acc, k| acc + m[k * d + i] * m[k * d + j]);
                        w = max_of(w, (g - one_if::<T>(i == j)).magnitude());
                    }
                }
                w
            }
        }
    }

    pub fn map<U: Scalar>(&self, f: &mut impl FnMut(T) -> U) -> AffineIsometry<U> {
        let linear = match &self.linear {
            Linear::Identity => Linear::Identity,
            Linear::Diagonal(d) => Linear::Diagonal(d.iter().map(|&v| f(v)).collect()),
            Linear::SignedPermutation { perm, signs } => Linear::SignedPermutation {
                perm: perm.clone(),
                signs: signs.iter().map(|&v| f(v)).collect(),
            },
            Linear::Dense(m) => Linear::Dense(m.iter().map(|&v| f(v)).collect()),
        };
        AffineIsometry {
            dim: self.dim,
            linear,
            shift: self.shift.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn one_if<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

fn max_of<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Trivialisation over one ball: `maps[k] = t_x(members[k])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart<T> {
    pub center: usize,
    /// Sorted.
    pub members: Vec<usize>,
    pub maps: Vec<AffineIsometry<T>>,
}

impl<T> Chart<T> {
    pub fn map_for(&self, z: usize) -> Option<&AffineIsometry<T>> {
        self.members.binary_search(&z).ok().map(|k| &self.maps[k])
    }
}

/// Compatibility isometry `t_xy` with `t_x(z) = t_xy o t_y(z)` on overlaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub from: usize,
    pub to: usize,
    pub map: AffineIsometry<T>,
}

/// A fibred coarse embedding of a coarse union, indexed by its global points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FibredEmbedding<T> {
    pub dim: usize,
    /// `l_i` per component.
    pub scales: Vec<u64>,
    /// `s(x)`; an empty vector stands for the origin.
    pub section: Vec<Vec<T>>,
    /// One chart per point, `charts[x].center == x`.
    pub charts: Vec<Chart<T>>,
    /// Sorted by `(from, to)`.
    pub transitions: Vec<Transition<T>>,
    pub controls: ControlFunctions,
}

impl<T: Scalar> FibredEmbedding<T> {
    pub fn section_of(&self, x: usize) -> Vec<T> {
        match self.section.get(x) {
            Some(v) if !v.is_empty() => v.clone(),
            _ => vec![T::zero(); self.dim],
        }
    }

    /// `t_x(z)(s(z))`, when `z` lies in the chart at `x`.
    pub fn image(&self, x: usize, z: usize) -> Option<Vec<T>> {
        let chart = self.charts.get(x)?;
        chart.map_for(z).map(|m| m.apply(&self.section_of(z)))
    }

    /// `||t_x(z)(s(z)) - t_x(w)(s(w))||^2`.
    pub fn chart_sq_dist(&self, x: usize, z: usize, w: usize) -> Option<T> {
        let a = self.image(x, z)?;
        let b = self.image(x, w)?;
        Some(sq_norm_diff(&a, &b))
    }

    pub fn transition(&self, from: usize, to: usize) -> Option<&AffineIsometry<T>> {
        self.transitions
            .binary_search_by(|t| (t.from, t.to).cmp(&(from, to)))
            .ok()
            .map(|i| &self.transitions[i].map)
    }

    pub fn map<U: Scalar>(&self, mut f: impl FnMut(T) -> U) -> FibredEmbedding<U> {
        FibredEmbedding {
            dim: self.dim,
            scales: self.scales.clone(),
            section: self.section.iter().map(|v| v.iter().map(|&a| f(a)).collect()).collect(),
            charts: self
                .charts
                .iter()
                .map(|c| Chart {
                    center: c.center,
                    members: c.members.clone(),
                    maps: c.maps.iter().map(|m| m.map(&mut f)).collect(),
                })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| Transition {
                    from: t.from,
                    to: t.to,
                    map: t.map.map(&mut f),
                })
                .collect(),
            controls: self.controls.clone(),
        }
    }
}

fn sq_norm_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&u, &v)| acc + (u - v) * (u - v))
}

/// Ball of radius `r` around `x` inside its own component, sorted.
fn component_ball(space: &CoarseUnion, x: usize, r: u64) -> Vec<usize> {
    let (i, lx) = space.local(x);
    let c = space.component(i);
    let mut out: Vec<usize> = (0..c.n())
        .filter(|&ly| c.hops(lx, ly).is_some_and(|d| u64::from(d) <= r))
        .map(|ly| space.global(i, ly))
        .collect();
    out.sort_unstable();
    out
}

/// Condition (1) outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCheck {
    pub holds: bool,
    pub pairs_checked: usize,
    /// Envelopes of the chart distances actually observed.
    pub envelopes: Option<Envelopes>,
    /// Largest violation of `rho_1(d)^2 <= ||.||^2 <= rho_2(d)^2`.
    pub max_excess: f64,
}

/// Condition (2) outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityCheck {
    pub holds: bool,
    pub overlaps_checked: usize,
    pub residual: f64,
    /// Pairs `x < y` with overlapping balls but no stored transition.
    pub missing_transitions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FceReport {
    pub scales_monotone: bool,
    pub orthogonality_defect: f64,
    pub orthogonal: bool,
    pub condition1: ControlCheck,
    pub condition2: CompatibilityCheck,
}

impl FceReport {
    pub fn passed(&self) -> bool {
        self.scales_monotone && self.orthogonal && self.condition1.holds && self.condition2.holds
    }
}

/// Validate a fibred coarse embedding against `space`.
///
/// Transitions are checked in their stored direction; the reverse direction
/// follows by inverting.
pub fn validate_fce<T: Scalar>(fce: &FibredEmbedding<T>, space: &CoarseUnion) -> Result<FceReport> {
    if fce.scales.len() != space.component_count() {
        return input(format!(
            "{} scales for {} components",
            fce.scales.len(),
            space.component_count()
        ));
    }
    if fce.charts.len() != space.len() {
        return input(format!("{} charts for {} points", fce.charts.len(), space.len()));
    }
    let tol = T::validation_tolerance().to_f64();
    let mut balls = Vec::with_capacity(space.len());
    for x in 0..space.len() {
        let chart = &fce.charts[x];
        if chart.center != x || chart.maps.len() != chart.members.len() {
            return input(format!("chart {x} is malformed"));
        }
        let ball = component_ball(space, x, fce.scales[space.component_of(x)]);
        if let Some(&z) = ball.iter().find(|&&z| chart.map_for(z).is_none()) {
            return Err(Error::MissingChart { center: x, member: z });
        }
        balls.push(ball);
    }

    let mut defect = 0.0f64;
    for chart in &fce.charts {
        for m in &chart.maps {
            defect = defect.max(m.orthogonality_defect().to_f64());
        }
    }
    for t in &fce.transitions {
        defect = defect.max(t.map.orthogonality_defect().to_f64());
    }

    // condition (1)
    let mut samples: Vec<(Dist, f64)> = Vec::new();
    let mut excess = 0.0f64;
    let mut pairs = 0usize;
    for (x, ball) in balls.iter().enumerate() {
        let images: Vec<Vec<T>> = ball.iter().map(|&z| fce.image(x, z).expect("checked above")).collect();
        for a in 0..ball.len() {
            for b in a..ball.len() {
                let d = space.dist(ball[a], ball[b]).expect("same component");
                let sq = sq_norm_diff(&images[a], &images[b]).to_f64();
                let lo = fce.controls.rho_minus.squared(d as f64);
                let hi = fce.controls.rho_plus.squared(d as f64);
                let slack = tol * sq.max(1.0);
                excess = excess.max(lo - sq - slack).max(sq - hi - slack);
                samples.push((d, sq.max(0.0).sqrt()));
                pairs += 1;
            }
        }
    }
    let envelopes = if samples.is_empty() {
        None
    } else {
        Some(control_envelopes(&samples)?)
    };

    // condition (2)
    let mut residual = 0.0f64;
    let mut overlaps = 0usize;
    let mut missing = 0usize;
    for x in 0..space.len() {
        let l = fce.scales[space.component_of(x)];
        for y in balls_overlapping(space, x, l) {
            let Some(txy) = fce.transition(x, y) else {
                missing += 1;
                continue;
            };
            for &z in balls[x].iter().filter(|z| balls[y].binary_search(z).is_ok()) {
                let lhs = fce.charts[x].map_for(z).expect("checked above");
                let rhs = txy.compose(fce.charts[y].map_for(z).expect("checked above"));
                residual = residual.max(lhs.max_abs_diff(&rhs).to_f64());
                overlaps += 1;
            }
        }
    }

    let monotone = fce.scales.windows(2).all(|w| w[0] <= w[1]);
    Ok(FceReport {
        scales_monotone: monotone,
        orthogonality_defect: defect,
        orthogonal: defect <= tol,
        condition1: ControlCheck {
            holds: excess <= 0.0,
            pairs_checked: pairs,
            envelopes,
            max_excess: excess.max(0.0),
        },
        condition2: CompatibilityCheck {
            holds: residual <= tol && missing == 0,
            overlaps_checked: overlaps,
            residual,
            missing_transitions: missing,
        },
    })
}

/// Points `y > x` of the same component whose `l`-ball meets that of `x`.
fn balls_overlapping(space: &CoarseUnion, x: usize, l: u64) -> Vec<usize> {
    component_ball(space, x, 2 * l).into_iter().filter(|&y| y > x).collect()
}

/// Options for the generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorOptions {
    /// Store the transitions `t_xy` (needed for validation, not for kernels).
    pub transitions: bool,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self { transitions: true }
    }
}

/// Chart radius used for `C_n`: the largest `l` with `4 l < n`.
pub fn cycle_scale(n: usize) -> u64 {
    ((n - 1) / 4) as u64
}

/// Fibred coarse embedding of the box space of `Z` given by `cycle_lengths`.
///
/// Fibres are one-dimensional; `t_x(z)` translates by the signed arc
/// coordinate of `z` relative to `x` (increasing index positive), so chart
/// distances equal cycle distances.
pub fn fce_cycles(cycle_lengths: &[usize]) -> Result<(BoxSpace, FibredEmbedding<i64>)> {
    fce_cycles_with(cycle_lengths, GeneratorOptions::default())
}

pub fn fce_cycles_with(cycle_lengths: &[usize], options: GeneratorOptions) -> Result<(BoxSpace, FibredEmbedding<i64>)> {
    if let Some(&n) = cycle_lengths.iter().find(|&&n| n < 4) {
        return input(format!("cycle length {n} is below 4"));
    }
    let space = cycle_box_space(cycle_lengths)?;
    let union = space.union();
    let scales: Vec<u64> = cycle_lengths.iter().map(|&n| cycle_scale(n)).collect();
    let mut charts = Vec::with_capacity(union.len());
    let mut transitions = Vec::new();
    for x in 0..union.len() {
        let (i, lx) = union.local(x);
        let n = cycle_lengths[i] as i64;
        let l = scales[i] as i64;
        let arc = |lz: usize| -> i64 {
            let a = (lz as i64 - lx as i64).rem_euclid(n);
            if 2 * a > n {
                a - n
            } else {
                a
            }
        };
        let members = component_ball(union, x, scales[i]);
        let maps = members
            .iter()
            .map(|&z| AffineIsometry::translation(vec![arc(union.local(z).1)]))
            .collect();
        charts.push(Chart { center: x, members, maps });
        if options.transitions {
            for y in balls_overlapping(union, x, l as u64) {
                transitions.push(Transition {
                    from: x,
                    to: y,
                    map: AffineIsometry::translation(vec![arc(union.local(y).1)]),
                });
            }
        }
    }
    let fce = FibredEmbedding {
        dim: 1,
        scales,
        section: vec![Vec::new(); union.len()],
        charts,
        transitions,
        controls: ControlFunctions::linear(),
    };
    Ok((space, fce))
}

/// Fibred coarse embedding of a coarse union of graphs of large girth.
///
/// Coordinates are indexed by the edges of each component. The chart at `x`
/// sends `v` in the fibre over `z` to `D_P v + 1_P`, where `P` is the edge
/// set of the geodesic from `x` to `z` and `D_P` flips the signs on `P`, so
/// `||t_x(z)(0) - t_x(w)(0)||^2 = d(z, w)`. Requires `4 l_i < girth(X_i)`.
/// When `scales` is `None` each component gets the largest admissible radius
/// (capped at its diameter), then lowered to keep the sequence monotone.
pub fn fce_large_girth(graphs: Vec<MetricSpace>, scales: Option<Vec<u64>>) -> Result<(CoarseUnion, FibredEmbedding<i64>)> {
    fce_large_girth_with(graphs, scales, GeneratorOptions::default())
}

pub fn fce_large_girth_with(
    graphs: Vec<MetricSpace>,
    scales: Option<Vec<u64>>,
    options: GeneratorOptions,
) -> Result<(CoarseUnion, FibredEmbedding<i64>)> {
    let union = coarse_union(graphs)?;
    let girths: Vec<Option<usize>> = union.components().iter().map(girth).collect();
    let scales = match scales {
        Some(s) => {
            if s.len() != union.component_count() {
                return input(format!("{} scales for {} components", s.len(), union.component_count()));
            }
            for (i, (&l, g)) in s.iter().zip(&girths).enumerate() {
                if g.is_some_and(|g| 4 * l as usize >= g) {
                    return Err(Error::GirthTooSmall {
                        component: i,
                        girth: *g,
                        radius: l,
                    });
                }
            }
            if s.windows(2).any(|w| w[0] > w[1]) {
                return input("scales must be non-decreasing");
            }
            s
        }
        None => {
            let mut s: Vec<u64> = girths
                .iter()
                .zip(union.diameters())
                .map(|(g, &diam)| {
                    let cap = u64::from(diam);
                    g.map_or(cap, |g| cap.min(((g - 1) / 4) as u64))
                })
                .collect();
            for i in (0..s.len().saturating_sub(1)).rev() {
                s[i] = s[i].min(s[i + 1]);
            }
            s
        }
    };
    let dim = union.components().iter().map(|c| c.edge_list().len()).max().unwrap_or(0);

    let mut charts = Vec::with_capacity(union.len());
    let mut transitions = Vec::new();
    for x in 0..union.len() {
        let (i, lx) = union.local(x);
        let comp = union.component(i);
        let l = scales[i];
        let reach = if options.transitions { 2 * l } else { l };
        let paths = geodesic_edges(comp, lx, reach);
        let members = component_ball(&union, x, l);
        let maps = members
            .iter()
            .map(|&z| path_flip(dim, paths[union.local(z).1].as_ref().expect("inside the ball")))
            .collect();
        charts.push(Chart { center: x, members, maps });
        if options.transitions {
            for y in balls_overlapping(&union, x, l) {
                let p = paths[union.local(y).1].as_ref().expect("inside the double ball");
                transitions.push(Transition {
                    from: x,
                    to: y,
                    map: path_flip(dim, p),
                });
            }
        }
    }
    let fce = FibredEmbedding {
        dim,
        scales,
        section: vec![Vec::new(); union.len()],
        charts,
        transitions,
        controls: ControlFunctions::sqrt(),
    };
    Ok((union, fce))
}

/// Edge indices of the BFS-tree path from `root` to every vertex within
/// `radius`.
fn geodesic_edges(comp: &MetricSpace, root: usize, radius: u64) -> Vec<Option<Vec<usize>>> {
    let edges = comp.edge_list();
    let edge_index = |u: usize, v: usize| edges.binary_search(&(u.min(v), u.max(v))).expect("graph edge");
    let mut paths: Vec<Option<Vec<usize>>> = vec![None; comp.n()];
    paths[root] = Some(Vec::new());
    let mut queue = VecDeque::from([(root, 0u64)]);
    while let Some((u, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for &v in comp.neighbors(u) {
            if paths[v].is_none() {
                let mut p = paths[u].clone().expect("visited");
                p.push(edge_index(u, v));
                paths[v] = Some(p);
                queue.push_back((v, d + 1));
            }
        }
    }
    paths
}

/// `v -> D_P v + 1_P`.
fn path_flip(dim: usize, path: &[usize]) -> AffineIsometry<i64> {
    let mut diag = vec![1i64; dim];
    let mut shift = vec![0i64; dim];
    for &e in path {
        diag[e] = -1;
        shift[e] = 1;
    }
    AffineIsometry {
        dim,
        linear: Linear::Diagonal(diag),
        shift,
    }
}

/// `k_R(x, y) = ||t_x(x)(s(x)) - t_x(y)(s(y))||^2` on `A_R` for each requested
/// scale, evaluated in the chart of the smaller point.
pub fn kernels_from_fce<T: Scalar>(fce: &FibredEmbedding<T>, space: &CoarseUnion, scales: &[u64]) -> Result<ScaleFamily<T>> {
    let mut family = ScaleFamily::new();
    for &r in scales {
        let first = fce
            .scales
            .iter()
            .position(|&l| l >= r)
            .ok_or(Error::ScaleUnavailable(r))?;
        for i in first..space.component_count().saturating_sub(1) {
            if space.offsets()[i + 1] - space.offsets()[i] <= Dist::from(r) {
                return input(format!("scale {r} reaches across components {i} and {}", i + 1));
            }
        }
        let start = space.component_range(first).start;
        let excluded: Vec<usize> = (0..start).collect();
        let mut entries = Vec::new();
        for x in start..space.len() {
            for y in component_ball(space, x, r).into_iter().filter(|&y| y >= x) {
                let v = fce.chart_sq_dist(x, x, y).ok_or(Error::MissingChart { center: x, member: y })?;
                entries.push(((x, y), v));
            }
        }
        family.insert(
            r,
            ScaleEntry {
                kernel: Kernel::from_sorted(space.len(), entries),
                excluded,
                first_component: first,
            },
        );
    }
    Ok(family)
}
