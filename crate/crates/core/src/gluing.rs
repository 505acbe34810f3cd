//! Annular decompositions, square-root partitions of unity, glued
//! positive-type kernels and the truncated proper negative-type function.
//!
//! Statements "at infinity" are evaluated on the part of a finite truncation
//! lying beyond the bounded set `D = Z_0 u ... u Z_o` that a parameter schedule
//! removes. Spaces laid out by [`schedule_layout`] keep enough components out
//! there for every scheduled scale.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::fibred::FibredEmbedding;
use crate::kernels::{Control, ControlFunctions, Kernel, ScaleFamily};
use crate::metric_space::{CoarseUnion, Dist, Metric, MetricSpace};
use crate::scalar::Scalar;

/// Multiplicity of the annular cover.
pub const MULTIPLICITY: u32 = 2;
/// Absolute slack for floating-point sums of partition weights.
pub const ROUNDOFF: f64 = 1e-12;
/// Default truncation of the proper-function series.
pub const DEFAULT_NMAX: usize = 8;

/// `n^3 - n`, the inner radius of `Z_n`.
pub fn inner_radius(n: u64) -> Dist {
    let n = Dist::from(n);
    n * n * n - n
}

/// `(n+1)^3 + (n+1)`, the outer radius of `Z_n`.
pub fn outer_radius(n: u64) -> Dist {
    let m = Dist::from(n) + 1;
    m * m * m + m
}

/// All `n` with `n^3 - n <= r <= (n+1)^3 + (n+1)`, ascending.
pub fn annuli_containing(r: Dist) -> Vec<u64> {
    let mut top = (r as f64).cbrt() as u64 + 2;
    while inner_radius(top) > r {
        top -= 1;
    }
    let mut out = Vec::with_capacity(2);
    let mut n = top;
    loop {
        if outer_radius(n) >= r {
            out.push(n);
        } else {
            break;
        }
        if n == 0 {
            break;
        }
        n -= 1;
    }
    out.reverse();
    out
}

/// The cover `Z_n = {z : n^3 - n <= d(z, z0) <= (n+1)^3 + (n+1)}`.
#[derive(Clone, Debug)]
pub struct AnnularDecomposition {
    basepoint: usize,
    radial: Vec<Dist>,
    /// Smallest annulus of each point and whether it also lies in the next.
    first: Vec<u64>,
    both: Vec<bool>,
    annuli: BTreeMap<u64, Vec<usize>>,
}

impl AnnularDecomposition {
    pub fn new<M: Metric + ?Sized>(space: &M, z0: usize) -> Result<Self> {
        if z0 >= space.len() {
            return Err(Error::VertexOutOfRange { vertex: z0, n: space.len() });
        }
        let mut radial = Vec::with_capacity(space.len());
        let mut first = Vec::with_capacity(space.len());
        let mut both = Vec::with_capacity(space.len());
        let mut annuli: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for z in 0..space.len() {
            let r = space
                .dist(z, z0)
                .ok_or_else(|| Error::Input(format!("point {z} is not connected to the basepoint")))?;
            let ns = annuli_containing(r);
            radial.push(r);
            first.push(ns[0]);
            both.push(ns.len() > 1);
            for n in ns {
                annuli.entry(n).or_default().push(z);
            }
        }
        Ok(Self {
            basepoint: z0,
            radial,
            first,
            both,
            annuli,
        })
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn len(&self) -> usize {
        self.radial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radial.is_empty()
    }

    pub fn radial(&self, x: usize) -> Dist {
        self.radial[x]
    }

    /// Annuli containing `x`, ascending.
    pub fn annuli_of(&self, x: usize) -> impl Iterator<Item = u64> {
        let n = self.first[x];
        std::iter::once(n).chain(self.both[x].then_some(n + 1))
    }

    pub fn smallest_annulus(&self, x: usize) -> u64 {
        self.first[x]
    }

    pub fn contains(&self, n: u64, x: usize) -> bool {
        self.first[x] == n || (self.both[x] && self.first[x] + 1 == n)
    }

    /// Nonempty annuli, ascending, with their sorted members.
    pub fn annuli(&self) -> &BTreeMap<u64, Vec<usize>> {
        &self.annuli
    }

    pub fn annulus(&self, n: u64) -> &[usize] {
        self.annuli.get(&n).map_or(&[], Vec::as_slice)
    }

    /// Membership mask of `Y_parity`, the union of the `Z_n` with `n % 2 == parity`.
    pub fn y_mask(&self, parity: u64) -> Vec<bool> {
        (0..self.len()).map(|x| self.annuli_of(x).any(|n| n % 2 == parity)).collect()
    }

    /// Pieces of `Y_parity`: the annuli of that parity.
    pub fn y_pieces(&self, parity: u64) -> Vec<(u64, &[usize])> {
        self.annuli
            .iter()
            .filter(|(n, _)| *n % 2 == parity)
            .map(|(&n, v)| (n, v.as_slice()))
            .collect()
    }

    /// Index beyond which the restricted cover has Lebesgue number at least
    /// `l`: the least integer strictly above `l/2 - 1`.
    pub fn lebesgue_floor(l: f64) -> u64 {
        let v = (l / 2.0 - 1.0).floor() + 1.0;
        if v <= 0.0 {
            0
        } else {
            v as u64
        }
    }

    /// Mask of `D = Z_0 u ... u Z_o`.
    pub fn core_mask(&self, o: u64) -> Vec<bool> {
        (0..self.len()).map(|x| self.first[x] <= o).collect()
    }

    /// Mask of the complement of `D`.
    pub fn outside_core(&self, o: u64) -> Vec<bool> {
        (0..self.len()).map(|x| self.first[x] > o).collect()
    }

    /// Exhaustive check of coverage and of the multiplicity bound against the
    /// defining inequalities.
    pub fn cover_report(&self) -> CoverReport {
        let mut uncovered = 0;
        let mut max_multiplicity = 0;
        let mut distant_overlaps = 0;
        for x in 0..self.len() {
            let r = self.radial[x];
            let ns: Vec<u64> = self.annuli_of(x).collect();
            let ok = ns.iter().all(|&n| inner_radius(n) <= r && r <= outer_radius(n));
            let lo = ns[0];
            let below_ok = lo == 0 || outer_radius(lo - 1) < r;
            let hi = *ns.last().expect("nonempty");
            let above_ok = inner_radius(hi + 1) > r;
            if !(ok && below_ok && above_ok) {
                uncovered += 1;
            }
            max_multiplicity = max_multiplicity.max(ns.len());
            if ns.windows(2).any(|w| w[1] - w[0] >= 2) {
                distant_overlaps += 1;
            }
        }
        CoverReport {
            points: self.len(),
            uncovered,
            max_multiplicity,
            distant_overlaps,
            annuli: self.annuli.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverReport {
    pub points: usize,
    /// Points whose recorded annuli disagree with the defining inequalities.
    pub uncovered: usize,
    pub max_multiplicity: usize,
    /// Points in two annuli `Z_n`, `Z_m` with `|n - m| >= 2`.
    pub distant_overlaps: usize,
    pub annuli: usize,
}

impl CoverReport {
    pub fn holds(&self) -> bool {
        self.uncovered == 0 && self.max_multiplicity <= MULTIPLICITY as usize && self.distant_overlaps == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub holds: bool,
    pub pairs_checked: u64,
    /// `(n, x, y, d(x, y))` of the first violation.
    pub violation: Option<(u64, usize, usize, Dist)>,
}

/// Every `x` in `Z_n \ Z_{n+1}` and `y` in `Z_{n+1} \ Z_n` satisfy
/// `d(x, y) >= 2(n+1)`; exhaustive over all such pairs.
pub fn separation_check<M: Metric + ?Sized>(decomp: &AnnularDecomposition, space: &M) -> SeparationReport {
    let mut checked = 0u64;
    for (&n, members) in &decomp.annuli {
        let next = decomp.annulus(n + 1);
        if next.is_empty() {
            continue;
        }
        let bound = 2 * (Dist::from(n) + 1);
        let only_n: Vec<usize> = members.iter().copied().filter(|&x| !decomp.contains(n + 1, x)).collect();
        let only_next: Vec<usize> = next.iter().copied().filter(|&y| !decomp.contains(n, y)).collect();
        for &x in &only_n {
            for &y in &only_next {
                checked += 1;
                let d = space.dist(x, y).unwrap_or(Dist::MAX);
                if d < bound {
                    return SeparationReport {
                        holds: false,
                        pairs_checked: checked,
                        violation: Some((n, x, y, d)),
                    };
                }
            }
        }
    }
    SeparationReport {
        holds: true,
        pairs_checked: checked,
        violation: None,
    }
}

/// `phi_n` and `Phi_n = sqrt(phi_n)` on a region.
#[derive(Clone, Debug)]
pub struct SqrtPartition {
    region: Vec<bool>,
    /// Per point: `(n, phi_n(x), Phi_n(x))` for the annuli containing `x`.
    weights: Vec<Vec<(u64, f64, f64)>>,
    /// Per point: `max_n d(x, X \ Z_n) - 1` (infinite if some complement is empty).
    local_lebesgue: Vec<f64>,
    lebesgue: f64,
}

/// Partition of unity subordinate to the annuli, on the points of `region`:
/// `phi_n(x) = d(x, X \ Z_n) / sum_m d(x, X \ Z_m)`.
pub fn partition_of_unity<M: Metric + ?Sized>(
    decomp: &AnnularDecomposition,
    space: &M,
    region: &[bool],
) -> Result<SqrtPartition> {
    let n = decomp.len();
    if region.len() != n {
        return input("region mask has the wrong length");
    }
    let mut needed: Vec<u64> = (0..n).filter(|&x| region[x]).flat_map(|x| decomp.annuli_of(x)).collect();
    needed.sort_unstable();
    needed.dedup();
    let mut to_complement: BTreeMap<u64, Vec<Option<Dist>>> = BTreeMap::new();
    for &a in &needed {
        let outside: Vec<bool> = (0..n).map(|x| !decomp.contains(a, x)).collect();
        let d = if outside.iter().any(|&b| b) {
            space.distances_to_set(&outside)
        } else {
            vec![None; n]
        };
        to_complement.insert(a, d);
    }

    let mut weights = vec![Vec::new(); n];
    let mut local = vec![f64::NAN; n];
    let mut lebesgue = f64::INFINITY;
    for x in (0..n).filter(|&x| region[x]) {
        let dists: Vec<(u64, Option<f64>)> = decomp
            .annuli_of(x)
            .map(|a| (a, to_complement[&a][x].map(|d| d as f64)))
            .collect();
        let infinite = dists.iter().filter(|(_, d)| d.is_none()).count();
        let w: Vec<(u64, f64)> = if infinite > 0 {
            dists
                .iter()
                .map(|&(a, d)| (a, if d.is_none() { 1.0 / infinite as f64 } else { 0.0 }))
                .collect()
        } else {
            let total: f64 = dists.iter().map(|(_, d)| d.expect("finite")).sum();
            if total <= 0.0 {
                return Err(Error::Coverage(x));
            }
            dists.iter().map(|&(a, d)| (a, d.expect("finite") / total)).collect()
        };
        weights[x] = w.into_iter().map(|(a, p)| (a, p, p.sqrt())).collect();
        let lx = if infinite > 0 {
            f64::INFINITY
        } else {
            dists.iter().map(|(_, d)| d.expect("finite")).fold(0.0, f64::max) - 1.0
        };
        local[x] = lx;
        lebesgue = lebesgue.min(lx);
    }
    Ok(SqrtPartition {
        region: region.to_vec(),
        weights,
        local_lebesgue: local,
        lebesgue,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCertificate {
    pub holds: bool,
    pub edges_checked: usize,
    /// `(2 m + 1) / L`.
    pub phi_bound: f64,
    /// Largest `|phi_n(x) - phi_n(y)| / d(x, y)` over region edges.
    pub phi_observed: f64,
    /// `sqrt((2 m + 1) / L)`.
    pub sqrt_bound: f64,
    /// Largest `|Phi_n(x) - Phi_n(y)| / sqrt(d(x, y))`.
    pub sqrt_observed: f64,
}

impl SqrtPartition {
    pub fn region(&self) -> &[bool] {
        &self.region
    }

    /// Lebesgue number of the cover restricted to the region.
    pub fn lebesgue(&self) -> f64 {
        self.lebesgue
    }

    pub fn local_lebesgue(&self, x: usize) -> f64 {
        self.local_lebesgue[x]
    }

    /// `(n, phi_n(x), Phi_n(x))` over the annuli containing `x`.
    pub fn weights(&self, x: usize) -> &[(u64, f64, f64)] {
        &self.weights[x]
    }

    pub fn phi(&self, n: u64, x: usize) -> f64 {
        self.weights[x].iter().find(|w| w.0 == n).map_or(0.0, |w| w.1)
    }

    pub fn sqrt_phi(&self, n: u64, x: usize) -> f64 {
        self.weights[x].iter().find(|w| w.0 == n).map_or(0.0, |w| w.2)
    }

    /// Largest `|sum_n phi_n(x) - 1|` and `|sum_n Phi_n(x)^2 - 1|` over the region.
    pub fn sum_defect(&self) -> (f64, f64) {
        let mut a: f64 = 0.0;
        let mut b: f64 = 0.0;
        for x in (0..self.region.len()).filter(|&x| self.region[x]) {
            let s: f64 = self.weights[x].iter().map(|w| w.1).sum();
            let q: f64 = self.weights[x].iter().map(|w| w.2 * w.2).sum();
            a = a.max((s - 1.0).abs());
            b = b.max((q - 1.0).abs());
        }
        (a, b)
    }

    /// Edgewise Lipschitz bounds over graph edges inside the region.
    pub fn lipschitz_certificate<M: Metric + ?Sized>(&self, space: &M) -> LipschitzCertificate {
        let c = f64::from(2 * MULTIPLICITY + 1);
        let phi_bound = c / self.lebesgue;
        let sqrt_bound = phi_bound.sqrt();
        let mut phi_obs: f64 = 0.0;
        let mut sqrt_obs: f64 = 0.0;
        let mut edges = 0;
        for (x, y) in space.edges() {
            if !(self.region[x] && self.region[y]) {
                continue;
            }
            edges += 1;
            let d = space.dist(x, y).unwrap_or(1) as f64;
            let mut ns: Vec<u64> = self.weights[x].iter().chain(&self.weights[y]).map(|w| w.0).collect();
            ns.sort_unstable();
            ns.dedup();
            for n in ns {
                phi_obs = phi_obs.max((self.phi(n, x) - self.phi(n, y)).abs() / d);
                sqrt_obs = sqrt_obs.max((self.sqrt_phi(n, x) - self.sqrt_phi(n, y)).abs() / d.sqrt());
            }
        }
        LipschitzCertificate {
            holds: phi_obs <= phi_bound && sqrt_obs <= sqrt_bound,
            edges_checked: edges,
            phi_bound,
            phi_observed: phi_obs,
            sqrt_bound,
            sqrt_observed: sqrt_obs,
        }
    }
}

/// The parameters attached to a requested `(R, eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub r: u64,
    pub eps: f64,
    /// `rho_+(R)`.
    pub rho_plus: f64,
    /// `eps / (3 (1 + rho_+(R)^2))`.
    pub t: f64,
    /// Required Lebesgue number `180 R / eps^2`.
    pub s: f64,
    /// Least integer strictly above `S/2 - 1`.
    pub n_s: u64,
}

impl Schedule {
    pub fn new(r: u64, eps: f64, controls: &ControlFunctions) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return input(format!("eps must lie in (0, 1], got {eps}"));
        }
        let rf = r as f64;
        let rho_plus = controls.rho_plus.eval(rf);
        let t = eps / (3.0 * (1.0 + controls.rho_plus.squared(rf)));
        let s = 180.0 * rf / (eps * eps);
        Ok(Self {
            r,
            eps,
            rho_plus,
            t,
            s,
            n_s: AnnularDecomposition::lebesgue_floor(s),
        })
    }

    /// Fix `o = max(n_S, m_R)` with `m_R` the largest smallest-annulus index
    /// over `K_R`, and the set `D = Z_0 u ... u Z_o`.
    pub fn resolve(&self, decomp: &AnnularDecomposition, excluded: &[usize]) -> Resolved {
        let m_r = excluded.iter().map(|&x| decomp.smallest_annulus(x)).max().unwrap_or(0);
        let o = self.n_s.max(m_r);
        let region = decomp.outside_core(o);
        let d_size = region.iter().filter(|&&b| !b).count();
        Resolved {
            schedule: self.clone(),
            m_r,
            o,
            d_size,
            region,
        }
    }
}

/// A schedule bound to a decomposition.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub schedule: Schedule,
    pub m_r: u64,
    pub o: u64,
    /// `|D|`.
    pub d_size: usize,
    /// Complement of `D`.
    pub region: Vec<bool>,
}

/// Offsets for a coarse union such that every schedule keeps the components
/// carrying its scale outside its core `D`.
///
/// Component 0 (which holds `z0`) and the components with `l_i` below the
/// largest scheduled `R` keep minimal offsets. The others are placed from
/// annulus `o_max + 1` on, one annulus each, alternately straddling the inner
/// boundary of the next annulus and lying inside a single annulus.
pub fn schedule_layout(
    components: &[MetricSpace],
    basepoints: &[usize],
    scales: &[u64],
    schedules: &[Schedule],
) -> Result<Vec<Dist>> {
    if components.len() != scales.len() || components.len() != basepoints.len() {
        return input("one scale and basepoint per component required");
    }
    let r_max = schedules.iter().map(|s| s.r).max().unwrap_or(0);
    let inner = scales.iter().take_while(|&&l| l < r_max).count().max(1);
    let prefix = CoarseUnion::with_basepoints(components[..inner].to_vec(), basepoints[..inner].to_vec())?;
    let decomp = AnnularDecomposition::new(&prefix, 0)?;
    let mut o_max = 0;
    for s in schedules {
        let k_count = scales.iter().take_while(|&&l| l < s.r).count();
        let excluded: Vec<usize> = if k_count == 0 {
            Vec::new()
        } else {
            (0..prefix.component_range(k_count - 1).end).collect()
        };
        let m_r = excluded.iter().map(|&x| decomp.smallest_annulus(x)).max().unwrap_or(0);
        o_max = o_max.max(s.n_s.max(m_r));
    }

    let diam: Vec<Dist> = components
        .iter()
        .map(|c| c.diameter().map(Dist::from).ok_or_else(|| Error::Input("component is disconnected".into())))
        .collect::<Result<_>>()?;
    let mut offsets = prefix.offsets().to_vec();
    for (j, i) in (inner..components.len()).enumerate() {
        let a = o_max + 1 + j as u64;
        let target = if j % 2 == 0 {
            inner_radius(a + 1) - diam[i] / 2
        } else {
            let a = Dist::from(a);
            a * a * a + a + 1
        };
        let prev = offsets[i - 1];
        let need = prev + diam[i - 1] + diam[i] + (i as Dist - 1) + 1;
        offsets.push(target.max(need));
    }
    Ok(offsets)
}

/// The same union with offsets from [`schedule_layout`].
pub fn relayout(space: &CoarseUnion, scales: &[u64], schedules: &[Schedule]) -> Result<CoarseUnion> {
    let offsets = schedule_layout(space.components(), space.basepoints(), scales, schedules)?;
    CoarseUnion::with_offsets(space.components().to_vec(), offsets, space.basepoints().to_vec())
}

/// The schedules `(n, 2^-n)` for `n = 1..=n_max` used by [`proper_function`].
pub fn proper_schedules(n_max: usize, controls: &ControlFunctions) -> Result<Vec<Schedule>> {
    (1..=n_max)
        .map(|n| Schedule::new(n as u64, 0.5f64.powi(n as i32), controls))
        .collect()
}

/// A glued kernel `F_{R,t}` with the pairs no common annulus supports.
#[derive(Clone, Debug)]
pub struct GluedKernel {
    pub r: u64,
    pub t: f64,
    pub kernel: Kernel<f64>,
    /// Pairs with no common annulus; their value is 0.
    pub uncovered: Vec<(usize, usize)>,
}

/// `sum_{n in common annuli} Phi_n(x) exp(-t k_n) Phi_n(y)`, `None` when `x`
/// and `y` share no annulus.
fn glued_value(
    partition: &SqrtPartition,
    x: usize,
    y: usize,
    t: f64,
    mut k: impl FnMut(u64) -> Result<f64>,
) -> Result<Option<f64>> {
    let mut acc = 0.0;
    let mut any = false;
    for &(n, _, px) in partition.weights(x) {
        if let Some(&(_, _, py)) = partition.weights(y).iter().find(|w| w.0 == n) {
            any = true;
            acc += px * (-t * k(n)?).exp() * py;
        }
    }
    Ok(any.then_some(acc))
}

/// Glue the Schoenberg transforms at `t` of the negative-type families
/// `family0` (on `Y_0`) and `family1` (on `Y_1`) with the partition, on the
/// pairs of the partition's region at distance at most `r`.
pub fn glue<T: Scalar, M: Metric + ?Sized>(
    family0: &ScaleFamily<T>,
    family1: &ScaleFamily<T>,
    partition: &SqrtPartition,
    space: &M,
    r: u64,
    t: f64,
) -> Result<GluedKernel> {
    if t < 0.0 {
        return input(format!("Schoenberg parameter must be nonnegative, got {t}"));
    }
    let k0 = &family0.get(r).ok_or(Error::ScaleUnavailable(r))?.kernel;
    let k1 = &family1.get(r).ok_or(Error::ScaleUnavailable(r))?.kernel;
    let region = partition.region();
    let mut entries = Vec::new();
    let mut uncovered = Vec::new();
    for x in (0..space.len()).filter(|&x| region[x]) {
        for (y, _) in space.within(x, Dist::from(r)) {
            if y < x || !region[y] {
                continue;
            }
            let v = glued_value(partition, x, y, t, |n| {
                let k = if n % 2 == 0 { k0 } else { k1 };
                k.get(x, y).map(Scalar::to_f64).ok_or(Error::MissingPair(x, y))
            })?;
            match v {
                Some(v) => entries.push(((x, y), v)),
                None => {
                    entries.push(((x, y), 0.0));
                    uncovered.push((x, y));
                }
            }
        }
    }
    Ok(GluedKernel {
        r,
        t,
        kernel: Kernel::from_sorted(space.len(), entries),
        uncovered,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub holds: bool,
    pub pairs_checked: usize,
    /// Largest `F(x, y) - exp(-t max(rho_-(d), 0)^2)`.
    pub worst_excess: f64,
}

/// `F_{R,t}(x, y) <= exp(-t rho_-(d(x, y))^2) + 1e-9` on covered pairs.
pub fn decay_check<M: Metric + ?Sized>(glued: &GluedKernel, space: &M, controls: &ControlFunctions) -> DecayReport {
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0;
    for &((x, y), v) in glued.kernel.entries() {
        if glued.uncovered.binary_search(&(x, y)).is_ok() {
            continue;
        }
        let d = space.dist(x, y).expect("glued pairs are at finite distance") as f64;
        let bound = (-glued.t * controls.rho_minus.squared(d)).exp();
        worst = worst.max(v - bound);
        pairs += 1;
    }
    DecayReport {
        holds: worst <= 1e-9,
        pairs_checked: pairs,
        worst_excess: if pairs == 0 { 0.0 } else { worst },
    }
}

/// One term of the proper-function series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub n: usize,
    pub schedule: Schedule,
    pub m_r: u64,
    pub o: u64,
    pub d_size: usize,
    pub region_size: usize,
}

/// `k = sum_{n <= N} (1 - F_n)` on the pairs of the common region at distance
/// at most the chart radius of their component.
#[derive(Clone, Debug)]
pub struct ProperFunctionApprox {
    pub n_max: usize,
    pub rows: Vec<ScheduleRow>,
    pub region: Vec<bool>,
    pub lebesgue: f64,
    /// Sorted, `x <= y`.
    pub pairs: Vec<(usize, usize)>,
    pub distances: Vec<u64>,
    /// `terms[n - 1][p] = 1 - F_n(pairs[p])`.
    pub terms: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Pairs without a common annulus (counted with `F_n = 0`).
    pub uncovered: usize,
}

impl ProperFunctionApprox {
    pub fn value(&self, x: usize, y: usize) -> Option<f64> {
        let key = (x.min(y), x.max(y));
        self.pairs.binary_search(&key).ok().map(|i| self.values[i])
    }

    /// Partial sum with the first `n` terms.
    pub fn partial(&self, n: usize) -> Vec<f64> {
        (0..self.pairs.len())
            .map(|p| self.terms[..n.min(self.terms.len())].iter().map(|t| t[p]).sum())
            .collect()
    }

    pub fn t(&self, n: usize) -> f64 {
        self.rows[n - 1].schedule.t
    }
}

/// Build the truncated proper function from a fibred coarse embedding whose
/// space was laid out for the schedules `(n, 2^-n)`, `n <= n_max`.
pub fn proper_function<T: Scalar>(space: &CoarseUnion, fce: &FibredEmbedding<T>, n_max: usize) -> Result<ProperFunctionApprox> {
    if n_max == 0 {
        return input("the truncation needs at least one term");
    }
    let decomp = AnnularDecomposition::new(space, 0)?;
    let mut rows = Vec::with_capacity(n_max);
    let mut region = vec![true; space.len()];
    for n in 1..=n_max {
        let r = n as u64;
        let schedule = Schedule::new(r, 0.5f64.powi(n as i32), &fce.controls)?;
        let first = fce.scales.iter().position(|&l| l >= r).ok_or_else(|| Error::Infeasible {
            n,
            reason: format!("no component has chart radius >= {r}"),
        })?;
        let excluded: Vec<usize> = (0..space.component_range(first).start).collect();
        let resolved = schedule.resolve(&decomp, &excluded);
        let carried = (0..space.len()).any(|x| resolved.region[x] && fce.scales[space.component_of(x)] >= r);
        if !carried {
            return Err(Error::Infeasible {
                n,
                reason: format!("no component with chart radius >= {r} lies beyond annulus {}", resolved.o),
            });
        }
        region.iter_mut().zip(&resolved.region).for_each(|(a, &b)| *a = *a && b);
        rows.push(ScheduleRow {
            n,
            schedule,
            m_r: resolved.m_r,
            o: resolved.o,
            d_size: resolved.d_size,
            region_size: resolved.region.iter().filter(|&&b| b).count(),
        });
    }
    let partition = partition_of_unity(&decomp, space, &region)?;

    let mut pairs = Vec::new();
    let mut distances = Vec::new();
    let mut chart = Vec::new();
    for x in (0..space.len()).filter(|&x| region[x]) {
        let l = fce.scales[space.component_of(x)];
        for (y, d) in space.within(x, Dist::from(l)) {
            if y < x || !region[y] || space.component_of(y) != space.component_of(x) {
                continue;
            }
            let k = fce.chart_sq_dist(x, x, y).ok_or(Error::MissingChart { center: x, member: y })?;
            pairs.push((x, y));
            distances.push(d as u64);
            chart.push(k.to_f64());
        }
    }
    let mut terms = vec![vec![0.0; pairs.len()]; n_max];
    let mut uncovered = 0;
    for (p, &(x, y)) in pairs.iter().enumerate() {
        let mut covered = true;
        for (n, row) in rows.iter().enumerate() {
            let f = glued_value(&partition, x, y, row.schedule.t, |_| Ok(chart[p]))?;
            covered &= f.is_some();
            // F_n <= 1 by Cauchy-Schwarz; clamp away the rounding excess.
            terms[n][p] = 1.0 - f.unwrap_or(0.0).min(1.0);
        }
        if !covered {
            uncovered += 1;
        }
    }
    let values = (0..pairs.len()).map(|p| terms.iter().map(|t| t[p]).sum()).collect();
    Ok(ProperFunctionApprox {
        n_max,
        rows,
        region,
        lebesgue: partition.lebesgue(),
        pairs,
        distances,
        terms,
        values,
        uncovered,
    })
}

/// Envelope of `k` over pairs at one distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub d: u64,
    pub count: usize,
    pub shell_min: f64,
    pub shell_max: f64,
    pub tau_minus: f64,
    pub tau_plus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropernessReport {
    pub shells: Vec<Shell>,
    /// `S_N` for `N = 1..=N_max`; `None` if no observed shell qualifies.
    pub thresholds: Vec<Option<u64>>,
    /// Every shell maximum is at most `d + 1`.
    pub upper_holds: bool,
    /// Every shell minimum is at least `tau_-(d)`.
    pub lower_holds: bool,
    /// Shell minima are non-decreasing in `d`.
    pub lower_monotone: bool,
    /// `1 - F_n <= 2^-n` on pairs with `d <= n`, for every `n`.
    pub variation_holds: bool,
    pub worst_variation: f64,
}

impl PropernessReport {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds && self.lower_monotone && self.variation_holds
    }

    /// `(N, S_N)` pairs at which `k >= N/2` is certified.
    pub fn certified(&self) -> Vec<(usize, u64)> {
        self.thresholds
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i + 1, s)))
            .collect()
    }
}

/// `h_n(s) = exp(-t_n max(rho_-(s), 0)^2)`.
pub fn decay_profile(t: f64, rho_minus: &Control, s: f64) -> f64 {
    (-t * rho_minus.squared(s)).exp()
}

/// Shell envelopes of `k` against `tau_+(d) = d + 1` and
/// `tau_-(d) = max{N : d >= S_N} / 2`, where `S_N` is the least observed
/// shell with `h_n(S_N) < 1/2` for all `n <= N`.
pub fn verify_properness(approx: &ProperFunctionApprox, controls: &ControlFunctions) -> PropernessReport {
    let mut by_d: BTreeMap<u64, (usize, f64, f64)> = BTreeMap::new();
    for (p, &d) in approx.distances.iter().enumerate() {
        let v = approx.values[p];
        let e = by_d.entry(d).or_insert((0, f64::INFINITY, f64::NEG_INFINITY));
        e.0 += 1;
        e.1 = e.1.min(v);
        e.2 = e.2.max(v);
    }
    let observed: Vec<u64> = by_d.keys().copied().collect();
    let thresholds: Vec<Option<u64>> = (1..=approx.n_max)
        .map(|big_n| {
            observed.iter().copied().find(|&s| {
                (1..=big_n).all(|n| decay_profile(approx.t(n), &controls.rho_minus, s as f64) < 0.5)
            })
        })
        .collect();
    let tau_minus = |d: u64| -> f64 {
        thresholds
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some_and(|s| d >= s))
            .map(|(i, _)| (i + 1) as f64 / 2.0)
            .fold(0.0, f64::max)
    };
    let shells: Vec<Shell> = by_d
        .iter()
        .map(|(&d, &(count, lo, hi))| Shell {
            d,
            count,
            shell_min: lo,
            shell_max: hi,
            tau_minus: tau_minus(d),
            tau_plus: d as f64 + 1.0,
        })
        .collect();
    let upper_holds = shells.iter().all(|s| s.shell_max <= s.tau_plus + ROUNDOFF);
    let lower_holds = shells.iter().all(|s| s.shell_min >= s.tau_minus - ROUNDOFF);
    let lower_monotone = shells.windows(2).all(|w| w[1].shell_min >= w[0].shell_min - ROUNDOFF);

    let mut worst: f64 = 0.0;
    let mut variation_holds = true;
    for (i, term) in approx.terms.iter().enumerate() {
        let n = (i + 1) as u64;
        let eps = 0.5f64.powi(n as i32);
        for (p, &d) in approx.distances.iter().enumerate() {
            if d <= n {
                worst = worst.max(term[p] / eps);
                if term[p] > eps {
                    variation_holds = false;
                }
            }
        }
    }
    PropernessReport {
        shells,
        thresholds,
        upper_holds,
        lower_holds,
        lower_monotone,
        variation_holds,
        worst_variation: worst,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallTypeReport {
    pub holds: bool,
    pub tuples: usize,
    pub forms: usize,
    /// Largest quadratic form over unit sum-zero coefficient vectors
    /// (`-inf` before any form is evaluated).
    pub max_form: f64,
}

/// Sample tuples inside balls `B_{l/2}(c)` whose full ball `B_l(c)` lies in
/// the region, and test `sum sigma_i sigma_j k(x_i, x_j) <= tol` for random
/// unit sum-zero `sigma`.
pub fn negative_type_on_balls<T: Scalar>(
    approx: &ProperFunctionApprox,
    space: &CoarseUnion,
    fce: &FibredEmbedding<T>,
    tuple_budget: usize,
    sigmas_per_tuple: usize,
    tol: f64,
    seed: u64,
) -> BallTypeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<usize> = (0..space.len())
        .filter(|&c| {
            let l = fce.scales[space.component_of(c)];
            l >= 2
                && approx.region[c]
                && space.within(c, Dist::from(l)).iter().all(|&(y, _)| approx.region[y])
        })
        .collect();
    let mut report = BallTypeReport {
        holds: true,
        tuples: 0,
        forms: 0,
        max_form: f64::NEG_INFINITY,
    };
    if centres.is_empty() {
        return report;
    }
    for _ in 0..tuple_budget {
        let c = centres[rng.gen_range(0..centres.len())];
        let half = fce.scales[space.component_of(c)] / 2;
        let mut ball: Vec<usize> = space.within(c, Dist::from(half)).into_iter().map(|(y, _)| y).collect();
        let size = rng.gen_range(1..=ball.len().min(8));
        for i in 0..size {
            let j = rng.gen_range(i..ball.len());
            ball.swap(i, j);
        }
        let tuple = &ball[..size];
        let Some(k) = tuple_matrix(approx, tuple) else {
            report.holds = false;
            continue;
        };
        report.tuples += 1;
        for _ in 0..sigmas_per_tuple {
            let sigma = random_sum_zero(&mut rng, size);
            let mut q = 0.0;
            for a in 0..size {
                for b in 0..size {
                    q += sigma[a] * sigma[b] * k[a * size + b];
                }
            }
            report.forms += 1;
            report.max_form = report.max_form.max(q);
            if q > tol {
                report.holds = false;
            }
        }
    }
    report
}

fn tuple_matrix(approx: &ProperFunctionApprox, tuple: &[usize]) -> Option<Vec<f64>> {
    let m = tuple.len();
    let mut k = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            k[a * m + b] = approx.value(tuple[a], tuple[b])?;
        }
    }
    Some(k)
}

/// A uniformly drawn coefficient vector projected to sum zero and scaled to
/// unit length (zero for a single point).
pub fn random_sum_zero(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = v.iter().sum::<f64>() / m as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}
