//! Kernel calculus on finite point sets.
//!
//! A [`Kernel`] stores one value per unordered pair `x <= y` of its support.
//! Eigenvalue tests densify the kernel on the points it mentions; everything
//! else works on the sparse support.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::metric_space::{Dist, Metric};
use crate::scalar::{Real, Scalar};

/// Default relative tolerance of the eigenvalue tests.
pub const DEFAULT_TOL: f64 = 1e-8;

/// A symmetric kernel on a set of unordered pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T> {
    n: usize,
    entries: Vec<((usize, usize), T)>,
}

impl<T: Scalar> Kernel<T> {
    /// Kernel on a space of `n` points from `(x, y, value)` triples. Either
    /// orientation may be given; repeated pairs must agree.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let mut entries: Vec<((usize, usize), T)> = Vec::new();
        for (x, y, v) in pairs {
            for w in [x, y] {
                if w >= n {
                    return Err(Error::VertexOutOfRange { vertex: w, n });
                }
            }
            entries.push(((x.min(y), x.max(y)), v));
        }
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<((usize, usize), T)> = Vec::with_capacity(entries.len());
        for (key, v) in entries {
            match out.last() {
                Some((k, w)) if *k == key => {
                    if *w != v {
                        return input(format!("asymmetric values {w} and {v} at {key:?}"));
                    }
                }
                _ => out.push((key, v)),
            }
        }
        Ok(Self { n, entries: out })
    }

    /// Full-square kernel on `points` of an `n`-point space.
    pub fn from_fn(n: usize, points: &[usize], mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut triples = Vec::with_capacity(points.len() * (points.len() + 1) / 2);
        for (i, &x) in points.iter().enumerate() {
            for &y in &points[i..] {
                triples.push((x, y, f(x, y)));
            }
        }
        Self::from_pairs(n, triples)
    }

    /// Full-square kernel from a symmetric matrix (the upper triangle is read).
    pub fn dense(matrix: &[Vec<T>]) -> Result<Self> {
        let n = matrix.len();
        if matrix.iter().any(|r| r.len() != n) {
            return input("kernel matrix must be square");
        }
        let points: Vec<usize> = (0..n).collect();
        Self::from_fn(n, &points, |x, y| matrix[x][y])
    }

    /// Build from entries already sorted by `(x, y)` with `x <= y` and no
    /// duplicates.
    pub(crate) fn from_sorted(n: usize, entries: Vec<((usize, usize), T)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|((x, y), _)| x <= y && *y < n));
        Self { n, entries }
    }

    /// Size of the ambient space.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored unordered pairs.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> Option<T> {
        let key = (x.min(y), x.max(y));
        self.entries
            .binary_search_by(|(k, _)| k.cmp(&key))
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Stored entries, sorted, `x <= y`.
    pub fn entries(&self) -> &[((usize, usize), T)] {
        &self.entries
    }

    /// Sorted points that occur in the support.
    pub fn points(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.entries.iter().flat_map(|((x, y), _)| [*x, *y]).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    pub fn map<U: Scalar>(&self, mut f: impl FnMut(T) -> U) -> Kernel<U> {
        Kernel {
            n: self.n,
            entries: self.entries.iter().map(|&(k, v)| (k, f(v))).collect(),
        }
    }

    /// Keep the pairs with both points flagged in `keep`.
    pub fn restrict(&self, keep: &[bool]) -> Self {
        Self {
            n: self.n,
            entries: self
                .entries
                .iter()
                .filter(|((x, y), _)| keep[*x] && keep[*y])
                .copied()
                .collect(),
        }
    }

    /// Restriction to `points`, which must span a full square of the support.
    pub fn restrict_to(&self, points: &[usize]) -> Result<Self> {
        let mut triples = Vec::new();
        for (i, &x) in points.iter().enumerate() {
            for &y in &points[i..] {
                let v = self.get(x, y).ok_or(Error::MissingPair(x, y))?;
                triples.push((x, y, v));
            }
        }
        Self::from_pairs(self.n, triples)
    }

    /// Dense matrix on `points` (row/column `i` is `points[i]`).
    pub fn matrix_on(&self, points: &[usize]) -> Result<DMatrix<T>>
    where
        T: nalgebra::Scalar,
    {
        let m = points.len();
        let mut out = DMatrix::from_element(m, m, T::zero());
        for i in 0..m {
            for j in i..m {
                let v = self.get(points[i], points[j]).ok_or(Error::MissingPair(points[i], points[j]))?;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }

    /// Dense matrix on all support points, with the point order.
    pub fn to_matrix(&self) -> Result<(Vec<usize>, DMatrix<T>)>
    where
        T: nalgebra::Scalar,
    {
        let points = self.points();
        let m = self.matrix_on(&points)?;
        Ok((points, m))
    }
}

/// Outcome of a negative-type or positive-type test.
#[derive(Clone, Debug)]
pub struct TypeTest<R> {
    pub holds: bool,
    /// Largest eigenvalue of the centred matrix (negative type) or smallest
    /// eigenvalue of the matrix (positive type).
    pub eigenvalue: R,
    pub threshold: R,
    pub points: Vec<usize>,
    /// A unit coefficient vector realising the extreme eigenvalue, on failure.
    pub witness: Option<Vec<R>>,
    /// The quadratic form at the witness.
    pub witness_value: Option<R>,
}

fn frobenius<R: Real>(m: &DMatrix<R>) -> R {
    m.iter().fold(R::zero(), |acc, &v| acc + v * v).sqrt()
}

/// Decide whether `kernel` is of negative type on its support points:
/// `sum sigma_i sigma_j k(x_i, x_j) <= 0` whenever `sum sigma_i = 0`.
///
/// The test compares the top eigenvalue of `P K P` (`P` the projection onto
/// sum-zero vectors) with `tol * ||K||_F`.
pub fn is_negative_type<R: Real>(kernel: &Kernel<R>, tol: R) -> Result<TypeTest<R>> {
    let (points, k) = kernel.to_matrix()?;
    let m = points.len();
    if m == 0 {
        return Ok(vacuous(points));
    }
    let centred = centre(&k);
    let eig = SymmetricEigen::new(centred);
    let (idx, top) = extreme(&eig.eigenvalues, |a, b| a > b);
    let threshold = tol * frobenius(&k);
    let holds = top <= threshold;
    let (witness, witness_value) = if holds {
        (None, None)
    } else {
        let mut v: Vec<R> = eig.eigenvectors.column(idx).iter().copied().collect();
        let mean = v.iter().fold(R::zero(), |a, &b| a + b) / R::of(m as f64);
        v.iter_mut().for_each(|x| *x -= mean);
        let value = quadratic_form_dense(&k, &v);
        (Some(v), Some(value))
    };
    Ok(TypeTest {
        holds,
        eigenvalue: top,
        threshold,
        points,
        witness,
        witness_value,
    })
}

/// Decide whether `kernel` is of positive type: smallest eigenvalue at least
/// `-tol * ||K||_F`.
pub fn is_positive_type<R: Real>(kernel: &Kernel<R>, tol: R) -> Result<TypeTest<R>> {
    let (points, k) = kernel.to_matrix()?;
    if points.is_empty() {
        return Ok(vacuous(points));
    }
    let threshold = tol * frobenius(&k);
    let eig = SymmetricEigen::new(k.clone());
    let (idx, low) = extreme(&eig.eigenvalues, |a, b| a < b);
    let holds = low >= -threshold;
    let (witness, witness_value) = if holds {
        (None, None)
    } else {
        let v: Vec<R> = eig.eigenvectors.column(idx).iter().copied().collect();
        let value = quadratic_form_dense(&k, &v);
        (Some(v), Some(value))
    };
    Ok(TypeTest {
        holds,
        eigenvalue: low,
        threshold,
        points,
        witness,
        witness_value,
    })
}

fn vacuous<R: Real>(points: Vec<usize>) -> TypeTest<R> {
    TypeTest {
        holds: true,
        eigenvalue: R::zero(),
        threshold: R::zero(),
        points,
        witness: None,
        witness_value: None,
    }
}

fn extreme<R: Real>(values: &nalgebra::DVector<R>, better: impl Fn(R, R) -> bool) -> (usize, R) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate() {
        if better(v, best.1) {
            best = (i, v);
        }
    }
    best
}

/// `J K J` with `J = I - 11^T / n`.
fn centre<R: Real>(k: &DMatrix<R>) -> DMatrix<R> {
    let m = k.nrows();
    let mf = R::of(m as f64);
    let row_means: Vec<R> = (0..m).map(|i| k.row(i).sum() / mf).collect();
    let col_means: Vec<R> = (0..m).map(|j| k.column(j).sum() / mf).collect();
    let total = row_means.iter().fold(R::zero(), |a, &b| a + b) / mf;
    DMatrix::from_fn(m, m, |i, j| k[(i, j)] - row_means[i] - col_means[j] + total)
}

fn quadratic_form_dense<R: Real>(k: &DMatrix<R>, sigma: &[R]) -> R {
    let mut acc = R::zero();
    for i in 0..sigma.len() {
        for j in 0..sigma.len() {
            acc += sigma[i] * sigma[j] * k[(i, j)];
        }
    }
    acc
}

/// `sum_ij sigma_i sigma_j k(points_i, points_j)`.
pub fn quadratic_form<T: Scalar>(kernel: &Kernel<T>, points: &[usize], sigma: &[T]) -> Result<T> {
    if points.len() != sigma.len() {
        return input("one coefficient per point required");
    }
    let mut acc = T::zero();
    for (i, &x) in points.iter().enumerate() {
        for (j, &y) in points.iter().enumerate() {
            let v = kernel.get(x, y).ok_or(Error::MissingPair(x, y))?;
            acc = acc + sigma[i] * sigma[j] * v;
        }
    }
    Ok(acc)
}

/// Pointwise `exp(-t k)` on the same support.
pub fn schoenberg<R: Real>(kernel: &Kernel<R>, t: R) -> Result<Kernel<R>> {
    if t < R::zero() {
        return input(format!("Schoenberg parameter must be nonnegative, got {t}"));
    }
    Ok(kernel.map(|v| (-(t * v)).exp()))
}

/// Points of a finite set realised in Euclidean space.
#[derive(Clone, Debug)]
pub struct Embedding<R> {
    pub points: Vec<usize>,
    pub dim: usize,
    /// `vectors[i]` is the image of `points[i]`.
    pub vectors: Vec<Vec<R>>,
}

impl<R: Real> Embedding<R> {
    pub fn sq_dist(&self, i: usize, j: usize) -> R {
        self.vectors[i]
            .iter()
            .zip(&self.vectors[j])
            .fold(R::zero(), |a, (&u, &v)| a + (u - v) * (u - v))
    }

    pub fn index_of(&self, x: usize) -> Option<usize> {
        self.points.binary_search(&x).ok()
    }

    /// Largest `| ||f(x) - f(y)||^2 - k(x,y) | / max(1, k(x,y))`.
    pub fn relative_residual(&self, kernel: &Kernel<R>) -> Result<R> {
        let mut worst = R::zero();
        for i in 0..self.points.len() {
            for j in i..self.points.len() {
                let (x, y) = (self.points[i], self.points[j]);
                let k = kernel.get(x, y).ok_or(Error::MissingPair(x, y))?;
                let scale = if k > R::one() { k } else { R::one() };
                let r = (self.sq_dist(i, j) - k).magnitude() / scale;
                if r > worst {
                    worst = r;
                }
            }
        }
        Ok(worst)
    }
}

/// Realise a negative-type kernel as squared Euclidean distances by factoring
/// the centred Gram matrix `-1/2 J K J`. Eigenvalues within `tol * ||K||_F`
/// of zero are dropped; a more negative one is an error.
pub fn embed<R: Real>(kernel: &Kernel<R>, tol: R) -> Result<Embedding<R>> {
    let (points, k) = kernel.to_matrix()?;
    let m = points.len();
    if m == 0 {
        return Ok(Embedding { points, dim: 0, vectors: Vec::new() });
    }
    let gram = centre(&k) * R::of(-0.5);
    let threshold = tol * frobenius(&k);
    let eig = SymmetricEigen::new(gram);
    let mut kept = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -threshold {
            return Err(Error::NotNegativeType {
                eigenvalue: lambda.to_f64(),
                tolerance: threshold.to_f64(),
            });
        }
        if lambda > threshold {
            kept.push(i);
        }
    }
    let vectors = (0..m)
        .map(|row| {
            kept.iter()
                .map(|&c| eig.eigenvectors[(row, c)] * eig.eigenvalues[c].sqrt())
                .collect()
        })
        .collect();
    Ok(Embedding {
        points,
        dim: kept.len(),
        vectors,
    })
}

/// How a tabulated control is read between observed distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// Value at the largest observed distance `<= r` (upper envelopes).
    Floor,
    /// Value at the smallest observed distance `>= r` (lower envelopes).
    Ceil,
}

/// A non-decreasing control function `[0, inf) -> R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Control {
    /// `r`
    Linear,
    /// `sqrt(r)`
    Sqrt,
    /// Step function on observed distances.
    Tabulated { r: Vec<f64>, values: Vec<f64>, rule: StepRule },
}

impl Control {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Control::Linear => r,
            Control::Sqrt => r.max(0.0).sqrt(),
            Control::Tabulated { r: rs, values, rule } => {
                if rs.is_empty() {
                    return 0.0;
                }
                match rule {
                    StepRule::Floor => match rs.partition_point(|&s| s <= r) {
                        0 => values[0].min(0.0),
                        i => values[i - 1],
                    },
                    StepRule::Ceil => {
                        let i = rs.partition_point(|&s| s < r);
                        if i == rs.len() {
                            f64::INFINITY
                        } else {
                            values[i]
                        }
                    }
                }
            }
        }
    }

    /// `max(eval(r), 0)^2`, computed exactly for the closed forms.
    pub fn squared(&self, r: f64) -> f64 {
        match self {
            Control::Linear => r * r,
            Control::Sqrt => r.max(0.0),
            other => {
                let v = other.eval(r).max(0.0);
                v * v
            }
        }
    }
}

/// Lower and upper controls `rho_-`, `rho_+`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlFunctions {
    pub rho_minus: Control,
    pub rho_plus: Control,
}

impl ControlFunctions {
    pub fn linear() -> Self {
        Self {
            rho_minus: Control::Linear,
            rho_plus: Control::Linear,
        }
    }

    pub fn sqrt() -> Self {
        Self {
            rho_minus: Control::Sqrt,
            rho_plus: Control::Sqrt,
        }
    }
}

/// Empirical envelopes at each observed distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelopes {
    pub r: Vec<f64>,
    pub rho_minus: Vec<f64>,
    pub rho_plus: Vec<f64>,
}

impl Envelopes {
    pub fn into_controls(self) -> ControlFunctions {
        ControlFunctions {
            rho_minus: Control::Tabulated {
                r: self.r.clone(),
                values: self.rho_minus,
                rule: StepRule::Ceil,
            },
            rho_plus: Control::Tabulated {
                r: self.r,
                values: self.rho_plus,
                rule: StepRule::Floor,
            },
        }
    }

    /// Largest violation of `lower(r) <= rho_-(r)` and `rho_+(r) <= upper(r)`
    /// over the observed distances.
    pub fn excess_over(&self, controls: &ControlFunctions) -> f64 {
        self.r
            .iter()
            .zip(self.rho_minus.iter().zip(&self.rho_plus))
            .map(|(&r, (&lo, &hi))| {
                let below = controls.rho_minus.eval(r) - lo;
                let above = hi - controls.rho_plus.eval(r);
                below.max(above).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

/// `rho_+(r)` = max of `value` over pairs with `d <= r`; `rho_-(r)` = min over
/// pairs with `d >= r`; tabulated at every observed distance.
pub fn control_envelopes(samples: &[(Dist, f64)]) -> Result<Envelopes> {
    if samples.is_empty() {
        return input("control envelopes need at least one pair");
    }
    let mut by_d: BTreeMap<Dist, (f64, f64)> = BTreeMap::new();
    for &(d, v) in samples {
        let e = by_d.entry(d).or_insert((v, v));
        e.0 = e.0.min(v);
        e.1 = e.1.max(v);
    }
    let r: Vec<f64> = by_d.keys().map(|&d| d as f64).collect();
    let mut rho_plus = Vec::with_capacity(r.len());
    let mut acc = f64::NEG_INFINITY;
    for &(_, hi) in by_d.values() {
        acc = acc.max(hi);
        rho_plus.push(acc);
    }
    let mut rho_minus = vec![0.0; r.len()];
    let mut acc = f64::INFINITY;
    for (i, (_, &(lo, _))) in by_d.iter().enumerate().rev() {
        acc = acc.min(lo);
        rho_minus[i] = acc;
    }
    Ok(Envelopes { r, rho_minus, rho_plus })
}

/// Envelopes of `||f(x) - f(y)||` for an embedding, over all its pairs.
pub fn envelopes_of_embedding<R: Real, M: Metric + ?Sized>(space: &M, e: &Embedding<R>) -> Result<Envelopes> {
    let mut samples = Vec::new();
    for i in 0..e.points.len() {
        for j in i..e.points.len() {
            if let Some(d) = space.dist(e.points[i], e.points[j]) {
                samples.push((d, e.sq_dist(i, j).to_f64().max(0.0).sqrt()));
            }
        }
    }
    control_envelopes(&samples)
}

/// Envelopes of `sqrt(k(x, y))` for a negative-type kernel.
pub fn envelopes_of_kernel<T: Scalar, M: Metric + ?Sized>(space: &M, kernel: &Kernel<T>) -> Result<Envelopes> {
    let samples: Vec<(Dist, f64)> = kernel
        .entries()
        .iter()
        .filter_map(|&((x, y), v)| space.dist(x, y).map(|d| (d, v.to_f64().max(0.0).sqrt())))
        .collect();
    control_envelopes(&samples)
}

/// Result of an `(R, eps)`-variation check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub holds: bool,
    pub pairs_checked: usize,
    /// Largest `|1 - k(x, y)|` seen.
    pub worst: f64,
    pub worst_pair: Option<(usize, usize)>,
}

/// `|1 - k(x, y)| <= eps` for every pair of `region` with `d(x, y) <= r`.
/// Every such pair must carry a value.
pub fn has_variation<T: Scalar, M: Metric + ?Sized>(
    kernel: &Kernel<T>,
    space: &M,
    r: Dist,
    eps: f64,
    region: &[bool],
) -> Result<VariationReport> {
    let mut pairs = Vec::new();
    for x in (0..space.len()).filter(|&x| region[x]) {
        for (y, _) in space.within(x, r) {
            if y >= x && region[y] {
                pairs.push((x, y));
            }
        }
    }
    variation_on_pairs(kernel, &pairs, eps, |x, y| Err(Error::MissingPair(x, y)))
}

/// Variation over an explicit pair list; `missing` decides what happens when a
/// pair has no value (error, or `Ok(None)` to skip it).
pub fn variation_on_pairs<T: Scalar>(
    kernel: &Kernel<T>,
    pairs: &[(usize, usize)],
    eps: f64,
    mut missing: impl FnMut(usize, usize) -> Result<Option<T>>,
) -> Result<VariationReport> {
    let mut report = VariationReport {
        holds: true,
        pairs_checked: 0,
        worst: 0.0,
        worst_pair: None,
    };
    for &(x, y) in pairs {
        let v = match kernel.get(x, y) {
            Some(v) => v,
            None => match missing(x, y)? {
                Some(v) => v,
                None => continue,
            },
        };
        report.pairs_checked += 1;
        let dev = (1.0 - v.to_f64()).abs();
        if dev > report.worst || report.worst_pair.is_none() {
            report.worst = dev;
            report.worst_pair = Some((x, y));
        }
        if dev > eps {
            report.holds = false;
        }
    }
    Ok(report)
}

/// The kernel of one scale together with its excluded set.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleEntry<T> {
    pub kernel: Kernel<T>,
    /// `K_R`, sorted.
    pub excluded: Vec<usize>,
    /// `i_R`: first component carrying the scale.
    pub first_component: usize,
}

/// Kernels indexed by scale `R`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScaleFamily<T> {
    scales: BTreeMap<u64, ScaleEntry<T>>,
}

impl<T: Scalar> ScaleFamily<T> {
    pub fn new() -> Self {
        Self { scales: BTreeMap::new() }
    }

    pub fn insert(&mut self, r: u64, entry: ScaleEntry<T>) {
        self.scales.insert(r, entry);
    }

    pub fn get(&self, r: u64) -> Option<&ScaleEntry<T>> {
        self.scales.get(&r)
    }

    pub fn get_mut(&mut self, r: u64) -> Option<&mut ScaleEntry<T>> {
        self.scales.get_mut(&r)
    }

    pub fn scales(&self) -> Vec<u64> {
        self.scales.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &ScaleEntry<T>)> {
        self.scales.iter().map(|(&r, e)| (r, e))
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn map<U: Scalar>(&self, mut f: impl FnMut(T) -> U) -> ScaleFamily<U> {
        ScaleFamily {
            scales: self
                .scales
                .iter()
                .map(|(&r, e)| {
                    (
                        r,
                        ScaleEntry {
                            kernel: e.kernel.map(&mut f),
                            excluded: e.excluded.clone(),
                            first_component: e.first_component,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Restrict every kernel to pairs inside `keep`.
    pub fn restrict(&self, keep: &[bool]) -> Self {
        Self {
            scales: self
                .scales
                .iter()
                .map(|(&r, e)| {
                    (
                        r,
                        ScaleEntry {
                            kernel: e.kernel.restrict(keep),
                            excluded: e.excluded.clone(),
                            first_component: e.first_component,
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Scale-independence verdict, with the first disagreement found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleIndependence {
    pub holds: bool,
    pub overlaps_checked: usize,
    /// `(R, S, (x, y))` with `R < S`.
    pub violation: Option<(u64, u64, (usize, usize))>,
}

/// `k_R = k_S` on the common support for every stored `R < S`, compared with
/// exact equality.
pub fn check_scale_independence<T: Scalar>(family: &ScaleFamily<T>) -> ScaleIndependence {
    let scales: Vec<(u64, &ScaleEntry<T>)> = family.iter().collect();
    let mut checked = 0;
    for (a, &(r, er)) in scales.iter().enumerate() {
        for &(s, es) in &scales[a + 1..] {
            for &((x, y), v) in er.kernel.entries() {
                if let Some(w) = es.kernel.get(x, y) {
                    checked += 1;
                    if !same_value(v, w) {
                        return ScaleIndependence {
                            holds: false,
                            overlaps_checked: checked,
                            violation: Some((r, s, (x, y))),
                        };
                    }
                }
            }
        }
    }
    ScaleIndependence {
        holds: true,
        overlaps_checked: checked,
        violation: None,
    }
}

fn same_value<T: Scalar>(a: T, b: T) -> bool {
    // Bitwise for floats: also separates 0.0 from -0.0.
    a == b && a.to_f64().to_bits() == b.to_f64().to_bits()
}
