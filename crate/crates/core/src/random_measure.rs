//! Rescaled per-point measures, their point-mass surrogates, integration of
//! test functions, and the three add-one costs.
//!
//! Two built-in functional shapes are supported: the Voronoi cell measure
//! (a Lebesgue restriction, rescaled by homogeneity) and quadratic
//! k-nearest-neighbour scores (point masses), in unmarked and marked
//! variants. Both are translation invariant, so rescaling reduces to a
//! scalar factor; the literal dilation path is kept alongside for
//! cross-checking.

use std::fmt;
use std::sync::Arc;

use crate::error::Error;
use crate::geometry::{voronoi_intervals_exact_1d, KnnIndex, Neighbor, RegionSpec};
use crate::point_process::{rescale, MarkedPoint, Point, PointSet, StreamRng};
use crate::Result;

/// Gradient oracle for a smooth function on `R^d`.
pub type GradOracle = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Shared scalar function of a location, used by [`TestFunction`].
pub type ScalarOracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Which structural assumption a functional satisfies: point masses at the
/// carrier point (A1) or a Lebesgue restriction with bounded density (A2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionClass {
    A1,
    A2,
}

/// A per-point functional shape.
#[derive(Clone)]
pub enum Functional {
    /// Lebesgue measure restricted to the point's Voronoi cell (A2,
    /// density bound 1 before rescaling).
    VoronoiVolume,
    /// Point mass at `x` with weight `(grad h(x) . (N_k(x) - x))^2`,
    /// rescaled (A1).
    KnnQuadratic { grad_h: GradOracle, k: usize },
    /// Marked variant: the mark difference to the k-th neighbour enters the
    /// square (A1).
    KnnQuadraticMarked { grad_h: GradOracle, k: usize },
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::VoronoiVolume => write!(f, "VoronoiVolume"),
            Functional::KnnQuadratic { k, .. } => write!(f, "KnnQuadratic(k={k})"),
            Functional::KnnQuadraticMarked { k, .. } => write!(f, "KnnQuadraticMarked(k={k})"),
        }
    }
}

impl Functional {
    pub fn assumption_class(&self) -> AssumptionClass {
        match self {
            Functional::VoronoiVolume => AssumptionClass::A2,
            _ => AssumptionClass::A1,
        }
    }

    /// Radon–Nikodym bound of the unrescaled measure, where applicable.
    pub fn density_bound(&self) -> Option<f64> {
        match self {
            Functional::VoronoiVolume => Some(1.0),
            _ => None,
        }
    }
}

/// The value of a rescaled per-point measure.
#[derive(Debug, Clone)]
pub enum MeasureValue {
    PointMass {
        location: Point,
        weight: f64,
    },
    /// `scale * Lebesgue` restricted to the cell of `nucleus` in the
    /// configuration, intersected with `omega`.
    CellRestriction {
        nucleus: usize,
        points: PointSet,
        omega: RegionSpec,
        scale: f64,
    },
}

impl MeasureValue {
    /// Total mass on the region: exact for point masses and in d = 1, Monte
    /// Carlo with `m` samples otherwise.
    pub fn total_mass(&self, m: usize, rng: &mut StreamRng) -> Result<f64> {
        match self {
            MeasureValue::PointMass { weight, .. } => Ok(*weight),
            MeasureValue::CellRestriction { nucleus, points, omega, scale } => {
                if points.dim() == 1 {
                    if let Some((lo, hi)) = omega.as_box() {
                        let cells = voronoi_intervals_exact_1d(points, (lo[0], hi[0]))?;
                        let (l, r) = cells[*nucleus];
                        return Ok(scale * (r - l).max(0.0));
                    }
                }
                let vol = omega.volume().ok_or(Error::UnknownVolume)?;
                let index = KnnIndex::build(points);
                let mut hits = 0usize;
                for _ in 0..m {
                    let z = omega.sample_uniform(rng);
                    if index.nearest_nucleus(&z)? == *nucleus {
                        hits += 1;
                    }
                }
                Ok(scale * vol * hits as f64 / m as f64)
            }
        }
    }
}

/// Regularity class of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuityClass {
    Indicator,
    Continuous,
    AeContinuous,
}

/// A bounded measurable test function on the region, extended by zero
/// outside it.
#[derive(Clone)]
pub struct TestFunction {
    oracle: ScalarOracle,
    sup_bound: f64,
    continuity_class: ContinuityClass,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("sup_bound", &self.sup_bound)
            .field("continuity_class", &self.continuity_class)
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        oracle: ScalarOracle,
        sup_bound: f64,
        continuity_class: ContinuityClass,
    ) -> Self {
        assert!(sup_bound >= 0.0);
        TestFunction { oracle, sup_bound, continuity_class }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Arc::new(move |_: &[f64]| c), c.abs(), ContinuityClass::Continuous)
    }

    pub fn indicator(region: RegionSpec) -> Self {
        Self::new(
            Arc::new(move |x: &[f64]| if region.contains(x) { 1.0 } else { 0.0 }),
            1.0,
            ContinuityClass::Indicator,
        )
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = (self.oracle)(x);
        debug_assert!(v.abs() <= self.sup_bound + 1e-12, "test function exceeds its sup bound");
        v
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn continuity_class(&self) -> ContinuityClass {
        self.continuity_class
    }
}

/// Locate `x` in `points` by exact coordinate (and mark) equality, adjoining
/// it when absent. Returns the working configuration and the index of `x`.
fn with_point(x: &MarkedPoint, points: &PointSet) -> (PointSet, usize) {
    let key = |p: &MarkedPoint| {
        (
            p.location.coords().iter().map(|c| c.to_bits()).collect::<Vec<_>>(),
            p.mark.map(f64::to_bits),
        )
    };
    let xk = key(x);
    for (i, p) in points.iter().enumerate() {
        if key(p) == xk {
            return (points.clone(), i);
        }
    }
    (points.adjoin(x.clone()), points.len())
}

/// k-th nearest neighbour of point `i`, with the self-sentinel mapped back
/// to the point itself (zero displacement, zero mark difference).
fn kth_neighbor(index: &KnnIndex, points: &PointSet, i: usize, k: usize) -> (Vec<f64>, f64) {
    let nbrs = index.knn(points.location(i), k, Some(i));
    match nbrs[k - 1] {
        Neighbor::Point(j) => (points.location(j).to_vec(), points.mark(j).unwrap_or(0.0)),
        Neighbor::Query => (points.location(i).to_vec(), points.mark(i).unwrap_or(0.0)),
    }
}

fn knn_weight(
    xi: &Functional,
    points: &PointSet,
    index: &KnnIndex,
    i: usize,
    lambda: f64,
    omega: &RegionSpec,
) -> f64 {
    let d = points.dim() as f64;
    let x = points.location(i);
    if !omega.contains(x) {
        return 0.0;
    }
    match xi {
        Functional::KnnQuadratic { grad_h, k } => {
            let (n, _) = kth_neighbor(index, points, i, *k);
            let g = grad_h(x);
            let dot: f64 = g.iter().zip(&n).zip(x).map(|((gi, ni), xi)| gi * (ni - xi)).sum();
            lambda.powf(2.0 / d) * dot * dot
        }
        Functional::KnnQuadraticMarked { grad_h, k } => {
            let (n, tn) = kth_neighbor(index, points, i, *k);
            let g = grad_h(x);
            let dot: f64 = g.iter().zip(&n).zip(x).map(|((gi, ni), xi)| gi * (ni - xi)).sum();
            let dt = tn - points.mark(i).unwrap_or(0.0);
            let s = lambda.powf(1.0 / d) * dot + dt;
            s * s
        }
        Functional::VoronoiVolume => unreachable!("A2 functional has no point-mass weight"),
    }
}

/// The rescaled measure of `x` in `points`, via the translation-invariance
/// shortcut: a scalar factor for the A1 kinds and `lambda * Lebesgue` on the
/// cell for the Voronoi kind.
pub fn xi_lambda(
    xi: &Functional,
    x: &MarkedPoint,
    points: &PointSet,
    lambda: f64,
    omega: &RegionSpec,
) -> MeasureValue {
    let (working, i) = with_point(x, points);
    match xi {
        Functional::VoronoiVolume => MeasureValue::CellRestriction {
            nucleus: i,
            points: working,
            omega: omega.clone(),
            scale: lambda,
        },
        _ => {
            let index = KnnIndex::build(&working);
            let weight = knn_weight(xi, &working, &index, i, lambda, omega);
            MeasureValue::PointMass { location: Point::new(working.location(i).to_vec()), weight }
        }
    }
}

/// The rescaled measure computed by literally dilating the configuration
/// about `x` by `lambda^{1/d}` and evaluating the unrescaled functional.
/// Kept as an independent path for testing equality with [`xi_lambda`]; the
/// Voronoi branch requires an axis-box region (its dilated image must again
/// be a region).
pub fn xi_lambda_via_dilation(
    xi: &Functional,
    x: &MarkedPoint,
    points: &PointSet,
    lambda: f64,
    omega: &RegionSpec,
) -> Result<MeasureValue> {
    let (working, i) = with_point(x, points);
    let center = Point::new(working.location(i).to_vec());
    let dilated = rescale(&working, &center, lambda);
    match xi {
        Functional::VoronoiVolume => {
            let (lo, hi) = omega.as_box().ok_or(Error::NotABox)?;
            let d = working.dim() as f64;
            let f = lambda.powf(1.0 / d);
            let map = |v: &[f64]| -> Vec<f64> {
                v.iter().zip(center.coords()).map(|(c, xc)| xc + f * (c - xc)).collect()
            };
            let (mut dlo, mut dhi) = (map(&lo), map(&hi));
            for j in 0..dlo.len() {
                if dlo[j] > dhi[j] {
                    std::mem::swap(&mut dlo[j], &mut dhi[j]);
                }
            }
            Ok(MeasureValue::CellRestriction {
                nucleus: i,
                points: dilated,
                omega: RegionSpec::axis_box(dlo, dhi),
                scale: 1.0,
            })
        }
        _ => {
            // The unrescaled functional on the dilated configuration: the
            // neighbour order is preserved under dilation, so evaluate with
            // unit scale.
            let index = KnnIndex::build(&dilated);
            let weight = knn_weight(xi, &dilated, &index, i, 1.0, omega);
            Ok(MeasureValue::PointMass { location: center, weight })
        }
    }
}

/// Collapse a measure value onto a point mass at its carrier with the same
/// total mass on the region.
pub fn xi_star(mu: &MeasureValue, m: usize, rng: &mut StreamRng) -> Result<MeasureValue> {
    match mu {
        MeasureValue::PointMass { location, weight } => {
            Ok(MeasureValue::PointMass { location: location.clone(), weight: *weight })
        }
        MeasureValue::CellRestriction { nucleus, points, omega, .. } => {
            let loc = Point::new(points.location(*nucleus).to_vec());
            let weight = if omega.contains(loc.coords()) { mu.total_mass(m, rng)? } else { 0.0 };
            Ok(MeasureValue::PointMass { location: loc, weight })
        }
    }
}

/// `<f, mu>`: exact for point masses; Monte Carlo with `m` uniform samples
/// (unbiased) for cell restrictions.
pub fn integrate(f: &TestFunction, mu: &MeasureValue, m: usize, rng: &mut StreamRng) -> Result<f64> {
    match mu {
        MeasureValue::PointMass { location, weight } => Ok(f.eval(location.coords()) * weight),
        MeasureValue::CellRestriction { nucleus, points, omega, scale } => {
            let vol = omega.volume().ok_or(Error::UnknownVolume)?;
            let index = KnnIndex::build(points);
            let mut acc = 0.0;
            for _ in 0..m {
                let z = omega.sample_uniform(rng);
                if index.nearest_nucleus(&z)? == *nucleus {
                    acc += f.eval(&z);
                }
            }
            Ok(scale * vol * acc / m as f64)
        }
    }
}

/// `<f, nu_{lambda,n}>`: the sum of `<f, xi_lambda(X_i; X_n)>` over all
/// points, with one shared sample batch and one shared k-NN index across the
/// whole sum.
pub fn nu_total(
    f: &TestFunction,
    xi: &Functional,
    points: &PointSet,
    lambda: f64,
    omega: &RegionSpec,
    m: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let index = KnnIndex::build(points);
    match xi {
        Functional::VoronoiVolume => {
            let vol = omega.volume().ok_or(Error::UnknownVolume)?;
            let mut acc = 0.0;
            for _ in 0..m {
                let z = omega.sample_uniform(rng);
                // every sample lands in exactly one cell of the partition
                index.nearest_nucleus(&z)?;
                acc += f.eval(&z);
            }
            Ok(lambda * vol * acc / m as f64)
        }
        _ => Ok((0..points.len())
            .map(|i| {
                let w = knn_weight(xi, points, &index, i, lambda, omega);
                f.eval(points.location(i)) * w
            })
            .sum()),
    }
}

/// The three add-one costs of the last point of `points`.
#[derive(Debug, Clone, Copy)]
pub struct AddOneCosts {
    /// `<f, nu_{lambda,n} - nu_{lambda,n-1}>`.
    pub delta: f64,
    /// Change in the summed point-mass approximation error
    /// `G = sum_i |<f, xi_lambda - xi*_lambda>|`.
    pub delta_prime: f64,
    /// The dominating cost: the new point's own mass plus the total
    /// variation of every other point's measure change.
    pub delta_tilde: f64,
}

/// Add-one costs for the transition from the first `n-1` points to all `n`.
/// Voronoi evaluations share one sample batch across both configurations,
/// which makes the partition cancellations exact.
pub fn add_one_costs(
    f: &TestFunction,
    xi: &Functional,
    points: &PointSet,
    lambda: f64,
    omega: &RegionSpec,
    m: usize,
    rng: &mut StreamRng,
) -> Result<AddOneCosts> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientSample { n, k: 1 });
    }
    let new = n - 1;
    match xi {
        Functional::VoronoiVolume => {
            let vol = omega.volume().ok_or(Error::UnknownVolume)?;
            let index = KnnIndex::build(points);
            let batch = omega.sample_uniform_batch(m, rng);
            // per-sample assignments under X_n and X_{n-1} (same batch)
            let mut f_new = vec![0.0; n]; // sum of f over samples per new cell
            let mut f_old = vec![0.0; n];
            let mut cnt_new = vec![0usize; n];
            let mut cnt_old = vec![0usize; n];
            let mut captured = vec![0usize; n]; // old cell i, new cell `new`
            for z in &batch {
                let a_new = index.knn(z, 1, None)[0].index().expect("non-empty");
                let a_old = index.knn(z, 1, Some(new))[0].index().expect("n >= 2");
                let fz = f.eval(z);
                f_new[a_new] += fz;
                f_old[a_old] += fz;
                cnt_new[a_new] += 1;
                cnt_old[a_old] += 1;
                if a_new == new {
                    captured[a_old] += 1;
                }
            }
            let w = lambda * vol / m as f64;
            let delta: f64 = f_new.iter().sum::<f64>() * w - f_old[..new].iter().sum::<f64>() * w;
            // G terms: lambda * integral of (f - f(x_i)) over the cell
            let g_term = |fs: &[f64], cs: &[usize], i: usize| -> f64 {
                (fs[i] - f.eval(points.location(i)) * cs[i] as f64) * w
            };
            let g_new: f64 = (0..n).map(|i| g_term(&f_new, &cnt_new, i).abs()).sum();
            let g_old: f64 = (0..new).map(|i| g_term(&f_old, &cnt_old, i).abs()).sum();
            let delta_prime = g_new - g_old;
            // cell changes are one-sided: TV_i = lambda * |old_i cap new cell|
            let own = cnt_new[new] as f64 * w;
            let tv: f64 = captured[..new].iter().map(|c| *c as f64 * w).sum();
            Ok(AddOneCosts { delta, delta_prime, delta_tilde: own + tv })
        }
        _ => {
            let full = KnnIndex::build(points);
            let prev_set = points.prefix(new);
            let prev = KnnIndex::build(&prev_set);
            let mut delta = 0.0;
            let mut delta_tilde = 0.0;
            for i in 0..new {
                let w_n = knn_weight(xi, points, &full, i, lambda, omega);
                let w_p = knn_weight(xi, &prev_set, &prev, i, lambda, omega);
                delta += f.eval(points.location(i)) * (w_n - w_p);
                delta_tilde += (w_n - w_p).abs();
            }
            let w_own = knn_weight(xi, points, &full, new, lambda, omega);
            delta += f.eval(points.location(new)) * w_own;
            delta_tilde += w_own;
            // A1: xi* = xi exactly, so G vanishes identically
            Ok(AddOneCosts { delta, delta_prime: 0.0, delta_tilde })
        }
    }
}

/// Exact 1-d Voronoi add-one dominating cost, computed two ways: by per-cell
/// interval total variation, and by the closed identity
/// `2 * lambda * |V(X_n; X_n) cap omega|`. Returns `(direct, identity)`.
pub fn add_one_tilde_exact_1d(points: &PointSet, lambda: f64, omega: (f64, f64)) -> Result<(f64, f64)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientSample { n, k: 1 });
    }
    let new = n - 1;
    let cells_new = voronoi_intervals_exact_1d(points, omega)?;
    let prev = points.prefix(new);
    let cells_old = voronoi_intervals_exact_1d(&prev, omega)?;
    let len = |(l, r): (f64, f64)| (r - l).max(0.0);
    let own = lambda * len(cells_new[new]);
    let mut tv = 0.0;
    let (nl, nr) = cells_new[new];
    for &(ol, or) in cells_old.iter().take(new) {
        tv += lambda * len((ol.max(nl), or.min(nr)));
    }
    Ok((own + tv, 2.0 * own))
}
