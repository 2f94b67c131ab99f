//! Generation of binomial and Poisson (marked) point configurations, local
//! rescaling, and the nested-ball metric on locally finite sets.
//!
//! All types here are immutable after construction and samplers draw from an
//! explicit RNG stream, so replications owning distinct stream ids can run in
//! parallel.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::Error;
use crate::geometry::RegionSpec;
use crate::Result;

/// Concrete RNG type produced by [`RngStream::rng`].
pub type StreamRng = ChaCha12Rng;

/// A reproducible RNG stream identified by a root seed and a stream id.
///
/// Identical `(seed, stream_id)` pairs reproduce identical draws; distinct
/// stream ids yield streams that are independent for practical purposes. The
/// harness derives one stream id per replication by counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// The stream with the same root seed and a different id.
    pub fn substream(&self, stream_id: u64) -> Self {
        RngStream { seed: self.seed, stream_id }
    }

    /// Instantiate the generator. The 256-bit ChaCha key is derived from
    /// `(seed, stream_id)` by splitmix64 so that neighbouring ids do not
    /// produce correlated key material.
    pub fn rng(&self) -> StreamRng {
        let mut state = self.seed ^ 0xD1B5_4A32_D192_ED03u64.wrapping_mul(self.stream_id | 1);
        let mut s0 = self.stream_id;
        let _ = splitmix64(&mut s0);
        state ^= s0;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }
}

/// A location in `R^d`. All coordinates are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(
            !coords.is_empty() && coords.iter().all(|c| c.is_finite()),
            "point coordinates must be finite and d >= 1"
        );
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean distance.
    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.coords, &other.coords)
    }

    /// Euclidean norm (distance to the origin).
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A location with an optional real mark (a noise value in the regression
/// model; absent otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPoint {
    pub location: Point,
    pub mark: Option<f64>,
}

impl MarkedPoint {
    pub fn unmarked(location: Point) -> Self {
        MarkedPoint { location, mark: None }
    }

    pub fn with_mark(location: Point, mark: f64) -> Self {
        assert!(mark.is_finite(), "mark must be finite");
        MarkedPoint { location, mark: Some(mark) }
    }
}

/// An ordered finite configuration in `R^d`. Order is the insertion order
/// `X_1, ..., X_n`; the add-one-cost operations rely on it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<MarkedPoint>,
    dim: usize,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be >= 1");
        PointSet { points: Vec::new(), dim }
    }

    pub fn from_points(dim: usize, points: Vec<MarkedPoint>) -> Self {
        assert!(points.iter().all(|p| p.location.dim() == dim), "all points must share dimension");
        PointSet { points, dim }
    }

    /// Build an unmarked set from raw coordinate rows.
    pub fn from_coords(dim: usize, rows: &[Vec<f64>]) -> Self {
        let points = rows.iter().map(|r| MarkedPoint::unmarked(Point::new(r.clone()))).collect();
        Self::from_points(dim, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: MarkedPoint) {
        assert_eq!(p.location.dim(), self.dim);
        self.points.push(p);
    }

    pub fn get(&self, i: usize) -> &MarkedPoint {
        &self.points[i]
    }

    pub fn location(&self, i: usize) -> &[f64] {
        self.points[i].location.coords()
    }

    pub fn mark(&self, i: usize) -> Option<f64> {
        self.points[i].mark
    }

    pub fn iter(&self) -> impl Iterator<Item = &MarkedPoint> {
        self.points.iter()
    }

    /// The prefix `{X_1, ..., X_m}` of this configuration.
    pub fn prefix(&self, m: usize) -> PointSet {
        PointSet { points: self.points[..m].to_vec(), dim: self.dim }
    }

    /// This configuration with one further point adjoined at the end.
    pub fn adjoin(&self, p: MarkedPoint) -> PointSet {
        let mut out = self.clone();
        out.push(p);
        out
    }
}

/// Built-in density families for the common sampling density `kappa`.
#[derive(Debug, Clone)]
pub enum DensityFamily {
    /// Constant `1/|support|` on the support region.
    UniformOnRegion,
    /// Piecewise constant over a regular grid on an axis-box support;
    /// `values[c]` is the (normalized) density on cell `c`, cells indexed
    /// row-major along the axes.
    PiecewiseConstantOnGrid { cells_per_axis: usize, values: Vec<f64> },
    /// A Gaussian bump `exp(-|x - center|^2 / (2 bw^2))` truncated to the
    /// support and normalized by Monte Carlo at construction.
    TruncatedSmooth { center: Vec<f64>, bandwidth: f64 },
}

/// A probability density on a bounded region, with a pointwise evaluator and
/// a rejection sampler against the support's bounding box.
#[derive(Debug, Clone)]
pub struct DensitySpec {
    family: DensityFamily,
    support: RegionSpec,
    lower_bound: f64,
    max_density: f64,
    /// For `TruncatedSmooth`: the MC-estimated normalizing constant.
    normalizer: f64,
}

/// Sample count used for the construction-time normalization check.
const DENSITY_CHECK_SAMPLES: usize = 200_000;
const DENSITY_CHECK_TOL: f64 = 0.03;

impl DensitySpec {
    /// Uniform density on a region of known volume.
    pub fn uniform(support: RegionSpec) -> Result<Self> {
        let vol = support.volume().ok_or(Error::UnknownVolume)?;
        if vol <= 0.0 {
            return Err(Error::config("support", "region volume must be positive"));
        }
        let spec = DensitySpec {
            family: DensityFamily::UniformOnRegion,
            lower_bound: 1.0 / vol,
            max_density: 1.0 / vol,
            normalizer: 1.0,
            support,
        };
        spec.check_normalization()?;
        Ok(spec)
    }

    /// Piecewise-constant density on a regular grid over an axis-box support.
    /// `weights` are relative cell masses (length `cells_per_axis^d`); they
    /// are normalized so the density integrates to one.
    pub fn piecewise_on_grid(support: RegionSpec, cells_per_axis: usize, weights: Vec<f64>) -> Result<Self> {
        let (lo, hi) = support.as_box().ok_or(Error::NotABox)?;
        let d = lo.len();
        let n_cells = cells_per_axis.pow(d as u32);
        if weights.len() != n_cells {
            return Err(Error::config("weights", format!("expected {n_cells} cell weights, got {}", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::config("weights", "cell weights must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::config("weights", "cell weights must not all be zero"));
        }
        let box_vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        let cell_vol = box_vol / n_cells as f64;
        // density on cell c: (w_c / total) / cell_vol
        let values: Vec<f64> = weights.iter().map(|w| w / total / cell_vol).collect();
        let lower = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let upper = values.iter().cloned().fold(0.0, f64::max);
        let spec = DensitySpec {
            family: DensityFamily::PiecewiseConstantOnGrid { cells_per_axis, values },
            lower_bound: lower,
            max_density: upper,
            normalizer: 1.0,
            support,
        };
        spec.check_normalization()?;
        Ok(spec)
    }

    /// Gaussian bump truncated to a box support. The normalizing constant is
    /// estimated by Monte Carlo on a fixed internal stream; `lower_bound` is
    /// reported as 0 (the infimum is not computed in closed form).
    pub fn truncated_gaussian(support: RegionSpec, center: Vec<f64>, bandwidth: f64) -> Result<Self> {
        let (lo, hi) = support.as_box().ok_or(Error::NotABox)?;
        if center.len() != lo.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: center.len() });
        }
        if bandwidth.is_nan() || bandwidth <= 0.0 {
            return Err(Error::config("bandwidth", "must be > 0"));
        }
        let box_vol: f64 = lo.iter().zip(hi.iter()).map(|(a, b)| b - a).product();
        let mut rng = RngStream::new(0x7A5E_u64 ^ 0x5EED, 0).rng();
        let mut acc = 0.0;
        for _ in 0..DENSITY_CHECK_SAMPLES {
            let x: Vec<f64> = lo.iter().zip(hi.iter()).map(|(a, b)| rng.random_range(*a..*b)).collect();
            acc += (-dist_sq(&x, &center) / (2.0 * bandwidth * bandwidth)).exp();
        }
        let normalizer = acc / DENSITY_CHECK_SAMPLES as f64 * box_vol;
        let spec = DensitySpec {
            family: DensityFamily::TruncatedSmooth { center, bandwidth },
            lower_bound: 0.0,
            max_density: 1.0 / normalizer,
            normalizer,
            support,
        };
        spec.check_normalization()?;
        Ok(spec)
    }

    /// Pointwise density value (0 outside the support).
    pub fn eval(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        match &self.family {
            DensityFamily::UniformOnRegion => self.max_density,
            DensityFamily::PiecewiseConstantOnGrid { cells_per_axis, values } => {
                let (lo, hi) = self.support.as_box().expect("piecewise support is a box");
                let g = *cells_per_axis;
                let mut idx = 0usize;
                for (i, xi) in x.iter().enumerate() {
                    let t = (xi - lo[i]) / (hi[i] - lo[i]);
                    let c = ((t * g as f64) as usize).min(g - 1);
                    idx = idx * g + c;
                }
                values[idx]
            }
            DensityFamily::TruncatedSmooth { center, bandwidth } => {
                (-dist_sq(x, center) / (2.0 * bandwidth * bandwidth)).exp() / self.normalizer
            }
        }
    }

    /// Infimum of the density over the support (0 if unknown).
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// Supremum of the density (rejection-sampler envelope).
    pub fn max_density(&self) -> f64 {
        self.max_density
    }

    pub fn support(&self) -> &RegionSpec {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Monte Carlo check (fixed internal stream) that the density integrates
    /// to one over the bounding box.
    fn check_normalization(&self) -> Result<()> {
        let (lo, hi) = self.support.bounding_box();
        let box_vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        let mut rng = RngStream::new(0xC4EC_u64, 1).rng();
        let mut acc = 0.0;
        for _ in 0..DENSITY_CHECK_SAMPLES {
            let x: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            let v = self.eval(&x);
            if v < 0.0 || !v.is_finite() {
                return Err(Error::config("density", "evaluates negative or non-finite"));
            }
            acc += v;
        }
        let integral = acc / DENSITY_CHECK_SAMPLES as f64 * box_vol;
        if (integral - 1.0).abs() > DENSITY_CHECK_TOL {
            return Err(Error::config(
                "density",
                format!("does not integrate to 1 over support (MC estimate {integral:.4})"),
            ));
        }
        Ok(())
    }
}

/// Noise distributions for marks: mean zero, variance `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    /// Uniform on `[-sigma*sqrt(3), sigma*sqrt(3)]`.
    UniformCentered { sigma: f64 },
}

impl NoiseSpec {
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma } | NoiseSpec::UniformCentered { sigma } => *sigma,
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma } => {
                if *sigma == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, *sigma).expect("sigma >= 0").sample(rng)
                }
            }
            NoiseSpec::UniformCentered { sigma } => {
                if *sigma == 0.0 {
                    0.0
                } else {
                    let a = sigma * 3f64.sqrt();
                    rng.random_range(-a..a)
                }
            }
        }
    }
}

/// Draw `n` i.i.d. unmarked points with density `kappa` by rejection against
/// the bounding box of its support.
pub fn sample_binomial(n: usize, kappa: &DensitySpec, rng: &mut StreamRng) -> Result<PointSet> {
    let d = kappa.dim();
    let (lo, hi) = kappa.support().bounding_box();
    let envelope = kappa.max_density();
    let mut out = PointSet::new(d);
    let mut attempts: u64 = 0;
    let mut accepted: u64 = 0;
    while out.len() < n {
        attempts += 1;
        let x: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
        let u: f64 = rng.random::<f64>();
        if u * envelope < kappa.eval(&x) {
            accepted += 1;
            out.push(MarkedPoint::unmarked(Point::new(x)));
        }
        if attempts.is_multiple_of(1_000_000) {
            let rate = accepted as f64 / attempts as f64;
            if rate < 1e-6 {
                return Err(Error::RejectionRate { rate });
            }
        }
    }
    Ok(out)
}

/// Sample a homogeneous Poisson process with intensity `lambda` on an
/// axis-aligned box: count `N ~ Poisson(lambda |box|)`, locations i.i.d.
/// uniform.
pub fn sample_poisson_homogeneous(lambda: f64, boxr: &RegionSpec, rng: &mut StreamRng) -> Result<PointSet> {
    assert!(lambda > 0.0, "intensity must be positive");
    let (lo, hi) = boxr.as_box().ok_or(Error::NotABox)?;
    let vol: f64 = lo.iter().zip(hi.iter()).map(|(a, b)| b - a).product();
    let mean = lambda * vol;
    let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    let mut out = PointSet::new(lo.len());
    for _ in 0..n {
        let x: Vec<f64> = lo.iter().zip(hi.iter()).map(|(a, b)| rng.random_range(*a..*b)).collect();
        out.push(MarkedPoint::unmarked(Point::new(x)));
    }
    Ok(out)
}

/// Attach i.i.d. mean-zero marks with variance `sigma^2` to every point.
pub fn attach_marks(x: &PointSet, noise: NoiseSpec, rng: &mut StreamRng) -> PointSet {
    let points = x
        .iter()
        .map(|p| MarkedPoint::with_mark(p.location.clone(), noise.sample(rng)))
        .collect();
    PointSet::from_points(x.dim(), points)
}

/// Dilation centred at `center`: each location `x_i` maps to
/// `center + lambda^{1/d} (x_i - center)`; marks are preserved.
pub fn rescale(x: &PointSet, center: &Point, lambda: f64) -> PointSet {
    assert!(lambda > 0.0, "scale must be positive");
    assert_eq!(center.dim(), x.dim(), "center dimension must match");
    let a = lambda.powf(1.0 / x.dim() as f64);
    let c = center.coords();
    let points = x
        .iter()
        .map(|p| {
            let coords: Vec<f64> = p
                .location
                .coords()
                .iter()
                .zip(c)
                .map(|(xi, ci)| ci + a * (xi - ci))
                .collect();
            MarkedPoint { location: Point::new(coords), mark: p.mark }
        })
        .collect();
    PointSet::from_points(x.dim(), points)
}

/// Result of the nested-ball metric comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricD {
    /// The sets already disagree inside the unit ball; the max over agreement
    /// radii is undefined, encoded as a distinct infinite sentinel.
    Infinite,
    /// `value = 1/K` for the largest integer `K <= k_max` on which the sets
    /// agree; `censored` marks agreement all the way to the search window.
    Finite { value: f64, censored: bool },
}

impl MetricD {
    /// The value as an extended real, for ordering comparisons.
    pub fn as_extended(&self) -> f64 {
        match self {
            MetricD::Infinite => f64::INFINITY,
            MetricD::Finite { value, .. } => *value,
        }
    }
}

fn point_key(p: &MarkedPoint) -> Vec<u64> {
    let mut key: Vec<u64> = p.location.coords().iter().map(|c| c.to_bits()).collect();
    key.push(match p.mark {
        Some(m) => m.to_bits(),
        None => u64::MAX, // distinct from any finite mark bit pattern
    });
    key
}

/// The metric `D(X, Y) = (max{K : X cap B_K = Y cap B_K})^{-1}` on finite
/// configurations, with balls centred at the origin and integer radii
/// `1..=k_max`. Locations and marks are compared bitwise.
pub fn metric_d(x: &PointSet, y: &PointSet, k_max: usize) -> MetricD {
    assert!(k_max >= 1, "k_max must be >= 1");
    assert_eq!(x.dim(), y.dim(), "dimension mismatch in metric comparison");
    // Multiset symmetric difference, then the smallest norm in it decides the
    // largest radius of agreement.
    let mut counts: HashMap<Vec<u64>, (i64, f64)> = HashMap::new();
    for p in x.iter() {
        let e = counts.entry(point_key(p)).or_insert((0, p.location.norm()));
        e.0 += 1;
    }
    for p in y.iter() {
        let e = counts.entry(point_key(p)).or_insert((0, p.location.norm()));
        e.0 -= 1;
    }
    let min_diff_norm = counts
        .values()
        .filter(|(c, _)| *c != 0)
        .map(|(_, n)| *n)
        .fold(f64::INFINITY, f64::min);
    if min_diff_norm <= 1.0 {
        return MetricD::Infinite;
    }
    if min_diff_norm > k_max as f64 {
        return MetricD::Finite { value: 1.0 / k_max as f64, censored: true };
    }
    // largest integer K with K < min_diff_norm
    let k = (min_diff_norm.ceil() - 1.0) as usize;
    let k = k.min(k_max);
    MetricD::Finite { value: 1.0 / k as f64, censored: k == k_max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RegionSpec;

    fn unit_box(d: usize) -> RegionSpec {
        RegionSpec::unit_box(d)
    }

    #[test]
    fn binomial_empty() {
        let kappa = DensitySpec::uniform(unit_box(2)).unwrap();
        let ps = sample_binomial(0, &kappa, &mut RngStream::new(1, 0).rng()).unwrap();
        assert!(ps.is_empty());
        assert_eq!(ps.dim(), 2);
    }

    #[test]
    fn binomial_subbox_count() {
        let kappa = DensitySpec::uniform(unit_box(2)).unwrap();
        let n = 10_000;
        let ps = sample_binomial(n, &kappa, &mut RngStream::new(2, 0).rng()).unwrap();
        let count = ps
            .iter()
            .filter(|p| p.location.coords().iter().all(|c| *c < 0.5))
            .count() as f64;
        let mean = n as f64 * 0.25;
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        assert!((count - mean).abs() <= 3.0 * sd, "count {count} vs mean {mean}");
    }

    #[test]
    fn binomial_piecewise_halves() {
        // kappa = 1.5 on (0, 0.5), 0.5 on (0.5, 1): left-half mass 0.75.
        let support = RegionSpec::axis_box(vec![0.0], vec![1.0]);
        let kappa = DensitySpec::piecewise_on_grid(support, 2, vec![3.0, 1.0]).unwrap();
        assert!((kappa.eval(&[0.25]) - 1.5).abs() < 1e-12);
        assert!((kappa.eval(&[0.75]) - 0.5).abs() < 1e-12);
        let n = 10_000;
        let ps = sample_binomial(n, &kappa, &mut RngStream::new(3, 0).rng()).unwrap();
        let left = ps.iter().filter(|p| p.location.coords()[0] < 0.5).count() as f64;
        let mean = n as f64 * 0.75;
        let sd = (n as f64 * 0.75 * 0.25).sqrt();
        assert!((left - mean).abs() <= 3.0 * sd, "left count {left} vs mean {mean}");
    }

    #[test]
    fn poisson_mean_and_variance() {
        let boxr = unit_box(2);
        let reps = 10_000;
        let mut rng = RngStream::new(4, 0).rng();
        let counts: Vec<f64> = (0..reps)
            .map(|_| sample_poisson_homogeneous(1.0, &boxr, &mut rng).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn poisson_mean_count_1d() {
        let boxr = RegionSpec::axis_box(vec![0.0], vec![1.0]);
        let n = sample_poisson_homogeneous(100.0, &boxr, &mut RngStream::new(5, 0).rng())
            .unwrap()
            .len() as f64;
        assert!((n - 100.0).abs() <= 3.0 * 10.0);
    }

    #[test]
    fn poisson_disjoint_boxes_independent() {
        let b1 = RegionSpec::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]);
        let b2 = RegionSpec::axis_box(vec![2.0, 0.0], vec![3.0, 1.0]);
        let reps = 5_000;
        let mut rng = RngStream::new(6, 0).rng();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..reps {
            xs.push(sample_poisson_homogeneous(2.0, &b1, &mut rng).unwrap().len() as f64);
            ys.push(sample_poisson_homogeneous(2.0, &b2, &mut rng).unwrap().len() as f64);
        }
        let mx = xs.iter().sum::<f64>() / reps as f64;
        let my = ys.iter().sum::<f64>() / reps as f64;
        let cov = xs
            .iter()
            .zip(&ys)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / (reps - 1) as f64;
        // Var of each count is 2; the covariance estimator has sd ~ 2/sqrt(reps).
        assert!(cov.abs() < 4.0 * 2.0 / (reps as f64).sqrt(), "cov {cov}");
    }

    #[test]
    fn poisson_rejects_non_box() {
        let ball = RegionSpec::ball(vec![0.0, 0.0], 1.0);
        let err = sample_poisson_homogeneous(1.0, &ball, &mut RngStream::new(7, 0).rng());
        assert!(matches!(err, Err(Error::NotABox)));
    }

    #[test]
    fn marks_degenerate_and_variance() {
        let kappa = DensitySpec::uniform(unit_box(1)).unwrap();
        let mut rng = RngStream::new(8, 0).rng();
        let ps = sample_binomial(1_000, &kappa, &mut rng).unwrap();
        let zeroed = attach_marks(&ps, NoiseSpec::Gaussian { sigma: 0.0 }, &mut rng);
        assert!(zeroed.iter().all(|p| p.mark == Some(0.0)));

        let big = sample_binomial(100_000, &kappa, &mut rng).unwrap();
        for noise in [NoiseSpec::Gaussian { sigma: 1.0 }, NoiseSpec::UniformCentered { sigma: 1.0 }] {
            let marked = attach_marks(&big, noise, &mut rng);
            let marks: Vec<f64> = marked.iter().map(|p| p.mark.unwrap()).collect();
            let mean = marks.iter().sum::<f64>() / marks.len() as f64;
            let var = marks.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (marks.len() - 1) as f64;
            assert!((var - 1.0).abs() < 0.03, "variance {var} for {noise:?}");
        }
    }

    #[test]
    fn marks_independent_of_locations() {
        let kappa = DensitySpec::uniform(unit_box(2)).unwrap();
        let mut rng = RngStream::new(9, 0).rng();
        let ps = sample_binomial(50_000, &kappa, &mut rng).unwrap();
        let marked = attach_marks(&ps, NoiseSpec::Gaussian { sigma: 1.0 }, &mut rng);
        let n = marked.len() as f64;
        let xs: Vec<f64> = marked.iter().map(|p| p.location.coords()[0]).collect();
        let ms: Vec<f64> = marked.iter().map(|p| p.mark.unwrap()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let mm = ms.iter().sum::<f64>() / n;
        let corr_num = xs.iter().zip(&ms).map(|(a, b)| (a - mx) * (b - mm)).sum::<f64>();
        let sx = xs.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
        let sm = ms.iter().map(|b| (b - mm) * (b - mm)).sum::<f64>().sqrt();
        let corr = corr_num / (sx * sm);
        assert!(corr.abs() < 4.0 / n.sqrt() * 1.5, "corr {corr}");
    }

    #[test]
    fn rescale_hand_cases() {
        // d=1, center 0, lambda 8: 0.5 -> 4.0.
        let ps = PointSet::from_coords(1, &[vec![0.5]]);
        let out = rescale(&ps, &Point::new(vec![0.0]), 8.0);
        assert!((out.location(0)[0] - 4.0).abs() < 1e-12);

        // d=2, center (1,1), lambda 16: (1.5, 1) -> (3, 1).
        let ps = PointSet::from_coords(2, &[vec![1.5, 1.0]]);
        let out = rescale(&ps, &Point::new(vec![1.0, 1.0]), 16.0);
        assert!((out.location(0)[0] - 3.0).abs() < 1e-12);
        assert!((out.location(0)[1] - 1.0).abs() < 1e-12);

        // lambda = 1 is the identity up to round-off in c + 1*(x - c).
        let ps = PointSet::from_coords(2, &[vec![0.3, 0.7]]);
        let out = rescale(&ps, &Point::new(vec![0.9, 0.1]), 1.0);
        for (a, b) in out.location(0).iter().zip(ps.location(0)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn metric_d_hand_cases() {
        let empty = PointSet::new(1);
        let x = PointSet::from_coords(1, &[vec![0.5]]);
        // Identical sets agree everywhere: censored 1/k_max.
        assert_eq!(metric_d(&x, &x, 10), MetricD::Finite { value: 0.1, censored: true });
        // Disagreement inside B_1.
        assert_eq!(metric_d(&x, &empty, 10), MetricD::Infinite);
        // Agreement inside B_3, difference at radius 3.5.
        let a = PointSet::from_coords(1, &[vec![2.0], vec![3.5]]);
        let b = PointSet::from_coords(1, &[vec![2.0]]);
        assert_eq!(metric_d(&a, &b, 10), MetricD::Finite { value: 1.0 / 3.0, censored: false });
    }

    #[test]
    fn metric_d_compares_marks_bitwise() {
        let a = PointSet::from_points(1, vec![MarkedPoint::with_mark(Point::new(vec![0.5]), 1.0)]);
        let b = PointSet::from_points(1, vec![MarkedPoint::with_mark(Point::new(vec![0.5]), 1.0 + 1e-16)]);
        // identical bits agree
        assert_eq!(metric_d(&a, &a, 5), MetricD::Finite { value: 0.2, censored: true });
        // 1.0 + 1e-16 rounds to 1.0 in f64, so these are bitwise equal
        assert_eq!(metric_d(&a, &b, 5), MetricD::Finite { value: 0.2, censored: true });
        let c = PointSet::from_points(1, vec![MarkedPoint::with_mark(Point::new(vec![0.5]), 1.5)]);
        assert_eq!(metric_d(&a, &c, 5), MetricD::Infinite);
    }

    #[test]
    fn rng_streams_reproducible_and_distinct() {
        let mut a = RngStream::new(42, 3).rng();
        let mut b = RngStream::new(42, 3).rng();
        let mut c = RngStream::new(42, 4).rng();
        let va: Vec<f64> = (0..8).map(|_| a.random()).collect();
        let vb: Vec<f64> = (0..8).map(|_| b.random()).collect();
        let vc: Vec<f64> = (0..8).map(|_| c.random()).collect();
        assert_eq!(va, vb);
        assert_ne!(va, vc);
    }

    #[test]
    fn density_rejects_unnormalized() {
        // A "uniform" density on a region whose claimed volume disagrees with
        // its indicator would fail the construction check; emulate with an
        // indicator-oracle region whose exact_volume is wrong.
        let bad = RegionSpec::indicator(
            std::sync::Arc::new(|x: &[f64]| x[0] < 0.5),
            (vec![0.0], vec![1.0]),
            Some(1.0), // true volume is 0.5
        );
        assert!(DensitySpec::uniform(bad).is_err());
    }
}
