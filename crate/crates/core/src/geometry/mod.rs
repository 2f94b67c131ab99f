//! Spatial queries: regions, k-nearest neighbours, nearest-nucleus
//! assignment, Voronoi cell volumes and the cone-based stabilization-radius
//! certificate.

mod kdtree;

pub use kdtree::{brute_force_knn, KnnIndex, Neighbor};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::Error;
use crate::point_process::{dist, Point, PointSet, StreamRng};
use crate::Result;

/// Volume of the d-dimensional unit ball.
pub fn unit_ball_volume(d: usize) -> f64 {
    let d = d as f64;
    (d / 2.0 * PI.ln() - ln_gamma(d / 2.0 + 1.0)).exp()
}

/// Deterministic indicator of membership in a region.
pub type IndicatorFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
enum RegionKind {
    AxisBox,
    Ball { center: Vec<f64>, radius: f64 },
    /// Pairwise-disjoint axis boxes; volume is the sum of box volumes.
    UnionOfBoxes(Vec<(Vec<f64>, Vec<f64>)>),
    Indicator(IndicatorFn),
}

/// An indicator-oracle set with a bounding box and, where available, an
/// exact volume.
#[derive(Clone)]
pub struct RegionSpec {
    kind: RegionKind,
    lo: Vec<f64>,
    hi: Vec<f64>,
    exact_volume: Option<f64>,
}

impl fmt::Debug for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            RegionKind::AxisBox => "axis-box".to_string(),
            RegionKind::Ball { center, radius } => format!("ball(center {center:?}, r {radius})"),
            RegionKind::UnionOfBoxes(bs) => format!("union-of-{}-boxes", bs.len()),
            RegionKind::Indicator(_) => "indicator-oracle".to_string(),
        };
        f.debug_struct("RegionSpec")
            .field("kind", &kind)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("exact_volume", &self.exact_volume)
            .finish()
    }
}

fn box_volume(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(a, b)| b - a).product()
}

impl RegionSpec {
    /// Axis-aligned box `(lo_1, hi_1) x ... x (lo_d, hi_d)`.
    pub fn axis_box(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b), "box must have positive extent");
        RegionSpec { kind: RegionKind::AxisBox, lo, hi, exact_volume: None }
    }

    /// The unit cube `(0, 1)^d`.
    pub fn unit_box(d: usize) -> Self {
        Self::axis_box(vec![0.0; d], vec![1.0; d])
    }

    /// Closed Euclidean ball.
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius > 0.0);
        let lo = center.iter().map(|c| c - radius).collect();
        let hi = center.iter().map(|c| c + radius).collect();
        RegionSpec { kind: RegionKind::Ball { center, radius }, lo, hi, exact_volume: None }
    }

    /// Finite union of pairwise-disjoint axis boxes.
    pub fn union_of_boxes(boxes: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        assert!(!boxes.is_empty());
        let d = boxes[0].0.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for (blo, bhi) in &boxes {
            for i in 0..d {
                lo[i] = lo[i].min(blo[i]);
                hi[i] = hi[i].max(bhi[i]);
            }
        }
        RegionSpec { kind: RegionKind::UnionOfBoxes(boxes), lo, hi, exact_volume: None }
    }

    /// Arbitrary region given by a deterministic indicator, its bounding box
    /// and an optional exact volume.
    pub fn indicator(f: IndicatorFn, bounding_box: (Vec<f64>, Vec<f64>), exact_volume: Option<f64>) -> Self {
        let (lo, hi) = bounding_box;
        RegionSpec { kind: RegionKind::Indicator(f), lo, hi, exact_volume }
    }

    /// The empty region (indicator always false) in dimension `d`.
    pub fn empty(d: usize) -> Self {
        Self::indicator(Arc::new(|_: &[f64]| false), (vec![0.0; d], vec![1.0; d]), Some(0.0))
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            RegionKind::AxisBox => x.iter().zip(&self.lo).zip(&self.hi).all(|((v, a), b)| a <= v && v < b),
            RegionKind::Ball { center, radius } => dist(x, center) <= *radius,
            RegionKind::UnionOfBoxes(boxes) => boxes
                .iter()
                .any(|(lo, hi)| x.iter().zip(lo).zip(hi).all(|((v, a), b)| a <= v && v < b)),
            RegionKind::Indicator(f) => f(x),
        }
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    /// The `(lo, hi)` corners when the region is an axis box.
    pub fn as_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self.kind {
            RegionKind::AxisBox => Some((self.lo.clone(), self.hi.clone())),
            _ => None,
        }
    }

    /// Lebesgue volume where known: box product, ball `omega_d r^d`, sum of
    /// disjoint boxes, or the supplied `exact_volume`.
    pub fn volume(&self) -> Option<f64> {
        if let Some(v) = self.exact_volume {
            return Some(v);
        }
        match &self.kind {
            RegionKind::AxisBox => Some(box_volume(&self.lo, &self.hi)),
            RegionKind::Ball { radius, center } => {
                Some(unit_ball_volume(center.len()) * radius.powi(center.len() as i32))
            }
            RegionKind::UnionOfBoxes(boxes) => Some(boxes.iter().map(|(lo, hi)| box_volume(lo, hi)).sum()),
            RegionKind::Indicator(_) => None,
        }
    }

    /// Diameter of the bounding box; an upper bound on the region diameter.
    pub fn bounding_diameter(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    /// One uniform draw from the region: direct for axis boxes, rejection
    /// from the bounding box otherwise.
    pub fn sample_uniform(&self, rng: &mut StreamRng) -> Vec<f64> {
        loop {
            let x: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            if matches!(self.kind, RegionKind::AxisBox) || self.contains(&x) {
                return x;
            }
        }
    }

    /// A batch of `m` uniform draws.
    pub fn sample_uniform_batch(&self, m: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
        (0..m).map(|_| self.sample_uniform(rng)).collect()
    }
}

/// A certificate that the Voronoi cell of `x` (intersected with the region)
/// is unchanged by any modification of the configuration outside the ball of
/// the certified radius around `x`.
#[derive(Debug, Clone)]
pub struct StabCertificate {
    /// Certified radius: twice the largest per-cone distance.
    pub radius: f64,
    pub cone_count: usize,
    /// Distance from `x` to the nearest configuration point in each widened
    /// cone, capped at the cone-section diameter bound when the cone is
    /// empty.
    pub per_cone_distances: Vec<f64>,
}

/// Cone-based stabilization radius for the Voronoi cell of `x` in `X`,
/// restricted to `omega`. Implemented for d = 1 (two half-lines) and d = 2
/// (12 sectors of full angle pi/6, widened to pi/3 for the search cones).
/// When a widened cone contains no point of `X`, its distance falls back to
/// the bounding-box diameter of `omega`, an upper bound on the cone-section
/// diameter, which keeps the certificate sound.
pub fn stabilization_radius_cone(x: &Point, points: &PointSet, omega: &RegionSpec) -> Result<StabCertificate> {
    let d = x.dim();
    let cap = omega.bounding_diameter();
    let per_cone = match d {
        1 => {
            let xc = x.coords()[0];
            let mut left = cap;
            let mut right = cap;
            for p in points.iter() {
                let yc = p.location.coords()[0];
                if yc < xc {
                    left = left.min(xc - yc);
                } else if yc > xc {
                    right = right.min(yc - xc);
                }
            }
            vec![left, right]
        }
        2 => {
            // Sector i spans angles [i, i+1] * pi/6; the widened search cone
            // is concentric with half-angle pi/6.
            let cone_count = 12;
            let half_angle = PI / 6.0;
            let mut dists = vec![cap; cone_count];
            let xc = x.coords();
            for p in points.iter() {
                let yc = p.location.coords();
                let (dx, dy) = (yc[0] - xc[0], yc[1] - xc[1]);
                let r = (dx * dx + dy * dy).sqrt();
                if r == 0.0 {
                    continue;
                }
                let theta = dy.atan2(dx);
                for (i, slot) in dists.iter_mut().enumerate() {
                    let center = (i as f64 + 0.5) * PI / 6.0;
                    let mut diff = (theta - center) % (2.0 * PI);
                    if diff > PI {
                        diff -= 2.0 * PI;
                    } else if diff < -PI {
                        diff += 2.0 * PI;
                    }
                    if diff.abs() <= half_angle {
                        *slot = slot.min(r);
                    }
                }
            }
            dists
        }
        dim => {
            return Err(Error::UnsupportedDimension { dim, context: "cone stabilization certificate" });
        }
    };
    let max = per_cone.iter().cloned().fold(0.0f64, f64::max);
    Ok(StabCertificate { radius: 2.0 * max, cone_count: per_cone.len(), per_cone_distances: per_cone })
}

/// Assign each sample to its nearest nucleus.
pub fn assign_batch(index: &KnnIndex, samples: &[Vec<f64>]) -> Result<Vec<usize>> {
    samples.iter().map(|z| index.nearest_nucleus(z)).collect()
}

/// Monte Carlo Voronoi cell volumes for all nuclei from one shared sample
/// batch: `|omega| * (count assigned to i) / m`. The shared batch makes the
/// volumes sum exactly to `|omega|`.
pub fn voronoi_volumes_mc(points: &PointSet, omega: &RegionSpec, m: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let vol = omega.volume().ok_or(Error::UnknownVolume)?;
    let index = KnnIndex::build(points);
    let mut counts = vec![0usize; points.len()];
    for _ in 0..m {
        let z = omega.sample_uniform(rng);
        counts[index.nearest_nucleus(&z)?] += 1;
    }
    Ok(counts.into_iter().map(|c| vol * c as f64 / m as f64).collect())
}

/// Monte Carlo volume of the cell of nucleus `i`: unbiased estimator of
/// `|V(X_i; X) cap omega|`.
pub fn voronoi_volume_mc(i: usize, points: &PointSet, omega: &RegionSpec, m: usize, rng: &mut StreamRng) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    assert!(i < points.len());
    assert!(m >= 1);
    let vol = omega.volume().ok_or(Error::UnknownVolume)?;
    let index = KnnIndex::build(points);
    let mut hits = 0usize;
    for _ in 0..m {
        let z = omega.sample_uniform(rng);
        if index.nearest_nucleus(&z)? == i {
            hits += 1;
        }
    }
    Ok(vol * hits as f64 / m as f64)
}

/// Exact 1-d Voronoi cell intervals, clipped to `omega = (a, b)`.
///
/// Cells are bounded by midpoints of consecutive nuclei. Duplicate nuclei
/// are shadowed: the lowest index of a coincident group receives the whole
/// combined interval (the everywhere-lowest-index tie rule), the others get
/// empty intervals.
pub fn voronoi_intervals_exact_1d(points: &PointSet, omega: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    if points.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: points.dim(), context: "exact 1-d Voronoi oracle" });
    }
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let (a, b) = omega;
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|i, j| {
        points.location(*i)[0]
            .total_cmp(&points.location(*j)[0])
            .then_with(|| i.cmp(j))
    });
    // Collapse coincident groups onto their lowest original index.
    let mut reps: Vec<usize> = Vec::new(); // representative original index per distinct position
    let mut pos: Vec<f64> = Vec::new();
    for &i in &order {
        let x = points.location(i)[0];
        if pos.last().is_some_and(|p| *p == x) {
            let r = *reps.last().unwrap();
            if i < r {
                *reps.last_mut().unwrap() = i;
            }
        } else {
            pos.push(x);
            reps.push(i);
        }
    }
    let mut out = vec![(0.0, 0.0); n];
    for (j, (&x, &rep)) in pos.iter().zip(&reps).enumerate() {
        let left = if j == 0 { f64::NEG_INFINITY } else { (pos[j - 1] + x) / 2.0 };
        let right = if j == pos.len() - 1 { f64::INFINITY } else { (x + pos[j + 1]) / 2.0 };
        out[rep] = (left.max(a), right.min(b));
    }
    Ok(out)
}

/// Exact 1-d Voronoi cell lengths, clipped to `omega`.
pub fn voronoi_cells_exact_1d(points: &PointSet, omega: (f64, f64)) -> Result<Vec<f64>> {
    Ok(voronoi_intervals_exact_1d(points, omega)?
        .into_iter()
        .map(|(l, r)| (r - l).max(0.0))
        .collect())
}

/// Exact length of the cell of nucleus `i` in d = 1.
pub fn voronoi_volume_exact_1d(i: usize, points: &PointSet, omega: (f64, f64)) -> Result<f64> {
    let cells = voronoi_cells_exact_1d(points, omega)?;
    Ok(cells[i])
}
