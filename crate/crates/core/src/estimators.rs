//! The two statistical applications: Voronoi set estimation and the Gamma
//! test for residual noise variance in nonparametric regression, together
//! with their closed-form limits.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::error::Error;
use crate::geometry::{unit_ball_volume, KnnIndex, Neighbor, RegionSpec};
use crate::point_process::{
    dist_sq, sample_binomial, sample_poisson_homogeneous, DensitySpec, MarkedPoint, Point, PointSet,
    StreamRng,
};
use crate::random_measure::GradOracle;
use crate::Result;

/// Built-in regression function families with analytic gradients.
#[derive(Debug, Clone)]
pub enum HFamily {
    /// `h(x) = b . x`
    Linear { b: Vec<f64> },
    /// `h(x) = sum_i x_i^2`
    Quadratic,
    /// `h(x) = sum_i sin(2 pi x_i)`
    Sinusoidal,
}

/// Regression model `Y = h(X) + e` with noise sd `sigma`; in the scaled
/// variant the noise is shrunk by `n^{-1/d}` so signal and noise terms are
/// comparable in the rescaled limit.
#[derive(Debug, Clone)]
pub struct RegressionModel {
    pub h: HFamily,
    pub sigma: f64,
    pub scaled: bool,
}

impl RegressionModel {
    pub fn new(h: HFamily, sigma: f64, scaled: bool) -> Self {
        assert!(sigma >= 0.0);
        RegressionModel { h, sigma, scaled }
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        match &self.h {
            HFamily::Linear { b } => b.iter().zip(x).map(|(bi, xi)| bi * xi).sum(),
            HFamily::Quadratic => x.iter().map(|v| v * v).sum(),
            HFamily::Sinusoidal => x.iter().map(|v| (2.0 * PI * v).sin()).sum(),
        }
    }

    pub fn grad_h(&self, x: &[f64]) -> Vec<f64> {
        match &self.h {
            HFamily::Linear { b } => b.clone(),
            HFamily::Quadratic => x.iter().map(|v| 2.0 * v).collect(),
            HFamily::Sinusoidal => x.iter().map(|v| 2.0 * PI * (2.0 * PI * v).cos()).collect(),
        }
    }

    /// The gradient as a shareable oracle for the measure layer.
    pub fn grad_oracle(&self) -> GradOracle {
        let m = self.clone();
        Arc::new(move |x: &[f64]| m.grad_h(x))
    }

    /// Draw `n` covariates from `kappa` and attach responses
    /// `Y = h(X) + s e`, `e ~ N(0, sigma^2)`, with `s = n^{-1/d}` in the
    /// scaled model and 1 otherwise.
    pub fn sample_data(&self, n: usize, kappa: &DensitySpec, rng: &mut StreamRng) -> Result<PointSet> {
        use rand_distr::{Distribution, Normal};
        let xs = sample_binomial(n, kappa, rng)?;
        let s = if self.scaled { (n as f64).powf(-1.0 / kappa.dim() as f64) } else { 1.0 };
        let noise = Normal::new(0.0, self.sigma.max(f64::MIN_POSITIVE)).expect("valid sd");
        let mut out = PointSet::new(xs.dim());
        for p in xs.iter() {
            let e = if self.sigma == 0.0 { 0.0 } else { noise.sample(rng) };
            let y = self.h(p.location.coords()) + s * e;
            out.push(MarkedPoint::with_mark(p.location.clone(), y));
        }
        Ok(out)
    }
}

/// Whether `z` belongs to the plug-in set estimate: true iff the nearest
/// nucleus of `z` lies in `a`.
pub fn voronoi_estimate_membership(z: &[f64], a: &RegionSpec, points: &PointSet, index: &KnnIndex) -> Result<bool> {
    let i = index.nearest_nucleus(z)?;
    Ok(a.contains(points.location(i)))
}

/// Monte Carlo symmetric-difference volume between `a` and its plug-in
/// estimate, plus the estimated volume of the plug-in set itself. One shared
/// batch serves both numbers.
#[derive(Debug, Clone, Copy)]
pub struct SymDiffEstimate {
    pub sym_diff: f64,
    pub a_n_volume: f64,
}

pub fn sym_diff_volume(a: &RegionSpec, points: &PointSet, m: usize, rng: &mut StreamRng) -> Result<SymDiffEstimate> {
    let omega = RegionSpec::unit_box(points.dim());
    let index = KnnIndex::build(points);
    let mut mismatch = 0usize;
    let mut inside = 0usize;
    for _ in 0..m {
        let z = omega.sample_uniform(rng);
        let in_est = voronoi_estimate_membership(&z, a, points, &index)?;
        if in_est {
            inside += 1;
        }
        if in_est != a.contains(&z) {
            mismatch += 1;
        }
    }
    Ok(SymDiffEstimate { sym_diff: mismatch as f64 / m as f64, a_n_volume: inside as f64 / m as f64 })
}

/// The same symmetric difference computed cell-by-cell:
/// `sum_{x notin A} |V cap A| + sum_{x in A} |V \ A|`. An independent route
/// used to cross-check [`sym_diff_volume`].
pub fn sym_diff_volume_via_cells(a: &RegionSpec, points: &PointSet, m: usize, rng: &mut StreamRng) -> Result<f64> {
    let omega = RegionSpec::unit_box(points.dim());
    let index = KnnIndex::build(points);
    let mut acc = vec![0usize; points.len()];
    let mut batch_in_a = Vec::with_capacity(m);
    let mut assign = Vec::with_capacity(m);
    for _ in 0..m {
        let z = omega.sample_uniform(rng);
        batch_in_a.push(a.contains(&z));
        assign.push(index.nearest_nucleus(&z)?);
    }
    for (i, cell) in assign.iter().enumerate() {
        let nucleus_in_a = a.contains(points.location(*cell));
        if nucleus_in_a != batch_in_a[i] {
            acc[*cell] += 1;
        }
    }
    Ok(acc.iter().sum::<usize>() as f64 / m as f64)
}

/// The Gamma statistic and the companion mean squared k-th-neighbour
/// distance: `gamma = (2n)^{-1} sum_i (Y_j(i) - Y_i)^2`,
/// `delta = n^{-1} sum_i |X_j(i) - X_i|^2`, where `j(i)` is the k-th nearest
/// neighbour of `X_i`.
pub fn gamma_statistic(data: &PointSet, k: usize) -> Result<(f64, f64)> {
    let n = data.len();
    if n <= k {
        return Err(Error::InsufficientSample { n, k });
    }
    let index = KnnIndex::build(data);
    let mut gamma = 0.0;
    let mut delta = 0.0;
    for i in 0..n {
        let nbrs = index.knn(data.location(i), k, Some(i));
        let j = match nbrs[k - 1] {
            Neighbor::Point(j) => j,
            Neighbor::Query => unreachable!("n > k guarantees a k-th neighbour"),
        };
        let dy = data.mark(j).unwrap_or(0.0) - data.mark(i).unwrap_or(0.0);
        gamma += dy * dy;
        delta += dist_sq(data.location(j), data.location(i));
    }
    Ok((gamma / (2.0 * n as f64), delta / n as f64))
}

/// Empirical gradient-to-spacing ratio: MC estimate of
/// `E[(grad h(X_i) . (X_j(i) - X_i))^2] / (2 E[|X_j(i) - X_i|^2])`,
/// pooled over all points and `reps` replications.
pub fn ank_empirical(
    model: &RegressionModel,
    kappa: &DensitySpec,
    n: usize,
    k: usize,
    reps: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    if n <= k {
        return Err(Error::InsufficientSample { n, k });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..reps {
        let xs = sample_binomial(n, kappa, rng)?;
        let index = KnnIndex::build(&xs);
        for i in 0..n {
            let nbrs = index.knn(xs.location(i), k, Some(i));
            let j = nbrs[k - 1].index().expect("n > k");
            let x = xs.location(i);
            let g = model.grad_h(x);
            let dot: f64 = g.iter().zip(xs.location(j)).zip(x).map(|((gi, nj), xi)| gi * (nj - xi)).sum();
            num += dot * dot;
            den += dist_sq(xs.location(j), x);
        }
    }
    Ok(num / (2.0 * den))
}

/// Closed-form limit of the gradient-to-spacing ratio, by MC quadrature:
/// `int kappa^{(d-2)/d} |grad h|^2 dx / (2 d int kappa^{(d-2)/d} dx)`.
pub fn ank_limit(
    model: &RegressionModel,
    kappa: &DensitySpec,
    omega: &RegionSpec,
    m: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    let d = omega.dim() as f64;
    let expo = (d - 2.0) / d;
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..m {
        let z = omega.sample_uniform(rng);
        let w = kappa.eval(&z).powf(expo);
        let g = model.grad_h(&z);
        num += w * g.iter().map(|v| v * v).sum::<f64>();
        den += w;
    }
    Ok(num / (2.0 * d * den))
}

/// `E[rho_k^2]`: mean squared k-th-neighbour distance to the origin in a
/// unit-intensity homogeneous Poisson process,
/// `omega_d^{-2/d} Gamma(k + 2/d) / Gamma(k)`.
pub fn rho_k_sq_mean(k: usize, d: usize) -> f64 {
    assert!(k >= 1 && d >= 1);
    let dd = d as f64;
    let log = -2.0 / dd * unit_ball_volume(d).ln() + ln_gamma(k as f64 + 2.0 / dd) - ln_gamma(k as f64);
    log.exp()
}

/// Monte Carlo check of the directional second moment of the k-th neighbour
/// of the origin in a homogeneous Poisson process of intensity `lambda`:
/// returns `(empirical, exact)` with the closed form
/// `d^{-1} lambda^{-2/d} |b|^2 E[rho_k^2]`.
///
/// The process is sampled on a box whose inscribed ball has Poisson mass
/// `50 k`, so the chance that the k-th neighbour escapes the box is
/// negligible (and never below the `5 (k / (lambda omega_d))^{1/d}`
/// half-width floor in d <= 2).
pub fn lemma52_check(b: &[f64], lambda: f64, k: usize, reps: usize, rng: &mut StreamRng) -> Result<(f64, f64)> {
    assert!(lambda > 0.0);
    let d = b.len();
    let dd = d as f64;
    let half_width = (50.0 * k as f64 / (lambda * unit_ball_volume(d))).powf(1.0 / dd);
    let boxr = RegionSpec::axis_box(vec![-half_width; d], vec![half_width; d]);
    let origin = vec![0.0; d];
    let mut acc = 0.0;
    for _ in 0..reps {
        let pts = sample_poisson_homogeneous(lambda, &boxr, rng)?;
        if pts.len() < k {
            // empty-enough realization: the k-th neighbour defaults to the
            // origin and contributes zero, matching the sentinel convention
            continue;
        }
        let index = KnnIndex::build(&pts);
        let j = index.knn(&origin, k, None)[k - 1].index().expect("len >= k");
        let dot: f64 = b.iter().zip(pts.location(j)).map(|(bi, xi)| bi * xi).sum();
        acc += dot * dot;
    }
    let b2: f64 = b.iter().map(|v| v * v).sum();
    let exact = b2 / dd * lambda.powf(-2.0 / dd) * rho_k_sq_mean(k, d);
    Ok((acc / reps as f64, exact))
}

/// Two-point extrapolation of the noise variance from Gamma statistics at
/// k = 1 and k = 2:
/// `n^{2/d} (gamma2 E[rho_1^2] - gamma1 E[rho_2^2]) / (E[rho_1^2] - E[rho_2^2])`.
pub fn two_point_sigma2(gamma1: f64, gamma2: f64, d: usize, n: usize) -> f64 {
    let r1 = rho_k_sq_mean(1, d);
    let r2 = rho_k_sq_mean(2, d);
    (n as f64).powf(2.0 / d as f64) * (gamma2 * r1 - gamma1 * r2) / (r1 - r2)
}

/// Limit of `n^{2/d} gamma_{n,k}` under the scaled model:
/// `sigma^2 + (E[rho_k^2] / (2d)) int |grad h|^2 kappa^{1 - 2/d} dx`,
/// with the integral by MC quadrature over `omega`.
pub fn gamma_limit_scaled(
    model: &RegressionModel,
    kappa: &DensitySpec,
    omega: &RegionSpec,
    k: usize,
    m: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    let d = omega.dim() as f64;
    let vol = omega.volume().ok_or(Error::UnknownVolume)?;
    let mut acc = 0.0;
    for _ in 0..m {
        let z = omega.sample_uniform(rng);
        let g = model.grad_h(&z);
        acc += g.iter().map(|v| v * v).sum::<f64>() * kappa.eval(&z).powf(1.0 - 2.0 / d);
    }
    let integral = vol * acc / m as f64;
    Ok(model.sigma * model.sigma + rho_k_sq_mean(k, omega.dim()) / (2.0 * d) * integral)
}

/// Summary of one Gamma-test evaluation.
#[derive(Debug, Clone)]
pub struct GammaReport {
    /// `(k, gamma, delta)` per requested rank.
    pub per_k: Vec<(usize, f64, f64)>,
    pub two_point_sigma2: f64,
    /// `(k, empirical ratio)` per requested rank, when computed.
    pub a_nk_empirical: Vec<(usize, f64)>,
}

impl GammaReport {
    /// Gamma statistics at k = 1, 2 and the two-point variance extrapolation.
    pub fn from_data(data: &PointSet) -> Result<Self> {
        let (g1, d1) = gamma_statistic(data, 1)?;
        let (g2, d2) = gamma_statistic(data, 2)?;
        Ok(GammaReport {
            per_k: vec![(1, g1, d1), (2, g2, d2)],
            two_point_sigma2: two_point_sigma2(g1, g2, data.dim(), data.len()),
            a_nk_empirical: Vec::new(),
        })
    }
}

/// Parse delimiter-separated regression rows: `d` coordinate columns then
/// one response column, delimited by commas, semicolons, tabs or spaces. An
/// optional single header line is skipped; any malformed data row aborts
/// with its line number.
pub fn parse_regression_data<R: BufRead>(reader: R) -> Result<PointSet> {
    let mut dim: Option<usize> = None;
    let mut out: Option<PointSet> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed
            .split([',', ';', '\t', ' '])
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|s| s.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if lineno == 1 && dim.is_none() => continue, // header line
            Err(e) => {
                return Err(Error::Parse { line: lineno, message: format!("{e} in row `{trimmed}`") });
            }
        };
        if values.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected at least 2 columns (coordinates + response), got {}", values.len()),
            });
        }
        let d = *dim.get_or_insert(values.len() - 1);
        if values.len() != d + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} columns, got {}", d + 1, values.len()),
            });
        }
        let set = out.get_or_insert_with(|| PointSet::new(d));
        let (coords, y) = values.split_at(d);
        set.push(MarkedPoint::with_mark(Point::new(coords.to_vec()), y[0]));
    }
    out.ok_or(Error::EmptyPointSet)
}

/// Load a regression data file; see [`parse_regression_data`].
pub fn load_regression_file(path: &Path) -> Result<PointSet> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_regression_data(BufReader::new(file))
}
