//! Flat key-value experiment configuration.
//!
//! Config files are plain text, one `key = value` pair per line, `#`
//! comments allowed. CLI flags override file values.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::Error;
use crate::estimators::{HFamily, RegressionModel};
use crate::geometry::RegionSpec;
use crate::point_process::DensitySpec;
use crate::Result;

/// The experiments the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    VoronoiCoverage,
    GammaAnk,
    GammaTwoPoint,
    Lemma52,
    CellVolume,
    AddOneDiagnostic,
    MetricDConvergence,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "voronoi-coverage" => Ok(Experiment::VoronoiCoverage),
            "gamma-ank" => Ok(Experiment::GammaAnk),
            "gamma-two-point" => Ok(Experiment::GammaTwoPoint),
            "lemma52" => Ok(Experiment::Lemma52),
            "cell-volume" => Ok(Experiment::CellVolume),
            "add-one-diagnostic" => Ok(Experiment::AddOneDiagnostic),
            "metric-d-convergence" => Ok(Experiment::MetricDConvergence),
            other => Err(Error::config("experiment", format!("unknown experiment `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::VoronoiCoverage => "voronoi-coverage",
            Experiment::GammaAnk => "gamma-ank",
            Experiment::GammaTwoPoint => "gamma-two-point",
            Experiment::Lemma52 => "lemma52",
            Experiment::CellVolume => "cell-volume",
            Experiment::AddOneDiagnostic => "add-one-diagnostic",
            Experiment::MetricDConvergence => "metric-d-convergence",
        }
    }
}

/// Density specification over the unit cube.
#[derive(Debug, Clone)]
pub enum KappaSpec {
    Uniform,
    /// Piecewise-constant on a regular grid with the given per-cell weights.
    Piecewise { cells_per_axis: usize, weights: Vec<f64> },
    /// Truncated Gaussian bump centred in the cube.
    Gaussian { bandwidth: f64 },
}

impl KappaSpec {
    pub fn build(&self, d: usize) -> Result<DensitySpec> {
        let omega = RegionSpec::unit_box(d);
        match self {
            KappaSpec::Uniform => DensitySpec::uniform(omega),
            KappaSpec::Piecewise { cells_per_axis, weights } => {
                DensitySpec::piecewise_on_grid(omega, *cells_per_axis, weights.clone())
            }
            KappaSpec::Gaussian { bandwidth } => {
                DensitySpec::truncated_gaussian(omega, vec![0.5; d], *bandwidth)
            }
        }
    }
}

/// Target set specification for the coverage experiment.
#[derive(Debug, Clone)]
pub enum TargetSetSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl TargetSetSpec {
    pub fn build(&self) -> RegionSpec {
        match self {
            TargetSetSpec::Ball { center, radius } => RegionSpec::ball(center.clone(), *radius),
            TargetSetSpec::Box { lo, hi } => RegionSpec::axis_box(lo.clone(), hi.clone()),
        }
    }
}

/// A fully validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub mc_samples: usize,
    pub kappa: KappaSpec,
    pub target_set: Option<TargetSetSpec>,
    pub h: HFamily,
    pub sigma: f64,
    pub scaled: bool,
    pub k_values: Vec<usize>,
    /// Intensity for the Poisson experiments.
    pub lambda: f64,
    /// Multiplier on `lambda(n) = n`, honoured by the add-one diagnostic
    /// only.
    pub lambda_factor: f64,
}

impl ExperimentConfig {
    pub fn model(&self) -> RegressionModel {
        RegressionModel::new(self.h.clone(), self.sigma, self.scaled)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must be non-empty"));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("n_grid", "must be strictly increasing"));
        }
        if self.reps < 1 {
            return Err(Error::config("reps", "must be >= 1"));
        }
        if self.d < 1 {
            return Err(Error::config("d", "must be >= 1"));
        }
        if self.mc_samples < 1 {
            return Err(Error::config("mc_samples", "must be >= 1"));
        }
        if self.k_values.is_empty() || self.k_values.iter().any(|k| *k < 1) {
            return Err(Error::config("k_values", "must be non-empty positive ranks"));
        }
        if self.sigma < 0.0 {
            return Err(Error::config("sigma", "must be >= 0"));
        }
        if self.lambda <= 0.0 {
            return Err(Error::config("lambda", "must be > 0"));
        }
        if self.lambda_factor <= 0.0 {
            return Err(Error::config("lambda_factor", "must be > 0"));
        }
        if let HFamily::Linear { b } = &self.h {
            if b.len() != self.d {
                return Err(Error::config("b", format!("expected {} components, got {}", self.d, b.len())));
            }
        }
        if let Some(t) = &self.target_set {
            let dim = match t {
                TargetSetSpec::Ball { center, .. } => center.len(),
                TargetSetSpec::Box { lo, .. } => lo.len(),
            };
            if dim != self.d {
                return Err(Error::config("a_center", format!("target set dimension {dim} != d {}", self.d)));
            }
        }
        self.kappa.build(self.d)?;
        Ok(())
    }

    /// Parse a flat key-value config text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: HashMap<String, String> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            kv.insert(key.trim().to_string(), value.trim().to_string());
        }
        Self::from_kv(&kv)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    fn from_kv(kv: &HashMap<String, String>) -> Result<Self> {
        let get = |key: &str| kv.get(key).map(String::as_str);
        let required = |key: &'static str| {
            get(key).ok_or_else(|| Error::config(key, "missing required key"))
        };
        let parse_num = |key: &'static str, value: &str| -> Result<f64> {
            value.parse().map_err(|_| Error::config(key, format!("not a number: `{value}`")))
        };
        let parse_usize = |key: &'static str, value: &str| -> Result<usize> {
            value.parse().map_err(|_| Error::config(key, format!("not a count: `{value}`")))
        };
        let parse_list = |key: &'static str, value: &str| -> Result<Vec<f64>> {
            value.split(',').map(|s| parse_num(key, s.trim())).collect()
        };

        let experiment = Experiment::parse(required("experiment")?)?;
        let d = parse_usize("d", get("d").unwrap_or("2"))?;
        let n_grid: Vec<usize> = required("n_grid")?
            .split(',')
            .map(|s| parse_usize("n_grid", s.trim()))
            .collect::<Result<_>>()?;
        let reps = parse_usize("reps", get("reps").unwrap_or("20"))?;
        let seed = get("seed")
            .unwrap_or("0")
            .parse()
            .map_err(|_| Error::config("seed", "not an unsigned integer"))?;
        let mc_samples = parse_usize("mc_samples", get("mc_samples").unwrap_or("10000"))?;

        let kappa = match get("kappa").unwrap_or("uniform") {
            "uniform" => KappaSpec::Uniform,
            spec if spec.starts_with("piecewise:") => {
                let rest = &spec["piecewise:".len()..];
                let (cells, weights) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::config("kappa", "expected piecewise:<cells>:<w1,w2,...>"))?;
                KappaSpec::Piecewise {
                    cells_per_axis: parse_usize("kappa", cells)?,
                    weights: parse_list("kappa", weights)?,
                }
            }
            spec if spec.starts_with("gaussian:") => KappaSpec::Gaussian {
                bandwidth: parse_num("kappa", &spec["gaussian:".len()..])?,
            },
            other => return Err(Error::config("kappa", format!("unknown density `{other}`"))),
        };

        let target_set = match get("a_kind") {
            None => None,
            Some("ball") => Some(TargetSetSpec::Ball {
                center: parse_list("a_center", required("a_center")?)?,
                radius: parse_num("a_radius", required("a_radius")?)?,
            }),
            Some("box") => Some(TargetSetSpec::Box {
                lo: parse_list("a_lo", required("a_lo")?)?,
                hi: parse_list("a_hi", required("a_hi")?)?,
            }),
            Some(other) => return Err(Error::config("a_kind", format!("unknown set kind `{other}`"))),
        };

        let h = match get("h").unwrap_or("linear") {
            "linear" => HFamily::Linear {
                b: match get("b") {
                    Some(b) => parse_list("b", b)?,
                    None => vec![0.0; d],
                },
            },
            "quadratic" => HFamily::Quadratic,
            "sinusoidal" => HFamily::Sinusoidal,
            other => return Err(Error::config("h", format!("unknown h family `{other}`"))),
        };
        let sigma = parse_num("sigma", get("sigma").unwrap_or("0"))?;
        let scaled = match get("scaled").unwrap_or("false") {
            "true" => true,
            "false" => false,
            other => return Err(Error::config("scaled", format!("expected true/false, got `{other}`"))),
        };
        let k_values: Vec<usize> = get("k_values")
            .unwrap_or("1,2")
            .split(',')
            .map(|s| parse_usize("k_values", s.trim()))
            .collect::<Result<_>>()?;
        let lambda = parse_num("lambda", get("lambda").unwrap_or("1"))?;
        let lambda_factor = parse_num("lambda_factor", get("lambda_factor").unwrap_or("1"))?;

        let cfg = ExperimentConfig {
            experiment,
            d,
            n_grid,
            reps,
            seed,
            mc_samples,
            kappa,
            target_set,
            h,
            sigma,
            scaled,
            k_values,
            lambda,
            lambda_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
