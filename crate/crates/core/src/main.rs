use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stabgeom::error::Error;
use stabgeom::estimators::{gamma_statistic, lemma52_check, rho_k_sq_mean};
use stabgeom::geometry::voronoi_cells_exact_1d;
use stabgeom::harness::{run, ConvergenceReport, ExperimentConfig, Format};
use stabgeom::point_process::{
    metric_d, sample_poisson_homogeneous, MarkedPoint, Point, PointSet, RngStream,
};
use stabgeom::geometry::{KnnIndex, RegionSpec};

/// Seeded Monte Carlo experiments for stabilizing spatial functionals.
#[derive(Parser)]
#[command(name = "stabgeom", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Config file (key = value lines); may also be given positionally.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Positional config path (alternative to --config).
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    config_pos: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Worker thread count; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and emit its convergence report.
    Run(RunArgs),
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(value_name = "CONFIG", conflicts_with = "config")]
        config_pos: Option<PathBuf>,
    },
    /// Print the value of a named brute-force oracle.
    Oracle {
        /// One of: rho-k-sq, voronoi-1d, metric-d, gamma-hand, lemma52
        name: String,
    },
}

fn config_path(flag: Option<PathBuf>, positional: Option<PathBuf>) -> Result<PathBuf, Error> {
    flag.or(positional)
        .ok_or_else(|| Error::InvalidConfig { field: "config".into(), message: "no config file given".into() })
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let path = config_path(args.config.clone(), args.config_pos.clone())?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let format = Format::parse(&args.format)?;
    let cfg = load_config(&args)?;
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig { field: "threads".into(), message: e.to_string() })?;
    }
    let report: ConvergenceReport = run(&cfg)?;
    match args.out {
        Some(path) => report.emit(format, &path)?,
        None => print!("{}", report.render(format)),
    }
    Ok(())
}

fn cmd_oracle(name: &str) -> Result<(), Error> {
    match name {
        "rho-k-sq" => {
            // closed form vs MC k-th-neighbour moment in a unit Poisson process
            for d in [1usize, 2] {
                for k in [1usize, 2] {
                    let mut rng = RngStream::new(424_242, (d * 10 + k) as u64).rng();
                    let (mc, _) = lemma52_mc_isotropic(d, k, 20_000, &mut rng)?;
                    println!("rho_k_sq d={d} k={k} closed={:.6} mc={mc:.6}", rho_k_sq_mean(k, d));
                }
            }
        }
        "voronoi-1d" => {
            let ps = PointSet::from_coords(1, &[vec![0.1], vec![0.2], vec![0.9]]);
            let cells = voronoi_cells_exact_1d(&ps, (0.0, 1.0))?;
            println!("nuclei 0.1,0.2,0.9 on (0,1) -> cell lengths {cells:?}");
            let ps = PointSet::from_coords(1, &[vec![0.25], vec![0.75]]);
            let cells = voronoi_cells_exact_1d(&ps, (0.0, 1.0))?;
            println!("nuclei 0.25,0.75 on (0,1) -> cell lengths {cells:?}");
        }
        "metric-d" => {
            let a = PointSet::from_coords(1, &[vec![0.5], vec![2.5]]);
            let b = PointSet::from_coords(1, &[vec![0.5], vec![3.5]]);
            println!("D = {}", metric_d(&a, &b, 1_000).as_extended());
            let c = PointSet::from_coords(1, &[vec![0.5]]);
            println!("D(identical) = {}", metric_d(&c, &c, 1_000).as_extended());
        }
        "gamma-hand" => {
            let mut ps = PointSet::new(1);
            ps.push(MarkedPoint::with_mark(Point::new(vec![0.0]), 1.0));
            ps.push(MarkedPoint::with_mark(Point::new(vec![0.1]), 2.0));
            ps.push(MarkedPoint::with_mark(Point::new(vec![0.5]), 0.0));
            let (g, d) = gamma_statistic(&ps, 1)?;
            println!("n=3 hand case: gamma={g:.6} delta={d:.6}");
        }
        "lemma52" => {
            let mut rng = RngStream::new(77, 0).rng();
            let (mc, exact) = lemma52_check(&[1.0, 0.0], 1.0, 1, 20_000, &mut rng)?;
            println!("d=2 lambda=1 k=1 b=(1,0): mc={mc:.6} exact={exact:.6}");
        }
        other => {
            return Err(Error::InvalidConfig {
                field: "oracle".into(),
                message: format!("unknown oracle `{other}`"),
            });
        }
    }
    Ok(())
}

/// Isotropic second moment of the k-th neighbour distance in a
/// unit-intensity Poisson process: direct MC companion to the closed form.
fn lemma52_mc_isotropic(d: usize, k: usize, reps: usize, rng: &mut stabgeom::point_process::StreamRng) -> Result<(f64, f64), Error> {
    let half = (50.0 * k as f64 / stabgeom::geometry::unit_ball_volume(d)).powf(1.0 / d as f64);
    let boxr = RegionSpec::axis_box(vec![-half; d], vec![half; d]);
    let origin = vec![0.0; d];
    let mut acc = 0.0;
    for _ in 0..reps {
        let pts = sample_poisson_homogeneous(1.0, &boxr, rng)?;
        if pts.len() < k {
            continue;
        }
        let index = KnnIndex::build(&pts);
        let j = index.knn(&origin, k, None)[k - 1].index().expect("len >= k");
        let r2: f64 = pts.location(j).iter().map(|v| v * v).sum();
        acc += r2;
    }
    Ok((acc / reps as f64, rho_k_sq_mean(k, d)))
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::InvalidConfig { .. } | Error::Parse { .. } => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { config, config_pos } => config_path(config, config_pos)
            .and_then(|p| ExperimentConfig::load(&p))
            .and_then(|cfg| cfg.validate())
            .map(|()| println!("ok")),
        Command::Oracle { name } => cmd_oracle(&name),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
