use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use perturbed_scenery::detectors::{
    cube_scan_detect, drift_tube_detect, lr_detect, radial_detect, tree_cut_detect, CubeParams, DetectorOutcome,
    GEngine, TubeGeometry, TubeParams,
};
use perturbed_scenery::harness::{
    emit_report, intersection_dimension_sweep, interpolate_nu, render_report, run_detection_experiment,
    run_threshold_sweep, trial_seed, ExperimentConfig, Report, ReportFormat, SweepSpec, NULL_ARM, PERTURBED_ARM,
};
use perturbed_scenery::lattice::{estimate_intersection_tail, PathSampler, StopRule, WalkSpec, DEFAULT_MAX_STEPS};
use perturbed_scenery::scenery::{self as scenery_io, sample_null, sample_perturbed, sample_perturbed_tree, SceneryWindow};
use perturbed_scenery::seeds::stream_rng;
use perturbed_scenery::trees::{
    branching_number, estimate_tree_walk_tail, first_crossing_antichain, local_dimension_estimate, min_cut_sum,
    sample_ray, BranchingConfig, Cut, CutSumSource, FlowSpec, FlowTree, LevelProfile, TreeGenerator,
};
use perturbed_scenery::{Error, Measures, Result};

/// Simulate perturbed sceneries and run detection experiments.
#[derive(Parser)]
#[command(name = "scenery", version)]
struct Cli {
    /// Master seed; overrides the seed of a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: ReportFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a detection experiment from a config file, or write one scenery
    /// of it with --arm.
    Simulate(SimulateArgs),
    /// Apply one detector to a stored scenery.
    Detect(DetectArgs),
    /// Repeat an experiment over a list of measures, sizes or depths, or
    /// compare intersection tails across dimensions.
    Sweep(SweepArgs),
    /// Branching number, cut sums and local dimensions of a tree.
    TreeAnalyze(TreeArgs),
    /// Intersection tail of two independent walks.
    Intersect(IntersectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Arm {
    Null,
    Perturbed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    Binary,
    Json,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write a single scenery of this arm instead of running the experiment.
    #[arg(long, value_enum)]
    arm: Option<Arm>,
    /// Trial index of the scenery written with --arm.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long, value_enum, default_value = "binary")]
    encoding: Encoding,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorKind {
    Cube,
    Radial,
    Tube,
    Lr,
    Treecut,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Walk {
    Simple,
    Oriented,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, value_enum)]
    detector: DetectorKind,
    /// Scenery file, binary or JSON (by the `.json` extension).
    #[arg(long)]
    scenery: PathBuf,
    /// JSON file `{"mu": [...], "nu": [...]}`.
    #[arg(long)]
    pair: PathBuf,
    /// cube: threshold parameter.
    #[arg(long)]
    delta: Option<f64>,
    /// cube: label to count (default: largest nu - mu).
    #[arg(long)]
    label: Option<usize>,
    /// cube: cube side (default: k(n)).
    #[arg(long)]
    side: Option<usize>,
    /// radial: number of shells.
    #[arg(long)]
    shells: Option<usize>,
    /// tube: mean drift, comma separated.
    #[arg(long, value_delimiter = ',')]
    mean: Option<Vec<f64>>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    gamma_hat: Option<f64>,
    #[arg(long)]
    k_min: Option<u32>,
    #[arg(long)]
    k_max: Option<u32>,
    /// lr/treecut: tree generator (see tree-analyze).
    #[arg(long)]
    generator: Option<String>,
    /// lr on a lattice: Monte Carlo engine walk law.
    #[arg(long, value_enum)]
    walk: Option<Walk>,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    /// lr: reveal counts to report.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// treecut: level cuts `FROM..TO`.
    #[arg(long)]
    levels: Option<String>,
    /// treecut: crossing antichains `H,GAMMA,K1,K2,...`.
    #[arg(long, value_delimiter = ',')]
    crossing: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepArgs {
    /// Base experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// TOML sweep spec, e.g. `kind = "depth"` and `values = [8, 10]`.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Interpolate nu from mu to this target (comma separated).
    #[arg(long, value_delimiter = ',')]
    nu_to: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    half_widths: Option<Vec<i64>>,
    /// Intersection tails of oriented walks in these dimensions instead.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 10000)]
    samples: usize,
}

#[derive(Args)]
struct TreeArgs {
    /// `bary:B`, `spherical:C1,C2,...`, `random:P0,P1,...`, or
    /// `file:PATH` for an edge list (`parent child` per line, root 0).
    #[arg(long)]
    generator: String,
    /// Depth for generated trees.
    #[arg(long, default_value_t = 12)]
    depth: usize,
    /// `uniform` or `maxflow:BETA`.
    #[arg(long, default_value = "uniform")]
    flow: String,
    /// Bisection bracket `LO,HI`.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 8.0])]
    beta_range: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Rays sampled for the dimension histogram.
    #[arg(long, default_value_t = 1000)]
    rays: usize,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WalkKind {
    Simple,
    Oriented,
    /// Simple walk on the (b+1)-regular tree, `b = --dim`.
    Tree,
}

#[derive(Args)]
struct IntersectArgs {
    #[arg(long, value_enum)]
    kind: WalkKind,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 10000)]
    samples: usize,
    /// Fit window `LO,HI` over n (default: automatic).
    #[arg(long, value_delimiter = ',')]
    fit_window: Option<Vec<usize>>,
    /// Where the fit summary JSON goes (default: standard error).
    #[arg(long)]
    fit_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate(a) => simulate(a, seed, out, cli.format),
        Command::Detect(a) => {
            let outcome = detect(a, seed.unwrap_or(0))?;
            write_text(out, &(serde_json::to_string(&outcome)? + "\n"))
        }
        Command::Sweep(a) => sweep(a, seed, out, cli.format),
        Command::TreeAnalyze(a) => tree_analyze(a, seed.unwrap_or(0), out),
        Command::Intersect(a) => intersect(a, seed.unwrap_or(0), out),
    }
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit<R: Report>(report: &R, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => emit_report(report, format, p),
        None => write_text(None, &render_report(report, format)?),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn simulate(a: SimulateArgs, seed: Option<u64>, out: Option<&Path>, format: ReportFormat) -> Result<()> {
    let cfg = load_config(&a.config, seed)?;
    let Some(arm) = a.arm else {
        let report = run_detection_experiment(&cfg)?;
        if out.is_none() {
            if let Some(p) = &cfg.output.json {
                emit_report(&report, ReportFormat::Json, p)?;
            }
            if let Some(p) = &cfg.output.csv {
                emit_report(&report, ReportFormat::Csv, p)?;
            }
            if cfg.output.json.is_some() || cfg.output.csv.is_some() {
                return Ok(());
            }
        }
        return emit(&report, format, out);
    };
    let pair = cfg.pair.clone();
    let scenery = match arm {
        Arm::Null => {
            let s = trial_seed(cfg.seed, NULL_ARM, a.index);
            match (cfg.window()?, cfg.tree()?) {
                (Some(w), _) => sample_null(perturbed_scenery::scenery::Domain::lattice(w), &pair, s)?,
                (None, Some(t)) => sample_null(perturbed_scenery::scenery::Domain::tree(&t), &pair, s)?,
                _ => unreachable!(),
            }
        }
        Arm::Perturbed => {
            let s = trial_seed(cfg.seed, PERTURBED_ARM, a.index);
            match (cfg.window()?, cfg.tree()?, &cfg.path) {
                (Some(w), _, Some(p)) => sample_perturbed(w, &pair, &p.sampler(w.dim, w.half_width)?, s)?,
                (None, Some(t), _) => sample_perturbed_tree(&t, &pair, s)?,
                _ => return Err(Error::Config("no hidden-path law configured".into())),
            }
        }
    };
    let mut buf = Vec::new();
    match a.encoding {
        Encoding::Binary => scenery_io::write_binary(&scenery, &mut buf)?,
        Encoding::Json => scenery_io::write_json(&scenery, &mut buf)?,
    }
    match out {
        Some(p) => BufWriter::new(File::create(p)?).write_all(&buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn read_scenery(path: &Path) -> Result<SceneryWindow> {
    let f = BufReader::new(File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?);
    if path.extension().is_some_and(|e| e == "json") {
        scenery_io::read_json(f)
    } else {
        scenery_io::read_binary(f)
    }
}

fn read_pair(path: &Path) -> Result<Measures> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("pair file {}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse list entry {x:?}")))
        })
        .collect()
}

/// Builds a tree from `bary:B`, `spherical:C1,...`, `random:P0,...` or
/// `file:PATH`.
fn parse_generator(spec: &str, depth: usize, seed: u64) -> Result<TreeGenerator> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("generator {spec:?} needs KIND:ARGS")))?;
    Ok(match kind {
        "bary" | "b-ary" => TreeGenerator::BAry {
            b: rest.parse().map_err(|_| Error::Config(format!("bad branching {rest:?}")))?,
            depth,
        },
        "spherical" => TreeGenerator::SphericallySymmetric {
            child_counts: parse_list(rest)?,
            depth,
        },
        "random" => TreeGenerator::Random {
            offspring: parse_list(rest)?,
            depth,
            seed,
            max_nodes: 1 << 22,
        },
        "file" => {
            let text = std::fs::read_to_string(rest).map_err(|e| Error::Config(format!("{rest}: {e}")))?;
            let t = FlowTree::<f64>::parse_edge_list(&text)?;
            TreeGenerator::Explicit {
                edges: (1..t.len()).map(|v| (t.parent(v).unwrap(), v)).collect(),
            }
        }
        other => return Err(Error::Config(format!("unknown generator kind {other:?}"))),
    })
}

fn parse_flow(spec: &str) -> Result<FlowSpec<f64>> {
    match spec.split_once(':') {
        None if spec == "uniform" => Ok(FlowSpec::UniformSplit),
        Some(("maxflow", beta)) => Ok(FlowSpec::MaxFlowForBeta(
            beta.parse().map_err(|_| Error::Config(format!("bad beta {beta:?}")))?,
        )),
        _ => Err(Error::Config(format!("flow must be uniform or maxflow:BETA, got {spec:?}"))),
    }
}

fn detect_tree(a: &DetectArgs, scenery: &SceneryWindow, seed: u64) -> Result<FlowTree<f64>> {
    let spec = a
        .generator
        .as_deref()
        .ok_or_else(|| Error::Config("tree detectors need --generator".into()))?;
    let depth = match scenery.domain() {
        perturbed_scenery::scenery::Domain::Tree { depth, .. } => depth,
        _ => return Err(Error::Config("scenery is not on a tree".into())),
    };
    FlowTree::build(&parse_generator(spec, depth, seed)?)
}

fn detect(a: DetectArgs, seed: u64) -> Result<DetectorOutcome> {
    let scenery = read_scenery(&a.scenery)?.blind();
    let pair = read_pair(&a.pair)?;
    match a.detector {
        DetectorKind::Cube => {
            let delta = a.delta.ok_or_else(|| Error::Config("cube needs --delta".into()))?;
            cube_scan_detect(
                &scenery,
                &pair,
                &CubeParams {
                    rho_star: a.label,
                    delta,
                    side: a.side,
                },
            )
        }
        DetectorKind::Radial => radial_detect(&scenery, &pair, a.shells),
        DetectorKind::Tube => {
            let need = |name: &str| Error::Config(format!("tube needs --{name}"));
            let mean = a.mean.clone().ok_or_else(|| need("mean"))?;
            let params = TubeParams {
                xi: a.label,
                mean: mean.clone(),
                rho: a.rho.ok_or_else(|| need("rho"))?,
                k_min: a.k_min.ok_or_else(|| need("k-min"))?,
                k_max: a.k_max.ok_or_else(|| need("k-max"))?,
                gamma_hat: a.gamma_hat.ok_or_else(|| need("gamma-hat"))?,
            };
            let geometry = TubeGeometry::new(scenery.domain().as_box()?, &mean, params.k_min, params.k_max)?;
            drift_tube_detect(&scenery, &pair, &params, &geometry)
        }
        DetectorKind::Lr => match a.walk {
            None => {
                let tree = detect_tree(&a, &scenery, seed)?;
                lr_detect(
                    &scenery,
                    &pair,
                    GEngine::Exact {
                        tree: &tree,
                        schedule: a.schedule.as_deref(),
                    },
                )
            }
            Some(w) => {
                let window = scenery.domain().as_box()?;
                let spec = match w {
                    Walk::Simple => WalkSpec::simple(window.dim)?,
                    Walk::Oriented => WalkSpec::oriented(window.dim)?,
                };
                let sampler = PathSampler::Walk {
                    spec,
                    stop: StopRule::WindowExit {
                        half_width: window.half_width,
                    },
                    max_steps: DEFAULT_MAX_STEPS,
                };
                let schedule = a.schedule.clone().unwrap_or_else(|| vec![window.len()]);
                lr_detect(
                    &scenery,
                    &pair,
                    GEngine::MonteCarlo {
                        sampler: &sampler,
                        replicas: a.replicas,
                        schedule: &schedule,
                        seed,
                    },
                )
            }
        },
        DetectorKind::Treecut => {
            let tree = detect_tree(&a, &scenery, seed)?;
            let cuts: Vec<Cut> = match (&a.levels, &a.crossing) {
                (Some(r), None) => {
                    let (from, to) = r
                        .split_once("..")
                        .and_then(|(x, y)| Some((x.parse::<usize>().ok()?, y.parse::<usize>().ok()?)))
                        .ok_or_else(|| Error::Config(format!("--levels wants FROM..TO, got {r:?}")))?;
                    (from..=to).map(|d| Cut::level(&tree, d)).collect::<Result<_>>()?
                }
                (None, Some(c)) if c.len() >= 3 => c[2..]
                    .iter()
                    .map(|&k| first_crossing_antichain(&tree, c[0], c[1], k as usize).map(|x| x.cut))
                    .filter(|c| c.as_ref().map_or(true, |c| !c.vertices.is_empty()))
                    .collect::<Result<_>>()?,
                _ => return Err(Error::Config("treecut needs --levels FROM..TO or --crossing H,GAMMA,K...".into())),
            };
            tree_cut_detect(&scenery, &tree, &pair, &cuts)
        }
    }
}

fn sweep(a: SweepArgs, seed: Option<u64>, out: Option<&Path>, format: ReportFormat) -> Result<()> {
    if let Some(dims) = &a.dims {
        let tails = intersection_dimension_sweep(dims, a.horizon, a.samples, None, seed.unwrap_or(0))?;
        let summary: Vec<_> = tails
            .iter()
            .map(|t| json!({ "dim": t.dim, "fit": t.report.fit, "half_horizon_fit": t.report.half_horizon_fit }))
            .collect();
        let text = match format {
            ReportFormat::Json => serde_json::to_string_pretty(&json!({ "tails": tails, "summary": summary }))? + "\n",
            ReportFormat::Csv => {
                let mut s = String::from("dim,n,tail,ci_lo,ci_hi\n");
                for t in &tails {
                    for r in &t.report.rows {
                        s.push_str(&format!("{},{},{},{},{}\n", t.dim, r.n, r.tail, r.ci_lo, r.ci_hi));
                    }
                }
                s
            }
        };
        return write_text(out, &text);
    }
    let path = a
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("sweep needs --config (or --dims)".into()))?;
    let cfg = load_config(path, seed)?;
    let spec = match (&a.spec, &a.nu_to, &a.depths, &a.half_widths) {
        (Some(p), None, None, None) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            toml::from_str::<SweepSpec>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        (None, Some(target), None, None) => SweepSpec::Nu {
            values: interpolate_nu(cfg.pair.mu(), target, a.steps)?,
        },
        (None, None, Some(d), None) => SweepSpec::Depth { values: d.clone() },
        (None, None, None, Some(h)) => SweepSpec::HalfWidth { values: h.clone() },
        _ => {
            return Err(Error::Config(
                "give exactly one of --spec, --nu-to, --depths, --half-widths".into(),
            ))
        }
    };
    let table = run_threshold_sweep(&cfg, &spec)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    emit(&table, format, out)
}

fn tree_analyze(a: TreeArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    if a.beta_range.len() != 2 {
        return Err(Error::Config("--beta-range wants LO,HI".into()));
    }
    let generator = parse_generator(&a.generator, a.depth, seed)?;
    let tree = FlowTree::<f64>::build(&generator)?.attach_flow(parse_flow(&a.flow)?)?;
    let depth = CutSumSource::max_depth(&tree);
    let step = (depth / 4).max(1);
    let cfg = BranchingConfig {
        lo: a.beta_range[0],
        hi: a.beta_range[1],
        tol: a.tol,
        start_depth: step,
        depth_step: step,
    };
    let estimate = match LevelProfile::from_generator(&generator, depth) {
        Some(p) => branching_number(&p, &cfg)?,
        None => branching_number(&tree, &cfg)?,
    };
    let grid = 9;
    let cut_sums = (0..grid)
        .map(|i| {
            let beta = cfg.lo + (cfg.hi - cfg.lo) * i as f64 / (grid - 1) as f64;
            Ok(json!({ "beta": beta, "depth": depth, "min_cut_sum": min_cut_sum(&tree, &beta)? }))
        })
        .collect::<Result<Vec<_>>>()?;
    let histogram = if depth >= 10 && a.rays > 0 && a.bins > 0 {
        let mut rng = stream_rng(seed, 0);
        let estimates: Vec<f64> = (0..a.rays)
            .map(|_| local_dimension_estimate(&tree, &sample_ray(&tree, &mut rng)))
            .collect::<Result<_>>()?;
        let finite: Vec<f64> = estimates.iter().copied().filter(|x| x.is_finite()).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / a.bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; a.bins];
        for x in &finite {
            let b = (((x - lo) / width) as usize).min(a.bins - 1);
            counts[b] += 1;
        }
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| json!({ "lo": lo + i as f64 * width, "hi": lo + (i + 1) as f64 * width, "count": c }))
            .collect()
    } else {
        Vec::new()
    };
    let report = json!({
        "vertices": tree.len(),
        "depth": depth,
        "branching_bracket": [estimate.lo, estimate.hi],
        "branching_estimate": estimate.estimate,
        "inconclusive": estimate.inconclusive,
        "depth_schedule": estimate.depth_schedule,
        "cut_sums": cut_sums,
        "dimension_histogram": histogram,
    });
    write_text(out, &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn intersect(a: IntersectArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let window = match a.fit_window.as_deref() {
        None => None,
        Some([lo, hi]) => Some((*lo, *hi)),
        Some(_) => return Err(Error::Config("--fit-window wants LO,HI".into())),
    };
    let mut rng = stream_rng(seed, 0);
    let report = match a.kind {
        WalkKind::Simple => estimate_intersection_tail(&WalkSpec::simple(a.dim)?, a.horizon, a.samples, window, &mut rng)?,
        WalkKind::Oriented => {
            estimate_intersection_tail(&WalkSpec::oriented(a.dim)?, a.horizon, a.samples, window, &mut rng)?
        }
        WalkKind::Tree => estimate_tree_walk_tail(a.dim, a.horizon, a.samples, window, &mut rng)?,
    };
    write_text(out, &report.to_csv())?;
    let fit = serde_json::to_string_pretty(&json!({
        "horizon": report.horizon,
        "samples": report.samples,
        "fit": report.fit,
        "half_horizon_fit": report.half_horizon_fit,
    }))? + "\n";
    match &a.fit_out {
        Some(p) => std::fs::write(p, fit)?,
        None => eprint!("{fit}"),
    }
    Ok(())
}
