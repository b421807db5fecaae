use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use blowfish::evaluation::{policy_lower_bound, run_experiment, ExperimentConfig, ExperimentReport};
use blowfish::graph::{
    build_distance_threshold_graph, build_theta_spanner_grid, spanner_stretch, Domain, PolicyFamily, PolicyGraph,
    PolicySpec,
};
use blowfish::mechanism::{run_mechanism, MechanismId, MechanismSpec, NoiseSource};
use blowfish::transform::{policy_sensitivity, TransformPair};
use blowfish::workload::{
    load_histogram, make_workload, parse_range_queries, sample_range_workload, Workload, WorkloadKind,
};

#[derive(Parser, Debug)]
#[command(name = "blowfish", version, about = "Blowfish-private answers to linear counting queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build policy graphs.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Inspect the edge-space transform of a workload.
    #[command(subcommand)]
    Transform(TransformCmd),
    /// Run one mechanism once and print the noisy answers.
    Run(RunArgs),
    /// Run an experiment config and print the results.
    Experiment(ExperimentArgs),
    /// Spanner utilities.
    #[command(subcommand)]
    Spanner(SpannerCmd),
    /// SVD lower bound on the error of any matrix mechanism under a policy.
    Lowerbound(LowerboundArgs),
}

#[derive(Subcommand, Debug)]
enum GraphCmd {
    /// Print a policy graph as JSON.
    Build(GraphBuildArgs),
}

#[derive(Args, Debug)]
struct GraphBuildArgs {
    /// Domain shape, e.g. `4096` or `64,64`.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Defaults to `theta` when --theta is given, else `line` (1-D) or `grid`.
    #[arg(long)]
    family: Option<PolicyFamily>,
    #[arg(long)]
    theta: Option<usize>,
    /// Join the extra vertex ⊥ to every cell.
    #[arg(long)]
    bot: bool,
    /// Build the θ-spanner instead of the threshold graph.
    #[arg(long, requires = "theta")]
    spanner: bool,
}

#[derive(Subcommand, Debug)]
enum TransformCmd {
    /// Print the policy sensitivity, the transformed workload's shape and
    /// statistics of the incidence matrix.
    Show(TransformShowArgs),
}

#[derive(Args, Debug)]
struct WorkloadArgs {
    /// identity, cumulative, all-ranges or sampled-ranges.
    #[arg(long, conflicts_with = "queries")]
    workload: Option<WorkloadKind>,
    /// Range query file, one box per line: `lo_1,…,lo_d,hi_1,…,hi_d`, 1-based inclusive.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Number of ranges for sampled-ranges.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Seed for sampled-ranges.
    #[arg(long, default_value_t = 0)]
    workload_seed: u64,
}

impl WorkloadArgs {
    fn build(&self, domain: &Domain) -> Result<Workload, CliError> {
        if let Some(path) = &self.queries {
            let text = read(path)?;
            let ranges = parse_range_queries(&text, &path.display().to_string(), domain)?;
            return Ok(Workload::from_ranges(WorkloadKind::Custom, domain.clone(), ranges)?);
        }
        match self.workload {
            None => Err(CliError::Validation("one of --workload or --queries is required".into())),
            Some(WorkloadKind::SampledRanges) => Ok(sample_range_workload(domain, self.count, self.workload_seed)?.0),
            Some(WorkloadKind::Custom) => Err(CliError::Validation("a custom workload is given with --queries".into())),
            Some(kind) => Ok(make_workload(kind, domain)?),
        }
    }
}

#[derive(Args, Debug)]
struct TransformShowArgs {
    /// Policy graph JSON as printed by `graph build`.
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    workload: WorkloadArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    mechanism: MechanismId,
    /// Histogram file: one count per line, or `i_1,…,i_d,count` lines.
    #[arg(long)]
    data: PathBuf,
    /// Overrides the shape read from the data file.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, env = "BLOWFISH_SEED", default_value_t = 0)]
    seed: u64,
    /// Return exact answers (for checking a pipeline end to end).
    #[arg(long)]
    noiseless: bool,
    /// Distance threshold for bf-theta1d and bf-thetamd.
    #[arg(long)]
    theta: Option<usize>,
    /// Fan-out of hierarchical strategies.
    #[arg(long, default_value_t = 2)]
    branching: usize,
    /// Neighbour notion for laplace and mm-*.
    #[arg(long, default_value = "star")]
    policy: PolicyFamily,
    #[command(flatten)]
    workload: WorkloadArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment JSON; relative paths inside it are resolved against its directory.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Overrides the config's seed.
    #[arg(long, env = "BLOWFISH_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum SpannerCmd {
    /// Print the stretch of `h` as a spanner of `g`.
    Check(SpannerCheckArgs),
}

#[derive(Args, Debug)]
struct SpannerCheckArgs {
    #[arg(long)]
    g: PathBuf,
    #[arg(long)]
    h: PathBuf,
}

#[derive(Args, Debug)]
struct LowerboundArgs {
    #[arg(long)]
    workload: WorkloadKind,
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// A family name (line, grid, theta, star, complete) or a graph JSON file.
    #[arg(long)]
    graph: String,
    #[arg(long)]
    theta: Option<usize>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    workload_seed: u64,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<blowfish::Error> for CliError {
    fn from(e: blowfish::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn read_graph(path: &Path) -> Result<PolicyGraph, CliError> {
    PolicyGraph::from_json(&read(path)?)
        .map_err(|e| CliError::Validation(format!("{}: not a policy graph: {e}", path.display())))
}

fn graph_build(a: &GraphBuildArgs) -> Result<String, CliError> {
    let domain = Domain::new(a.dims.clone())?;
    let g = if a.spanner {
        build_theta_spanner_grid(&domain, a.theta.unwrap_or(1))?
    } else {
        let family = a.family.unwrap_or(match (a.theta, domain.d()) {
            (Some(_), _) => PolicyFamily::Theta,
            (None, 1) => PolicyFamily::Line,
            (None, _) => PolicyFamily::Grid,
        });
        if family == PolicyFamily::Theta {
            let theta = a.theta.ok_or_else(|| CliError::Validation("--family theta needs --theta".into()))?;
            build_distance_threshold_graph(&domain, theta, a.bot)?
        } else {
            PolicySpec::new(family, a.theta)?.build(&domain)?
        }
    };
    let g = if a.bot && !g.has_bot() { g.with_bot_edges(&(0..domain.total()).collect::<Vec<_>>())? } else { g };
    Ok(g.to_json()?)
}

fn transform_show(a: &TransformShowArgs) -> Result<String, CliError> {
    let g = read_graph(&a.graph)?;
    let w = a.workload.build(g.domain())?;
    let t = TransformPair::for_policy(&g)?;
    let w_g = t.transform_matrix(&w)?;
    let p = t.p_g();
    let reductions: Vec<_> = t
        .reductions()
        .iter()
        .map(|r| json!({"removed_vertex": r.removed_vertex, "component_size": r.component.len()}))
        .collect();
    let out = json!({
        "graph": {
            "dims": g.domain().dims(),
            "vertices": g.vertex_count(),
            "edges": g.edges().len(),
            "has_bot": g.has_bot(),
            "tree": g.is_tree(),
        },
        "workload": {"kind": w.kind(), "rows": w.rows(), "cols": w.cols()},
        "sensitivity": policy_sensitivity(&w, &g)?,
        "w_g": {"rows": w_g.rows(), "cols": w_g.cols(), "nnz": w_g.nnz()},
        "p_g": {
            "rows": p.rows(),
            "cols": p.cols(),
            "nnz": p.nnz(),
            "tree": t.is_tree(),
            "case_ii_reductions": reductions,
        },
    });
    Ok(serde_json::to_string_pretty(&out)?)
}

fn run(a: &RunArgs) -> Result<String, CliError> {
    let dims = a.dims.clone().map(Domain::new).transpose()?;
    let x = load_histogram(&a.data, dims.as_ref()).map_err(|e| match e {
        blowfish::Error::Io(io) => CliError::Validation(format!("{}: {io}", a.data.display())),
        e => e.into(),
    })?;
    let w = a.workload.build(x.domain())?;
    let spec = MechanismSpec {
        id: a.mechanism,
        theta: a.theta,
        branching: a.branching,
        policy: PolicySpec::new(a.policy, a.theta)?,
    };
    let noise = if a.noiseless { NoiseSource::noiseless() } else { NoiseSource::seeded(a.seed) };
    let mut answer = run_mechanism(&spec, &w, &x, a.epsilon, noise)?;
    answer.seed = a.seed;
    Ok(serde_json::to_string_pretty(&answer)?)
}

fn experiment(a: &ExperimentArgs) -> Result<String, CliError> {
    let text = read(&a.config)?;
    let mut config =
        ExperimentConfig::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", a.config.display())))?;
    config.resolve_paths(a.config.parent().unwrap_or(Path::new(".")));
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let results = run_experiment(&config)?;
    let report = ExperimentReport { config, results };
    Ok(match a.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv().trim_end().to_string(),
    })
}

fn spanner_check(a: &SpannerCheckArgs) -> Result<String, CliError> {
    let g = read_graph(&a.g)?;
    let h = read_graph(&a.h)?;
    Ok(spanner_stretch(&g, &h)?.to_string())
}

fn lowerbound(a: &LowerboundArgs) -> Result<String, CliError> {
    let domain = Domain::new(a.dims.clone())?;
    let g = match a.graph.parse::<PolicyFamily>() {
        Ok(family) => PolicySpec::new(family, a.theta)?.build(&domain)?,
        Err(_) if Path::new(&a.graph).exists() => read_graph(Path::new(&a.graph))?,
        Err(e) => return Err(CliError::Validation(format!("--graph: {e}, and no file of that name exists"))),
    };
    if g.domain() != &domain {
        return Err(CliError::Validation(format!(
            "graph domain {:?} does not match --dims {:?}",
            g.domain().dims(),
            domain.dims()
        )));
    }
    let w = match a.workload {
        WorkloadKind::SampledRanges => sample_range_workload(&domain, a.count, a.workload_seed)?.0,
        kind => make_workload(kind, &domain)?,
    };
    let bound = policy_lower_bound(&w, &g, a.epsilon, a.delta)?;
    let out = json!({
        "workload": w.kind(),
        "dims": domain.dims(),
        "graph": a.graph,
        "epsilon": a.epsilon,
        "delta": a.delta,
        "bound": bound,
        "per_query": bound / w.rows() as f64,
    });
    Ok(serde_json::to_string_pretty(&out)?)
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Graph(GraphCmd::Build(a)) => graph_build(a),
        Command::Transform(TransformCmd::Show(a)) => transform_show(a),
        Command::Run(a) => run(a),
        Command::Experiment(a) => experiment(a),
        Command::Spanner(SpannerCmd::Check(a)) => spanner_check(a),
        Command::Lowerbound(a) => lowerbound(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(out) => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = writeln!(std::io::stdout().lock(), "{out}");
            ExitCode::SUCCESS
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
