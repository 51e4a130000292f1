//! `gridcascade` command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gridcascade::agent::{evaluate, train, Agent, Baseline, BaselinePolicy, Policy};
use gridcascade::case_io::Network;
use gridcascade::dc_opf::{build_opf, solve_lp};
use gridcascade::fixtures::load_case;
use gridcascade::harness::{simulate, synth_limits, ExperimentConfig, HarnessError, ReportFormat};
use gridcascade::neural::{parse_network, write_network};
use gridcascade::power_flow::{self, FlowModel};

/// Offset between the training disturbance seed and the first evaluation seed.
const EVAL_SEED_OFFSET: u64 = 1_000_000;

#[derive(Parser)]
#[command(
    name = "gridcascade",
    version,
    about = "Cascading-failure simulation and RL mitigation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a power flow and dump bus and branch quantities as CSV.
    Powerflow(PowerflowArgs),
    /// Solve the DC-OPF with all ratings scaled by one factor.
    Opf(OpfArgs),
    /// Play one episode with a fixed action per stage and print its log.
    Simulate(SimulateArgs),
    /// Train an agent and write metrics and parameters.
    Train(RunArgs),
    /// Evaluate trained parameters or a baseline policy.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ac,
    Dc,
}

impl From<ModelArg> for FlowModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ac => FlowModel::Ac,
            ModelArg::Dc => FlowModel::Dc,
        }
    }
}

#[derive(Args)]
struct CaseArgs {
    /// Shipped case name or path to a case file.
    #[arg(long)]
    case: String,
    /// Rate unrated branches at β times their base-case flow.
    #[arg(long)]
    synth_beta: Option<f64>,
    /// Directory for output files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerflowArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long, value_enum, default_value = "ac")]
    model: ModelArg,
}

#[derive(Args)]
struct OpfArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Factor applied to every branch rating.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Also print the LP in readable form.
    #[arg(long)]
    lp: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides both the environment and the agent seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Action indices, one per stage, separated by commas or spaces.
    #[arg(long, conflicts_with = "script")]
    actions: Option<String>,
    /// File holding the action indices.
    #[arg(long)]
    script: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Parameter file written by `train`.
    #[arg(long, conflicts_with = "baseline")]
    params: Option<PathBuf>,
    /// `random` or `fixed:N`.
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long, default_value_t = 400)]
    episodes: usize,
}

/// A failure together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn compute(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

fn harness(error: HarnessError) -> Failure {
    if error.is_usage() {
        usage(error)
    } else {
        compute(error)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Powerflow(a) => cmd_powerflow(a),
        Command::Opf(a) => cmd_opf(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_network(args: &CaseArgs, model: FlowModel) -> Result<Network, Failure> {
    let net = load_case(&args.case).map_err(usage)?;
    match args.synth_beta {
        Some(beta) if !(beta > 1.0) => {
            Err(usage(anyhow!("--synth-beta must exceed 1, got {beta}")))
        }
        Some(beta) => synth_limits(&net, beta, model).map_err(harness),
        None => Ok(net),
    }
}

/// Print to stdout; a closed pipe downstream is not an error.
fn print_out(content: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    match out.write_all(content.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(usage(e)),
        _ => Ok(()),
    }
}

/// Write `content` to `dir/name`, or to stdout when no directory is given.
fn emit(dir: Option<&Path>, name: &str, content: &str) -> Result<(), Failure> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))
                .map_err(usage)?;
            let path = dir.join(name);
            fs::write(&path, content)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(usage)
        }
        None => print_out(content),
    }
}

fn cmd_powerflow(args: PowerflowArgs) -> Result<(), Failure> {
    let model = args.model.into();
    let net = load_network(&args.case, model)?;
    let sol = power_flow::solve(&net, model, None).map_err(compute)?;
    let mut buses = String::from("bus,v,theta,p,q\n");
    for (i, b) in net.buses.iter().enumerate() {
        let _ = writeln!(
            buses,
            "{},{},{},{},{}",
            b.id, sol.v[i], sol.theta[i], sol.p_inj[i], sol.q_inj[i]
        );
    }
    let mut branches = String::from("branch,from,to,p_from,flow,loading\n");
    for (l, br) in net.branches.iter().enumerate() {
        let _ = writeln!(
            branches,
            "{},{},{},{},{},{}",
            br.id,
            br.from_bus,
            br.to_bus,
            sol.branch_flow_p[l],
            sol.branch_flow_mva[l],
            sol.loading[l]
        );
    }
    let out = args.case.out.as_deref();
    eprintln!(
        "converged: {}, iterations: {}",
        sol.converged, sol.iterations
    );
    emit(out, "buses.csv", &buses)?;
    if out.is_none() {
        print_out("\n")?;
    }
    emit(out, "branches.csv", &branches)?;
    if !sol.converged {
        return Err(compute(anyhow!(
            "power flow did not converge in {} iterations",
            sol.iterations
        )));
    }
    Ok(())
}

fn cmd_opf(args: OpfArgs) -> Result<(), Failure> {
    if !(args.scale > 0.0) {
        return Err(usage(anyhow!("--scale must be positive")));
    }
    let net = load_network(&args.case, FlowModel::Dc)?;
    let limits: Vec<f64> = net.branches.iter().map(|b| b.rating * args.scale).collect();
    let model = build_opf(&net, &limits).map_err(compute)?;
    let d = model.dispatch(&net, &solve_lp(&model.lp));
    let mut s = String::new();
    let status = format!("{:?}", d.status).to_lowercase();
    let _ = writeln!(s, "status: {status}");
    let _ = writeln!(s, "objective: {:.6}", d.objective);
    let _ = writeln!(s, "shed: {:.6}", d.shed_total);
    let _ = writeln!(s, "generator,bus,p");
    for (i, (g, p)) in net.generators.iter().zip(&d.gen_dispatch).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, g.bus, p);
    }
    let _ = writeln!(s, "load,bus,p,demand");
    for (j, (l, p)) in net.loads.iter().zip(&d.load_dispatch).enumerate() {
        let _ = writeln!(s, "{},{},{},{}", j + 1, l.bus, p, l.p_demand);
    }
    let out = args.case.out.as_deref();
    emit(out, "dispatch.txt", &s)?;
    if args.lp {
        emit(out, "opf.lp", &model.lp.to_string())?;
    }
    if !d.status.is_optimal() {
        return Err(compute(anyhow!("DC-OPF is {status}")));
    }
    Ok(())
}

/// Load a config and apply the command-line overrides.
fn load_config(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(harness)?;
    if let Some(seed) = args.seed {
        cfg.env.rng_seed = seed;
        cfg.agent.rng_seed = seed;
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn parse_actions(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| usage(anyhow!("bad action index `{t}`")))
        })
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (cfg, out) = load_config(&args.run)?;
    let script = match (&args.actions, &args.script) {
        (Some(list), _) => parse_actions(list)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            parse_actions(&text)?
        }
        (None, None) => return Err(usage(anyhow!("give --actions or --script"))),
    };
    let mut env = cfg.environment().map_err(harness)?;
    let log = simulate(&mut env, &script).map_err(harness)?;
    let text = log.to_text();
    print_out(&text)?;
    emit(Some(&out), "episode.log", &text)?;
    emit(Some(&out), "episode.csv", &log.to_csv())?;
    Ok(())
}

fn cmd_train(args: RunArgs) -> Result<(), Failure> {
    let (cfg, out) = load_config(&args)?;
    let mut env = cfg.environment().map_err(harness)?;
    let (agent, metrics) =
        train(&mut env, &cfg.agent).map_err(|e| harness(HarnessError::Agent(e)))?;
    emit(Some(&out), "metrics.csv", &metrics.to_csv())?;
    emit(Some(&out), "qnetwork.txt", &write_network(&agent.network))?;
    let summary = metrics.summary();
    emit(Some(&out), "summary.txt", &summary)?;
    print_out(&summary)?;
    Ok(())
}

fn parse_baseline(text: &str) -> Result<Baseline, Failure> {
    match text.split_once(':') {
        None if text == "random" => Ok(Baseline::Random),
        Some(("fixed", n)) => match n.parse::<usize>() {
            Ok(i) if i < gridcascade::neural::ACTION_COUNT => Ok(Baseline::Fixed(i)),
            _ => Err(usage(anyhow!(
                "fixed baseline needs an index in 0..10, got `{n}`"
            ))),
        },
        _ => Err(usage(anyhow!(
            "baseline must be `random` or `fixed:N`, got `{text}`"
        ))),
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let (cfg, out) = load_config(&args.run)?;
    let mut env = cfg.environment().map_err(harness)?;
    let seed = cfg.env.rng_seed.wrapping_add(EVAL_SEED_OFFSET);
    let agent;
    let mut policy = match (&args.params, &args.baseline) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            let net = parse_network::<f64>(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(usage)?;
            agent = Agent::from_network(cfg.agent.algorithm, net)
                .map_err(|e| harness(HarnessError::Agent(e)))?;
            if agent.network.input_shape().len() != expected_input(&cfg, env.state_len()) {
                return Err(usage(anyhow!(
                    "parameters do not match the configured case"
                )));
            }
            Policy::Greedy(&agent)
        }
        (None, Some(kind)) => Policy::Baseline(BaselinePolicy::new(
            parse_baseline(kind)?,
            ChaCha8Rng::seed_from_u64(cfg.agent.rng_seed),
        )),
        (None, None) => return Err(usage(anyhow!("give --params or --baseline"))),
    };
    let report = evaluate(&mut env, &mut policy, args.episodes, seed)
        .map_err(|e| harness(HarnessError::Agent(e)))?;
    let text = report.to_text();
    print_out(&text)?;
    match cfg.report_format {
        ReportFormat::Csv => emit(Some(&out), "evaluation.csv", &report.to_csv())?,
        ReportFormat::Text => emit(Some(&out), "evaluation.txt", &text)?,
    }
    Ok(())
}

fn expected_input(cfg: &ExperimentConfig, state_len: usize) -> usize {
    use gridcascade::agent::Algorithm;
    match cfg.agent.algorithm {
        Algorithm::SarsaShallow => state_len + 1,
        Algorithm::QlearningDeep => {
            let side = gridcascade::neural::to_image(&vec![0.0; state_len]).side;
            side * side
        }
    }
}
