use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rrl_core::env::{cliffwalking_env, frozenlake_env, PerturbKind};
use rrl_core::mdp::{QTable, TabularMdp};
use rrl_core::neighbors::kernel_neighbors;
use rrl_core::robust::{SetKind, UncertaintySet};

use rrl_harness::checks::{env_oracle_inputs, gradient_suite, solve_oracle};
use rrl_harness::config::ConfigDoc;
use rrl_harness::experiment::{aggregate_csv, evaluate_run, run_experiment, AggregateRow, ExperimentConfig, PerturbSweep};
use rrl_harness::plot::{emit_plot, PlotStyle};
use rrl_harness::policy_view::show_policy;
use rrl_harness::runtime::compare_runtime;
use rrl_harness::{ConfigError, HarnessError, Result};

#[derive(Parser)]
#[command(name = "rrl", version, about = "Robust RL experiments: training, perturbed evaluation, oracles and plots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured algorithm and evaluate it across the sweep.
    Train(TrainArgs),
    /// Re-evaluate a finished run under a different perturbation sweep.
    Eval(EvalArgs),
    /// Repeat `train` over several robustness levels R.
    Sweep(SweepArgs),
    /// Solve a tabular MDP by robust value iteration.
    Oracle(OracleArgs),
    /// Render an aggregate or training-log CSV as SVG.
    Plot(PlotArgs),
    /// Print greedy actions (or max-states) of a tabular run.
    ShowPolicy(ShowPolicyArgs),
    /// Compare analytic gradients with central differences.
    GradCheck(GradCheckArgs),
    /// Tabulate training time per algorithm across runs.
    RuntimeTable(RuntimeArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// `section.key=value` override; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
}

impl ExperimentArgs {
    fn doc(&self) -> Result<ConfigDoc> {
        let text = fs::read_to_string(&self.config)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", self.config.display())))?;
        let mut doc = ConfigDoc::parse(&text)?;
        for o in &self.overrides {
            doc.apply_override(o)?;
        }
        if let Some(o) = &self.output {
            doc.set("experiment", "output", o.display().to_string());
        }
        if let Some(n) = self.instances {
            doc.set("experiment", "instances", n.to_string());
        }
        if let Some(s) = self.base_seed {
            doc.set("experiment", "base_seed", s.to_string());
        }
        if let Some(n) = self.eval_episodes {
            doc.set("experiment", "eval_episodes", n.to_string());
        }
        Ok(doc)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Action,
    Parameter,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, value_enum, default_value = "action")]
    kind: KindArg,
    /// Physical parameter to scale for parameter sweeps.
    #[arg(long)]
    parameter: Option<String>,
    /// Comma-separated perturbation levels.
    #[arg(long, value_delimiter = ',', required = true)]
    levels: Vec<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Suffix for the written `eval-<tag>.csv` files.
    #[arg(long, default_value = "sweep")]
    tag: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated robustness levels.
    #[arg(long = "r-values", value_delimiter = ',', required = true)]
    r_values: Vec<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetArg {
    Nominal,
    Rc,
    Adjacent,
}

#[derive(Args)]
struct OracleArgs {
    /// Gridworld to solve: `cliffwalking` or `frozenlake`.
    #[arg(long, conflicts_with = "mdp")]
    env: Option<String>,
    /// MDP file in the text format of `TabularMdp::parse`.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Discount for `--env`; MDP files carry their own.
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 8)]
    size: usize,
    #[arg(long)]
    not_slippery: bool,
    #[arg(long = "set", value_enum, default_value = "adjacent")]
    set: SetArg,
    #[arg(long = "R", default_value_t = 0.0)]
    r: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Q-table CSV to compare against the fixed point.
    #[arg(long)]
    q: Option<PathBuf>,
    /// Exit with status 3 unless the check holds within `--tol`.
    #[arg(long)]
    assert: bool,
    /// Write the fixed-point Q-table here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    input: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    x_label: Option<String>,
    #[arg(long)]
    y_label: Option<String>,
}

#[derive(Args)]
struct ShowPolicyArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    algorithm: String,
    #[arg(long, default_value_t = 0)]
    instance: usize,
    #[arg(long)]
    max_states: bool,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct RuntimeArgs {
    /// Run directories written by `train`.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

fn print_rows(rows: &[AggregateRow]) {
    for r in rows {
        println!(
            "{:<12} {:<16} {:>8} {:>12.3} ± {:.3}",
            r.algorithm, r.perturbation, r.level, r.mean_return, r.std_return
        );
    }
}

fn train(args: &TrainArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_doc(args.experiment.doc()?)?;
    let summary = run_experiment(&cfg)?;
    print_rows(&summary.aggregate);
    println!("wrote {}", summary.dir.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let kind = match args.kind {
        KindArg::Action => PerturbKind::Action,
        KindArg::Parameter => PerturbKind::Parameter,
    };
    if kind == PerturbKind::Parameter && args.parameter.is_none() {
        return Err(ConfigError::new("--kind parameter needs --parameter").into());
    }
    let sweep = PerturbSweep {
        kind,
        parameter: args.parameter.clone(),
        levels: args.levels.clone(),
    };
    let rows = evaluate_run(&args.run, &sweep, args.episodes, &args.tag)?;
    print_rows(&rows);
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let base = args.experiment.doc()?;
    let root = ExperimentConfig::from_doc(base.clone())?.output;
    let mut combined = Vec::new();
    for &r in &args.r_values {
        let mut doc = base.clone();
        doc.set("train", "r", r.to_string());
        doc.set("experiment", "output", root.join(format!("r-{r}")).display().to_string());
        let summary = run_experiment(&ExperimentConfig::from_doc(doc)?)?;
        combined.extend(summary.aggregate.into_iter().map(|mut row| {
            row.algorithm = format!("{}@R={r}", row.algorithm);
            row
        }));
    }
    let path = root.join("sweep-aggregate.csv");
    fs::write(&path, aggregate_csv(&combined)).map_err(|e| HarnessError::io(&path, e))?;
    print_rows(&combined);
    println!("wrote {}", path.display());
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let (mdp, neighbors) = match (&args.env, &args.mdp) {
        (Some(name), None) => match name.as_str() {
            "cliffwalking" => env_oracle_inputs(&cliffwalking_env(), args.gamma)?,
            "frozenlake" => env_oracle_inputs(&frozenlake_env(args.size, !args.not_slippery)?, args.gamma)?,
            other => return Err(ConfigError::new(format!("`{other}` is not a tabular environment")).into()),
        },
        (None, Some(path)) => {
            let mdp = TabularMdp::parse(&read_text(path)?)?;
            let n = kernel_neighbors(&mdp);
            (mdp, n)
        }
        _ => return Err(ConfigError::new("give exactly one of --env or --mdp").into()),
    };
    let set = match args.set {
        SetArg::Nominal => UncertaintySet::nominal(),
        SetArg::Rc => UncertaintySet::new(SetKind::RContamination, args.r)?,
        SetArg::Adjacent => UncertaintySet::new(SetKind::AdjacentRContamination, args.r)?,
    };
    let solution = solve_oracle(&mdp, &set, &neighbors, args.tol.min(1e-10))?;
    println!(
        "iterations {} residual {:.3e} converged {}",
        solution.iterations, solution.residual, solution.converged
    );
    for (s, v) in solution.q.state_values().iter().enumerate() {
        println!("V({s}) = {v:.10}");
    }
    if let Some(out) = &args.output {
        fs::write(out, solution.q.to_csv()).map_err(|e| HarnessError::io(out, e))?;
    }
    let gap = match &args.q {
        Some(path) => {
            let q = QTable::from_csv(&read_text(path)?)?;
            let d = q.sup_distance(&solution.q);
            println!("sup distance to {}: {d:.3e}", path.display());
            d
        }
        None => solution.residual,
    };
    if args.assert && !(solution.converged && gap <= args.tol) {
        return Err(HarnessError::Assertion(format!("gap {gap:.3e} exceeds tolerance {:.3e}", args.tol)));
    }
    Ok(())
}

fn plot(args: &PlotArgs) -> Result<()> {
    let style = PlotStyle {
        title: args.title.clone(),
        x_label: args.x_label.clone(),
        y_label: args.y_label.clone(),
        ..PlotStyle::default()
    };
    let name = args.input.display().to_string();
    let out = emit_plot(&name, &read_text(&args.input)?, &style)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let target = args.output.clone().unwrap_or_else(|| args.input.with_extension("svg"));
    fs::write(&target, out.svg).map_err(|e| HarnessError::io(&target, e))?;
    println!("wrote {}", target.display());
    Ok(())
}

fn grad_check(args: &GradCheckArgs) -> Result<()> {
    let suite = gradient_suite(args.cases, args.seed, args.h, args.tol)?;
    for (name, r) in [("backward", &suite.backward), ("policy gradient", &suite.policy)] {
        println!(
            "{name}: worst relative error {:.3e} at {} over {} cases",
            r.worst_rel_err, r.worst_param, suite.cases
        );
    }
    if !suite.passed() {
        return Err(HarnessError::Assertion(format!("gradient error above {:.1e}", args.tol)));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Oracle(a) => oracle(&a),
        Command::Plot(a) => plot(&a),
        Command::ShowPolicy(a) => {
            print!("{}", show_policy(&a.run, &a.algorithm, a.instance, a.max_states)?);
            Ok(())
        }
        Command::GradCheck(a) => grad_check(&a),
        Command::RuntimeTable(a) => {
            let table = compare_runtime(&a.runs);
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", table.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
