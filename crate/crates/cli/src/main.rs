use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ltlf_cpomdp::bench::{self, Overrides};
use ltlf_cpomdp::dfa::{compile_minimal_dfa, CompileOptions};
use ltlf_cpomdp::ltlf::{parse_formula, AtomSource};
use ltlf_cpomdp::planner::{
    eg_solve, mc_evaluate_mixed, theorem2_report, write_trace_csv, ConstrainedProblem,
    MixedPolicy,
};
use ltlf_cpomdp::pomdp::{load_model, mix_seed, sample_trajectory, DiscretePomdp, LabeledPomdp};
use ltlf_cpomdp::product::{build_product, ProductPomdp};
use ltlf_cpomdp::solver::{AlphaPolicy, SolverConfig};
use ltlf_cpomdp::Error;

#[derive(Parser)]
#[command(name = "cpomdp", version, about = "LTLf-constrained POMDP planning")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a formula to a minimal DFA.
    Compile(CompileArgs),
    /// Write a built-in benchmark model as JSON.
    Model {
        /// M1 … M9 or chain3.
        name: String,
    },
    /// Build the reachable product of a model and a specification.
    Product(Target),
    /// Run the exponentiated-gradient planner.
    Solve(SolveArgs),
    /// Monte-Carlo evaluation of saved policies.
    Evaluate(EvalArgs),
    /// Run rows of the benchmark matrix.
    Bench(BenchArgs),
    /// Simulate one run and dump it as CSV and ASCII frames.
    Trace(TraceArgs),
}

#[derive(Args, Serialize)]
struct SpecArgs {
    /// Formula text, or phi1 … phi6.
    #[arg(long, conflicts_with = "spec_file")]
    spec: Option<String>,
    #[arg(long)]
    spec_file: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CompileArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Comma-separated atoms; inferred from the formula when absent.
    #[arg(long, value_delimiter = ',')]
    atoms: Option<Vec<String>>,
    /// Also write a Graphviz file.
    #[arg(long)]
    dot: bool,
}

#[derive(Args, Serialize)]
struct Target {
    /// Model file, or a built-in name (M1 … M9, chain3).
    #[arg(long)]
    model: String,
    #[command(flatten)]
    spec: SpecArgs,
}

/// A learning rate, `None` standing for "auto".
#[derive(Clone, Copy, Serialize)]
struct Eta(Option<f64>);

fn parse_eta(s: &str) -> Result<Eta, String> {
    if s == "auto" {
        return Ok(Eta(None));
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Eta(Some(v))),
        _ => Err(format!("expected a positive number or \"auto\", got {s:?}")),
    }
}

#[derive(Args, Serialize, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = SolverConfig::default().n_beliefs)]
    n_beliefs: usize,
    #[arg(long, default_value_t = SolverConfig::default().max_backup_rounds)]
    max_rounds: usize,
    #[arg(long, default_value_t = SolverConfig::default().bellman_tolerance)]
    tolerance: f64,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            n_beliefs: self.n_beliefs,
            max_backup_rounds: self.max_rounds,
            bellman_tolerance: self.tolerance,
            expansion_seed: mix_seed(seed, 0x5eed),
            ..SolverConfig::default()
        }
    }
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long)]
    threshold: f64,
    #[arg(long = "B")]
    b: f64,
    #[arg(long = "K", value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Learning rate, or "auto" for sqrt(ln 2 / (2 K B^2)).
    #[arg(long, default_value = "auto", value_parser = parse_eta)]
    eta: Eta,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    simu: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    eval_rollouts: u64,
    #[arg(long)]
    bfs_slack: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[command(flatten)]
    target: Target,
    /// Policy file written by `solve`.
    #[arg(long)]
    policies: PathBuf,
    /// Mixture weights; uniform when absent.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    rollouts: u64,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    /// Comma-separated model names, or "all".
    #[arg(long, value_delimiter = ',', default_value = "all")]
    rows: Vec<String>,
    #[arg(long = "K", value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    simu: Option<u64>,
    /// List the planned rows without solving.
    #[arg(long)]
    dry_run: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Serialize)]
struct TraceArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long)]
    policies: PathBuf,
    /// Index of the policy to run.
    #[arg(long, default_value_t = 0)]
    component: usize,
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    inputs: Vec<String>,
    config: &'a C,
    seed: u64,
    version: &'static str,
}

/// A failure with its exit code: 3 for bad input, 4 for runtime errors.
struct Failure {
    code: u8,
    message: String,
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure { code: 3, message: e.to_string() }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure { code: 4, message: e.to_string() }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    out: PathBuf,
    seed: u64,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Outcome {
        fs::create_dir_all(&self.out).map_err(runtime)?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Outcome {
        let text = serde_json::to_string_pretty(value).map_err(runtime)?;
        self.write(name, text + "\n")
    }

    fn manifest<C: Serialize>(&self, command: &str, inputs: Vec<String>, config: &C) -> Outcome {
        self.write_json(
            "manifest.json",
            &RunManifest {
                command,
                inputs,
                config,
                seed: self.seed,
                version: env!("CARGO_PKG_VERSION"),
            },
        )
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn spec_text(s: &SpecArgs) -> Result<String, Failure> {
    match (&s.spec, &s.spec_file) {
        (Some(t), _) => Ok(bench::make_spec(t).map(String::from).unwrap_or_else(|_| t.clone())),
        (None, Some(p)) => Ok(read(p)?.trim().to_string()),
        (None, None) => Err(input("a specification is required (--spec or --spec-file)")),
    }
}

fn load_target_model(name: &str) -> Result<LabeledPomdp, Failure> {
    if name == "chain3" {
        return Ok(bench::chain3());
    }
    if bench::MODEL_NAMES.contains(&name) {
        return bench::make_model(name).map_err(input);
    }
    load_model(&read(Path::new(name))?).map_err(|e| input(Error::from(e)))
}

fn load_product(t: &Target) -> Result<ProductPomdp, Failure> {
    let model = load_target_model(&t.model)?;
    let spec = spec_text(&t.spec)?;
    let f = parse_formula(&spec, AtomSource::Explicit(model.alphabet())).map_err(|e| input(Error::from(e)))?;
    let dfa = compile_minimal_dfa(&f, CompileOptions::default()).map_err(|e| input(Error::from(e)))?;
    let prod = build_product(&model, &dfa).map_err(|e| input(Error::from(e)))?;
    Ok(prod.pruned())
}

fn load_policies(path: &Path) -> Result<Vec<AlphaPolicy>, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn compile(ctx: &Ctx, args: &CompileArgs) -> Outcome {
    let text = spec_text(&args.spec)?;
    let alphabet = match &args.atoms {
        Some(a) => Some(ltlf_cpomdp::ltlf::Alphabet::from_names(a).map_err(input)?),
        None => None,
    };
    let source = match &alphabet {
        Some(a) => AtomSource::Explicit(a),
        None => AtomSource::Infer,
    };
    let f = parse_formula(&text, source).map_err(|e| input(Error::from(e)))?;
    let dfa = compile_minimal_dfa(&f, CompileOptions::default())
        .map_err(|e| input(Error::from(e)))?
        .with_name(text.clone());
    ctx.write("dfa.json", dfa.to_json() + "\n")?;
    if args.dot {
        ctx.write("dfa.dot", dfa.to_dot())?;
    }
    ctx.manifest("compile", vec![text], args)?;
    ctx.say(format!(
        "states: {} accepting: {}",
        dfa.n_states(),
        dfa.accepting_states().len()
    ));
    Ok(())
}

fn product(ctx: &Ctx, args: &Target) -> Outcome {
    let prod = load_product(args)?;
    ctx.write("product.json", prod.to_json() + "\n")?;
    ctx.manifest("product", vec![args.model.clone()], args)?;
    ctx.say(format!(
        "product states: {} ({} base x {} automaton)",
        prod.n_states(),
        prod.base().n_states(),
        prod.n_automaton_states()
    ));
    Ok(())
}

fn solve(ctx: &Ctx, args: &SolveArgs) -> Outcome {
    let problem = ConstrainedProblem {
        threshold: args.threshold,
        b: args.b,
        k: args.k as usize,
        eta: args.eta.0,
        simu: args.simu as usize,
        eval_rollouts: args.eval_rollouts as usize,
        base_seed: ctx.seed,
        bfs_slack: args.bfs_slack,
    };
    problem.validate().map_err(input)?;
    let cfg = args.solver.config(ctx.seed);
    cfg.validate().map_err(input)?;
    let prod = load_product(&args.target)?;
    let result = eg_solve(&prod, &problem, &cfg).map_err(|e| runtime(Error::from(e)))?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a SolveArgs,
        problem: &'a ConstrainedProblem,
        eta: f64,
        solver: &'a SolverConfig,
    }
    ctx.write("product.json", prod.to_json() + "\n")?;
    ctx.write_json("policies.json", &result.policies)?;
    ctx.write_json("result.json", &result)?;
    ctx.write_json("bfs.json", &result.diagnostics.bfs)?;
    ctx.write_json("theorem2.json", &theorem2_report(&result))?;
    let mut trace = Vec::new();
    write_trace_csv(&mut trace, &theorem2_report(&result).trace).map_err(runtime)?;
    ctx.write("trace.csv", trace)?;
    ctx.manifest(
        "solve",
        vec![args.target.model.clone()],
        &Resolved {
            args,
            problem: &problem,
            eta: result.eta,
            solver: &cfg,
        },
    )?;
    let est = &result.mixture_estimate;
    ctx.say(format!(
        "r_hat {:.4} (se {:.4})  p_hat {:.4} (se {:.4})  lambda_bar {:.4}  eta {:.6}",
        est.r_hat, est.r_se, est.p_hat, est.p_se, result.lambda_bar, result.eta
    ));
    Ok(())
}

fn evaluate(ctx: &Ctx, args: &EvalArgs) -> Outcome {
    let prod = load_product(&args.target)?;
    let policies = load_policies(&args.policies)?;
    if policies.iter().any(|p| p.n_states() != prod.n_states()) {
        return Err(input("policies do not match the product's state count"));
    }
    let mix = match &args.weights {
        Some(w) => MixedPolicy { support: policies.iter().collect(), weights: w.clone() },
        None => MixedPolicy::uniform(policies.iter().collect()),
    };
    mix.validate().map_err(input)?;
    let est = mc_evaluate_mixed(&prod, &mix, args.rollouts as usize, ctx.seed)
        .map_err(|e| runtime(Error::from(e)))?;
    ctx.write_json("evaluation.json", &est)?;
    ctx.manifest("evaluate", vec![args.target.model.clone(), args.policies.display().to_string()], args)?;
    ctx.say(format!("r_hat {:.4} (se {:.4})  p_hat {:.4} (se {:.4})", est.r_hat, est.r_se, est.p_hat, est.p_se));
    Ok(())
}

fn bench_cmd(ctx: &Ctx, args: &BenchArgs) -> Outcome {
    let names: Vec<String> = if args.rows.iter().any(|r| r == "all") {
        bench::MODEL_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        args.rows.clone()
    };
    let overrides = Overrides {
        k: args.k.map(|k| k as usize),
        simu: args.simu.map(|s| s as usize),
        seed: Some(ctx.seed),
        solver: Some(args.solver.config(ctx.seed)),
        ..Overrides::default()
    };
    let plans = names
        .iter()
        .map(|n| bench::plan_experiment(n, &overrides))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;
    if args.dry_run {
        for p in &plans {
            ctx.say(format!(
                "{} {} threshold={} B={} eta={} K={} simu={}",
                p.model,
                p.spec,
                p.problem.threshold,
                p.problem.b,
                p.problem.resolved_eta(),
                p.problem.k,
                p.problem.simu
            ));
        }
        ctx.say(format!("{} planned rows", plans.len()));
        return Ok(());
    }
    let mut rows = Vec::new();
    for p in &plans {
        let outcome = bench::run_experiment(p);
        let r = &outcome.row;
        if r.error.is_empty() {
            ctx.say(format!(
                "{} {}: r_hat {:.4} p_hat {:.4} ({:.1}s)",
                r.model,
                r.spec,
                r.r_hat.unwrap_or(f64::NAN),
                r.p_hat.unwrap_or(f64::NAN),
                r.t_total_s
            ));
        } else {
            ctx.say(format!("{} {}: error: {}", r.model, r.spec, r.error));
        }
        rows.push(outcome.row);
    }
    let mut csv = Vec::new();
    bench::write_rows_csv(&mut csv, &rows).map_err(runtime)?;
    ctx.write("bench.csv", csv)?;
    ctx.manifest("bench", names.clone(), &plans)?;
    if rows.iter().any(|r| !r.error.is_empty()) {
        return Err(runtime("some benchmark rows failed"));
    }
    Ok(())
}

fn trace(ctx: &Ctx, args: &TraceArgs) -> Outcome {
    let prod = load_product(&args.target)?;
    let policies = load_policies(&args.policies)?;
    let policy = policies
        .get(args.component)
        .ok_or_else(|| input(format!("no policy with index {}", args.component)))?;
    if policy.n_states() != prod.n_states() {
        return Err(input("policy does not match the product's state count"));
    }
    let run = sample_trajectory(&prod, policy, mix_seed(ctx.seed, 0)).map_err(|e| runtime(Error::from(e)))?;
    ctx.write("trajectory.csv", bench::trajectory_csv(&prod, &run))?;
    if let Ok(grid) = bench::grid_spec(&args.target.model) {
        ctx.write("trajectory.txt", bench::trajectory_frames(&grid, &prod, &run))?;
    }
    ctx.manifest("trace", vec![args.target.model.clone(), args.policies.display().to_string()], args)?;
    ctx.say(format!(
        "T = {}, reward {:.4}, satisfied {}",
        run.horizon(),
        run.total_reward(),
        prod.final_satisfied(&run)
    ));
    Ok(())
}

fn model(ctx: &Ctx, name: &str) -> Outcome {
    let m = load_target_model(name)?;
    if !bench::MODEL_NAMES.contains(&name) && name != "chain3" {
        return Err(input(format!("unknown built-in model {name:?}")));
    }
    ctx.write(&format!("{name}.model"), m.to_json() + "\n")?;
    if let Ok(grid) = bench::grid_spec(name) {
        ctx.write_json(&format!("{name}.grid.json"), &grid)?;
    }
    ctx.say(format!("{name}: {} states, {} observations", m.n_states(), m.n_obs()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Ctx { out: cli.out.clone(), seed: cli.seed, quiet: cli.quiet };
    let outcome = match &cli.command {
        Command::Compile(a) => compile(&ctx, a),
        Command::Model { name } => model(&ctx, name),
        Command::Product(a) => product(&ctx, a),
        Command::Solve(a) => solve(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Bench(a) => bench_cmd(&ctx, a),
        Command::Trace(a) => trace(&ctx, a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
