use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prefdesign::canonical::{run_canonical_separation, SeparationConfig};
use prefdesign::config::{ExperimentConfig, Settings, EXPERIMENT_KEYS};
use prefdesign::core::complexity::{
    canonical_instance, complexity_bound, instance_complexity, lower_bound, LowerBoundConfig,
};
use prefdesign::core::design::{solve_design, DesignProblem, SolverConfig};
use prefdesign::core::model::{ArmSet, LinkFunction, TrueModel};
use prefdesign::data::{format_vector, parse_vector, read_preferences};
use prefdesign::experiment::run_experiment;
use prefdesign::output::fmt_sig;
use prefdesign::synthetic::make_synthetic;
use prefdesign::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "prefdesign", version, about = "Active preference learning experiments")]
struct Cli {
    /// Settings file with `key = value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batched experiment on a synthetic instance.
    Simulate(ExperimentArgs),
    /// Batched experiment on a preference CSV.
    Replay(ExperimentArgs),
    /// Labels-to-stop comparison on the canonical instance.
    Canonical(CanonicalArgs),
    /// Solve and print a design.
    Design(DesignArgs),
    /// Information-theoretic lower bound on labels.
    Lowerbound(LowerBoundArgs),
    /// Instance complexity and the label bound.
    Complexity(ComplexityArgs),
}

/// Copies every flag that was given into `s` under its long name.
macro_rules! put {
    ($s:expr, $self:ident, $($field:ident => $key:literal),* $(,)?) => {
        $( if let Some(v) = &$self.$field { $s.set($key, v.to_string()); } )*
    };
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated strategy names.
    #[arg(long)]
    strategies: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    first_seed: Option<u64>,
    /// synthetic, replay-style (simulate) or replay.
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    instance_seed: Option<u64>,
    #[arg(long)]
    theta_norm: Option<f64>,
    /// Preference CSV for replay.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Train share of the train/test split.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    selective_threshold: Option<f64>,
    #[arg(long)]
    refit_every: Option<usize>,
    /// Trace CSV path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Summary CSV path; defaults to `<output stem>_summary.csv`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

impl ExperimentArgs {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        put!(s, self,
            strategies => "strategies", delta => "delta", omega => "omega", batch_size => "batch-size",
            budget => "budget", seeds => "seeds", first_seed => "first-seed", source => "source", d => "d", n => "n",
            margin => "margin", instance_seed => "instance-seed", theta_norm => "theta-norm", split => "split",
            ridge => "ridge", selective_threshold => "selective-threshold", refit_every => "refit-every",
        );
        for (key, p) in [("data", &self.data), ("output", &self.output), ("summary", &self.summary)] {
            if let Some(p) = p {
                s.set(key, p.display().to_string());
            }
        }
        s
    }
}

#[derive(Args)]
struct CanonicalArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    first_seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    budget_cap: Option<u64>,
}

/// Which arms (and, when known, which true parameter) to use.
#[derive(Args)]
struct InstanceArgs {
    /// synthetic, canonical or file.
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    instance_seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Preference CSV whose rows are the arms.
    #[arg(long)]
    arms: Option<PathBuf>,
    /// Comma-separated parameter vector.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
}

impl InstanceArgs {
    fn put(&self, s: &mut Settings) {
        put!(s, self,
            source => "source", d => "d", n => "n", margin => "margin", instance_seed => "instance-seed",
            epsilon => "epsilon", theta => "theta",
        );
        if let Some(p) = &self.arms {
            s.set("arms", p.display().to_string());
        }
    }
}

const INSTANCE_KEYS: &[&str] = &["source", "d", "n", "margin", "instance-seed", "epsilon", "arms", "theta"];

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// g (G-type at theta) or rho-star (margin-weighted at theta).
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct LowerBoundArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    inner_iters: Option<usize>,
}

#[derive(Args)]
struct ComplexityArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// Curvature lower bound; defaults to the smallest curvature at theta.
    #[arg(long)]
    kappa0: Option<f64>,
}

fn load(cli_config: &Option<PathBuf>, flags: Settings, known: &[&str]) -> Result<Settings> {
    let mut s = match cli_config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    s.merge(flags);
    s.check_known(known)?;
    Ok(s)
}

fn keys(extra: &[&'static str]) -> Vec<&'static str> {
    INSTANCE_KEYS.iter().chain(extra).copied().collect()
}

/// Arms plus the parameter to evaluate at: `--theta` if given, else the
/// instance's true parameter.
fn instance(s: &Settings) -> Result<(ArmSet, Vec<f64>)> {
    let (arms, truth): (ArmSet, Option<TrueModel>) = match s.get("source").unwrap_or("canonical") {
        "canonical" => {
            let (a, m) = canonical_instance(s.parse_or("d", 2)?, s.parse_or("epsilon", 0.1)?)?;
            (a, Some(m))
        }
        "synthetic" => {
            let (a, m) =
                make_synthetic(s.parse_or("d", 5)?, s.parse_or("n", 50)?, s.parse_or("margin", 0.2)?, s.parse_or("instance-seed", 0)?)?;
            (a, Some(m))
        }
        "file" => {
            let path: PathBuf = s.parse("arms")?.ok_or_else(|| HarnessError::config("file source needs --arms"))?;
            (read_preferences(&path)?.arms, None)
        }
        other => return Err(HarnessError::config(format!("unknown source {other:?}"))),
    };
    let theta = match (s.get("theta"), truth) {
        (Some(t), _) => parse_vector(t)?,
        (None, Some(m)) => m.theta_star,
        (None, None) => return Err(HarnessError::config("file arms need --theta")),
    };
    if theta.len() != arms.dim() {
        return Err(HarnessError::config(format!("theta has {} entries, arms have dimension {}", theta.len(), arms.dim())));
    }
    Ok((arms, theta))
}

fn experiment(cli_config: &Option<PathBuf>, args: &ExperimentArgs, replay: bool) -> Result<()> {
    let mut flags = args.settings();
    if replay {
        flags.set("source", "replay");
    }
    let s = load(cli_config, flags, EXPERIMENT_KEYS)?;
    let cfg = ExperimentConfig::from_settings(&s)?;
    let out = run_experiment(&cfg)?;
    println!("strategy,budget,mean_accuracy,stderr,n_seeds");
    for r in &out.summary {
        println!("{},{},{},{},{}", r.strategy, r.budget, fmt_sig(r.mean_accuracy), fmt_sig(r.stderr), r.n_seeds);
    }
    for f in &out.failures {
        eprintln!("cell seed={} strategy={} failed: {}", f.seed, f.strategy, f.error);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => experiment(&cli.config, a, false),
        Command::Replay(a) => experiment(&cli.config, a, true),
        Command::Canonical(a) => {
            let mut flags = Settings::default();
            put!(flags, a, d => "d", epsilon => "epsilon", seeds => "seeds", first_seed => "first-seed",
                delta => "delta", budget_cap => "budget-cap");
            let s = load(&cli.config, flags, &["d", "epsilon", "seeds", "first-seed", "delta", "budget-cap"])?;
            let def = SeparationConfig::default();
            let cfg = SeparationConfig {
                d: s.parse_or("d", def.d)?,
                epsilon: s.parse_or("epsilon", def.epsilon)?,
                seeds: s.parse_or("seeds", def.seeds)?,
                first_seed: s.parse_or("first-seed", def.first_seed)?,
                delta: s.parse_or("delta", def.delta)?,
                budget_cap: s.parse_or("budget-cap", def.budget_cap)?,
            };
            let summary = run_canonical_separation(&cfg)?;
            print!("{}", summary.table());
            if summary.budget_exceeded {
                eprintln!("warning: at least one run hit the label cap");
            }
            Ok(())
        }
        Command::Design(a) => {
            let mut flags = Settings::default();
            a.instance.put(&mut flags);
            put!(flags, a, objective => "objective", tol => "tol");
            let s = load(&cli.config, flags, &keys(&["objective", "tol"]))?;
            let (arms, theta) = instance(&s)?;
            let solver = SolverConfig { tol: s.parse_or("tol", SolverConfig::default().tol)?, ..SolverConfig::default() };
            let link = LinkFunction::Logistic;
            let problem = match s.get("objective").unwrap_or("g") {
                "g" => DesignProblem::g_optimal(&arms, &theta, link)?,
                "rho-star" => {
                    let w = arms.scores(&theta).into_iter().map(|x| 1.0 / (x * x)).collect();
                    DesignProblem::new(&arms, &theta, link, (0..arms.len()).collect(), w)?
                }
                other => return Err(HarnessError::config(format!("unknown objective {other:?}"))),
            };
            let (design, report) = solve_design(&problem, &solver)?;
            println!("value,{}", fmt_sig(report.value));
            println!("lower_bound,{}", fmt_sig(report.lower_bound));
            println!("gap,{}", fmt_sig(report.duality_gap));
            println!("converged,{}", report.converged);
            println!("arm,weight");
            for (i, w) in design.weights().iter().enumerate().filter(|(_, w)| **w > 0.0) {
                println!("{i},{}", fmt_sig(*w));
            }
            Ok(())
        }
        Command::Lowerbound(a) => {
            let mut flags = Settings::default();
            a.instance.put(&mut flags);
            put!(flags, a, delta => "delta", outer_iters => "outer-iters", inner_iters => "inner-iters");
            let s = load(&cli.config, flags, &keys(&["delta", "outer-iters", "inner-iters"]))?;
            let (arms, theta) = instance(&s)?;
            let def = LowerBoundConfig::default();
            let cfg = LowerBoundConfig {
                outer_iters: s.parse_or("outer-iters", def.outer_iters)?,
                inner_iters: s.parse_or("inner-iters", def.inner_iters)?,
                ..def
            };
            let lb = lower_bound(&arms, &theta, s.parse_or("delta", 0.1)?, &cfg)?;
            println!("value,{}", fmt_sig(lb.value));
            println!("gap,{}", fmt_sig(lb.gap));
            println!("converged,{}", lb.converged);
            println!("design,{}", format_vector(lb.design.weights()));
            Ok(())
        }
        Command::Complexity(a) => {
            let mut flags = Settings::default();
            a.instance.put(&mut flags);
            put!(flags, a, delta => "delta", omega => "omega", kappa0 => "kappa0");
            let s = load(&cli.config, flags, &keys(&["delta", "omega", "kappa0"]))?;
            let (arms, theta) = instance(&s)?;
            let model = TrueModel::new(theta, LinkFunction::Logistic);
            let delta = s.parse_or("delta", 0.1)?;
            let kappa0 = match s.parse("kappa0")? {
                Some(k) => k,
                None => model.kappa0(&arms)?,
            };
            let ic = instance_complexity(&arms, &model, delta, &SolverConfig::default())?;
            let b = complexity_bound(&ic, s.parse_or("omega", 1.0)?, kappa0, delta)?;
            println!("margin,{}", fmt_sig(ic.margin));
            println!("ell_star,{}", ic.ell_star);
            println!("rho_star,{}", fmt_sig(ic.rho_star));
            println!("rho_zero,{}", fmt_sig(ic.rho_zero));
            println!("log_bar,{}", fmt_sig(ic.log_bar));
            println!("bound_rho_star_term,{}", fmt_sig(b.rho_star_term));
            println!("bound_rho_zero_term,{}", fmt_sig(b.rho_zero_term));
            println!("bound_warmup_term,{}", fmt_sig(b.warmup_term));
            println!("bound_rounding_term,{}", fmt_sig(b.rounding_term));
            println!("bound_total_times_c,{}", fmt_sig(b.total()));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
