use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vdmon::harness::synthetic::{generate_text, SyntheticParams};
use vdmon::harness::{
    fact1_check, filter_diagnostics, load_model, solve_for, summary_table, write_csv, Experiment,
    ExperimentConfig,
};
use vdmon::numeric::fmt17;
use vdmon::valuefn::{parse_alpha_with, write_alpha, Objective, Prune};
use vdmon::vds::{
    approx_multistage_bound, batch_size_formula, epsilon_bound, multistage_bound,
    one_stage_bound, posthoc_multistage_bound, posthoc_one_stage_bound, sample_size, BoundInputs,
};

#[derive(Parser, Debug)]
#[command(name = "vdmon", version, about = "Value-directed belief monitoring for POMDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a model and write its alpha-vectors.
    Solve(SolveArgs),
    /// Print the trace of one simulated episode.
    Monitor(MonitorArgs),
    /// Run an experiment grid and write per-trial CSV.
    Experiment(ExperimentArgs),
    /// Print sample sizes and error bounds.
    Bounds(BoundsArgs),
    /// Audit vector agreement under rollouts and compare the particle filters.
    Check(CheckArgs),
    /// Write a seeded synthetic model.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Model file or bundled model name.
    model: String,
    /// Number of stages; omit for the stationary solution.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value = "lp")]
    prune: Prune,
    #[arg(long, default_value = "max")]
    mode: Objective,
    /// Convergence tolerance for stationary solves.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Every experiment config key as a flag. Flags override the config file.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    worst_alpha: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    prune: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    particles: Option<String>,
    #[arg(long)]
    batches: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    stop_threshold: Option<String>,
    #[arg(long)]
    look_limit: Option<String>,
    #[arg(long)]
    resampling: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    single_stage: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    random_fixed: Option<String>,
    #[arg(long, short)]
    output: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> [(&'static str, &Option<String>); 22] {
        [
            ("model", &self.model),
            ("alpha", &self.alpha),
            ("worst_alpha", &self.worst_alpha),
            ("horizon", &self.horizon),
            ("prune", &self.prune),
            ("tolerance", &self.tolerance),
            ("policy", &self.policy),
            ("particles", &self.particles),
            ("batches", &self.batches),
            ("epsilon", &self.epsilon),
            ("delta", &self.delta),
            ("batch_size", &self.batch_size),
            ("stop_threshold", &self.stop_threshold),
            ("look_limit", &self.look_limit),
            ("resampling", &self.resampling),
            ("trials", &self.trials),
            ("stages", &self.stages),
            ("seed", &self.seed),
            ("single_stage", &self.single_stage),
            ("random_fixed", &self.random_fixed),
            ("output", &self.output),
            // Checked last so it sees the final batch limits.
            ("schedule", &self.schedule),
        ]
    }

    fn build(&self, file: Option<&Path>) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            config
                .apply(&text)
                .with_context(|| format!("in {}", path.display()))?;
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                config
                    .set(key, v)
                    .map_err(|e| anyhow::anyhow!("--{}: {e}", key.replace('_', "-")))?;
            }
        }
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Config file with `key = value` lines.
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Do not print the summary table to standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct MonitorArgs {
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Trial index whose random streams are used.
    #[arg(long, default_value_t = 0)]
    trial: u64,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Value range `R` of one alpha-vector.
    #[arg(long, default_value_t = 1.0)]
    range: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    /// Sample count for the Hoeffding error.
    #[arg(long)]
    samples: Option<u64>,
    /// Number of alpha-vectors sharing `delta`.
    #[arg(long, default_value_t = 1)]
    vectors: usize,
    /// Batch limit for the batch-size formula.
    #[arg(long)]
    batches: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Worst-case loss of arbitrary behavior.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 0)]
    t: u32,
    #[arg(long, default_value_t = 0)]
    k: u32,
    /// Observed separation for the post-hoc bounds.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    model: String,
    #[arg(long)]
    alpha: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value = "lp")]
    prune: Prune,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Belief pairs for the agreement audit.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    /// Rollout depth.
    #[arg(long, default_value_t = 3)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    particles: usize,
    /// Trajectories for the filter comparison.
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 5)]
    filter_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Start from a named preset (synthetic8 or synthetic32).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    observations: Option<usize>,
    #[arg(long)]
    successors: Option<usize>,
    /// Observation accuracy in thousandths.
    #[arg(long)]
    accuracy: Option<u32>,
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e).context("writing to stdout"),
            _ => Ok(()),
        },
    }
}

fn solve(args: SolveArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let config = ExperimentConfig {
        horizon: args.horizon,
        prune: args.prune,
        tolerance: args.tolerance,
        ..ExperimentConfig::default()
    };
    if config.horizon == Some(0) {
        bail!("horizon must be at least 1");
    }
    let set = solve_for(&model, &config, args.mode)?;
    emit(&write_alpha(&set), args.output.as_deref())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let config = args.flags.build(args.config.as_deref())?;
    let seed = config.seed;
    let output = config.output.clone();
    let experiment = Experiment::load(config)?;
    let results = experiment.run()?;
    emit(&write_csv(&results, seed), output.as_deref())?;
    if !args.quiet {
        eprint!("{}", summary_table(&results));
    }
    Ok(())
}

fn monitor(args: MonitorArgs) -> Result<()> {
    let config = args.flags.build(args.config.as_deref())?;
    let output = config.output.clone();
    let experiment = Experiment::load(config)?;
    let cell = experiment.cells()[0];
    let record = experiment.run_trial(&cell, args.trial)?;
    let labels = experiment.model.labels();
    let name = |names: &Option<Vec<String>>, i: usize| {
        names
            .as_ref()
            .and_then(|n| n.get(i).cloned())
            .unwrap_or_else(|| i.to_string())
    };
    let b0: Vec<String> = record.initial_belief.probs().iter().map(|p| fmt17(*p)).collect();
    let mut out = format!(
        "policy {} particles {} batches {}\ninitial_belief {}\ninitial_state {}\noptimal_value {}\n",
        cell.policy,
        cell.particles,
        cell.batches,
        b0.join(" "),
        name(&labels.states, record.initial_state),
        fmt17(record.optimal_value)
    );
    out.push_str("stage,action,observation,reward,samples,batches,tau,epsilon,depleted\n");
    for (t, s) in record.stages.iter().enumerate() {
        let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
        out.push_str(&format!(
            "{t},{},{},{},{},{},{},{},{}\n",
            name(&labels.actions, s.action),
            name(&labels.observations, s.observation),
            fmt17(s.reward),
            s.samples,
            s.batches,
            opt(s.tau),
            opt(s.epsilon),
            s.depleted
        ));
    }
    out.push_str(&format!(
        "discounted_return {}\nterminal_value {}\nloss {}\n",
        fmt17(record.discounted_return),
        fmt17(record.terminal_value),
        fmt17(record.loss)
    ));
    emit(&out, output.as_deref())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let per_vector = args.delta / args.vectors as f64;
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k} {v}\n"));
    line("sample_size", sample_size(args.range, args.epsilon, args.delta)?.to_string());
    if args.vectors > 1 {
        line(
            "simultaneous_sample_size",
            sample_size(args.range, args.epsilon, per_vector)?.to_string(),
        );
    }
    if let Some(n) = args.samples {
        line("epsilon_bound", fmt17(epsilon_bound(args.range, per_vector, n)?));
        line("two_epsilon", fmt17(2.0 * epsilon_bound(args.range, per_vector, n)?));
    }
    if let Some(b) = args.batches {
        if b == 0 {
            bail!("--batches must be positive");
        }
        line(
            "batch_size",
            batch_size_formula(args.range, args.epsilon, b, args.vectors, args.delta).to_string(),
        );
    }
    if let (Some(beta), Some(h)) = (args.beta, args.h) {
        if !(0.0..1.0).contains(&beta) {
            bail!("--beta must lie in [0, 1)");
        }
        let inputs = BoundInputs {
            epsilon: args.epsilon,
            delta: args.delta,
            h,
            beta,
            t: args.t,
            k: args.k,
        };
        line("one_stage_bound", fmt17(one_stage_bound(&inputs)));
        line("multistage_bound", fmt17(multistage_bound(h, beta, args.delta)));
        line(
            "approx_multistage_bound",
            fmt17(approx_multistage_bound(args.epsilon, h, beta, args.delta)),
        );
        line(
            "posthoc_multistage_bound",
            fmt17(posthoc_multistage_bound(h, beta, args.delta, args.epsilon, args.t, args.k)),
        );
        if let Some(tau) = args.tau {
            line(
                "posthoc_one_stage_bound",
                fmt17(posthoc_one_stage_bound(tau, args.delta, h, beta, args.t)),
            );
        }
    }
    emit(&out, None)
}

fn check(args: CheckArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let set = match &args.alpha {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_alpha_with(&text, Objective::Maximize)?
        }
        None => {
            let config = ExperimentConfig {
                horizon: args.horizon,
                prune: args.prune,
                tolerance: args.tolerance,
                ..ExperimentConfig::default()
            };
            solve_for(&model, &config, Objective::Maximize)?
        }
    };
    set.check_model(&model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let fact = fact1_check(&model, &set, args.pairs, args.steps, &mut rng);
    let diag = filter_diagnostics(&model, args.particles, args.runs, args.filter_steps, &mut rng)?;
    let out = format!(
        "pairs {}\nskipped {}\nsteps {}\npolicy_violations {}\nrandom_violations {}\nstalled {}\n\
         particles {}\nsis_tv {}\nei_tv {}\nsis_ess {}\nsis_depletions {}\nei_depletions {}\n",
        fact.pairs,
        fact.skipped,
        fact.steps,
        fact.policy_violations,
        fact.random_violations,
        fact.stalled,
        diag.particles,
        fmt17(diag.sis_tv),
        fmt17(diag.ei_tv),
        fmt17(diag.sis_ess),
        diag.sis_depletions,
        diag.ei_depletions
    );
    emit(&out, None)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut params = match args.preset.as_deref() {
        None | Some("synthetic8") => SyntheticParams::synthetic8(),
        Some("synthetic32") => SyntheticParams::synthetic32(),
        Some(other) => bail!("unknown preset '{other}' (synthetic8|synthetic32)"),
    };
    if let Some(v) = args.states {
        params.num_states = v;
    }
    if let Some(v) = args.actions {
        params.num_actions = v;
    }
    if let Some(v) = args.observations {
        params.num_observations = v;
    }
    if let Some(v) = args.successors {
        params.successors = v;
    }
    if let Some(v) = args.accuracy {
        params.accuracy = v;
    }
    if let Some(v) = args.discount {
        params.discount = v;
    }
    if let Some(v) = args.seed {
        params.seed = v;
    }
    if params.num_states == 0 || params.num_actions == 0 || params.num_observations == 0 {
        bail!("states, actions and observations must be positive");
    }
    if params.num_states > 1000 || params.num_observations > 1000 {
        bail!("states and observations are limited to 1000");
    }
    if params.accuracy > 1000 {
        bail!("accuracy is in thousandths and must be at most 1000");
    }
    if !(0.0..1.0).contains(&params.discount) {
        bail!("discount must lie in [0, 1)");
    }
    emit(&generate_text(&params), args.output.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Monitor(a) => monitor(a),
        Command::Experiment(a) => experiment(a),
        Command::Bounds(a) => bounds(a),
        Command::Check(a) => check(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
