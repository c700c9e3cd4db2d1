use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use brnes::harness::metrics::tail_mean;
use brnes::harness::output::{emit_csv, replay, write_summary, EmitOptions};
use brnes::harness::{
    run_scenario, AttackKind, InferenceTargets, ParamOverrides, Scale, ScenarioConfig, Variant,
};

#[derive(Parser)]
#[command(
    name = "brnes",
    version,
    about = "Experience-sharing Q-learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for one or more seeds.
    Run(RunArgs),
    /// Re-run a scenario from its manifest.json.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (defaults to `<manifest dir>/replay`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Small,
    Medium,
    Large,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Brnes,
    NoDefense,
    LdpOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    None,
    Byzantine,
    Inference,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetsArg {
    Single,
    All,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "medium")]
    scale: ScaleArg,
    #[arg(long, value_enum, default_value = "brnes")]
    variant: VariantArg,
    /// Share of agents that are attackers.
    #[arg(long, default_value_t = 0.0)]
    attackers: f64,
    #[arg(long, value_enum, default_value = "none")]
    attack: AttackArg,
    /// Privacy budget ε.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    /// Number of consecutive seeds to run.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// First master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// TOML (or .json) file overriding protocol parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Share raw Q-values even for variants that perturb them.
    #[arg(long)]
    no_ldp: bool,
    /// Advisors tracked by each inference attacker.
    #[arg(long, value_enum, default_value = "single")]
    targets: TargetsArg,
    /// Log every advice exchange to advice.csv.
    #[arg(long)]
    log_advice: bool,
    /// Dump final Q-tables.
    #[arg(long)]
    q_tables: bool,
    /// Skip timing.csv.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn scenario(&self) -> Result<ScenarioConfig> {
        let scale = match self.scale {
            ScaleArg::Small => Scale::Small,
            ScaleArg::Medium => Scale::Medium,
            ScaleArg::Large => Scale::Large,
        };
        let variant = match self.variant {
            VariantArg::Brnes => Variant::Brnes,
            VariantArg::NoDefense => Variant::NoDefense,
            VariantArg::LdpOnly => Variant::LdpOnly,
        };
        let attack = match self.attack {
            AttackArg::None => AttackKind::None,
            AttackArg::Byzantine => AttackKind::Byzantine,
            AttackArg::Inference => AttackKind::Inference,
        };
        let mut cfg = ScenarioConfig::new(scale, variant)
            .with_attack(attack, self.attackers)
            .with_epsilon(self.epsilon)
            .with_episodes(self.episodes);
        if let Some(path) = &self.config {
            cfg.apply_overrides(&ParamOverrides::load(path)?);
        }
        cfg.options.disable_ldp = self.no_ldp;
        cfg.options.log_advice = self.log_advice;
        cfg.options.inference_targets = match self.targets {
            TargetsArg::Single => InferenceTargets::Single,
            TargetsArg::All => InferenceTargets::AllAdvisors,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: RunArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let base = args.scenario()?;
    let opts = EmitOptions {
        timing: !args.no_timing,
        q_tables: args.q_tables,
    };
    let mut runs = Vec::new();
    for seed in args.seed..args.seed + args.seeds {
        let cfg = base.clone().with_seed(seed);
        let dir = if args.seeds == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("seed_{seed}"))
        };
        let out = run_scenario(&cfg).with_context(|| format!("seed {seed}"))?;
        emit_csv(&out, &dir, opts)?;
        let window = out.metrics.len().min(200);
        println!(
            "seed {seed}: final-{window} SG {:.2}, reward {:.3}, {:.1}s -> {}",
            tail_mean(&out.metrics, window, |m| m.sg),
            tail_mean(&out.metrics, window, |m| m.reward),
            out.metrics.last().map_or(0.0, |m| m.tg_cumulative),
            dir.display()
        );
        if let Some(last) = out.inference.last() {
            println!(
                "  inference: attacker {} success {:.1}% over {} states",
                last.attacker_id, last.success_rate_pct, last.qualifying_states
            );
        }
        runs.push(out);
    }
    if runs.len() > 1 {
        let path = args.out.join("summary.csv");
        write_summary(&runs, &path)?;
        println!("summary -> {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Replay {
            manifest,
            out,
            no_timing,
        } => {
            let out = match out {
                Some(o) => o,
                None => manifest
                    .parent()
                    .unwrap_or_else(|| ".".as_ref())
                    .join("replay"),
            };
            let opts = EmitOptions {
                timing: !no_timing,
                q_tables: false,
            };
            replay(&manifest, &out, opts)?;
            println!("replayed -> {}", out.display());
            Ok(())
        }
    }
}
