use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cobra::env::Strategy;
use cobra::harness::{ne_deviation_probe, run_experiment, write_outputs, ExperimentConfig, ProbeConfig};
use cobra::policies::PolicyKind;
use cobra::CobraError;

#[derive(Parser)]
#[command(name = "cobra-bench", about = "Strategic contextual bandit benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write summary.csv, trace CSVs and run.json.
    Run(Overrides),
    /// Paired all-truthful vs. one-agent-deviating runs; prints JSON.
    Probe {
        #[command(flatten)]
        overrides: Overrides,
        /// Agent that deviates.
        #[arg(long, default_value_t = 0)]
        agent: usize,
        /// Over-report offset of the deviating agent.
        #[arg(long = "dev-eta", default_value_t = 0.5)]
        dev_eta: f64,
        #[arg(long = "dev-eps-eta", default_value_t = 0.0)]
        dev_eps_eta: f64,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "T")]
    rounds: Option<usize>,
    #[arg(long = "N")]
    agents: Option<usize>,
    #[arg(long)]
    dc: Option<usize>,
    #[arg(long)]
    dn: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "eps-eta")]
    eps_eta: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: cobra_ucb,cobra_ts,lin_ucb,lin_ts
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<String>>,
    #[arg(long)]
    lift: Option<bool>,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

impl Overrides {
    fn resolve(self) -> Result<ExperimentConfig, CobraError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($src:ident => $dst:ident),*) => {$( if let Some(v) = self.$src { c.$dst = v; } )*};
        }
        set!(rounds => rounds, agents => n_agents, dc => d_c, dn => d_n, lambda => lambda,
             noise => noise_scale, delta => delta, scale => reward_scale, eta => eta,
             eps_eta => eps_eta, reps => reps, seed => seed, lift => lift);
        if let Some(a) = self.algos {
            c.algos = a.iter().map(|s| s.trim().parse()).collect::<Result<Vec<PolicyKind>, _>>()?;
        }
        if self.out_dir.is_some() {
            c.out_dir = self.out_dir;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), CobraError> {
    match cli.cmd {
        Command::Run(o) => {
            let cfg = o.resolve()?;
            let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            let result = run_experiment(&cfg)?;
            write_outputs(&result, &out)?;
            let mut stdout = std::io::stdout().lock();
            for agg in &result.aggregates {
                let _ = writeln!(
                    stdout,
                    "{:<10} final mean cum regret {:>10.3} ± {:.3}",
                    agg.algo.name(),
                    agg.final_mean(),
                    agg.final_ci()
                );
            }
            let _ = writeln!(stdout, "wrote {}", out.display());
        }
        Command::Probe {
            overrides,
            agent,
            dev_eta,
            dev_eps_eta,
        } => {
            let base = overrides.resolve()?;
            let algo = base.algos[0];
            let report = ne_deviation_probe(&ProbeConfig {
                deviation: Strategy::over_report(dev_eta, dev_eps_eta)
                    .map_err(|e| CobraError::Config(e.to_string()))?,
                base,
                algo,
                probe_agent: agent,
            })?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            let _ = writeln!(std::io::stdout(), "{json}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cobra-bench: {e}");
            ExitCode::from(match e {
                CobraError::Config(_) | CobraError::InvalidArgument(_) => 2,
                CobraError::Io { .. } => 3,
                _ => 1,
            })
        }
    }
}
