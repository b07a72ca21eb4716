use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use vislearn::harness::{
    self, evaluate_condition, pretrain_agent, run_experiment, summarize, write_outputs, Condition, ExperimentConfig,
};
use vislearn::live::SessionStore;
use vislearn::policy::{Agent, QTable};
use vislearn::world::{generate_dataset, write_dataset, WorldConfig};
use vislearn_cli::server;

#[derive(Parser)]
#[command(name = "vislearn", version, about = "Interactive attribute learning with a simulated or live tutor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML); defaults are used for anything missing.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma separated: rl, constant95, decay05, decay01.
    #[arg(long, value_delimiter = ',')]
    conditions: Option<Vec<Condition>>,
}

impl Common {
    fn load(&self) -> vislearn::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(f) = self.folds {
            cfg.folds = f;
        }
        if let Some(c) = &self.conditions {
            cfg.conditions = c.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as tab-separated text.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the two Q-tables for one fold and write them with the training curves.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate conditions on every fold, reading Q-tables for `rl` from a `train` output.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        qtables: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// All selected conditions on all folds, with curves, summary and manifest.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the live tutoring server.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory for session event logs.
        #[arg(long, default_value = "sessions")]
        data_dir: PathBuf,
        /// Pretrained Q-tables for the `rl-pretrained` policy.
        #[arg(long)]
        qtables: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vislearn: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> vislearn::Result<()> {
    match cli.command {
        Command::GenData { config, seed, out } => {
            let mut world = match config {
                Some(p) => ExperimentConfig::load(&p)?.world,
                None => WorldConfig::default(),
            };
            world.seed = seed;
            let data = generate_dataset(&world)?;
            write_dataset(&data, fs::File::create(&out)?)?;
            println!("wrote {} train and {} test objects to {}", data.train.len(), data.test.len(), out.display());
        }
        Command::Train { common, fold, out } => {
            let cfg = common.load()?;
            let (agent, traces) = pretrain_agent(&cfg, fold)?;
            save_agent(&agent, &out)?;
            fs::write(out.join("training_curves.tsv"), harness::training_curves_table(&traces))?;
            fs::write(out.join("config.toml"), cfg.to_toml())?;
            harness::write_manifest(&cfg, &out, &["dialogue.qtable", "threshold.qtable", "training_curves.tsv"])?;
            println!(
                "trained fold {fold} over {} runs: {} dialogue and {} threshold entries",
                cfg.rl.pretrain_runs,
                agent.dialogue.len(),
                agent.threshold.len()
            );
        }
        Command::Eval { common, qtables, out } => {
            let cfg = common.load()?;
            let agent = qtables.as_deref().map(load_agent).transpose()?;
            if cfg.conditions.contains(&Condition::Rl) && agent.is_none() {
                return Err(vislearn::Error::InvalidConfig("evaluating rl needs --qtables".into()));
            }
            let mut records = Vec::new();
            for fold in 0..cfg.folds {
                for &c in &cfg.conditions {
                    records.push(evaluate_condition(&cfg, fold, c, agent.as_ref(), false)?.0);
                }
            }
            let output = harness::ExperimentOutput { summary: summarize(&records), records, agents: Vec::new() };
            write_outputs(&cfg, &output, &out)?;
            print!("{}", harness::summary_table(&output.summary));
        }
        Command::Experiment { common, out } => {
            let cfg = common.load()?;
            let output = run_experiment(&cfg)?;
            write_outputs(&cfg, &output, &out)?;
            print!("{}", harness::summary_table(&output.summary));
        }
        Command::Serve { addr, data_dir, qtables, config } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            let agent = match qtables.as_deref() {
                Some(dir) => load_agent(dir)?,
                None => {
                    eprintln!("vislearn: no --qtables given, pretraining the rl-pretrained policy on fold 0");
                    pretrain_agent(&cfg, 0)?.0
                }
            };
            let store = Arc::new(SessionStore::open(data_dir, cfg, Some(agent))?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::run(&addr, store))?;
        }
    }
    Ok(())
}

fn save_agent(agent: &Agent, dir: &Path) -> vislearn::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("dialogue.qtable"), agent.dialogue.to_text())?;
    fs::write(dir.join("threshold.qtable"), agent.threshold.to_text())?;
    Ok(())
}

fn load_agent(dir: &Path) -> vislearn::Result<Agent> {
    let open = |name: &str| fs::File::open(dir.join(name)).map(BufReader::new);
    Ok(Agent {
        dialogue: QTable::read_text(open("dialogue.qtable")?)?,
        threshold: QTable::read_text(open("threshold.qtable")?)?,
    })
}
