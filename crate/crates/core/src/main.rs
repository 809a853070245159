use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evscore::annot::LabelMap;
use evscore::cli::{self, ExclusionPolicy, RunConfig, ThresholdGrid};
use evscore::scoring::parse_metric_list;
use evscore::taes::MultiRefPolicy;
use evscore::{Error, Result};

#[derive(Parser)]
#[command(
    name = "evscore",
    version,
    about = "Score event detections against reference annotations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a corpus and write report.json and report.txt.
    Score {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep confidence thresholds and write det.json and det_<metric>.txt.
    Det {
        #[command(flatten)]
        common: Common,
        /// `exact` or `uniform:N`.
        #[arg(long, default_value = "exact")]
        grid: String,
    },
    /// Compare systems and metrics over per-patient scores; writes stats.json
    /// and stats.txt. Hypothesis paths resolve against each system directory.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long = "system", required = true)]
        systems: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// `per-pair` or `global`.
        #[arg(long, default_value = "per-pair")]
        exclusion: String,
    },
}

#[derive(Args)]
struct Common {
    /// Pair list: `ref_path hyp_path patient_id` per line.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value = "atwv,dpalign,epoch,ira,ovlp,taes")]
    metrics: String,
    #[arg(long, default_value_t = 0.25)]
    epoch_duration: f64,
    #[arg(long, default_value_t = 0.0)]
    guard_band: f64,
    #[arg(long, default_value_t = 999.9)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// `first-only` or `credit-all`.
    #[arg(long, default_value = "first-only")]
    taes_policy: String,
    #[arg(long, default_value = "bckg")]
    default_label: String,
    /// Comma-separated label vocabulary.
    #[arg(long, default_value = "seiz,bckg")]
    labels: String,
    /// Target label; defaults to the first entry of --labels.
    #[arg(long)]
    target: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let names: Vec<&str> = self
            .labels
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let target = self
            .target
            .as_deref()
            .or(names.first().copied())
            .unwrap_or("");
        let mut c = RunConfig::new(&self.pairs);
        c.labels = LabelMap::new(&names, target)?;
        c.metrics = parse_metric_list(&self.metrics)?;
        c.params.epoch.epoch_duration = self.epoch_duration;
        c.params.ovlp.guard_band = self.guard_band;
        c.params.atwv.beta = self.beta;
        c.params.atwv.theta = self.theta;
        c.params.taes.multi_ref_policy = self.taes_policy.parse::<MultiRefPolicy>()?;
        c.default_label = self.default_label.clone();
        c.jobs = self.jobs;
        Ok(c)
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Score { common } => {
            let config = common.config()?;
            let report = cli::run_score(&config)?;
            prepare_out(&common.out)?;
            write(&common.out, "report.json", &report.to_json()?)?;
            let text = cli::render_report(&report);
            write(&common.out, "report.txt", &text)?;
            print!("{text}");
        }
        Command::Det { common, grid } => {
            let mut config = common.config()?;
            config.grid = grid.parse::<ThresholdGrid>()?;
            let report = cli::run_det(&config)?;
            prepare_out(&common.out)?;
            write(
                &common.out,
                "det.json",
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
            for c in &report.curves {
                write(
                    &common.out,
                    &format!("det_{}.txt", c.metric),
                    &c.to_columns(),
                )?;
                println!(
                    "{:<8} det_auc {:.6}  roc_auc {:.6}",
                    c.metric.name(),
                    c.auc,
                    c.roc_auc
                );
            }
        }
        Command::Stats {
            common,
            systems,
            alpha,
            exclusion,
        } => {
            let mut config = common.config()?;
            config.alpha = alpha;
            config.exclusion = exclusion.parse::<ExclusionPolicy>()?;
            let report = cli::run_stats(&config, &systems)?;
            prepare_out(&common.out)?;
            write(
                &common.out,
                "stats.json",
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
            let text = cli::render_stats(&report);
            write(&common.out, "stats.txt", &text)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(parsed.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evscore: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
