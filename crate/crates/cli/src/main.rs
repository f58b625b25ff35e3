//! `route-bench`: run routing load sweeps and turn their CSV output into
//! plot series.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use netroute::harness::{
    self, emit_plot_data, parse_loads, parse_seeds, read_csv, run_experiment_with, summarize, write_csv,
    ExperimentConfig, InitMode, TopologySource,
};
use netroute::Algorithm;

#[derive(Debug, Parser)]
#[command(
    name = "route-bench",
    version,
    about = "Packet-routing load sweeps over GAPS and baseline routers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a load sweep and write one CSV row per (load, seed).
    Run(Box<RunArgs>),
    /// Summarize a results CSV into per-algorithm plot-data files.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Every option may also come from `--config`; flags win.
#[derive(Debug, Args, Default)]
struct RunArgs {
    /// Flat `key = value` file using the flag names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in name (original, modified) or topology file path.
    #[arg(long)]
    topology: Option<String>,
    /// gaps, best, bestload or qrouting.
    #[arg(long)]
    algorithm: Option<String>,
    /// `start:end:step` or a comma-separated list.
    #[arg(long)]
    loads: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    /// Steps excluded from measurement.
    #[arg(long)]
    warmup: Option<u64>,
    /// GAPS learning rate.
    #[arg(long)]
    alpha: Option<f64>,
    /// GAPS softmax temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// GAPS discount factor.
    #[arg(long)]
    gamma: Option<f64>,
    /// Exploration share for epsilon-greedy initialization.
    #[arg(long)]
    epsilon: Option<f64>,
    /// random or epsilon-greedy.
    #[arg(long)]
    init: Option<String>,
    /// Q-routing learning rate.
    #[arg(long = "alpha-q")]
    alpha_q: Option<f64>,
    #[arg(long = "queue-cap")]
    queue_cap: Option<usize>,
    /// Start GAPS from saved tables.
    #[arg(long)]
    restore: Option<PathBuf>,
    /// Save final GAPS tables, one file per (load, seed).
    #[arg(long = "policy-dir")]
    policy_dir: Option<PathBuf>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

const CONFIG_KEYS: [&str; 17] = [
    "topology",
    "algorithm",
    "loads",
    "seeds",
    "steps",
    "warmup",
    "alpha",
    "temperature",
    "gamma",
    "epsilon",
    "init",
    "alpha-q",
    "queue-cap",
    "restore",
    "policy-dir",
    "out",
    "config",
];

fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", i + 1);
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) || key == "config" {
            bail!("config line {}: unknown key `{key}`", i + 1);
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Fills unset flags from the config file.
fn merge(args: RunArgs, file: &BTreeMap<String, String>) -> Result<RunArgs> {
    fn pick<T: FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match (flag, file.get(key)) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(s)) => s
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")),
            (None, None) => Ok(None),
        }
    }
    Ok(RunArgs {
        config: args.config,
        topology: pick(args.topology, file, "topology")?,
        algorithm: pick(args.algorithm, file, "algorithm")?,
        loads: pick(args.loads, file, "loads")?,
        seeds: pick(args.seeds, file, "seeds")?,
        steps: pick(args.steps, file, "steps")?,
        warmup: pick(args.warmup, file, "warmup")?,
        alpha: pick(args.alpha, file, "alpha")?,
        temperature: pick(args.temperature, file, "temperature")?,
        gamma: pick(args.gamma, file, "gamma")?,
        epsilon: pick(args.epsilon, file, "epsilon")?,
        init: pick(args.init, file, "init")?,
        alpha_q: pick(args.alpha_q, file, "alpha-q")?,
        queue_cap: pick(args.queue_cap, file, "queue-cap")?,
        restore: pick(args.restore, file, "restore")?,
        policy_dir: pick(args.policy_dir, file, "policy-dir")?,
        out: pick(args.out, file, "out")?,
    })
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    if let Some(t) = &args.topology {
        c.topology = TopologySource::parse(t);
    }
    if let Some(a) = &args.algorithm {
        c.algorithm = a.parse::<Algorithm>()?;
    }
    if let Some(l) = &args.loads {
        c.loads = parse_loads(l)?;
    }
    if let Some(s) = &args.seeds {
        c.seeds = parse_seeds(s)?;
    }
    if let Some(s) = args.steps {
        c.steps = s;
    }
    if let Some(w) = args.warmup {
        c.warmup = w;
    }
    if let Some(a) = args.alpha {
        c.gaps.learning_rate = a;
    }
    if let Some(t) = args.temperature {
        c.gaps.temperature = t;
    }
    if let Some(g) = args.gamma {
        c.gaps.discount = g;
    }
    if let Some(e) = args.epsilon {
        c.epsilon = e;
    }
    if let Some(i) = &args.init {
        c.init = i.parse::<InitMode>()?;
    }
    if let Some(a) = args.alpha_q {
        c.q_learning_rate = a;
    }
    if let Some(q) = args.queue_cap {
        c.queue_capacity = q;
    }
    c.restore_policies = args.restore.clone();
    c.validate()?;
    Ok(c)
}

fn run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let args = merge(args, &file)?;
    let config = build_config(&args)?;
    if let Some(dir) = &args.policy_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let rows = run_experiment_with(&config, |cell| {
        let (Some(dir), Some(gaps)) = (&args.policy_dir, cell.simulation.router().as_gaps()) else {
            return Ok(());
        };
        let name = format!(
            "{}_load{}_seed{}.policy",
            cell.row.topology,
            harness::format_float(cell.row.load),
            cell.row.seed
        );
        fs::write(dir.join(name), gaps.to_text())?;
        Ok(())
    })?;
    let csv = write_csv(&rows);
    match &args.out {
        Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn plot(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let rows = read_csv(&text)?;
    if rows.is_empty() {
        bail!("{} has no result rows", input.display());
    }
    let summary = summarize(&rows);
    for path in emit_plot_data(&summary, out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(*args),
        Command::Plot { input, out } => plot(&input, &out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let m = parse_config_file("# sweep\nloads = 0.5:1:0.5\n\nalgorithm=best\nqueue-cap = 20\n").unwrap();
        assert_eq!(m["loads"], "0.5:1:0.5");
        assert_eq!(m["algorithm"], "best");
        assert!(parse_config_file("bogus = 1").is_err());
        assert!(parse_config_file("steps 100").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config_file("steps = 500\nwarmup = 100\nalgorithm = best").unwrap();
        let args = RunArgs {
            steps: Some(900),
            ..Default::default()
        };
        let merged = merge(args, &file).unwrap();
        let c = build_config(&merged).unwrap();
        assert_eq!(c.steps, 900);
        assert_eq!(c.warmup, 100);
        assert_eq!(c.algorithm, Algorithm::Best);
    }

    #[test]
    fn bad_values_are_reported() {
        let file = parse_config_file("steps = many").unwrap();
        assert!(merge(RunArgs::default(), &file).is_err());
        let args = RunArgs {
            algorithm: Some("ospf".into()),
            ..Default::default()
        };
        assert!(build_config(&args).is_err());
        let args = RunArgs {
            steps: Some(10),
            warmup: Some(10),
            ..Default::default()
        };
        assert!(build_config(&args).is_err());
    }
}
