//! Load sweeps: run every (load, seed) cell of an experiment, write and
//! read result CSVs, and reduce rows to per-load plot series.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::agent::{GapsInit, GapsRouter};
use crate::baselines::{BestRouter, BestloadRouter, QRouter, DEFAULT_Q_LEARNING_RATE};
use crate::gaps::{ActionSet, GapsParams, PolicyError};
use crate::sim::{
    NetView, Packet, RewardDelivery, Route, Router, SimConfig, SimError, SimRng, Simulation, DEFAULT_QUEUE_CAPACITY,
};
use crate::topology::{self, Topology, TopologyError};

pub const CSV_HEADER: &str = "topology,algorithm,load,seed,avg_delivery_time,delivered,discarded,dropped_at_queue";

pub const DEFAULT_STEPS: u64 = 100_000;
pub const DEFAULT_WARMUP: u64 = 60_000;
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_RANDOM_SCALE: f64 = 1.0;

// Decorrelates the policy-initialization stream from the simulation stream.
const INIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown topology `{0}` (built-ins: original, modified)")]
    UnknownTopology(String),
    #[error("cannot read topology file {path}: {source}")]
    TopologyFile { path: PathBuf, source: io::Error },
    #[error("invalid topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("CSV line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Gaps,
    Best,
    Bestload,
    QRouting,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Gaps,
        Algorithm::Best,
        Algorithm::Bestload,
        Algorithm::QRouting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gaps => "gaps",
            Algorithm::Best => "best",
            Algorithm::Bestload => "bestload",
            Algorithm::QRouting => "qrouting",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Random,
    EpsilonGreedy,
}

impl FromStr for InitMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(InitMode::Random),
            "epsilon-greedy" => Ok(InitMode::EpsilonGreedy),
            _ => Err(HarnessError::Config(format!("unknown init mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologySource {
    Builtin(String),
    File(PathBuf),
}

impl TopologySource {
    /// A built-in name if one matches, otherwise a file path.
    pub fn parse(s: &str) -> Self {
        if topology::builtin(s).is_some() {
            TopologySource::Builtin(s.to_string())
        } else {
            TopologySource::File(PathBuf::from(s))
        }
    }

    pub fn load(&self) -> Result<Topology, HarnessError> {
        match self {
            TopologySource::Builtin(name) => {
                topology::builtin(name).ok_or_else(|| HarnessError::UnknownTopology(name.clone()))
            }
            TopologySource::File(path) => {
                let text = fs::read_to_string(path).map_err(|source| HarnessError::TopologyFile {
                    path: path.clone(),
                    source,
                })?;
                Ok(Topology::parse(&text)?)
            }
        }
    }

    /// Label used in the `topology` CSV column.
    pub fn label(&self) -> String {
        match self {
            TopologySource::Builtin(name) => name.clone(),
            TopologySource::File(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: TopologySource,
    pub algorithm: Algorithm,
    pub loads: Vec<f64>,
    pub seeds: Vec<u64>,
    pub steps: u64,
    pub warmup: u64,
    pub gaps: GapsParams,
    pub epsilon: f64,
    pub init: InitMode,
    pub random_scale: f64,
    pub q_learning_rate: f64,
    pub queue_capacity: usize,
    /// Saved GAPS tables to start from instead of `init`.
    pub restore_policies: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologySource::Builtin("original".into()),
            algorithm: Algorithm::Gaps,
            loads: parse_loads("0.5:3.5:0.5").expect("valid default"),
            seeds: DEFAULT_SEEDS.to_vec(),
            steps: DEFAULT_STEPS,
            warmup: DEFAULT_WARMUP,
            gaps: GapsParams::default(),
            epsilon: DEFAULT_EPSILON,
            init: InitMode::EpsilonGreedy,
            random_scale: DEFAULT_RANDOM_SCALE,
            q_learning_rate: DEFAULT_Q_LEARNING_RATE,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            restore_policies: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.loads.is_empty() {
            return bad("at least one load is required");
        }
        if self.loads.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("loads must be positive");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.warmup >= self.steps {
            return bad("warmup must be smaller than steps");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.random_scale > 0.0 && self.random_scale.is_finite()) {
            return bad("random init scale must be positive");
        }
        if !(self.q_learning_rate > 0.0 && self.q_learning_rate <= 1.0) {
            return bad("Q-routing learning rate must lie in (0, 1]");
        }
        if self.queue_capacity == 0 {
            return bad("queue capacity must be at least 1");
        }
        self.gaps.validate()?;
        Ok(())
    }
}

/// Parses `start:end:step` (inclusive) or a comma-separated list.
pub fn parse_loads(text: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = || HarnessError::Config(format!("bad load list `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let loads = match parts[..] {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if step.is_nan() || step <= 0.0 || end < start {
                return Err(bad());
            }
            let count = ((end - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| round_sig(start + i as f64 * step)).collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if loads.is_empty() || loads.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(bad());
    }
    Ok(loads)
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, HarnessError> {
    let seeds = text
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| HarnessError::Config(format!("bad seed list `{text}`")))?;
    if seeds.is_empty() {
        return Err(HarnessError::Config("empty seed list".into()));
    }
    Ok(seeds)
}

/// Any of the four routers, so callers can inspect the final state.
#[derive(Debug, Clone)]
pub enum AnyRouter {
    Gaps(GapsRouter),
    Best(BestRouter),
    Bestload(BestloadRouter),
    QRouting(QRouter),
}

impl AnyRouter {
    pub fn build(config: &ExperimentConfig, topology: &Topology, seed: u64) -> Result<Self, HarnessError> {
        Ok(match config.algorithm {
            Algorithm::Gaps if config.restore_policies.is_some() => {
                let path = config.restore_policies.as_ref().expect("checked by guard");
                let text = fs::read_to_string(path)?;
                AnyRouter::Gaps(GapsRouter::from_text(topology, &text, config.gaps)?)
            }
            Algorithm::Gaps => {
                let init = match config.init {
                    InitMode::Random => GapsInit::Random {
                        scale: config.random_scale,
                    },
                    InitMode::EpsilonGreedy => GapsInit::EpsilonGreedy {
                        epsilon: config.epsilon,
                    },
                };
                let mut rng = SimRng::seed_from_u64(seed ^ INIT_STREAM);
                AnyRouter::Gaps(GapsRouter::new(topology, config.gaps, init, &mut rng)?)
            }
            Algorithm::Best => AnyRouter::Best(BestRouter::new(topology)),
            Algorithm::Bestload => AnyRouter::Bestload(BestloadRouter::new(topology)),
            Algorithm::QRouting => AnyRouter::QRouting(QRouter::new(topology, config.q_learning_rate)),
        })
    }

    pub fn as_gaps(&self) -> Option<&GapsRouter> {
        match self {
            AnyRouter::Gaps(r) => Some(r),
            _ => None,
        }
    }

    fn inner(&mut self) -> &mut dyn Router {
        match self {
            AnyRouter::Gaps(r) => r,
            AnyRouter::Best(r) => r,
            AnyRouter::Bestload(r) => r,
            AnyRouter::QRouting(r) => r,
        }
    }
}

impl Router for AnyRouter {
    fn route(&mut self, net: &NetView, node: usize, packet: &Packet, available: ActionSet, rng: &mut SimRng) -> Route {
        self.inner().route(net, node, packet, available, rng)
    }
    fn on_forward(&mut self, net: &NetView, node: usize, route: Route, packet: &Packet) {
        self.inner().on_forward(net, node, route, packet)
    }
    fn on_delivered(&mut self, net: &NetView, packet: &Packet) {
        self.inner().on_delivered(net, packet)
    }
    fn on_reward(&mut self, net: &NetView, deliveries: Vec<RewardDelivery>) {
        self.inner().on_reward(net, deliveries)
    }
    fn on_topology_change(&mut self, topology: &Topology) {
        self.inner().on_topology_change(topology)
    }
    fn wants_trajectories(&self) -> bool {
        matches!(self, AnyRouter::Gaps(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub topology: String,
    pub algorithm: Algorithm,
    pub load: f64,
    pub seed: u64,
    /// `None` when nothing was delivered in the measurement window.
    pub avg_delivery_time: Option<f64>,
    pub delivered: u64,
    pub discarded: u64,
    pub dropped_at_queue: u64,
}

/// One finished (load, seed) cell with the router's final state.
pub struct CellRun {
    pub row: ResultRow,
    pub simulation: Simulation<AnyRouter>,
}

/// Builds the simulation for one cell without running it.
pub fn prepare_cell(
    config: &ExperimentConfig,
    topology: &Topology,
    seed: u64,
) -> Result<Simulation<AnyRouter>, HarnessError> {
    let router = AnyRouter::build(config, topology, seed)?;
    let sim_config = SimConfig {
        queue_capacity: config.queue_capacity,
        seed,
    };
    Ok(Simulation::new(topology.clone(), router, sim_config)?)
}

/// Runs a single (load, seed) cell.
pub fn run_cell(config: &ExperimentConfig, topology: &Topology, load: f64, seed: u64) -> Result<CellRun, HarnessError> {
    let mut simulation = prepare_cell(config, topology, seed)?;
    let m = simulation.run(load, config.steps, config.warmup)?;
    let row = ResultRow {
        topology: config.topology.label(),
        algorithm: config.algorithm,
        load,
        seed,
        avg_delivery_time: m.average_delivery_time(),
        delivered: m.delivered,
        discarded: m.discarded,
        dropped_at_queue: m.dropped,
    };
    Ok(CellRun { row, simulation })
}

/// One row per (load, seed), loads outer, in configuration order. Cells
/// run in parallel; the output order does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    run_experiment_with(config, |_| Ok(()))
}

/// Like [`run_experiment`], calling `inspect` on every finished cell
/// before its simulation is dropped.
pub fn run_experiment_with<F>(config: &ExperimentConfig, inspect: F) -> Result<Vec<ResultRow>, HarnessError>
where
    F: Fn(&CellRun) -> Result<(), HarnessError> + Sync,
{
    config.validate()?;
    let topology = config.topology.load()?;
    let cells: Vec<(f64, u64)> = config
        .loads
        .iter()
        .flat_map(|&l| config.seeds.iter().map(move |&s| (l, s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(load, seed)| {
            let cell = run_cell(config, &topology, load, seed)?;
            inspect(&cell)?;
            Ok(cell.row)
        })
        .collect()
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Shortest decimal text for `x` at 12 significant digits, in the style
/// of C's `%.12g`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let rounded: f64 = sci.parse().expect("formatted float parses");
        trim_zeros(format!("{rounded:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.topology,
            r.algorithm,
            format_float(r.load),
            r.seed,
            r.avg_delivery_time.map_or_else(|| "nan".to_string(), format_float),
            r.delivered,
            r.discarded,
            r.dropped_at_queue
        ));
    }
    out
}

pub fn read_csv(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => {
            return Err(HarnessError::Csv {
                line: 1,
                msg: "missing or unexpected header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: &str| HarnessError::Csv {
            line: i + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 8 {
            return Err(err("expected 8 fields"));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
        let int = |s: &str| s.parse::<u64>().map_err(|_| err("bad integer"));
        let avg = float(f[4])?;
        rows.push(ResultRow {
            topology: f[0].to_string(),
            algorithm: f[1].parse().map_err(|_| err("unknown algorithm"))?,
            load: float(f[2])?,
            seed: int(f[3])?,
            avg_delivery_time: (!avg.is_nan()).then_some(avg),
            delivered: int(f[5])?,
            discarded: int(f[6])?,
            dropped_at_queue: int(f[7])?,
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation of `avg_delivery_time` over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub topology: String,
    pub algorithm: Algorithm,
    pub load: f64,
    /// Rows that had deliveries and entered the statistics.
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

/// Groups rows by (topology, algorithm, load); order is topology name,
/// algorithm, then ascending load. Rows without deliveries are skipped.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, Algorithm, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.topology.clone(), r.algorithm, load_key(r.load));
        let values = groups.entry(key).or_default();
        if let Some(v) = r.avg_delivery_time {
            values.push(v);
        }
    }
    groups
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|((topology, algorithm, load), values)| {
            let (mean, std) = mean_std(&values);
            SummaryRow {
                topology,
                algorithm,
                load: f64::from_bits(load),
                runs: values.len(),
                mean,
                std,
            }
        })
        .collect()
}

// Positive loads order the same as their bit patterns.
fn load_key(load: f64) -> u64 {
    load.to_bits()
}

/// Arithmetic mean and sample (n - 1) standard deviation; the deviation
/// of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Points of one curve: (load, mean, std).
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub topology: String,
    pub algorithm: Algorithm,
    pub points: Vec<(f64, f64, f64)>,
}

impl Series {
    pub fn file_name(&self) -> String {
        format!("{}_{}.dat", self.topology, self.algorithm)
    }

    /// Whitespace-separated columns with a `#` header.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# topology={} algorithm={}\n# load mean std\n",
            self.topology, self.algorithm
        );
        for &(load, mean, std) in &self.points {
            out.push_str(&format!(
                "{} {} {}\n",
                format_float(load),
                format_float(mean),
                format_float(std)
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Series, HarnessError> {
        let mut topology = None;
        let mut algorithm = None;
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| HarnessError::Csv {
                line: i + 1,
                msg: msg.to_string(),
            };
            if let Some(comment) = line.strip_prefix('#') {
                for word in comment.split_whitespace() {
                    match word.split_once('=') {
                        Some(("topology", v)) => topology = Some(v.to_string()),
                        Some(("algorithm", v)) => algorithm = Some(v.parse::<Algorithm>()?),
                        _ => {}
                    }
                }
                continue;
            }
            let cols = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| err("bad number"))?;
            match cols[..] {
                [] => {}
                [load, mean, std] => points.push((load, mean, std)),
                _ => return Err(err("expected 3 columns")),
            }
        }
        Ok(Series {
            topology: topology.ok_or_else(|| HarnessError::Csv {
                line: 1,
                msg: "missing topology".into(),
            })?,
            algorithm: algorithm.ok_or_else(|| HarnessError::Csv {
                line: 1,
                msg: "missing algorithm".into(),
            })?,
            points,
        })
    }
}

/// One series per (topology, algorithm), in summary order.
pub fn plot_series(summary: &[SummaryRow]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for s in summary {
        match out.last_mut() {
            Some(last) if last.topology == s.topology && last.algorithm == s.algorithm => {
                last.points.push((s.load, s.mean, s.std))
            }
            _ => out.push(Series {
                topology: s.topology.clone(),
                algorithm: s.algorithm,
                points: vec![(s.load, s.mean, s.std)],
            }),
        }
    }
    out
}

/// Writes one `.dat` file per series into `dir`, creating it if needed.
pub fn emit_plot_data(summary: &[SummaryRow], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    plot_series(summary)
        .into_iter()
        .map(|s| {
            let path = dir.join(s.file_name());
            fs::write(&path, s.to_text())?;
            Ok(path)
        })
        .collect()
}
