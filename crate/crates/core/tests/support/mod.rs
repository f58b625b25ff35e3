//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use netroute::{ActionSet, PolicyTable, Topology, TrajectoryEntry, TrajectoryRecord};
use rand::Rng;

/// Floyd–Warshall over directed arc weights; `None` means unreachable.
pub fn floyd_warshall(t: &Topology, weight: impl Fn(usize, usize) -> u64) -> Vec<Vec<Option<u64>>> {
    let n = t.node_count();
    let mut d = vec![vec![None; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = Some(0);
        for v in t.neighbors(u) {
            row[v] = Some(weight(u, v));
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Random simple graph; each pair is linked with probability `p`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Topology {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Topology::new(n, &edges).unwrap()
}

/// Central difference of `f` at `x` along coordinate `i`, refined once by
/// Richardson extrapolation.
pub fn richardson_derivative(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let central = |h: f64| {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[i] += h;
        minus[i] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    };
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

/// Softmax over a full row, straight from the definition.
pub fn reference_softmax(theta: &[f64], temperature: f64) -> Vec<f64> {
    let m = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = theta.iter().map(|t| ((t - m) / temperature).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Outcome of taking an action in a toy episodic problem.
#[derive(Debug, Clone, Copy)]
pub enum Next {
    State(usize),
    Terminal(f64),
}

/// Small episodic decision problem with deterministic transitions and a
/// single terminal reward. States double as policy observations.
#[derive(Debug, Clone)]
pub struct ToyMdp {
    pub transitions: Vec<Vec<Next>>,
}

impl ToyMdp {
    /// Start state 0 with three actions, one leading to a second state.
    pub fn two_state() -> Self {
        ToyMdp {
            transitions: vec![
                vec![Next::Terminal(1.0), Next::State(1), Next::Terminal(-0.5)],
                vec![Next::Terminal(2.0), Next::Terminal(-1.0)],
            ],
        }
    }

    /// Binary tree of depth two with rewards at the leaves.
    pub fn three_state() -> Self {
        ToyMdp {
            transitions: vec![
                vec![Next::State(1), Next::State(2)],
                vec![Next::Terminal(1.0), Next::Terminal(-1.0)],
                vec![Next::Terminal(-0.5), Next::Terminal(0.4)],
            ],
        }
    }

    pub fn states(&self) -> usize {
        self.transitions.len()
    }

    pub fn actions(&self) -> usize {
        self.transitions.iter().map(Vec::len).max().unwrap()
    }

    pub fn available(&self, s: usize) -> ActionSet {
        ActionSet::all(self.transitions[s].len())
    }

    /// Expected terminal reward from state 0, by enumerating every episode.
    pub fn value(&self, flat_theta: &[f64], temperature: f64) -> f64 {
        let k = self.actions();
        self.value_from(0, &|s: usize| {
            reference_softmax(&flat_theta[s * k..s * k + self.transitions[s].len()], temperature)
        })
    }

    fn value_from(&self, s: usize, probs: &dyn Fn(usize) -> Vec<f64>) -> f64 {
        let p = probs(s);
        self.transitions[s]
            .iter()
            .zip(p)
            .map(|(next, pa)| {
                pa * match *next {
                    Next::Terminal(r) => r,
                    Next::State(s2) => self.value_from(s2, probs),
                }
            })
            .sum()
    }

    /// Exact gradient of the value, by Richardson-refined differences.
    pub fn value_gradient(&self, flat_theta: &[f64], temperature: f64) -> Vec<f64> {
        (0..flat_theta.len())
            .map(|i| richardson_derivative(|th| self.value(th, temperature), flat_theta, i, 1e-4))
            .collect()
    }

    /// Samples one episode with `table`, returning its decisions, reward
    /// and length.
    pub fn episode<R: Rng>(&self, table: &PolicyTable, rng: &mut R) -> (TrajectoryRecord, f64, u64) {
        let mut record = TrajectoryRecord::new(0);
        let mut s = 0;
        let mut tau = 0;
        loop {
            let available = self.available(s);
            let a = table.sample_action(s, available, rng).unwrap();
            record.push(TrajectoryEntry {
                tau,
                observation: s,
                action: a,
                available,
            });
            tau += 1;
            match self.transitions[s][a] {
                Next::Terminal(r) => return (record, r, tau as u64),
                Next::State(s2) => s = s2,
            }
        }
    }
}

pub fn flat_theta(table: &PolicyTable) -> Vec<f64> {
    (0..table.observations()).flat_map(|o| table.row(o).to_vec()).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
