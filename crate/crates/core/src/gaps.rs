//! Softmax routing policies trained by gradient ascent on delivery reward.
//!
//! Every node holds a [`PolicyTable`] with one parameter per
//! (destination, outgoing link) pair. A packet bound for destination `o`
//! leaves over link `a` with probability
//!
//! ```text
//! mu(a | o) = exp(theta[o][a] / T) / sum_b exp(theta[o][b] / T)
//! ```
//!
//! where `T` is the temperature and the sum runs over links that are
//! currently up. When a packet terminates, each node that forwarded it
//! receives the packet's reward `r` and moves its parameters by
//! `alpha * gamma^t * r * sum_tau grad ln mu(a_tau | o_tau)`, summed over
//! the decisions that node made for the packet.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::paths::DistanceTable;
use crate::topology::Topology;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("no available action")]
    EmptyActionSet,
    #[error("action {0} is not in the available set")]
    UnavailableAction(usize),
    #[error("non-finite {0} in update")]
    NonFinite(&'static str),
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(&'static str),
    #[error("policy text, line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Set of usable action indices, one bit per link index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(pub u64);

impl ActionSet {
    pub fn all(count: usize) -> Self {
        assert!(count <= 64);
        if count == 64 {
            ActionSet(u64::MAX)
        } else {
            ActionSet((1u64 << count) - 1)
        }
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        ActionSet(indices.iter().fold(0, |m, &i| m | (1 << i)))
    }

    pub fn contains(self, a: usize) -> bool {
        a < 64 && self.0 & (1 << a) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }
}

/// Learning hyperparameters shared by every node's table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapsParams {
    pub temperature: f64,
    pub learning_rate: f64,
    pub discount: f64,
}

impl Default for GapsParams {
    fn default() -> Self {
        GapsParams {
            temperature: 1.0,
            learning_rate: 0.01,
            discount: 1.0,
        }
    }
}

impl GapsParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(PolicyError::InvalidParameter("temperature must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(PolicyError::InvalidParameter("learning rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(PolicyError::InvalidParameter("discount must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Parameter table `theta[observation][action]` with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    observations: usize,
    actions: usize,
    theta: Vec<f64>,
    params: GapsParams,
}

impl PolicyTable {
    /// All-zero table: uniform over available actions.
    pub fn zeros(observations: usize, actions: usize, params: GapsParams) -> Self {
        Self::from_theta(observations, actions, vec![0.0; observations * actions], params)
    }

    pub fn from_theta(observations: usize, actions: usize, theta: Vec<f64>, params: GapsParams) -> Self {
        assert_eq!(theta.len(), observations * actions, "theta shape mismatch");
        assert!(actions <= 64, "at most 64 actions per table");
        PolicyTable {
            observations,
            actions,
            theta,
            params,
        }
    }

    /// i.i.d. uniform parameters on `[-scale, scale]`.
    pub fn init_random<R: Rng + ?Sized>(
        observations: usize,
        actions: usize,
        rng: &mut R,
        scale: f64,
        params: GapsParams,
    ) -> Result<Self, PolicyError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(PolicyError::InvalidParameter("scale must be positive"));
        }
        let theta = (0..observations * actions)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Ok(Self::from_theta(observations, actions, theta, params))
    }

    /// Table for `node` that forwards along the shortest-path next hop
    /// with probability `1 - epsilon` and spreads `epsilon` evenly over the
    /// other up links. Destinations without a next hop get a uniform row.
    pub fn init_epsilon_greedy(
        topology: &Topology,
        distances: &DistanceTable,
        node: usize,
        epsilon: f64,
        params: GapsParams,
    ) -> Result<Self, PolicyError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(PolicyError::InvalidParameter("epsilon must lie in (0, 1)"));
        }
        let n = topology.node_count();
        let mut table = Self::zeros(n, topology.degree(node), params);
        let k = topology.neighbors(node).count();
        if k < 2 {
            return Ok(table);
        }
        let gap = greedy_gap(epsilon, k, params.temperature);
        for dest in 0..n {
            if let Some(hop) = distances.next_hop(node, dest) {
                let a = topology.link_index(node, hop).expect("next hop is a neighbor");
                table.theta[dest * table.actions + a] = gap;
            }
        }
        Ok(table)
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn params(&self) -> &GapsParams {
        &self.params
    }

    pub fn theta(&self, o: usize, a: usize) -> f64 {
        self.theta[o * self.actions + a]
    }

    pub fn row(&self, o: usize) -> &[f64] {
        &self.theta[o * self.actions..(o + 1) * self.actions]
    }

    pub fn set_theta(&mut self, o: usize, a: usize, value: f64) {
        self.theta[o * self.actions + a] = value;
    }

    /// Softmax probabilities over `available`, in ascending action order.
    ///
    /// Normalization subtracts the row maximum, so any finite parameters
    /// are safe. Probabilities are floored at the smallest positive normal
    /// float so that no available action is ever impossible.
    pub fn action_probabilities(&self, o: usize, available: ActionSet) -> Result<Vec<f64>, PolicyError> {
        if available.is_empty() {
            return Err(PolicyError::EmptyActionSet);
        }
        let row = self.row(o);
        let t = self.params.temperature;
        let max = available.iter().map(|a| row[a] / t).fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = available.iter().map(|a| (row[a] / t - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p = (*p / total).max(f64::MIN_POSITIVE);
        }
        Ok(probs)
    }

    /// Probability of a single available action.
    pub fn probability(&self, o: usize, a: usize, available: ActionSet) -> Result<f64, PolicyError> {
        if !available.contains(a) {
            return Err(PolicyError::UnavailableAction(a));
        }
        let probs = self.action_probabilities(o, available)?;
        let pos = available.iter().position(|b| b == a).expect("checked above");
        Ok(probs[pos])
    }

    /// Draws an action; consumes exactly one uniform variate.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        o: usize,
        available: ActionSet,
        rng: &mut R,
    ) -> Result<usize, PolicyError> {
        let probs = self.action_probabilities(o, available)?;
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        let mut last = 0;
        for (a, p) in available.iter().zip(&probs) {
            cumulative += p;
            last = a;
            if u < cumulative {
                return Ok(a);
            }
        }
        // rounding left u above the final cumulative sum
        Ok(last)
    }

    /// Gradient of `ln mu(a | o)` with respect to row `o` of theta. Every
    /// other row has zero gradient and is omitted.
    pub fn grad_log_prob(&self, o: usize, a: usize, available: ActionSet) -> Result<GradRow, PolicyError> {
        if !available.contains(a) {
            return Err(PolicyError::UnavailableAction(a));
        }
        let probs = self.action_probabilities(o, available)?;
        let inv_t = 1.0 / self.params.temperature;
        let mut values = vec![0.0; self.actions];
        for (b, p) in available.iter().zip(probs) {
            values[b] = if b == a { (1.0 - p) * inv_t } else { -p * inv_t };
        }
        Ok(GradRow { observation: o, values })
    }

    /// Sum of log-probability gradients over a packet's decisions at this node.
    pub fn accumulate(&self, record: &TrajectoryRecord) -> Result<GradientAccumulator, PolicyError> {
        let mut acc = GradientAccumulator::default();
        for entry in &record.entries {
            acc.add(&self.grad_log_prob(entry.observation, entry.action, entry.available)?);
        }
        Ok(acc)
    }

    /// Gradient-ascent step `theta += alpha * gamma^elapsed * reward * acc`.
    pub fn apply_update(&mut self, acc: &GradientAccumulator, reward: f64, elapsed: u64) -> Result<(), PolicyError> {
        if !reward.is_finite() {
            return Err(PolicyError::NonFinite("reward"));
        }
        if !acc.is_finite() {
            return Err(PolicyError::NonFinite("gradient"));
        }
        let discount = if self.params.discount == 1.0 {
            1.0
        } else {
            self.params.discount.powf(elapsed as f64)
        };
        let scale = self.params.learning_rate * discount * reward;
        for (&o, values) in &acc.rows {
            let row = &mut self.theta[o * self.actions..(o + 1) * self.actions];
            for (theta, g) in row.iter_mut().zip(values) {
                *theta += scale * g;
            }
        }
        Ok(())
    }

    /// Serializes as `policy <node> <destinations> <links>` followed by one
    /// row of parameters per destination.
    pub fn to_text(&self, node: usize) -> String {
        let mut out = format!("policy {node} {} {}\n", self.observations, self.actions);
        for o in 0..self.observations {
            let row: Vec<String> = self.row(o).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    /// Inverse of [`PolicyTable::to_text`]; returns the node id and table.
    pub fn from_text(text: &str, params: GapsParams) -> Result<(usize, Self), PolicyError> {
        let err = |line: usize, msg: &str| PolicyError::Format {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [keyword, node, obs, acts] = fields[..] else {
            return Err(err(1, "expected `policy <node> <destinations> <links>`"));
        };
        if keyword != "policy" {
            return Err(err(1, "expected `policy` header"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err(1, "bad header number"));
        let (node, observations, actions) = (num(node)?, num(obs)?, num(acts)?);
        if actions > 64 {
            return Err(err(1, "at most 64 links"));
        }
        let mut theta = Vec::with_capacity(observations * actions);
        for _ in 0..observations {
            let (i, line) = lines.next().ok_or_else(|| err(0, "missing rows"))?;
            let row = line
                .split_whitespace()
                .map(|w| w.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| err(i + 1, "bad number"))?;
            if row.len() != actions {
                return Err(err(i + 1, "wrong number of columns"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(err(i + 1, "non-finite parameter"));
            }
            theta.extend(row);
        }
        if let Some((i, _)) = lines.next() {
            return Err(err(i + 1, "trailing rows"));
        }
        Ok((node, Self::from_theta(observations, actions, theta, params)))
    }
}

/// `theta_greedy - theta_other` giving the greedy link probability
/// `1 - epsilon` among `k` available links.
pub fn greedy_gap(epsilon: f64, k: usize, temperature: f64) -> f64 {
    temperature * ((1.0 - epsilon) * (k as f64 - 1.0) / epsilon).ln()
}

/// Dense gradient of one observation row.
#[derive(Debug, Clone, PartialEq)]
pub struct GradRow {
    pub observation: usize,
    pub values: Vec<f64>,
}

/// Sparse sum of gradient rows, keyed by observation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientAccumulator {
    rows: BTreeMap<usize, Vec<f64>>,
}

impl GradientAccumulator {
    pub fn add(&mut self, g: &GradRow) {
        let row = self
            .rows
            .entry(g.observation)
            .or_insert_with(|| vec![0.0; g.values.len()]);
        for (acc, v) in row.iter_mut().zip(&g.values) {
            *acc += v;
        }
    }

    /// Coordinate `(o, a)`; zero when absent.
    pub fn get(&self, o: usize, a: usize) -> f64 {
        self.rows.get(&o).and_then(|r| r.get(a)).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.rows.values().flatten().all(|&v| v == 0.0)
    }

    fn is_finite(&self) -> bool {
        self.rows.values().flatten().all(|v| v.is_finite())
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().map(|(&o, r)| (o, r.as_slice()))
    }
}

/// One routing decision as seen by the deciding node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryEntry {
    /// Decision index within the packet's whole history (0-based).
    pub tau: u32,
    pub observation: usize,
    pub action: usize,
    pub available: ActionSet,
}

/// A node's decisions for one packet, in time order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrajectoryRecord {
    pub packet_id: u64,
    pub entries: Vec<TrajectoryEntry>,
}

impl TrajectoryRecord {
    pub fn new(packet_id: u64) -> Self {
        TrajectoryRecord {
            packet_id,
            entries: Vec::new(),
        }
    }

    /// Appends a decision; `tau` must exceed the previous entry's and the
    /// action must be available.
    pub fn push(&mut self, entry: TrajectoryEntry) {
        debug_assert!(self.entries.last().is_none_or(|e| e.tau < entry.tau));
        debug_assert!(entry.available.contains(entry.action));
        self.entries.push(entry);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(row: &[f64], t: f64) -> PolicyTable {
        PolicyTable::from_theta(
            1,
            row.len(),
            row.to_vec(),
            GapsParams {
                temperature: t,
                ..Default::default()
            },
        )
    }

    #[test]
    fn uniform_row_is_uniform() {
        for t in [0.1, 1.0, 7.0] {
            let p = table(&[0.0, 0.0, 0.0], t)
                .action_probabilities(0, ActionSet::all(3))
                .unwrap();
            for v in p {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ln2_gives_one_third_two_thirds() {
        let p = table(&[0.0, 2f64.ln()], 1.0)
            .action_probabilities(0, ActionSet::all(2))
            .unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_parameters_stay_finite_and_positive() {
        let p = table(&[1000.0, 0.0], 1.0)
            .action_probabilities(0, ActionSet::all(2))
            .unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] > 0.0);
        // exp(-700) is representable and must come through unfloored
        let p = table(&[700.0, 0.0], 1.0)
            .action_probabilities(0, ActionSet::all(2))
            .unwrap();
        let expected = (-700f64).exp();
        assert!(((p[1] - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn unavailable_actions_are_excluded() {
        let t = table(&[5.0, 0.0, 0.0], 1.0);
        let p = t.action_probabilities(0, ActionSet::from_indices(&[1, 2])).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(
            t.action_probabilities(0, ActionSet(0)),
            Err(PolicyError::EmptyActionSet)
        );
        assert_eq!(
            t.grad_log_prob(0, 0, ActionSet::from_indices(&[1, 2])),
            Err(PolicyError::UnavailableAction(0))
        );
        let g = t.grad_log_prob(0, 1, ActionSet::from_indices(&[1, 2])).unwrap();
        assert_eq!(g.values, vec![0.0, 0.5, -0.5]);
    }

    #[test]
    fn single_action_is_always_chosen() {
        let t = table(&[-3.0, 4.0, 1.0], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(t.sample_action(0, ActionSet::from_indices(&[2]), &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let t = table(&[0.3, -0.2, 0.9, 0.0], 0.5);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|_| t.sample_action(0, ActionSet::all(4), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let t = table(&[0.0; 3], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[t.sample_action(0, ActionSet::all(3), &mut rng).unwrap()] += 1;
        }
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn gradient_of_uniform_pair() {
        let g = table(&[0.0, 0.0], 1.0).grad_log_prob(0, 1, ActionSet::all(2)).unwrap();
        assert_eq!(g.observation, 0);
        assert_eq!(g.values, vec![-0.5, 0.5]);
    }

    #[test]
    fn gradient_touches_only_observed_row() {
        let t = PolicyTable::from_theta(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], GapsParams::default());
        let g = t.grad_log_prob(1, 0, ActionSet::all(2)).unwrap();
        let mut acc = GradientAccumulator::default();
        acc.add(&g);
        assert_eq!(acc.get(0, 0), 0.0);
        assert_eq!(acc.get(2, 1), 0.0);
        assert!(acc.get(1, 0) > 0.0);
        assert_eq!(acc.rows().count(), 1);
    }

    #[test]
    fn accumulate_empty_and_single() {
        let t = table(&[0.4, -1.0, 2.0], 0.5);
        let mut rec = TrajectoryRecord::new(7);
        assert!(t.accumulate(&rec).unwrap().is_zero());
        let avail = ActionSet::all(3);
        rec.push(TrajectoryEntry {
            tau: 0,
            observation: 0,
            action: 2,
            available: avail,
        });
        let acc = t.accumulate(&rec).unwrap();
        let g = t.grad_log_prob(0, 2, avail).unwrap();
        for a in 0..3 {
            assert_eq!(acc.get(0, a), g.values[a]);
        }
    }

    #[test]
    fn repeated_visit_sums_two_terms() {
        let t = table(&[0.4, -1.0, 2.0], 1.0);
        let avail = ActionSet::all(3);
        let mut rec = TrajectoryRecord::new(1);
        rec.push(TrajectoryEntry {
            tau: 1,
            observation: 0,
            action: 0,
            available: avail,
        });
        rec.push(TrajectoryEntry {
            tau: 4,
            observation: 0,
            action: 2,
            available: avail,
        });
        let acc = t.accumulate(&rec).unwrap();
        let g1 = t.grad_log_prob(0, 0, avail).unwrap();
        let g2 = t.grad_log_prob(0, 2, avail).unwrap();
        for a in 0..3 {
            assert_eq!(acc.get(0, a), g1.values[a] + g2.values[a]);
        }
        assert!(!acc.is_zero());
    }

    #[test]
    fn zero_gradient_leaves_theta() {
        let mut t = table(&[0.4, -1.0], 1.0);
        let before = t.clone();
        t.apply_update(&GradientAccumulator::default(), -12.0, 5).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn single_decision_update_matches_closed_form() {
        let params = GapsParams {
            temperature: 2.0,
            learning_rate: 0.05,
            discount: 1.0,
        };
        let mut t = PolicyTable::from_theta(1, 3, vec![0.3, -0.1, 0.7], params);
        let avail = ActionSet::all(3);
        let mu = t.probability(0, 1, avail).unwrap();
        let mut rec = TrajectoryRecord::new(0);
        rec.push(TrajectoryEntry {
            tau: 0,
            observation: 0,
            action: 1,
            available: avail,
        });
        let acc = t.accumulate(&rec).unwrap();
        let reward = -9.0;
        t.apply_update(&acc, reward, 9).unwrap();
        let delta = t.theta(0, 1) - (-0.1);
        let expected = 0.05 * reward * (1.0 - mu) / 2.0;
        assert!((delta - expected).abs() < 1e-15);
    }

    #[test]
    fn discount_scales_update() {
        let params = GapsParams {
            temperature: 1.0,
            learning_rate: 1.0,
            discount: 0.5,
        };
        let mut t = PolicyTable::from_theta(1, 2, vec![0.0, 0.0], params);
        let mut acc = GradientAccumulator::default();
        acc.add(&t.grad_log_prob(0, 0, ActionSet::all(2)).unwrap());
        t.apply_update(&acc, -1.0, 3).unwrap();
        assert!((t.theta(0, 0) - (-0.5 * 0.125)).abs() < 1e-15);
    }

    #[test]
    fn update_rejects_non_finite() {
        let mut t = table(&[0.0, 0.0], 1.0);
        let acc = GradientAccumulator::default();
        assert_eq!(t.apply_update(&acc, f64::NAN, 1), Err(PolicyError::NonFinite("reward")));
        let mut bad = GradientAccumulator::default();
        bad.add(&GradRow {
            observation: 0,
            values: vec![f64::INFINITY, 0.0],
        });
        assert_eq!(t.apply_update(&bad, -1.0, 1), Err(PolicyError::NonFinite("gradient")));
    }

    #[test]
    fn random_init_is_bounded_and_reproducible() {
        let p = GapsParams::default();
        let a = PolicyTable::init_random(4, 3, &mut ChaCha8Rng::seed_from_u64(5), 0.5, p).unwrap();
        let b = PolicyTable::init_random(4, 3, &mut ChaCha8Rng::seed_from_u64(5), 0.5, p).unwrap();
        assert_eq!(a, b);
        assert!(a.theta.iter().all(|v| v.abs() <= 0.5));
        let tiny = PolicyTable::init_random(2, 4, &mut ChaCha8Rng::seed_from_u64(5), 1e-12, p).unwrap();
        for v in tiny.action_probabilities(1, ActionSet::all(4)).unwrap() {
            assert!((v - 0.25).abs() < 1e-11);
        }
        assert!(PolicyTable::init_random(1, 1, &mut ChaCha8Rng::seed_from_u64(5), 0.0, p).is_err());
    }

    #[test]
    fn epsilon_greedy_probabilities() {
        use crate::paths::unit_shortest_paths;
        // star around node 0 with 4 leaves; path to leaf 1 goes direct
        let star = Topology::parse("nodes 5\nedge 0 1\nedge 0 2\nedge 0 3\nedge 0 4").unwrap();
        let dt = unit_shortest_paths(&star);
        let t = PolicyTable::init_epsilon_greedy(&star, &dt, 0, 0.01, GapsParams::default()).unwrap();
        let p = t.action_probabilities(1, ActionSet::all(4)).unwrap();
        let expected = [0.99, 0.01 / 3.0, 0.01 / 3.0, 0.01 / 3.0];
        for (got, want) in p.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{p:?}");
        }
        // self row stays uniform
        assert!(t.row(0).iter().all(|&v| v == 0.0));

        let pair = Topology::parse("nodes 3\nedge 0 1\nedge 0 2").unwrap();
        let dt = unit_shortest_paths(&pair);
        let t = PolicyTable::init_epsilon_greedy(&pair, &dt, 0, 0.01, GapsParams::default()).unwrap();
        let p = t.action_probabilities(2, ActionSet::all(2)).unwrap();
        assert!((p[1] - 0.99).abs() < 1e-12 && (p[0] - 0.01).abs() < 1e-12);

        // leaf has a single link
        let t = PolicyTable::init_epsilon_greedy(&pair, &dt, 1, 0.3, GapsParams::default()).unwrap();
        assert_eq!(t.action_probabilities(2, ActionSet::all(1)).unwrap(), vec![1.0]);
        assert!(PolicyTable::init_epsilon_greedy(&pair, &dt, 1, 1.0, GapsParams::default()).is_err());
    }

    #[test]
    fn epsilon_greedy_unreachable_row_is_uniform() {
        use crate::paths::unit_shortest_paths;
        let t = Topology::parse("nodes 4\nedge 0 1\nedge 0 2").unwrap();
        let dt = unit_shortest_paths(&t);
        let table = PolicyTable::init_epsilon_greedy(&t, &dt, 0, 0.01, GapsParams::default()).unwrap();
        assert_eq!(
            table.action_probabilities(3, ActionSet::all(2)).unwrap(),
            vec![0.5, 0.5]
        );
    }

    #[test]
    fn text_format_round_trip() {
        let p = GapsParams::default();
        let t = PolicyTable::init_random(3, 2, &mut ChaCha8Rng::seed_from_u64(1), 4.0, p).unwrap();
        let text = t.to_text(17);
        assert!(text.starts_with("policy 17 3 2\n"));
        let (node, back) = PolicyTable::from_text(&text, p).unwrap();
        assert_eq!(node, 17);
        assert_eq!(back, t);
        assert!(PolicyTable::from_text("policy 1 2 2\n0 0\n", p).is_err());
        assert!(PolicyTable::from_text("policy 1 1 2\n0 x\n", p).is_err());
        assert!(PolicyTable::from_text("table 1 1 1\n0\n", p).is_err());
    }
}
