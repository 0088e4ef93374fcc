//! Deep Q-learning: exploration schedule, temporal-difference updates and a
//! training agent owning the online/target network pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{argmax, Adam, QNetwork};
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::sim::{MetaAction, Observation, Policy, OBS_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub buffer_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the step budget over which epsilon decays.
    pub eps_frac: f64,
    /// Environment steps collected before the first update.
    pub warmup: usize,
    pub train_every: usize,
    pub target_sync: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 5e-4,
            batch_size: 64,
            gamma: 0.95,
            buffer_capacity: 150_000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_frac: 0.2,
            warmup: 500,
            train_every: 1,
            target_sync: 500,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("hidden", "needs at least one non-empty layer"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", "must lie in [0, 1]"));
        }
        for (field, v) in [("eps_start", self.eps_start), ("eps_end", self.eps_end), ("eps_frac", self.eps_frac)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, "must lie in [0, 1]"));
            }
        }
        for (field, v) in [
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("train_every", self.train_every),
            ("target_sync", self.target_sync),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![OBS_DIM];
        sizes.extend(&self.hidden);
        sizes.push(MetaAction::COUNT);
        sizes
    }
}

/// Linear decay from `eps_start` to `eps_end` over the first
/// `frac * total` steps, constant afterwards.
pub fn epsilon_at(step: usize, total: usize, eps_start: f64, eps_end: f64, frac: f64) -> f64 {
    let horizon = frac * total as f64;
    if horizon <= 0.0 || step as f64 >= horizon {
        return eps_end;
    }
    eps_start + (eps_end - eps_start) * step as f64 / horizon
}

/// Epsilon-greedy choice over the network's action values.
pub fn select_action<R: Rng>(q: &QNetwork, obs: &Observation, epsilon: f64, rng: &mut R) -> MetaAction {
    let idx = if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..MetaAction::COUNT)
    } else {
        argmax(&q.forward(obs.as_slice()))
    };
    MetaAction::ALL[idx]
}

/// Mean squared TD error of `batch` and its gradient with respect to the
/// online network's parameters. The target network is held fixed.
pub fn td_loss_and_grad(
    q: &QNetwork,
    target_q: &QNetwork,
    batch: &[&Transition],
    gamma: f64,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; q.params().len()];
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut d_out = vec![0.0; q.output_dim()];
    for t in batch {
        let bootstrap = if t.done {
            0.0
        } else {
            let next = target_q.forward(t.next_obs.as_slice());
            next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let y = t.reward + gamma * bootstrap;
        let acts = q.forward_cached(t.obs.as_slice());
        let err = acts.output()[t.action] - y;
        loss += err * err / n;
        d_out.fill(0.0);
        d_out[t.action] = 2.0 * err / n;
        q.backward(&acts, &d_out, &mut grad);
    }
    (loss, grad)
}

/// One Adam step on the mean squared TD error; returns the pre-step loss.
pub fn td_update(
    q: &mut QNetwork,
    target_q: &QNetwork,
    opt: &mut Adam,
    batch: &[&Transition],
    gamma: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("td_update on an empty batch".into()));
    }
    let (loss, grad) = td_loss_and_grad(q, target_q, batch, gamma);
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(divergence("non-finite TD loss", loss, q, batch));
    }
    opt.step(q.params_mut(), &grad);
    if !q.is_finite() {
        return Err(divergence("non-finite parameters after update", loss, q, batch));
    }
    Ok(loss)
}

fn divergence(message: &str, loss: f64, q: &QNetwork, batch: &[&Transition]) -> Error {
    let max_abs = q.params().iter().map(|p| p.abs()).fold(0.0, f64::max);
    let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    Error::Training {
        message: message.into(),
        dump: format!(
            "loss={loss} max|param|={max_abs} batch_size={} rewards={rewards:?}",
            batch.len()
        ),
    }
}

/// Greedy policy over a borrowed network.
#[derive(Debug, Clone, Copy)]
pub struct GreedyPolicy<'a>(pub &'a QNetwork);

impl Policy for GreedyPolicy<'_> {
    fn act(&mut self, obs: &Observation) -> usize {
        argmax(&self.0.forward(obs.as_slice()))
    }
}

impl Policy for QNetwork {
    fn act(&mut self, obs: &Observation) -> usize {
        argmax(&self.forward(obs.as_slice()))
    }
}

/// Online network, target network, optimiser and replay memory. Budgets are
/// counted in environment steps passed to [`DqnAgent::observe`].
#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: DqnConfig,
    online: QNetwork,
    target: QNetwork,
    opt: Adam,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    steps: usize,
    updates: usize,
    last_loss: Option<f64>,
}

impl DqnAgent {
    pub fn new(cfg: DqnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = QNetwork::new(&cfg.layer_sizes(), &mut rng)?;
        Ok(Self {
            target: online.clone(),
            opt: Adam::new(online.params().len(), cfg.lr),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            online,
            cfg,
            rng,
            steps: 0,
            updates: 0,
            last_loss: None,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn network(&self) -> &QNetwork {
        &self.online
    }

    pub fn into_network(self) -> QNetwork {
        self.online
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    pub fn epsilon(&self, total: usize) -> f64 {
        epsilon_at(self.steps, total, self.cfg.eps_start, self.cfg.eps_end, self.cfg.eps_frac)
    }

    /// Exploratory action for the current step of a `total`-step budget.
    pub fn act(&mut self, obs: &Observation, total: usize) -> MetaAction {
        let eps = self.epsilon(total);
        select_action(&self.online, obs, eps, &mut self.rng)
    }

    /// Stores a transition, counts one environment step and trains when due.
    pub fn observe(&mut self, t: Transition) -> Result<()> {
        self.buffer.push(t);
        self.steps += 1;
        if self.steps >= self.cfg.warmup
            && self.buffer.len() >= self.cfg.batch_size
            && self.steps % self.cfg.train_every == 0
        {
            let batch = self.buffer.sample(self.cfg.batch_size, &mut self.rng);
            let loss = td_update(&mut self.online, &self.target, &mut self.opt, &batch, self.cfg.gamma)?;
            self.last_loss = Some(loss);
            self.updates += 1;
        }
        if self.steps % self.cfg.target_sync == 0 {
            self.target = self.online.clone();
        }
        Ok(())
    }
}
