//! PPO with the clipped surrogate objective, a softmax actor and a separate
//! state-value critic, both plain MLPs trained from hand-derived gradients.
//!
//! Experience is cut into segments of `trajectory_length` steps; advantages
//! come from generalised advantage estimation within each segment, with the
//! critic bootstrapping at truncations and segment ends.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::agent::{Agent, LearnStats};
use super::mlp::Mlp;
use super::optim::{clip_grad_norm, Optimizer, OptimizerKind};
use super::params::{ActorCritic, LearnerParams};
use super::qvalue::layer_sizes;
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{ActionId, Experience, StateVec};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    /// Steps per segment.
    pub trajectory_length: usize,
    /// Segments collected per update.
    pub batch_size: usize,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub hidden: Vec<usize>,
    /// Global gradient-norm cap per network; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            trajectory_length: 40,
            batch_size: 32,
            clip_epsilon: 0.2,
            epochs: 3,
            minibatches: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            gae_lambda: 0.95,
            gamma: 0.99,
            learning_rate: 0.0007,
            optimizer: OptimizerKind::Sgd,
            hidden: vec![64, 64],
            max_grad_norm: Some(0.5),
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectory_length == 0 || self.batch_size == 0 {
            return Err(Error::Invalid("trajectory_length and batch_size must be at least 1".into()));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::Invalid("clip_epsilon must lie in (0, 1)".into()));
        }
        if self.epochs == 0 || self.minibatches == 0 {
            return Err(Error::Invalid("epochs and minibatches must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid("learning_rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Invalid("gamma and gae_lambda must lie in [0, 1]".into()));
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::Invalid("loss coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

/// One training sample for the surrogate and critic losses.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub input: Vec<f64>,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = math::max(logits);
    let lse = m + math::ln(logits.iter().map(|l| math::exp(l - m)).sum::<f64>());
    logits.iter().map(|l| l - lse).collect()
}

/// Action probabilities of the actor at `input`.
pub fn policy_probs(actor: &Mlp, input: &[f64]) -> Result<Vec<f64>> {
    Ok(math::softmax(&actor.forward(input)?))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1 - eps, 1 + eps]`.
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// `-mean(min(r A, clip(r, 1 - eps, 1 + eps) A)) - c_H * mean(H)` with
/// `r = pi(a|s) / pi_old(a|s)`, and its gradient. When the clipped branch is
/// the minimum the sample contributes no surrogate gradient.
pub fn actor_loss(actor: &Mlp, samples: &[&PpoSample], clip_epsilon: f64, entropy_coef: f64) -> Result<ActorLoss> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = samples.len() as f64;
    let mut out = ActorLoss {
        grads: vec![0.0; actor.param_count()],
        ..Default::default()
    };
    let (low, high) = (1.0 - clip_epsilon, 1.0 + clip_epsilon);
    let mut upstream = vec![0.0; actor.output_dim()];
    for s in samples {
        let cache = actor.forward_cached(&s.input)?;
        let logp = log_softmax(cache.output());
        let a = ActionId::checked(s.action, logp.len())?.0;
        let p: Vec<f64> = logp.iter().map(|l| math::exp(*l)).collect();
        let ratio = math::exp(logp[a] - s.old_log_prob);
        let surrogate = ratio * s.advantage;
        let clipped = ratio.clamp(low, high) * s.advantage;
        let entropy = -p.iter().zip(&logp).map(|(pi, li)| pi * li).sum::<f64>();
        out.loss += (-surrogate.min(clipped) - entropy_coef * entropy) / n;
        out.entropy += entropy / n;
        out.approx_kl += (s.old_log_prob - logp[a]) / n;
        if ratio < low || ratio > high {
            out.clip_fraction += 1.0 / n;
        }
        let surrogate_active = surrogate <= clipped;
        for (j, u) in upstream.iter_mut().enumerate() {
            let onehot = if j == a { 1.0 } else { 0.0 };
            let mut g = entropy_coef * p[j] * (logp[j] + entropy);
            if surrogate_active {
                g -= s.advantage * ratio * (onehot - p[j]);
            }
            *u = g / n;
        }
        actor.backward(&cache, &upstream, &mut out.grads)?;
    }
    Ok(out)
}

/// `value_coef * mean(0.5 * (V(s) - target)^2)` and its gradient.
pub fn critic_loss(critic: &Mlp, samples: &[&PpoSample], value_coef: f64) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = samples.len() as f64;
    let mut grads = vec![0.0; critic.param_count()];
    let mut loss = 0.0;
    for s in samples {
        let cache = critic.forward_cached(&s.input)?;
        let err = cache.output()[0] - s.value_target;
        loss += value_coef * 0.5 * err * err / n;
        critic.backward(&cache, &[value_coef * err / n], &mut grads)?;
    }
    Ok((loss, grads))
}

/// Generalised advantage estimates for one segment. `values[t] = V(s_t)` and
/// `next_values[t] = V(s_{t+1})`; terminal steps do not bootstrap and no
/// estimate crosses an episode boundary.
pub fn segment_advantages(
    segment: &[Experience],
    values: &[f64],
    next_values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let mut adv = vec![0.0; segment.len()];
    let mut running = 0.0;
    for t in (0..segment.len()).rev() {
        let e = &segment[t];
        let bootstrap = if e.terminal { 0.0 } else { gamma * next_values[t] };
        let delta = e.reward + bootstrap - values[t];
        running = if e.terminal || e.truncated {
            delta
        } else {
            delta + gamma * lambda * running
        };
        adv[t] = running;
    }
    adv
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub updates: usize,
}

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(alloc::format!("non-finite {what}")));
    }
    Ok(())
}

/// Builds samples (old log-probabilities, advantages, value targets) from
/// `segments` under the current parameters.
pub fn prepare_samples(ac: &ActorCritic, segments: &[&[Experience]], config: &PpoConfig) -> Result<Vec<PpoSample>> {
    let mut samples = Vec::new();
    for segment in segments {
        let mut values = Vec::with_capacity(segment.len());
        let mut next_values = Vec::with_capacity(segment.len());
        let mut inputs = Vec::with_capacity(segment.len());
        for e in segment.iter() {
            let input = e.state.with_goal(e.goal.as_ref());
            values.push(ac.critic.forward(&input)?[0]);
            next_values.push(ac.critic.forward(&e.next_state.with_goal(e.goal.as_ref()))?[0]);
            inputs.push(input);
        }
        let adv = segment_advantages(segment, &values, &next_values, config.gamma, config.gae_lambda);
        for (((e, input), a), v) in segment.iter().zip(inputs).zip(adv).zip(&values) {
            let logp = log_softmax(&ac.actor.forward(&input)?);
            samples.push(PpoSample {
                old_log_prob: logp[ActionId::checked(e.action.0, logp.len())?.0],
                input,
                action: e.action.0,
                advantage: a,
                value_target: a + v,
            });
        }
    }
    let adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
    check_finite("advantage", &adv)?;
    if config.normalize_advantages && samples.len() > 1 {
        let mean = math::mean(&adv).unwrap_or(0.0);
        let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / adv.len() as f64;
        let std = math::sqrt(var);
        for s in &mut samples {
            s.advantage = (s.advantage - mean) / (std + 1e-8);
        }
    }
    Ok(samples)
}

/// Clipped-surrogate policy update plus squared-error critic update over
/// `segments`, for `epochs` passes of shuffled minibatches.
pub fn ppo_update(
    ac: &mut ActorCritic,
    actor_opt: &mut Optimizer,
    critic_opt: &mut Optimizer,
    segments: &[&[Experience]],
    config: &PpoConfig,
    rng: &mut SeededRng,
) -> Result<PpoDiagnostics> {
    let samples = prepare_samples(ac, segments, config)?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut diag = PpoDiagnostics::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let minibatches = config.minibatches.min(samples.len());
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for m in 0..minibatches {
            let lo = m * samples.len() / minibatches;
            let hi = (m + 1) * samples.len() / minibatches;
            let batch: Vec<&PpoSample> = order[lo..hi].iter().map(|i| &samples[*i]).collect();

            let mut actor = actor_loss(&ac.actor, &batch, config.clip_epsilon, config.entropy_coef)?;
            check_finite("policy gradient", &actor.grads)?;
            let (value_loss, mut critic_grads) = critic_loss(&ac.critic, &batch, config.value_coef)?;
            check_finite("value gradient", &critic_grads)?;
            if let Some(max_norm) = config.max_grad_norm {
                clip_grad_norm(&mut actor.grads, max_norm);
                clip_grad_norm(&mut critic_grads, max_norm);
            }
            actor_opt.step(ac.actor.params_mut(), &actor.grads)?;
            critic_opt.step(ac.critic.params_mut(), &critic_grads)?;

            diag.policy_loss = actor.loss;
            diag.value_loss = value_loss;
            diag.entropy = actor.entropy;
            diag.clip_fraction = actor.clip_fraction;
            diag.approx_kl = actor.approx_kl;
            diag.updates += 1;
        }
    }
    Ok(diag)
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    ac: ActorCritic,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    config: PpoConfig,
    action_count: usize,
    last: Option<PpoDiagnostics>,
}

impl PpoAgent {
    pub fn new(
        state_dim: usize,
        goal_dim: usize,
        action_count: usize,
        config: PpoConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        config.validate()?;
        let ac = Self::fresh(state_dim, goal_dim, action_count, &config, rng)?;
        Ok(PpoAgent {
            actor_opt: Optimizer::new(config.optimizer, config.learning_rate, ac.actor.param_count()),
            critic_opt: Optimizer::new(config.optimizer, config.learning_rate, ac.critic.param_count()),
            ac,
            config,
            action_count,
            last: None,
        })
    }

    fn fresh(
        state_dim: usize,
        goal_dim: usize,
        action_count: usize,
        config: &PpoConfig,
        rng: &mut SeededRng,
    ) -> Result<ActorCritic> {
        let input = state_dim + goal_dim;
        let mut actor = Mlp::new(&layer_sizes(input, &config.hidden, action_count), rng)?;
        // near-uniform initial policy
        actor.scale_output_layer(0.01);
        let critic = Mlp::new(&layer_sizes(input, &config.hidden, 1), rng)?;
        Ok(ActorCritic {
            actor,
            critic,
            state_dim,
            goal_dim,
        })
    }

    pub fn actor_critic(&self) -> &ActorCritic {
        &self.ac
    }

    pub fn last_diagnostics(&self) -> Option<PpoDiagnostics> {
        self.last
    }

    fn input(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<Vec<f64>> {
        let found = goal.map_or(0, |g| g.len());
        if state.len() != self.ac.state_dim || found != self.ac.goal_dim {
            return Err(Error::DimensionMismatch {
                what: "policy input",
                expected: self.ac.state_dim + self.ac.goal_dim,
                found: state.len() + found,
            });
        }
        Ok(state.with_goal(goal))
    }

    pub fn probs(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<Vec<f64>> {
        policy_probs(&self.ac.actor, &self.input(state, goal)?)
    }
}

impl Agent for PpoAgent {
    fn act(&mut self, state: &StateVec, goal: Option<&StateVec>, rng: &mut SeededRng) -> Result<ActionId> {
        let probs = self.probs(state, goal)?;
        let u = rng.unit();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(ActionId(i));
            }
        }
        Ok(ActionId(probs.len() - 1))
    }

    fn greedy_action(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<ActionId> {
        Ok(ActionId(math::argmax(&self.ac.actor.forward(&self.input(state, goal)?)?)))
    }

    fn collect_size(&self) -> usize {
        self.config.trajectory_length * self.config.batch_size
    }

    fn learn(&mut self, experiences: &[Experience], rng: &mut SeededRng) -> Result<LearnStats> {
        if experiences.is_empty() {
            return Ok(LearnStats::default());
        }
        let segments: Vec<&[Experience]> = experiences.chunks(self.config.trajectory_length).collect();
        let diag = ppo_update(&mut self.ac, &mut self.actor_opt, &mut self.critic_opt, &segments, &self.config, rng)?;
        self.last = Some(diag);
        Ok(LearnStats {
            updates: diag.updates,
            loss: Some(diag.policy_loss + diag.value_loss),
        })
    }

    fn reset_parameters(&mut self, rng: &mut SeededRng) -> Result<()> {
        self.ac = Self::fresh(self.ac.state_dim, self.ac.goal_dim, self.action_count, &self.config, rng)?;
        self.actor_opt = Optimizer::new(self.config.optimizer, self.config.learning_rate, self.ac.actor.param_count());
        self.critic_opt = Optimizer::new(self.config.optimizer, self.config.learning_rate, self.ac.critic.param_count());
        Ok(())
    }

    fn params(&self) -> LearnerParams {
        LearnerParams::ActorCritic(self.ac.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> StateVec {
        StateVec::new(v.to_vec()).unwrap()
    }

    fn step(reward: f64, terminal: bool, truncated: bool) -> Experience {
        Experience {
            state: sv(&[0.0]),
            action: ActionId(0),
            reward,
            next_state: sv(&[0.0]),
            terminal,
            truncated,
            goal: None,
        }
    }

    #[test]
    fn advantages_with_lambda_one_are_returns_minus_values() {
        // zero critic, gamma 0.5: A_t = discounted reward-to-go
        let seg = [step(1.0, false, false), step(2.0, false, false), step(4.0, true, false)];
        let adv = segment_advantages(&seg, &[0.0; 3], &[0.0; 3], 0.5, 1.0);
        assert_eq!(adv, vec![1.0 + 0.5 * 2.0 + 0.25 * 4.0, 2.0 + 0.5 * 4.0, 4.0]);
    }

    #[test]
    fn advantages_stop_at_episode_boundaries() {
        let seg = [step(1.0, true, false), step(3.0, false, true), step(5.0, false, false)];
        let adv = segment_advantages(&seg, &[0.0; 3], &[10.0; 3], 0.9, 0.95);
        assert_eq!(adv[0], 1.0);
        assert_eq!(adv[1], 3.0 + 9.0);
        assert_eq!(adv[2], 5.0 + 9.0);
    }

    #[test]
    fn zero_advantages_leave_actor_unchanged() {
        let mut rng = SeededRng::new(1);
        let config = PpoConfig {
            entropy_coef: 0.0,
            normalize_advantages: false,
            optimizer: OptimizerKind::Adam,
            ..PpoConfig::default()
        };
        let mut agent = PpoAgent::new(1, 0, 3, config.clone(), &mut rng).unwrap();
        let before = agent.ac.actor.clone();
        let samples: Vec<PpoSample> = (0..8)
            .map(|i| PpoSample {
                input: vec![i as f64 / 8.0],
                action: i % 3,
                old_log_prob: math::ln(1.0 / 3.0),
                advantage: 0.0,
                value_target: 0.0,
            })
            .collect();
        let refs: Vec<&PpoSample> = samples.iter().collect();
        let loss = actor_loss(&agent.ac.actor, &refs, 0.2, 0.0).unwrap();
        assert!(loss.grads.iter().all(|g| *g == 0.0));
        agent.actor_opt.step(agent.ac.actor.params_mut(), &loss.grads).unwrap();
        assert_eq!(agent.ac.actor, before);
    }

    #[test]
    fn policy_is_a_distribution() {
        let mut rng = SeededRng::new(2);
        let agent = PpoAgent::new(3, 0, 8, PpoConfig::default(), &mut rng).unwrap();
        let p = agent.probs(&sv(&[0.3, -2.0, 5.0]), None).unwrap();
        assert!(p.iter().all(|x| *x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        assert!(PpoConfig { clip_epsilon: 1.0, ..PpoConfig::default() }.validate().is_err());
        assert!(PpoConfig { trajectory_length: 0, ..PpoConfig::default() }.validate().is_err());
    }

    #[test]
    fn outside_clip_range_on_the_pessimistic_side_has_no_surrogate_gradient() {
        let mut rng = SeededRng::new(3);
        let actor = Mlp::new(&[1, 4, 2], &mut rng).unwrap();
        let logp = log_softmax(&actor.forward(&[0.5]).unwrap());
        // ratio = 2 with a positive advantage: the clipped term is the minimum
        let s = PpoSample {
            input: vec![0.5],
            action: 0,
            old_log_prob: logp[0] - math::ln(2.0),
            advantage: 1.0,
            value_target: 0.0,
        };
        let loss = actor_loss(&actor, &[&s], 0.2, 0.0).unwrap();
        assert!(loss.grads.iter().all(|g| *g == 0.0));
        assert_eq!(loss.clip_fraction, 1.0);
    }
}
