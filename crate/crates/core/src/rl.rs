//! Episodic fine-tuning: Bernoulli per-sentence rollouts, Monte-Carlo
//! returns with optional batch whitening, PPO clipped-surrogate updates
//! against the frozen supervised policy, and a single-pass REINFORCE
//! variant for the no-PPO ablation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Summary};
use crate::embeddings::EmbeddingProvider;
use crate::hashing;
use crate::keywords::KeywordSet;
use crate::policy::{clamp_prob, encode_sentence, Adam, PolicyParams, StateVector};
use crate::reward::{
    doc_keywords, r_unified_with_doc_keywords, step_rewards, RewardConfig, RewardProviders,
};
use crate::{Error, Result};

/// One episode over a document.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub doc_id: String,
    pub states: Vec<StateVector>,
    pub actions: Vec<bool>,
    /// Probability of the taken action under the collecting policy, clamped.
    pub p_rl: Vec<f64>,
    /// Probability of the taken action under the frozen supervised policy.
    pub p_sl: Vec<f64>,
    pub rewards: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// The summary implied by the sampled actions.
    pub fn summary(&self, doc: &Document) -> Summary {
        let selected = self
            .actions
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect();
        Summary::from_selected(doc, selected)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageMode {
    WhitenedReturns,
    RawReturns,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    Reinforce,
}

/// Fine-tuning settings. The discount and clip values are standard PPO
/// choices; everything is surfaced here rather than hard-coded.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub epochs_per_batch: usize,
    pub rollouts_per_update: usize,
    pub discount: f64,
    pub advantage_mode: AdvantageMode,
    pub learning_rate: f64,
    pub max_updates: usize,
    pub seed: u64,
    /// Mean sampled KL (collection policy vs current) above which the
    /// remaining epochs of a batch are skipped.
    pub kl_early_stop: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            epochs_per_batch: 4,
            rollouts_per_update: 16,
            discount: 1.0,
            advantage_mode: AdvantageMode::WhitenedReturns,
            learning_rate: 1e-5,
            max_updates: 50,
            seed: 0,
            kl_early_stop: 0.05,
        }
    }
}

/// Sample one episode: walk the sentences in order, sample include/exclude
/// from the RL policy, and record both policies' probabilities of the taken
/// action on the same state (including the selected-so-far feature).
pub fn rollout(
    params_rl: &PolicyParams,
    params_sl: &PolicyParams,
    doc: &Document,
    provider: &EmbeddingProvider,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let n = doc.len();
    let mut traj = Trajectory {
        doc_id: doc.id.clone(),
        states: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        p_rl: Vec::with_capacity(n),
        p_sl: Vec::with_capacity(n),
        rewards: Vec::new(),
        returns: Vec::new(),
        advantages: Vec::new(),
    };
    let mut selected = 0usize;
    for i in 0..n {
        let state = encode_sentence(doc, i, selected, provider);
        let p_select_rl = params_rl.score(&state)?;
        let p_select_sl = params_sl.score(&state)?;
        let action = rng.gen::<f64>() < p_select_rl;
        if action {
            selected += 1;
        }
        let (taken_rl, taken_sl) = if action {
            (p_select_rl, p_select_sl)
        } else {
            (1.0 - p_select_rl, 1.0 - p_select_sl)
        };
        traj.states.push(state);
        traj.actions.push(action);
        traj.p_rl.push(clamp_prob(taken_rl));
        traj.p_sl.push(clamp_prob(taken_sl));
    }
    Ok(traj)
}

/// Discounted reward-to-go returns; advantages start as a copy of the
/// returns (whitening happens across the update batch).
pub fn compute_returns_and_advantages(traj: &mut Trajectory, cfg: &PpoConfig) {
    let n = traj.rewards.len();
    let mut returns = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc = traj.rewards[i] + cfg.discount * acc;
        returns[i] = acc;
    }
    traj.advantages = returns.clone();
    traj.returns = returns;
}

/// Whiten advantages across the whole batch: subtract the mean, divide by
/// the standard deviation floored at 1e-6 (so all-zero batches stay zero).
pub fn whiten_advantages(batch: &mut [Trajectory]) {
    let count: usize = batch.iter().map(|t| t.advantages.len()).sum();
    if count == 0 {
        return;
    }
    let mean: f64 = batch
        .iter()
        .flat_map(|t| t.advantages.iter())
        .sum::<f64>()
        / count as f64;
    let var: f64 = batch
        .iter()
        .flat_map(|t| t.advantages.iter())
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / count as f64;
    let std = var.sqrt().max(1e-6);
    for traj in batch {
        for a in &mut traj.advantages {
            *a = (*a - mean) / std;
        }
    }
}

/// Per-update optimizer statistics (from the last epoch run).
#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateStats {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Mean of log(p_old / p_new) over batch steps: a sampled KL estimate
    /// between the collection policy and the updated policy.
    pub mean_sampled_kl: f64,
    pub loss: f64,
    pub epochs_run: usize,
}

/// Clipped-surrogate loss and its analytic gradient over every step of the
/// batch: `loss = -mean(min(r*A, clip(r, 1-eps, 1+eps)*A))` with the ratio
/// taken against the collection-time probabilities. The returned stats
/// describe this evaluation point.
pub fn ppo_loss_and_grad(
    params: &PolicyParams,
    batch: &[Trajectory],
    clip_epsilon: f64,
) -> Result<(f64, Vec<f64>, UpdateStats)> {
    let mut objective = 0.0;
    let mut grad = vec![0.0; params.num_params()];
    let mut ratio_sum = 0.0;
    let mut clipped = 0usize;
    let mut kl_sum = 0.0;
    let mut count = 0usize;
    for traj in batch {
        for si in 0..traj.len() {
            let advantage = traj.advantages[si];
            let p_old = traj.p_rl[si];
            let (p_select, gz) = params.score_with_grad(&traj.states[si])?;
            let action = traj.actions[si];
            let p_new_raw = if action { p_select } else { 1.0 - p_select };
            let p_new = clamp_prob(p_new_raw);
            let ratio = p_new / p_old;
            let clipped_ratio = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
            let surr_unclipped = ratio * advantage;
            let surr_clipped = clipped_ratio * advantage;
            if ratio < 1.0 - clip_epsilon || ratio > 1.0 + clip_epsilon {
                clipped += 1;
            }
            ratio_sum += ratio;
            kl_sum += p_old.ln() - p_new.ln();
            if surr_unclipped <= surr_clipped {
                objective += surr_unclipped;
                // d ratio / d theta, zero where the clamp saturates
                if p_new_raw > crate::policy::PROB_CLAMP
                    && p_new_raw < 1.0 - crate::policy::PROB_CLAMP
                {
                    let sign = if action { 1.0 } else { -1.0 };
                    let dp = sign * p_select * (1.0 - p_select);
                    let coeff = advantage * dp / p_old;
                    for (g, gi) in grad.iter_mut().zip(&gz) {
                        *g += coeff * gi;
                    }
                }
            } else {
                objective += surr_clipped;
                // the clipped branch is constant in theta
            }
            count += 1;
        }
    }
    if count == 0 {
        return Ok((0.0, grad, UpdateStats::default()));
    }
    let n = count as f64;
    let loss = -objective / n;
    for g in &mut grad {
        *g = -*g / n;
    }
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "ppo loss on batch starting at doc {}",
            batch[0].doc_id
        )));
    }
    let stats = UpdateStats {
        mean_ratio: ratio_sum / n,
        clip_fraction: clipped as f64 / n,
        mean_sampled_kl: kl_sum / n,
        loss,
        epochs_run: 0,
    };
    Ok((loss, grad, stats))
}

/// PPO update over a batch: up to `epochs_per_batch` full-batch Adam steps,
/// stopping early when the sampled KL to the collection policy exceeds
/// `kl_early_stop`.
pub fn ppo_update(
    params: &PolicyParams,
    batch: &[Trajectory],
    cfg: &PpoConfig,
    opt: &mut Adam,
) -> Result<(PolicyParams, UpdateStats)> {
    let mut new_params = params.clone();
    let mut flat = new_params.flat();
    let mut stats = UpdateStats::default();
    for epoch in 0..cfg.epochs_per_batch {
        let (_, grad, epoch_stats) = ppo_loss_and_grad(&new_params, batch, cfg.clip_epsilon)?;
        stats = UpdateStats {
            epochs_run: epoch + 1,
            ..epoch_stats
        };
        // the KL is measured at the current params, before this epoch's step
        if epoch > 0 && stats.mean_sampled_kl > cfg.kl_early_stop {
            break;
        }
        opt.step(&mut flat, &grad);
        new_params.set_flat(&flat);
    }
    Ok((new_params, stats))
}

/// REINFORCE loss and gradient: `loss = -mean(G_i * log p(y_i))` over all
/// batch steps.
pub fn reinforce_loss_and_grad(
    params: &PolicyParams,
    batch: &[Trajectory],
) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.num_params()];
    let mut count = 0usize;
    for traj in batch {
        for si in 0..traj.len() {
            let g_return = traj.returns[si];
            let (p_select, gz) = params.score_with_grad(&traj.states[si])?;
            let action = traj.actions[si];
            let p_raw = if action { p_select } else { 1.0 - p_select };
            let p = clamp_prob(p_raw);
            loss -= g_return * p.ln();
            if p_raw > crate::policy::PROB_CLAMP && p_raw < 1.0 - crate::policy::PROB_CLAMP {
                let sign = if action { 1.0 } else { -1.0 };
                let dlogp = sign * p_select * (1.0 - p_select) / p;
                for (g, gi) in grad.iter_mut().zip(&gz) {
                    *g -= g_return * dlogp * gi;
                }
            }
            count += 1;
        }
    }
    if count == 0 {
        return Ok((0.0, grad));
    }
    let n = count as f64;
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "reinforce loss on batch starting at doc {}",
            batch[0].doc_id
        )));
    }
    Ok((loss, grad))
}

/// Single-pass REINFORCE update: one Adam step, no clipping.
pub fn reinforce_update(
    params: &PolicyParams,
    batch: &[Trajectory],
    _cfg: &PpoConfig,
    opt: &mut Adam,
) -> Result<(PolicyParams, UpdateStats)> {
    let mut new_params = params.clone();
    let mut flat = new_params.flat();
    let (loss, grad) = reinforce_loss_and_grad(&new_params, batch)?;
    opt.step(&mut flat, &grad);
    new_params.set_flat(&flat);
    Ok((
        new_params,
        UpdateStats {
            mean_ratio: 1.0,
            clip_fraction: 0.0,
            mean_sampled_kl: 0.0,
            loss,
            epochs_run: 1,
        },
    ))
}

/// One training-log record per update (JSON-lines in the file format).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UpdateLog {
    pub update: usize,
    pub mean_r_unified: f64,
    pub mean_r_rouge: f64,
    pub mean_r_kw: f64,
    pub mean_r_seq: f64,
    /// Mean log(p_RL/p_SL) over the update's steps at collection time.
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub wall_ms: u64,
}

pub struct FinetuneOutcome {
    pub params: PolicyParams,
    pub log: Vec<UpdateLog>,
}

/// RL fine-tuning loop: copy the supervised policy, then repeatedly sample
/// a batch of documents (shuffled corpus passes, per-episode seeded RNGs),
/// roll out, score with the combined reward, and update with the chosen
/// algorithm. The supervised policy stays frozen as the KL anchor.
pub fn finetune(
    params_sl: &PolicyParams,
    docs: &[Document],
    reward_cfg: &RewardConfig,
    cfg: &PpoConfig,
    algorithm: Algorithm,
    policy_provider: &EmbeddingProvider,
    reward_providers: RewardProviders<'_>,
) -> Result<FinetuneOutcome> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut params_rl = params_sl.clone();
    let mut adam = Adam::new(params_rl.num_params(), cfg.learning_rate);
    let mut order_rng = ChaCha8Rng::seed_from_u64(hashing::stream_seed(cfg.seed, u64::MAX));
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut order_rng);
    let mut cursor = 0usize;
    let mut episode = 0u64;
    let mut kd_cache: Vec<Option<KeywordSet>> = vec![None; docs.len()];
    let mut log = Vec::with_capacity(cfg.max_updates);

    for update in 0..cfg.max_updates {
        let started = Instant::now();
        let mut batch = Vec::with_capacity(cfg.rollouts_per_update);
        let mut sums = (0.0, 0.0, 0.0, 0.0); // unified, rouge, kw, seq
        let mut kl_sum = 0.0;
        let mut kl_steps = 0usize;
        for _ in 0..cfg.rollouts_per_update {
            if cursor == order.len() {
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            let doc_idx = order[cursor];
            cursor += 1;
            let doc = &docs[doc_idx];
            // per-episode generator: parallel collection could not change results
            let mut ep_rng = ChaCha8Rng::seed_from_u64(hashing::stream_seed(cfg.seed, episode));
            episode += 1;
            let mut traj = rollout(&params_rl, params_sl, doc, policy_provider, &mut ep_rng)?;
            if kd_cache[doc_idx].is_none() {
                kd_cache[doc_idx] = Some(doc_keywords(doc, reward_cfg, reward_providers)?);
            }
            let kd = kd_cache[doc_idx].as_ref().expect("cached");
            let summary = traj.summary(doc);
            let mut breakdown =
                r_unified_with_doc_keywords(&summary, doc, kd, reward_cfg, reward_providers)?;
            traj.rewards = step_rewards(&traj, &mut breakdown, reward_cfg)?;
            compute_returns_and_advantages(&mut traj, cfg);
            sums.0 += breakdown.r_unified;
            sums.1 += breakdown.r_rouge;
            sums.2 += breakdown.r_kw;
            sums.3 += breakdown.r_seq;
            kl_sum += breakdown.kl_per_step.iter().sum::<f64>();
            kl_steps += breakdown.kl_per_step.len();
            batch.push(traj);
        }
        if cfg.advantage_mode == AdvantageMode::WhitenedReturns {
            whiten_advantages(&mut batch);
        }
        let stats = match algorithm {
            Algorithm::Ppo => {
                let (next, stats) = ppo_update(&params_rl, &batch, cfg, &mut adam)?;
                params_rl = next;
                stats
            }
            Algorithm::Reinforce => {
                let (next, stats) = reinforce_update(&params_rl, &batch, cfg, &mut adam)?;
                params_rl = next;
                stats
            }
        };
        let nb = cfg.rollouts_per_update as f64;
        log.push(UpdateLog {
            update,
            mean_r_unified: sums.0 / nb,
            mean_r_rouge: sums.1 / nb,
            mean_r_kw: sums.2 / nb,
            mean_r_seq: sums.3 / nb,
            mean_kl: if kl_steps > 0 {
                kl_sum / kl_steps as f64
            } else {
                0.0
            },
            clip_fraction: stats.clip_fraction,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(FinetuneOutcome {
        params: params_rl,
        log,
    })
}
