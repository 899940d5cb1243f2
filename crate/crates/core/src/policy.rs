//! The sentence selector: state encoding, sigmoid scoring with linear or
//! one-hidden-layer MLP heads, hand-derived gradients, Adam, supervised
//! pretraining, top-m inference, and versioned JSON checkpoints.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::embeddings::{embed_phrase, EmbeddingProvider};
use crate::{Error, Result};

/// Features appended to the sentence embedding: relative position,
/// relative length, fraction selected so far.
pub const STATE_EXTRA_FEATURES: usize = 3;

/// Default MLP hidden width.
pub const DEFAULT_HIDDEN: usize = 32;

/// A sentence state: mean word vector of the sentence followed by
/// `[(i+1)/n, |s_i|/max_j |s_j|, selected_so_far/n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    components: Vec<f64>,
}

impl StateVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }
}

/// Encode sentence `i` of `doc`. `selected_so_far` is nonzero only during RL
/// rollouts; supervised scoring and inference pass 0.
pub fn encode_sentence(
    doc: &Document,
    i: usize,
    selected_so_far: usize,
    provider: &EmbeddingProvider,
) -> StateVector {
    let n = doc.len();
    debug_assert!(i < n);
    let emb = embed_phrase(&doc.sentences[i].tokens, provider);
    let max_len = doc
        .sentences
        .iter()
        .map(|s| s.tokens.len())
        .max()
        .unwrap_or(1) as f64;
    let mut components = emb.components().to_vec();
    components.push((i + 1) as f64 / n as f64);
    components.push(doc.sentences[i].tokens.len() as f64 / max_len);
    components.push(selected_so_far as f64 / n as f64);
    StateVector::new(components)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Linear,
    Mlp,
}

/// Selector head weights. Flat layout (for the optimizer and gradient
/// checks): linear `[w, b]`; mlp `[w1 row-major, b1, w2, b2]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    Linear {
        w: Vec<f64>,
        b: f64,
    },
    Mlp {
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
        hidden: usize,
    },
}

impl Head {
    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Linear { .. } => HeadKind::Linear,
            Head::Mlp { .. } => HeadKind::Mlp,
        }
    }

    pub fn hidden(&self) -> Option<usize> {
        match self {
            Head::Linear { .. } => None,
            Head::Mlp { hidden, .. } => Some(*hidden),
        }
    }

    fn num_params(&self) -> usize {
        match self {
            Head::Linear { w, .. } => w.len() + 1,
            Head::Mlp { w1, b1, w2, .. } => w1.len() + b1.len() + w2.len() + 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
}

/// Selector parameters plus the fingerprint of the encoder configuration
/// they were trained against.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub head: Head,
    pub state_dim: usize,
    pub encoder_fingerprint: String,
    pub train_meta: TrainMeta,
}

impl PolicyParams {
    /// Seed-derived uniform init in [-0.05, 0.05].
    pub fn init(
        kind: HeadKind,
        state_dim: usize,
        hidden: usize,
        seed: u64,
        encoder_fingerprint: String,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen::<f64>() * 0.1 - 0.05).collect()
        };
        let head = match kind {
            HeadKind::Linear => Head::Linear {
                w: draw(state_dim),
                b: draw(1)[0],
            },
            HeadKind::Mlp => Head::Mlp {
                w1: draw(hidden * state_dim),
                b1: draw(hidden),
                w2: draw(hidden),
                b2: draw(1)[0],
                hidden,
            },
        };
        Self {
            head,
            state_dim,
            encoder_fingerprint,
            train_meta: TrainMeta { seed, epochs: 0 },
        }
    }

    /// All-zero weights (mostly for tests: every score is exactly 0.5).
    pub fn zeroed(kind: HeadKind, state_dim: usize, hidden: usize, fingerprint: String) -> Self {
        let head = match kind {
            HeadKind::Linear => Head::Linear {
                w: vec![0.0; state_dim],
                b: 0.0,
            },
            HeadKind::Mlp => Head::Mlp {
                w1: vec![0.0; hidden * state_dim],
                b1: vec![0.0; hidden],
                w2: vec![0.0; hidden],
                b2: 0.0,
                hidden,
            },
        };
        Self {
            head,
            state_dim,
            encoder_fingerprint: fingerprint,
            train_meta: TrainMeta::default(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.head.num_params()
    }

    /// Flatten weights in the documented layout.
    pub fn flat(&self) -> Vec<f64> {
        match &self.head {
            Head::Linear { w, b } => {
                let mut out = w.clone();
                out.push(*b);
                out
            }
            Head::Mlp { w1, b1, w2, b2, .. } => {
                let mut out = Vec::with_capacity(self.num_params());
                out.extend_from_slice(w1);
                out.extend_from_slice(b1);
                out.extend_from_slice(w2);
                out.push(*b2);
                out
            }
        }
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        match &mut self.head {
            Head::Linear { w, b } => {
                let d = w.len();
                w.copy_from_slice(&flat[..d]);
                *b = flat[d];
            }
            Head::Mlp { w1, b1, w2, b2, .. } => {
                let (n1, n2, n3) = (w1.len(), b1.len(), w2.len());
                w1.copy_from_slice(&flat[..n1]);
                b1.copy_from_slice(&flat[n1..n1 + n2]);
                w2.copy_from_slice(&flat[n1 + n2..n1 + n2 + n3]);
                *b2 = flat[n1 + n2 + n3];
            }
        }
    }

    fn check_dim(&self, state: &StateVector) -> Result<()> {
        if state.dim() != self.state_dim {
            return Err(Error::DimMismatch {
                left: self.state_dim,
                right: state.dim(),
            });
        }
        Ok(())
    }

    /// Pre-sigmoid score plus the MLP hidden activations when applicable.
    fn raw_score(&self, state: &StateVector) -> Result<(f64, Option<Vec<f64>>)> {
        self.check_dim(state)?;
        let x = state.components();
        match &self.head {
            Head::Linear { w, b } => {
                let z: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
                Ok((z, None))
            }
            Head::Mlp {
                w1,
                b1,
                w2,
                b2,
                hidden,
            } => {
                let d = self.state_dim;
                let mut h = Vec::with_capacity(*hidden);
                for k in 0..*hidden {
                    let a: f64 =
                        w1[k * d..(k + 1) * d].iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
                            + b1[k];
                    h.push(a.tanh());
                }
                let z: f64 = w2.iter().zip(&h).map(|(w, hi)| w * hi).sum::<f64>() + b2;
                Ok((z, Some(h)))
            }
        }
    }

    /// Selection probability for one state.
    pub fn score(&self, state: &StateVector) -> Result<f64> {
        Ok(sigmoid(self.raw_score(state)?.0))
    }

    /// Probability plus the gradient of the pre-sigmoid score with respect
    /// to the flat parameter vector.
    pub fn score_with_grad(&self, state: &StateVector) -> Result<(f64, Vec<f64>)> {
        let (z, cache) = self.raw_score(state)?;
        let x = state.components();
        let grad = match &self.head {
            Head::Linear { .. } => {
                let mut g = x.to_vec();
                g.push(1.0);
                g
            }
            Head::Mlp { w2, hidden, .. } => {
                let h = cache.expect("mlp cache");
                let d = self.state_dim;
                let mut g = vec![0.0; self.num_params()];
                for k in 0..*hidden {
                    let da = w2[k] * (1.0 - h[k] * h[k]);
                    for (col, xi) in x.iter().enumerate() {
                        g[k * d + col] = da * xi;
                    }
                    g[hidden * d + k] = da; // b1
                    g[hidden * d + hidden + k] = h[k]; // w2
                }
                g[hidden * d + 2 * hidden] = 1.0; // b2
                g
            }
        };
        Ok((sigmoid(z), grad))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Score every sentence with `selected_so_far = 0` (supervised/inference
/// view: sentences are classified independently).
pub fn forward_doc(
    params: &PolicyParams,
    doc: &Document,
    provider: &EmbeddingProvider,
) -> Result<Vec<f64>> {
    (0..doc.len())
        .map(|i| params.score(&encode_sentence(doc, i, 0, provider)))
        .collect()
}

/// Indices of the `m` largest probabilities in document order; ties broken
/// toward the lower index. Returns all indices when `n <= m`.
pub fn select_top_m(probs: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = order.into_iter().take(m).collect();
    selected.sort_unstable();
    selected
}

/// Probabilities are clamped to this range inside logs and ratios.
pub const PROB_CLAMP: f64 = 1e-8;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy and its analytic gradient over a batch of
/// (state, label) pairs. Probabilities are clamped inside the log only; the
/// gradient uses the exact `p - y` form, which matches the unclamped loss
/// away from saturation.
pub fn supervised_loss_and_grad(
    params: &PolicyParams,
    batch: &[(StateVector, bool)],
) -> Result<(f64, Vec<f64>)> {
    assert!(!batch.is_empty(), "empty batch");
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.num_params()];
    for (state, label) in batch {
        let (p, gz) = params.score_with_grad(state)?;
        let pc = clamp_prob(p);
        let y = if *label { 1.0 } else { 0.0 };
        loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        let dz = p - y;
        for (g, gi) in grad.iter_mut().zip(&gz) {
            *g += dz * gi;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    loss *= inv;
    for g in &mut grad {
        *g *= inv;
    }
    Ok((loss, grad))
}

/// Adam over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Supervised training settings (Adam with the usual moment defaults).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 32,
            epochs: 5,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

/// Cross-entropy pretraining over shuffled mini-batches. Deterministic given
/// the config seed; returns the trained parameters and the per-epoch mean
/// loss curve.
pub fn pretrain(
    params: &PolicyParams,
    docs: &[Document],
    labels: &[crate::corpus::LabelVector],
    provider: &EmbeddingProvider,
    cfg: &TrainConfig,
) -> Result<(PolicyParams, Vec<f64>)> {
    if docs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            context: "pretrain labels",
            left: docs.len(),
            right: labels.len(),
        });
    }
    let mut examples: Vec<(StateVector, bool)> = Vec::new();
    for (doc, label) in docs.iter().zip(labels) {
        if label.labels.len() != doc.len() {
            return Err(Error::LengthMismatch {
                context: "label vector",
                left: doc.len(),
                right: label.labels.len(),
            });
        }
        for i in 0..doc.len() {
            examples.push((encode_sentence(doc, i, 0, provider), label.labels[i]));
        }
    }
    let mut trained = params.clone();
    let mut adam = Adam::new(trained.num_params(), cfg.learning_rate);
    adam.beta1 = cfg.adam_beta1;
    adam.beta2 = cfg.adam_beta2;
    adam.epsilon = cfg.adam_epsilon;
    let mut flat = trained.flat();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let batch_size = cfg.batch_size.max(1);
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(StateVector, bool)> =
                chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, grad) = supervised_loss_and_grad(&trained, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("pretrain loss".into()));
            }
            adam.step(&mut flat, &grad);
            trained.set_flat(&flat);
            total += loss * batch.len() as f64;
        }
        epoch_loss.push(total / examples.len() as f64);
    }
    trained.train_meta = TrainMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
    };
    Ok((trained, epoch_loss))
}

/// Error unless the checkpoint was produced against this provider
/// configuration.
pub fn check_compat(params: &PolicyParams, provider: &EmbeddingProvider) -> Result<()> {
    let fp = provider.fingerprint();
    if params.encoder_fingerprint != fp {
        return Err(Error::FingerprintMismatch {
            checkpoint: params.encoder_fingerprint.clone(),
            provider: fp,
        });
    }
    Ok(())
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    head: HeadKind,
    state_dim: usize,
    hidden: Option<usize>,
    weights: BTreeMap<String, Vec<f64>>,
    encoder_fingerprint: String,
    train_meta: TrainMeta,
}

/// Serialize to the versioned JSON checkpoint format. Weight arrays are flat
/// and row-major; writes are plain `serde_json` output, so identical params
/// produce identical bytes.
pub fn checkpoint_to_json(params: &PolicyParams) -> String {
    let mut weights = BTreeMap::new();
    match &params.head {
        Head::Linear { w, b } => {
            weights.insert("w0".to_string(), w.clone());
            weights.insert("b0".to_string(), vec![*b]);
        }
        Head::Mlp { w1, b1, w2, b2, .. } => {
            weights.insert("w1".to_string(), w1.clone());
            weights.insert("b1".to_string(), b1.clone());
            weights.insert("w2".to_string(), w2.clone());
            weights.insert("b2".to_string(), vec![*b2]);
        }
    }
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        head: params.head.kind(),
        state_dim: params.state_dim,
        hidden: params.head.hidden(),
        weights,
        encoder_fingerprint: params.encoder_fingerprint.clone(),
        train_meta: params.train_meta,
    };
    serde_json::to_string_pretty(&file).expect("checkpoint serializes")
}

pub fn save_checkpoint(params: &PolicyParams, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_json(params)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_checkpoint(&text)
}

pub fn parse_checkpoint(text: &str) -> Result<PolicyParams> {
    let file: CheckpointFile =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    let get = |name: &str, want: usize| -> Result<Vec<f64>> {
        let arr = file
            .weights
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing weights[{name}]")))?;
        if arr.len() != want {
            return Err(Error::Checkpoint(format!(
                "weights[{name}] has {} entries, expected {want}",
                arr.len()
            )));
        }
        if !arr.iter().all(|x| x.is_finite()) {
            return Err(Error::Checkpoint(format!("weights[{name}] not finite")));
        }
        Ok(arr.clone())
    };
    let head = match file.head {
        HeadKind::Linear => Head::Linear {
            w: get("w0", file.state_dim)?,
            b: get("b0", 1)?[0],
        },
        HeadKind::Mlp => {
            let hidden = file
                .hidden
                .ok_or_else(|| Error::Checkpoint("mlp checkpoint missing hidden".into()))?;
            Head::Mlp {
                w1: get("w1", hidden * file.state_dim)?,
                b1: get("b1", hidden)?,
                w2: get("w2", hidden)?,
                b2: get("b2", 1)?[0],
                hidden,
            }
        }
    };
    Ok(PolicyParams {
        head,
        state_dim: file.state_dim,
        encoder_fingerprint: file.encoder_fingerprint,
        train_meta: file.train_meta,
    })
}
