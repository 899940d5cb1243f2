//! Acceptance suite: one test per shipping criterion, each printing a
//! `acceptance N: PASS` line with the measured numbers.
//!
//! Run with:
//!     cargo test -p lexsum-cli --test acceptance -- --nocapture
//!
//! Criteria 1-6 are exact-oracle and arithmetic checks; 7-9 train the full
//! pipeline on a pinned synthetic corpus; 10 drives the compiled binary
//! twice and compares outputs byte for byte.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lexsum_core::corpus::{generate_synthetic, oracle_labels, synthetic_synonym, SyntheticSpec};
use lexsum_core::embeddings::{cosine, EmbeddingProvider, OovPolicy, Vector};
use lexsum_core::keywords::{candidate_phrases, get_keywords, KeywordConfig};
use lexsum_core::metrics::{porter_stem, rouge_l, rouge_n, wmd, RougeConfig};
use lexsum_core::policy::{
    forward_doc, load_checkpoint, pretrain, save_checkpoint, select_top_m, supervised_loss_and_grad,
    HeadKind, PolicyParams, StateVector, TrainConfig, STATE_EXTRA_FEATURES,
};
use lexsum_core::reward::{step_rewards, unify, RewardBreakdown, RewardConfig, RewardProviders};
use lexsum_core::rl::{
    finetune, ppo_loss_and_grad, reinforce_loss_and_grad, Algorithm, PpoConfig, Trajectory,
};
use lexsum_core::{Document, Summary, TokenSeq};

fn token_seq<S: AsRef<str>>(ids: &[usize], vocab: &[S]) -> TokenSeq {
    TokenSeq::new(ids.iter().map(|&i| vocab[i].as_ref().to_string()).collect())
}

// ---------------------------------------------------------------------------
// 1. ROUGE oracle equivalence
// ---------------------------------------------------------------------------

/// Brute-force clipped n-gram overlap: distinct candidate n-grams found by
/// linear scan, occurrence counts by re-scanning both sides.
fn brute_rouge_n(cand: &[String], refr: &[String], n: usize) -> (f64, f64, f64) {
    fn windows(toks: &[String], n: usize) -> Vec<&[String]> {
        if toks.len() < n {
            Vec::new()
        } else {
            toks.windows(n).collect()
        }
    }
    let cg = windows(cand, n);
    let rg = windows(refr, n);
    if cg.is_empty() || rg.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mut distinct: Vec<&[String]> = Vec::new();
    for g in &cg {
        if !distinct.iter().any(|d| d == g) {
            distinct.push(g);
        }
    }
    let mut overlap = 0usize;
    for d in distinct {
        let in_cand = cg.iter().filter(|g| ***g == *d).count();
        let in_ref = rg.iter().filter(|g| ***g == *d).count();
        overlap += in_cand.min(in_ref);
    }
    let p = overlap as f64 / cg.len() as f64;
    let r = overlap as f64 / rg.len() as f64;
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

/// Quadratic full-table LCS.
fn brute_lcs(a: &[String], b: &[String]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table[a.len()][b.len()]
}

#[test]
fn acceptance_01_rouge_matches_brute_force_oracles() {
    let started = Instant::now();
    let vocab: Vec<String> = (0..20).map(|i| format!("t{i}")).collect();
    let cfg = RougeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let len_a = rng.gen_range(0..=40);
        let len_b = rng.gen_range(0..=40);
        let a_ids: Vec<usize> = (0..len_a).map(|_| rng.gen_range(0..20)).collect();
        let b_ids: Vec<usize> = (0..len_b).map(|_| rng.gen_range(0..20)).collect();
        let cand = token_seq(&a_ids, &vocab);
        let refr = token_seq(&b_ids, &vocab);
        for n in [1usize, 2] {
            let ours = rouge_n(&cand, &refr, n, &cfg);
            let (p, r, f1) = brute_rouge_n(cand.tokens(), refr.tokens(), n);
            assert_eq!(ours.precision, p, "case {case} n={n} precision");
            assert_eq!(ours.recall, r, "case {case} n={n} recall");
            assert_eq!(ours.f1, f1, "case {case} n={n} f1");
        }
        let ours = rouge_l(&cand, &refr, &cfg);
        if cand.is_empty() || refr.is_empty() {
            assert_eq!(ours.f1, 0.0);
        } else {
            let l = brute_lcs(cand.tokens(), refr.tokens()) as f64;
            let p = l / cand.len() as f64;
            let r = l / refr.len() as f64;
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            assert_eq!(ours.precision, p, "case {case} lcs precision");
            assert_eq!(ours.recall, r, "case {case} lcs recall");
            assert_eq!(ours.f1, f1, "case {case} lcs f1");
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 10.0, "runtime {secs:.2}s exceeds 10s");
    println!("acceptance 1: PASS — rouge_n/rouge_l exact on 1000 random pairs ({secs:.2}s)");
}

// ---------------------------------------------------------------------------
// 2. Porter reference vocabulary
// ---------------------------------------------------------------------------

#[test]
fn acceptance_02_porter_matches_reference_vocabulary() {
    let started = Instant::now();
    let fixture = include_str!("fixtures/porter_reference.txt");
    let mut checked = 0usize;
    for line in fixture.lines() {
        let mut parts = line.split_whitespace();
        let (Some(word), Some(expected)) = (parts.next(), parts.next()) else {
            continue;
        };
        assert_eq!(
            porter_stem(word),
            expected,
            "stem mismatch for {word:?}"
        );
        checked += 1;
    }
    assert!(checked >= 20_000, "fixture unexpectedly small: {checked}");
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 5.0, "runtime {secs:.2}s exceeds 5s");
    println!("acceptance 2: PASS — {checked} reference vocabulary entries ({secs:.2}s)");
}

// ---------------------------------------------------------------------------
// 3. Optimal transport vs assignment oracle
// ---------------------------------------------------------------------------

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(current: &mut Vec<usize>, remaining: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.is_empty() {
            out.push(current.clone());
            return;
        }
        for i in 0..remaining.len() {
            let x = remaining.remove(i);
            current.push(x);
            go(current, remaining, out);
            current.pop();
            remaining.insert(i, x);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

fn random_bag<S: AsRef<str>>(rng: &mut ChaCha8Rng, size: usize, vocab: &[S]) -> TokenSeq {
    let ids: Vec<usize> = (0..size).map(|_| rng.gen_range(0..vocab.len())).collect();
    token_seq(&ids, vocab)
}

#[test]
fn acceptance_03_wmd_matches_assignment_oracle() {
    let started = Instant::now();
    let provider = EmbeddingProvider::hash(4, 3);
    let vocab = ["a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9"];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let size = rng.gen_range(1..=6);
        let a = random_bag(&mut rng, size, &vocab);
        let b = random_bag(&mut rng, size, &vocab);
        let flow = wmd(&a, &b, &provider).unwrap();
        let av: Vec<Vector> = a.tokens().iter().map(|t| provider.token_vector(t)).collect();
        let bv: Vec<Vector> = b.tokens().iter().map(|t| provider.token_vector(t)).collect();
        let oracle = permutations(size)
            .iter()
            .map(|perm| {
                perm.iter()
                    .enumerate()
                    .map(|(i, &j)| av[i].euclidean(&bv[j]))
                    .sum::<f64>()
                    / size as f64
            })
            .fold(f64::INFINITY, f64::min);
        assert!(
            (flow - oracle).abs() <= 1e-6,
            "case {case}: flow {flow} vs oracle {oracle}"
        );
    }
    // symmetry and triangle inequality on random triples
    for case in 0..200 {
        let size_x = rng.gen_range(1..=6);
        let x = random_bag(&mut rng, size_x, &vocab);
        let size_y = rng.gen_range(1..=6);
        let y = random_bag(&mut rng, size_y, &vocab);
        let size_z = rng.gen_range(1..=6);
        let z = random_bag(&mut rng, size_z, &vocab);
        let xy = wmd(&x, &y, &provider).unwrap();
        let yx = wmd(&y, &x, &provider).unwrap();
        assert!((xy - yx).abs() <= 1e-7, "case {case}: symmetry {xy} vs {yx}");
        let xz = wmd(&x, &z, &provider).unwrap();
        let yz = wmd(&y, &z, &provider).unwrap();
        assert!(
            xz <= xy + yz + 1e-7,
            "case {case}: triangle {xz} > {xy} + {yz}"
        );
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 30.0, "runtime {secs:.2}s exceeds 30s");
    println!("acceptance 3: PASS — exact OT vs permutation oracle, symmetry, triangle ({secs:.2}s)");
}

// ---------------------------------------------------------------------------
// 4. Greedy max-min keyword selection vs exhaustive oracle
// ---------------------------------------------------------------------------

#[test]
fn acceptance_04_keyword_selection_matches_exhaustive_greedy() {
    let started = Instant::now();
    let vocab = [
        "court", "appeal", "visa", "tribunal", "claim", "error", "review", "costs", "merits",
        "facts", "statute", "order",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..200 {
        let n_k = rng.gen_range(1..=4);
        let len = rng.gen_range(2..=14);
        let text = random_bag(&mut rng, len, &vocab);
        let provider = EmbeddingProvider::hash(8, 100 + case as u64);
        let cfg = KeywordConfig {
            n_k,
            ..KeywordConfig::default()
        };
        let candidates = candidate_phrases(&text, &cfg, &provider).unwrap();
        assert!(candidates.len() <= 2 * n_k);

        // independent greedy max-min over the ranked candidates
        let mut remaining: Vec<usize> = (0..candidates.len()).collect();
        let mut chosen = vec![remaining.remove(0)];
        while chosen.len() < n_k && !remaining.is_empty() {
            let mut best_pos = 0usize;
            let mut best_val = f64::INFINITY;
            for (pos, &ci) in remaining.iter().enumerate() {
                let worst = chosen
                    .iter()
                    .map(|&ki| {
                        cosine(&candidates[ci].vector, &candidates[ki].vector).unwrap()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                if worst < best_val {
                    best_val = worst;
                    best_pos = pos;
                }
            }
            chosen.push(remaining.remove(best_pos));
        }
        let oracle: Vec<String> = chosen
            .iter()
            .map(|&i| candidates[i].phrase.join_spaced())
            .collect();

        let ours = get_keywords(&text, &cfg, &provider).unwrap();
        assert_eq!(ours.phrases(), oracle, "case {case} (n_k {n_k})");
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 5.0, "runtime {secs:.2}s exceeds 5s");
    println!("acceptance 4: PASS — max-min selection equals exhaustive greedy on 200 instances ({secs:.2}s)");
}

// ---------------------------------------------------------------------------
// 5. Gradient correctness (BCE, REINFORCE, PPO surrogate; both heads)
// ---------------------------------------------------------------------------

fn random_params(kind: HeadKind, dim: usize, seed: u64) -> PolicyParams {
    PolicyParams::init(kind, dim, 3, seed, "grad-check".into())
}

fn random_states(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<StateVector> {
    (0..count)
        .map(|_| StateVector::new((0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()))
        .collect()
}

fn check_fd(analytic: &[f64], loss_at: impl Fn(&[f64]) -> f64, flat: &[f64], label: &str) {
    let step = 1e-5;
    for i in 0..flat.len() {
        let mut plus = flat.to_vec();
        plus[i] += step;
        let mut minus = flat.to_vec();
        minus[i] -= step;
        let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * step);
        let err = (analytic[i] - fd).abs() / fd.abs().max(1.0);
        assert!(
            err <= 1e-4,
            "{label}: param {i} analytic {} vs fd {fd} (err {err:.2e})",
            analytic[i]
        );
    }
}

fn fake_batch(rng: &mut ChaCha8Rng, dim: usize, steps: usize) -> Vec<Trajectory> {
    let states = random_states(rng, steps, dim);
    let actions: Vec<bool> = (0..steps).map(|_| rng.gen()).collect();
    let p_rl: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.2..0.8)).collect();
    let returns: Vec<f64> = (0..steps).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let advantages: Vec<f64> = (0..steps).map(|_| rng.gen_range(-1.0..1.0)).collect();
    vec![Trajectory {
        doc_id: "grad".into(),
        states,
        actions,
        p_rl: p_rl.clone(),
        p_sl: p_rl,
        rewards: vec![0.0; steps],
        returns,
        advantages,
    }]
}

#[test]
fn acceptance_05_gradients_match_finite_differences() {
    let started = Instant::now();
    let dim = 5;
    for kind in [HeadKind::Linear, HeadKind::Mlp] {
        // supervised BCE
        for instance in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + instance);
            let params = random_params(kind, dim, 50 + instance);
            let batch: Vec<(StateVector, bool)> = random_states(&mut rng, 6, dim)
                .into_iter()
                .map(|s| (s, rng.gen()))
                .collect();
            let (_, grad) = supervised_loss_and_grad(&params, &batch).unwrap();
            check_fd(
                &grad,
                |flat| {
                    let mut p = params.clone();
                    p.set_flat(flat);
                    supervised_loss_and_grad(&p, &batch).unwrap().0
                },
                &params.flat(),
                &format!("bce {kind:?} #{instance}"),
            );
        }
        // REINFORCE
        for instance in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + instance);
            let params = random_params(kind, dim, 60 + instance);
            let batch = fake_batch(&mut rng, dim, 7);
            let (_, grad) = reinforce_loss_and_grad(&params, &batch).unwrap();
            check_fd(
                &grad,
                |flat| {
                    let mut p = params.clone();
                    p.set_flat(flat);
                    reinforce_loss_and_grad(&p, &batch).unwrap().0
                },
                &params.flat(),
                &format!("reinforce {kind:?} #{instance}"),
            );
        }
        // PPO clipped surrogate
        for instance in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(700 + instance);
            let params = random_params(kind, dim, 70 + instance);
            let batch = fake_batch(&mut rng, dim, 7);
            let (_, grad, _) = ppo_loss_and_grad(&params, &batch, 0.2).unwrap();
            check_fd(
                &grad,
                |flat| {
                    let mut p = params.clone();
                    p.set_flat(flat);
                    ppo_loss_and_grad(&p, &batch, 0.2).unwrap().0
                },
                &params.flat(),
                &format!("ppo {kind:?} #{instance}"),
            );
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 30.0, "runtime {secs:.2}s exceeds 30s");
    println!("acceptance 5: PASS — BCE/REINFORCE/PPO gradients vs central differences, both heads ({secs:.2}s)");
}

// ---------------------------------------------------------------------------
// 6. Reward arithmetic with the published constants
// ---------------------------------------------------------------------------

#[test]
fn acceptance_06_reward_arithmetic_from_defaults() {
    let cfg = RewardConfig::default();
    assert_eq!((cfg.alpha1, cfg.alpha2, cfg.alpha3), (0.3, 0.4, 0.3));
    assert_eq!(cfg.beta_kl, 0.05);
    assert_eq!(cfg.n_k, 3);
    assert_eq!(cfg.epsilon, 0.01);

    // composed component values reproduce the combined reward
    let plain = RougeConfig {
        stemming: false,
        use_stopword_removal: false,
    };
    let cand = TokenSeq::from_strs(&["the", "cat", "sat"]);
    let refr = TokenSeq::from_strs(&["the", "cat", "ran"]);
    let rouge_component = (rouge_n(&cand, &refr, 1, &plain).f1
        + rouge_n(&cand, &refr, 2, &plain).f1
        + rouge_l(&cand, &refr, &plain).f1)
        / 3.0;
    assert!((rouge_component - 0.6111111111).abs() <= 1e-9);
    let combined = unify(rouge_component, 0.5, 1.0, &cfg);
    assert!(
        (combined - 0.6833333333).abs() <= 1e-6,
        "combined reward {combined}"
    );
    assert!((unify(1.0, 1.0, 1.0, &cfg) - 1.0).abs() <= 1e-12);
    let no_kw = RewardConfig {
        use_kw: false,
        ..RewardConfig::default()
    };
    assert!((unify(1.0, 1.0, 1.0, &no_kw) - 0.6).abs() <= 1e-12);

    // per-step rewards: -beta * log ratio, terminal adds the episode reward
    let traj = Trajectory {
        doc_id: "t".into(),
        states: vec![StateVector::new(vec![0.0]); 2],
        actions: vec![true, true],
        p_rl: vec![0.8, 0.5],
        p_sl: vec![0.4, 0.5],
        rewards: vec![],
        returns: vec![],
        advantages: vec![],
    };
    let mut bd = RewardBreakdown {
        r_unified: 0.6833333333,
        ..RewardBreakdown::default()
    };
    let rewards = step_rewards(&traj, &mut bd, &cfg).unwrap();
    assert!((rewards[0] - (-0.05 * 2f64.ln())).abs() <= 1e-6);
    assert!((rewards[0] + 0.0346574).abs() <= 1e-6);
    assert!((rewards[1] - 0.6833333333).abs() <= 1e-6);

    // identical one-sentence summary/reference: every component at its
    // maximum, r_seq = 1/epsilon
    let doc = Document::new(
        "d",
        &["tribunal found reviewable error".to_string()],
        "tribunal found reviewable error",
    )
    .unwrap();
    let provider = EmbeddingProvider::hash(16, 3);
    let summary = Summary::from_selected(&doc, vec![0]);
    let bd = lexsum_core::reward::r_unified(
        &summary,
        &doc,
        &cfg,
        RewardProviders::shared(&provider),
    )
    .unwrap();
    assert!((bd.r_seq - 100.0).abs() <= 1e-6);
    assert!((bd.r_unified - 30.7).abs() <= 1e-6);

    println!("acceptance 6: PASS — reward arithmetic with alpha=(0.3,0.4,0.3), beta=0.05, eps=0.01, n_k=3");
}

// ---------------------------------------------------------------------------
// 7-9. End-to-end trend on the pinned synthetic corpus
// ---------------------------------------------------------------------------

/// Synonym-aware embedding table for the generated vocabulary: keyword-pool
/// tokens carry large norms (so keyword ranking reflects saliency), filler
/// tokens small ones; each token's synonym partner points the same way.
fn synonym_provider(vocab_size: usize, pool_size: usize, dim: usize, seed: u64) -> EmbeddingProvider {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    let push_pair = |rng: &mut ChaCha8Rng, token: String, norm: f64, rows: &mut HashMap<String, Vec<f64>>| {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let base: Vec<f64> = v.into_iter().map(|x| x * norm / n).collect();
        let noisy: Vec<f64> = base
            .iter()
            .map(|x| x + 0.12 * norm * (rng.gen::<f64>() * 2.0 - 1.0))
            .collect();
        let n2 = noisy.iter().map(|x| x * x).sum::<f64>().sqrt();
        let syn: Vec<f64> = noisy.into_iter().map(|x| x * norm / n2).collect();
        rows.insert(synthetic_synonym(&token), syn);
        rows.insert(token, base);
    };
    for i in 0..vocab_size {
        let norm = 0.6 + 0.2 * rng.gen::<f64>();
        push_pair(&mut rng, format!("w{i:03}"), norm, &mut rows);
    }
    for i in 0..pool_size {
        let norm = 1.5 + 0.3 * rng.gen::<f64>();
        push_pair(&mut rng, format!("k{i:03}"), norm, &mut rows);
    }
    EmbeddingProvider::from_table(rows, OovPolicy::HashFallback).unwrap()
}

fn trend_ppo_config(seed: u64) -> PpoConfig {
    PpoConfig {
        learning_rate: 0.01,
        max_updates: 250,
        seed,
        ..PpoConfig::default()
    }
}

fn trend_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.02,
        batch_size: 32,
        epochs: 1,
        seed,
        ..TrainConfig::default()
    }
}

fn mean_r_rouge(
    docs: &[Document],
    params: &PolicyParams,
    provider: &EmbeddingProvider,
    cfg: &RougeConfig,
) -> f64 {
    let total: f64 = docs
        .iter()
        .map(|doc| {
            let probs = forward_doc(params, doc, provider).unwrap();
            let summary = Summary::from_selected(doc, select_top_m(&probs, 3));
            let cand = summary.tokens(doc);
            100.0
                * ((rouge_n(&cand, &doc.reference, 1, cfg).f1
                    + rouge_n(&cand, &doc.reference, 2, cfg).f1
                    + rouge_l(&cand, &doc.reference, cfg).f1)
                    / 3.0)
        })
        .sum();
    total / docs.len() as f64
}

struct TrendWorld {
    train_docs: Vec<Document>,
    test_docs: Vec<Document>,
    provider: EmbeddingProvider,
    seq_provider: EmbeddingProvider,
}

impl TrendWorld {
    fn providers(&self) -> RewardProviders<'_> {
        RewardProviders {
            keyword: &self.provider,
            seq: &self.seq_provider,
        }
    }

    fn pretrain(&self, seed: u64) -> PolicyParams {
        let reward = RewardConfig::default();
        let labels: Vec<_> = self
            .train_docs
            .iter()
            .map(|d| oracle_labels(d, 3, &reward.rouge))
            .collect();
        let init = PolicyParams::init(
            HeadKind::Linear,
            self.provider.dim() + STATE_EXTRA_FEATURES,
            0,
            seed,
            self.provider.fingerprint(),
        );
        let (sl, _) = pretrain(
            &init,
            &self.train_docs,
            &labels,
            &self.provider,
            &trend_train_config(seed),
        )
        .unwrap();
        sl
    }

    fn finetune_score(
        &self,
        sl: &PolicyParams,
        reward: &RewardConfig,
        algorithm: Algorithm,
        seed: u64,
    ) -> (f64, f64) {
        let out = finetune(
            sl,
            &self.train_docs,
            reward,
            &trend_ppo_config(seed),
            algorithm,
            &self.provider,
            self.providers(),
        )
        .unwrap();
        let score = mean_r_rouge(
            &self.test_docs,
            &out.params,
            &self.provider,
            &RewardConfig::default().rouge,
        );
        (score, out.log.last().unwrap().mean_kl)
    }
}

struct TrendArtifacts {
    world: TrendWorld,
    sl_seed0: PolicyParams,
    baseline: f64,
    full: f64,
    no_kl: f64,
    no_kw: f64,
    no_seq: f64,
    build_secs: f64,
}

fn trend_artifacts() -> &'static TrendArtifacts {
    static ARTIFACTS: OnceLock<TrendArtifacts> = OnceLock::new();
    ARTIFACTS.get_or_init(|| {
        let started = Instant::now();
        let spec = SyntheticSpec {
            num_docs: 250,
            sentences_per_doc: 12,
            salient_per_doc: 3,
            vocab_size: 120,
            keyword_pool_size: 30,
            noise_token_rate: 0.3,
            seed: 0,
        };
        let corpus = generate_synthetic(&spec).unwrap();
        let mut docs = corpus.documents;
        let test_docs = docs.split_off(200);
        let world = TrendWorld {
            train_docs: docs,
            test_docs,
            provider: synonym_provider(spec.vocab_size, spec.keyword_pool_size, 24, 7),
            seq_provider: EmbeddingProvider::hash(16, 9),
        };
        let sl_seed0 = world.pretrain(0);
        let baseline = mean_r_rouge(
            &world.test_docs,
            &sl_seed0,
            &world.provider,
            &RewardConfig::default().rouge,
        );
        let full_cfg = RewardConfig::default();
        let (full, _) = world.finetune_score(&sl_seed0, &full_cfg, Algorithm::Ppo, 0);
        let (no_kl, _) = world.finetune_score(
            &sl_seed0,
            &RewardConfig {
                use_kl: false,
                ..full_cfg.clone()
            },
            Algorithm::Ppo,
            0,
        );
        let (no_kw, _) = world.finetune_score(
            &sl_seed0,
            &RewardConfig {
                use_kw: false,
                ..full_cfg.clone()
            },
            Algorithm::Ppo,
            0,
        );
        let (no_seq, _) = world.finetune_score(
            &sl_seed0,
            &RewardConfig {
                use_seq: false,
                ..full_cfg
            },
            Algorithm::Ppo,
            0,
        );
        TrendArtifacts {
            world,
            sl_seed0,
            baseline,
            full,
            no_kl,
            no_kw,
            no_seq,
            build_secs: started.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn acceptance_07_ppo_trend_and_ablation_ordering() {
    let a = trend_artifacts();
    assert!(
        a.full - a.baseline >= 2.0,
        "improvement {:.2} -> {:.2} is below 2 points",
        a.baseline,
        a.full
    );
    for (name, score) in [("no-kl", a.no_kl), ("no-kw", a.no_kw), ("no-seq", a.no_seq)] {
        assert!(
            a.full + 1e-9 >= score,
            "full {:.2} below ablation {name} {score:.2}",
            a.full
        );
    }
    assert!(
        a.build_secs < 600.0,
        "trend pipeline took {:.0}s (budget 600s)",
        a.build_secs
    );
    println!(
        "acceptance 7: PASS — baseline {:.2} -> full {:.2} (+{:.2}); ablations no-kl {:.2}, no-kw {:.2}, no-seq {:.2} ({:.0}s)",
        a.baseline,
        a.full,
        a.full - a.baseline,
        a.no_kl,
        a.no_kw,
        a.no_seq,
        a.build_secs
    );
}

#[test]
fn acceptance_08_kl_coefficient_controls_drift() {
    let a = trend_artifacts();
    let (_, kl_large) = a.world.finetune_score(
        &a.sl_seed0,
        &RewardConfig {
            beta_kl: 10.0,
            ..RewardConfig::default()
        },
        Algorithm::Ppo,
        0,
    );
    let (_, kl_zero) = a.world.finetune_score(
        &a.sl_seed0,
        &RewardConfig {
            beta_kl: 0.0,
            ..RewardConfig::default()
        },
        Algorithm::Ppo,
        0,
    );
    assert!(
        kl_large.abs() <= 0.01,
        "beta=10 final sampled KL {kl_large:.5} above 0.01"
    );
    assert!(
        kl_zero > kl_large,
        "beta=0 KL {kl_zero:.5} not larger than beta=10 KL {kl_large:.5}"
    );
    println!(
        "acceptance 8: PASS — final sampled KL: beta=10 {kl_large:.5}, beta=0 {kl_zero:.5}"
    );
}

#[test]
fn acceptance_09_ppo_beats_reinforce_across_seeds() {
    let a = trend_artifacts();
    let reward = RewardConfig::default();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in [0u64, 1, 2] {
        let sl = if seed == 0 {
            a.sl_seed0.clone()
        } else {
            a.world.pretrain(seed)
        };
        let (ppo, _) = if seed == 0 {
            (a.full, 0.0)
        } else {
            a.world.finetune_score(&sl, &reward, Algorithm::Ppo, seed)
        };
        let (reinforce, _) = a
            .world
            .finetune_score(&sl, &reward, Algorithm::Reinforce, seed);
        if ppo >= reinforce {
            wins += 1;
        }
        lines.push(format!("seed {seed}: ppo {ppo:.2} vs reinforce {reinforce:.2}"));
    }
    assert!(wins >= 2, "PPO won only {wins}/3 seeds: {lines:?}");
    println!("acceptance 9: PASS — PPO >= REINFORCE in {wins}/3 seeds ({})", lines.join("; "));
}

// ---------------------------------------------------------------------------
// 10. Determinism and round-trips through the CLI binary
// ---------------------------------------------------------------------------

fn run_lexsum(dir: &Path, args: &[&str]) -> (bool, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_lexsum"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.success(),
        String::from_utf8_lossy(&output.stdout).to_string(),
    )
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

/// Training logs are compared with the wall-clock field removed.
fn strip_wall_ms(log: &str) -> String {
    log.lines()
        .map(|line| {
            match serde_json::from_str::<serde_json::Value>(line) {
                Ok(mut v) => {
                    if let Some(obj) = v.as_object_mut() {
                        obj.remove("wall_ms");
                    }
                    v.to_string()
                }
                Err(_) => line.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn drive_pipeline(dir: &Path) -> String {
    let config = serde_json::json!({
        "train_corpus": "train.jsonl",
        "test_corpus": "test.jsonl",
        "embedding": {"kind": "hash", "dim": 16, "seed": 0},
        "m": 2,
        "train": {"learning_rate": 0.02, "batch_size": 16, "epochs": 2, "seed": 0},
        "ppo": {"learning_rate": 0.01, "max_updates": 3, "rollouts_per_update": 4, "seed": 0},
        "out_dir": "out",
        "seed": 0
    });
    std::fs::write(dir.join("run.json"), serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let base = ["--config", "run.json", "--quiet"];
    let synth_train: Vec<&str> = base
        .iter()
        .chain([
            "synth", "--docs", "12", "--sentences", "6", "--salient", "2", "--vocab", "30",
            "--keyword-pool", "10", "--noise", "0.2", "--output", "train.jsonl",
        ].iter())
        .copied()
        .collect();
    assert!(run_lexsum(dir, &synth_train).0);
    let synth_test: Vec<&str> = base
        .iter()
        .chain([
            "--seed", "1", "synth", "--docs", "6", "--sentences", "6", "--salient", "2",
            "--vocab", "30", "--keyword-pool", "10", "--noise", "0.2", "--output", "test.jsonl",
        ].iter())
        .copied()
        .collect();
    assert!(run_lexsum(dir, &synth_test).0);
    for args in [
        vec!["pretrain"],
        vec!["finetune"],
        vec!["eval", "--checkpoint", "out/finetuned-ppo-full.json"],
        vec!["eval", "--baseline", "lead"],
    ] {
        let full: Vec<&str> = base.iter().chain(args.iter()).copied().collect();
        let (ok, _) = run_lexsum(dir, &full);
        assert!(ok, "command {args:?} failed");
    }
    let summarize: Vec<&str> = base
        .iter()
        .chain(["summarize", "--checkpoint", "out/pretrained.json", "--doc-id", "d00003", "--show-keywords"].iter())
        .copied()
        .collect();
    let (ok, stdout) = run_lexsum(dir, &summarize);
    assert!(ok);
    stdout
}

#[test]
fn acceptance_10_byte_identical_runs_and_checkpoint_roundtrip() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let stdout_a = drive_pipeline(dir_a.path());
    let stdout_b = drive_pipeline(dir_b.path());
    assert_eq!(stdout_a, stdout_b, "summarize stdout differs");

    for file in [
        "train.jsonl",
        "test.jsonl",
        "out/pretrained.json",
        "out/pretrain_loss.json",
        "out/finetuned-ppo-full.json",
        "out/eval-checkpoint.json",
        "out/eval-lead-m.json",
    ] {
        assert_eq!(
            read(dir_a.path(), file),
            read(dir_b.path(), file),
            "{file} differs between identical runs"
        );
    }
    let log_a = strip_wall_ms(&read(dir_a.path(), "out/train-ppo-full.jsonl"));
    let log_b = strip_wall_ms(&read(dir_b.path(), "out/train-ppo-full.jsonl"));
    assert_eq!(log_a, log_b, "training logs differ beyond wall_ms");

    // checkpoint round-trip preserves forward outputs bit-for-bit
    let params = load_checkpoint(&dir_a.path().join("out/pretrained.json")).unwrap();
    let provider = EmbeddingProvider::hash(16, 0);
    let docs = lexsum_core::corpus::load_corpus(&dir_a.path().join("test.jsonl")).unwrap();
    let resaved = dir_a.path().join("resaved.json");
    save_checkpoint(&params, &resaved).unwrap();
    let reloaded = load_checkpoint(&resaved).unwrap();
    for doc in &docs {
        let before = forward_doc(&params, doc, &provider).unwrap();
        let after = forward_doc(&reloaded, doc, &provider).unwrap();
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() <= 1e-12);
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    println!("acceptance 10: PASS — byte-identical outputs across reruns; checkpoint round-trip exact");
}
