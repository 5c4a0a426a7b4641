//! The evaluation language model: a single-layer LSTM trained with
//! teacher forcing, and perplexity over anything that can score a
//! sentence.
//!
//! The output projection starts at zero, so an untrained model is exactly
//! uniform over the vocabulary — its perplexity on any text is V, which
//! anchors the scale before training moves it.

use crate::data::{Batch, TokenSequence, END, START, UNK};
use crate::error::{Error, Result};
use crate::nn::{lstm_cell, register_lstm_cell, xavier_uniform};
use crate::params::ParameterStore;
use crate::rng::Rng;
use crate::tensor::Graph;
use crate::train::AdamState;

/// Shape and training knobs for the evaluation model.
#[derive(Clone, Debug, PartialEq)]
pub struct LmConfig {
    pub vocab_size: usize,
    pub d_embed: usize,
    pub d_hidden: usize,
    /// Sentences are truncated to this many tokens.
    pub max_len: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl LmConfig {
    pub fn desk(vocab_size: usize, seed: u64) -> LmConfig {
        LmConfig {
            vocab_size,
            d_embed: 128,
            d_hidden: 256,
            max_len: 50,
            epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= UNK as usize {
            return Err(Error::Config(format!(
                "vocabulary of {} has no room above the reserved ids",
                self.vocab_size
            )));
        }
        for (name, v) in [
            ("d_embed", self.d_embed),
            ("d_hidden", self.d_hidden),
            ("max_len", self.max_len),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be ≥ 1")));
            }
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        Ok(())
    }
}

/// Anything that can price a sentence: total negative log-likelihood and
/// the number of scored tokens (the end token counts).
pub trait TokenScorer {
    fn sentence_nll(&mut self, ids: &[u32]) -> Result<(f64, usize)>;
}

/// `exp(total NLL / total tokens)` over the whole set, end tokens
/// included in both totals.
pub fn perplexity<S: TokenScorer + ?Sized>(scorer: &mut S, sentences: &[Vec<u32>]) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::Input("no sentences to score".into()));
    }
    let mut nll = 0.0;
    let mut tokens = 0usize;
    for s in sentences {
        let (n, t) = scorer.sentence_nll(s)?;
        nll += n;
        tokens += t;
    }
    if tokens == 0 {
        return Err(Error::Input("sentences contain no tokens".into()));
    }
    Ok((nll / tokens as f64).exp())
}

/// Embedding + LSTM + output projection, with its own parameter store.
pub struct LanguageModel {
    pub cfg: LmConfig,
    store: ParameterStore,
}

impl LanguageModel {
    /// Fresh model: random embedding and recurrent weights, zeroed output
    /// projection (exactly uniform predictions until trained).
    pub fn new(cfg: LmConfig) -> Result<LanguageModel> {
        cfg.validate()?;
        let mut rng = Rng::substream(cfg.seed, 0);
        let mut store = ParameterStore::new();
        store.insert(
            "embed",
            xavier_uniform(cfg.vocab_size, cfg.d_embed, &mut rng),
            &[cfg.vocab_size, cfg.d_embed],
        )?;
        register_lstm_cell(&mut store, "lstm", cfg.d_embed, cfg.d_hidden, &mut rng)?;
        store.insert(
            "out.w",
            vec![0.0; cfg.d_hidden * cfg.vocab_size],
            &[cfg.d_hidden, cfg.vocab_size],
        )?;
        store.insert("out.b", vec![0.0; cfg.vocab_size], &[cfg.vocab_size])?;
        Ok(LanguageModel { cfg, store })
    }

    fn clamp_id(&self, id: u32) -> usize {
        if (id as usize) < self.cfg.vocab_size {
            id as usize
        } else {
            UNK as usize
        }
    }

    /// Teacher-forced cross-entropy over a batch grid: inputs are the
    /// start-shifted tokens, targets the tokens themselves plus the end
    /// token where there is room, averaged over charged positions.
    fn batch_loss(
        &self,
        g: &mut Graph,
        bound: &crate::params::BoundParams,
        batch: &Batch,
    ) -> Result<crate::tensor::TensorId> {
        let (n, t) = (batch.n, batch.t);
        let h_dim = self.cfg.d_hidden;

        let total: usize = batch
            .lengths
            .iter()
            .map(|&len| (len + 1).min(t))
            .sum();
        let mut h = g.constant(vec![0.0; n * h_dim], &[n, h_dim])?;
        let mut c = g.constant(vec![0.0; n * h_dim], &[n, h_dim])?;
        let mut loss_acc = g.constant(vec![0.0], &[1])?;
        for j in 0..t {
            let mut in_ids = Vec::with_capacity(n);
            let mut tgt_ids = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for i in 0..n {
                let len = batch.lengths[i];
                in_ids.push(if j == 0 {
                    START as usize
                } else {
                    self.clamp_id(batch.ids[i * t + j - 1])
                });
                let (tgt, w) = if j < len {
                    (self.clamp_id(batch.ids[i * t + j]), 1.0 / total as f64)
                } else if j == len {
                    (END as usize, 1.0 / total as f64)
                } else {
                    (0, 0.0)
                };
                tgt_ids.push(tgt);
                weights.push(w);
            }
            let x = g.gather_rows(bound.id("embed"), &in_ids)?;
            let (h2, c2) = lstm_cell(g, bound, "lstm", x, h, c)?;
            h = h2;
            c = c2;
            let z = g.matmul(h, bound.id("out.w"))?;
            let logits = g.add_bias(z, bound.id("out.b"))?;
            let lsm = g.log_softmax(logits, 1)?;
            let picked = g.pick(lsm, &tgt_ids)?;
            let negged = g.neg(picked);
            let wt = g.constant(weights, &[n])?;
            let contrib = g.mul(negged, wt)?;
            let step_loss = g.sum_all(contrib);
            loss_acc = g.add(loss_acc, step_loss)?;
        }
        Ok(loss_acc)
    }

    /// Train with teacher forcing; returns the per-epoch mean losses.
    pub fn fit(&mut self, corpus: &[Vec<u32>]) -> Result<Vec<f64>> {
        if corpus.is_empty() {
            return Err(Error::Input("empty language-model corpus".into()));
        }
        // One slot wider than the longest kept sentence, so the end token
        // is charged for every sentence — scoring always prices it, so
        // training must cover it.
        let longest = corpus
            .iter()
            .map(|s| s.len())
            .max()
            .unwrap()
            .clamp(1, self.cfg.max_len);
        let grid = longest + 1;
        let seqs: Vec<TokenSequence> = corpus
            .iter()
            .map(|s| {
                let mut mapped: Vec<u32> =
                    s.iter().map(|&id| self.clamp_id(id) as u32).collect();
                mapped.truncate(self.cfg.max_len);
                TokenSequence::new(&mapped, grid)
            })
            .collect::<Result<_>>()?;
        let mut order_rng = Rng::substream(self.cfg.seed, 1);
        let mut opt = AdamState::new(0.9, 0.999, 1e-8);
        let mut epoch_means = Vec::with_capacity(self.cfg.epochs);
        for _ in 0..self.cfg.epochs {
            let mut order: Vec<usize> = (0..seqs.len()).collect();
            order_rng.shuffle(&mut order);
            let mut sum = 0.0;
            let mut count = 0usize;
            for chunk in order.chunks(self.cfg.batch_size) {
                let refs: Vec<&TokenSequence> = chunk.iter().map(|&i| &seqs[i]).collect();
                let batch = Batch::from_sequences(&refs)?;
                let mut g = Graph::new();
                let bound = self.store.bind(&mut g, false)?;
                let loss = self.batch_loss(&mut g, &bound, &batch)?;
                let value = g.value(loss);
                if !value.is_finite() {
                    return Err(Error::Divergence(format!(
                        "language-model loss is {value}"
                    )));
                }
                g.backward(loss)?;
                let mut grads = self.store.collect_grads(&g, &bound, |_| true);
                grads.clip_global_norm(5.0);
                opt.step(&mut self.store, &grads, self.cfg.lr)?;
                sum += value;
                count += 1;
            }
            epoch_means.push(sum / count as f64);
        }
        Ok(epoch_means)
    }
}

impl TokenScorer for LanguageModel {
    /// Runs the recurrence over `START, w₁ … w_k` and prices
    /// `w₁ … w_k, END` — always `k + 1` scored tokens, no grid
    /// truncation. Log-probabilities are computed host-side from the
    /// logits with a max-shifted log-sum-exp.
    fn sentence_nll(&mut self, ids: &[u32]) -> Result<(f64, usize)> {
        if ids.is_empty() {
            return Err(Error::Input("cannot score an empty sentence".into()));
        }
        let h_dim = self.cfg.d_hidden;
        let mut g = Graph::inference();
        let bound = self.store.bind(&mut g, false)?;
        let mut h = g.constant(vec![0.0; h_dim], &[1, h_dim])?;
        let mut c = g.constant(vec![0.0; h_dim], &[1, h_dim])?;
        let mut nll = 0.0;
        for j in 0..=ids.len() {
            let input = if j == 0 {
                START as usize
            } else {
                self.clamp_id(ids[j - 1])
            };
            let target = if j < ids.len() {
                self.clamp_id(ids[j])
            } else {
                END as usize
            };
            let x = g.gather_rows(bound.id("embed"), &[input])?;
            let (h2, c2) = lstm_cell(&mut g, &bound, "lstm", x, h, c)?;
            h = h2;
            c = c2;
            let z = g.matmul(h, bound.id("out.w"))?;
            let logits = g.add_bias(z, bound.id("out.b"))?;
            let row = g.data(logits);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            nll += lse - row[target];
        }
        Ok((nll, ids.len() + 1))
    }
}

/// Train a fresh model on `corpus` with the given config.
pub fn train_lm(corpus: &[Vec<u32>], cfg: LmConfig) -> Result<LanguageModel> {
    let mut lm = LanguageModel::new(cfg)?;
    lm.fit(corpus)?;
    Ok(lm)
}

/// Sentence quality: an LM trained on the reference corpus prices the
/// generated sentences.
pub fn forward_perplexity(
    reference: &[Vec<u32>],
    generated: &[Vec<u32>],
    cfg: LmConfig,
) -> Result<f64> {
    let mut lm = train_lm(reference, cfg)?;
    perplexity(&mut lm, generated)
}

/// Sample coverage: an LM trained on the generated sentences prices the
/// held-out test corpus — collapse onto a few sentences makes real text
/// look wildly surprising.
pub fn reverse_perplexity(
    generated: &[Vec<u32>],
    test_corpus: &[Vec<u32>],
    cfg: LmConfig,
) -> Result<f64> {
    let mut lm = train_lm(generated, cfg)?;
    perplexity(&mut lm, test_corpus)
}

// ── Tests ───────────────────────────────────────────────────────────────
