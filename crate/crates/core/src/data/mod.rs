//! Corpus handling: tokenization, fixed-length sequences, input noising,
//! and shuffled mini-batches.

mod bpe;
mod synth;

pub use bpe::{train_bpe, BpeModel, END, END_OF_WORD, N_RESERVED, PAD, START, UNK};
pub use synth::{lexicon, synthesize_sentences};

use crate::error::{Error, Result};
use crate::rng::Rng;

// ---------------------------------------------------------------------------
// fixed-length sequences
// ---------------------------------------------------------------------------

/// A sentence as a fixed-length array of token ids.
///
/// `ids` always has length `t`; positions `length..` hold [`PAD`].  Start and
/// end markers are *not* stored — training code adds them when building
/// decoder inputs and targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    ids: Vec<u32>,
    length: usize,
}

impl TokenSequence {
    /// Builds a sequence from unpadded content ids, truncating to `t` if
    /// longer.  Empty content is rejected.
    pub fn new(content: &[u32], t: usize) -> Result<TokenSequence> {
        if content.is_empty() {
            return Err(Error::Input("empty token sequence".into()));
        }
        if t == 0 {
            return Err(Error::Config("sequence length t must be ≥ 1".into()));
        }
        let length = content.len().min(t);
        let mut ids = vec![PAD; t];
        ids[..length].copy_from_slice(&content[..length]);
        Ok(TokenSequence { ids, length })
    }

    /// The padded id array (length `t`).
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Number of real (non-pad) tokens.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Fixed sequence length `t`.
    pub fn t(&self) -> usize {
        self.ids.len()
    }

    /// The real tokens, pad excluded.
    pub fn content(&self) -> &[u32] {
        &self.ids[..self.length]
    }

    /// 1.0 over real positions, 0.0 over pad.
    pub fn mask(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ids.len()];
        for slot in m.iter_mut().take(self.length) {
            *slot = 1.0;
        }
        m
    }
}

/// Replaces real tokens by unk with probability `p_drop`, then displaces each
/// real token by an offset drawn uniformly from `[-max_shift, max_shift]`,
/// reordering stably by displaced position.  Pad positions never move.
///
/// With `p_drop == 0` no drop randomness is consumed, and with
/// `max_shift == 0` no shift randomness is consumed, so disabling a stage
/// leaves the caller's random stream untouched.
pub fn apply_word_noise(
    seq: &TokenSequence,
    p_drop: f64,
    max_shift: usize,
    rng: &mut Rng,
) -> Result<TokenSequence> {
    if !(0.0..=1.0).contains(&p_drop) {
        return Err(Error::Config(format!("p_drop must be in [0, 1], got {p_drop}")));
    }
    let n = seq.length;
    let mut content: Vec<u32> = seq.content().to_vec();
    if p_drop > 0.0 {
        for id in content.iter_mut() {
            if rng.bernoulli(p_drop) {
                *id = UNK;
            }
        }
    }
    if max_shift > 0 {
        let k = max_shift as i64;
        let mut keyed: Vec<(i64, usize)> = (0..n)
            .map(|i| (i as i64 + rng.int_in(-k, k), i))
            .collect();
        keyed.sort_by_key(|&(pos, orig)| (pos, orig));
        content = keyed.iter().map(|&(_, orig)| content[orig]).collect();
    }
    TokenSequence::new(&content, seq.t())
}

// ---------------------------------------------------------------------------
// corpus filtering
// ---------------------------------------------------------------------------

/// Keeps sentences whose BPE encoding (start/end excluded) has at most
/// `max_tokens` ids.
pub fn filter_corpus(sentences: &[String], model: &BpeModel, max_tokens: usize) -> Vec<String> {
    let encoded = model.encode_corpus(sentences);
    sentences
        .iter()
        .zip(encoded.iter())
        .filter(|(_, ids)| !ids.is_empty() && ids.len() <= max_tokens)
        .map(|(s, _)| s.clone())
        .collect()
}

/// Encodes sentences and wraps them into fixed-length sequences, dropping
/// those longer than `t` or empty.
pub fn corpus_to_sequences(
    sentences: &[String],
    model: &BpeModel,
    t: usize,
) -> Result<Vec<TokenSequence>> {
    let encoded = model.encode_corpus(sentences);
    let mut out = Vec::new();
    for ids in encoded {
        if !ids.is_empty() && ids.len() <= t {
            out.push(TokenSequence::new(&ids, t)?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

/// A mini-batch of sequences, ids flattened row-major to `[n, t]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// Number of sentences in the batch.
    pub n: usize,
    /// Fixed sequence length.
    pub t: usize,
    /// Flattened ids, row-major `[n, t]`.
    pub ids: Vec<u32>,
    /// Real-token count per sentence.
    pub lengths: Vec<usize>,
}

impl Batch {
    /// Assembles a batch from sequences, which must share the same `t`.
    pub fn from_sequences(seqs: &[&TokenSequence]) -> Result<Batch> {
        let first = seqs.first().ok_or_else(|| Error::Input("empty batch".into()))?;
        let t = first.t();
        let mut ids = Vec::with_capacity(seqs.len() * t);
        let mut lengths = Vec::with_capacity(seqs.len());
        for seq in seqs {
            if seq.t() != t {
                return Err(Error::Input(format!(
                    "mixed sequence lengths in batch: {} vs {t}",
                    seq.t()
                )));
            }
            ids.extend_from_slice(seq.ids());
            lengths.push(seq.length());
        }
        Ok(Batch { n: seqs.len(), t, ids, lengths })
    }

    /// Row `i` as an id slice.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.ids[i * self.t..(i + 1) * self.t]
    }

    /// 1.0 over real positions, 0.0 over pad, flattened `[n, t]`.
    pub fn mask(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n * self.t];
        for (i, &len) in self.lengths.iter().enumerate() {
            for slot in m.iter_mut().skip(i * self.t).take(len) {
                *slot = 1.0;
            }
        }
        m
    }
}

/// Shuffles the corpus with the caller's rng and splits it into batches of
/// `batch_size` (final partial batch kept).
pub fn make_batches(
    corpus: &[TokenSequence],
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be ≥ 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Input("cannot batch an empty corpus".into()));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size)
        .map(|chunk| {
            let refs: Vec<&TokenSequence> = chunk.iter().map(|&i| &corpus[i]).collect();
            Batch::from_sequences(&refs)
        })
        .collect()
}

// ---------------------------------------------------------------------------
