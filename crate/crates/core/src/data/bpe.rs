//! Byte-pair-encoding subword tokenizer.
//!
//! Training greedily merges the most frequent adjacent symbol pair (frequency
//! ties broken by the lexicographically smaller pair) until the vocabulary
//! reaches the requested size.  Encoding replays the merge list in order, so
//! held-out text segments exactly as training-time text did.
//!
//! Words are whitespace-separated; each word is split into characters followed
//! by an end-of-word marker symbol.  Four ids are reserved: pad, start, end,
//! unk.  The model serializes to a line-oriented text file that round-trips
//! bit-exactly.

use std::collections::HashMap;
use std::fmt::Write as _;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Padding id (fills the tail of fixed-length sequences).
pub const PAD: u32 = 0;
/// Start-of-sequence id (decoder input shift).
pub const START: u32 = 1;
/// End-of-sequence id.
pub const END: u32 = 2;
/// Unknown-symbol id.
pub const UNK: u32 = 3;
/// Number of reserved ids.
pub const N_RESERVED: u32 = 4;

/// Marker appended to every word so merges can learn word-final units.
pub const END_OF_WORD: &str = "</w>";

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

/// A trained BPE model: base symbols, ordered merges, and the token↔id maps.
#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    /// Sorted base symbols (single characters plus the end-of-word marker).
    base: Vec<String>,
    /// Merges in application order.
    merges: Vec<(String, String)>,
    /// Token string → id.  Reserved ids 0..4 are not present here.
    token_to_id: HashMap<String, u32>,
    /// id → token string, indexed from 0; reserved slots hold display names.
    id_to_token: Vec<String>,
}

impl BpeModel {
    fn build_maps(base: &[String], merges: &[(String, String)]) -> (HashMap<String, u32>, Vec<String>) {
        let mut token_to_id = HashMap::new();
        let mut id_to_token = vec![
            "<pad>".to_string(),
            "<s>".to_string(),
            "</s>".to_string(),
            "<unk>".to_string(),
        ];
        for tok in base {
            let id = id_to_token.len() as u32;
            token_to_id.insert(tok.clone(), id);
            id_to_token.push(tok.clone());
        }
        for (l, r) in merges {
            let joined = format!("{l}{r}");
            if !token_to_id.contains_key(&joined) {
                let id = id_to_token.len() as u32;
                token_to_id.insert(joined.clone(), id);
                id_to_token.push(joined);
            }
        }
        (token_to_id, id_to_token)
    }

    fn from_parts(base: Vec<String>, merges: Vec<(String, String)>) -> BpeModel {
        let (token_to_id, id_to_token) = Self::build_maps(&base, &merges);
        BpeModel { base, merges, token_to_id, id_to_token }
    }

    /// Total number of ids, reserved ids included.
    pub fn vocab_size(&self) -> usize {
        self.id_to_token.len()
    }

    /// Number of merges in the model.
    pub fn n_merges(&self) -> usize {
        self.merges.len()
    }

    /// The merge list in application order.
    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// The token string for an id, or `None` if out of range.
    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(|s| s.as_str())
    }

    /// Splits a word into base symbols and replays every merge in order.
    fn segment_word(&self, word: &str) -> Vec<String> {
        let mut syms: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        syms.push(END_OF_WORD.to_string());
        for (l, r) in &self.merges {
            apply_merge(&mut syms, l, r);
        }
        syms
    }

    /// Encodes one line of text to token ids (no start/end/pad added).
    ///
    /// Symbols outside the vocabulary map to [`UNK`].
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut cache: HashMap<&str, Vec<u32>> = HashMap::new();
        self.encode_cached(text, &mut cache)
    }

    fn encode_cached<'a>(&self, text: &'a str, cache: &mut HashMap<&'a str, Vec<u32>>) -> Vec<u32> {
        let mut ids = Vec::new();
        for word in text.split_whitespace() {
            if let Some(hit) = cache.get(word) {
                ids.extend_from_slice(hit);
                continue;
            }
            let word_ids: Vec<u32> = self
                .segment_word(word)
                .iter()
                .map(|s| self.token_to_id.get(s).copied().unwrap_or(UNK))
                .collect();
            ids.extend_from_slice(&word_ids);
            cache.insert(word, word_ids);
        }
        ids
    }

    /// Encodes many lines, sharing a per-word segmentation cache.
    pub fn encode_corpus(&self, lines: &[String]) -> Vec<Vec<u32>> {
        let mut cache: HashMap<&str, Vec<u32>> = HashMap::new();
        lines.iter().map(|l| self.encode_cached(l, &mut cache)).collect()
    }

    /// Decodes ids back to text.  Reserved ids are dropped; end-of-word
    /// markers become spaces.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id < N_RESERVED {
                continue;
            }
            match self.id_to_token.get(id as usize) {
                Some(tok) => out.push_str(tok),
                None => continue,
            }
        }
        let joined = out.replace(END_OF_WORD, " ");
        joined.trim_end().to_string()
    }

    // -- serialization ------------------------------------------------------

    /// Renders the model to its line-oriented text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bpe v1");
        let _ = writeln!(s, "base {}", self.base.len());
        for tok in &self.base {
            let _ = writeln!(s, "{tok}");
        }
        let _ = writeln!(s, "merges {}", self.merges.len());
        for (l, r) in &self.merges {
            let _ = writeln!(s, "{l}\t{r}");
        }
        s
    }

    /// Parses the line-oriented text form produced by [`BpeModel::to_text`].
    pub fn from_text(text: &str) -> Result<BpeModel> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header != "bpe v1" {
            return Err(Error::Input(format!("not a bpe model file (header {header:?})")));
        }
        let n_base = parse_count(lines.next(), "base")?;
        let mut base = Vec::with_capacity(n_base);
        for i in 0..n_base {
            match lines.next() {
                Some(l) => base.push(l.to_string()),
                None => return Err(Error::Input(format!("bpe model truncated in base list at {i}"))),
            }
        }
        let n_merges = parse_count(lines.next(), "merges")?;
        let mut merges = Vec::with_capacity(n_merges);
        for i in 0..n_merges {
            let line = lines
                .next()
                .ok_or_else(|| Error::Input(format!("bpe model truncated in merge list at {i}")))?;
            let (l, r) = line
                .split_once('\t')
                .ok_or_else(|| Error::Input(format!("malformed merge line {i}: {line:?}")))?;
            merges.push((l.to_string(), r.to_string()));
        }
        Ok(BpeModel::from_parts(base, merges))
    }

    /// Writes the model to a file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Reads a model from a file.
    pub fn load(path: &std::path::Path) -> Result<BpeModel> {
        let text = std::fs::read_to_string(path)?;
        BpeModel::from_text(&text)
    }
}

fn parse_count(line: Option<&str>, key: &str) -> Result<usize> {
    let line = line.ok_or_else(|| Error::Input(format!("bpe model missing `{key}` line")))?;
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::Input(format!("expected `{key} <n>`, got {line:?}")))?;
    rest.parse::<usize>()
        .map_err(|_| Error::Input(format!("bad count in `{key}` line: {line:?}")))
}

/// Replaces every adjacent `(l, r)` in `syms` by their concatenation,
/// scanning left to right (a merged symbol is not reconsidered as a left
/// operand in the same pass).
fn apply_merge(syms: &mut Vec<String>, l: &str, r: &str) {
    let mut i = 0;
    let mut out: Vec<String> = Vec::with_capacity(syms.len());
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
            out.push(format!("{l}{r}"));
            i += 2;
        } else {
            out.push(std::mem::take(&mut syms[i]));
            i += 1;
        }
    }
    *syms = out;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

/// Trains a BPE model on whitespace-tokenized sentences.
///
/// `target_vocab` counts reserved ids, base symbols, and merged tokens.
/// Merging stops when the vocabulary reaches `target_vocab` or no adjacent
/// pair remains.
pub fn train_bpe(corpus: &[String], target_vocab: usize) -> Result<BpeModel> {
    // Count distinct words (first-occurrence order kept so training is
    // deterministic without relying on hash order anywhere).
    let mut word_freq: IndexMap<String, u64> = IndexMap::new();
    for line in corpus {
        for word in line.split_whitespace() {
            *word_freq.entry(word.to_string()).or_insert(0) += 1;
        }
    }
    if word_freq.is_empty() {
        return Err(Error::Input("cannot train BPE on an empty corpus".into()));
    }

    let mut base: Vec<String> = {
        let mut set: std::collections::BTreeSet<String> = word_freq
            .keys()
            .flat_map(|w| w.chars().map(|c| c.to_string()))
            .collect();
        set.insert(END_OF_WORD.to_string());
        set.into_iter().collect()
    };
    base.sort();
    let floor = N_RESERVED as usize + base.len();
    if target_vocab < floor {
        return Err(Error::Config(format!(
            "target_vocab {target_vocab} is below reserved + base vocabulary ({floor})"
        )));
    }

    // Segment every distinct word into base symbols.
    let mut words: Vec<(Vec<String>, u64)> = word_freq
        .iter()
        .map(|(w, &f)| {
            let mut syms: Vec<String> = w.chars().map(|c| c.to_string()).collect();
            syms.push(END_OF_WORD.to_string());
            (syms, f)
        })
        .collect();

    let mut merges: Vec<(String, String)> = Vec::new();
    let mut vocab_now = floor;
    while vocab_now < target_vocab {
        // Count all adjacent pairs, weighted by word frequency.
        let mut pair_count: HashMap<(&str, &str), u64> = HashMap::new();
        for (syms, f) in &words {
            for pair in syms.windows(2) {
                *pair_count.entry((pair[0].as_str(), pair[1].as_str())).or_insert(0) += f;
            }
        }
        // Highest count wins; ties go to the lexicographically smaller pair.
        let best = pair_count
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let Some(((l, r), _)) = best else { break };
        let (l, r) = (l.to_string(), r.to_string());
        let joined = format!("{l}{r}");
        for (syms, _) in &mut words {
            apply_merge(syms, &l, &r);
        }
        let is_new = !base.contains(&joined)
            && !merges.iter().any(|(a, b)| format!("{a}{b}") == joined);
        merges.push((l, r));
        if is_new {
            vocab_now += 1;
        }
    }

    Ok(BpeModel::from_parts(base, merges))
}

// ---------------------------------------------------------------------------
