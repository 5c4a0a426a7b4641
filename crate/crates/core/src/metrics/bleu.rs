//! Corpus BLEU and leave-one-out Self-BLEU over token-id sentences.
//!
//! Scores are corpus-level: clipped n-gram matches and n-gram slots are
//! summed over all hypotheses first, then turned into per-order
//! precisions, combined by a geometric mean over orders 1..max_n, and
//! multiplied by the brevity penalty `exp(1 − r/c)` when the total
//! hypothesis length `c` falls short of the effective reference length
//! `r` (per hypothesis: the reference length closest to its own, ties
//! going to the shorter). A precision that would be zero is floored at
//! 1e-9 so tiny corpora still produce defined scores.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Highest n-gram order the scorer supports.
pub const MAX_ORDER: usize = 5;

/// Per-order n-gram counts for one sentence. Order `n` lives at index
/// `n − 1`; keys are the token windows themselves.
pub struct NGramCounts {
    orders: Vec<HashMap<Vec<u32>, usize>>,
}

impl NGramCounts {
    pub fn from_sentence(ids: &[u32], max_n: usize) -> NGramCounts {
        let mut orders = Vec::with_capacity(max_n);
        for n in 1..=max_n {
            let mut map: HashMap<Vec<u32>, usize> = HashMap::new();
            if ids.len() >= n {
                for w in ids.windows(n) {
                    *map.entry(w.to_vec()).or_insert(0) += 1;
                }
            }
            orders.push(map);
        }
        NGramCounts { orders }
    }

    /// Count of `gram` (order inferred from its length; 0 when absent).
    pub fn count(&self, gram: &[u32]) -> usize {
        self.orders
            .get(gram.len().saturating_sub(1))
            .and_then(|m| m.get(gram))
            .copied()
            .unwrap_or(0)
    }

    /// All grams of order `n` with their counts.
    pub fn order(&self, n: usize) -> &HashMap<Vec<u32>, usize> {
        &self.orders[n - 1]
    }
}

fn check_max_n(max_n: usize) -> Result<()> {
    if max_n == 0 || max_n > MAX_ORDER {
        return Err(Error::Input(format!(
            "n-gram order {max_n} outside 1..={MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Effective reference length for one hypothesis: the reference length
/// with the smallest absolute gap, ties resolved toward the shorter.
fn effective_ref_len(hyp_len: usize, ref_lens: &[usize]) -> usize {
    let mut best = ref_lens[0];
    for &l in &ref_lens[1..] {
        let (d_new, d_best) = (l.abs_diff(hyp_len), best.abs_diff(hyp_len));
        if d_new < d_best || (d_new == d_best && l < best) {
            best = l;
        }
    }
    best
}

/// Numerators (clipped matches) and denominators (n-gram slots) that one
/// hypothesis adds to each order, clipping by `limit(gram)` — the largest
/// count any admissible reference gives that gram.
fn accumulate_orders(
    hyp: &[u32],
    max_n: usize,
    mut limit: impl FnMut(&[u32]) -> usize,
    num: &mut [usize],
    den: &mut [usize],
) {
    let counts = NGramCounts::from_sentence(hyp, max_n);
    for n in 1..=max_n {
        for (gram, &c) in counts.order(n) {
            num[n - 1] += c.min(limit(gram));
        }
        den[n - 1] += (hyp.len() + 1).saturating_sub(n);
    }
}

/// Precisions → final score: geometric mean over orders, floored at 1e-9,
/// times the brevity penalty.
fn combine(num: &[usize], den: &[usize], c: usize, r: usize, max_n: usize) -> f64 {
    let mut log_sum = 0.0;
    for n in 0..max_n {
        let p = if num[n] == 0 || den[n] == 0 {
            1e-9
        } else {
            num[n] as f64 / den[n] as f64
        };
        log_sum += p.ln();
    }
    let geo = (log_sum / max_n as f64).exp();
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    bp * geo
}

/// Corpus BLEU of `hypotheses` against a shared reference set.
pub fn bleu(hypotheses: &[Vec<u32>], references: &[Vec<u32>], max_n: usize) -> Result<f64> {
    check_max_n(max_n)?;
    if hypotheses.is_empty() {
        return Err(Error::Input("empty hypothesis set".into()));
    }
    if references.is_empty() {
        return Err(Error::Input("empty reference set".into()));
    }
    // The clip limit for a gram is its best count over all references.
    let mut max_counts: Vec<HashMap<Vec<u32>, usize>> = vec![HashMap::new(); max_n];
    for r in references {
        let counts = NGramCounts::from_sentence(r, max_n);
        for n in 1..=max_n {
            for (gram, &c) in counts.order(n) {
                let slot = max_counts[n - 1].entry(gram.clone()).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
    }
    let ref_lens: Vec<usize> = references.iter().map(|r| r.len()).collect();

    let mut num = vec![0usize; max_n];
    let mut den = vec![0usize; max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for hyp in hypotheses {
        accumulate_orders(
            hyp,
            max_n,
            |gram| {
                max_counts[gram.len() - 1]
                    .get(gram)
                    .copied()
                    .unwrap_or(0)
            },
            &mut num,
            &mut den,
        );
        c += hyp.len();
        r += effective_ref_len(hyp.len(), &ref_lens);
    }
    if c == 0 {
        return Err(Error::Input("hypotheses contain no tokens".into()));
    }
    Ok(combine(&num, &den, c, r, max_n))
}

/// Mean over sentences of BLEU(sentence, all the others): how much the
/// set repeats itself. Needs at least two sentences.
///
/// Works from a single pass of per-sentence counts: for each gram the two
/// largest per-sentence counts (with the owner of the largest) are enough
/// to answer "best count among the *other* sentences" for every
/// hypothesis, so the whole leave-one-out sweep costs one corpus scan
/// instead of rebuilding the reference statistics per sentence.
pub fn self_bleu(sentences: &[Vec<u32>], max_n: usize) -> Result<f64> {
    check_max_n(max_n)?;
    if sentences.len() < 2 {
        return Err(Error::Input(format!(
            "self-similarity needs at least 2 sentences, got {}",
            sentences.len()
        )));
    }
    // gram → (best count, owner of best, second-best count).
    let mut top2: Vec<HashMap<Vec<u32>, (usize, usize, usize)>> = vec![HashMap::new(); max_n];
    for (i, s) in sentences.iter().enumerate() {
        let counts = NGramCounts::from_sentence(s, max_n);
        for n in 1..=max_n {
            for (gram, &c) in counts.order(n) {
                let e = top2[n - 1].entry(gram.clone()).or_insert((0, usize::MAX, 0));
                if c > e.0 {
                    *e = (c, i, e.0);
                } else if c > e.2 {
                    e.2 = c;
                }
            }
        }
    }
    let lens: Vec<usize> = sentences.iter().map(|s| s.len()).collect();

    let mut total = 0.0;
    for (i, s) in sentences.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::Input("empty sentence in self-similarity set".into()));
        }
        let mut num = vec![0usize; max_n];
        let mut den = vec![0usize; max_n];
        accumulate_orders(
            s,
            max_n,
            |gram| match top2[gram.len() - 1].get(gram) {
                Some(&(_, owner, second)) if owner == i => second,
                Some(&(best, _, _)) => best,
                None => 0,
            },
            &mut num,
            &mut den,
        );
        let c = s.len();
        let mut r = usize::MAX;
        let mut r_gap = usize::MAX;
        for (j, &l) in lens.iter().enumerate() {
            if j == i {
                continue;
            }
            let gap = l.abs_diff(c);
            if gap < r_gap || (gap == r_gap && l < r) {
                r = l;
                r_gap = gap;
            }
        }
        total += combine(&num, &den, c, r, max_n);
    }
    Ok(total / sentences.len() as f64)
}

// ── Tests ───────────────────────────────────────────────────────────────
