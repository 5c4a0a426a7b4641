//! Objective evaluation of a generated corpus: n-gram overlap with a
//! reference set (BLEU), repetition within the set (Self-BLEU), and two
//! perplexities from a small LSTM language model — forward (how plausible
//! the generated sentences look to a model of the real data) and reverse
//! (how well a model of the generated sentences explains held-out real
//! data, which collapses badly when generation mode-collapses).

mod bleu;
mod lm;

pub use bleu::{bleu, self_bleu, NGramCounts, MAX_ORDER};
pub use lm::{
    forward_perplexity, perplexity, reverse_perplexity, train_lm, LanguageModel, LmConfig,
    TokenScorer,
};

use crate::error::Result;
use std::fmt::Write as _;

/// The full scorecard for one generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    /// BLEU-1..5 against the reference test set.
    pub bleu: [f64; 5],
    /// Self-BLEU-1..5 within the generated set.
    pub self_bleu: [f64; 5],
    pub forward_ppl: f64,
    pub reverse_ppl: f64,
}

impl MetricReport {
    /// Computes every metric: BLEU against `reference_test`, Self-BLEU
    /// within `generated`, forward perplexity from a model fitted to
    /// `reference_train`, reverse perplexity from a model fitted to
    /// `generated` and evaluated on `reference_test`.
    pub fn compute(
        generated: &[Vec<u32>],
        reference_train: &[Vec<u32>],
        reference_test: &[Vec<u32>],
        lm_cfg: &LmConfig,
    ) -> Result<MetricReport> {
        let mut b = [0.0; 5];
        let mut sb = [0.0; 5];
        for n in 1..=5 {
            b[n - 1] = bleu(generated, reference_test, n)?;
            sb[n - 1] = self_bleu(generated, n)?;
        }
        let forward_ppl = forward_perplexity(reference_train, generated, lm_cfg.clone())?;
        let reverse_ppl = reverse_perplexity(generated, reference_test, lm_cfg.clone())?;
        Ok(MetricReport {
            bleu: b,
            self_bleu: sb,
            forward_ppl,
            reverse_ppl,
        })
    }

    fn rows(&self) -> Vec<(String, f64)> {
        let mut rows = Vec::with_capacity(12);
        for n in 0..5 {
            rows.push((format!("BLEU-{}", n + 1), self.bleu[n]));
        }
        for n in 0..5 {
            rows.push((format!("Self BLEU-{}", n + 1), self.self_bleu[n]));
        }
        rows.push(("Perplexity".to_string(), self.forward_ppl));
        rows.push(("Reverse perplexity".to_string(), self.reverse_ppl));
        rows
    }

    /// `metric,value` lines, one per row.
    pub fn csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in self.rows() {
            let _ = writeln!(out, "{name},{v:.6}");
        }
        out
    }

    /// Aligned two-column table for terminal output.
    pub fn table(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, v) in rows {
            let _ = writeln!(out, "{name:<width$}  {v:>12.6}");
        }
        out
    }
}
