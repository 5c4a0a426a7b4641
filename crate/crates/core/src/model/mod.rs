//! The networks: a transformer autoencoder over fixed-size sentence codes
//! plus an adversarial pair that shapes the code distribution.
//!
//! Everything lives in one [`ParameterStore`] under four name families:
//!
//! * `embed`, `enc.*` — token embedding and the encoder stack. A sentence
//!   becomes a code by running layer-normed transformer blocks over its
//!   (embedded + positional) tokens, mean-pooling the non-pad positions,
//!   and projecting to `d_code`. In sphere-prior mode the code is then
//!   L2-normalized onto the unit sphere.
//! * `dec.*`, `out_proj` — the decoder stack. The code enters as a
//!   length-1 cross-attention memory; tokens are predicted causally from
//!   start-shifted inputs and projected back to vocabulary logits.
//! * `disc.*` — the code discriminator. A code is projected to `d_model`,
//!   broadcast to a length-`max_len` sequence, and run through
//!   spectral-only blocks (positions re-injected before every block since
//!   the broadcast rows start identical); the pooled output maps to one
//!   scalar. Sphere-prior mode reads it through a sigmoid, code-GAN mode
//!   uses the raw value as a critic.
//! * `gen.*` — code-GAN mode only. Same skeleton as the discriminator but
//!   from a noise vector to a fake code, unconstrained.
//!
//! The adversarial stacks carry no layer-norm parameters at all; every
//! rank-2 weight in them is divided by its estimated largest singular
//! value at bind time, which is what keeps the critic Lipschitz-bounded.

use crate::data::{Batch, END, PAD, START};
use crate::error::{Error, Result};
use crate::nn::pe::positional_constant;
use crate::nn::{
    decoder_block, encoder_block, linear, register_decoder_block, register_encoder_block,
    register_linear, ArchitectureConfig, AttnMask, Mode, NormMode,
};
use crate::params::{BoundParams, ParameterStore};
use crate::rng::Rng;
use crate::tensor::{Graph, TensorId};

// ── Configuration ───────────────────────────────────────────────────────

/// Which adversarial game regularizes the code space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GanMode {
    /// Codes are L2-normalized; the discriminator separates them from a
    /// uniform unit-sphere prior (probability game, no learned generator).
    Aae,
    /// Codes are unconstrained; a learned generator maps noise to fake
    /// codes and a critic scores real vs. fake (value game).
    Arae,
}

/// Full model shape: transformer geometry plus code-space sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub arch: ArchitectureConfig,
    pub vocab_size: usize,
    /// Sentence code width.
    pub d_code: usize,
    /// Generator input width (code-GAN mode).
    pub d_noise: usize,
    pub gan_mode: GanMode,
}

impl ModelConfig {
    pub fn new(arch: ArchitectureConfig, vocab_size: usize, gan_mode: GanMode) -> Self {
        ModelConfig {
            arch,
            vocab_size,
            d_code: 128,
            d_noise: 100,
            gan_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.vocab_size <= crate::data::N_RESERVED as usize {
            return Err(Error::Config(format!(
                "vocab_size {} leaves no room for real tokens",
                self.vocab_size
            )));
        }
        if self.d_code == 0 || self.d_noise == 0 {
            return Err(Error::Config("d_code and d_noise must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// How `decode_sample` picks each next token.
#[derive(Clone, Copy, Debug)]
pub enum Decoding {
    /// Highest logit; exact ties go to the lowest token id.
    Greedy,
    /// Sample from `softmax(logits / τ)`.
    Temperature(f64),
}

// ── The model ───────────────────────────────────────────────────────────

pub struct Model {
    pub cfg: ModelConfig,
}

impl Model {
    /// Create all parameters and return the model alongside its store.
    ///
    /// Registration order is fixed (embedding, encoder, code heads,
    /// decoder, output projection, discriminator, then the generator in
    /// code-GAN mode) so a seed pins every initial weight.
    pub fn register(cfg: ModelConfig, rng: &mut Rng) -> Result<(Model, ParameterStore)> {
        cfg.validate()?;
        let a = cfg.arch.clone();
        let d = a.d_model;
        let mut store = ParameterStore::new();

        // Embedding entries ~ N(0, 1/d); lookups are scaled by √d so token
        // vectors land at unit scale, comparable to the position signal.
        let mut emb = vec![0.0; cfg.vocab_size * d];
        rng.fill_normal(&mut emb);
        let s = 1.0 / (d as f64).sqrt();
        for v in &mut emb {
            *v *= s;
        }
        store.insert("embed", emb, &[cfg.vocab_size, d])?;

        for i in 0..a.n_blocks_ae {
            register_encoder_block(&mut store, &format!("enc.b{i}"), &a, NormMode::LayerNorm, rng)?;
        }
        register_linear(&mut store, "enc.pool", d, cfg.d_code, false, rng)?;
        register_linear(&mut store, "dec.code", cfg.d_code, d, false, rng)?;
        for i in 0..a.n_blocks_ae {
            register_decoder_block(&mut store, &format!("dec.b{i}"), &a, rng)?;
        }
        register_linear(&mut store, "out_proj", d, cfg.vocab_size, false, rng)?;

        register_linear(&mut store, "disc.inp", cfg.d_code, d, true, rng)?;
        for i in 0..a.n_blocks_gan {
            register_encoder_block(
                &mut store,
                &format!("disc.b{i}"),
                &a,
                NormMode::SpectralOnly,
                rng,
            )?;
        }
        register_linear(&mut store, "disc.out", d, 1, true, rng)?;

        if cfg.gan_mode == GanMode::Arae {
            register_linear(&mut store, "gen.up", cfg.d_noise, d, true, rng)?;
            for i in 0..a.n_blocks_gan {
                register_encoder_block(
                    &mut store,
                    &format!("gen.b{i}"),
                    &a,
                    NormMode::SpectralOnly,
                    rng,
                )?;
            }
            register_linear(&mut store, "gen.out", d, cfg.d_code, true, rng)?;
        }

        // Spectral states default to a 1-step budget; honor the config.
        for (_, p) in store.iter_mut() {
            if let Some(state) = p.spec_norm.as_mut() {
                state.n_power_iters = cfg.arch.n_power_iters;
            }
        }

        Ok((Model { cfg }, store))
    }

    // ── Shared pieces ───────────────────────────────────────────────────

    /// Embedded ids (scaled by √d) plus the position table, `[n*t, d]`.
    fn embedded(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        ids: &[u32],
        n: usize,
        t: usize,
    ) -> Result<TensorId> {
        let d = self.cfg.arch.d_model;
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let e = g.gather_rows(bound.id("embed"), &idx)?;
        let e = g.scale(e, (d as f64).sqrt());
        let pe = positional_constant(g, n, t, d)?;
        g.add(e, pe)
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.n == 0 || batch.lengths.len() != batch.n || batch.ids.len() != batch.n * batch.t {
            return Err(Error::Input("malformed batch".into()));
        }
        for (i, &len) in batch.lengths.iter().enumerate() {
            if len == 0 {
                return Err(Error::Input(format!("sentence {i} is empty")));
            }
            if len > batch.t {
                return Err(Error::Input(format!(
                    "sentence {i} length {len} exceeds t={}",
                    batch.t
                )));
            }
        }
        Ok(())
    }

    /// `[n*reps, n]` selector: row `i*reps+j` copies input row `i`.
    fn broadcast_selector(g: &mut Graph, n: usize, reps: usize) -> Result<TensorId> {
        let mut m = vec![0.0; n * reps * n];
        for i in 0..n {
            for j in 0..reps {
                m[(i * reps + j) * n + i] = 1.0;
            }
        }
        g.constant(m, &[n * reps, n])
    }

    /// `[n, n*t]` selector averaging each sentence's rows with the given
    /// per-position weights (`weights[i][j]` for row `i*t+j`).
    fn pool_selector(g: &mut Graph, n: usize, t: usize, weight: impl Fn(usize, usize) -> f64) -> Result<TensorId> {
        let mut m = vec![0.0; n * n * t];
        for i in 0..n {
            for j in 0..t {
                m[i * n * t + i * t + j] = weight(i, j);
            }
        }
        g.constant(m, &[n, n * t])
    }

    /// Spectral-only block stack shared by generator and discriminator.
    /// The input rows within a sentence are identical broadcasts, so the
    /// position table is added again before every block to keep positions
    /// distinguishable as depth grows.
    fn adversarial_stack(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        net: &str,
        mut x: TensorId,
        n: usize,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        let a = &self.cfg.arch;
        let t = a.max_len;
        for i in 0..a.n_blocks_gan {
            let pe = positional_constant(g, n, t, a.d_model)?;
            x = g.add(x, pe)?;
            x = encoder_block(
                g,
                bound,
                &format!("{net}.b{i}"),
                a,
                NormMode::SpectralOnly,
                x,
                n,
                t,
                &AttnMask::Full,
                mode,
                rng,
            )?;
        }
        Ok(x)
    }

    // ── Encoder ─────────────────────────────────────────────────────────

    /// Sentences → codes `[n, d_code]`.
    ///
    /// Pad positions are excluded from attention keys and from the mean
    /// pool, so a code depends only on the real tokens: rewriting the pad
    /// region leaves it bit-identical. Sphere-prior mode L2-normalizes
    /// each code row.
    pub fn encode(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        batch: &Batch,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        self.check_batch(batch)?;
        let a = &self.cfg.arch;
        let (n, t) = (batch.n, batch.t);
        let mask: Vec<Vec<bool>> = batch
            .lengths
            .iter()
            .map(|&len| (0..t).map(|j| j < len).collect())
            .collect();
        let mut x = self.embedded(g, bound, &batch.ids, n, t)?;
        for i in 0..a.n_blocks_ae {
            x = encoder_block(
                g,
                bound,
                &format!("enc.b{i}"),
                a,
                NormMode::LayerNorm,
                x,
                n,
                t,
                &AttnMask::KeyPadding(&mask),
                mode,
                rng,
            )?;
        }
        let sel = Self::pool_selector(g, n, t, |i, j| {
            if j < batch.lengths[i] {
                1.0 / batch.lengths[i] as f64
            } else {
                0.0
            }
        })?;
        let pooled = g.matmul(sel, x)?;
        let code = linear(g, bound, "enc.pool", pooled)?;
        match self.cfg.gan_mode {
            GanMode::Aae => Self::unit_rows(g, code, n),
            GanMode::Arae => Ok(code),
        }
    }

    /// Row-wise `x / ‖x‖₂` (tiny floor keeps the gradient finite).
    fn unit_rows(g: &mut Graph, x: TensorId, n: usize) -> Result<TensorId> {
        let sq = g.mul(x, x)?;
        let ss = g.sum_axis(sq, 1)?;
        let ss = g.add_scalar(ss, 1e-12);
        let norm = g.sqrt(ss)?;
        let ones = g.constant(vec![1.0; n], &[n])?;
        let inv = g.div(ones, norm)?;
        g.mul_rows(x, inv)
    }

    /// Codes for a batch as plain numbers: an evaluation-mode forward on a
    /// throwaway graph, used where downstream losses must not reach the
    /// encoder (stop-gradient).
    pub fn encode_detached(&self, store: &mut ParameterStore, batch: &Batch) -> Result<Vec<f64>> {
        let mut g = Graph::inference();
        let bound = store.bind(&mut g, false)?;
        let mut quiet = Rng::from_seed(0); // Eval draws nothing
        let c = self.encode(&mut g, &bound, batch, Mode::Eval, &mut quiet)?;
        Ok(g.data(c).to_vec())
    }

    // ── Decoder ─────────────────────────────────────────────────────────

    /// Teacher-forced logits `[n*t, vocab]` for reconstructing `target`
    /// from `codes` (`[n, d_code]` on the same graph).
    ///
    /// Inputs are the targets shifted right behind a start token; the code
    /// is consumed as a one-position cross-attention memory. Causal
    /// masking makes row `j` a function of input positions `≤ j` only, so
    /// logits at `j` never see target tokens `≥ j+1`... which is exactly
    /// what lets one forward score every position at once.
    pub fn decode_teacher_forced(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        codes: TensorId,
        target: &Batch,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        self.check_batch(target)?;
        let a = &self.cfg.arch;
        let (n, t) = (target.n, target.t);
        let memory = linear(g, bound, "dec.code", codes)?; // [n, d] = length-1 memories
        let mut in_ids = Vec::with_capacity(n * t);
        for i in 0..n {
            in_ids.push(START);
            in_ids.extend_from_slice(&target.ids[i * t..i * t + t - 1]);
        }
        let mut x = self.embedded(g, bound, &in_ids, n, t)?;
        for i in 0..a.n_blocks_ae {
            x = decoder_block(
                g,
                bound,
                &format!("dec.b{i}"),
                a,
                x,
                memory,
                n,
                t,
                1,
                mode,
                rng,
            )?;
        }
        linear(g, bound, "out_proj", x)
    }

    /// Mean cross-entropy per real target token, from teacher-forced
    /// logits. Each sentence is charged for its content tokens plus the
    /// end token when there is room for one; pad positions carry zero
    /// weight.
    pub fn recon_loss_from_logits(
        &self,
        g: &mut Graph,
        logits: TensorId,
        target: &Batch,
    ) -> Result<TensorId> {
        self.check_batch(target)?;
        let (n, t) = (target.n, target.t);
        let mut picks = Vec::with_capacity(n * t);
        let mut weights = vec![0.0; n * t];
        let mut total = 0usize;
        for i in 0..n {
            let len = target.lengths[i];
            for j in 0..t {
                picks.push(if j < len {
                    target.ids[i * t + j] as usize
                } else if j == len {
                    END as usize
                } else {
                    PAD as usize // weight 0 below; any valid id would do
                });
            }
            total += (len + 1).min(t);
        }
        for i in 0..n {
            let scored = (target.lengths[i] + 1).min(t);
            for j in 0..scored {
                weights[i * t + j] = 1.0;
            }
        }
        let inv = 1.0 / total as f64;
        for w in &mut weights {
            *w *= inv;
        }
        let lsm = g.log_softmax(logits, 1)?;
        let picked = g.pick(lsm, &picks)?;
        let nll = g.neg(picked);
        let wc = g.constant(weights, &[n * t])?;
        let weighted = g.mul(nll, wc)?;
        Ok(g.sum_all(weighted))
    }

    /// Encode + teacher-forced decode + cross-entropy in one call.
    /// `input` and `target` may differ (noised inputs reconstructing the
    /// clean sentence); they must agree in batch size.
    pub fn recon_loss(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        input: &Batch,
        target: &Batch,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        if input.n != target.n {
            return Err(Error::Input(format!(
                "input batch n={} vs target n={}",
                input.n, target.n
            )));
        }
        let codes = self.encode(g, bound, input, mode, rng)?;
        let logits = self.decode_teacher_forced(g, bound, codes, target, mode, rng)?;
        self.recon_loss_from_logits(g, logits, target)
    }

    /// Autoregressively decode one code into content token ids.
    ///
    /// Starts from the start token, feeds the grown prefix back each step
    /// (evaluation mode, stored σ, no randomness beyond the sampler), and
    /// stops at the end token or `max_len` tokens. The returned ids carry
    /// no start/end markers.
    pub fn decode_sample(
        &self,
        store: &mut ParameterStore,
        code: &[f64],
        decoding: Decoding,
        rng: &mut Rng,
    ) -> Result<Vec<u32>> {
        if code.len() != self.cfg.d_code {
            return Err(Error::Input(format!(
                "code length {} ≠ d_code {}",
                code.len(),
                self.cfg.d_code
            )));
        }
        if let Decoding::Temperature(tau) = decoding {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::Config(format!("temperature {tau} must be positive")));
            }
        }
        let a = self.cfg.arch.clone();
        let v = self.cfg.vocab_size;
        let mut out: Vec<u32> = Vec::new();
        while out.len() < a.max_len {
            let t_cur = out.len() + 1;
            let mut g = Graph::inference();
            let bound = store.bind(&mut g, false)?;
            let codes = g.constant(code.to_vec(), &[1, self.cfg.d_code])?;
            let memory = linear(&mut g, &bound, "dec.code", codes)?;
            let mut ids = Vec::with_capacity(t_cur);
            ids.push(START);
            ids.extend_from_slice(&out);
            let mut quiet = Rng::from_seed(0);
            let mut x = self.embedded(&mut g, &bound, &ids, 1, t_cur)?;
            for i in 0..a.n_blocks_ae {
                x = decoder_block(
                    &mut g,
                    &bound,
                    &format!("dec.b{i}"),
                    &a,
                    x,
                    memory,
                    1,
                    t_cur,
                    1,
                    Mode::Eval,
                    &mut quiet,
                )?;
            }
            let logits = linear(&mut g, &bound, "out_proj", x)?;
            let row = &g.data(logits)[(t_cur - 1) * v..t_cur * v];
            let next = match decoding {
                Decoding::Greedy => argmax_lowest(row),
                Decoding::Temperature(tau) => sample_softmax(row, tau, rng),
            } as u32;
            if next == END {
                break;
            }
            out.push(next);
        }
        Ok(out)
    }

    // ── Adversarial pair ────────────────────────────────────────────────

    /// Scores `[n]` for codes `[n, d_code]` on the graph. Raw values: the
    /// sphere-prior losses wrap them in softplus forms (sigmoid
    /// probabilities), the code-GAN losses use them directly.
    pub fn discriminate(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        codes: TensorId,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        let n = g.shape(codes)[0];
        let t = self.cfg.arch.max_len;
        let inp = linear(g, bound, "disc.inp", codes)?;
        let sel = Self::broadcast_selector(g, n, t)?;
        let x = g.matmul(sel, inp)?;
        let x = self.adversarial_stack(g, bound, "disc", x, n, mode, rng)?;
        let pool = Self::pool_selector(g, n, t, |_, _| 1.0 / t as f64)?;
        let pooled = g.matmul(pool, x)?;
        let score = linear(g, bound, "disc.out", pooled)?;
        g.reshape(score, &[n])
    }

    /// Noise `[n, d_noise]` (graph tensor) → codes `[n, d_code]`,
    /// unconstrained. Code-GAN mode only.
    pub fn generate_code(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        noise: TensorId,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        if self.cfg.gan_mode != GanMode::Arae {
            return Err(Error::Config(
                "no generator in sphere-prior mode; sample the prior instead".into(),
            ));
        }
        let n = g.shape(noise)[0];
        let t = self.cfg.arch.max_len;
        let up = linear(g, bound, "gen.up", noise)?;
        let sel = Self::broadcast_selector(g, n, t)?;
        let x = g.matmul(sel, up)?;
        let x = self.adversarial_stack(g, bound, "gen", x, n, mode, rng)?;
        let pool = Self::pool_selector(g, n, t, |_, _| 1.0 / t as f64)?;
        let pooled = g.matmul(pool, x)?;
        linear(g, bound, "gen.out", pooled)
    }

    /// Generated codes as plain numbers (evaluation-mode forward on a
    /// throwaway graph): the stop-gradient feed for critic updates.
    pub fn generate_code_detached(
        &self,
        store: &mut ParameterStore,
        noise: &[f64],
    ) -> Result<Vec<f64>> {
        let n = self.noise_rows(noise)?;
        let mut g = Graph::inference();
        let bound = store.bind(&mut g, false)?;
        let mut quiet = Rng::from_seed(0);
        let z = g.constant(noise.to_vec(), &[n, self.cfg.d_noise])?;
        let c = self.generate_code(&mut g, &bound, z, Mode::Eval, &mut quiet)?;
        Ok(g.data(c).to_vec())
    }

    /// Standard normal draws for the generator, `n` rows flattened.
    pub fn sample_noise(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        let mut z = vec![0.0; n * self.cfg.d_noise];
        rng.fill_normal(&mut z);
        z
    }

    /// `n` points uniform on the unit sphere in `d_code` dimensions
    /// (normalized Gaussians), flattened row-major.
    pub fn sample_prior(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        let dc = self.cfg.d_code;
        let mut out = Vec::with_capacity(n * dc);
        let mut row = vec![0.0; dc];
        for _ in 0..n {
            loop {
                rng.fill_normal(&mut row);
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    out.extend(row.iter().map(|v| v / norm));
                    break;
                }
            }
        }
        out
    }

    fn code_rows(&self, codes: &[f64]) -> Result<usize> {
        if codes.is_empty() || codes.len() % self.cfg.d_code != 0 {
            return Err(Error::Input(format!(
                "code buffer of {} values is not a multiple of d_code {}",
                codes.len(),
                self.cfg.d_code
            )));
        }
        Ok(codes.len() / self.cfg.d_code)
    }

    fn noise_rows(&self, noise: &[f64]) -> Result<usize> {
        if noise.is_empty() || noise.len() % self.cfg.d_noise != 0 {
            return Err(Error::Input(format!(
                "noise buffer of {} values is not a multiple of d_noise {}",
                noise.len(),
                self.cfg.d_noise
            )));
        }
        Ok(noise.len() / self.cfg.d_noise)
    }

    // ── Sphere-prior (probability game) losses ──────────────────────────

    /// Discriminator loss on detached code buffers:
    /// `mean −log D(prior) + mean −log(1−D(enc))` in softplus form, with
    /// `D = sigmoid(score)`. Both buffers are plain numbers, so gradients
    /// reach only `disc.*`.
    pub fn aae_disc_loss(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        enc_codes: &[f64],
        prior_codes: &[f64],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        let n_e = self.code_rows(enc_codes)?;
        let n_p = self.code_rows(prior_codes)?;
        let e = g.constant(enc_codes.to_vec(), &[n_e, self.cfg.d_code])?;
        let p = g.constant(prior_codes.to_vec(), &[n_p, self.cfg.d_code])?;
        let s_p = self.discriminate(g, bound, p, mode, rng)?;
        let s_e = self.discriminate(g, bound, e, mode, rng)?;
        // −log σ(s) = softplus(−s); −log(1−σ(s)) = softplus(s)
        let neg_sp = g.neg(s_p);
        let a = g.softplus(neg_sp);
        let a = g.mean_all(a);
        let b = g.softplus(s_e);
        let b = g.mean_all(b);
        g.add(a, b)
    }

    /// Encoder's adversarial term `mean −log D(enc(x))`, encoding live so
    /// the gradient pushes codes toward what the discriminator calls
    /// prior-like.
    pub fn aae_enc_adv_loss(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        batch: &Batch,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        let codes = self.encode(g, bound, batch, mode, rng)?;
        let s = self.discriminate(g, bound, codes, mode, rng)?;
        let ns = g.neg(s);
        let sp = g.softplus(ns);
        Ok(g.mean_all(sp))
    }

    /// All three sphere-prior losses as plain numbers (evaluation mode,
    /// stored σ): reconstruction, discriminator, encoder-adversarial.
    /// Consumes randomness only for the prior draw.
    pub fn aae_losses(
        &self,
        store: &mut ParameterStore,
        batch: &Batch,
        rng: &mut Rng,
    ) -> Result<(f64, f64, f64)> {
        let enc = self.encode_detached(store, batch)?;
        let prior = self.sample_prior(batch.n, rng);
        let mut g = Graph::inference();
        let bound = store.bind(&mut g, false)?;
        let mut quiet = Rng::from_seed(0);
        let codes = g.constant(enc.clone(), &[batch.n, self.cfg.d_code])?;
        let logits = self.decode_teacher_forced(&mut g, &bound, codes, batch, Mode::Eval, &mut quiet)?;
        let l_rec = self.recon_loss_from_logits(&mut g, logits, batch)?;
        let l_disc = self.aae_disc_loss(&mut g, &bound, &enc, &prior, Mode::Eval, &mut quiet)?;
        let l_adv = self.aae_enc_adv_loss(&mut g, &bound, batch, Mode::Eval, &mut quiet)?;
        Ok((g.value(l_rec), g.value(l_disc), g.value(l_adv)))
    }

    // ── Code-GAN (value game) losses ────────────────────────────────────

    /// Critic loss `mean f(fake) − mean f(real)` over detached code
    /// buffers; gradients reach only `disc.*`. Spectral normalization of
    /// the critic weights is what bounds its slope.
    pub fn arae_critic_loss(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        enc_codes: &[f64],
        gen_codes: &[f64],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        let n_e = self.code_rows(enc_codes)?;
        let n_g = self.code_rows(gen_codes)?;
        let e = g.constant(enc_codes.to_vec(), &[n_e, self.cfg.d_code])?;
        let f = g.constant(gen_codes.to_vec(), &[n_g, self.cfg.d_code])?;
        let s_f = self.discriminate(g, bound, f, mode, rng)?;
        let s_e = self.discriminate(g, bound, e, mode, rng)?;
        let m_f = g.mean_all(s_f);
        let m_e = g.mean_all(s_e);
        g.sub(m_f, m_e)
    }

    /// The joint generator+encoder objective,
    /// `−mean f(G(z)) + w · mean f(enc(x))`:
    /// the generator pushes its codes' critic value up while the encoder
    /// (scaled by the adversarial weight) walks real codes toward the
    /// generator's, shrinking the critic's gap from the other side.
    pub fn arae_gen_enc_loss(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        batch: &Batch,
        noise: &[f64],
        adv_weight: f64,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TensorId> {
        let n_z = self.noise_rows(noise)?;
        let z = g.constant(noise.to_vec(), &[n_z, self.cfg.d_noise])?;
        let fake = self.generate_code(g, bound, z, mode, rng)?;
        let s_f = self.discriminate(g, bound, fake, mode, rng)?;
        let real = self.encode(g, bound, batch, mode, rng)?;
        let s_e = self.discriminate(g, bound, real, mode, rng)?;
        let m_f = g.mean_all(s_f);
        let gen_term = g.neg(m_f);
        let m_e = g.mean_all(s_e);
        let enc_term = g.scale(m_e, adv_weight);
        g.add(gen_term, enc_term)
    }

    /// All three code-GAN losses as plain numbers (evaluation mode,
    /// stored σ): reconstruction of `target` from (possibly noised)
    /// `input`, critic loss, and generator loss for the given noise.
    pub fn arae_losses(
        &self,
        store: &mut ParameterStore,
        input: &Batch,
        target: &Batch,
        noise: &[f64],
    ) -> Result<(f64, f64, f64)> {
        let enc = self.encode_detached(store, input)?;
        let n_z = self.noise_rows(noise)?;
        let mut g = Graph::inference();
        let bound = store.bind(&mut g, false)?;
        let mut quiet = Rng::from_seed(0);
        let codes = g.constant(enc.clone(), &[input.n, self.cfg.d_code])?;
        let logits = self.decode_teacher_forced(&mut g, &bound, codes, target, Mode::Eval, &mut quiet)?;
        let l_rec = self.recon_loss_from_logits(&mut g, logits, target)?;
        let z = g.constant(noise.to_vec(), &[n_z, self.cfg.d_noise])?;
        let fake = self.generate_code(&mut g, &bound, z, Mode::Eval, &mut quiet)?;
        let s_f = self.discriminate(&mut g, &bound, fake, Mode::Eval, &mut quiet)?;
        let e = g.constant(enc, &[input.n, self.cfg.d_code])?;
        let s_e = self.discriminate(&mut g, &bound, e, Mode::Eval, &mut quiet)?;
        let m_f = g.mean_all(s_f);
        let m_e = g.mean_all(s_e);
        let l_critic = g.sub(m_f, m_e)?;
        let l_gen = g.neg(m_f);
        Ok((g.value(l_rec), g.value(l_critic), g.value(l_gen)))
    }
}

// ── Parameter accounting ────────────────────────────────────────────────

/// Closed-form trainable-scalar count for a configuration; the invariant
/// test holds the live store to this number so a silent wiring change
/// (dropped bias, doubled block, missing head) cannot hide.
///
/// Per block, with `d = d_model`, `f = d_ff`:
///   attention  4d² + 4d   (four projections with biases)
///   ffn        2df + f + d
///   layer norm 2d          (gain + bias)
/// Encoder block = attn + ffn + 2·ln; decoder block = 2·attn + ffn + 3·ln;
/// adversarial block = attn + ffn (no norms). On top of the blocks:
/// embedding `V·d`, vocabulary projection `d·V + V`, the four code heads
/// (`enc.pool`, `dec.code`, `disc.inp`, `disc.out`), and in code-GAN mode
/// `gen.up`/`gen.out` plus the generator stack.
pub fn expected_param_count(cfg: &ModelConfig) -> usize {
    let d = cfg.arch.d_model;
    let f = cfg.arch.d_ff;
    let v = cfg.vocab_size;
    let dc = cfg.d_code;
    let attn = 4 * d * d + 4 * d;
    let ffn = 2 * d * f + f + d;
    let ln = 2 * d;
    let enc_block = attn + ffn + 2 * ln;
    let dec_block = 2 * attn + ffn + 3 * ln;
    let gan_block = attn + ffn;
    let mut total = v * d // embedding
        + cfg.arch.n_blocks_ae * enc_block
        + (d * dc + dc) // enc.pool
        + (dc * d + d) // dec.code
        + cfg.arch.n_blocks_ae * dec_block
        + (d * v + v) // out_proj
        + (dc * d + d) // disc.inp
        + cfg.arch.n_blocks_gan * gan_block
        + (d + 1); // disc.out
    if cfg.gan_mode == GanMode::Arae {
        total += (cfg.d_noise * d + d) // gen.up
            + cfg.arch.n_blocks_gan * gan_block
            + (d * dc + dc); // gen.out
    }
    total
}

// ── Sampling helpers ────────────────────────────────────────────────────

/// Index of the largest value; exact ties resolve to the lowest index.
pub(crate) fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Draw an index from `softmax(logits / tau)` (max-subtracted, so any
/// finite logits and tiny temperatures stay in range).
fn sample_softmax(logits: &[f64], tau: f64, rng: &mut Rng) -> usize {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| ((l - m) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    let u = rng.uniform() * z;
    let mut acc = 0.0;
    for (i, &e) in exps.iter().enumerate() {
        acc += e;
        if u < acc {
            return i;
        }
    }
    argmax_lowest(logits)
}
