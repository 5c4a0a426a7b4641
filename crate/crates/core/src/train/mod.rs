//! Training: phase-alternating loops, per-phase Adam, checkpoints.
//!
//! A [`Trainer`] owns the model, its parameter store, one Adam state per
//! phase, and a fixed set of named random substreams. Every stochastic
//! choice (init, data order, word noise, prior/noise draws, dropout) pulls
//! from its own substream, so a run is a pure function of `(seed, config,
//! corpus)` and a checkpoint restores it mid-flight bit-for-bit.
//!
//! Phase ownership is strict: each phase computes gradients for exactly
//! the parameters it owns and nothing else is touched.
//!
//! * sphere-prior mode, per batch: reconstruction updates `embed`,
//!   `enc.*`, `dec.*`, `out_proj.*`; the discriminator phase updates
//!   `disc.*` against detached codes and a fresh prior draw; the
//!   encoder-adversarial phase updates `enc.*` on λ·(adversarial loss).
//!   The embedding is deliberately left to the reconstruction phase — it
//!   is shared with the decoder, and letting the adversarial game pull on
//!   it destabilizes the token space.
//! * code-GAN mode, per batch: reconstruction (on word-noised inputs,
//!   clean targets), then `n_critic` critic steps on detached real/fake
//!   codes with fresh noise each step, then one combined step that updates
//!   the generator on `−mean f(G(z))` and the encoder on
//!   `λ·mean f(enc(x))` together.
//!
//! Reconstruction gradients are clipped to global norm 5 (long-sequence
//! cross-entropy spikes); adversarial phases run unclipped. Adam runs with
//! β₁ 0.9 / lr `lr_ae` on reconstruction and β₁ 0.5 / lr `lr_gan` on the
//! adversarial phases.

mod adam;
mod checkpoint;

pub use adam::AdamState;
pub use checkpoint::{read_records, write_records, Record, FORMAT_VERSION, MAGIC};

use crate::data::{apply_word_noise, Batch, TokenSequence, END};
use crate::error::{Error, Result};
use crate::model::{argmax_lowest, GanMode, Model, ModelConfig};
use crate::nn::{ArchitectureConfig, Mode};
use crate::params::ParameterStore;
use crate::rng::{Rng, RngState};
use crate::tensor::Graph;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

// ── Configuration ───────────────────────────────────────────────────────

/// Training hyper-parameters. `mode` must match the model's game.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: GanMode,
    /// Adversarial weight on the encoder's side of the game
    /// (sphere-prior default 20, code-GAN default 1).
    pub lambda: f64,
    pub lr_ae: f64,
    pub lr_gan: f64,
    pub beta1_ae: f64,
    pub beta1_gan: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    /// Total epochs the run aims for (resume continues toward it).
    pub epochs: usize,
    /// Critic steps per combined generator step (code-GAN mode).
    pub n_critic: usize,
    /// Word-noise knobs for code-GAN reconstruction inputs.
    pub p_drop: f64,
    pub max_shift: usize,
    pub seed: u64,
    /// Save a checkpoint every this many epochs (0 = final only).
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn aae(seed: u64) -> TrainConfig {
        TrainConfig {
            mode: GanMode::Aae,
            lambda: 20.0,
            lr_ae: 1e-3,
            lr_gan: 1e-4,
            beta1_ae: 0.9,
            beta1_gan: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            epochs: 30,
            n_critic: 1,
            p_drop: 0.0,
            max_shift: 0,
            seed,
            checkpoint_every: 0,
        }
    }

    pub fn arae(seed: u64) -> TrainConfig {
        TrainConfig {
            mode: GanMode::Arae,
            lambda: 1.0,
            n_critic: 5,
            p_drop: 0.1,
            max_shift: 3,
            ..TrainConfig::aae(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda {} must be ≥ 0", self.lambda)));
        }
        if !(self.lr_ae > 0.0) || !(self.lr_gan > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        for (name, b) in [
            ("beta1_ae", self.beta1_ae),
            ("beta1_gan", self.beta1_gan),
            ("beta2", self.beta2),
        ] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} {b} outside [0, 1)")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if self.n_critic == 0 {
            return Err(Error::Config("n_critic must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_drop) {
            return Err(Error::Config(format!("p_drop {} outside [0, 1]", self.p_drop)));
        }
        Ok(())
    }
}

// ── Random substream map ────────────────────────────────────────────────

/// Fixed stream ids: everything stochastic has a home, and adding draws to
/// one consumer never shifts another's sequence.
pub mod streams {
    /// Parameter initialization.
    pub const INIT: u64 = 0;
    /// Epoch shuffling / batch order.
    pub const DATA: u64 = 1;
    /// Input word noise.
    pub const NOISE: u64 = 2;
    /// Prior samples and generator noise.
    pub const ADV: u64 = 3;
    /// Dropout masks in training forwards.
    pub const DROPOUT: u64 = 4;
    /// Generation-time token sampling (not consumed while training).
    pub const SAMPLE: u64 = 5;
}

// ── Phase ownership ─────────────────────────────────────────────────────

fn owns_recon(name: &str) -> bool {
    name == "embed"
        || name.starts_with("enc.")
        || name.starts_with("dec.")
        || name.starts_with("out_proj.")
}

fn owns_disc(name: &str) -> bool {
    name.starts_with("disc.")
}

fn owns_enc_adv(name: &str) -> bool {
    name.starts_with("enc.")
}

fn owns_gen_enc(name: &str) -> bool {
    name.starts_with("gen.") || name.starts_with("enc.")
}

/// Global-norm clip applied to reconstruction gradients.
pub const RECON_CLIP: f64 = 5.0;

// ── The trainer ─────────────────────────────────────────────────────────

pub struct Trainer {
    pub model: Model,
    pub store: ParameterStore,
    pub cfg: TrainConfig,
    /// Batches processed so far (all phases of one batch share a step).
    pub step: u64,
    /// Completed epochs.
    pub epoch: u64,
    opt_recon: AdamState,
    opt_disc: AdamState,
    opt_enc_adv: AdamState,
    opt_gen_enc: AdamState,
    rng_data: Rng,
    rng_noise: Rng,
    rng_adv: Rng,
    rng_dropout: Rng,
    started: Instant,
}

impl Trainer {
    /// Fresh trainer: registers the model from the init substream of
    /// `cfg.seed` and zero optimizer state.
    pub fn new(model_cfg: ModelConfig, cfg: TrainConfig) -> Result<Trainer> {
        cfg.validate()?;
        if model_cfg.gan_mode != cfg.mode {
            return Err(Error::Config(
                "training mode does not match the model's adversarial mode".into(),
            ));
        }
        let mut init = Rng::substream(cfg.seed, streams::INIT);
        let (model, store) = Model::register(model_cfg, &mut init)?;
        Ok(Trainer {
            model,
            store,
            opt_recon: AdamState::new(cfg.beta1_ae, cfg.beta2, cfg.eps),
            opt_disc: AdamState::new(cfg.beta1_gan, cfg.beta2, cfg.eps),
            opt_enc_adv: AdamState::new(cfg.beta1_gan, cfg.beta2, cfg.eps),
            opt_gen_enc: AdamState::new(cfg.beta1_gan, cfg.beta2, cfg.eps),
            rng_data: Rng::substream(cfg.seed, streams::DATA),
            rng_noise: Rng::substream(cfg.seed, streams::NOISE),
            rng_adv: Rng::substream(cfg.seed, streams::ADV),
            rng_dropout: Rng::substream(cfg.seed, streams::DROPOUT),
            step: 0,
            epoch: 0,
            cfg,
            started: Instant::now(),
        })
    }

    fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn log_row(&self, log: &mut dyn Write, phase: &str, loss: &str, value: f64) -> Result<()> {
        writeln!(
            log,
            "{},{},{},{},{:.3}",
            self.step,
            phase,
            loss,
            value,
            self.elapsed()
        )?;
        Ok(())
    }

    /// Build the divergence error, dumping a diagnostic checkpoint first
    /// so the blown-up state can be inspected.
    fn diverged(&self, mut detail: String, ckpt_dir: Option<&Path>) -> Error {
        if let Some(dir) = ckpt_dir {
            let path = dir.join(format!("diverged-step{:06}.ckpt", self.step));
            if self.save(&path).is_ok() {
                detail.push_str(&format!(" (state dumped to {})", path.display()));
            }
        }
        Error::Divergence(detail)
    }

    /// Check a phase outcome: a non-finite loss, or a divergence the
    /// optimizer already caught (a non-finite gradient), aborts the run
    /// with a diagnostic checkpoint.
    fn guard(&self, outcome: Result<f64>, phase: &str, ckpt_dir: Option<&Path>) -> Result<f64> {
        match outcome {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(self.diverged(
                format!("{phase} loss is {v} at step {}", self.step),
                ckpt_dir,
            )),
            Err(Error::Divergence(msg)) => Err(self.diverged(
                format!("{phase} phase at step {}: {msg}", self.step),
                ckpt_dir,
            )),
            Err(other) => Err(other),
        }
    }

    // ── Phases ──────────────────────────────────────────────────────────

    /// Reconstruction phase: encode `input`, teacher-force `target`, and
    /// update the autoencoder family under the gradient clip. Returns the
    /// loss value.
    pub fn phase_recon(&mut self, input: &Batch, target: &Batch) -> Result<f64> {
        let mut g = Graph::new();
        let bound = self.store.bind(&mut g, true)?;
        let loss = self
            .model
            .recon_loss(&mut g, &bound, input, target, Mode::Train, &mut self.rng_dropout)?;
        let value = g.value(loss);
        if !value.is_finite() {
            return Ok(value); // caller turns this into the divergence path
        }
        g.backward(loss)?;
        let mut grads = self.store.collect_grads(&g, &bound, owns_recon);
        grads.clip_global_norm(RECON_CLIP);
        self.opt_recon.step(&mut self.store, &grads, self.cfg.lr_ae)?;
        Ok(value)
    }

    /// Sphere-prior discriminator phase: detached codes vs. a fresh prior
    /// draw; updates `disc.*` only.
    pub fn phase_disc(&mut self, batch: &Batch) -> Result<f64> {
        let enc = self.model.encode_detached(&mut self.store, batch)?;
        let prior = self.model.sample_prior(batch.n, &mut self.rng_adv);
        let mut g = Graph::new();
        let bound = self.store.bind(&mut g, true)?;
        let loss = self.model.aae_disc_loss(
            &mut g,
            &bound,
            &enc,
            &prior,
            Mode::Train,
            &mut self.rng_dropout,
        )?;
        let value = g.value(loss);
        if !value.is_finite() {
            return Ok(value);
        }
        g.backward(loss)?;
        let grads = self.store.collect_grads(&g, &bound, owns_disc);
        self.opt_disc.step(&mut self.store, &grads, self.cfg.lr_gan)?;
        Ok(value)
    }

    /// Sphere-prior encoder phase: live encode through the discriminator,
    /// scaled by λ; updates `enc.*` only. Returns the unscaled loss.
    pub fn phase_enc_adv(&mut self, batch: &Batch) -> Result<f64> {
        let mut g = Graph::new();
        let bound = self.store.bind(&mut g, true)?;
        let raw = self.model.aae_enc_adv_loss(
            &mut g,
            &bound,
            batch,
            Mode::Train,
            &mut self.rng_dropout,
        )?;
        let value = g.value(raw);
        if !value.is_finite() {
            return Ok(value);
        }
        let loss = g.scale(raw, self.cfg.lambda);
        g.backward(loss)?;
        let grads = self.store.collect_grads(&g, &bound, owns_enc_adv);
        self.opt_enc_adv
            .step(&mut self.store, &grads, self.cfg.lr_gan)?;
        Ok(value)
    }

    /// One critic step on detached real/fake codes; updates `disc.*`.
    pub fn phase_critic(&mut self, enc_codes: &[f64]) -> Result<f64> {
        let n = enc_codes.len() / self.model.cfg.d_code;
        let z = self.model.sample_noise(n, &mut self.rng_adv);
        let fake = self.model.generate_code_detached(&mut self.store, &z)?;
        let mut g = Graph::new();
        let bound = self.store.bind(&mut g, true)?;
        let loss = self.model.arae_critic_loss(
            &mut g,
            &bound,
            enc_codes,
            &fake,
            Mode::Train,
            &mut self.rng_dropout,
        )?;
        let value = g.value(loss);
        if !value.is_finite() {
            return Ok(value);
        }
        g.backward(loss)?;
        let grads = self.store.collect_grads(&g, &bound, owns_disc);
        self.opt_disc.step(&mut self.store, &grads, self.cfg.lr_gan)?;
        Ok(value)
    }

    /// Combined generator+encoder step; updates `gen.*` and `enc.*`.
    pub fn phase_gen_enc(&mut self, batch: &Batch) -> Result<f64> {
        let z = self.model.sample_noise(batch.n, &mut self.rng_adv);
        let mut g = Graph::new();
        let bound = self.store.bind(&mut g, true)?;
        let loss = self.model.arae_gen_enc_loss(
            &mut g,
            &bound,
            batch,
            &z,
            self.cfg.lambda,
            Mode::Train,
            &mut self.rng_dropout,
        )?;
        let value = g.value(loss);
        if !value.is_finite() {
            return Ok(value);
        }
        g.backward(loss)?;
        let grads = self.store.collect_grads(&g, &bound, owns_gen_enc);
        self.opt_gen_enc
            .step(&mut self.store, &grads, self.cfg.lr_gan)?;
        Ok(value)
    }

    // ── Batch dispatch ──────────────────────────────────────────────────

    /// All phases for one batch in sphere-prior mode, logging each loss.
    /// Returns the reconstruction loss.
    pub fn aae_batch(
        &mut self,
        batch: &Batch,
        log: &mut dyn Write,
        ckpt_dir: Option<&Path>,
    ) -> Result<f64> {
        let outcome = self.phase_recon(batch, batch);
        let l_rec = self.guard(outcome, "recon", ckpt_dir)?;
        self.log_row(log, "recon", "L_rec", l_rec)?;
        let outcome = self.phase_disc(batch);
        let l_disc = self.guard(outcome, "disc", ckpt_dir)?;
        self.log_row(log, "disc", "L_disc", l_disc)?;
        let outcome = self.phase_enc_adv(batch);
        let l_adv = self.guard(outcome, "enc_adv", ckpt_dir)?;
        self.log_row(log, "enc_adv", "L_enc_adv", l_adv)?;
        Ok(l_rec)
    }

    /// All phases for one batch in code-GAN mode: reconstruction from the
    /// noised input, `n_critic` critic steps, one combined step. Returns
    /// the reconstruction loss.
    pub fn arae_batch(
        &mut self,
        noised: &Batch,
        clean: &Batch,
        log: &mut dyn Write,
        ckpt_dir: Option<&Path>,
    ) -> Result<f64> {
        let outcome = self.phase_recon(noised, clean);
        let l_rec = self.guard(outcome, "recon", ckpt_dir)?;
        self.log_row(log, "recon", "L_rec", l_rec)?;
        // The adversarial game regularizes the clean-encode distribution:
        // the codes generation-time decoding will actually consume.
        let enc = self.model.encode_detached(&mut self.store, clean)?;
        for _ in 0..self.cfg.n_critic {
            let outcome = self.phase_critic(&enc);
            let l_critic = self.guard(outcome, "critic", ckpt_dir)?;
            self.log_row(log, "critic", "L_critic", l_critic)?;
        }
        let outcome = self.phase_gen_enc(clean);
        let l_ge = self.guard(outcome, "gen_enc", ckpt_dir)?;
        self.log_row(log, "gen_enc", "L_gen_enc", l_ge)?;
        Ok(l_rec)
    }

    // ── Epoch loop ──────────────────────────────────────────────────────

    /// Run until `cfg.epochs` epochs are complete (resume-aware), logging
    /// CSV rows and saving checkpoints per the schedule. Returns per-epoch
    /// mean reconstruction losses.
    pub fn run(
        &mut self,
        corpus: &[TokenSequence],
        log: &mut dyn Write,
        ckpt_dir: Option<&Path>,
    ) -> Result<Vec<f64>> {
        if corpus.is_empty() {
            return Err(Error::Input("empty training corpus".into()));
        }
        if let Some(dir) = ckpt_dir {
            std::fs::create_dir_all(dir)?;
        }
        let mut epoch_means = Vec::new();
        while self.epoch < self.cfg.epochs as u64 {
            let mean = self.run_one_epoch(corpus, log, ckpt_dir)?;
            epoch_means.push(mean);
            let e = self.epoch;
            let due = self.cfg.checkpoint_every != 0 && e % self.cfg.checkpoint_every as u64 == 0;
            if let Some(dir) = ckpt_dir {
                if due || e == self.cfg.epochs as u64 {
                    self.save(&dir.join(format!("epoch-{e:05}.ckpt")))?;
                    self.save(&dir.join("latest.ckpt"))?;
                }
            }
        }
        Ok(epoch_means)
    }

    /// One pass over the corpus in shuffled batches; returns the epoch's
    /// mean reconstruction loss.
    pub fn run_one_epoch(
        &mut self,
        corpus: &[TokenSequence],
        log: &mut dyn Write,
        ckpt_dir: Option<&Path>,
    ) -> Result<f64> {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        self.rng_data.shuffle(&mut order);
        let mut rec_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(self.cfg.batch_size) {
            let seqs: Vec<&TokenSequence> = chunk.iter().map(|&i| &corpus[i]).collect();
            let clean = Batch::from_sequences(&seqs)?;
            self.step += 1;
            let l_rec = match self.cfg.mode {
                GanMode::Aae => self.aae_batch(&clean, log, ckpt_dir)?,
                GanMode::Arae => {
                    let noised_seqs: Vec<TokenSequence> = chunk
                        .iter()
                        .map(|&i| {
                            apply_word_noise(
                                &corpus[i],
                                self.cfg.p_drop,
                                self.cfg.max_shift,
                                &mut self.rng_noise,
                            )
                        })
                        .collect::<Result<_>>()?;
                    let refs: Vec<&TokenSequence> = noised_seqs.iter().collect();
                    let noised = Batch::from_sequences(&refs)?;
                    self.arae_batch(&noised, &clean, log, ckpt_dir)?
                }
            };
            rec_sum += l_rec;
            batches += 1;
        }
        self.epoch += 1;
        Ok(rec_sum / batches as f64)
    }

    // ── Checkpointing ───────────────────────────────────────────────────

    /// Serialize the complete training state (see the container docs for
    /// the byte layout).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut recs = Vec::new();
        let a = &self.model.cfg.arch;
        recs.push(Record::flat(
            "meta.arch",
            vec![
                a.d_model as f64,
                a.n_heads as f64,
                a.d_ff as f64,
                a.n_blocks_ae as f64,
                a.n_blocks_gan as f64,
                a.max_len as f64,
                a.dropout_p,
                a.ln_eps,
                a.n_power_iters as f64,
            ],
        ));
        let m = &self.model.cfg;
        recs.push(Record::flat(
            "meta.model",
            vec![
                m.vocab_size as f64,
                m.d_code as f64,
                m.d_noise as f64,
                mode_flag(m.gan_mode),
            ],
        ));
        let c = &self.cfg;
        recs.push(Record::flat(
            "meta.train",
            vec![
                mode_flag(c.mode),
                c.lambda,
                c.lr_ae,
                c.lr_gan,
                c.beta1_ae,
                c.beta1_gan,
                c.beta2,
                c.eps,
                c.batch_size as f64,
                c.epochs as f64,
                c.n_critic as f64,
                c.p_drop,
                c.max_shift as f64,
                checkpoint::u64_slot(c.seed),
                c.checkpoint_every as f64,
            ],
        ));
        recs.push(Record::flat(
            "meta.progress",
            vec![
                checkpoint::u64_slot(self.step),
                checkpoint::u64_slot(self.epoch),
            ],
        ));
        for (tag, rng) in [
            ("rng.data", &self.rng_data),
            ("rng.noise", &self.rng_noise),
            ("rng.adv", &self.rng_adv),
            ("rng.dropout", &self.rng_dropout),
        ] {
            recs.push(Record::flat(tag, rng_slots(&rng.state())));
        }
        for (name, p) in self.store.iter() {
            recs.push(Record::new(format!("param.{name}"), &p.shape, p.data.clone()));
            if let Some(sn) = &p.spec_norm {
                recs.push(Record::flat(format!("spec.{name}.u"), sn.u.clone()));
                recs.push(Record::flat(format!("spec.{name}.sigma"), vec![sn.sigma]));
            }
        }
        for (tag, opt) in [
            ("adam.recon", &self.opt_recon),
            ("adam.disc", &self.opt_disc),
            ("adam.enc_adv", &self.opt_enc_adv),
            ("adam.gen_enc", &self.opt_gen_enc),
        ] {
            recs.push(Record::flat(
                format!("{tag}.t"),
                vec![checkpoint::u64_slot(opt.t)],
            ));
            for (name, (mm, vv)) in opt.moments() {
                recs.push(Record::flat(format!("{tag}.{name}.m"), mm.clone()));
                recs.push(Record::flat(format!("{tag}.{name}.v"), vv.clone()));
            }
        }
        write_records(path, &recs)
    }

    /// Rebuild a trainer from a checkpoint, restoring parameters, spectral
    /// state, optimizer moments, counters, and every random stream.
    pub fn load(path: &Path) -> Result<Trainer> {
        let recs = read_records(path)?;
        let get = |name: &str| -> Result<&Record> {
            recs.iter()
                .find(|r| r.name == name)
                .ok_or_else(|| Error::Integrity(format!("checkpoint is missing {name}")))
        };
        let arch_rec = &get("meta.arch")?.data;
        if arch_rec.len() != 9 {
            return Err(Error::Integrity("meta.arch malformed".into()));
        }
        let arch = ArchitectureConfig {
            d_model: arch_rec[0] as usize,
            n_heads: arch_rec[1] as usize,
            d_ff: arch_rec[2] as usize,
            n_blocks_ae: arch_rec[3] as usize,
            n_blocks_gan: arch_rec[4] as usize,
            max_len: arch_rec[5] as usize,
            dropout_p: arch_rec[6],
            ln_eps: arch_rec[7],
            n_power_iters: arch_rec[8] as usize,
        };
        let mr = &get("meta.model")?.data;
        if mr.len() != 4 {
            return Err(Error::Integrity("meta.model malformed".into()));
        }
        let mut model_cfg = ModelConfig::new(arch, mr[0] as usize, flag_mode(mr[3])?);
        model_cfg.d_code = mr[1] as usize;
        model_cfg.d_noise = mr[2] as usize;
        let tr = &get("meta.train")?.data;
        if tr.len() != 15 {
            return Err(Error::Integrity("meta.train malformed".into()));
        }
        let cfg = TrainConfig {
            mode: flag_mode(tr[0])?,
            lambda: tr[1],
            lr_ae: tr[2],
            lr_gan: tr[3],
            beta1_ae: tr[4],
            beta1_gan: tr[5],
            beta2: tr[6],
            eps: tr[7],
            batch_size: tr[8] as usize,
            epochs: tr[9] as usize,
            n_critic: tr[10] as usize,
            p_drop: tr[11],
            max_shift: tr[12] as usize,
            seed: checkpoint::slot_u64(tr[13]),
            checkpoint_every: tr[14] as usize,
        };
        let mut trainer = Trainer::new(model_cfg, cfg)?;
        let prog = &get("meta.progress")?.data;
        if prog.len() != 2 {
            return Err(Error::Integrity("meta.progress malformed".into()));
        }
        trainer.step = checkpoint::slot_u64(prog[0]);
        trainer.epoch = checkpoint::slot_u64(prog[1]);
        trainer.rng_data = rng_from_slots(&get("rng.data")?.data)?;
        trainer.rng_noise = rng_from_slots(&get("rng.noise")?.data)?;
        trainer.rng_adv = rng_from_slots(&get("rng.adv")?.data)?;
        trainer.rng_dropout = rng_from_slots(&get("rng.dropout")?.data)?;

        // Overwrite every registered parameter from the file; any name or
        // shape drift between the config and the records is an error.
        let mut seen = 0usize;
        for r in &recs {
            if let Some(name) = r.name.strip_prefix("param.") {
                let p = trainer.store.get_mut(name).ok_or_else(|| {
                    Error::Integrity(format!("checkpoint has unknown parameter {name}"))
                })?;
                if p.shape != r.shape {
                    return Err(Error::Shape {
                        op: "load_checkpoint",
                        lhs: p.shape.clone(),
                        rhs: r.shape.clone(),
                    });
                }
                p.data = r.data.clone();
                seen += 1;
            }
        }
        if seen != trainer.store.len() {
            return Err(Error::Integrity(format!(
                "checkpoint holds {seen} parameters, model has {}",
                trainer.store.len()
            )));
        }
        for r in &recs {
            if let Some(rest) = r.name.strip_prefix("spec.") {
                let (name, field) = rest
                    .rsplit_once('.')
                    .ok_or_else(|| Error::Integrity(format!("malformed record {}", r.name)))?;
                let p = trainer.store.get_mut(name).ok_or_else(|| {
                    Error::Integrity(format!("spectral state for unknown parameter {name}"))
                })?;
                let sn = p.spec_norm.as_mut().ok_or_else(|| {
                    Error::Integrity(format!("{name} is not spectrally normalized"))
                })?;
                match field {
                    "u" => {
                        if sn.u.len() != r.data.len() {
                            return Err(Error::Integrity(format!(
                                "u vector for {name}: {} values, want {}",
                                r.data.len(),
                                sn.u.len()
                            )));
                        }
                        sn.u = r.data.clone();
                    }
                    "sigma" => {
                        if r.data.len() != 1 {
                            return Err(Error::Integrity(format!(
                                "sigma for {name} must be a single value"
                            )));
                        }
                        sn.sigma = r.data[0];
                    }
                    other => {
                        return Err(Error::Integrity(format!(
                            "unknown spectral field {other} for {name}"
                        )))
                    }
                }
            }
        }
        for (tag, opt) in [
            ("adam.recon", &mut trainer.opt_recon),
            ("adam.disc", &mut trainer.opt_disc),
            ("adam.enc_adv", &mut trainer.opt_enc_adv),
            ("adam.gen_enc", &mut trainer.opt_gen_enc),
        ] {
            let t_rec = get(&format!("{tag}.t"))?;
            if t_rec.data.len() != 1 {
                return Err(Error::Integrity(format!("{tag}.t must be a single value")));
            }
            opt.t = checkpoint::slot_u64(t_rec.data[0]);
            let prefix = format!("{tag}.");
            for r in &recs {
                if let Some(rest) = r.name.strip_prefix(&prefix) {
                    if let Some(pname) = rest.strip_suffix(".m") {
                        let v = get(&format!("{tag}.{pname}.v"))?;
                        opt.insert_moments(pname, r.data.clone(), v.data.clone())?;
                    }
                }
            }
        }
        Ok(trainer)
    }

    /// Load and check the checkpoint was built for the given shapes;
    /// mismatches are explicit errors rather than silent re-inits.
    pub fn resume(path: &Path, expect: Option<&ModelConfig>) -> Result<Trainer> {
        let t = Trainer::load(path)?;
        if let Some(e) = expect {
            if *e != t.model.cfg {
                return Err(Error::Config(format!(
                    "checkpoint was built for a different model shape \
                     (file: {:?}, requested: {:?})",
                    t.model.cfg, e
                )));
            }
        }
        Ok(t)
    }
}

fn mode_flag(m: GanMode) -> f64 {
    match m {
        GanMode::Aae => 0.0,
        GanMode::Arae => 1.0,
    }
}

fn flag_mode(v: f64) -> Result<GanMode> {
    match v as i64 {
        0 => Ok(GanMode::Aae),
        1 => Ok(GanMode::Arae),
        other => Err(Error::Integrity(format!("unknown mode flag {other}"))),
    }
}

/// RngState → 7 slots: 4 seed words, stream id, word position (lo, hi).
fn rng_slots(s: &RngState) -> Vec<f64> {
    let mut out = Vec::with_capacity(7);
    for chunk in s.seed.chunks(8) {
        out.push(checkpoint::u64_slot(u64::from_le_bytes(
            chunk.try_into().unwrap(),
        )));
    }
    out.push(checkpoint::u64_slot(s.stream));
    out.extend(checkpoint::u128_slots(s.word_pos));
    out
}

fn rng_from_slots(slots: &[f64]) -> Result<Rng> {
    if slots.len() != 7 {
        return Err(Error::Integrity(format!(
            "rng state needs 7 slots, found {}",
            slots.len()
        )));
    }
    let mut seed = [0u8; 32];
    for (i, &s) in slots[..4].iter().enumerate() {
        seed[i * 8..(i + 1) * 8].copy_from_slice(&checkpoint::slot_u64(s).to_le_bytes());
    }
    Ok(Rng::from_state(&RngState {
        seed,
        stream: checkpoint::slot_u64(slots[4]),
        word_pos: checkpoint::slots_u128(slots[5], slots[6]),
    }))
}

// ── Convenience entry points ────────────────────────────────────────────

/// Train a sphere-prior model from scratch; returns the trainer at its
/// final state.
pub fn train_aae(
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    corpus: &[TokenSequence],
    log: &mut dyn Write,
    ckpt_dir: Option<&Path>,
) -> Result<Trainer> {
    let mut t = Trainer::new(model_cfg, cfg)?;
    t.run(corpus, log, ckpt_dir)?;
    Ok(t)
}

/// Train a code-GAN model from scratch.
pub fn train_arae(
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    corpus: &[TokenSequence],
    log: &mut dyn Write,
    ckpt_dir: Option<&Path>,
) -> Result<Trainer> {
    let mut t = Trainer::new(model_cfg, cfg)?;
    t.run(corpus, log, ckpt_dir)?;
    Ok(t)
}

// ── Reconstruction accuracy ─────────────────────────────────────────────

/// Fraction of charged target positions (content tokens plus the end
/// token when there is room) whose teacher-forced argmax matches, over
/// all given batches. Evaluation mode throughout.
pub fn reconstruction_accuracy(
    model: &Model,
    store: &mut ParameterStore,
    batches: &[Batch],
) -> Result<f64> {
    let v = model.cfg.vocab_size;
    let mut hits = 0usize;
    let mut total = 0usize;
    for batch in batches {
        let codes = model.encode_detached(store, batch)?;
        let mut g = Graph::inference();
        let bound = store.bind(&mut g, false)?;
        let mut quiet = Rng::from_seed(0);
        let ct = g.constant(codes, &[batch.n, model.cfg.d_code])?;
        let logits = model.decode_teacher_forced(&mut g, &bound, ct, batch, Mode::Eval, &mut quiet)?;
        let data = g.data(logits);
        for i in 0..batch.n {
            let len = batch.lengths[i];
            let scored = (len + 1).min(batch.t);
            for j in 0..scored {
                let row = &data[(i * batch.t + j) * v..(i * batch.t + j + 1) * v];
                let want = if j < len {
                    batch.ids[i * batch.t + j]
                } else {
                    END
                };
                if argmax_lowest(row) as u32 == want {
                    hits += 1;
                }
                total += 1;
            }
        }
    }
    Ok(hits as f64 / total as f64)
}

// ── Tests ───────────────────────────────────────────────────────────────
