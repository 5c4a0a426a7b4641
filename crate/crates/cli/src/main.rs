//! latentgen — train, sample, and score latent-code text models.
//!
//! Five subcommands cover the whole pipeline:
//!
//! ```text
//! latentgen synth    --seed 7 --n 5000 --out data/train.txt
//! latentgen bpe      --corpus data/train.txt --vocab 500 --out data/model.bpe
//! latentgen train    --config run.cfg
//! latentgen generate --checkpoint runs/a/latest.ckpt --bpe data/model.bpe \
//!                    --n 100 --strategy temp=1.0 --seed 3 --out gen.txt
//! latentgen evaluate --generated gen.txt --reference data/train.txt \
//!                    --test data/test.txt --bpe data/model.bpe --out report
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 training aborted on a non-finite loss.  Every command that takes
//! `--seed` writes bit-identical output for the same inputs and seed.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use config::parse_run_config_with;
use latentgen_core::data::{corpus_to_sequences, synthesize_sentences, train_bpe, BpeModel};
use latentgen_core::metrics::{LmConfig, MetricReport};
use latentgen_core::model::{Decoding, GanMode};
use latentgen_core::train::{streams, Trainer};
use latentgen_core::{Error, Rng};

#[derive(Parser)]
#[command(
    name = "latentgen",
    version,
    about = "Adversarial latent-code text generation on a single CPU"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write synthetic training sentences, one per line
    Synth {
        /// Generator seed; the same seed always writes the same file
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of sentences
        #[arg(long)]
        n: usize,
        /// Output text file
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a byte-pair tokenizer on a text corpus and save it
    Bpe {
        /// Training text, one sentence per line
        #[arg(long)]
        corpus: PathBuf,
        /// Target vocabulary size (reserved ids and bytes included)
        #[arg(long)]
        vocab: usize,
        /// Output tokenizer file
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model as described by a run-config file
    Train {
        /// Flat key = value config file; see the docs for the key list
        #[arg(long)]
        config: PathBuf,
        /// Override the config's architecture preset
        #[arg(long, value_parser = ["desk", "paper"])]
        preset: Option<String>,
        /// Override the config's training seed
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from checkpoint_dir/latest.ckpt instead of starting fresh
        #[arg(long)]
        resume: bool,
    },
    /// Sample sentences from a trained checkpoint
    Generate {
        /// Checkpoint file written by `train`
        #[arg(long)]
        checkpoint: PathBuf,
        /// Tokenizer file the model was trained with
        #[arg(long)]
        bpe: PathBuf,
        /// Number of sentences to sample
        #[arg(long)]
        n: usize,
        /// `greedy` or `temp=<t>` for temperature sampling
        #[arg(long, default_value = "greedy")]
        strategy: String,
        /// Sampling seed; the same seed always writes the same file
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output text file, one sentence per line
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a generated file against reference text
    Evaluate {
        /// Generated sentences, one per line
        #[arg(long)]
        generated: PathBuf,
        /// Reference training text (fits the forward-perplexity model)
        #[arg(long)]
        reference: PathBuf,
        /// Held-out test text (BLEU target and reverse-perplexity probe)
        #[arg(long)]
        test: PathBuf,
        /// Tokenizer file; all sets are scored over its token ids
        #[arg(long)]
        bpe: PathBuf,
        /// Seed for the two scoring language models
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output stem: writes <out>.csv and <out>.txt
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for configuration mistakes the user can fix by editing flags or the
/// config file, 3 for a training run that died on a non-finite loss, 2 for
/// everything else (unreadable files, bad data, integrity failures).
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 1,
        Some(Error::Divergence(_)) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Synth { seed, n, out } => cmd_synth(seed, n, &out),
        Cmd::Bpe { corpus, vocab, out } => cmd_bpe(&corpus, vocab, &out),
        Cmd::Train {
            config,
            preset,
            seed,
            resume,
        } => cmd_train(&config, preset.as_deref(), seed, resume),
        Cmd::Generate {
            checkpoint,
            bpe,
            n,
            strategy,
            seed,
            out,
        } => cmd_generate(&checkpoint, &bpe, n, &strategy, seed, &out),
        Cmd::Evaluate {
            generated,
            reference,
            test,
            bpe,
            seed,
            out,
        } => cmd_evaluate(&generated, &reference, &test, &bpe, seed, &out),
    }
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn cmd_synth(seed: u64, n: usize, out: &Path) -> anyhow::Result<()> {
    let mut rng = Rng::from_seed(seed);
    let sentences = synthesize_sentences(n, &mut rng);
    let mut f = BufWriter::new(create(out)?);
    for s in &sentences {
        writeln!(f, "{s}")?;
    }
    f.flush()?;
    println!("wrote {} sentences to {}", n, out.display());
    Ok(())
}

fn cmd_bpe(corpus: &Path, vocab: usize, out: &Path) -> anyhow::Result<()> {
    let lines = read_lines(corpus)?;
    let model = train_bpe(&lines, vocab)?;
    model.save(out)?;
    println!(
        "trained tokenizer: {} ids, saved to {}",
        model.vocab_size(),
        out.display()
    );
    Ok(())
}

fn cmd_train(
    config: &Path,
    preset: Option<&str>,
    seed: Option<u64>,
    resume: bool,
) -> anyhow::Result<()> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let run = parse_run_config_with(&text, preset, seed)?;

    let bpe = BpeModel::load(&run.bpe)?;
    let model_cfg = run.model_config(bpe.vocab_size());
    let lines = read_lines(&run.corpus)?;
    let seqs = corpus_to_sequences(&lines, &bpe, model_cfg.arch.max_len)?;
    if seqs.is_empty() {
        return Err(Error::Input(format!(
            "no usable sentences in {} at max_len {}",
            run.corpus.display(),
            model_cfg.arch.max_len
        ))
        .into());
    }
    fs::create_dir_all(&run.checkpoint_dir)?;
    let latest = run.checkpoint_dir.join("latest.ckpt");

    // Fresh runs own the log file and its header; resumed runs append so
    // the stitched log reads as one training history.
    let (mut trainer, log_file) = if resume {
        if !latest.exists() {
            return Err(Error::Config(format!(
                "--resume: no checkpoint at {}",
                latest.display()
            ))
            .into());
        }
        let mut t = Trainer::resume(&latest, Some(&model_cfg))?;
        t.cfg.epochs = run.train.epochs;
        let f = fs::OpenOptions::new().append(true).open(&run.log)?;
        (t, f)
    } else {
        let t = Trainer::new(model_cfg, run.train.clone())?;
        let mut f = create(&run.log)?;
        writeln!(f, "step,phase,loss,value,walltime")?;
        (t, f)
    };
    let mut log = BufWriter::new(log_file);

    let total = trainer.cfg.epochs as u64;
    if trainer.epoch >= total {
        println!(
            "nothing to do: checkpoint is at epoch {} and the target is {}",
            trainer.epoch, total
        );
        return Ok(());
    }
    println!(
        "training {:?} from epoch {} to {} ({} sentences, vocab {})",
        trainer.cfg.mode,
        trainer.epoch,
        total,
        seqs.len(),
        bpe.vocab_size()
    );
    while trainer.epoch < total {
        let mean = trainer.run_one_epoch(&seqs, &mut log, Some(&run.checkpoint_dir))?;
        log.flush()?;
        let e = trainer.epoch;
        let due = trainer.cfg.checkpoint_every != 0 && e % trainer.cfg.checkpoint_every as u64 == 0;
        if due || e == total {
            trainer.save(&run.checkpoint_dir.join(format!("epoch-{e:05}.ckpt")))?;
            trainer.save(&latest)?;
        }
        println!("epoch {e:>4}/{total}  mean L_rec {mean:.6}");
    }
    println!("done; latest checkpoint at {}", latest.display());
    Ok(())
}

fn cmd_generate(
    checkpoint: &Path,
    bpe_path: &Path,
    n: usize,
    strategy: &str,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let decoding = parse_strategy(strategy)?;
    let mut t = Trainer::load(checkpoint)?;
    let bpe = BpeModel::load(bpe_path)?;
    if bpe.vocab_size() != t.model.cfg.vocab_size {
        return Err(Error::Config(format!(
            "tokenizer has {} ids but the checkpoint was trained with {}",
            bpe.vocab_size(),
            t.model.cfg.vocab_size
        ))
        .into());
    }
    let mut rng = Rng::substream(seed, streams::SAMPLE);
    let mut f = BufWriter::new(create(out)?);
    for _ in 0..n {
        let code = match t.model.cfg.gan_mode {
            GanMode::Aae => t.model.sample_prior(1, &mut rng),
            GanMode::Arae => {
                let z = t.model.sample_noise(1, &mut rng);
                t.model.generate_code_detached(&mut t.store, &z)?
            }
        };
        let ids = t.model.decode_sample(&mut t.store, &code, decoding, &mut rng)?;
        writeln!(f, "{}", bpe.decode(&ids))?;
    }
    f.flush()?;
    println!("wrote {} sentences to {}", n, out.display());
    Ok(())
}

fn cmd_evaluate(
    generated: &Path,
    reference: &Path,
    test: &Path,
    bpe_path: &Path,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let bpe = BpeModel::load(bpe_path)?;
    let encode_file = |p: &Path| -> anyhow::Result<Vec<Vec<u32>>> {
        Ok(read_lines(p)?
            .iter()
            .filter(|l| !l.trim().is_empty())
            .map(|l| bpe.encode(l))
            .collect())
    };
    let gen_ids = encode_file(generated)?;
    let ref_ids = encode_file(reference)?;
    let test_ids = encode_file(test)?;
    let lm_cfg = LmConfig::desk(bpe.vocab_size(), seed);
    let report = MetricReport::compute(&gen_ids, &ref_ids, &test_ids, &lm_cfg)?;

    let csv_path = PathBuf::from(format!("{}.csv", out.display()));
    let txt_path = PathBuf::from(format!("{}.txt", out.display()));
    fs::write(&csv_path, report.csv())?;
    fs::write(&txt_path, report.table())?;
    print!("{}", report.table());
    println!("written to {} and {}", csv_path.display(), txt_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// small helpers
// ---------------------------------------------------------------------------

fn parse_strategy(s: &str) -> anyhow::Result<Decoding> {
    if s == "greedy" {
        return Ok(Decoding::Greedy);
    }
    if let Some(tau) = s.strip_prefix("temp=") {
        let tau: f64 = tau
            .parse()
            .map_err(|_| Error::Config(format!("strategy temp=<t>: cannot parse `{tau}`")))?;
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::Config(format!(
                "strategy temperature must be finite and positive, got {tau}"
            ))
            .into());
        }
        return Ok(Decoding::Temperature(tau));
    }
    Err(Error::Config(format!("strategy must be greedy or temp=<t>, got `{s}`")).into())
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn create(path: &Path) -> anyhow::Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}
