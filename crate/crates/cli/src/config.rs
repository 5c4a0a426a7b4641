//! Run configuration: a flat key = value file, one setting per line.
//!
//! The format is deliberately rigid — every key is typed, unknown keys are
//! rejected, duplicates are rejected — so a config file pins a run exactly
//! and two people holding the same file get the same training.
//!
//! ```text
//! # sphere-prior training on the bundled synthetic corpus
//! preset = desk
//! mode = aae
//! seed = 7
//! epochs = 30
//! corpus = data/train.txt
//! bpe = data/model.bpe
//! checkpoint_dir = runs/aae-7
//! log = runs/aae-7/loss.csv
//! ```
//!
//! `preset` picks the architecture baseline (`desk` for one-core work,
//! `paper` for the full-scale shape: width 304, 8 heads, 3 blocks per
//! stack, 50-token sequences); individual keys override it afterwards
//! regardless of their order in the file.

use std::path::PathBuf;

use latentgen_core::model::{GanMode, ModelConfig};
use latentgen_core::nn::ArchitectureConfig;
use latentgen_core::train::TrainConfig;
use latentgen_core::{Error, Result};

/// Everything `train` needs: the model shape (vocabulary filled in from
/// the tokenizer file at load time), the training schedule, and the four
/// paths.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub arch: ArchitectureConfig,
    pub d_code: usize,
    pub d_noise: usize,
    pub train: TrainConfig,
    pub corpus: PathBuf,
    pub bpe: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub log: PathBuf,
}

impl RunConfig {
    /// The model configuration once the tokenizer's vocabulary is known.
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        let mut cfg = ModelConfig::new(self.arch.clone(), vocab_size, self.train.mode);
        cfg.d_code = self.d_code;
        cfg.d_noise = self.d_noise;
        cfg
    }
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| bad(format!("key `{key}`: cannot parse `{value}`")))
}

/// Parse the key = value text into a run configuration.  Command-line
/// overrides slot in around the file: `preset` replaces the file's preset
/// key (applied first, like the key would be), `seed` replaces the
/// training seed after all file keys.
pub fn parse_run_config_with(
    text: &str,
    preset_override: Option<&str>,
    seed_override: Option<u64>,
) -> Result<RunConfig> {
    // Collect the raw pairs first so `preset` and `mode` can shape the
    // defaults before any override is applied, wherever they appear.
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(bad(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = k.trim().to_string();
        let value = v.trim().to_string();
        if pairs.iter().any(|(seen, _)| *seen == key) {
            return Err(bad(format!("duplicate key `{key}`")));
        }
        pairs.push((key, value));
    }

    let find = |name: &str| -> Option<&str> {
        pairs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    };

    let mode = match find("mode") {
        Some("aae") => GanMode::Aae,
        Some("arae") => GanMode::Arae,
        Some(other) => return Err(bad(format!("mode must be aae or arae, got `{other}`"))),
        None => return Err(bad("missing required key `mode`".into())),
    };
    let mut arch = match preset_override.or_else(|| find("preset")) {
        None | Some("desk") => ArchitectureConfig::desk(),
        Some("paper") => ArchitectureConfig::full(),
        Some(other) => return Err(bad(format!("preset must be desk or paper, got `{other}`"))),
    };
    let mut train = match mode {
        GanMode::Aae => TrainConfig::aae(0),
        GanMode::Arae => TrainConfig::arae(0),
    };
    let mut d_code = 128usize;
    let mut d_noise = 100usize;
    let mut corpus: Option<PathBuf> = None;
    let mut bpe: Option<PathBuf> = None;
    let mut checkpoint_dir: Option<PathBuf> = None;
    let mut log: Option<PathBuf> = None;

    for (key, value) in &pairs {
        let (key, v) = (key.as_str(), value.as_str());
        match key {
            "preset" | "mode" => {}
            // architecture
            "d_model" => arch.d_model = parse_num(key, v)?,
            "n_heads" => arch.n_heads = parse_num(key, v)?,
            "d_ff" => arch.d_ff = parse_num(key, v)?,
            "n_blocks_ae" => arch.n_blocks_ae = parse_num(key, v)?,
            "n_blocks_gan" => arch.n_blocks_gan = parse_num(key, v)?,
            "max_len" => arch.max_len = parse_num(key, v)?,
            "dropout_p" => arch.dropout_p = parse_num(key, v)?,
            "ln_eps" => arch.ln_eps = parse_num(key, v)?,
            "n_power_iters" => arch.n_power_iters = parse_num(key, v)?,
            // code space
            "d_code" => d_code = parse_num(key, v)?,
            "d_noise" => d_noise = parse_num(key, v)?,
            // training schedule
            "seed" => train.seed = parse_num(key, v)?,
            "epochs" => train.epochs = parse_num(key, v)?,
            "batch_size" => train.batch_size = parse_num(key, v)?,
            "lambda" => train.lambda = parse_num(key, v)?,
            "lr_ae" => train.lr_ae = parse_num(key, v)?,
            "lr_gan" => train.lr_gan = parse_num(key, v)?,
            "beta1_ae" => train.beta1_ae = parse_num(key, v)?,
            "beta1_gan" => train.beta1_gan = parse_num(key, v)?,
            "beta2" => train.beta2 = parse_num(key, v)?,
            "eps" => train.eps = parse_num(key, v)?,
            "n_critic" => train.n_critic = parse_num(key, v)?,
            "p_drop" => train.p_drop = parse_num(key, v)?,
            "max_shift" => train.max_shift = parse_num(key, v)?,
            "checkpoint_every" => train.checkpoint_every = parse_num(key, v)?,
            // paths
            "corpus" => corpus = Some(PathBuf::from(v)),
            "bpe" => bpe = Some(PathBuf::from(v)),
            "checkpoint_dir" => checkpoint_dir = Some(PathBuf::from(v)),
            "log" => log = Some(PathBuf::from(v)),
            _ => return Err(bad(format!("unknown config key `{key}`"))),
        }
    }

    if let Some(s) = seed_override {
        train.seed = s;
    }
    arch.validate()?;
    train.validate()?;
    let require = |name: &str, p: Option<PathBuf>| -> Result<PathBuf> {
        p.ok_or_else(|| bad(format!("missing required key `{name}`")))
    };
    Ok(RunConfig {
        arch,
        d_code,
        d_noise,
        train,
        corpus: require("corpus", corpus)?,
        bpe: require("bpe", bpe)?,
        checkpoint_dir: require("checkpoint_dir", checkpoint_dir)?,
        log: require("log", log)?,
    })
}

// ---------------------------------------------------------------------------
