//! Experiment configuration as `key=value` pairs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::confidence::{AeHyper, MlpHyper};
use crate::crf::CrfHyper;
use crate::eda::EdaHyper;
use crate::features::DEFAULT_BINS;
use crate::{Error, Result};

use super::SystemSpec;

/// Channel rates and n-best shape; confusions, fillers and vocabulary come
/// from the grammar.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRates {
    pub substitution: f64,
    pub deletion: f64,
    pub insertion: f64,
    pub systematic: f64,
    pub persistence: f64,
    pub sharpness: f64,
    pub nbest: usize,
}

impl Default for NoiseRates {
    fn default() -> Self {
        NoiseRates {
            substitution: 0.15,
            deletion: 0.05,
            insertion: 0.035,
            systematic: 0.25,
            persistence: 0.8,
            sharpness: 0.5,
            nbest: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub grammar: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub noise: NoiseRates,
    pub embedding_dim: usize,
    pub bins: usize,
    pub ae: AeHyper,
    pub mlp: MlpHyper,
    pub crf: CrfHyper,
    pub eda: EdaHyper,
    pub systems: Vec<SystemSpec>,
    /// Systems entering weighted combination and consensus.
    pub combine: Vec<String>,
    pub grid_step: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let systems = ["crf-noconf", "crf", "crf-err", "eda", "eda-err"]
            .iter()
            .map(|s| s.parse().expect("valid system name"))
            .collect();
        ExperimentConfig {
            seed: 7,
            train: 15000,
            dev: 1500,
            test: 3000,
            grammar: None,
            lexicon: None,
            templates: None,
            noise: NoiseRates::default(),
            embedding_dim: 24,
            bins: DEFAULT_BINS,
            ae: AeHyper::default(),
            mlp: MlpHyper::default(),
            crf: CrfHyper::default(),
            eda: EdaHyper::default(),
            systems,
            combine: ["crf", "eda", "crf-err", "eda-err"].map(String::from).to_vec(),
            grid_step: 0.1,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let path = || (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "seed" => self.seed = num(key, v)?,
            "train" => self.train = num(key, v)?,
            "dev" => self.dev = num(key, v)?,
            "test" => self.test = num(key, v)?,
            "grammar" => self.grammar = path(),
            "lexicon" => self.lexicon = path(),
            "templates" => self.templates = path(),
            "noise.substitution" => self.noise.substitution = num(key, v)?,
            "noise.deletion" => self.noise.deletion = num(key, v)?,
            "noise.insertion" => self.noise.insertion = num(key, v)?,
            "noise.systematic" => self.noise.systematic = num(key, v)?,
            "noise.persistence" => self.noise.persistence = num(key, v)?,
            "noise.sharpness" => self.noise.sharpness = num(key, v)?,
            "noise.nbest" => self.noise.nbest = num(key, v)?,
            "embeddings.dim" => self.embedding_dim = num(key, v)?,
            "features.bins" => self.bins = num(key, v)?,
            "ae.bottleneck" => self.ae.bottleneck = num(key, v)?,
            "ae.epochs" => self.ae.epochs = num(key, v)?,
            "ae.lr" => self.ae.lr = num(key, v)?,
            "ae.batch" => self.ae.batch = num(key, v)?,
            "mlp.projection" => self.mlp.projection = num(key, v)?,
            "mlp.merge" => self.mlp.merge = num(key, v)?,
            "mlp.hidden" => self.mlp.hidden = num(key, v)?,
            "mlp.window" => self.mlp.window = num(key, v)?,
            "mlp.lr" => self.mlp.lr = num(key, v)?,
            "mlp.epochs" => self.mlp.epochs = num(key, v)?,
            "mlp.batch" => self.mlp.batch = num(key, v)?,
            "crf.l2" => self.crf.l2 = num(key, v)?,
            "crf.epochs" => self.crf.epochs = num(key, v)?,
            "crf.lr" => self.crf.lr = num(key, v)?,
            "crf.decay" => self.crf.decay = num(key, v)?,
            "eda.embedding" => self.eda.dims.embedding = num(key, v)?,
            "eda.hidden" => self.eda.dims.hidden = num(key, v)?,
            "eda.decoder" => self.eda.dims.decoder = num(key, v)?,
            "eda.label_embedding" => self.eda.dims.label_embedding = num(key, v)?,
            "eda.attention" => self.eda.dims.attention = num(key, v)?,
            "eda.lr" => self.eda.lr = num(key, v)?,
            "eda.lr_decay" => self.eda.lr_decay = num(key, v)?,
            "eda.epochs" => self.eda.epochs = num(key, v)?,
            "eda.batch" => self.eda.batch = num(key, v)?,
            "eda.clip" => self.eda.clip = num(key, v)?,
            "eda.min_count" => self.eda.min_count = num(key, v)?,
            "systems" => {
                self.systems = list(v).iter().map(|s| s.parse()).collect::<Result<_>>()?;
            }
            "combine" => self.combine = list(v),
            "grid_step" => self.grid_step = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Apply `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, n + 1, "expected key=value"))?;
            self.set(k.trim(), v).map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::default();
        c.apply_text(&text, &path.display().to_string())?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.dev == 0 || self.test == 0 {
            return Err(Error::Config("train, dev and test sizes must be positive".into()));
        }
        for p in [&self.grammar, &self.lexicon, &self.templates].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.systems.is_empty() {
            return Err(Error::Config("no system selected".into()));
        }
        let mut names: Vec<&str> = self.systems.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate system".into()));
        }
        for c in &self.combine {
            if !self.systems.iter().any(|s| &s.name == c) {
                return Err(Error::Config(format!("combined system `{c}` is not trained")));
            }
        }
        Ok(())
    }

    /// Every key with its current value, one `key=value` per line.
    pub fn to_key_values(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let names: Vec<&str> = self.systems.iter().map(|s| s.name.as_str()).collect();
        let rows: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("train", self.train.to_string()),
            ("dev", self.dev.to_string()),
            ("test", self.test.to_string()),
            ("grammar", p(&self.grammar)),
            ("lexicon", p(&self.lexicon)),
            ("templates", p(&self.templates)),
            ("noise.substitution", self.noise.substitution.to_string()),
            ("noise.deletion", self.noise.deletion.to_string()),
            ("noise.insertion", self.noise.insertion.to_string()),
            ("noise.systematic", self.noise.systematic.to_string()),
            ("noise.persistence", self.noise.persistence.to_string()),
            ("noise.sharpness", self.noise.sharpness.to_string()),
            ("noise.nbest", self.noise.nbest.to_string()),
            ("embeddings.dim", self.embedding_dim.to_string()),
            ("features.bins", self.bins.to_string()),
            ("ae.bottleneck", self.ae.bottleneck.to_string()),
            ("ae.epochs", self.ae.epochs.to_string()),
            ("ae.lr", self.ae.lr.to_string()),
            ("ae.batch", self.ae.batch.to_string()),
            ("mlp.projection", self.mlp.projection.to_string()),
            ("mlp.merge", self.mlp.merge.to_string()),
            ("mlp.hidden", self.mlp.hidden.to_string()),
            ("mlp.window", self.mlp.window.to_string()),
            ("mlp.lr", self.mlp.lr.to_string()),
            ("mlp.epochs", self.mlp.epochs.to_string()),
            ("mlp.batch", self.mlp.batch.to_string()),
            ("crf.l2", self.crf.l2.to_string()),
            ("crf.epochs", self.crf.epochs.to_string()),
            ("crf.lr", self.crf.lr.to_string()),
            ("crf.decay", self.crf.decay.to_string()),
            ("eda.embedding", self.eda.dims.embedding.to_string()),
            ("eda.hidden", self.eda.dims.hidden.to_string()),
            ("eda.decoder", self.eda.dims.decoder.to_string()),
            ("eda.label_embedding", self.eda.dims.label_embedding.to_string()),
            ("eda.attention", self.eda.dims.attention.to_string()),
            ("eda.lr", self.eda.lr.to_string()),
            ("eda.lr_decay", self.eda.lr_decay.to_string()),
            ("eda.epochs", self.eda.epochs.to_string()),
            ("eda.batch", self.eda.batch.to_string()),
            ("eda.clip", self.eda.clip.to_string()),
            ("eda.min_count", self.eda.min_count.to_string()),
            ("systems", names.join(",")),
            ("combine", self.combine.join(",")),
            ("grid_step", self.grid_step.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in rows {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
