//! End-to-end experiment stages shared by the command-line tool and the
//! acceptance tests: corpus generation, ASR simulation, confidence
//! estimation, tagger training, combination and reporting.

mod config;

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{ExperimentConfig, NoiseRates};

use crate::alignment::{attach_pap, corrupt_dataset, word_edit_counts, ConfusionNetwork, EditCounts, NoiseConfig};
use crate::confidence::{
    attach_confidences, fused_table, synthetic_embeddings, train_autoencoder, AutoencoderModel, EmbeddingTable,
    MsMlpModel,
};
use crate::corpus::{augment_error_labels, generate_corpus, strip_error_labels, Annotator, Dataset, DomainGrammar, Label, TaggerOutput};
use crate::crf::{label_inventory, train_crf, CrfModel, CrfSetup, TemplateSet};
use crate::eda::{train_eda, EdaModel};
use crate::evaluation::{
    calibration_bins, combine_corpus, confidence_records, consensus_corpus, nce, score, score_consensus, tune_weights,
    CalibrationReport, ConsensusOutput, ScoreReport,
};
use crate::features::{Family, FeatureSpec, Lexicon};
use crate::{seed, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tagger {
    Crf,
    Eda,
}

/// A tagger, its feature families and whether it trains on error labels.
///
/// Names read `<crf|eda>[-noconf|-pap|-conf][-err]`; without a confidence
/// suffix both measures are used.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub tagger: Tagger,
    pub families: Vec<Family>,
    pub error_labels: bool,
}

impl SystemSpec {
    pub fn feature_spec(&self, bins: usize) -> Result<FeatureSpec> {
        FeatureSpec::new(self.families.iter().copied(), bins)
    }
}

impl FromStr for SystemSpec {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown system `{name}`"));
        let mut parts = name.split('-');
        let tagger = match parts.next() {
            Some("crf") => Tagger::Crf,
            Some("eda") => Tagger::Eda,
            _ => return Err(bad()),
        };
        let mut families = vec![
            Family::Surface,
            Family::SemCategories,
            Family::Syntactic,
            Family::Morphological,
        ];
        let mut rest: Vec<&str> = parts.collect();
        let error_labels = rest.last() == Some(&"err");
        if error_labels {
            rest.pop();
        }
        match rest.as_slice() {
            [] => families.extend([Family::Pap, Family::MlpConf]),
            ["noconf"] => {}
            ["pap"] => families.push(Family::Pap),
            ["conf"] => families.push(Family::MlpConf),
            _ => return Err(bad()),
        }
        Ok(SystemSpec {
            name: name.to_string(),
            tagger,
            families,
            error_labels,
        })
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Stage seeds derived from the run seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageSeeds {
    pub corpus_train: u64,
    pub corpus_dev: u64,
    pub corpus_test: u64,
    pub noise: u64,
    pub embeddings: u64,
    pub ae: u64,
    pub mlp: u64,
    pub crf: u64,
    pub eda: u64,
}

impl StageSeeds {
    pub fn new(seed: u64) -> Self {
        let d = |k: &str| seed::derive(seed, k);
        StageSeeds {
            corpus_train: d("corpus-train"),
            corpus_dev: d("corpus-dev"),
            corpus_test: d("corpus-test"),
            noise: d("noise"),
            embeddings: d("embeddings"),
            ae: d("ae"),
            mlp: d("mlp"),
            crf: d("crf"),
            eda: d("eda"),
        }
    }

    pub fn to_key_values(&self) -> String {
        let rows = [
            ("corpus_train", self.corpus_train),
            ("corpus_dev", self.corpus_dev),
            ("corpus_test", self.corpus_test),
            ("noise", self.noise),
            ("embeddings", self.embeddings),
            ("ae", self.ae),
            ("mlp", self.mlp),
            ("crf", self.crf),
            ("eda", self.eda),
        ];
        rows.iter().map(|(k, v)| format!("seed.{k}={v}\n")).collect()
    }
}

pub fn load_grammar(cfg: &ExperimentConfig) -> Result<DomainGrammar> {
    let lexicon = match &cfg.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::default_lexicon(),
    };
    match &cfg.grammar {
        Some(p) => DomainGrammar::load(p, lexicon),
        None if cfg.lexicon.is_some() => {
            let mut g = DomainGrammar::default_grammar();
            g.lexicon = lexicon;
            Ok(g)
        }
        None => Ok(DomainGrammar::default_grammar()),
    }
}

pub fn noise_config(cfg: &ExperimentConfig, grammar: &DomainGrammar) -> Result<NoiseConfig> {
    let mut n = NoiseConfig::from_grammar(grammar, StageSeeds::new(cfg.seed).noise);
    let r = &cfg.noise;
    n.substitution = r.substitution;
    n.deletion = r.deletion;
    n.insertion = r.insertion;
    n.systematic = r.systematic;
    n.persistence = r.persistence;
    n.sharpness = r.sharpness;
    n.nbest = r.nbest;
    n.validate()?;
    Ok(n)
}

/// ASR hypotheses of one split with pap, MS-MLP confidences and references.
#[derive(Clone, Debug)]
pub struct Split {
    pub clean: Dataset,
    pub hyp: Dataset,
    pub cns: Vec<ConfusionNetwork>,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub seeds: StageSeeds,
    pub noise: NoiseConfig,
    pub train: Split,
    pub dev: Split,
    pub test: Split,
    pub embeddings: Vec<(String, EmbeddingTable)>,
    pub autoencoder: AutoencoderModel,
    pub ae_mse: f64,
    pub fused: EmbeddingTable,
    pub mlp: MsMlpModel,
    pub mlp_losses: Vec<f64>,
}

fn timed<T>(what: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f()?;
    log::info!("{what}: {:.1}s", t.elapsed().as_secs_f64());
    Ok(out)
}

fn simulate(clean: Dataset, noise: &NoiseConfig, annotator: &Annotator) -> Result<Split> {
    let hyp = corrupt_dataset(&clean, noise, annotator)?;
    let pairs: Vec<_> = hyp
        .utterances
        .par_iter()
        .map(|u| attach_pap(u, noise))
        .collect::<Result<_>>()?;
    let (utts, cns): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(Split {
        clean,
        hyp: Dataset { utterances: utts },
        cns,
    })
}

/// Corpus generation, ASR simulation and confidence estimation.
pub fn prepare(cfg: &ExperimentConfig, grammar: &DomainGrammar) -> Result<Prepared> {
    cfg.validate()?;
    let seeds = StageSeeds::new(cfg.seed);
    let noise = noise_config(cfg, grammar)?;
    let annotator = Annotator::new(grammar);
    let (train, dev, test) = timed("corpus + ASR simulation", || {
        let split = |n, s, p: &str| simulate(generate_corpus(grammar, n, s, p)?, &noise, &annotator);
        Ok((
            split(cfg.train, seeds.corpus_train, "train")?,
            split(cfg.dev, seeds.corpus_dev, "dev")?,
            split(cfg.test, seeds.corpus_test, "test")?,
        ))
    })?;
    let sentences: Vec<Vec<String>> = train
        .clean
        .utterances
        .iter()
        .map(|u| u.tokens.iter().map(|t| t.surface.clone()).collect())
        .collect();
    let mut extra = grammar.vocabulary();
    extra.extend(grammar.fillers.iter().cloned());
    let embeddings = synthetic_embeddings(&sentences, &extra, cfg.embedding_dim, seeds.embeddings)?;
    let ae_hyper = crate::confidence::AeHyper {
        seed: seeds.ae,
        ..cfg.ae.clone()
    };
    let (autoencoder, ae_mse) = timed("autoencoder", || train_autoencoder(&embeddings, &ae_hyper))?;
    let fused = fused_table(&autoencoder, &embeddings)?;
    let mlp_hyper = crate::confidence::MlpHyper {
        seed: seeds.mlp,
        ..cfg.mlp.clone()
    };
    let trained = timed("MS-MLP", || MsMlpModel::train(&train.hyp, fused.clone(), &mlp_hyper))?;
    let attach = |s: Split| Split {
        hyp: attach_confidences(&trained.model, &s.hyp),
        ..s
    };
    Ok(Prepared {
        seeds,
        noise,
        train: attach(train),
        dev: attach(dev),
        test: attach(test),
        embeddings,
        autoencoder,
        ae_mse,
        fused,
        mlp: trained.model,
        mlp_losses: trained.epoch_losses,
    })
}

#[derive(Clone, Debug)]
pub enum TrainedModel {
    Crf(CrfModel),
    Eda(EdaModel),
}

impl TrainedModel {
    /// Raw predictions, error labels included.
    pub fn predict(&self, data: &Dataset, lexicon: &Lexicon) -> Vec<TaggerOutput> {
        match self {
            TrainedModel::Crf(m) => m.predict(data, lexicon),
            TrainedModel::Eda(m) => m.predict(data, lexicon),
        }
    }

    pub fn labels(&self) -> &[Label] {
        match self {
            TrainedModel::Crf(m) => m.labels(),
            TrainedModel::Eda(m) => m.labels(),
        }
    }

    pub fn format(&self) -> String {
        match self {
            TrainedModel::Crf(m) => m.format(),
            TrainedModel::Eda(m) => m.format(),
        }
    }

    /// Dispatches on the header line.
    pub fn parse(text: &str) -> Result<Self> {
        match text.lines().next() {
            Some(h) if h.starts_with("slu-crf ") => Ok(TrainedModel::Crf(CrfModel::parse(text)?)),
            Some(h) if h.starts_with("slu-eda ") => Ok(TrainedModel::Eda(EdaModel::parse(text)?)),
            _ => Err(Error::Format("not a CRF or EDA tagger model".into())),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Training view of a split: error labels substituted when requested.
pub fn training_data(data: &Dataset, error_labels: bool) -> Result<Dataset> {
    if !error_labels {
        return Ok(data.clone());
    }
    Ok(Dataset {
        utterances: data.utterances.iter().map(augment_error_labels).collect::<Result<_>>()?,
    })
}

/// Trains one tagger. The label inventory covers train and dev, plus the
/// error labels when `sys.error_labels` is set.
pub fn train_tagger(
    sys: &SystemSpec,
    cfg: &ExperimentConfig,
    train: &Dataset,
    dev: Option<&Dataset>,
    seed: u64,
    lexicon: &Lexicon,
) -> Result<TrainedModel> {
    let spec = sys.feature_spec(cfg.bins)?;
    let train = training_data(train, sys.error_labels)?;
    let dev = dev.map(|d| training_data(d, sys.error_labels)).transpose()?;
    let mut labels = label_inventory(&train);
    if let Some(d) = &dev {
        labels.extend(label_inventory(d));
    }
    if sys.error_labels {
        labels.extend([Label::ErrorC, Label::ErrorN]);
    }
    labels.sort();
    labels.dedup();
    timed(&format!("train {}", sys.name), || match sys.tagger {
        Tagger::Crf => {
            let templates = match &cfg.templates {
                Some(p) => TemplateSet::load(p)?,
                None => TemplateSet::default(),
            };
            let setup = CrfSetup {
                templates,
                spec,
                hyper: crate::crf::CrfHyper {
                    seed,
                    ..cfg.crf.clone()
                },
                labels: Some(labels),
            };
            Ok(TrainedModel::Crf(train_crf(&train, dev.as_ref(), &setup, lexicon)?.model))
        }
        Tagger::Eda => {
            let hyper = crate::eda::EdaHyper {
                seed,
                ..cfg.eda.clone()
            };
            Ok(TrainedModel::Eda(train_eda(&train, &spec, lexicon, &hyper, Some(labels))?.model))
        }
    })
}

impl StageSeeds {
    /// Training seed of a named system.
    pub fn system(&self, sys: &SystemSpec) -> u64 {
        let base = match sys.tagger {
            Tagger::Crf => self.crf,
            Tagger::Eda => self.eda,
        };
        seed::derive(base, &sys.name)
    }
}

pub fn train_system(
    sys: &SystemSpec,
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    lexicon: &Lexicon,
) -> Result<TrainedModel> {
    train_tagger(
        sys,
        cfg,
        &prepared.train.hyp,
        Some(&prepared.dev.hyp),
        prepared.seeds.system(sys),
        lexicon,
    )
}

#[derive(Clone, Debug)]
pub struct SystemResult {
    pub spec: SystemSpec,
    pub model: TrainedModel,
    /// Predictions with error labels mapped to null.
    pub dev: Vec<TaggerOutput>,
    pub test: Vec<TaggerOutput>,
    pub dev_report: ScoreReport,
    pub test_report: ScoreReport,
}

pub fn run_system(
    sys: &SystemSpec,
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    lexicon: &Lexicon,
) -> Result<SystemResult> {
    let model = train_system(sys, cfg, prepared, lexicon)?;
    let strip = |o: Vec<TaggerOutput>| o.iter().map(strip_error_labels).collect::<Vec<_>>();
    let dev = strip(model.predict(&prepared.dev.hyp, lexicon));
    let test = strip(model.predict(&prepared.test.hyp, lexicon));
    Ok(SystemResult {
        spec: sys.clone(),
        dev_report: score(&prepared.dev.hyp, &dev, lexicon)?,
        test_report: score(&prepared.test.hyp, &test, lexicon)?,
        model,
        dev,
        test,
    })
}

#[derive(Clone, Debug)]
pub struct Combination {
    pub systems: Vec<String>,
    pub weights: Vec<f64>,
    pub dev_cer: f64,
    pub test: Vec<TaggerOutput>,
    pub test_report: ScoreReport,
    pub consensus: Vec<ConsensusOutput>,
    pub consensus_report: ScoreReport,
}

impl Combination {
    pub fn abstentions(&self) -> (usize, usize) {
        let a = self.consensus.iter().flat_map(|c| &c.abstained).filter(|a| **a).count();
        let n = self.consensus.iter().map(|c| c.abstained.len()).sum();
        (a, n)
    }
}

pub fn combine_systems(
    names: &[String],
    results: &[SystemResult],
    prepared: &Prepared,
    step: f64,
    lexicon: &Lexicon,
) -> Result<Combination> {
    let pick: Vec<&SystemResult> = names
        .iter()
        .map(|n| {
            results
                .iter()
                .find(|r| &r.spec.name == n)
                .ok_or_else(|| Error::Config(format!("combined system `{n}` has no result")))
        })
        .collect::<Result<_>>()?;
    let dev: Vec<Vec<TaggerOutput>> = pick.iter().map(|r| r.dev.clone()).collect();
    let test: Vec<Vec<TaggerOutput>> = pick.iter().map(|r| r.test.clone()).collect();
    let tuned = timed("weight tuning", || tune_weights(&dev, &prepared.dev.hyp, step, lexicon))?;
    let combined = combine_corpus(&test, &tuned.weights)?;
    let consensus = consensus_corpus(&test)?;
    Ok(Combination {
        systems: names.to_vec(),
        weights: tuned.weights,
        dev_cer: tuned.dev_cer,
        test_report: score(&prepared.test.hyp, &combined, lexicon)?,
        test: combined,
        consensus_report: score_consensus(&prepared.test.hyp, &consensus, lexicon)?,
        consensus,
    })
}

#[derive(Clone, Debug)]
pub struct ConfidenceSummary {
    pub nce_pap: f64,
    pub nce_mlp: f64,
    pub calibration_pap: CalibrationReport,
    pub calibration_mlp: CalibrationReport,
}

pub fn confidence_summary(test: &Dataset, bins: usize) -> Result<ConfidenceSummary> {
    let pap = confidence_records(test, true)?;
    let mlp = confidence_records(test, false)?;
    Ok(ConfidenceSummary {
        nce_pap: nce(&pap)?,
        nce_mlp: nce(&mlp)?,
        calibration_pap: calibration_bins(&pap, bins)?,
        calibration_mlp: calibration_bins(&mlp, bins)?,
    })
}

/// Word edit counts of the hypotheses against their references, summed
/// over utterances.
pub fn asr_counts(hyp: &Dataset) -> Result<EditCounts> {
    let mut total = EditCounts::default();
    for u in &hyp.utterances {
        let r = u.reference.as_ref().ok_or_else(|| Error::Schema {
            utterance: u.id.clone(),
            message: "hypothesis without reference".into(),
        })?;
        let refs: Vec<&str> = r.iter().map(|t| t.surface.as_str()).collect();
        total.add(&word_edit_counts(&refs, &u.surfaces()));
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub asr: EditCounts,
    pub confidence: ConfidenceSummary,
    pub systems: Vec<SystemResult>,
    pub combination: Option<Combination>,
}

pub fn run_experiment(cfg: &ExperimentConfig, grammar: &DomainGrammar, prepared: &Prepared) -> Result<ExperimentResult> {
    let lexicon = &grammar.lexicon;
    let systems = cfg
        .systems
        .iter()
        .map(|s| run_system(s, cfg, prepared, lexicon))
        .collect::<Result<Vec<_>>>()?;
    let combination = if cfg.combine.is_empty() {
        None
    } else {
        Some(combine_systems(&cfg.combine, &systems, prepared, cfg.grid_step, lexicon)?)
    };
    Ok(ExperimentResult {
        asr: asr_counts(&prepared.test.hyp)?,
        confidence: confidence_summary(&prepared.test.hyp, cfg.bins)?,
        systems,
        combination,
    })
}

fn score_row(s: &mut String, name: &str, r: &ScoreReport, extra: &str) {
    let _ = writeln!(
        s,
        "{name:<14} {:>7.2} {:>7.2} {:>7.3} {:>7.3} {:>5} {:>5} {:>5}  {extra}",
        r.cer(),
        r.cver(),
        r.precision(),
        r.recall(),
        r.concept.substitutions,
        r.concept.deletions,
        r.concept.insertions,
    );
}

/// Human-readable report.
pub fn format_report(cfg: &ExperimentConfig, prepared: &Prepared, result: &ExperimentResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "SLU pipeline report");
    let _ = writeln!(s, "seed {}", cfg.seed);
    let _ = writeln!(
        s,
        "utterances train {} / dev {} / test {}",
        prepared.train.hyp.len(),
        prepared.dev.hyp.len(),
        prepared.test.hyp.len()
    );
    let a = &result.asr;
    let _ = writeln!(s, "\n== ASR simulation (test) ==");
    let _ = writeln!(
        s,
        "reference words {}  WER {:.2}%  (S {} D {} I {})",
        a.reference_len(),
        100.0 * a.errors() as f64 / a.reference_len().max(1) as f64,
        a.substitutions,
        a.deletions,
        a.insertions
    );
    let c = &result.confidence;
    let _ = writeln!(s, "\n== Confidence measures (test) ==");
    let _ = writeln!(s, "{:<8} {:>8}", "measure", "NCE");
    let _ = writeln!(s, "{:<8} {:>8.4}", "pap", c.nce_pap);
    let _ = writeln!(s, "{:<8} {:>8.4}", "ms-mlp", c.nce_mlp);
    let _ = writeln!(s, "\ncalibration, ms-mlp:\n{}", c.calibration_mlp.to_text());
    let _ = writeln!(s, "calibration, pap:\n{}", c.calibration_pap.to_text());
    let _ = writeln!(s, "== Concept tagging (test) ==");
    let header = format!(
        "{:<14} {:>7} {:>7} {:>7} {:>7} {:>5} {:>5} {:>5}",
        "system", "CER", "CVER", "P", "R", "S", "D", "I"
    );
    let _ = writeln!(s, "{header}  features / dev CER");
    for r in &result.systems {
        let spec = r.spec.feature_spec(cfg.bins).map(|f| f.to_string()).unwrap_or_default();
        score_row(&mut s, &r.spec.name, &r.test_report, &format!("{spec} / {:.2}", r.dev_report.cer()));
    }
    if let Some(cb) = &result.combination {
        let _ = writeln!(s, "\n== Combination of {} (test) ==", cb.systems.join(", "));
        let _ = writeln!(s, "{header}");
        let w: Vec<String> = cb
            .systems
            .iter()
            .zip(&cb.weights)
            .map(|(n, w)| format!("{n}={w:.1}"))
            .collect();
        score_row(&mut s, "weighted", &cb.test_report, &format!("weights {} / dev CER {:.2}", w.join(" "), cb.dev_cer));
        let (ab, n) = cb.abstentions();
        score_row(&mut s, "consensus", &cb.consensus_report, &format!("abstained on {ab} of {n} words"));
    }
    s
}

/// Machine-readable counterpart of [`format_report`].
pub fn format_report_kv(prepared: &Prepared, result: &ExperimentResult) -> String {
    let mut s = String::new();
    let a = &result.asr;
    let _ = writeln!(s, "asr.words={}", a.reference_len());
    let _ = writeln!(s, "asr.errors={}", a.errors());
    let _ = writeln!(s, "asr.wer={}", 100.0 * a.errors() as f64 / a.reference_len().max(1) as f64);
    let _ = writeln!(s, "confidence.nce.pap={}", result.confidence.nce_pap);
    let _ = writeln!(s, "confidence.nce.mlp={}", result.confidence.nce_mlp);
    let _ = writeln!(s, "ae.mse={}", prepared.ae_mse);
    let push = |s: &mut String, prefix: &str, r: &ScoreReport| {
        for line in r.to_key_values().lines() {
            let _ = writeln!(s, "{prefix}.{line}");
        }
    };
    for r in &result.systems {
        push(&mut s, &format!("system.{}.test", r.spec.name), &r.test_report);
        push(&mut s, &format!("system.{}.dev", r.spec.name), &r.dev_report);
    }
    if let Some(cb) = &result.combination {
        for (n, w) in cb.systems.iter().zip(&cb.weights) {
            let _ = writeln!(s, "combination.weight.{n}={w}");
        }
        let _ = writeln!(s, "combination.dev.cer={}", cb.dev_cer);
        push(&mut s, "combination.test", &cb.test_report);
        push(&mut s, "consensus.test", &cb.consensus_report);
        let (ab, n) = cb.abstentions();
        let _ = writeln!(s, "consensus.abstained={ab}");
        let _ = writeln!(s, "consensus.positions={n}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_names_parse() {
        let s: SystemSpec = "crf-pap-err".parse().unwrap();
        assert_eq!(s.tagger, Tagger::Crf);
        assert!(s.error_labels);
        assert!(s.families.contains(&Family::Pap) && !s.families.contains(&Family::MlpConf));
        let e: SystemSpec = "eda".parse().unwrap();
        assert!(e.families.contains(&Family::MlpConf) && !e.error_labels);
        let n: SystemSpec = "crf-noconf".parse().unwrap();
        assert_eq!(n.families.len(), 4);
        for bad in ["svm", "crf-foo", "crf-err-pap", "eda-"] {
            assert!(bad.parse::<SystemSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn small_experiment_runs_end_to_end() {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in [
            ("train", "150"),
            ("dev", "40"),
            ("test", "40"),
            ("mlp.epochs", "1"),
            ("ae.epochs", "2"),
            ("crf.epochs", "1"),
            ("eda.epochs", "1"),
            ("eda.hidden", "4"),
            ("eda.embedding", "4"),
            ("eda.decoder", "4"),
            ("eda.attention", "4"),
            ("grid_step", "0.5"),
        ] {
            cfg.set(k, v).unwrap();
        }
        let g = load_grammar(&cfg).unwrap();
        let p = prepare(&cfg, &g).unwrap();
        let r = run_experiment(&cfg, &g, &p).unwrap();
        assert_eq!(r.systems.len(), 5);
        let report = format_report(&cfg, &p, &r);
        assert!(report.contains("weighted") && report.contains("consensus"));
        let kv = format_report_kv(&p, &r);
        assert!(kv.contains("system.crf-err.test.cer="));
        for sys in &r.systems {
            assert!(sys.test.iter().flat_map(|o| &o.labels).all(|l| !l.is_error()));
        }
    }
}
