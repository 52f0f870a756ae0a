use std::fs;
use std::path::{Path, PathBuf};

use slu_core::alignment::{attach_pap, corrupt_dataset, format_cns, format_nbest, sample_nbest};
use slu_core::confidence::{
    attach_confidences, fused_table, synthetic_embeddings, train_autoencoder, AeHyper, EmbeddingTable, MlpHyper,
    MsMlpModel,
};
use slu_core::corpus::{
    format_dataset, format_outputs, generate_corpus, read_dataset, read_outputs, strip_error_labels, Annotator,
    Dataset, DomainGrammar, TaggerOutput,
};
use slu_core::evaluation::{
    calibration_bins, combine_corpus, confidence_records, consensus_corpus, format_consensus, nce, parse_consensus,
    score, score_consensus, tune_weights,
};
use slu_core::experiment::{
    load_grammar, noise_config, train_tagger, ExperimentConfig, StageSeeds, SystemSpec, Tagger, TrainedModel,
};
use slu_core::features::{token_features, FeatureSpec};
use slu_core::Error;

use crate::args::{Cli, Command, Global, Measure, TaggerArgs};
use crate::{CliError, CliResult, Context};

pub fn load_config(global: &Global) -> CliResult<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(p) => ExperimentConfig::load(p).ctx("cli")?,
        None => ExperimentConfig::default(),
    };
    for o in &global.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
        cfg.set(k.trim(), v.trim()).ctx("cli")?;
    }
    Ok(cfg)
}

/// Creates missing parent directories, then writes.
pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)).ctx("cli")?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e)).ctx("cli")
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e)).ctx("cli")
}

fn emit(out: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn reference_sentences(data: &Dataset) -> Vec<Vec<String>> {
    data.utterances
        .iter()
        .map(|u| u.tokens.iter().map(|t| t.surface.clone()).collect())
        .collect()
}

/// Vocabulary beyond the training text: grammar words and fillers.
pub fn extra_vocabulary(grammar: &DomainGrammar) -> Vec<String> {
    let mut extra = grammar.vocabulary();
    extra.extend(grammar.fillers.iter().cloned());
    extra
}

fn read_tag_files(paths: &[PathBuf]) -> CliResult<Vec<Vec<TaggerOutput>>> {
    paths.iter().map(|p| read_outputs(p).ctx("corpus")).collect()
}

pub fn run(cli: Cli) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs.max(1))
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cli.global.jobs)))?;
    let mut cfg = load_config(&cli.global)?;
    let grammar = load_grammar(&cfg).ctx("corpus")?;
    let seeds = StageSeeds::new(cfg.seed);
    let lexicon = &grammar.lexicon;
    match cli.command {
        Command::Gen {
            n,
            seed,
            prefix,
            out,
            embeddings,
        } => {
            let seed = seed.unwrap_or(cfg.seed);
            let data = generate_corpus(&grammar, n, seed, &prefix).ctx("corpus")?;
            write_file(&out, &format_dataset(&data))?;
            if let Some(dir) = embeddings {
                let tables = synthetic_embeddings(
                    &reference_sentences(&data),
                    &extra_vocabulary(&grammar),
                    cfg.embedding_dim,
                    slu_core::seed::derive(seed, "embeddings"),
                )
                .ctx("confidence")?;
                for (name, t) in tables {
                    write_file(&dir.join(format!("{name}.emb")), &t.format())?;
                }
            }
        }
        Command::Corrupt { input, out, seed, nbest } => {
            let mut noise = noise_config(&cfg, &grammar).ctx("alignment_asr")?;
            noise.seed = seed.unwrap_or(noise.seed);
            let clean = read_dataset(&input).ctx("corpus")?;
            let hyp = corrupt_dataset(&clean, &noise, &Annotator::new(&grammar)).ctx("alignment_asr")?;
            write_file(&out, &format_dataset(&hyp))?;
            if let Some(path) = nbest {
                let lists = clean
                    .utterances
                    .iter()
                    .map(|u| sample_nbest(&u.id, &u.surfaces(), &noise, noise.nbest))
                    .collect::<Result<Vec<_>, _>>()
                    .ctx("alignment_asr")?;
                write_file(&path, &format_nbest(&lists))?;
            }
        }
        Command::Cn {
            input,
            out,
            seed,
            networks,
        } => {
            let mut noise = noise_config(&cfg, &grammar).ctx("alignment_asr")?;
            noise.seed = seed.unwrap_or(noise.seed);
            let hyp = read_dataset(&input).ctx("corpus")?;
            let (utts, cns): (Vec<_>, Vec<_>) = hyp
                .utterances
                .iter()
                .map(|u| attach_pap(u, &noise))
                .collect::<Result<Vec<_>, _>>()
                .ctx("alignment_asr")?
                .into_iter()
                .unzip();
            let data = Dataset::new(utts).ctx("corpus")?;
            write_file(&out, &format_dataset(&data))?;
            if let Some(p) = networks {
                write_file(&p, &format_cns(&cns))?;
            }
        }
        Command::Feats { input, out, features } => {
            let spec = FeatureSpec::parse(&features, cfg.bins).ctx("features")?;
            let data = read_dataset(&input).ctx("corpus")?;
            let mut text = String::new();
            for u in &data.utterances {
                text.push_str(&format!("# id={}\n", u.id));
                for (i, t) in u.tokens.iter().enumerate() {
                    let keys: Vec<String> = token_features(&u.tokens, i, &spec, lexicon)
                        .into_iter()
                        .map(|f| f.key)
                        .collect();
                    text.push_str(&format!("{}\t{}\n", t.surface, keys.join(" ")));
                }
                text.push('\n');
            }
            write_file(&out, &text)?;
        }
        Command::TrainAe { embeddings, out, fused } => {
            let mut tables = Vec::new();
            for p in &embeddings {
                let name = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "table".into());
                tables.push((name, EmbeddingTable::load(p).ctx("confidence")?));
            }
            let hyper = AeHyper {
                seed: seeds.ae,
                ..cfg.ae.clone()
            };
            let (model, mse) = train_autoencoder(&tables, &hyper).ctx("confidence")?;
            log::info!("autoencoder reconstruction MSE {mse:.6}");
            write_file(&out, &model.format())?;
            if let Some(p) = fused {
                write_file(&p, &fused_table(&model, &tables).ctx("confidence")?.format())?;
            }
        }
        Command::TrainConf { train, embeddings, out } => {
            let data = read_dataset(&train).ctx("corpus")?;
            let table = EmbeddingTable::load(&embeddings).ctx("confidence")?;
            let hyper = MlpHyper {
                seed: seeds.mlp,
                ..cfg.mlp.clone()
            };
            let t = MsMlpModel::train(&data, table, &hyper).ctx("confidence")?;
            write_file(&out, &t.model.format())?;
        }
        Command::AttachConf { model, input, out } => {
            let model = MsMlpModel::load(&model).ctx("confidence")?;
            let data = read_dataset(&input).ctx("corpus")?;
            write_file(&out, &format_dataset(&attach_confidences(&model, &data)))?;
        }
        Command::TrainCrf { tagger, templates } => {
            if templates.is_some() {
                cfg.templates = templates;
            }
            train_command(Tagger::Crf, tagger, &cfg, &seeds, lexicon)?;
        }
        Command::TrainEda { tagger } => train_command(Tagger::Eda, tagger, &cfg, &seeds, lexicon)?,
        Command::Predict { model, input, out } => {
            let model = TrainedModel::load(&model).ctx("tagger")?;
            let data = read_dataset(&input).ctx("corpus")?;
            write_file(&out, &format_outputs(&model.predict(&data, lexicon)))?;
        }
        Command::Strip { input, out } => {
            let o: Vec<TaggerOutput> = read_outputs(&input)
                .ctx("corpus")?
                .iter()
                .map(strip_error_labels)
                .collect();
            write_file(&out, &format_outputs(&o))?;
        }
        Command::Combine {
            inputs,
            weights,
            tune,
            tune_ref,
            step,
            out,
        } => {
            let systems = read_tag_files(&inputs)?;
            let weights = match (weights, tune_ref) {
                (Some(w), _) => w,
                (None, Some(r)) => {
                    if tune.len() != inputs.len() {
                        return Err(CliError::Usage(format!(
                            "--tune needs one dev file per input ({} given, {} expected)",
                            tune.len(),
                            inputs.len()
                        )));
                    }
                    let dev = read_tag_files(&tune)?;
                    let reference = read_dataset(&r).ctx("corpus")?;
                    let t = tune_weights(&dev, &reference, step.unwrap_or(cfg.grid_step), lexicon)
                        .ctx("evaluation")?;
                    eprintln!("tuned weights {:?} (dev CER {:.2})", t.weights, t.dev_cer);
                    t.weights
                }
                (None, None) => vec![1.0 / inputs.len() as f64; inputs.len()],
            };
            let combined = combine_corpus(&systems, &weights).ctx("evaluation")?;
            write_file(&out, &format_outputs(&combined))?;
        }
        Command::Consensus { inputs, out } => {
            let systems = read_tag_files(&inputs)?;
            let c = consensus_corpus(&systems).ctx("evaluation")?;
            write_file(&out, &format_consensus(&c))?;
        }
        Command::Score {
            reference,
            hyp,
            consensus,
            kv,
            out,
        } => {
            let r = read_dataset(&reference).ctx("corpus")?;
            let report = if consensus {
                let c = parse_consensus(&read_text(&hyp)?, &hyp.display().to_string()).ctx("evaluation")?;
                score_consensus(&r, &c, lexicon)
            } else {
                score(&r, &read_outputs(&hyp).ctx("corpus")?, lexicon)
            }
            .ctx("evaluation")?;
            let text = if kv { report.to_key_values() } else { report.to_text() };
            emit(out.as_ref(), &text)?;
        }
        Command::Calib {
            input,
            measure,
            bins,
            csv,
            out,
        } => {
            let data = read_dataset(&input).ctx("corpus")?;
            let recs = confidence_records(&data, matches!(measure, Measure::Pap)).ctx("evaluation")?;
            let n = nce(&recs).ctx("evaluation")?;
            let report = calibration_bins(&recs, bins.unwrap_or(cfg.bins)).ctx("evaluation")?;
            emit(out.as_ref(), &format!("nce={n}\n{}", report.to_text()))?;
            if let Some(p) = csv {
                write_file(&p, &report.to_csv())?;
            }
        }
        Command::Pipeline { seed, out } => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            crate::pipeline::run(&cfg, &grammar, &out)?;
        }
    }
    Ok(())
}

fn train_command(
    tagger: Tagger,
    a: TaggerArgs,
    cfg: &ExperimentConfig,
    seeds: &StageSeeds,
    lexicon: &slu_core::features::Lexicon,
) -> CliResult<()> {
    let spec = FeatureSpec::parse(&a.features, cfg.bins).ctx("features")?;
    let sys = SystemSpec {
        name: match tagger {
            Tagger::Crf => "crf".into(),
            Tagger::Eda => "eda".into(),
        },
        tagger,
        families: spec.families().collect(),
        error_labels: a.error_labels,
    };
    let module = match tagger {
        Tagger::Crf => "crf_tagger",
        Tagger::Eda => "eda_tagger",
    };
    let train = read_dataset(&a.train).ctx("corpus")?;
    let dev = a.dev.as_deref().map(read_dataset).transpose().ctx("corpus")?;
    let seed = a.seed.unwrap_or_else(|| seeds.system(&sys));
    let model = train_tagger(&sys, cfg, &train, dev.as_ref(), seed, lexicon).ctx(module)?;
    write_file(&a.out, &model.format())
}
