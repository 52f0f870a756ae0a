use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use slu_core::alignment::format_cns;
use slu_core::corpus::{format_dataset, format_outputs, DomainGrammar};
use slu_core::evaluation::format_consensus;
use slu_core::experiment::{format_report, format_report_kv, prepare, run_experiment, ExperimentConfig};

use crate::commands::write_file;
use crate::{CliResult, Context};

/// Relative path to contents, written in key order.
#[derive(Default)]
struct Bundle(BTreeMap<String, String>);

impl Bundle {
    fn add(&mut self, path: impl Into<String>, contents: String) {
        self.0.insert(path.into(), contents);
    }
}

pub fn run(cfg: &ExperimentConfig, grammar: &DomainGrammar, out: &Path) -> CliResult<()> {
    cfg.validate().ctx("cli")?;
    let prepared = prepare(cfg, grammar).ctx("pipeline")?;
    let result = run_experiment(cfg, grammar, &prepared).ctx("pipeline")?;

    let mut b = Bundle::default();
    for (name, split) in [("train", &prepared.train), ("dev", &prepared.dev), ("test", &prepared.test)] {
        b.add(format!("data/{name}.ref.tsv"), format_dataset(&split.clean));
        b.add(format!("data/{name}.hyp.tsv"), format_dataset(&split.hyp));
        b.add(format!("data/{name}.cn"), format_cns(&split.cns));
    }
    for (name, table) in &prepared.embeddings {
        b.add(format!("embeddings/{name}.emb"), table.format());
    }
    b.add("embeddings/fused.emb", prepared.fused.format());
    b.add("models/ae.model", prepared.autoencoder.format());
    b.add("models/mlp.model", prepared.mlp.format());
    for r in &result.systems {
        let n = &r.spec.name;
        b.add(format!("models/{n}.model"), r.model.format());
        b.add(format!("tags/{n}.dev.tags"), format_outputs(&r.dev));
        b.add(format!("tags/{n}.test.tags"), format_outputs(&r.test));
    }
    if let Some(c) = &result.combination {
        b.add("tags/combination.test.tags", format_outputs(&c.test));
        b.add("tags/consensus.test.cons", format_consensus(&c.consensus));
    }
    b.add("calibration/pap.csv", result.confidence.calibration_pap.to_csv());
    b.add("calibration/mlp.csv", result.confidence.calibration_mlp.to_csv());
    b.add("report.txt", format_report(cfg, &prepared, &result));
    b.add("report.kv", format_report_kv(&prepared, &result));

    let mut manifest = String::from("# configuration\n");
    manifest.push_str(&cfg.to_key_values());
    manifest.push_str("# derived seeds\n");
    manifest.push_str(&prepared.seeds.to_key_values());
    manifest.push_str(&format!("noise.target_wer={}\n", prepared.noise.target_wer()));
    manifest.push_str("# sha256\n");
    for (path, contents) in &b.0 {
        write_file(&out.join(path), contents)?;
        manifest.push_str(&format!("{}  {path}\n", hex::encode(Sha256::digest(contents.as_bytes()))));
    }
    write_file(&out.join("manifest.txt"), &manifest)?;
    print!("{}", format_report(cfg, &prepared, &result));
    Ok(())
}
