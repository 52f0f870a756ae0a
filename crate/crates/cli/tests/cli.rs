use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slu_core::corpus::{read_dataset, write_outputs, TaggerOutput};

fn slu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slu"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = slu(dir, args);
    assert!(
        out.status.success(),
        "slu {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &[&str] = &[
    "--set", "mlp.epochs=1", "--set", "ae.epochs=2", "--set", "crf.epochs=2", "--set", "eda.epochs=1",
    "--set", "eda.hidden=4", "--set", "eda.embedding=4", "--set", "eda.decoder=4", "--set", "eda.attention=4",
];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(SMALL);
    v
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen", "--n", "100", "--seed", "7", "--out", "a.tsv"]);
    ok(d.path(), &["gen", "--n", "100", "--seed", "7", "--out", "b.tsv"]);
    ok(d.path(), &["gen", "--n", "100", "--seed", "8", "--out", "c.tsv"]);
    let a = fs::read(d.path().join("a.tsv")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b.tsv")).unwrap());
    assert_ne!(a, fs::read(d.path().join("c.tsv")).unwrap());
}

#[test]
fn scoring_a_reference_against_itself_gives_zero() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen", "--n", "30", "--seed", "1", "--out", "ref.tsv"]);
    let data = read_dataset(&d.path().join("ref.tsv")).unwrap();
    let gold: Vec<TaggerOutput> = data
        .utterances
        .iter()
        .map(|u| TaggerOutput {
            id: u.id.clone(),
            labels: u.labels(),
        })
        .collect();
    write_outputs(&d.path().join("gold.tags"), &gold).unwrap();
    let text = ok(d.path(), &["score", "--ref", "ref.tsv", "--hyp", "gold.tags"]);
    assert!(text.starts_with("CER 0.00%"), "{text}");
    let kv = ok(d.path(), &["score", "--ref", "ref.tsv", "--hyp", "gold.tags", "--kv"]);
    assert!(kv.starts_with("cer=0.0000\n"), "{kv}");
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(slu(d.path(), &["gen", "--bogus"]).status.code(), Some(1));
    assert_eq!(slu(d.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(slu(d.path(), &["--set", "nope=1", "gen", "--n", "3", "--out", "x"]).status.code(), Some(1));
    assert_eq!(slu(d.path(), &["--help"]).status.code(), Some(0));

    fs::write(d.path().join("bad.tsv"), "# id=u\nonly-one-column\n").unwrap();
    let out = slu(d.path(), &["strip", "--input", "missing.tags", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = slu(d.path(), &["corrupt", "--input", "bad.tsv", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[corpus]"));
}

#[test]
fn subcommands_chain_into_a_full_experiment() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen", "--n", "150", "--seed", "3", "--prefix", "tr", "--out", "train.ref.tsv", "--embeddings", "emb"]);
    ok(p, &["gen", "--n", "40", "--seed", "4", "--prefix", "dv", "--out", "dev.ref.tsv"]);
    for s in ["train", "dev"] {
        ok(p, &["corrupt", "--input", &format!("{s}.ref.tsv"), "--out", &format!("{s}.asr.tsv"), "--nbest", &format!("{s}.nbest")]);
        ok(p, &["cn", "--input", &format!("{s}.asr.tsv"), "--out", &format!("{s}.pap.tsv"), "--networks", &format!("{s}.cn")]);
    }
    let tables: Vec<String> = fs::read_dir(p.join("emb"))
        .unwrap()
        .map(|e| format!("emb/{}", e.unwrap().file_name().to_string_lossy()))
        .collect();
    assert_eq!(tables.len(), 3);
    let mut args = vec!["train-ae", "--out", "ae.model", "--fused", "fused.emb", "--embeddings"];
    let mut sorted = tables.clone();
    sorted.sort();
    args.extend(sorted.iter().map(String::as_str));
    ok(p, &with_small(&args));
    ok(p, &with_small(&["train-conf", "--train", "train.pap.tsv", "--embeddings", "fused.emb", "--out", "mlp.model"]));
    for s in ["train", "dev"] {
        ok(p, &["attach-conf", "--model", "mlp.model", "--input", &format!("{s}.pap.tsv"), "--out", &format!("{s}.tsv")]);
    }
    ok(p, &["feats", "--input", "dev.tsv", "--out", "dev.feats"]);
    assert!(fs::read_to_string(p.join("dev.feats")).unwrap().contains("conf="));

    ok(p, &with_small(&["train-crf", "--train", "train.tsv", "--dev", "dev.tsv", "--out", "crf.model"]));
    ok(p, &with_small(&["train-crf", "--train", "train.tsv", "--error-labels", "--out", "crf-err.model"]));
    ok(p, &with_small(&["train-eda", "--train", "train.tsv", "--dev", "dev.tsv", "--out", "eda.model"]));
    for m in ["crf", "crf-err", "eda"] {
        ok(p, &["predict", "--model", &format!("{m}.model"), "--input", "dev.tsv", "--out", &format!("{m}.raw")]);
        ok(p, &["strip", "--input", &format!("{m}.raw"), "--out", &format!("{m}.tags")]);
    }
    assert!(!fs::read_to_string(p.join("crf-err.tags")).unwrap().contains("ERROR-"));

    ok(p, &["combine", "--inputs", "crf.tags", "eda.tags", "crf-err.tags", "--tune", "crf.tags", "eda.tags", "crf-err.tags", "--tune-ref", "dev.tsv", "--out", "comb.tags"]);
    ok(p, &["combine", "--inputs", "crf.tags", "eda.tags", "--weights", "1,0", "--out", "first.tags"]);
    assert_eq!(fs::read(p.join("first.tags")).unwrap(), fs::read(p.join("crf.tags")).unwrap());
    ok(p, &["consensus", "--inputs", "crf.tags", "eda.tags", "crf-err.tags", "--out", "cons.txt"]);
    let single = ok(p, &["score", "--ref", "dev.tsv", "--hyp", "crf.tags"]);
    let cons = ok(p, &["score", "--ref", "dev.tsv", "--hyp", "cons.txt", "--consensus"]);
    assert!(single.starts_with("CER") && cons.starts_with("CER"));
    let calib = ok(p, &["calib", "--input", "dev.tsv", "--measure", "pap", "--csv", "pap.csv"]);
    assert!(calib.starts_with("nce="));
    assert!(fs::read_to_string(p.join("pap.csv")).unwrap().lines().count() > 1);
}

#[test]
fn small_pipeline_writes_a_replayable_bundle() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "train=200\ndev=60\ntest=60\ngrid_step=0.5\n";
    fs::write(d.path().join("run.cfg"), cfg).unwrap();
    let mut args = vec!["--config", "run.cfg", "pipeline", "--seed", "5", "--out", "bundle"];
    args.extend_from_slice(SMALL);
    let report = ok(d.path(), &args);
    for row in ["crf ", "eda ", "crf-err", "eda-err", "weighted", "consensus"] {
        assert!(report.contains(row), "report lacks {row}:\n{report}");
    }
    let manifest = fs::read_to_string(d.path().join("bundle/manifest.txt")).unwrap();
    assert!(manifest.contains("seed=5") && manifest.contains("train=200"));
    assert!(manifest.contains("seed.noise="));
    for line in manifest.lines().skip_while(|l| *l != "# sha256").skip(1) {
        let (hash, path) = line.split_once("  ").unwrap();
        assert_eq!(hash.len(), 64);
        assert!(d.path().join("bundle").join(path).exists(), "{path}");
    }
}
