use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "slu", version, about = "Confidence-aware concept tagging on a synthetic dialogue corpus")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// key=value experiment configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads; outputs do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Log progress and stage timings to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Measure {
    Pap,
    Conf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an annotated reference corpus.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "utt")]
        prefix: String,
        #[arg(long, short)]
        out: PathBuf,
        /// Also write synthetic embedding tables built from this corpus into DIR.
        #[arg(long, value_name = "DIR")]
        embeddings: Option<PathBuf>,
    },
    /// Pass a reference corpus through the simulated recognizer.
    Corrupt {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Channel seed; defaults to the one derived from the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the n-best lists.
        #[arg(long, value_name = "FILE")]
        nbest: Option<PathBuf>,
    },
    /// Build confusion networks and fill the pap column of recognized utterances.
    Cn {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Must match the seed given to `corrupt`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        networks: Option<PathBuf>,
    },
    /// Dump the discrete features of every token.
    Feats {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Comma-separated families.
        #[arg(long, default_value = "surface,sem,syntactic,morph,pap,conf")]
        features: String,
    },
    /// Train the embedding-fusion autoencoder.
    TrainAe {
        /// Embedding tables; each is named after its file stem.
        #[arg(long, num_args = 1.., required = true)]
        embeddings: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Write the fused table here.
        #[arg(long, value_name = "FILE")]
        fused: Option<PathBuf>,
    },
    /// Train the multi-stream confidence estimator.
    TrainConf {
        #[arg(long)]
        train: PathBuf,
        /// Fused embedding table.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fill the conf column with confidence estimates.
    AttachConf {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train a CRF tagger.
    TrainCrf {
        #[command(flatten)]
        tagger: TaggerArgs,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Train an attention encoder-decoder tagger.
    TrainEda {
        #[command(flatten)]
        tagger: TaggerArgs,
    },
    /// Tag a corpus with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Map error labels to null.
    Strip {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Weighted vote over several tag files.
    Combine {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Tune weights on these dev outputs (same order as --inputs).
        #[arg(long, num_args = 1.., requires = "tune_ref", conflicts_with = "weights")]
        tune: Vec<PathBuf>,
        #[arg(long)]
        tune_ref: Option<PathBuf>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Keep only labels all systems agree on.
    Consensus {
        #[arg(long, num_args = 2.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Concept error rates of tag files against a reference corpus.
    Score {
        #[arg(long = "ref")]
        reference: PathBuf,
        /// A tag file or a consensus file.
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long)]
        consensus: bool,
        /// Write key=value lines instead of the text report.
        #[arg(long)]
        kv: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Normalized cross entropy and reliability bins of a confidence column.
    Calib {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "conf")]
        measure: Measure,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the whole experiment and write every artifact into a directory.
    Pipeline {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short, default_value = "slu-run")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct TaggerArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out data; its labels join the inventory.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, default_value = "surface,sem,syntactic,morph,pap,conf")]
    pub features: String,
    /// Train on ERROR-C / ERROR-N labels.
    #[arg(long)]
    pub error_labels: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out: PathBuf,
}
