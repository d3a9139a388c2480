use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use panomatch::cli::{parse_config_text, run, Command, RunConfig};
use panomatch::Error;

#[derive(Parser)]
#[command(name = "panomatch", version, about = "Panorama-to-panorama location recognition")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Cmd {
    /// Aggregate dataset locations into an index file
    Build,
    /// Rank dataset items for every query unit
    Query,
    /// Recall@N of a regime (or of a ranked CSV)
    Eval,
    /// Recall@N with l randomly sampled views per query location
    SampleEval,
    /// Fit a PCA projection on dataset descriptors
    PcaFit,
    /// Two-set democratization toy
    Toy,
    /// Write a synthetic benchmark
    Synth,
}

#[derive(Args)]
struct Opts {
    /// key = value settings file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["im2im", "im2pan", "pan2im", "pan2pan"])]
    mode: Option<String>,
    #[arg(long, global = true, value_parser = ["sum", "pinv", "precomputed"])]
    agg: Option<String>,
    #[arg(long, global = true)]
    dim_out: Option<String>,
    /// off, auto or a fixed nonnegative value
    #[arg(long, global = true)]
    ridge: Option<String>,
    #[arg(long, global = true)]
    threshold_m: Option<String>,
    /// e.g. 1-20 or 1,5,10
    #[arg(long, global = true)]
    n_values: Option<String>,
    /// sampled views per query, e.g. 2,4,6,8
    #[arg(long, global = true)]
    l: Option<String>,
    #[arg(long, global = true)]
    reps: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    descriptors: Option<String>,
    #[arg(long, global = true)]
    metadata: Option<String>,
    #[arg(long, global = true)]
    query_descriptors: Option<String>,
    #[arg(long, global = true)]
    query_metadata: Option<String>,
    #[arg(long, global = true)]
    index: Option<String>,
    #[arg(long, global = true)]
    pca_model: Option<String>,
    #[arg(long, global = true)]
    ranked: Option<String>,
    /// any other setting as key=value (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Opts {
    fn overrides(&self) -> Result<BTreeMap<String, String>, Error> {
        let mut m = BTreeMap::new();
        let named = [
            ("mode", &self.mode),
            ("agg", &self.agg),
            ("dim_out", &self.dim_out),
            ("ridge", &self.ridge),
            ("threshold_m", &self.threshold_m),
            ("n_values", &self.n_values),
            ("l", &self.l),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("out", &self.out),
            ("descriptors", &self.descriptors),
            ("metadata", &self.metadata),
            ("query_descriptors", &self.query_descriptors),
            ("query_metadata", &self.query_metadata),
            ("index", &self.index),
            ("pca_model", &self.pca_model),
            ("ranked", &self.ranked),
        ];
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            m.insert(k.trim().to_string(), v.trim().to_string());
        }
        for (k, v) in named {
            if let Some(v) = v {
                m.insert(k.to_string(), v.clone());
            }
        }
        Ok(m)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Build => Command::Build,
        Cmd::Query => Command::Query,
        Cmd::Eval => Command::Eval,
        Cmd::SampleEval => Command::SampleEval,
        Cmd::PcaFit => Command::PcaFit,
        Cmd::Toy => Command::Toy,
        Cmd::Synth => Command::Synth,
    };
    let result = (|| {
        let file = match &cli.opts.config {
            Some(p) => parse_config_text(
                &std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?,
            )?,
            None => BTreeMap::new(),
        };
        let cfg = RunConfig::from_sources([&file, &cli.opts.overrides()?])?;
        run(command, &cfg)
    })();
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
