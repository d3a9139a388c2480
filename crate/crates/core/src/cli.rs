//! Reproducible command runs: configuration merging, command execution and
//! run manifests. The `panomatch` binary is a thin wrapper over [`run`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::{synth_benchmark, Corpus, Side, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::{
    normalize_n_values, recall_at_n, sparse_csv, sparse_eval, toy_demo, SampleEvalConfig,
    ToyLayout, DEFAULT_THRESHOLD_M,
};
use crate::format;
use crate::linalg::{pca_apply, pca_fit, PcaModel, PcaOptions, RidgePolicy};
use crate::memvec::{AggMethod, AggregateOptions};
use crate::retrieval::{
    build_index, run_mode, total_comparisons, MemoryIndex, Mode, RankedItem, RankedList, RunOptions,
    Scoring,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Build,
    Query,
    Eval,
    SampleEval,
    PcaFit,
    Toy,
    Synth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Build => "build",
            Command::Query => "query",
            Command::Eval => "eval",
            Command::SampleEval => "sample-eval",
            Command::PcaFit => "pca-fit",
            Command::Toy => "toy",
            Command::Synth => "synth",
        }
    }
}

/// Effective settings of one run after merging defaults, the config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub descriptors: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub query_descriptors: Option<PathBuf>,
    pub query_metadata: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub pca_model: Option<PathBuf>,
    pub ranked: Option<PathBuf>,
    pub out: PathBuf,
    pub mode: Mode,
    pub agg: AggMethod,
    pub dim_out: Option<usize>,
    pub whiten: bool,
    pub renormalize: bool,
    pub normalize_memory: bool,
    pub cosine: bool,
    pub ridge: RidgePolicy,
    pub n_values: Vec<usize>,
    pub top_n: Option<usize>,
    pub threshold_m: f64,
    pub l: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub bandwidth: f64,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            descriptors: None,
            metadata: None,
            query_descriptors: None,
            query_metadata: None,
            index: None,
            pca_model: None,
            ranked: None,
            out: PathBuf::from("."),
            mode: Mode::Pan2Pan,
            agg: AggMethod::Pinv,
            dim_out: None,
            whiten: false,
            renormalize: true,
            normalize_memory: false,
            cosine: false,
            ridge: RidgePolicy::Auto,
            n_values: (1..=20).collect(),
            top_n: None,
            threshold_m: DEFAULT_THRESHOLD_M,
            l: vec![1, 2, 4, 8],
            reps: 10,
            seed: 0,
            bandwidth: 1.0,
            synth: SynthConfig::default(),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment. Keys are normalized to
/// lowercase with `_` for `-`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::validation(format!("config line {}: expected key = value", no + 1)))?;
        map.insert(normalize_key(k), v.trim().to_string());
    }
    Ok(map)
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

/// Parses `1,5,10`, `1-20` or a mix such as `1-5,10,20`.
pub fn parse_count_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::validation(format!("bad count list entry {part:?}"));
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(Error::validation("empty count list"));
    }
    Ok(out)
}

fn parse_bool(k: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::validation(format!("{k}: expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::validation(format!("{k}: cannot parse {v:?}")))
}

impl RunConfig {
    /// Applies settings in order; later sources win.
    pub fn from_sources<'a>(sources: impl IntoIterator<Item = &'a BTreeMap<String, String>>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for src in sources {
            for (k, v) in src {
                cfg.set(&normalize_key(k), v)?;
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let path = || Some(PathBuf::from(v));
        match key {
            "descriptors" => self.descriptors = path(),
            "metadata" => self.metadata = path(),
            "query_descriptors" => self.query_descriptors = path(),
            "query_metadata" => self.query_metadata = path(),
            "index" => self.index = path(),
            "pca_model" => self.pca_model = path(),
            "ranked" => self.ranked = path(),
            "out" => self.out = PathBuf::from(v),
            "mode" => self.mode = v.parse()?,
            "agg" => self.agg = v.parse()?,
            "dim_out" => self.dim_out = Some(parse_num(key, v)?),
            "whiten" => self.whiten = parse_bool(key, v)?,
            "renormalize" => self.renormalize = parse_bool(key, v)?,
            "normalize_memory" => self.normalize_memory = parse_bool(key, v)?,
            "cosine" => self.cosine = parse_bool(key, v)?,
            "ridge" => self.ridge = v.parse()?,
            "n_values" => self.n_values = normalize_n_values(&parse_count_list(v)?)?,
            "top_n" => self.top_n = Some(parse_num(key, v)?),
            "threshold_m" => self.threshold_m = parse_num(key, v)?,
            "l" => self.l = parse_count_list(v)?,
            "reps" => self.reps = parse_num(key, v)?,
            "seed" => {
                self.seed = parse_num(key, v)?;
                self.synth.seed = self.seed;
            }
            "bandwidth" => self.bandwidth = parse_num(key, v)?,
            "num_locations" => self.synth.num_locations = parse_num(key, v)?,
            "views" | "views_per_location" => self.synth.views_per_location = parse_num(key, v)?,
            "d" | "dim" => self.synth.d = parse_num(key, v)?,
            "noise" | "scene_noise" => self.synth.scene_noise = parse_num(key, v)?,
            "overlap" | "view_overlap" => self.synth.view_overlap = parse_num(key, v)?,
            other => return Err(Error::validation(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    /// Echo of every setting, for manifests.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let p = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        m.insert("descriptors".into(), p(&self.descriptors));
        m.insert("metadata".into(), p(&self.metadata));
        m.insert("query_descriptors".into(), p(&self.query_descriptors));
        m.insert("query_metadata".into(), p(&self.query_metadata));
        m.insert("index".into(), p(&self.index));
        m.insert("pca_model".into(), p(&self.pca_model));
        m.insert("ranked".into(), p(&self.ranked));
        m.insert("out".into(), self.out.display().to_string());
        m.insert("mode".into(), self.mode.to_string());
        m.insert("agg".into(), self.agg.to_string());
        m.insert("dim_out".into(), self.dim_out.map(|d| d.to_string()).unwrap_or_default());
        m.insert("whiten".into(), self.whiten.to_string());
        m.insert("renormalize".into(), self.renormalize.to_string());
        m.insert("normalize_memory".into(), self.normalize_memory.to_string());
        m.insert("cosine".into(), self.cosine.to_string());
        m.insert("ridge".into(), self.ridge.to_string());
        m.insert("n_values".into(), list(&self.n_values));
        m.insert("top_n".into(), self.top_n.map(|d| d.to_string()).unwrap_or_default());
        m.insert("threshold_m".into(), self.threshold_m.to_string());
        m.insert("l".into(), list(&self.l));
        m.insert("reps".into(), self.reps.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("bandwidth".into(), self.bandwidth.to_string());
        m.insert("num_locations".into(), self.synth.num_locations.to_string());
        m.insert("views".into(), self.synth.views_per_location.to_string());
        m.insert("d".into(), self.synth.d.to_string());
        m.insert("noise".into(), self.synth.scene_noise.to_string());
        m.insert("overlap".into(), self.synth.view_overlap.to_string());
        m
    }

    fn agg_options(&self) -> AggregateOptions {
        AggregateOptions {
            method: self.agg,
            ridge: self.ridge,
            normalize: self.normalize_memory,
        }
    }

    fn top_n(&self) -> usize {
        self.top_n
            .unwrap_or_else(|| self.n_values.last().copied().unwrap_or(1))
    }

    fn scoring(&self) -> Scoring {
        if self.cosine {
            Scoring::Cosine
        } else {
            Scoring::Inner
        }
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::validation(format!("missing required setting --{flag}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Record of one run: configuration echo, content hashes and a command report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub report: serde_json::Value,
    pub started_unix_s: u64,
    pub wall_time_ms: u128,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<FileHash> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileHash {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

struct Run<'a> {
    cfg: &'a RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn input(&mut self, p: &Path) -> PathBuf {
        self.inputs.push(p.to_path_buf());
        p.to_path_buf()
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.cfg.out.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn pca(&mut self) -> Result<Option<PcaModel>> {
        match &self.cfg.pca_model {
            Some(p) => {
                let p = self.input(p);
                Ok(Some(format::load_pca(p)?))
            }
            None => Ok(None),
        }
    }

    fn corpus(&mut self, desc: &Option<PathBuf>, meta: &Option<PathBuf>, side: Side, pca: Option<&PcaModel>) -> Result<Corpus> {
        let (dflag, mflag) = match side {
            Side::Dataset => ("descriptors", "metadata"),
            Side::Query => ("query-descriptors", "query-metadata"),
        };
        let d = self.input(require(desc, dflag)?);
        let m = self.input(require(meta, mflag)?);
        let (corpus, warnings) = format::load_corpus(d, m, side)?;
        for w in warnings {
            log::warn!("{side} location {} spreads over {:.2} m", w.location_id, w.max_spread_m);
        }
        match pca {
            Some(model) => corpus.map_descriptors(|v| pca_apply(model, v, self.cfg.renormalize)),
            None => Ok(corpus),
        }
    }

    fn dataset_index(&mut self, dataset: &Corpus) -> Result<(MemoryIndex, Option<serde_json::Value>)> {
        match &self.cfg.index {
            Some(p) => {
                let p = self.input(p);
                Ok((format::load_index(p)?, None))
            }
            None => {
                let (ix, report) = build_index(dataset, self.cfg.agg_options())?;
                Ok((ix, Some(serde_json::to_value(report).expect("serializable"))))
            }
        }
    }
}

/// Executes `command`, writes its outputs under `cfg.out` together with
/// `<command>.manifest.json`, and returns the manifest.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Manifest> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut run = Run {
        cfg,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let report = match command {
        Command::Synth => cmd_synth(&mut run)?,
        Command::PcaFit => cmd_pca_fit(&mut run)?,
        Command::Build => cmd_build(&mut run)?,
        Command::Query => cmd_query(&mut run)?,
        Command::Eval => cmd_eval(&mut run)?,
        Command::SampleEval => cmd_sample_eval(&mut run)?,
        Command::Toy => cmd_toy(&mut run)?,
    };
    let manifest = Manifest {
        command: command.name().to_string(),
        config: cfg.echo(),
        inputs: run.inputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
        outputs: run.outputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
        report,
        started_unix_s,
        wall_time_ms: started.elapsed().as_millis(),
    };
    let path = cfg.out.join(format!("{}.manifest.json", command.name()));
    let text = serde_json::to_string_pretty(&manifest).expect("serializable");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn cmd_synth(run: &mut Run<'_>) -> Result<serde_json::Value> {
    let cfg = &run.cfg.synth;
    let (db, q) = synth_benchmark(cfg)?;
    let out = run.cfg.out.clone();
    format::save_corpus(&db, out.join("dataset.pmdv"), out.join("dataset.csv"))?;
    format::save_corpus(&q, out.join("queries.pmdv"), out.join("queries.csv"))?;
    for f in ["dataset.pmdv", "dataset.csv", "queries.pmdv", "queries.csv"] {
        run.outputs.push(out.join(f));
    }
    Ok(json!({
        "dataset_locations": db.num_locations(),
        "dataset_images": db.num_images(),
        "query_locations": q.num_locations(),
        "query_images": q.num_images(),
        "d": db.d,
    }))
}

fn cmd_pca_fit(run: &mut Run<'_>) -> Result<serde_json::Value> {
    let d_out = run
        .cfg
        .dim_out
        .ok_or_else(|| Error::validation("missing required setting --dim-out"))?;
    let path = run.input(require(&run.cfg.descriptors, "descriptors")?);
    let (_, data) = format::load_descriptors(path)?;
    let model = pca_fit(&data, d_out, PcaOptions { whiten: run.cfg.whiten })?;
    run.write("pca.pmpc", &format::encode_pca(&model)?)?;
    let ratio = model.explained_variance_ratio();
    Ok(json!({
        "d": model.d(),
        "d_out": model.d_out(),
        "samples": data.cols(),
        "explained_variance": ratio.iter().sum::<f64>(),
    }))
}

fn cmd_build(run: &mut Run<'_>) -> Result<serde_json::Value> {
    let pca = run.pca()?;
    let (desc, meta) = (run.cfg.descriptors.clone(), run.cfg.metadata.clone());
    let dataset = run.corpus(&desc, &meta, Side::Dataset, pca.as_ref())?;
    let (index, report) = build_index(&dataset, run.cfg.agg_options())?;
    run.write("index.pmix", &format::encode_index(&index)?)?;
    Ok(serde_json::to_value(report).expect("serializable"))
}

fn load_pair(run: &mut Run<'_>) -> Result<(Corpus, Corpus)> {
    let pca = run.pca()?;
    let cfg = run.cfg;
    let dataset = run.corpus(&cfg.descriptors, &cfg.metadata, Side::Dataset, pca.as_ref())?;
    let queries = run.corpus(&cfg.query_descriptors, &cfg.query_metadata, Side::Query, pca.as_ref())?;
    Ok((queries, dataset))
}

fn execute_query(run: &mut Run<'_>, queries: &Corpus, dataset: &Corpus) -> Result<(Vec<RankedList>, serde_json::Value)> {
    let cfg = run.cfg;
    let index = match (cfg.mode, &cfg.index) {
        (Mode::Im2Pan | Mode::Pan2Pan, Some(_)) => Some(run.dataset_index(dataset)?.0),
        _ => None,
    };
    let opts = RunOptions {
        agg: cfg.agg_options(),
        top_n: cfg.top_n(),
        scoring: cfg.scoring(),
    };
    let ranked = run_mode(cfg.mode, queries, dataset, index.as_ref(), opts)?;
    let total = total_comparisons(&ranked);
    let report = json!({
        "mode": cfg.mode.to_string(),
        "agg": cfg.agg.to_string(),
        "queries": ranked.len(),
        "total_comparisons": total,
        "comparisons_per_query": if ranked.is_empty() { 0.0 } else { total as f64 / ranked.len() as f64 },
    });
    Ok((ranked, report))
}

/// Ranked lists as CSV with header `query_id,rank,target_id,score`.
pub fn ranked_csv(ranked: &[RankedList]) -> String {
    let mut s = String::from("query_id,rank,target_id,score\n");
    for l in ranked {
        for (r, item) in l.items.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{:?}\n",
                format::csv_field(&l.query_id),
                r + 1,
                format::csv_field(&item.target_id),
                item.score
            ));
        }
    }
    s
}

/// Reads ranked-list CSV; kinds come from the matching regime.
pub fn parse_ranked_csv<R: std::io::Read>(input: R, mode: Mode) -> Result<Vec<RankedList>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != ["query_id", "rank", "target_id", "score"] {
        return Err(Error::validation(format!(
            "ranked CSV header must be query_id,rank,target_id,score; got {}",
            headers.join(",")
        )));
    }
    let mut lists: Vec<RankedList> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let rank: usize = parse_num("rank", &rec[1])?;
        let score: f64 = parse_num("score", &rec[3])?;
        let qid = &rec[0];
        if lists.last().is_none_or(|l| l.query_id != qid) {
            lists.push(RankedList {
                query_id: qid.to_string(),
                query_kind: mode.query_kind(),
                target_kind: mode.target_kind(),
                items: Vec::new(),
                comparisons: 0,
            });
        }
        let list = lists.last_mut().expect("pushed above");
        if rank != list.items.len() + 1 {
            return Err(Error::validation(format!(
                "ranked CSV row {}: rank {rank} out of sequence for query {qid}",
                line + 1
            )));
        }
        list.items.push(RankedItem {
            target_id: rec[2].to_string(),
            score,
        });
        list.comparisons += 1;
    }
    Ok(lists)
}

fn cmd_query(run: &mut Run<'_>) -> Result<serde_json::Value> {
    let (queries, dataset) = load_pair(run)?;
    let (ranked, report) = execute_query(run, &queries, &dataset)?;
    run.write("ranked.csv", ranked_csv(&ranked).as_bytes())?;
    Ok(report)
}

fn cmd_eval(run: &mut Run<'_>) -> Result<serde_json::Value> {
    let cfg = run.cfg;
    let (queries, dataset) = load_pair(run)?;
    let (ranked, mut report) = match &cfg.ranked {
        Some(p) => {
            let p = run.input(p);
            let f = fs::File::open(&p).map_err(|e| Error::io(&p, e))?;
            (parse_ranked_csv(f, cfg.mode)?, json!({ "mode": cfg.mode.to_string(), "source": "ranked csv" }))
        }
        None => execute_query(run, &queries, &dataset)?,
    };
    let curve = recall_at_n(&ranked, &queries, &dataset, &cfg.n_values, cfg.threshold_m)?;
    run.write("recall.csv", curve.to_csv().as_bytes())?;
    report["recall"] = serde_json::to_value(&curve).expect("serializable");
    Ok(report)
}

fn cmd_sample_eval(run: &mut Run<'_>) -> Result<serde_json::Value> {
    let cfg = run.cfg;
    let (queries, dataset) = load_pair(run)?;
    let (index, _) = run.dataset_index(&dataset)?;
    let config = SampleEvalConfig {
        l_values: cfg.l.clone(),
        repetitions: cfg.reps,
        seed: cfg.seed,
        n_values: cfg.n_values.clone(),
        threshold_m: cfg.threshold_m,
    };
    let results = sparse_eval(&queries, &dataset, &index, &config, cfg.agg_options())?;
    run.write("sample_eval.csv", sparse_csv(&results).as_bytes())?;
    Ok(serde_json::to_value(&results).expect("serializable"))
}

fn cmd_toy(run: &mut Run<'_>) -> Result<serde_json::Value> {
    let r = toy_demo(&ToyLayout::bursty(), run.cfg.bandwidth, run.cfg.ridge)?;
    run.write("toy.csv", r.to_csv().as_bytes())?;
    Ok(json!({
        "similarity_sum": r.similarity_sum,
        "similarity_pinv": r.similarity_pinv,
        "weighted_grand_sum": r.weighted.sum(),
        "within_cluster_unweighted": r.within_cluster_unweighted,
        "within_cluster_weighted": r.within_cluster_weighted,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_parsing() {
        let m = parse_config_text("# run\nmode = im2im\nn-values=1-3 # trailing\n\nseed = 4\n").unwrap();
        assert_eq!(m["mode"], "im2im");
        assert_eq!(m["n_values"], "1-3");
        let cfg = RunConfig::from_sources([&m]).unwrap();
        assert_eq!(cfg.mode, Mode::Im2Im);
        assert_eq!(cfg.n_values, vec![1, 2, 3]);
        assert_eq!(cfg.synth.seed, 4);
        assert!(parse_config_text("novalue\n").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config_text("mode = im2im\nagg = sum\n").unwrap();
        let mut flags = BTreeMap::new();
        flags.insert("mode".to_string(), "pan2pan".to_string());
        let cfg = RunConfig::from_sources([&file, &flags]).unwrap();
        assert_eq!(cfg.mode, Mode::Pan2Pan);
        assert_eq!(cfg.agg, AggMethod::Sum);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut m = BTreeMap::new();
        m.insert("colour".to_string(), "red".to_string());
        assert!(RunConfig::from_sources([&m]).is_err());
    }

    #[test]
    fn count_lists() {
        assert_eq!(parse_count_list("1-3,5").unwrap(), vec![1, 2, 3, 5]);
        assert_eq!(parse_count_list("2, 4").unwrap(), vec![2, 4]);
        assert!(parse_count_list("3-1").is_err());
        assert!(parse_count_list("").is_err());
        assert!(parse_count_list("a").is_err());
    }

    #[test]
    fn ranked_csv_round_trip() {
        let lists = vec![RankedList {
            query_id: "q1".into(),
            query_kind: crate::retrieval::UnitKind::Location,
            target_kind: crate::retrieval::UnitKind::Location,
            items: vec![
                RankedItem { target_id: "a".into(), score: 2.5 },
                RankedItem { target_id: "b".into(), score: -0.125 },
            ],
            comparisons: 2,
        }];
        let csv = ranked_csv(&lists);
        assert_eq!(csv, "query_id,rank,target_id,score\nq1,1,a,2.5\nq1,2,b,-0.125\n");
        assert_eq!(parse_ranked_csv(csv.as_bytes(), Mode::Pan2Pan).unwrap(), lists);
        assert!(parse_ranked_csv("query_id,rank,target_id,score\nq,2,a,1\n".as_bytes(), Mode::Pan2Pan).is_err());
    }
}
