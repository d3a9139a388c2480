//! Memory indexes and exhaustive ranking for the four matching regimes.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::memvec::{aggregate, AggMethod, AggregateOptions, MemoryVector};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub location_id: String,
    pub vector: MemoryVector,
}

/// One memory vector per dataset location.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryIndex {
    pub method: AggMethod,
    pub d: usize,
    pub entries: Vec<IndexEntry>,
}

impl MemoryIndex {
    pub fn new(method: AggMethod, d: usize, entries: Vec<IndexEntry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.location_id.as_str()) {
                return Err(Error::validation(format!("duplicate location id {}", e.location_id)));
            }
            if e.vector.dim() != d {
                return Err(Error::validation(format!(
                    "entry {} has dimension {}, index has {d}",
                    e.location_id,
                    e.vector.dim()
                )));
            }
            if e.vector.method != method {
                return Err(Error::validation(format!(
                    "entry {} built with {}, index is {method}",
                    e.location_id, e.vector.method
                )));
            }
            if method == AggMethod::Precomputed && e.vector.source_count != 1 {
                return Err(Error::validation(format!(
                    "precomputed entry {} has source count {}",
                    e.location_id, e.vector.source_count
                )));
            }
        }
        Ok(MemoryIndex { method, d, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-location aggregation telemetry from [`build_index`].
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BuildReport {
    pub method: String,
    pub locations: usize,
    pub group_sizes: Vec<(String, usize)>,
    /// Locations whose Gram matrix needed a ridge, with the ridge applied.
    pub ridge_retries: Vec<(String, f64)>,
    /// Locations with at least as many views as dimensions.
    pub overcomplete: Vec<String>,
}

/// Aggregates every location of `corpus` into one memory vector.
pub fn build_index(corpus: &Corpus, opts: AggregateOptions) -> Result<(MemoryIndex, BuildReport)> {
    let entries = corpus
        .groups
        .par_iter()
        .map(|g| {
            let vector = aggregate(&g.matrix(), opts).map_err(|e| label(e, &g.location_id))?;
            Ok(IndexEntry {
                location_id: g.location_id.clone(),
                vector,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = BuildReport {
        method: opts.method.to_string(),
        locations: entries.len(),
        group_sizes: corpus
            .groups
            .iter()
            .map(|g| (g.location_id.clone(), g.len()))
            .collect(),
        ridge_retries: entries
            .iter()
            .filter(|e| e.vector.ridge_used > 0.0)
            .map(|e| (e.location_id.clone(), e.vector.ridge_used))
            .collect(),
        overcomplete: entries
            .iter()
            .filter(|e| e.vector.overcomplete)
            .map(|e| e.location_id.clone())
            .collect(),
    };
    Ok((MemoryIndex::new(opts.method, corpus.d, entries)?, report))
}

fn label(e: Error, location_id: &str) -> Error {
    match e {
        Error::Singular { .. } => e.with_context(&format!("location {location_id}")),
        Error::Validation(msg) => Error::Validation(format!("location {location_id}: {msg}")),
        other => other,
    }
}

/// Whether an identifier names a single image or a whole location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Image,
    Location,
}

/// Anything that can be exhaustively scored against a query vector.
pub trait Targets: Sync {
    fn kind(&self) -> UnitKind;
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn id(&self, i: usize) -> &str;
    fn vector(&self, i: usize) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Targets for MemoryIndex {
    fn kind(&self) -> UnitKind {
        UnitKind::Location
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn len(&self) -> usize {
        self.entries.len()
    }
    fn id(&self, i: usize) -> &str {
        &self.entries[i].location_id
    }
    fn vector(&self, i: usize) -> &[f64] {
        &self.entries[i].vector.values
    }
}

/// Flat list of every dataset image, for the image-side regimes.
#[derive(Debug, Clone)]
pub struct ImageIndex<'a> {
    d: usize,
    ids: Vec<&'a str>,
    vectors: Vec<&'a [f64]>,
}

impl<'a> ImageIndex<'a> {
    pub fn from_corpus(corpus: &'a Corpus) -> Self {
        let (ids, vectors) = corpus
            .images()
            .map(|r| (r.image_id.as_str(), r.descriptor.as_slice()))
            .unzip();
        ImageIndex {
            d: corpus.d,
            ids,
            vectors,
        }
    }
}

impl Targets for ImageIndex<'_> {
    fn kind(&self) -> UnitKind {
        UnitKind::Image
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn len(&self) -> usize {
        self.ids.len()
    }
    fn id(&self, i: usize) -> &str {
        self.ids[i]
    }
    fn vector(&self, i: usize) -> &[f64] {
        self.vectors[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scoring {
    /// Raw inner product.
    #[default]
    Inner,
    /// Inner product of L2-normalized vectors (zero vectors score 0).
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedItem {
    pub target_id: String,
    pub score: f64,
}

/// Best-first ranking of targets for one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub query_id: String,
    pub query_kind: UnitKind,
    pub target_kind: UnitKind,
    /// Descending score; equal scores ordered by ascending target id.
    pub items: Vec<RankedItem>,
    /// Number of similarity evaluations performed.
    pub comparisons: usize,
}

/// A query vector together with the unit it stands for.
#[derive(Debug, Clone, Copy)]
pub struct QueryUnit<'a> {
    pub id: &'a str,
    pub kind: UnitKind,
    pub vector: &'a [f64],
}

/// Scores every target against `query` and keeps the best `top_n`.
pub fn search<T: Targets + ?Sized>(
    query: QueryUnit<'_>,
    targets: &T,
    top_n: usize,
    scoring: Scoring,
) -> Result<RankedList> {
    if top_n == 0 {
        return Err(Error::validation("top_n must be at least 1"));
    }
    if query.vector.len() != targets.dim() {
        return Err(Error::validation(format!(
            "query {} has dimension {}, targets have {}",
            query.id,
            query.vector.len(),
            targets.dim()
        )));
    }
    let qn = norm(query.vector);
    let mut scored: Vec<(usize, f64)> = (0..targets.len())
        .map(|i| {
            let v = targets.vector(i);
            let s = dot(query.vector, v);
            let s = match scoring {
                Scoring::Inner => s,
                Scoring::Cosine => {
                    let denom = qn * norm(v);
                    if denom > 0.0 {
                        s / denom
                    } else {
                        0.0
                    }
                }
            };
            (i, s)
        })
        .collect();
    let comparisons = scored.len();
    let order = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
        b.1.total_cmp(&a.1).then_with(|| targets.id(a.0).cmp(targets.id(b.0)))
    };
    if top_n < scored.len() {
        scored.select_nth_unstable_by(top_n - 1, order);
        scored.truncate(top_n);
    }
    scored.sort_unstable_by(order);
    Ok(RankedList {
        query_id: query.id.to_string(),
        query_kind: query.kind,
        target_kind: targets.kind(),
        items: scored
            .into_iter()
            .map(|(i, score)| RankedItem {
                target_id: targets.id(i).to_string(),
                score,
            })
            .collect(),
        comparisons,
    })
}

/// Ranks index locations for a location-level memory vector, rejecting a
/// memory vector built differently from the index.
pub fn search_index(
    query_id: &str,
    query: &MemoryVector,
    index: &MemoryIndex,
    top_n: usize,
    scoring: Scoring,
) -> Result<RankedList> {
    if query.method != index.method {
        return Err(Error::validation(format!(
            "query aggregated with {} cannot be matched against a {} index",
            query.method, index.method
        )));
    }
    search(
        QueryUnit {
            id: query_id,
            kind: UnitKind::Location,
            vector: &query.values,
        },
        index,
        top_n,
        scoring,
    )
}

/// Matching regime: which sides are aggregated per location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    Im2Im,
    Im2Pan,
    Pan2Im,
    Pan2Pan,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Im2Im, Mode::Im2Pan, Mode::Pan2Im, Mode::Pan2Pan];

    pub fn query_kind(self) -> UnitKind {
        match self {
            Mode::Im2Im | Mode::Im2Pan => UnitKind::Image,
            Mode::Pan2Im | Mode::Pan2Pan => UnitKind::Location,
        }
    }

    pub fn target_kind(self) -> UnitKind {
        match self {
            Mode::Im2Im | Mode::Pan2Im => UnitKind::Image,
            Mode::Im2Pan | Mode::Pan2Pan => UnitKind::Location,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Im2Im => "im2im",
            Mode::Im2Pan => "im2pan",
            Mode::Pan2Im => "pan2im",
            Mode::Pan2Pan => "pan2pan",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "im2im" => Ok(Mode::Im2Im),
            "im2pan" => Ok(Mode::Im2Pan),
            "pan2im" => Ok(Mode::Pan2Im),
            "pan2pan" => Ok(Mode::Pan2Pan),
            other => Err(Error::validation(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub agg: AggregateOptions,
    pub top_n: usize,
    pub scoring: Scoring,
}

impl RunOptions {
    pub fn new(method: AggMethod, top_n: usize) -> Self {
        RunOptions {
            agg: AggregateOptions::new(method),
            top_n,
            scoring: Scoring::Inner,
        }
    }
}

/// Runs one regime over all query units.
///
/// `index`, when given, is used for the location-target regimes instead of
/// aggregating `dataset`; for `pan2pan` its method must match `opts.agg`.
pub fn run_mode(
    mode: Mode,
    queries: &Corpus,
    dataset: &Corpus,
    index: Option<&MemoryIndex>,
    opts: RunOptions,
) -> Result<Vec<RankedList>> {
    if queries.d != dataset.d {
        return Err(Error::validation(format!(
            "query dimension {} differs from dataset dimension {}",
            queries.d, dataset.d
        )));
    }
    let built;
    let location_index = match (mode.target_kind(), index) {
        (UnitKind::Location, Some(ix)) => Some(ix),
        (UnitKind::Location, None) => {
            built = build_index(dataset, opts.agg)?.0;
            Some(&built)
        }
        (UnitKind::Image, _) => None,
    };
    if let (Mode::Pan2Pan, Some(ix)) = (mode, location_index) {
        if ix.method != opts.agg.method {
            return Err(Error::validation(format!(
                "pan2pan needs matching aggregation on both sides: query {}, index {}",
                opts.agg.method, ix.method
            )));
        }
    }
    match mode {
        Mode::Im2Im => {
            let targets = ImageIndex::from_corpus(dataset);
            image_queries(queries, &targets, opts)
        }
        Mode::Im2Pan => image_queries(queries, location_index.expect("built above"), opts),
        Mode::Pan2Im => {
            let targets = ImageIndex::from_corpus(dataset);
            let qs = aggregate_queries(queries, opts.agg)?;
            qs.par_iter()
                .map(|(id, mv)| {
                    search(
                        QueryUnit {
                            id,
                            kind: UnitKind::Location,
                            vector: &mv.values,
                        },
                        &targets,
                        opts.top_n,
                        opts.scoring,
                    )
                })
                .collect()
        }
        Mode::Pan2Pan => {
            let qs = aggregate_queries(queries, opts.agg)?;
            search_memory_queries(&qs, location_index.expect("built above"), opts.top_n, opts.scoring)
        }
    }
}

fn image_queries<T: Targets + ?Sized>(queries: &Corpus, targets: &T, opts: RunOptions) -> Result<Vec<RankedList>> {
    let images: Vec<_> = queries.images().collect();
    images
        .par_iter()
        .map(|r| {
            search(
                QueryUnit {
                    id: &r.image_id,
                    kind: UnitKind::Image,
                    vector: &r.descriptor,
                },
                targets,
                opts.top_n,
                opts.scoring,
            )
        })
        .collect()
}

/// Aggregates every query location into a memory vector.
pub fn aggregate_queries(queries: &Corpus, agg: AggregateOptions) -> Result<Vec<(String, MemoryVector)>> {
    queries
        .groups
        .par_iter()
        .map(|g| {
            let mv = aggregate(&g.matrix(), agg).map_err(|e| label(e, &g.location_id))?;
            Ok((g.location_id.clone(), mv))
        })
        .collect()
}

/// Ranks index locations for each aggregated query.
pub fn search_memory_queries(
    queries: &[(String, MemoryVector)],
    index: &MemoryIndex,
    top_n: usize,
    scoring: Scoring,
) -> Result<Vec<RankedList>> {
    queries
        .par_iter()
        .map(|(id, mv)| search_index(id, mv, index, top_n, scoring))
        .collect()
}

pub fn total_comparisons(lists: &[RankedList]) -> usize {
    lists.iter().map(|l| l.comparisons).sum()
}
