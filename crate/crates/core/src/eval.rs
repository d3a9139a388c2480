//! Recall@N against geographic ground truth, sparse-query sampling and the
//! two-set democratization toy.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::{geo_distance, Corpus, GeoPosition};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, RidgePolicy};
use crate::memvec::{
    aggregate, cross_weight_matrix, pinv_vector, similarity_pinv, similarity_sum, sum_vector,
    AggregateOptions, MemoryVector,
};
use crate::retrieval::{search_memory_queries, MemoryIndex, RankedList, Scoring, UnitKind};

/// Default ground-truth radius in meters.
pub const DEFAULT_THRESHOLD_M: f64 = 25.0;

/// Recall at each requested cutoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallCurve {
    pub n_values: Vec<usize>,
    pub recall: Vec<f64>,
    /// Number of queries with a correct item within each cutoff.
    pub hits: Vec<usize>,
    pub query_count: usize,
}

impl RecallCurve {
    pub fn at(&self, n: usize) -> Option<f64> {
        self.n_values.iter().position(|&v| v == n).map(|i| self.recall[i])
    }

    /// CSV with header `N,recall,query_count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,recall,query_count\n");
        for (n, r) in self.n_values.iter().zip(&self.recall) {
            s.push_str(&format!("{n},{r:?},{}\n", self.query_count));
        }
        s
    }
}

/// Sorted, deduplicated cutoffs; each must be at least 1.
pub fn normalize_n_values(n_values: &[usize]) -> Result<Vec<usize>> {
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(Error::validation("N values must be a nonempty list of positive counts"));
    }
    let mut v = n_values.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

struct Positions<'a> {
    images: HashMap<&'a str, GeoPosition>,
    locations: HashMap<&'a str, GeoPosition>,
}

impl<'a> Positions<'a> {
    fn new(corpus: &'a Corpus) -> Self {
        Positions {
            images: corpus.images().map(|r| (r.image_id.as_str(), r.position)).collect(),
            locations: corpus
                .groups
                .iter()
                .map(|g| (g.location_id.as_str(), g.position))
                .collect(),
        }
    }

    fn get(&self, kind: UnitKind, id: &str) -> Result<GeoPosition> {
        let map = match kind {
            UnitKind::Image => &self.images,
            UnitKind::Location => &self.locations,
        };
        map.get(id).copied().ok_or_else(|| {
            Error::validation(format!("unresolvable {} id {id}", match kind {
                UnitKind::Image => "image",
                UnitKind::Location => "location",
            }))
        })
    }
}

/// 1-based rank of the first item within `threshold_m` of its query, if any.
fn first_hits(
    ranked: &[RankedList],
    queries: &Corpus,
    dataset: &Corpus,
    threshold_m: f64,
) -> Result<Vec<Option<usize>>> {
    let qpos = Positions::new(queries);
    let dpos = Positions::new(dataset);
    ranked
        .iter()
        .map(|list| {
            let q = qpos.get(list.query_kind, &list.query_id)?;
            for (rank, item) in list.items.iter().enumerate() {
                let t = dpos.get(list.target_kind, &item.target_id)?;
                if geo_distance(&q, &t)? <= threshold_m {
                    return Ok(Some(rank + 1));
                }
            }
            Ok(None)
        })
        .collect()
}

fn curve_from_hits(first: &[Option<usize>], n_values: &[usize], repetitions: usize) -> RecallCurve {
    let total = first.len();
    let hits: Vec<usize> = n_values
        .iter()
        .map(|&n| first.iter().filter(|h| h.is_some_and(|r| r <= n)).count())
        .collect();
    RecallCurve {
        n_values: n_values.to_vec(),
        recall: hits.iter().map(|&h| h as f64 / total as f64).collect(),
        hits,
        query_count: total / repetitions.max(1),
    }
}

/// Fraction of queries with at least one top-`N` target within `threshold_m`.
///
/// Image targets are placed at their own position, location targets at the
/// location position; the same applies to queries.
pub fn recall_at_n(
    ranked: &[RankedList],
    queries: &Corpus,
    dataset: &Corpus,
    n_values: &[usize],
    threshold_m: f64,
) -> Result<RecallCurve> {
    if ranked.is_empty() {
        return Err(Error::validation("no ranked lists to evaluate"));
    }
    if !(threshold_m >= 0.0) {
        return Err(Error::validation("threshold must be nonnegative"));
    }
    let n_values = normalize_n_values(n_values)?;
    let first = first_hits(ranked, queries, dataset, threshold_m)?;
    Ok(curve_from_hits(&first, &n_values, 1))
}

/// Sparse-query protocol: sample `l` views per query location, aggregate,
/// match against the dataset index, and average over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleEvalConfig {
    pub l_values: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub n_values: Vec<usize>,
    pub threshold_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseResult {
    pub l: usize,
    /// Mean over repetitions (hits pooled across all repetitions).
    pub mean: RecallCurve,
    /// Population standard deviation of per-repetition recall.
    pub std: Vec<f64>,
    pub repetitions: usize,
}

/// Derives the sampling RNG for one (seed, repetition, location) triple.
pub fn sample_rng(seed: u64, repetition: usize, location_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((repetition as u64).to_le_bytes());
    h.update(location_id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}

/// Member indices drawn without replacement, ascending.
pub fn sample_members(seed: u64, repetition: usize, location_id: &str, group_size: usize, l: usize) -> Vec<usize> {
    let mut rng = sample_rng(seed, repetition, location_id);
    let mut idx = rand::seq::index::sample(&mut rng, group_size, l).into_vec();
    idx.sort_unstable();
    idx
}

pub fn sparse_eval(
    queries: &Corpus,
    dataset: &Corpus,
    index: &MemoryIndex,
    config: &SampleEvalConfig,
    agg: AggregateOptions,
) -> Result<Vec<SparseResult>> {
    if config.repetitions == 0 {
        return Err(Error::validation("repetitions must be at least 1"));
    }
    if config.l_values.is_empty() {
        return Err(Error::validation("no sample sizes given"));
    }
    let n_values = normalize_n_values(&config.n_values)?;
    let top_n = *n_values.last().expect("nonempty");
    let mut out = Vec::with_capacity(config.l_values.len());
    for &l in &config.l_values {
        if l == 0 {
            return Err(Error::validation("sample size l must be at least 1"));
        }
        if let Some(g) = queries.groups.iter().find(|g| g.len() < l) {
            return Err(Error::validation(format!(
                "l = {l} exceeds the {} views of query location {}",
                g.len(),
                g.location_id
            )));
        }
        let mut pooled = Vec::with_capacity(config.repetitions * queries.num_locations());
        let mut per_rep = Vec::with_capacity(config.repetitions);
        for rep in 0..config.repetitions {
            let sampled = queries
                .groups
                .iter()
                .map(|g| {
                    let idx = sample_members(config.seed, rep, &g.location_id, g.len(), l);
                    let mv = aggregate(&g.select(&idx)?, agg)
                        .map_err(|e| e.with_context(&format!("location {}", g.location_id)))?;
                    Ok((g.location_id.clone(), mv))
                })
                .collect::<Result<Vec<(String, MemoryVector)>>>()?;
            let ranked = search_memory_queries(&sampled, index, top_n, Scoring::Inner)?;
            let first = first_hits(&ranked, queries, dataset, config.threshold_m)?;
            per_rep.push(curve_from_hits(&first, &n_values, 1));
            pooled.extend(first);
        }
        let mean = curve_from_hits(&pooled, &n_values, config.repetitions);
        let std = (0..n_values.len())
            .map(|k| {
                let m = mean.recall[k];
                let var = per_rep.iter().map(|c| (c.recall[k] - m).powi(2)).sum::<f64>()
                    / config.repetitions as f64;
                var.sqrt()
            })
            .collect();
        out.push(SparseResult {
            l,
            mean,
            std,
            repetitions: config.repetitions,
        });
    }
    Ok(out)
}

/// CSV with header `l,N,mean_recall,std_recall,repetitions`.
pub fn sparse_csv(results: &[SparseResult]) -> String {
    let mut s = String::from("l,N,mean_recall,std_recall,repetitions\n");
    for r in results {
        for ((n, m), sd) in r.mean.n_values.iter().zip(&r.mean.recall).zip(&r.std) {
            s.push_str(&format!("{},{n},{m:?},{sd:?},{}\n", r.l, r.repetitions));
        }
    }
    s
}

/// Two labelled 2D point sets for the democratization toy.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLayout {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
}

impl ToyLayout {
    /// The 8 + 8 point layout with bursty clusters on both sides: three
    /// stacked `x` points and three stacked `y` points side by side in the
    /// center, a row of three `x` points near a lone `y` point at the top, an
    /// isolated matching pair at the bottom right, and unmatched points.
    pub fn bursty() -> Self {
        let lab = |s: &[&str]| s.iter().map(|v| v.to_string()).collect();
        ToyLayout {
            x: vec![
                [1.2, 9.2],
                [2.0, 9.2],
                [2.8, 9.2],
                [9.0, 9.0],
                [5.0, 4.2],
                [5.0, 5.0],
                [5.0, 5.8],
                [9.2, 1.0],
            ],
            y: vec![
                [2.0, 10.0],
                [5.8, 4.2],
                [5.8, 5.0],
                [5.8, 5.8],
                [10.0, 1.0],
                [1.2, 1.0],
                [2.0, 1.0],
                [2.0, 1.8],
            ],
            x_labels: lab(&["top", "top", "top", "corner", "center", "center", "center", "bottom"]),
            y_labels: lab(&["top", "center", "center", "center", "bottom", "left", "left", "left"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyResult {
    /// `XᵀY`, `n × k`.
    pub unweighted: Matrix,
    /// `G_X⁻¹ XᵀY G_Y⁻¹`, `n × k`.
    pub weighted: Matrix,
    pub similarity_sum: f64,
    pub similarity_pinv: f64,
    /// Mean contribution over pairs sharing a cluster label.
    pub within_cluster_unweighted: f64,
    pub within_cluster_weighted: f64,
}

impl ToyResult {
    /// CSV with header `i,j,unweighted,weighted`; indices are 1-based.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,unweighted,weighted\n");
        for i in 0..self.unweighted.rows() {
            for j in 0..self.unweighted.cols() {
                s.push_str(&format!(
                    "{},{},{:?},{:?}\n",
                    i + 1,
                    j + 1,
                    self.unweighted.get(i, j),
                    self.weighted.get(i, j)
                ));
            }
        }
        s
    }
}

/// Embeds the toy points with the Gaussian kernel `exp(−‖x−y‖²/bandwidth)`
/// and computes unweighted and Gram-weighted cross-matching.
///
/// The embedding is exact: features come from the eigendecomposition of the
/// joint kernel matrix, so `xᵢ·yⱼ` equals the kernel value and the Gram
/// matrices are kernel matrices. Near-duplicate points produce nearly
/// dependent columns, which the weighting suppresses.
pub fn toy_demo(layout: &ToyLayout, bandwidth: f64, ridge: RidgePolicy) -> Result<ToyResult> {
    let (n, k) = (layout.x.len(), layout.y.len());
    if n == 0 || k == 0 {
        return Err(Error::validation("toy layout needs points on both sides"));
    }
    if layout.x_labels.len() != n || layout.y_labels.len() != k {
        return Err(Error::validation("one label per toy point"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::validation("bandwidth must be positive"));
    }
    let pts: Vec<[f64; 2]> = layout.x.iter().chain(&layout.y).copied().collect();
    let m = pts.len();
    let kernel = DMatrix::from_fn(m, m, |i, j| {
        let dx = pts[i][0] - pts[j][0];
        let dy = pts[i][1] - pts[j][1];
        (-(dx * dx + dy * dy) / bandwidth).exp()
    });
    let eig = SymmetricEigen::new(kernel);
    let scale: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let features: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|c| eig.eigenvectors[(i, c)] * scale[c]).collect())
        .collect();
    let x = Matrix::from_columns(&features[..n])?;
    let y = Matrix::from_columns(&features[n..])?;

    let unweighted = x.transpose().matmul(&y)?;
    let weighted = cross_weight_matrix(&x, &y, ridge)?;
    let s_sum = similarity_sum(&sum_vector(&x)?, &sum_vector(&y)?)?;
    let s_pinv = similarity_pinv(&pinv_vector(&x, ridge)?, &pinv_vector(&y, ridge)?)?;

    let mut pairs = 0usize;
    let (mut wu, mut ww) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..k {
            if layout.x_labels[i] == layout.y_labels[j] {
                pairs += 1;
                wu += unweighted.get(i, j);
                ww += weighted.get(i, j);
            }
        }
    }
    let denom = pairs.max(1) as f64;
    Ok(ToyResult {
        unweighted,
        weighted,
        similarity_sum: s_sum,
        similarity_pinv: s_pinv,
        within_cluster_unweighted: wu / denom,
        within_cluster_weighted: ww / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{group_by_location, ImageRecord, Side};
    use crate::retrieval::RankedItem;

    fn corpus(side: Side, items: &[(&str, &str, f64)]) -> Corpus {
        let recs = items
            .iter()
            .map(|(img, loc, x)| ImageRecord {
                image_id: img.to_string(),
                location_id: loc.to_string(),
                position: GeoPosition::Planar { x: *x, y: 0.0 },
                descriptor: vec![1.0],
            })
            .collect();
        group_by_location(recs, side).unwrap().0
    }

    fn list(q: &str, targets: &[&str]) -> RankedList {
        RankedList {
            query_id: q.into(),
            query_kind: UnitKind::Location,
            target_kind: UnitKind::Location,
            items: targets
                .iter()
                .enumerate()
                .map(|(i, t)| RankedItem {
                    target_id: t.to_string(),
                    score: -(i as f64),
                })
                .collect(),
            comparisons: targets.len(),
        }
    }

    #[test]
    fn all_rank_one_hits() {
        let db = corpus(Side::Dataset, &[("a", "A", 0.0), ("b", "B", 100.0)]);
        let qs = corpus(Side::Query, &[("qa", "QA", 3.0), ("qb", "QB", 110.0)]);
        let ranked = vec![list("QA", &["A", "B"]), list("QB", &["B", "A"])];
        let c = recall_at_n(&ranked, &qs, &db, &[1, 2], 25.0).unwrap();
        assert_eq!(c.recall, vec![1.0, 1.0]);
        assert_eq!(c.query_count, 2);
        // threshold tighter than the 10 m offset of QB
        let c = recall_at_n(&ranked, &qs, &db, &[1], 5.0).unwrap();
        assert_eq!(c.recall, vec![0.5]);
    }

    #[test]
    fn unresolvable_target_rejected() {
        let db = corpus(Side::Dataset, &[("a", "A", 0.0)]);
        let qs = corpus(Side::Query, &[("qa", "QA", 0.0)]);
        let err = recall_at_n(&[list("QA", &["nope"])], &qs, &db, &[1], 25.0);
        assert!(matches!(err, Err(Error::Validation(_))));
        let err = recall_at_n(&[list("QX", &["A"])], &qs, &db, &[1], 25.0);
        assert!(err.is_err());
    }

    #[test]
    fn n_values_validated() {
        assert!(normalize_n_values(&[]).is_err());
        assert!(normalize_n_values(&[0, 1]).is_err());
        assert_eq!(normalize_n_values(&[5, 1, 5]).unwrap(), vec![1, 5]);
    }

    #[test]
    fn sampling_is_keyed_and_sorted() {
        let a = sample_members(1, 0, "loc", 24, 4);
        assert_eq!(a, sample_members(1, 0, "loc", 24, 4));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.len(), 4);
        let others = [
            sample_members(2, 0, "loc", 24, 4),
            sample_members(1, 1, "loc", 24, 4),
            sample_members(1, 0, "loc2", 24, 4),
        ];
        assert!(others.iter().any(|o| o != &a));
        assert_eq!(sample_members(9, 3, "x", 8, 8), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn toy_reproduces_reference_heat_maps() {
        let r = toy_demo(&ToyLayout::bursty(), 1.0, RidgePolicy::Off).unwrap();
        // (x index, y index, unweighted, weighted), 0-based, printed to 3 decimals
        let printed = [
            (0, 0, 0.278, 0.000),
            (1, 0, 0.527, 0.527),
            (2, 0, 0.278, 0.000),
            (4, 1, 0.527, 0.792),
            (5, 1, 0.278, -0.533),
            (6, 1, 0.041, 0.220),
            (5, 2, 0.527, 1.090),
            (4, 2, 0.278, -0.533),
            (6, 3, 0.527, 0.792),
            (7, 4, 0.527, 0.527),
            (3, 7, 0.000, 0.000),
        ];
        for (i, j, u, w) in printed {
            assert!((r.unweighted.get(i, j) - u).abs() < 5e-4, "unweighted ({i},{j})");
            assert!((r.weighted.get(i, j) - w).abs() < 5e-4, "weighted ({i},{j})");
        }
    }

    #[test]
    fn toy_singletons_are_unweighted() {
        let layout = ToyLayout {
            x: vec![[0.0, 0.0]],
            y: vec![[0.5, 0.0]],
            x_labels: vec!["a".into()],
            y_labels: vec!["a".into()],
        };
        let r = toy_demo(&layout, 1.0, RidgePolicy::Off).unwrap();
        assert!((r.weighted.get(0, 0) - r.unweighted.get(0, 0)).abs() < 1e-12);
        assert!((r.unweighted.get(0, 0) - (-0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn toy_identical_cluster_is_singular_without_ridge() {
        let layout = ToyLayout {
            x: vec![[1.0, 1.0], [1.0, 1.0]],
            y: vec![[1.5, 1.0]],
            x_labels: vec!["a".into(), "a".into()],
            y_labels: vec!["a".into()],
        };
        assert!(matches!(
            toy_demo(&layout, 1.0, RidgePolicy::Off),
            Err(Error::Singular { .. })
        ));
        assert!(toy_demo(&layout, 1.0, RidgePolicy::Auto).is_ok());
    }

    #[test]
    fn toy_csv_shape() {
        let r = toy_demo(&ToyLayout::bursty(), 1.0, RidgePolicy::Off).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("i,j,unweighted,weighted"));
        assert_eq!(lines.count(), 64);
    }
}
