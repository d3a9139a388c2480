//! Shared fixtures and independent numerical oracles for the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use panomatch::corpus::{group_by_location, Corpus, GeoPosition, ImageRecord, Side};
use panomatch::linalg::Matrix;
use panomatch::retrieval::{RankedItem, RankedList, UnitKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// d×n matrix of standard normal entries.
pub fn gaussian(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Matrix {
    let data: Vec<f64> = (0..d * n).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::new(d, n, data).unwrap()
}

/// Modified Gram-Schmidt on the columns.
pub fn orthonormalize(x: &Matrix) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for mut c in x.columns() {
        for q in &cols {
            let p: f64 = c.iter().zip(q).map(|(a, b)| a * b).sum();
            for (ci, qi) in c.iter_mut().zip(q) {
                *ci -= p * qi;
            }
        }
        let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= n);
        cols.push(c);
    }
    Matrix::from_columns(&cols).unwrap()
}

pub fn col_sums(x: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; x.rows()];
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            s[i] += x.get(i, j);
        }
    }
    s
}

/// XᵀY as nested vectors, by explicit loops.
pub fn cross(x: &Matrix, y: &Matrix) -> Vec<Vec<f64>> {
    (0..x.cols())
        .map(|i| {
            (0..y.cols())
                .map(|j| (0..x.rows()).map(|k| x.get(k, i) * y.get(k, j)).sum())
                .collect()
        })
        .collect()
}

/// Solves a·z = b by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// X (XᵀX)⁻¹ 1 assembled from loops and `gauss_solve`.
pub fn pinv_oracle(x: &Matrix) -> Vec<f64> {
    let w = gauss_solve(cross(x, x), vec![1.0; x.cols()]);
    (0..x.rows())
        .map(|i| (0..x.cols()).map(|j| x.get(i, j) * w[j]).sum())
        .collect()
}

/// 1ᵀ G_X⁻¹ XᵀY G_Y⁻¹ 1.
pub fn pinv_similarity_oracle(x: &Matrix, y: &Matrix) -> f64 {
    let wx = gauss_solve(cross(x, x), vec![1.0; x.cols()]);
    let wy = gauss_solve(cross(y, y), vec![1.0; y.cols()]);
    let c = cross(x, y);
    let mut s = 0.0;
    for i in 0..x.cols() {
        for j in 0..y.cols() {
            s += wx[i] * c[i][j] * wy[j];
        }
    }
    s
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Sample covariance (divide by N−1) of the columns of `data`.
pub fn covariance(data: &Matrix) -> Vec<Vec<f64>> {
    let (d, n) = data.shape();
    let mean: Vec<f64> = (0..d).map(|i| data.row(i).iter().sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            c[i][j] = (0..n)
                .map(|k| (data.get(i, k) - mean[i]) * (data.get(j, k) - mean[j]))
                .sum::<f64>()
                / (n - 1) as f64;
        }
    }
    c
}

pub fn planar_record(image: &str, location: &str, x: f64, descriptor: Vec<f64>) -> ImageRecord {
    ImageRecord {
        image_id: image.to_string(),
        location_id: location.to_string(),
        position: GeoPosition::planar(x, 0.0).unwrap(),
        descriptor,
    }
}

/// Five query locations with ground-truth twins `L0..L4` and far-away
/// distractors `D0..D4`, plus ranked lists placing the first true match at
/// ranks 1, 1, 1, 3 and 5.
pub struct RecallFixture {
    pub queries: Corpus,
    pub dataset: Corpus,
    pub ranked: Vec<RankedList>,
}

pub fn recall_fixture() -> RecallFixture {
    let mut db = Vec::new();
    for i in 0..5 {
        db.push(planar_record(&format!("l{i}"), &format!("L{i}"), 100.0 * i as f64, vec![1.0, i as f64]));
        db.push(planar_record(&format!("d{i}"), &format!("D{i}"), 10_000.0 + 100.0 * i as f64, vec![0.0, i as f64]));
    }
    let q = (0..5)
        .map(|i| planar_record(&format!("q{i}"), &format!("Q{i}"), 100.0 * i as f64 + 5.0, vec![1.0, 1.0]))
        .collect();
    let (dataset, _) = group_by_location(db, Side::Dataset).unwrap();
    let (queries, _) = group_by_location(q, Side::Query).unwrap();
    let orders: [&[&str]; 5] = [
        &["L0", "D0", "D1", "D2", "D3"],
        &["L1", "L0", "D1", "D2", "D3"],
        &["L2", "D0", "D1", "D2", "D3"],
        &["D0", "D1", "L3", "D2", "D3"],
        &["D2", "D3", "D4", "D0", "L4"],
    ];
    let ranked = orders
        .iter()
        .enumerate()
        .map(|(i, ids)| RankedList {
            query_id: format!("Q{i}"),
            query_kind: UnitKind::Location,
            target_kind: UnitKind::Location,
            items: ids
                .iter()
                .enumerate()
                .map(|(r, id)| RankedItem {
                    target_id: id.to_string(),
                    score: 10.0 - r as f64,
                })
                .collect(),
            comparisons: 10,
        })
        .collect();
    RecallFixture {
        queries,
        dataset,
        ranked,
    }
}
