use nalgebra::{DMatrix, SymmetricEigen};

use super::{dot, normalize_in_place, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PcaOptions {
    /// Divide each projected coordinate by the square root of its variance.
    pub whiten: bool,
}

/// Mean-centering plus an orthonormal projection onto the leading principal
/// directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d_out × d`, rows orthonormal, ordered by decreasing variance.
    pub components: Matrix,
    /// Variances along each kept component. Empty for models loaded from disk.
    pub eigenvalues: Vec<f64>,
    /// Total variance of the fitted data (trace of the covariance).
    pub total_variance: f64,
    pub whiten: bool,
}

impl PcaModel {
    pub fn d(&self) -> usize {
        self.mean.len()
    }

    pub fn d_out(&self) -> usize {
        self.components.rows()
    }

    /// Fraction of total variance captured by each kept component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.eigenvalues.len()];
        }
        self.eigenvalues
            .iter()
            .map(|l| l / self.total_variance)
            .collect()
    }

    /// Builds a model from stored parts (no variance information).
    pub fn from_parts(mean: Vec<f64>, components: Matrix) -> Result<Self> {
        if components.cols() != mean.len() {
            return Err(Error::validation(format!(
                "components have {} columns, mean has {} entries",
                components.cols(),
                mean.len()
            )));
        }
        if components.rows() > mean.len() {
            return Err(Error::validation("d_out exceeds d"));
        }
        Ok(PcaModel {
            mean,
            components,
            eigenvalues: Vec::new(),
            total_variance: 0.0,
            whiten: false,
        })
    }
}

/// Fits PCA on `data`, one sample per column (`d × samples`).
///
/// Components are eigenvectors of the sample covariance sorted by decreasing
/// eigenvalue; each is sign-flipped so its largest-magnitude entry is positive.
pub fn pca_fit(data: &Matrix, d_out: usize, opts: PcaOptions) -> Result<PcaModel> {
    let (d, samples) = data.shape();
    if d_out == 0 || d_out > d.min(samples) {
        return Err(Error::validation(format!(
            "d_out = {d_out} must lie in 1..={} for {d}-dimensional data with {samples} samples",
            d.min(samples)
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|i| data.row(i).iter().sum::<f64>() / samples as f64)
        .collect();
    let centered: Vec<Vec<f64>> = (0..d)
        .map(|i| data.row(i).iter().map(|v| v - mean[i]).collect())
        .collect();
    let denom = (samples.max(2) - 1) as f64;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let c = dot(&centered[i], &centered[j]) / denom;
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut rows = Vec::with_capacity(d_out);
    let mut eigenvalues = Vec::with_capacity(d_out);
    for &k in order.iter().take(d_out) {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        fix_sign(&mut v);
        rows.push(v);
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components: Matrix::from_rows(&rows)?,
        eigenvalues,
        total_variance,
        whiten: opts.whiten,
    })
}

/// Largest-magnitude entry made positive; first index wins ties.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Projects `v` as `components · (v − mean)`, optionally whitened and then
/// scaled to unit length.
pub fn pca_apply(model: &PcaModel, v: &[f64], renormalize: bool) -> Result<Vec<f64>> {
    if v.len() != model.d() {
        return Err(Error::validation(format!(
            "vector has dimension {}, model expects {}",
            v.len(),
            model.d()
        )));
    }
    let centered: Vec<f64> = v.iter().zip(&model.mean).map(|(a, m)| a - m).collect();
    let mut out = model.components.mul_vec(&centered)?;
    if model.whiten {
        if model.eigenvalues.len() != out.len() {
            return Err(Error::validation("whitening requires fitted eigenvalues"));
        }
        let floor = model.eigenvalues.first().copied().unwrap_or(0.0) * 1e-12;
        for (o, l) in out.iter_mut().zip(&model.eigenvalues) {
            let s = l.max(floor);
            if s > 0.0 {
                *o /= s.sqrt();
            }
        }
    }
    if renormalize {
        normalize_in_place(&mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_data_gives_e1() {
        let cols: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 - 3.0, 2.0, 2.0]).collect();
        let data = Matrix::from_columns(&cols).unwrap();
        let m = pca_fit(&data, 1, PcaOptions::default()).unwrap();
        let c = m.components.row(0);
        assert!((c[0] - 1.0).abs() < 1e-12, "{c:?}");
        assert!(c[1].abs() < 1e-12 && c[2].abs() < 1e-12);
    }

    #[test]
    fn negative_axis_sign_flipped() {
        let cols: Vec<Vec<f64>> = (0..6).map(|i| vec![0.0, -(i as f64)]).collect();
        let m = pca_fit(&Matrix::from_columns(&cols).unwrap(), 1, PcaOptions::default()).unwrap();
        assert!((m.components.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_2d_spans_plane() {
        let cols = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let m = pca_fit(&Matrix::from_columns(&cols).unwrap(), 2, PcaOptions::default()).unwrap();
        let c = &m.components;
        let cct = c.matmul(&c.transpose()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((cct.get(i, j) - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn d_out_bounds() {
        let data = Matrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(pca_fit(&data, 0, PcaOptions::default()).is_err());
        assert!(pca_fit(&data, 3, PcaOptions::default()).is_err());
        assert!(pca_fit(&data, 2, PcaOptions::default()).is_ok());
    }

    #[test]
    fn apply_mean_is_zero_and_identity_is_noop() {
        let cols = vec![vec![1.0, 2.0], vec![3.0, 0.0], vec![2.0, 7.0]];
        let m = pca_fit(&Matrix::from_columns(&cols).unwrap(), 2, PcaOptions::default()).unwrap();
        let z = pca_apply(&m, &m.mean.clone(), false).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        // renormalizing the zero vector leaves it at zero
        let z = pca_apply(&m, &m.mean.clone(), true).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));

        let id = PcaModel::from_parts(vec![0.0; 3], Matrix::identity(3)).unwrap();
        assert_eq!(pca_apply(&id, &[1.5, -2.0, 0.25], false).unwrap(), vec![1.5, -2.0, 0.25]);
        assert!(pca_apply(&id, &[1.0], false).is_err());
    }

    #[test]
    fn whitening_gives_unit_variance() {
        let cols: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.37;
                vec![5.0 * t.sin(), 0.5 * (2.3 * t).cos(), 1.0]
            })
            .collect();
        let data = Matrix::from_columns(&cols).unwrap();
        let m = pca_fit(&data, 2, PcaOptions { whiten: true }).unwrap();
        let proj: Vec<Vec<f64>> = cols.iter().map(|c| pca_apply(&m, c, false).unwrap()).collect();
        for k in 0..2 {
            let var = proj.iter().map(|p| p[k] * p[k]).sum::<f64>() / 49.0;
            assert!((var - 1.0).abs() < 1e-9, "component {k}: {var}");
        }
    }
}
