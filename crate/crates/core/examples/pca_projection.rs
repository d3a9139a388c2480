//! Fit PCA on dataset descriptors, project both sides, and compare pan2pan
//! recall before and after reduction. The model is stored in its binary
//! form and read back to show the round trip.

use panomatch::corpus::{synth_benchmark, SynthConfig};
use panomatch::eval::recall_at_n;
use panomatch::format::{decode_pca, encode_pca};
use panomatch::linalg::{pca_apply, pca_fit, Matrix, PcaOptions};
use panomatch::memvec::AggMethod;
use panomatch::retrieval::{run_mode, Mode, RunOptions};

fn main() -> panomatch::Result<()> {
    let (dataset, queries) = synth_benchmark(&SynthConfig::default())?;
    let cols: Vec<&[f64]> = dataset.images().map(|r| r.descriptor.as_slice()).collect();
    let data = Matrix::from_columns(&cols)?;

    for d_out in [64, 32, 16] {
        let fitted = pca_fit(&data, d_out, PcaOptions::default())?;
        let bytes = encode_pca(&fitted)?;
        let model = decode_pca(&bytes)?;
        let kept: f64 = fitted.explained_variance_ratio().iter().sum();
        let project = |c: &panomatch::corpus::Corpus| c.map_descriptors(|v| pca_apply(&model, v, true));
        let (db, q) = (project(&dataset)?, project(&queries)?);
        let ranked = run_mode(Mode::Pan2Pan, &q, &db, None, RunOptions::new(AggMethod::Pinv, 5))?;
        let curve = recall_at_n(&ranked, &q, &db, &[1, 5], 25.0)?;
        println!(
            "d_out {d_out:>3}: variance kept {kept:.3}, model {} bytes, pan2pan/pinv R@1 {:.3} R@5 {:.3}",
            bytes.len(),
            curve.recall[0],
            curve.recall[1]
        );
    }
    Ok(())
}
