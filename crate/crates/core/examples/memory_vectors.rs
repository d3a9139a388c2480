//! Sum and pseudo-inverse memory vectors on a small random set.
//!
//! Every member of a set has inner product exactly 1 with the set's pinv
//! vector, while a random outsider scores near 0. The sum vector gives
//! members a score that depends on how similar they are to the rest.

use panomatch::linalg::{dot, Matrix, RidgePolicy};
use panomatch::memvec::{pinv_vector, sum_vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn main() -> panomatch::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (d, n) = (128, 16);
    let members: Vec<Vec<f64>> = (0..n).map(|_| unit(&mut rng, d)).collect();
    let x = Matrix::from_columns(&members)?;
    let sum = sum_vector(&x)?;
    let pinv = pinv_vector(&x, RidgePolicy::Off)?;
    let outsider = unit(&mut rng, d);

    println!("member   sum·x   pinv·x");
    for (i, m) in members.iter().enumerate().take(5) {
        println!("{i:>6} {:>7.3} {:>8.5}", dot(&sum.values, m), dot(&pinv.values, m));
    }
    println!(
        "outsider {:>5.3} {:>8.5}",
        dot(&sum.values, &outsider),
        dot(&pinv.values, &outsider)
    );
    Ok(())
}
