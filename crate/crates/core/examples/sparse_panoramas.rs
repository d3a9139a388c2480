//! Query locations observed through only `l` random views.
//!
//! Each query location contributes `l` randomly drawn views (without
//! replacement, reproducible per seed/repetition/location), which are
//! aggregated and matched against the full dataset panoramas.
//!
//! ```text
//! cargo run --release --example sparse_panoramas -- [repetitions]
//! ```

use panomatch::corpus::{synth_benchmark, SynthConfig};
use panomatch::eval::{sparse_csv, sparse_eval, SampleEvalConfig};
use panomatch::memvec::{AggMethod, AggregateOptions};
use panomatch::retrieval::build_index;

fn main() -> panomatch::Result<()> {
    let reps = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("repetitions must be an integer"))
        .unwrap_or(10);
    let (dataset, queries) = synth_benchmark(&SynthConfig::default())?;
    let config = SampleEvalConfig {
        l_values: vec![1, 2, 3, 4, 6, 8],
        repetitions: reps,
        seed: 0,
        n_values: vec![1, 5, 10],
        threshold_m: 25.0,
    };
    for method in [AggMethod::Sum, AggMethod::Pinv] {
        let agg = AggregateOptions::new(method);
        let (index, _) = build_index(&dataset, agg)?;
        let results = sparse_eval(&queries, &dataset, &index, &config, agg)?;
        println!("pan2pan/{method}");
        print!("{}", sparse_csv(&results));
    }
    Ok(())
}
