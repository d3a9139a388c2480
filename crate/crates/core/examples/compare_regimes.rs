//! Recall@N of every matching regime on the synthetic benchmark.
//!
//! ```text
//! cargo run --release --example compare_regimes -- [scene_noise] [seed]
//! ```

use panomatch::corpus::{synth_benchmark, SynthConfig};
use panomatch::eval::recall_at_n;
use panomatch::memvec::AggMethod;
use panomatch::retrieval::{run_mode, total_comparisons, Mode, RunOptions};

fn main() -> panomatch::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = SynthConfig::default();
    if let Some(noise) = args.next() {
        cfg.scene_noise = noise.parse().expect("noise must be a number");
    }
    if let Some(seed) = args.next() {
        cfg.seed = seed.parse().expect("seed must be an integer");
    }
    let (dataset, queries) = synth_benchmark(&cfg)?;
    println!(
        "{} locations x {} views, d = {}, noise = {}",
        cfg.num_locations, cfg.views_per_location, cfg.d, cfg.scene_noise
    );
    let n_values = [1, 2, 5, 10, 20];
    println!("{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>12}", "regime", "R@1", "R@2", "R@5", "R@10", "R@20", "comparisons");
    let runs = [
        (Mode::Im2Im, AggMethod::Sum),
        (Mode::Im2Pan, AggMethod::Sum),
        (Mode::Im2Pan, AggMethod::Pinv),
        (Mode::Pan2Im, AggMethod::Sum),
        (Mode::Pan2Im, AggMethod::Pinv),
        (Mode::Pan2Pan, AggMethod::Sum),
        (Mode::Pan2Pan, AggMethod::Pinv),
    ];
    for (mode, agg) in runs {
        let ranked = run_mode(mode, &queries, &dataset, None, RunOptions::new(agg, 20))?;
        let curve = recall_at_n(&ranked, &queries, &dataset, &n_values, 25.0)?;
        let label = if mode == Mode::Im2Im { mode.to_string() } else { format!("{mode}/{agg}") };
        print!("{label:<14}");
        for r in &curve.recall {
            print!(" {r:>8.3}");
        }
        println!(" {:>12}", total_comparisons(&ranked));
    }
    Ok(())
}
