//! Offline/online split: aggregate the dataset into an index file, then load
//! it and answer panorama queries against it.

use panomatch::corpus::{synth_benchmark, SynthConfig};
use panomatch::format::{load_index, save_corpus, save_index};
use panomatch::memvec::{AggMethod, AggregateOptions};
use panomatch::retrieval::{aggregate_queries, build_index, search_memory_queries, Scoring};

fn main() -> panomatch::Result<()> {
    let dir = std::env::temp_dir().join("panomatch-index-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let (dataset, queries) = synth_benchmark(&SynthConfig::default())?;
    save_corpus(&dataset, dir.join("dataset.pmdv"), dir.join("dataset.csv"))?;

    let agg = AggregateOptions::new(AggMethod::Pinv);
    let (index, report) = build_index(&dataset, agg)?;
    save_index(dir.join("index.pmix"), &index)?;
    println!(
        "indexed {} locations ({} needed a ridge) -> {}",
        report.locations,
        report.ridge_retries.len(),
        dir.join("index.pmix").display()
    );

    let loaded = load_index(dir.join("index.pmix"))?;
    let qs = aggregate_queries(&queries, agg)?;
    let ranked = search_memory_queries(&qs[..3], &loaded, 3, Scoring::Inner)?;
    for list in ranked {
        let top: Vec<String> = list
            .items
            .iter()
            .map(|i| format!("{} ({:.3})", i.target_id, i.score))
            .collect();
        println!("{} -> {} [{} comparisons]", list.query_id, top.join(", "), list.comparisons);
    }
    Ok(())
}
