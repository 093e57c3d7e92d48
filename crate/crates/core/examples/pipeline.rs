//! The whole loop through the harness: forced SPH, velocity patches,
//! score training, generation and spectrum comparison. Writes into a
//! temporary directory and prints each stage's metrics.

use serde_json::json;

use lgdf::harness::{self, MakeDatasetBlock, SampleBlock, SphRunBlock, TrainBlock};

fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> T {
    serde_json::from_value(v).expect("valid block")
}

fn main() -> lgdf::Result<()> {
    let dir = std::env::temp_dir().join("lgdf-pipeline");
    let (sph, ds, tr, gen) = (dir.join("sph"), dir.join("ds"), dir.join("tr"), dir.join("gen"));

    let b: SphRunBlock = parse(json!({
        "dims": 2, "per_side": 32, "sound_c": 10.0,
        "forcing": {"kind": "stochastic", "amplitude": 3.0, "ou_correlation_time": 0.2},
        "n_steps": 1200, "snapshot_every": 40
    }));
    println!("sph-run: {}", harness::sph_run(&b, &sph, 1)?.metrics);

    let b: MakeDatasetBlock = parse(json!({
        "snapshots": sph, "skip_snapshots": 10,
        "dataset": {"kind": "patches", "grid_n": 32, "patch": 8, "stride": 4}
    }));
    println!("make-dataset: {}", harness::make_dataset(&b, &ds, 2)?.metrics);

    let b: TrainBlock = parse(json!({
        "dataset": ds.join(harness::DATASET_FILE),
        "train": {"n_iterations": 1500, "hidden": [128, 128], "weighting": "sigma_squared", "final_learning_rate": 1e-5}
    }));
    println!("train: {}", harness::train(&b, &tr, 3)?.metrics);

    let b: SampleBlock = parse(json!({
        "mode": "checkpoint", "dataset": ds.join(harness::DATASET_FILE), "checkpoint": tr.join(harness::CHECKPOINT_FILE),
        "n_samples": 128, "reverse": {"steps": 300, "t_min": 1e-3}
    }));
    println!("sample: {}", harness::sample(&b, &gen, 4)?.metrics);
    println!("outputs in {}", dir.display());
    Ok(())
}
