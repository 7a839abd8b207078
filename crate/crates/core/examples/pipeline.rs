// Full run on synthetic data: consistency, training, mapping and both
// zero-shot methods before and after alignment.

use vawe::alignnet::TrainConfig;
use vawe::cli::{run_pipeline, DataSource, PipelineReport, RunConfig};
use vawe::dataio::SynthConfig;
use vawe::zsl::{ConseParams, EszslParams};

fn run_example(workdir: &std::path::Path) -> vawe::Result<PipelineReport> {
    let cfg = RunConfig {
        data: DataSource::Synthetic {
            synth: SynthConfig { discrepancy_rho: 1.5, ..SynthConfig::default() },
            num_unseen: 10,
        },
        consistency_k: 10,
        train: TrainConfig { lr: 0.02, patience: 20, ..TrainConfig::default() },
        eszsl: EszslParams { gamma: 10.0, lam: 10.0, ..EszslParams::default() },
        conse: ConseParams::default(),
    };
    Ok(run_pipeline(&cfg, workdir, &mut |_| {})?.0)
}

fn main() -> vawe::Result<()> {
    let dir = std::env::temp_dir().join("vawe-pipeline-example");
    let r = run_example(&dir)?;
    println!("consistency {:.2} -> {:.2}", r.consistency.raw, r.consistency.vawe);
    println!("ESZSL {:.3} -> {:.3}", r.eszsl.raw.mean_per_class_accuracy, r.eszsl.vawe.mean_per_class_accuracy);
    println!("ConSE {:.3} -> {:.3}", r.conse.raw.mean_per_class_accuracy, r.conse.vawe.mean_per_class_accuracy);
    println!("artifacts in {}", dir.display());
    Ok(())
}
