// Trains the alignment network on the seen classes and reports the
// per-epoch loss and consistency.

use vawe::alignnet::{map_embeddings, train_with_hook, EpochRecord, TrainConfig, TrainReport};
use vawe::dataio::{generate_synthetic, SynthConfig};
use vawe::neighborhood::{consistency, neighbor_lists, visual_signatures};

fn run_example(verbose: bool) -> vawe::Result<(TrainReport, f64, f64)> {
    let data = generate_synthetic(&SynthConfig { discrepancy_rho: 1.5, ..SynthConfig::default() })?;
    let sig = visual_signatures(&data.features, data.embeddings.class_names())?;
    let cfg = TrainConfig { lr: 0.02, patience: 20, ..TrainConfig::default() };
    let mut log = |r: &EpochRecord| {
        if verbose && (r.epoch == 1 || r.epoch.is_multiple_of(20)) {
            println!("epoch {:>3}  triplets {:>4}  loss {:.4}  consistency {:.2}", r.epoch, r.triplets, r.mean_loss, r.consistency);
        }
    };
    let (params, report) = train_with_hook(&data.embeddings, &sig, &cfg, Some(&mut log))?;
    let nv = neighbor_lists(sig.signatures(), 10)?;
    let before = consistency(&nv, &neighbor_lists(data.embeddings.vectors(), 10)?)?;
    let mapped = map_embeddings(&params, &data.embeddings, cfg.norm_eps)?;
    let after = consistency(&nv, &neighbor_lists(mapped.vectors(), 10)?)?;
    Ok((report, before, after))
}

fn main() -> vawe::Result<()> {
    let (report, before, after) = run_example(true)?;
    println!("stopped after {} epochs: {}", report.epochs.len(), report.stop_reason.as_str());
    println!("consistency at K=10: {before:.2} -> {after:.2}");
    Ok(())
}
