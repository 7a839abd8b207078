// Zero-shot classification of held-out classes with ESZSL and ConSE.

use vawe::dataio::{generate_synthetic, random_split, SynthConfig};
use vawe::numerics::Rng;
use vawe::zsl::{run_zsl, ConseParams, EszslParams, EvalReport, ZslMethod};

fn run_example() -> vawe::Result<Vec<EvalReport>> {
    let data = generate_synthetic(&SynthConfig { discrepancy_rho: 0.5, ..SynthConfig::default() })?;
    let split = random_split(data.embeddings.class_names(), 10, &mut Rng::new(3))?;
    let (x_seen, x_unseen) = (data.features.restrict_to(split.seen()), data.features.restrict_to(split.unseen()));
    let (e_seen, e_unseen) = (data.embeddings.subset(split.seen())?, data.embeddings.subset(split.unseen())?);
    [ZslMethod::Eszsl, ZslMethod::Conse]
        .into_iter()
        .map(|m| run_zsl(m, &x_seen, &e_seen, &x_unseen, &e_unseen, &EszslParams::default(), &ConseParams::default()))
        .collect()
}

fn main() -> vawe::Result<()> {
    for r in run_example()? {
        println!(
            "{:<6} mean per-class {:.3}  overall {:.3}  ({} test images, chance 0.100)",
            r.method, r.mean_per_class_accuracy, r.overall_accuracy, r.num_test
        );
    }
    Ok(())
}
