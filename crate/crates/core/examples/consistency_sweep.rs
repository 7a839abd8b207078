// Raw visual/semantic neighborhood consistency as the synthetic
// discrepancy grows.

use vawe::dataio::{generate_synthetic, SynthConfig};
use vawe::neighborhood::{consistency, neighbor_lists, visual_signatures};

fn run_example() -> vawe::Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for rho in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let data = generate_synthetic(&SynthConfig { discrepancy_rho: rho, ..SynthConfig::default() })?;
        let sig = visual_signatures(&data.features, data.embeddings.class_names())?;
        let c = consistency(
            &neighbor_lists(sig.signatures(), 10)?,
            &neighbor_lists(data.embeddings.vectors(), 10)?,
        )?;
        rows.push((rho, c));
    }
    Ok(rows)
}

fn main() -> vawe::Result<()> {
    println!("{:>6}  {:>11}", "rho", "consistency");
    for (rho, c) in run_example()? {
        println!("{rho:>6.2}  {c:>11.2}");
    }
    Ok(())
}
