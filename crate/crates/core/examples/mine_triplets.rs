// Mines one batch of training triplets from a small synthetic problem and
// shows how the hub filter changes it.

use vawe::dataio::{generate_synthetic, SynthConfig};
use vawe::miner::{mine_triplets, TripletBatch};
use vawe::neighborhood::{detect_hubs, neighbor_lists, visual_signatures, HubSet};
use vawe::numerics::Rng;

fn run_example() -> vawe::Result<(TripletBatch, TripletBatch, HubSet)> {
    let cfg = SynthConfig { num_classes: 20, discrepancy_rho: 2.0, ..SynthConfig::default() };
    let data = generate_synthetic(&cfg)?;
    let sig = visual_signatures(&data.features, data.embeddings.class_names())?;
    let (k1, k2) = (3, 6);
    let v1 = neighbor_lists(sig.signatures(), k1)?;
    let v2 = neighbor_lists(sig.signatures(), k2)?;
    let s1 = neighbor_lists(data.embeddings.vectors(), k1)?;
    let s2 = neighbor_lists(data.embeddings.vectors(), k2)?;
    let hubs = detect_hubs(&data.embeddings, k1)?;
    let plain = mine_triplets(&v1, &v2, &s1, &s2, &HubSet::default(), &mut Rng::new(0))?;
    let filtered = mine_triplets(&v1, &v2, &s1, &s2, &hubs, &mut Rng::new(0))?;
    Ok((plain, filtered, hubs))
}

fn main() -> vawe::Result<()> {
    let (plain, filtered, hubs) = run_example()?;
    println!("hubs: {:?}", hubs.members);
    println!("triplets without hub filter: {}", plain.len());
    println!("triplets with hub filter:    {}", filtered.len());
    for t in filtered.triplets.iter().take(5) {
        println!("  anchor {:>2}  positive {:>2}  negative {:>2}", t.a, t.p, t.n);
    }
    Ok(())
}
