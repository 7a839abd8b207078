// Compares the analytic triplet-loss gradient with central differences.

use vawe::alignnet::{backward, objective, MlpParams};
use vawe::numerics::Rng;

fn run_example() -> vawe::Result<f64> {
    let mut rng = Rng::new(11);
    let shape = [5, 7, 6, 4];
    let params = MlpParams::init(shape, &mut rng);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| rng.gaussian()).collect()).collect();
    let inputs = [xs[0].as_slice(), xs[1].as_slice(), xs[2].as_slice()];
    let (alpha, lambda, eps, h) = (1.0, 0.01, 1e-12, 1e-5);

    let analytic = backward(&params, inputs, alpha, lambda, eps)?.grad.to_flat();
    let base = params.to_flat();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let eval = |d: f64| -> vawe::Result<f64> {
            let mut f = base.clone();
            f[i] += d;
            objective(&MlpParams::from_flat(shape, &f)?, inputs, alpha, lambda, eps)
        };
        let numeric = (eval(h)? - eval(-h)?) / (2.0 * h);
        worst = worst.max((numeric - analytic[i]).abs() / analytic[i].abs().max(numeric.abs()).max(1e-8));
    }
    Ok(worst)
}

fn main() -> vawe::Result<()> {
    println!("max relative gradient error: {:.2e}", run_example()?);
    Ok(())
}
