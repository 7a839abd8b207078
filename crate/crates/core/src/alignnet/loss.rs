use super::mlp::{backward_into, forward, ForwardCache, MlpParams};
use crate::error::{Result, VaweError};
use crate::miner::Triplet;
use crate::numerics::{sq_dist, DenseMatrix};

/// `max(0, ‖ya − yp‖² − ‖ya − yn‖² + alpha)`
pub fn triplet_loss(ya: &[f64], yp: &[f64], yn: &[f64], alpha: f64) -> f64 {
    hinge_argument(ya, yp, yn, alpha).max(0.0)
}

fn hinge_argument(ya: &[f64], yp: &[f64], yn: &[f64], alpha: f64) -> f64 {
    sq_dist(ya, yp) - sq_dist(ya, yn) + alpha
}

/// Gradients of the hinge w.r.t. `(ya, yp, yn)`, or `None` when the hinge is
/// inactive (argument `<= 0`; the subgradient at the kink is taken as zero).
pub fn triplet_output_grads(
    ya: &[f64],
    yp: &[f64],
    yn: &[f64],
    alpha: f64,
) -> Option<[Vec<f64>; 3]> {
    if hinge_argument(ya, yp, yn, alpha) <= 0.0 {
        return None;
    }
    let ga = yp.iter().zip(yn).map(|(p, n)| 2.0 * (n - p)).collect();
    let gp = ya.iter().zip(yp).map(|(a, p)| 2.0 * (p - a)).collect();
    let gn = ya.iter().zip(yn).map(|(a, n)| 2.0 * (a - n)).collect();
    Some([ga, gp, gn])
}

/// Loss and gradient of one triplet under the regularized objective.
#[derive(Clone, Debug)]
pub struct TripletGradient {
    /// Hinge value, without the regularizer.
    pub loss: f64,
    pub grad: MlpParams,
}

/// `triplet_loss(f(sa), f(sp), f(sn)) + lambda·‖Θ‖²`
pub fn objective(
    params: &MlpParams,
    inputs: [&[f64]; 3],
    alpha: f64,
    lambda: f64,
    eps: f64,
) -> Result<f64> {
    let ya = forward(params, inputs[0], eps)?.0;
    let yp = forward(params, inputs[1], eps)?.0;
    let yn = forward(params, inputs[2], eps)?.0;
    Ok(triplet_loss(&ya, &yp, &yn, alpha) + lambda * params.sq_norm())
}

/// Exact gradient of [`objective`] for the anchor/positive/negative inputs.
/// The three branches share parameters, so their contributions add up.
pub fn backward(
    params: &MlpParams,
    inputs: [&[f64]; 3],
    alpha: f64,
    lambda: f64,
    eps: f64,
) -> Result<TripletGradient> {
    let caches = [
        forward(params, inputs[0], eps)?.1,
        forward(params, inputs[1], eps)?.1,
        forward(params, inputs[2], eps)?.1,
    ];
    let [ya, yp, yn] = [caches[0].output(), caches[1].output(), caches[2].output()];
    let loss = triplet_loss(ya, yp, yn, alpha);
    let mut grad = MlpParams::zeros(params.shape());
    if let Some(outs) = triplet_output_grads(ya, yp, yn, alpha) {
        for (cache, d) in caches.iter().zip(&outs) {
            backward_into(params, cache, d, eps, &mut grad);
        }
    }
    grad.add_scaled(2.0 * lambda, params);
    Ok(TripletGradient { loss, grad })
}

/// Mean hinge loss over a mini-batch of class-index triplets and the
/// gradient of `mean hinge + lambda·‖Θ‖²`.
///
/// Each distinct class is pushed through the network once; output gradients
/// are summed per class before a single backward pass, in ascending class
/// order, so the result does not depend on how the work is scheduled.
pub fn batch_gradient(
    params: &MlpParams,
    inputs: &DenseMatrix,
    triplets: &[Triplet],
    alpha: f64,
    lambda: f64,
    eps: f64,
) -> Result<TripletGradient> {
    let mut grad = MlpParams::zeros(params.shape());
    if triplets.is_empty() {
        grad.add_scaled(2.0 * lambda, params);
        return Ok(TripletGradient { loss: 0.0, grad });
    }
    let n = inputs.rows();
    if let Some(t) = triplets.iter().find(|t| t.a.max(t.p).max(t.n) >= n) {
        return Err(VaweError::Shape(format!(
            "triplet {t:?} indexes past {n} input rows"
        )));
    }
    let mut caches: Vec<Option<ForwardCache>> = vec![None; n];
    for t in triplets {
        for c in [t.a, t.p, t.n] {
            if caches[c].is_none() {
                caches[c] = Some(forward(params, inputs.row(c), eps)?.1);
            }
        }
    }
    let out_dim = params.out_dim();
    let mut d_out: Vec<Option<Vec<f64>>> = vec![None; n];
    let scale = 1.0 / triplets.len() as f64;
    let mut loss_sum = 0.0;
    for t in triplets {
        let y = |c: usize| caches[c].as_ref().expect("forwarded above").output();
        let (ya, yp, yn) = (y(t.a), y(t.p), y(t.n));
        loss_sum += triplet_loss(ya, yp, yn, alpha);
        if let Some(gs) = triplet_output_grads(ya, yp, yn, alpha) {
            for (c, g) in [t.a, t.p, t.n].into_iter().zip(gs) {
                let acc = d_out[c].get_or_insert_with(|| vec![0.0; out_dim]);
                acc.iter_mut().zip(&g).for_each(|(s, v)| *s += scale * v);
            }
        }
    }
    for (c, d) in d_out.iter().enumerate() {
        if let (Some(d), Some(cache)) = (d, &caches[c]) {
            backward_into(params, cache, d, eps, &mut grad);
        }
    }
    grad.add_scaled(2.0 * lambda, params);
    Ok(TripletGradient {
        loss: loss_sum * scale,
        grad,
    })
}
