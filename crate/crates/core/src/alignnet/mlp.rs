use crate::error::{Result, VaweError};
use crate::numerics::{dot, norm, DenseMatrix, Rng};

/// Weights of the three fully connected layers. `w_k` has one row per
/// output unit, so a layer computes `w_k·x + b_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
    pub w3: DenseMatrix,
    pub b3: Vec<f64>,
}

/// Layer sizes `[input, hidden1, hidden2, output]`.
pub type MlpShape = [usize; 4];

impl MlpParams {
    /// Uniform init with variance `2 / fan_in`, zero biases.
    pub fn init(shape: MlpShape, rng: &mut Rng) -> Self {
        let layer = |rng: &mut Rng, fan_in: usize, fan_out: usize| {
            let bound = (6.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.uniform_range(-bound, bound))
                .collect();
            DenseMatrix::from_vec(fan_out, fan_in, data).expect("sized above")
        };
        let [d, h1, h2, o] = shape;
        let w1 = layer(rng, d, h1);
        let w2 = layer(rng, h1, h2);
        let w3 = layer(rng, h2, o);
        MlpParams {
            w1,
            b1: vec![0.0; h1],
            w2,
            b2: vec![0.0; h2],
            w3,
            b3: vec![0.0; o],
        }
    }

    pub fn zeros(shape: MlpShape) -> Self {
        let [d, h1, h2, o] = shape;
        MlpParams {
            w1: DenseMatrix::zeros(h1, d),
            b1: vec![0.0; h1],
            w2: DenseMatrix::zeros(h2, h1),
            b2: vec![0.0; h2],
            w3: DenseMatrix::zeros(o, h2),
            b3: vec![0.0; o],
        }
    }

    pub fn shape(&self) -> MlpShape {
        [self.w1.cols(), self.w1.rows(), self.w2.rows(), self.w3.rows()]
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w3.rows()
    }

    /// Checks that the six tensors chain together.
    pub fn validate(&self) -> Result<()> {
        let ok = self.b1.len() == self.w1.rows()
            && self.w2.cols() == self.w1.rows()
            && self.b2.len() == self.w2.rows()
            && self.w3.cols() == self.w2.rows()
            && self.b3.len() == self.w3.rows();
        if !ok {
            return Err(VaweError::Shape("inconsistent network parameter shapes".into()));
        }
        if !self.is_finite() {
            return Err(VaweError::Numeric("non-finite network parameters".into()));
        }
        Ok(())
    }

    fn parts(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
            self.w3.as_slice(),
            &self.b3,
        ]
    }

    fn parts_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
            self.w3.as_mut_slice(),
            &mut self.b3,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.parts().iter().map(|p| p.len()).sum()
    }

    /// All values in the order w1, b1, w2, b2, w3, b3 (weights row-major).
    pub fn to_flat(&self) -> Vec<f64> {
        self.parts().concat()
    }

    pub fn from_flat(shape: MlpShape, flat: &[f64]) -> Result<Self> {
        let mut p = MlpParams::zeros(shape);
        if flat.len() != p.num_params() {
            return Err(VaweError::Shape(format!(
                "{} values for a network with {} parameters",
                flat.len(),
                p.num_params()
            )));
        }
        let mut offset = 0;
        for part in p.parts_mut() {
            part.copy_from_slice(&flat[offset..offset + part.len()]);
            offset += part.len();
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// `‖Θ‖²` over every weight and bias.
    pub fn sq_norm(&self) -> f64 {
        self.parts().iter().map(|p| dot(p, p)).sum()
    }

    /// `self += k * other`; shapes must match.
    pub fn add_scaled(&mut self, k: f64, other: &MlpParams) {
        debug_assert_eq!(self.shape(), other.shape());
        for (dst, src) in self.parts_mut().into_iter().zip(other.parts()) {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += k * b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for part in self.parts_mut() {
            part.iter_mut().for_each(|v| *v *= k);
        }
    }
}

/// Activations kept by [`forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    act2: Vec<f64>,
    /// Output before normalization.
    raw: Vec<f64>,
    raw_norm: f64,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn raw_output(&self) -> &[f64] {
        &self.raw
    }

    /// Every hidden pre-activation, used to keep gradient checks off ReLU kinks.
    pub fn pre_activations(&self) -> impl Iterator<Item = f64> + '_ {
        self.pre1.iter().chain(&self.pre2).copied()
    }
}

fn affine(w: &DenseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    w.row_iter().zip(b).map(|(r, bi)| dot(r, x) + bi).collect()
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// Maps one semantic vector to the unit sphere:
/// `normalize(w3·relu(w2·relu(w1·s + b1) + b2) + b3)`.
pub fn forward(params: &MlpParams, s: &[f64], eps: f64) -> Result<(Vec<f64>, ForwardCache)> {
    if s.len() != params.input_dim() {
        return Err(VaweError::Shape(format!(
            "input of length {} for a network expecting {}",
            s.len(),
            params.input_dim()
        )));
    }
    let pre1 = affine(&params.w1, &params.b1, s);
    let act1 = relu(&pre1);
    let pre2 = affine(&params.w2, &params.b2, &act1);
    let act2 = relu(&pre2);
    let raw = affine(&params.w3, &params.b3, &act2);
    let raw_norm = norm(&raw);
    let denom = raw_norm.max(eps);
    let output: Vec<f64> = raw.iter().map(|v| v / denom).collect();
    let cache = ForwardCache {
        input: s.to_vec(),
        pre1,
        act1,
        pre2,
        act2,
        raw,
        raw_norm,
        output: output.clone(),
    };
    Ok((output, cache))
}

/// Backpropagates `d_out` (gradient w.r.t. the normalized output) through
/// one forward pass, adding the parameter gradient into `grad`.
pub fn backward_into(
    params: &MlpParams,
    cache: &ForwardCache,
    d_out: &[f64],
    eps: f64,
    grad: &mut MlpParams,
) {
    // Normalization Jacobian: (I - y yᵀ) / ‖z‖ above the guard, 1/eps below it.
    let d_raw: Vec<f64> = if cache.raw_norm >= eps {
        let yd = dot(&cache.output, d_out);
        d_out
            .iter()
            .zip(&cache.output)
            .map(|(g, y)| (g - y * yd) / cache.raw_norm)
            .collect()
    } else {
        d_out.iter().map(|g| g / eps).collect()
    };

    let d_act2 = layer_backward(&params.w3, &d_raw, &cache.act2, &mut grad.w3, &mut grad.b3);
    let d_pre2: Vec<f64> = d_act2
        .iter()
        .zip(&cache.pre2)
        .map(|(g, &p)| if p > 0.0 { *g } else { 0.0 })
        .collect();
    let d_act1 = layer_backward(&params.w2, &d_pre2, &cache.act1, &mut grad.w2, &mut grad.b2);
    let d_pre1: Vec<f64> = d_act1
        .iter()
        .zip(&cache.pre1)
        .map(|(g, &p)| if p > 0.0 { *g } else { 0.0 })
        .collect();
    // The input gradient is not needed.
    layer_backward_last(&d_pre1, &cache.input, &mut grad.w1, &mut grad.b1);
}

/// Accumulates `dW += d ⊗ x`, `db += d`; returns `Wᵀ·d`.
fn layer_backward(
    w: &DenseMatrix,
    d: &[f64],
    x: &[f64],
    dw: &mut DenseMatrix,
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; w.cols()];
    for (i, &di) in d.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        db[i] += di;
        for ((g, &xj), (dxj, &wij)) in dw
            .row_mut(i)
            .iter_mut()
            .zip(x)
            .zip(dx.iter_mut().zip(w.row(i)))
        {
            *g += di * xj;
            *dxj += di * wij;
        }
    }
    dx
}

fn layer_backward_last(d: &[f64], x: &[f64], dw: &mut DenseMatrix, db: &mut [f64]) {
    for (i, &di) in d.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        db[i] += di;
        for (g, &xj) in dw.row_mut(i).iter_mut().zip(x) {
            *g += di * xj;
        }
    }
}
