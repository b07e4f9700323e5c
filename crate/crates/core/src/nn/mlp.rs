//! Dense multilayer perceptron with hand-derived backward pass.
//!
//! Weights are row-major `(out_dim, in_dim)` tensors. The final layer is
//! always `Identity` — regression targets live in unbounded output space and
//! every model in this crate follows that convention.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::util::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed in terms of the pre-activation value.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Tensor>, // layer l: (sizes[l+1], sizes[l]) row-major
    biases: Vec<Tensor>,  // layer l: (sizes[l+1],)
    activations: Vec<Activation>,
}

/// Per-layer pre- and post-activations cached by [`Mlp::forward_cached`];
/// everything the backward pass needs besides the original input.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace has at least one layer")
    }
}

#[derive(Debug, Clone)]
pub struct MlpGrad {
    pub d_weights: Vec<Tensor>,
    pub d_biases: Vec<Tensor>,
}

impl MlpGrad {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrad {
            d_weights: mlp.weights.iter().map(|w| Tensor::zeros(w.shape().to_vec())).collect(),
            d_biases: mlp.biases.iter().map(|b| Tensor::zeros(b.shape().to_vec())).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.d_weights.iter_mut().chain(self.d_biases.iter_mut()) {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn add(&mut self, other: &MlpGrad) {
        for (a, b) in self
            .d_weights
            .iter_mut()
            .chain(self.d_biases.iter_mut())
            .zip(other.d_weights.iter().chain(other.d_biases.iter()))
        {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += *y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.d_weights
            .iter()
            .chain(self.d_biases.iter())
            .flat_map(|t| t.data())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Mlp {
    /// Builds a seeded MLP. Weights are uniform in ±√(6/(fan_in+fan_out)),
    /// biases start at zero. The last activation must be `Identity`.
    pub fn new(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        Self::new_with_rng(sizes, activations, &mut rng)
    }

    pub fn new_with_rng<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        Self::validate_arch(sizes, activations)?;
        let mut weights = Vec::with_capacity(activations.len());
        let mut biases = Vec::with_capacity(activations.len());
        for l in 0..activations.len() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let data: Vec<f64> = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
            weights.push(Tensor::from_parts(vec![fan_out, fan_in], data));
            biases.push(Tensor::zeros(vec![fan_out]));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activations: activations.to_vec(),
        })
    }

    /// All-zero weights and biases; useful for degenerate-field tests.
    pub fn zeroed(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        Self::validate_arch(sizes, activations)?;
        let weights = (0..activations.len())
            .map(|l| Tensor::zeros(vec![sizes[l + 1], sizes[l]]))
            .collect();
        let biases = (0..activations.len())
            .map(|l| Tensor::zeros(vec![sizes[l + 1]]))
            .collect();
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activations: activations.to_vec(),
        })
    }

    pub fn from_parts(
        sizes: Vec<usize>,
        weights: Vec<Tensor>,
        biases: Vec<Tensor>,
        activations: Vec<Activation>,
    ) -> Result<Self> {
        Self::validate_arch(&sizes, &activations)?;
        for l in 0..activations.len() {
            let expect_w = [sizes[l + 1], sizes[l]];
            if weights[l].shape() != expect_w {
                return Err(Error::shape("Mlp::from_parts weights", &expect_w, weights[l].shape()));
            }
            if biases[l].shape() != [sizes[l + 1]] {
                return Err(Error::shape(
                    "Mlp::from_parts biases",
                    &[sizes[l + 1]],
                    biases[l].shape(),
                ));
            }
        }
        Ok(Mlp {
            sizes,
            weights,
            biases,
            activations,
        })
    }

    fn validate_arch(sizes: &[usize], activations: &[Activation]) -> Result<()> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidArg(format!(
                "MLP needs n+1 sizes for n activations, got {} sizes / {} activations",
                sizes.len(),
                activations.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArg("layer sizes must be positive".into()));
        }
        if *activations.last().unwrap() != Activation::Identity {
            return Err(Error::InvalidArg(
                "final layer activation must be identity".into(),
            ));
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Tensor] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Tensor] {
        &mut self.biases
    }

    pub fn in_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Tensor::len).sum::<usize>()
            + self.biases.iter().map(Tensor::len).sum::<usize>()
    }

    pub(crate) fn replace_tensors(&mut self, weights: Vec<Tensor>, biases: Vec<Tensor>) {
        self.weights = weights;
        self.biases = biases;
    }

    /// Forward pass on a single feature vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::shape("Mlp::forward input", &[self.in_dim()], &[input.len()]));
        }
        if !input.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Mlp::forward input".into()));
        }
        let mut cur = input.to_vec();
        for l in 0..self.activations.len() {
            cur = self.layer_forward(l, &cur, None);
        }
        Ok(cur)
    }

    /// Forward pass that records per-layer pre-activations for backprop.
    pub fn forward_cached(&self, input: &[f64]) -> Result<MlpTrace> {
        if input.len() != self.in_dim() {
            return Err(Error::shape(
                "Mlp::forward_cached input",
                &[self.in_dim()],
                &[input.len()],
            ));
        }
        let mut pre = Vec::with_capacity(self.activations.len());
        let mut post = Vec::with_capacity(self.activations.len());
        let mut cur = input.to_vec();
        for l in 0..self.activations.len() {
            let mut pre_l = vec![0.0; self.sizes[l + 1]];
            cur = self.layer_forward(l, &cur, Some(&mut pre_l));
            pre.push(pre_l);
            post.push(cur.clone());
        }
        Ok(MlpTrace { pre, post })
    }

    fn layer_forward(&self, l: usize, input: &[f64], mut pre_out: Option<&mut Vec<f64>>) -> Vec<f64> {
        let (in_dim, out_dim) = (self.sizes[l], self.sizes[l + 1]);
        let w = self.weights[l].data();
        let b = self.biases[l].data();
        let act = self.activations[l];
        let mut out = vec![0.0; out_dim];
        for o in 0..out_dim {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let z = b[o] + row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>();
            if let Some(pre) = pre_out.as_deref_mut() {
                pre[o] = z;
            }
            out[o] = act.apply(z);
        }
        out
    }

    /// Backpropagates `d_output` through the cached trace, accumulating
    /// parameter gradients into `grad` and returning the input gradient.
    pub fn backward(
        &self,
        input: &[f64],
        trace: &MlpTrace,
        d_output: &[f64],
        grad: &mut MlpGrad,
    ) -> Vec<f64> {
        assert_eq!(d_output.len(), self.out_dim(), "d_output dimension");
        let n_layers = self.activations.len();
        let mut d_cur = d_output.to_vec();
        for l in (0..n_layers).rev() {
            let (in_dim, out_dim) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activations[l];
            let pre = &trace.pre[l];
            let below: &[f64] = if l == 0 { input } else { &trace.post[l - 1] };
            let w = self.weights[l].data();
            let dw = grad.d_weights[l].data_mut();
            let db = grad.d_biases[l].data_mut();
            let mut d_below = vec![0.0; in_dim];
            for o in 0..out_dim {
                let dz = d_cur[o] * act.derivative(pre[o]);
                db[o] += dz;
                let w_row = &w[o * in_dim..(o + 1) * in_dim];
                let dw_row = &mut dw[o * in_dim..(o + 1) * in_dim];
                for i in 0..in_dim {
                    dw_row[i] += dz * below[i];
                    d_below[i] += w_row[i] * dz;
                }
            }
            d_cur = d_below;
        }
        d_cur
    }
}

/// Applies the network to a vector (`[d_in]`) or batch (`[n, d_in]`) tensor.
pub fn mlp_apply(params: &Mlp, input: &Tensor) -> Result<Tensor> {
    match input.shape() {
        [d] => {
            if *d != params.in_dim() {
                return Err(Error::shape("mlp_apply input", &[params.in_dim()], &[*d]));
            }
            let out = params.forward(input.data())?;
            Ok(Tensor::from_parts(vec![out.len()], out))
        }
        [n, d] => {
            if *d != params.in_dim() {
                return Err(Error::shape(
                    "mlp_apply input",
                    &[*n, params.in_dim()],
                    &[*n, *d],
                ));
            }
            let mut out = Vec::with_capacity(n * params.out_dim());
            for row in input.data().chunks(*d) {
                out.extend(params.forward(row)?);
            }
            Ok(Tensor::from_parts(vec![*n, params.out_dim()], out))
        }
        other => Err(Error::shape("mlp_apply input rank", &[1, 2], &[other.len()])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
}

/// Mean over the batch of the squared L2 residual (summed over output
/// dimensions), with analytic gradients for every parameter.
pub fn loss_and_grad(
    params: &Mlp,
    batch: &[(Tensor, Tensor)],
    loss: LossKind,
) -> Result<(f64, MlpGrad)> {
    let LossKind::Mse = loss;
    if batch.is_empty() {
        return Err(Error::InvalidArg("loss_and_grad: empty batch".into()));
    }
    let n = batch.len() as f64;
    let mut grad = MlpGrad::zeros_like(params);
    let mut total = 0.0;
    for (input, target) in batch {
        if input.len() != params.in_dim() {
            return Err(Error::shape("loss_and_grad input", &[params.in_dim()], input.shape()));
        }
        if target.len() != params.out_dim() {
            return Err(Error::shape(
                "loss_and_grad target",
                &[params.out_dim()],
                target.shape(),
            ));
        }
        let trace = params.forward_cached(input.data())?;
        let mut d_out = vec![0.0; params.out_dim()];
        for (i, (y, t)) in trace.output().iter().zip(target.data()).enumerate() {
            let r = y - t;
            total += r * r;
            d_out[i] = 2.0 * r / n;
        }
        params.backward(input.data(), &trace, &d_out, &mut grad);
    }
    Ok((total / n, grad))
}
