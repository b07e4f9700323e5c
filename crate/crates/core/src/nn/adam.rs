//! Adaptive-moment optimizer. `opt_step` is a pure function: it returns
//! fresh parameters and state and never mutates its inputs, which makes
//! bitwise-reproducibility arguments trivial.

use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpGrad, Tensor};

#[derive(Debug, Clone)]
pub struct OptState {
    m_w: Vec<Tensor>,
    v_w: Vec<Tensor>,
    m_b: Vec<Tensor>,
    v_b: Vec<Tensor>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptState {
    pub fn new(mlp: &Mlp, lr: f64) -> Self {
        OptState {
            m_w: mlp.weights().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect(),
            v_w: mlp.weights().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect(),
            m_b: mlp.biases().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect(),
            v_b: mlp.biases().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect(),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

fn update_tensor(
    param: &Tensor,
    grad: &Tensor,
    m: &Tensor,
    v: &Tensor,
    st: &OptState,
    bc1: f64,
    bc2: f64,
) -> (Tensor, Tensor, Tensor) {
    let mut new_p = param.clone();
    let mut new_m = m.clone();
    let mut new_v = v.clone();
    let (p, g) = (new_p.data_mut(), grad.data());
    let (mm, vv) = (new_m.data_mut(), new_v.data_mut());
    for i in 0..g.len() {
        mm[i] = st.beta1 * mm[i] + (1.0 - st.beta1) * g[i];
        vv[i] = st.beta2 * vv[i] + (1.0 - st.beta2) * g[i] * g[i];
        let m_hat = mm[i] / bc1;
        let v_hat = vv[i] / bc2;
        p[i] -= st.lr * m_hat / (v_hat.sqrt() + st.eps);
    }
    (new_p, new_m, new_v)
}

/// One optimizer step. Rejects non-finite gradients, naming the offending
/// layer index.
pub fn opt_step(params: &Mlp, grads: &MlpGrad, state: &OptState) -> Result<(Mlp, OptState)> {
    let n_layers = params.weights().len();
    if grads.d_weights.len() != n_layers || grads.d_biases.len() != n_layers {
        return Err(Error::shape(
            "opt_step layer count",
            &[n_layers],
            &[grads.d_weights.len()],
        ));
    }
    for l in 0..n_layers {
        if grads.d_weights[l].shape() != params.weights()[l].shape()
            || grads.d_biases[l].shape() != params.biases()[l].shape()
        {
            return Err(Error::shape(
                "opt_step gradient shape",
                params.weights()[l].shape(),
                grads.d_weights[l].shape(),
            ));
        }
        if !grads.d_weights[l].is_finite() || !grads.d_biases[l].is_finite() {
            return Err(Error::NonFinite(format!("opt_step gradient at layer {l}")));
        }
    }

    let mut st = state.clone();
    st.step += 1;
    let bc1 = 1.0 - st.beta1.powi(st.step as i32);
    let bc2 = 1.0 - st.beta2.powi(st.step as i32);

    let mut new_w = Vec::with_capacity(n_layers);
    let mut new_b = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (p, m, v) = update_tensor(
            &params.weights()[l],
            &grads.d_weights[l],
            &st.m_w[l],
            &st.v_w[l],
            &st,
            bc1,
            bc2,
        );
        new_w.push(p);
        st.m_w[l] = m;
        st.v_w[l] = v;
        let (p, m, v) = update_tensor(
            &params.biases()[l],
            &grads.d_biases[l],
            &st.m_b[l],
            &st.v_b[l],
            &st,
            bc1,
            bc2,
        );
        new_b.push(p);
        st.m_b[l] = m;
        st.v_b[l] = v;
    }
    let mut out = params.clone();
    out.replace_tensors(new_w, new_b);
    Ok((out, st))
}
