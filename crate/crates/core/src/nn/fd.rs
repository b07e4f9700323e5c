//! Central finite-difference gradient oracle.
//!
//! Goes through loss *evaluation* only — no shared code with the analytic
//! backward pass — so the two routes check each other.

use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpGrad, Tensor};

fn mse_loss(params: &Mlp, batch: &[(Tensor, Tensor)]) -> Result<f64> {
    let mut total = 0.0;
    for (input, target) in batch {
        let out = params.forward(input.data())?;
        total += out
            .iter()
            .zip(target.data())
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// Central-difference estimate of the MSE gradient for every parameter.
pub fn finite_diff_grad(params: &Mlp, batch: &[(Tensor, Tensor)], h: f64) -> Result<MlpGrad> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidArg(format!("finite_diff_grad: h must be > 0, got {h}")));
    }
    if batch.is_empty() {
        return Err(Error::InvalidArg("finite_diff_grad: empty batch".into()));
    }
    let mut grad = MlpGrad::zeros_like(params);
    let n_layers = params.weights().len();
    for l in 0..n_layers {
        for is_bias in [false, true] {
            let n = if is_bias {
                params.biases()[l].len()
            } else {
                params.weights()[l].len()
            };
            for i in 0..n {
                let mut probe = params.clone();
                let slot = if is_bias {
                    &mut probe.biases_mut()[l].data_mut()[i]
                } else {
                    &mut probe.weights_mut()[l].data_mut()[i]
                };
                let orig = *slot;
                *slot = orig + h;
                let up = mse_loss(&probe, batch)?;
                let slot = if is_bias {
                    &mut probe.biases_mut()[l].data_mut()[i]
                } else {
                    &mut probe.weights_mut()[l].data_mut()[i]
                };
                *slot = orig - h;
                let down = mse_loss(&probe, batch)?;
                let est = (up - down) / (2.0 * h);
                if is_bias {
                    grad.d_biases[l].data_mut()[i] = est;
                } else {
                    grad.d_weights[l].data_mut()[i] = est;
                }
            }
        }
    }
    Ok(grad)
}

/// Relative error with an absolute floor of 1: |a-b| / max(|a|, |b|, 1).
pub fn grad_rel_error(analytic: &MlpGrad, numeric: &MlpGrad) -> f64 {
    let mut worst = 0.0f64;
    for (a, b) in analytic
        .d_weights
        .iter()
        .chain(analytic.d_biases.iter())
        .zip(numeric.d_weights.iter().chain(numeric.d_biases.iter()))
    {
        for (x, y) in a.data().iter().zip(b.data()) {
            let denom = x.abs().max(y.abs()).max(1.0);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{loss_and_grad, Activation, LossKind};

    fn vec_tensor(v: &[f64]) -> Tensor {
        Tensor::vector(v.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_in_one_weight_matches_analytic_derivative() {
        // Model y = w*x, batch {(1, 0)}: L(w) = w², dL/dw = 2w = 6 at w = 3.
        let mut mlp = Mlp::zeroed(&[1, 1], &[Activation::Identity]).unwrap();
        mlp.weights_mut()[0].data_mut()[0] = 3.0;
        let batch = vec![(vec_tensor(&[1.0]), vec_tensor(&[0.0]))];
        let g = finite_diff_grad(&mlp, &batch, 1e-5).unwrap();
        assert!((g.d_weights[0].data()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_loss_gives_zero_estimate() {
        // Input 0 and target equal to the bias output: the loss sits at an
        // exact flat minimum, so every central difference is exactly 0.
        let mlp = Mlp::zeroed(&[2, 1], &[Activation::Identity]).unwrap();
        let batch = vec![(vec_tensor(&[0.0, 0.0]), vec_tensor(&[0.0]))];
        let g = finite_diff_grad(&mlp, &batch, 1e-5).unwrap();
        assert_eq!(g.d_weights[0].data(), &[0.0, 0.0]);
        assert_eq!(g.d_biases[0].data(), &[0.0]);
    }

    #[test]
    fn agrees_with_analytic_gradient_on_seeded_nets() {
        for seed in 0..5u64 {
            let mlp = Mlp::new(
                &[3, 6, 4, 2],
                &[Activation::Tanh, Activation::Tanh, Activation::Identity],
                seed,
            )
            .unwrap();
            let mut rng = crate::util::rng_from_seed(1000 + seed);
            use rand::Rng;
            let batch: Vec<_> = (0..4)
                .map(|_| {
                    let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    let t: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    (vec_tensor(&x), vec_tensor(&t))
                })
                .collect();
            let (_, analytic) = loss_and_grad(&mlp, &batch, LossKind::Mse).unwrap();
            let numeric = finite_diff_grad(&mlp, &batch, 1e-5).unwrap();
            let err = grad_rel_error(&analytic, &numeric);
            assert!(err < 1e-5, "seed {seed}: rel error {err}");
        }
    }

    #[test]
    fn rejects_bad_h() {
        let mlp = Mlp::new(&[1, 1], &[Activation::Identity], 0).unwrap();
        let batch = vec![(vec_tensor(&[1.0]), vec_tensor(&[0.0]))];
        assert!(finite_diff_grad(&mlp, &batch, 0.0).is_err());
        assert!(finite_diff_grad(&mlp, &batch, -1e-5).is_err());
    }
}
