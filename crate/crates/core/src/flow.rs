//! Shared flow-matching primitives: flow-time sampling, straight-line
//! interpolants, the velocity regression loss and first-order ODE
//! integration. Both the latent dynamics model and the action head are thin
//! wrappers around this module.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpGrad, Tensor};

/// Beta-distributed flow time, optionally rescaled away from 0.
#[derive(Debug, Clone, Copy)]
pub struct FlowTimeDist {
    pub alpha: f64,
    pub beta: f64,
    pub rescale: bool,
}

/// Affine map keeping rescaled draws in [0.001, 1.0].
pub fn rescale_draw(u: f64) -> f64 {
    0.001 + 0.999 * u
}

impl FlowTimeDist {
    pub fn new(alpha: f64, beta: f64, rescale: bool) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidArg(format!(
                "flow-time Beta parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(FlowTimeDist { alpha, beta, rescale })
    }

    /// Draws a flow time. Beta sampling goes through two Gamma draws
    /// (Marsaglia–Tsang, as implemented by `rand_distr`).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let beta = Beta::new(self.alpha, self.beta).expect("validated at construction");
        let u: f64 = beta.sample(rng);
        if self.rescale {
            rescale_draw(u)
        } else {
            u
        }
    }
}

/// One training point on the straight-line path between noise and data.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub time: f64,
    pub interpolant: Tensor,
    pub target_velocity: Tensor,
}

/// interpolant = time·data + (1−time)·noise, target velocity = data − noise.
///
/// The endpoints are exact: time 1 returns `data` bitwise, time 0 returns
/// `noise` bitwise.
pub fn make_interpolant(data: &Tensor, noise: &Tensor, time: f64) -> Result<FlowSample> {
    if data.shape() != noise.shape() {
        return Err(Error::shape("make_interpolant", data.shape(), noise.shape()));
    }
    if !(0.0..=1.0).contains(&time) {
        return Err(Error::InvalidArg(format!("flow time {time} outside [0, 1]")));
    }
    let interp: Vec<f64> = data
        .data()
        .iter()
        .zip(noise.data())
        .map(|(d, n)| {
            if time == 1.0 {
                *d
            } else if time == 0.0 {
                *n
            } else {
                time * d + (1.0 - time) * n
            }
        })
        .collect();
    let velocity: Vec<f64> = data.data().iter().zip(noise.data()).map(|(d, n)| d - n).collect();
    Ok(FlowSample {
        time,
        interpolant: Tensor::from_parts(data.shape().to_vec(), interp),
        target_velocity: Tensor::from_parts(data.shape().to_vec(), velocity),
    })
}

/// Integrates `x ← x + Δ·v(x, σ)` with Δ = 1/steps and σ running 0 → 1.
/// Rejects a non-finite intermediate state with the step index.
pub fn euler_integrate<F>(mut vfield: F, start: &Tensor, steps: usize) -> Result<Tensor>
where
    F: FnMut(&Tensor, f64) -> Result<Tensor>,
{
    if steps == 0 {
        return Err(Error::InvalidArg("euler_integrate: steps must be >= 1".into()));
    }
    let delta = 1.0 / steps as f64;
    let mut x = start.clone();
    for step in 0..steps {
        let sigma = step as f64 * delta;
        let v = vfield(&x, sigma)?;
        if v.shape() != x.shape() {
            return Err(Error::shape("euler_integrate velocity", x.shape(), v.shape()));
        }
        for (xi, vi) in x.data_mut().iter_mut().zip(v.data()) {
            *xi += delta * vi;
        }
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("euler_integrate state at step {step}")));
        }
    }
    Ok(x)
}

/// Learned velocity field: an MLP over `[x, t, condition]` producing a
/// velocity of the same dimension as `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpVelocityField {
    pub mlp: Mlp,
    pub x_dim: usize,
    pub cond_dim: usize,
}

impl MlpVelocityField {
    pub fn new(x_dim: usize, cond_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mlp = Mlp::new(&Self::arch(x_dim, cond_dim, hidden).0, &Self::arch(x_dim, cond_dim, hidden).1, seed)?;
        Ok(MlpVelocityField { mlp, x_dim, cond_dim })
    }

    pub fn zeroed(x_dim: usize, cond_dim: usize, hidden: &[usize]) -> Result<Self> {
        let (sizes, acts) = Self::arch(x_dim, cond_dim, hidden);
        Ok(MlpVelocityField {
            mlp: Mlp::zeroed(&sizes, &acts)?,
            x_dim,
            cond_dim,
        })
    }

    fn arch(x_dim: usize, cond_dim: usize, hidden: &[usize]) -> (Vec<usize>, Vec<crate::nn::Activation>) {
        use crate::nn::Activation::*;
        let mut sizes = vec![x_dim + 1 + cond_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(x_dim);
        let mut acts = vec![Tanh; hidden.len()];
        acts.push(Identity);
        (sizes, acts)
    }

    pub fn from_mlp(mlp: Mlp, x_dim: usize, cond_dim: usize) -> Result<Self> {
        if mlp.in_dim() != x_dim + 1 + cond_dim || mlp.out_dim() != x_dim {
            return Err(Error::shape(
                "MlpVelocityField::from_mlp",
                &[x_dim + 1 + cond_dim, x_dim],
                &[mlp.in_dim(), mlp.out_dim()],
            ));
        }
        Ok(MlpVelocityField { mlp, x_dim, cond_dim })
    }

    fn pack_input(&self, x: &[f64], t: f64, cond: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.x_dim {
            return Err(Error::shape("velocity field x", &[self.x_dim], &[x.len()]));
        }
        if cond.len() != self.cond_dim {
            return Err(Error::shape("velocity field condition", &[self.cond_dim], &[cond.len()]));
        }
        let mut input = Vec::with_capacity(self.x_dim + 1 + self.cond_dim);
        input.extend_from_slice(x);
        input.push(t);
        input.extend_from_slice(cond);
        Ok(input)
    }

    pub fn eval(&self, x: &[f64], t: f64, cond: &[f64]) -> Result<Vec<f64>> {
        let input = self.pack_input(x, t, cond)?;
        self.mlp.forward(&input)
    }
}

/// Gradients of the Monte-Carlo flow-matching loss: parameter gradients plus
/// the per-sample condition gradient (for callers that backpropagate further
/// into whatever produced the conditioning).
pub struct FmLossGrad {
    pub loss: f64,
    pub grad: MlpGrad,
    pub d_cond: Vec<Vec<f64>>,
}

/// Monte-Carlo estimate of E‖v(interpolant, t, cond) − (data − noise)‖² with
/// analytic gradients. Per batch row draws one flow time, then one Gaussian
/// noise vector, in that order.
pub fn fm_regression_loss<R: Rng + ?Sized>(
    field: &MlpVelocityField,
    batch: &[(Vec<f64>, Vec<f64>)],
    dist: &FlowTimeDist,
    rng: &mut R,
) -> Result<FmLossGrad> {
    if batch.is_empty() {
        return Err(Error::InvalidArg("fm_regression_loss: empty batch".into()));
    }
    let n = batch.len() as f64;
    let mut grad = MlpGrad::zeros_like(&field.mlp);
    let mut d_cond = Vec::with_capacity(batch.len());
    let mut total = 0.0;
    for (data, cond) in batch {
        let t = dist.sample(rng);
        let noise: Vec<f64> = (0..data.len()).map(|_| rng.sample(StandardNormal)).collect();
        let data_t = Tensor::vector(data.clone())?;
        let noise_t = Tensor::from_parts(vec![noise.len()], noise);
        let fs = make_interpolant(&data_t, &noise_t, t)?;
        let input = field.pack_input(fs.interpolant.data(), t, cond)?;
        let trace = field.mlp.forward_cached(&input)?;
        let mut d_out = vec![0.0; field.x_dim];
        for (i, (y, u)) in trace.output().iter().zip(fs.target_velocity.data()).enumerate() {
            let r = y - u;
            total += r * r;
            d_out[i] = 2.0 * r / n;
        }
        let d_input = field.mlp.backward(&input, &trace, &d_out, &mut grad);
        d_cond.push(d_input[field.x_dim + 1..].to_vec());
    }
    Ok(FmLossGrad {
        loss: total / n,
        grad,
        d_cond,
    })
}

/// Loss-only evaluation on caller-supplied (data, noise, time, cond) tuples.
/// Takes the velocity field as a plain closure so tests can substitute exact
/// oracles for the learned field.
pub fn fm_loss_fixed<F>(mut vfield: F, samples: &[(Tensor, Tensor, f64, Vec<f64>)]) -> Result<f64>
where
    F: FnMut(&Tensor, f64, &[f64]) -> Result<Tensor>,
{
    if samples.is_empty() {
        return Err(Error::InvalidArg("fm_loss_fixed: empty batch".into()));
    }
    let mut total = 0.0;
    for (data, noise, time, cond) in samples {
        let fs = make_interpolant(data, noise, *time)?;
        let v = vfield(&fs.interpolant, *time, cond)?;
        total += v
            .data()
            .iter()
            .zip(fs.target_velocity.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{opt_step, OptState};
    use crate::util::rng_from_seed;

    fn vt(v: &[f64]) -> Tensor {
        Tensor::vector(v.to_vec()).unwrap()
    }

    #[test]
    fn rescale_endpoints() {
        assert_eq!(rescale_draw(0.0), 0.001);
        assert_eq!(rescale_draw(1.0), 1.0);
    }

    #[test]
    fn beta_mean_policy_setting() {
        // Beta(1, 1.5) mean = 0.4; rescaled mean = 0.001 + 0.999·0.4 = 0.4006.
        let dist = FlowTimeDist::new(1.0, 1.5, true).unwrap();
        let mut rng = rng_from_seed(77);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| dist.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.4006).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn beta_mean_world_model_setting() {
        // Beta(1, 8) mean = 1/9, no rescale.
        let dist = FlowTimeDist::new(1.0, 8.0, false).unwrap();
        let mut rng = rng_from_seed(78);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| dist.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0 / 9.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn rescaled_draws_stay_in_range() {
        let dist = FlowTimeDist::new(1.0, 1.5, true).unwrap();
        let mut rng = rng_from_seed(5);
        for _ in 0..1_000_000 {
            let t = dist.sample(&mut rng);
            assert!((0.001..=1.0).contains(&t));
        }
    }

    #[test]
    fn interpolant_endpoints_are_bitwise() {
        let data = vt(&[0.1, -2.5, 3.0]);
        let noise = vt(&[7.0, 0.3, -1.0]);
        let one = make_interpolant(&data, &noise, 1.0).unwrap();
        assert_eq!(one.interpolant.data(), data.data());
        let zero = make_interpolant(&data, &noise, 0.0).unwrap();
        assert_eq!(zero.interpolant.data(), noise.data());
    }

    #[test]
    fn interpolant_midpoint_arithmetic() {
        let fs = make_interpolant(&vt(&[2.0, 0.0]), &vt(&[0.0, 2.0]), 0.5).unwrap();
        assert_eq!(fs.interpolant.data(), &[1.0, 1.0]);
        assert_eq!(fs.target_velocity.data(), &[2.0, -2.0]);
    }

    #[test]
    fn interpolant_shape_mismatch_rejected() {
        assert!(make_interpolant(&vt(&[1.0]), &vt(&[1.0, 2.0]), 0.5).is_err());
    }

    #[test]
    fn euler_constant_field_is_exact() {
        let c = [0.5, -1.5];
        for steps in [1, 3, 17] {
            let out = euler_integrate(
                |_x: &Tensor, _t| Ok(vt(&c)),
                &vt(&[1.0, 1.0]),
                steps,
            )
            .unwrap();
            assert!((out.data()[0] - 1.5).abs() < 1e-12);
            assert!((out.data()[1] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_one_step_straight_line_transport() {
        let data = vt(&[0.25, -3.0, 8.0]);
        let noise = vt(&[1.0, 1.0, 1.0]);
        let v: Vec<f64> = data.data().iter().zip(noise.data()).map(|(d, n)| d - n).collect();
        let out = euler_integrate(|_x: &Tensor, _t| Ok(vt(&v)), &noise, 1).unwrap();
        for (o, d) in out.data().iter().zip(data.data()) {
            assert!((o - d).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_linear_field_matches_closed_form() {
        let x0 = 2.0;
        for n in [1usize, 10, 100] {
            let out = euler_integrate(
                |x: &Tensor, _t| Ok(Tensor::from_parts(vec![1], vec![-x.data()[0]])),
                &vt(&[x0]),
                n,
            )
            .unwrap();
            let expected = x0 * (1.0 - 1.0 / n as f64).powi(n as i32);
            assert!(
                (out.data()[0] - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "n={n}: {} vs {expected}",
                out.data()[0]
            );
        }
    }

    #[test]
    fn euler_error_halves_as_steps_double() {
        let x0 = 1.0;
        let target = x0 * (-1.0f64).exp();
        let mut errs = Vec::new();
        for n in [8usize, 16, 32, 64, 128] {
            let out = euler_integrate(
                |x: &Tensor, _t| Ok(Tensor::from_parts(vec![1], vec![-x.data()[0]])),
                &vt(&[x0]),
                n,
            )
            .unwrap();
            errs.push((out.data()[0] - target).abs());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
        }
    }

    #[test]
    fn euler_rejects_divergence_with_step_index() {
        let err = euler_integrate(
            |x: &Tensor, _t| Ok(Tensor::from_parts(vec![1], vec![x.data()[0] * 1e308])),
            &vt(&[1.0]),
            4,
        )
        .unwrap_err();
        assert!(err.to_string().contains("step 1"), "{err}");
    }

    #[test]
    fn perfect_velocity_field_has_zero_loss() {
        let samples: Vec<_> = (0..8)
            .map(|i| (vt(&[i as f64, 1.0]), vt(&[0.5, -0.5]), 0.3, vec![]))
            .collect();
        // Oracle closure that returns the exact target data − noise.
        let mut idx = 0;
        let loss = fm_loss_fixed(
            |_x, _t, _c| {
                let (d, n, _, _) = &samples[idx];
                idx += 1;
                let v: Vec<f64> = d.data().iter().zip(n.data()).map(|(a, b)| a - b).collect();
                Ok(vt(&v))
            },
            &samples,
        )
        .unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn zero_field_on_unit_norm_pairs_gives_loss_one() {
        // data − noise is a unit basis vector for every pair.
        let samples: Vec<_> = (0..4)
            .map(|i| {
                let mut d = vec![0.0; 4];
                d[i] = 1.0;
                (vt(&d), vt(&[0.0; 4]), 0.25, vec![])
            })
            .collect();
        let loss = fm_loss_fixed(|_x, _t, _c| Ok(vt(&[0.0; 4])), &samples).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn training_loss_decreases_on_two_point_target() {
        let mut field = MlpVelocityField::new(1, 0, &[32], 3).unwrap();
        let mut opt = OptState::new(&field.mlp, 1e-2);
        let dist = FlowTimeDist::new(1.0, 1.5, true).unwrap();
        let mut rng = rng_from_seed(42);
        let data = [vec![-1.0], vec![1.0]];
        let mut losses = Vec::new();
        for step in 0..500 {
            let batch: Vec<_> = (0..16)
                .map(|i| (data[(step + i) % 2].clone(), vec![]))
                .collect();
            let out = fm_regression_loss(&field, &batch, &dist, &mut rng).unwrap();
            let (mlp, st) = opt_step(&field.mlp, &out.grad, &opt).unwrap();
            field.mlp = mlp;
            opt = st;
            losses.push(out.loss);
        }
        let window = 100;
        let mas: Vec<f64> = losses
            .chunks(window)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        for w in mas.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "moving average rose: {mas:?}");
        }
        assert!(
            mas.last().unwrap() < &(mas[0] * 0.8),
            "no overall decrease: {mas:?}"
        );
    }

    #[test]
    fn empty_batch_rejected() {
        let field = MlpVelocityField::new(2, 0, &[4], 0).unwrap();
        let dist = FlowTimeDist::new(1.0, 1.5, true).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(fm_regression_loss(&field, &[], &dist, &mut rng).is_err());
    }
}
