//! Observation encoder, reconstruction decoder and the learned task context.
//!
//! The encoder maps the flattened observation (image ⧺ robot state ⧺ contact
//! ⧺ one-hot instruction) to a `d_z`-dimensional latent — the common
//! currency shared by the dynamics model, the reward heads and the policy.
//! The decoder exists to keep that latent visually grounded (reconstruction
//! training and rollout visualization). The task context concatenates an
//! instruction embedding with a linear projection of the latent and passes
//! the pair through one affine layer.

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpGrad, MlpTrace};
use crate::world::{Observation, IMG_PIXELS, N_INSTRUCTIONS};

/// Encoder input layout: image, effector x/y, grip, contact, one-hot id.
pub const ENC_EXTRA_DIMS: usize = 3 + 1 + N_INSTRUCTIONS as usize;
pub const ENC_INPUT_DIM: usize = IMG_PIXELS + ENC_EXTRA_DIMS;

/// Latent norms are projected back to this radius if training ever drives
/// them out; in practice trained latents sit far below it.
pub const LATENT_NORM_CAP: f64 = 100.0;

const EMB_DIM: usize = 8;
const PROJ_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Latent(pub Vec<f64>);

impl Latent {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskContext(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct ReprParams {
    pub enc: Mlp,
    pub dec: Mlp,
    /// Instruction embedding table as a linear layer over one-hot ids; keeps
    /// every learned parameter in MLP form for snapshots.
    pub task_emb: Mlp,
    pub task_proj: Mlp,
    pub task_head: Mlp,
    pub d_z: usize,
    pub d_s: usize,
}

impl ReprParams {
    pub fn new(d_z: usize, d_s: usize, seed: u64) -> Result<Self> {
        use Activation::{Identity, Tanh};
        Ok(ReprParams {
            enc: Mlp::new(&[ENC_INPUT_DIM, 64, 64, d_z], &[Tanh, Tanh, Identity], seed)?,
            dec: Mlp::new(&[d_z, 64, IMG_PIXELS], &[Tanh, Identity], seed.wrapping_add(1))?,
            task_emb: Mlp::new(&[N_INSTRUCTIONS as usize, EMB_DIM], &[Identity], seed.wrapping_add(2))?,
            task_proj: Mlp::new(&[d_z, PROJ_DIM], &[Identity], seed.wrapping_add(3))?,
            task_head: Mlp::new(&[EMB_DIM + PROJ_DIM, d_s], &[Identity], seed.wrapping_add(4))?,
            d_z,
            d_s,
        })
    }

    /// Activation layout per snapshot record, in file order.
    pub fn snapshot_specs() -> [Vec<Activation>; 5] {
        use Activation::{Identity, Tanh};
        [
            vec![Tanh, Tanh, Identity],
            vec![Tanh, Identity],
            vec![Identity],
            vec![Identity],
            vec![Identity],
        ]
    }
}

/// Flattens an observation into the encoder input vector.
pub fn obs_to_input(obs: &Observation) -> Result<Vec<f64>> {
    if obs.image.len() != IMG_PIXELS {
        return Err(Error::shape("obs_to_input image", &[IMG_PIXELS], &[obs.image.len()]));
    }
    if obs.instruction_id >= N_INSTRUCTIONS {
        return Err(Error::InvalidArg(format!(
            "instruction_id {} out of range",
            obs.instruction_id
        )));
    }
    let mut input = Vec::with_capacity(ENC_INPUT_DIM);
    input.extend(obs.image.iter().map(|&v| v as f64));
    input.extend_from_slice(&obs.robot_state);
    input.push(obs.contact);
    for i in 0..N_INSTRUCTIONS {
        input.push(if i == obs.instruction_id { 1.0 } else { 0.0 });
    }
    Ok(input)
}

fn cap_norm(mut z: Vec<f64>) -> Vec<f64> {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > LATENT_NORM_CAP {
        let scale = LATENT_NORM_CAP / norm;
        for v in &mut z {
            *v *= scale;
        }
    }
    z
}

/// Deterministic latent for an observation.
pub fn encode(params: &ReprParams, obs: &Observation) -> Result<Latent> {
    let input = obs_to_input(obs)?;
    Ok(Latent(cap_norm(params.enc.forward(&input)?)))
}

/// Encoder applied to a pre-flattened input vector.
pub fn encode_input(params: &ReprParams, input: &[f64]) -> Result<Latent> {
    Ok(Latent(cap_norm(params.enc.forward(input)?)))
}

/// Reconstruction clamped into pixel range.
pub fn decode(params: &ReprParams, z: &Latent) -> Result<Vec<f64>> {
    Ok(decode_raw(params, z)?
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect())
}

/// Unclamped decoder output; the reconstruction loss trains on this so the
/// clamp never kills gradients.
pub fn decode_raw(params: &ReprParams, z: &Latent) -> Result<Vec<f64>> {
    if z.dim() != params.d_z {
        return Err(Error::shape("decode latent", &[params.d_z], &[z.dim()]));
    }
    if !z.0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("decode latent".into()));
    }
    params.dec.forward(&z.0)
}

fn one_hot(id: u32) -> Vec<f64> {
    (0..N_INSTRUCTIONS).map(|i| if i == id { 1.0 } else { 0.0 }).collect()
}

/// Task context: embedding-table row ⧺ projected latent, through one layer.
pub fn task_context(params: &ReprParams, z: &Latent, instruction_id: u32) -> Result<TaskContext> {
    Ok(task_context_cached(params, z, instruction_id)?.0)
}

/// Intermediate activations for backpropagating through the task context.
pub struct TaskCtxTrace {
    onehot: Vec<f64>,
    emb_trace: MlpTrace,
    proj_trace: MlpTrace,
    head_input: Vec<f64>,
    head_trace: MlpTrace,
    z: Vec<f64>,
}

pub fn task_context_cached(
    params: &ReprParams,
    z: &Latent,
    instruction_id: u32,
) -> Result<(TaskContext, TaskCtxTrace)> {
    if instruction_id >= N_INSTRUCTIONS {
        return Err(Error::InvalidArg(format!(
            "instruction_id {instruction_id} out of range [0, {}]",
            N_INSTRUCTIONS - 1
        )));
    }
    if z.dim() != params.d_z {
        return Err(Error::shape("task_context latent", &[params.d_z], &[z.dim()]));
    }
    let onehot = one_hot(instruction_id);
    let emb_trace = params.task_emb.forward_cached(&onehot)?;
    let proj_trace = params.task_proj.forward_cached(&z.0)?;
    let mut head_input = Vec::with_capacity(EMB_DIM + PROJ_DIM);
    head_input.extend_from_slice(emb_trace.output());
    head_input.extend_from_slice(proj_trace.output());
    let head_trace = params.task_head.forward_cached(&head_input)?;
    let ctx = TaskContext(head_trace.output().to_vec());
    Ok((
        ctx,
        TaskCtxTrace {
            onehot,
            emb_trace,
            proj_trace,
            head_input,
            head_trace,
            z: z.0.clone(),
        },
    ))
}

pub struct TaskCtxGrads {
    pub emb: MlpGrad,
    pub proj: MlpGrad,
    pub head: MlpGrad,
}

impl TaskCtxGrads {
    pub fn zeros_like(params: &ReprParams) -> Self {
        TaskCtxGrads {
            emb: MlpGrad::zeros_like(&params.task_emb),
            proj: MlpGrad::zeros_like(&params.task_proj),
            head: MlpGrad::zeros_like(&params.task_head),
        }
    }
}

/// Backpropagates a context gradient; accumulates parameter gradients and
/// returns the latent gradient.
pub fn task_context_backward(
    params: &ReprParams,
    trace: &TaskCtxTrace,
    d_ctx: &[f64],
    grads: &mut TaskCtxGrads,
) -> Vec<f64> {
    let d_head_input = params
        .task_head
        .backward(&trace.head_input, &trace.head_trace, d_ctx, &mut grads.head);
    let (d_emb_out, d_proj_out) = d_head_input.split_at(EMB_DIM);
    params
        .task_emb
        .backward(&trace.onehot, &trace.emb_trace, d_emb_out, &mut grads.emb);
    params
        .task_proj
        .backward(&trace.z, &trace.proj_trace, d_proj_out, &mut grads.proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{render, reset};

    fn small_params() -> ReprParams {
        ReprParams::new(32, 16, 123).unwrap()
    }

    #[test]
    fn encode_is_deterministic() {
        let p = small_params();
        let obs = render(&reset(5, 0, 4).unwrap());
        let a = encode(&p, &obs).unwrap();
        let b = encode(&p, &obs).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 32);
    }

    #[test]
    fn encode_separates_different_scenes() {
        let p = small_params();
        let a = encode(&p, &render(&reset(5, 0, 4).unwrap())).unwrap();
        let b = encode(&p, &render(&reset(6, 0, 4).unwrap())).unwrap();
        let d: f64 = a.0.iter().zip(&b.0).map(|(x, y)| (x - y).powi(2)).sum();
        assert!(d > 0.0);
    }

    #[test]
    fn latent_norm_is_capped() {
        let mut p = small_params();
        // Blow up the final encoder layer to force the cap.
        for w in p.enc.weights_mut()[2].data_mut() {
            *w *= 1e6;
        }
        let obs = render(&reset(5, 0, 4).unwrap());
        let z = encode(&p, &obs).unwrap();
        assert!(z.norm() <= LATENT_NORM_CAP + 1e-9, "norm {}", z.norm());
    }

    #[test]
    fn decode_output_is_clamped_and_sized() {
        let p = small_params();
        let z = Latent(vec![3.0; 32]);
        let img = decode(&p, &z).unwrap();
        assert_eq!(img.len(), IMG_PIXELS);
        assert!(img.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_latent_decodes_to_fixed_bias_image() {
        let p = small_params();
        let z = Latent(vec![0.0; 32]);
        assert_eq!(decode(&p, &z).unwrap(), decode(&p, &z).unwrap());
    }

    #[test]
    fn task_context_deterministic_and_id_sensitive() {
        let p = small_params();
        let z = Latent(vec![0.1; 32]);
        let a = task_context(&p, &z, 0).unwrap();
        let b = task_context(&p, &z, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 16);
        let c = task_context(&p, &z, 1).unwrap();
        assert_ne!(a, c, "distinct instruction rows from init");
        assert!(task_context(&p, &z, 7).is_err());
    }

    #[test]
    fn obs_validation_rejects_bad_image() {
        let p = small_params();
        let mut obs = render(&reset(5, 0, 4).unwrap());
        obs.image.truncate(10);
        assert!(encode(&p, &obs).is_err());
    }

    /// Finite-difference check of the composed task-context backward pass:
    /// loss = sum(ctx), gradient w.r.t. the latent input.
    #[test]
    fn task_context_backward_matches_finite_differences() {
        let p = small_params();
        let z0: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin() * 0.5).collect();
        let loss = |z: &[f64]| -> f64 {
            let ctx = task_context(&p, &Latent(z.to_vec()), 2).unwrap();
            ctx.0.iter().sum()
        };
        let (_, trace) = task_context_cached(&p, &Latent(z0.clone()), 2).unwrap();
        let mut grads = TaskCtxGrads::zeros_like(&p);
        let d_z = task_context_backward(&p, &trace, &vec![1.0; 16], &mut grads);
        let h = 1e-6;
        for i in (0..32).step_by(5) {
            let mut up = z0.clone();
            up[i] += h;
            let mut down = z0.clone();
            down[i] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            assert!(
                (fd - d_z[i]).abs() < 1e-6 * fd.abs().max(1.0),
                "dim {i}: fd {fd} vs analytic {}",
                d_z[i]
            );
        }
        // Embedding-table gradient lands only on the active instruction row.
        let row_grads = &grads.emb.d_weights[0];
        for id in 0..N_INSTRUCTIONS as usize {
            let col_sum: f64 = (0..EMB_DIM)
                .map(|j| row_grads.data()[j * N_INSTRUCTIONS as usize + id].abs())
                .sum();
            if id == 2 {
                assert!(col_sum > 0.0);
            } else {
                assert_eq!(col_sum, 0.0);
            }
        }
    }
}
