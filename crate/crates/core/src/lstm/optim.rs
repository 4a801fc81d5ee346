//! Adam with global-norm gradient clipping.

use super::TrainHyper;
use crate::error::{Error, Result};

/// Parameters exposed as a fixed list of flat, named blocks.
pub trait ParamBlocks {
    fn blocks(&self) -> Vec<&[f64]>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;
    fn block_name(&self, index: usize) -> String;
}

impl ParamBlocks for Vec<f64> {
    fn blocks(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }

    fn block_name(&self, _index: usize) -> String {
        "param".into()
    }
}

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm after clipping.
pub fn clip_global_norm<P: ParamBlocks>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads
        .blocks()
        .iter()
        .flat_map(|b| b.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for b in grads.blocks_mut() {
            b.iter_mut().for_each(|g| *g *= scale);
        }
        max_norm
    } else {
        norm
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl Adam {
    pub fn new<P: ParamBlocks>(params: &P) -> Self {
        let m: Vec<Vec<f64>> = params.blocks().iter().map(|b| vec![0.0; b.len()]).collect();
        Self { v: m.clone(), m, t: 0 }
    }
}

/// One clipped Adam update. Rejects the step, leaving everything untouched,
/// if any gradient entry is non-finite.
pub fn optimizer_step<P: ParamBlocks>(
    params: &mut P,
    grads: &mut P,
    hyper: &TrainHyper,
    moments: &mut Adam,
) -> Result<()> {
    for (i, b) in grads.blocks().iter().enumerate() {
        if b.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                block: grads.block_name(i),
            });
        }
    }
    clip_global_norm(grads, hyper.grad_clip);
    moments.t += 1;
    let t = moments.t as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    let step = hyper.learning_rate * c2.sqrt() / c1;
    let eps_hat = hyper.epsilon * c2.sqrt();
    for (((p, g), m), v) in params
        .blocks_mut()
        .into_iter()
        .zip(grads.blocks())
        .zip(moments.m.iter_mut())
        .zip(moments.v.iter_mut())
    {
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * gk;
            v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * gk * gk;
            p[k] -= step * m[k] / (v[k].sqrt() + eps_hat);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper(lr: f64) -> TrainHyper {
        TrainHyper {
            learning_rate: lr,
            grad_clip: 1e9,
            ..TrainHyper::default()
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![0.3, -1.2, 4.0];
        let before = p.clone();
        let mut adam = Adam::new(&p);
        for _ in 0..5 {
            let mut g = vec![0.0; 3];
            optimizer_step(&mut p, &mut g, &hyper(0.1), &mut adam).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![2.0];
        let mut adam = Adam::new(&p);
        let mut g = vec![1.0];
        optimizer_step(&mut p, &mut g, &hyper(0.1), &mut adam).unwrap();
        assert!((p[0] - 1.9).abs() < 1e-6, "{}", p[0]);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = vec![6.0, 8.0];
        let applied = clip_global_norm(&mut g, 1.0);
        assert_eq!(applied, 1.0);
        assert!(((g[0] * g[0] + g[1] * g[1]).sqrt() - 1.0).abs() < 1e-15);
        assert!((g[0] - 0.6).abs() < 1e-15);
        let mut small = vec![0.3, 0.4];
        assert!((clip_global_norm(&mut small, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(small, vec![0.3, 0.4]);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut p = vec![1.0, 2.0];
        let mut adam = Adam::new(&p);
        let mut g = vec![0.0, f64::NAN];
        let err = optimizer_step(&mut p, &mut g, &hyper(0.1), &mut adam).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref block } if block == "param"));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(adam.t, 0);
    }
}
