//! Reverse-mode gradients of the MSE loss through time.

use super::forward::{gates_into, project_into, update_cell, StackState};
use super::{ParamBlocks, Sequence, StackParams};
use crate::error::{Error, Result};

/// Mean of squared componentwise differences.
pub fn mse_loss(pred: &Sequence, target: &Sequence) -> Result<f64> {
    if pred.dim() != target.dim() || pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            pred.len(),
            pred.dim(),
            target.len(),
            target.dim()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptySequence);
    }
    let n = pred.as_slice().len() as f64;
    Ok(pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

struct StepCache {
    concat: Vec<f64>,
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Loss, gradients and carried-out state of one truncated window.
#[derive(Clone, Debug)]
pub struct WindowGrads {
    pub loss: f64,
    pub grads: StackParams,
    pub final_state: StackState,
}

fn check_pair(params: &StackParams, inputs: &Sequence, targets: &Sequence) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptySequence);
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if inputs.dim() != params.layers[0].input || targets.dim() != params.projection.output {
        return Err(Error::Shape("sequence widths do not match the stack".into()));
    }
    Ok(())
}

/// Exact gradients of the window's mean squared error, starting from
/// `init` and treating it as a constant.
pub fn bptt_window_grads(
    params: &StackParams,
    inputs: &Sequence,
    targets: &Sequence,
    init: &StackState,
) -> Result<WindowGrads> {
    check_pair(params, inputs, targets)?;
    let steps = inputs.len();
    let n_layers = params.layers.len();
    let out_dim = params.projection.output;

    // Forward, keeping what the backward sweep needs.
    let mut caches: Vec<Vec<StepCache>> = (0..n_layers).map(|_| Vec::with_capacity(steps)).collect();
    let mut outputs = vec![0.0; steps * out_dim];
    let mut state = init.clone();
    for t in 0..steps {
        let mut below: &[f64] = inputs.step(t);
        for (l, layer) in params.layers.iter().enumerate() {
            let hid = layer.hidden;
            let st = &mut state.layers[l];
            let mut concat = Vec::with_capacity(layer.concat_len());
            concat.extend_from_slice(&st.h);
            concat.extend_from_slice(below);
            let mut gates = vec![0.0; 4 * hid];
            gates_into(layer, &concat, &mut gates);
            let c_prev = std::mem::replace(&mut st.c, vec![0.0; hid]);
            update_cell(&gates, &c_prev, &mut st.c, &mut st.h);
            caches[l].push(StepCache {
                concat,
                gates,
                c_prev,
                tanh_c: st.c.iter().map(|c| c.tanh()).collect(),
                h: st.h.clone(),
            });
            below = &caches[l][t].h;
        }
        project_into(&params.projection, below, &mut outputs[t * out_dim..(t + 1) * out_dim]);
    }

    let n = (steps * out_dim) as f64;
    let loss = outputs
        .iter()
        .zip(targets.as_slice())
        .map(|(y, z)| (y - z) * (y - z))
        .sum::<f64>()
        / n;

    // Backward.
    let mut grads = params.zeros_like();
    let mut dh_rec: Vec<Vec<f64>> = params.layers.iter().map(|l| vec![0.0; l.hidden]).collect();
    let mut dc_rec = dh_rec.clone();
    let proj = &params.projection;
    let mut dy = vec![0.0; out_dim];
    for t in (0..steps).rev() {
        for o in 0..out_dim {
            dy[o] = 2.0 * (outputs[t * out_dim + o] - targets.step(t)[o]) / n;
        }
        let h_top = &caches[n_layers - 1][t].h;
        let mut dh_above = vec![0.0; proj.input];
        for o in 0..out_dim {
            grads.projection.bias[o] += dy[o];
            let row = &mut grads.projection.weights[o * proj.input..(o + 1) * proj.input];
            for (g, h) in row.iter_mut().zip(h_top) {
                *g += dy[o] * h;
            }
            for (d, w) in dh_above.iter_mut().zip(&proj.weights[o * proj.input..(o + 1) * proj.input]) {
                *d += dy[o] * w;
            }
        }

        for l in (0..n_layers).rev() {
            let layer = &params.layers[l];
            let hid = layer.hidden;
            let cols = layer.concat_len();
            let cache = &caches[l][t];
            let mut dz = vec![0.0; 4 * hid];
            for j in 0..hid {
                let (f, i, o, g) = (
                    cache.gates[j],
                    cache.gates[hid + j],
                    cache.gates[2 * hid + j],
                    cache.gates[3 * hid + j],
                );
                let tc = cache.tanh_c[j];
                let dh = dh_above[j] + dh_rec[l][j];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_rec[l][j];
                dz[j] = dc * cache.c_prev[j] * f * (1.0 - f);
                dz[hid + j] = dc * g * i * (1.0 - i);
                dz[2 * hid + j] = d_o * o * (1.0 - o);
                dz[3 * hid + j] = dc * i * (1.0 - g * g);
                dc_rec[l][j] = dc * f;
            }
            let gl = &mut grads.layers[l];
            let mut dconcat = vec![0.0; cols];
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gl.bias[r] += d;
                let grow = &mut gl.weights[r * cols..(r + 1) * cols];
                for (g, c) in grow.iter_mut().zip(&cache.concat) {
                    *g += d * c;
                }
                let wrow = &layer.weights[r * cols..(r + 1) * cols];
                for (dc, w) in dconcat.iter_mut().zip(wrow) {
                    *dc += d * w;
                }
            }
            dh_rec[l].copy_from_slice(&dconcat[..hid]);
            dh_above = dconcat[hid..].to_vec();
        }
    }

    Ok(WindowGrads {
        loss,
        grads,
        final_state: state,
    })
}

/// Truncated BPTT over `inputs` from the zero state: consecutive windows of
/// at most `window` steps, state carried forward but not differentiated
/// across window boundaries. Returns the overall MSE and its (truncated)
/// gradient; with `window >= T` the gradient is exact.
pub fn bptt_grads(
    params: &StackParams,
    inputs: &Sequence,
    targets: &Sequence,
    window: usize,
) -> Result<(f64, StackParams)> {
    check_pair(params, inputs, targets)?;
    let window = window.max(1);
    let total = inputs.len();
    let mut state = StackState::zeros(params);
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut start = 0;
    while start < total {
        let end = (start + window).min(total);
        let w = bptt_window_grads(params, &inputs.slice(start, end), &targets.slice(start, end), &state)?;
        let weight = (end - start) as f64 / total as f64;
        loss += weight * w.loss;
        for (acc, g) in grads.blocks_mut().into_iter().zip(w.grads.blocks()) {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += weight * b;
            }
        }
        state = w.final_state;
        start = end;
    }
    Ok((loss, grads))
}
