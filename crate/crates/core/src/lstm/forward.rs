use super::{sigmoid, CellState, LayerParams, Projection, Sequence, StackParams};
use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let (x, y) = (&a[4 * k..4 * k + 4], &b[4 * k..4 * k + 4]);
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Writes the activated gates `[f, i, o, g]` for `concat = [h_{t-1}, x_t]`.
#[inline]
pub(crate) fn gates_into(params: &LayerParams, concat: &[f64], gates: &mut [f64]) {
    let n = params.concat_len();
    let h = params.hidden;
    for (r, g) in gates.iter_mut().enumerate() {
        *g = params.bias[r] + dot(&params.weights[r * n..(r + 1) * n], concat);
    }
    for g in &mut gates[..3 * h] {
        *g = sigmoid(*g);
    }
    for g in &mut gates[3 * h..] {
        *g = g.tanh();
    }
}

/// Applies the cell update given activated gates; writes `C_t` and `h_t`.
#[inline]
pub(crate) fn update_cell(gates: &[f64], c_prev: &[f64], c: &mut [f64], h: &mut [f64]) {
    let hid = c.len();
    for j in 0..hid {
        let (f, i, o, g) = (gates[j], gates[hid + j], gates[2 * hid + j], gates[3 * hid + j]);
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
    }
}

pub(crate) fn project_into(proj: &Projection, h: &[f64], out: &mut [f64]) {
    for (o, y) in out.iter_mut().enumerate() {
        *y = proj.bias[o] + dot(&proj.weights[o * proj.input..(o + 1) * proj.input], h);
    }
}

/// One memory-block step.
pub fn cell_forward(params: &LayerParams, x: &[f64], prev: &CellState) -> Result<CellState> {
    if x.len() != params.input || prev.h.len() != params.hidden || prev.c.len() != params.hidden {
        return Err(Error::Shape(format!(
            "cell expects input {} and hidden {}, got {} / {}",
            params.input,
            params.hidden,
            x.len(),
            prev.h.len()
        )));
    }
    let mut concat = Vec::with_capacity(params.concat_len());
    concat.extend_from_slice(&prev.h);
    concat.extend_from_slice(x);
    let mut gates = vec![0.0; 4 * params.hidden];
    gates_into(params, &concat, &mut gates);
    let mut next = CellState::zeros(params.hidden);
    update_cell(&gates, &prev.c, &mut next.c, &mut next.h);
    Ok(next)
}

/// Recurrent state of every layer in a stack.
#[derive(Clone, Debug, PartialEq)]
pub struct StackState {
    pub layers: Vec<CellState>,
}

impl StackState {
    pub fn zeros(params: &StackParams) -> Self {
        Self {
            layers: params.layers.iter().map(|l| CellState::zeros(l.hidden)).collect(),
        }
    }

    /// Feeds one input row through every layer and the projection.
    pub fn step(&mut self, params: &StackParams, x: &[f64]) -> Vec<f64> {
        let mut input: Vec<f64> = x.to_vec();
        let mut gates = Vec::new();
        let mut concat = Vec::new();
        for (layer, state) in params.layers.iter().zip(self.layers.iter_mut()) {
            concat.clear();
            concat.extend_from_slice(&state.h);
            concat.extend_from_slice(&input);
            gates.resize(4 * layer.hidden, 0.0);
            gates_into(layer, &concat, &mut gates);
            let c_prev = std::mem::take(&mut state.c);
            state.c = vec![0.0; layer.hidden];
            update_cell(&gates, &c_prev, &mut state.c, &mut state.h);
            input.clear();
            input.extend_from_slice(&state.h);
        }
        let mut y = vec![0.0; params.projection.output];
        project_into(&params.projection, &input, &mut y);
        y
    }
}

/// Runs a sequence from the zero state; layer `l` consumes layer `l-1`'s
/// hidden outputs, and the projection is applied at every step.
pub fn stack_forward(params: &StackParams, input: &Sequence) -> Result<(Sequence, StackState)> {
    if input.is_empty() {
        return Err(Error::EmptySequence);
    }
    if input.dim() != params.layers[0].input {
        return Err(Error::Shape(format!(
            "input width {} but first layer expects {}",
            input.dim(),
            params.layers[0].input
        )));
    }
    let mut state = StackState::zeros(params);
    let mut out = Vec::with_capacity(input.len() * params.projection.output);
    for t in 0..input.len() {
        out.extend(state.step(params, input.step(t)));
    }
    Ok((Sequence::new(params.projection.output, out)?, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{Gate, StackSpec};
    use crate::seed;

    #[test]
    fn zero_params_zero_state() {
        let p = LayerParams::zeros(2, 4);
        let s = cell_forward(&p, &[0.7, -3.0], &CellState::zeros(4)).unwrap();
        assert!(s.h.iter().chain(&s.c).all(|&v| v == 0.0));
    }

    #[test]
    fn zero_params_unit_cell() {
        let p = LayerParams::zeros(2, 3);
        let prev = CellState { h: vec![0.0; 3], c: vec![1.0; 3] };
        let s = cell_forward(&p, &[1.0, 2.0], &prev).unwrap();
        for j in 0..3 {
            assert_eq!(s.c[j], 0.5);
            assert!((s.h[j] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
            assert!((s.h[j] - 0.23106).abs() < 1e-5);
        }
    }

    #[test]
    fn saturated_forget_gate_passes_cell_through() {
        let mut p = LayerParams::zeros(2, 3);
        p.gate_bias_mut(Gate::Forget).fill(20.0);
        let prev = CellState { h: vec![0.1, -0.2, 0.3], c: vec![2.0, -1.5, 0.25] };
        let s = cell_forward(&p, &[0.4, 0.9], &prev).unwrap();
        for j in 0..3 {
            assert!(((s.c[j] - prev.c[j]) / prev.c[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn shape_errors() {
        let p = LayerParams::zeros(2, 3);
        assert!(cell_forward(&p, &[1.0], &CellState::zeros(3)).is_err());
        let params = StackParams::zeros(&StackSpec::default());
        let empty = Sequence::new(2, vec![]).unwrap();
        assert!(matches!(stack_forward(&params, &empty), Err(Error::EmptySequence)));
    }

    #[test]
    fn single_step_is_composed_cells() {
        let spec = StackSpec { hidden_sizes: vec![5, 4, 3], ..StackSpec::default() };
        let params = StackParams::init(&spec, &mut seed::stream(3, "init", &[]));
        let x = [0.3, 0.8];
        let (out, _) = stack_forward(&params, &Sequence::from_rows(&[x]).unwrap()).unwrap();
        let mut input = x.to_vec();
        for layer in &params.layers {
            input = cell_forward(layer, &input, &CellState::zeros(layer.hidden)).unwrap().h;
        }
        let mut y = vec![0.0; 2];
        project_into(&params.projection, &input, &mut y);
        assert_eq!(out.step(0), &y[..]);
    }

    #[test]
    fn zero_stack_outputs_zero() {
        let params = StackParams::zeros(&StackSpec::default());
        let seq = Sequence::from_rows(&[[0.1, 0.2], [0.5, 0.9], [1.0, 0.0]]).unwrap();
        let (out, _) = stack_forward(&params, &seq).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }
}
