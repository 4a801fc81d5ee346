//! Stacked LSTM next-step regressor.
//!
//! Each layer holds the four gate weight matrices `W_f, W_i, W_o, W_c`
//! acting on the concatenation `[h_{t-1}, x_t]` (hidden part first), and a
//! final affine projection maps the top layer's `h_t` to the output.
//!
//! ```text
//! f_t = sigmoid(W_f [h_{t-1}, x_t] + b_f)
//! i_t = sigmoid(W_i [h_{t-1}, x_t] + b_i)
//! o_t = sigmoid(W_o [h_{t-1}, x_t] + b_o)
//! g_t = tanh(W_c [h_{t-1}, x_t] + b_c)
//! C_t = f_t * C_{t-1} + i_t * g_t
//! h_t = o_t * tanh(C_t)
//! ```

mod bptt;
mod checkpoint;
mod forward;
mod optim;

pub use bptt::{bptt_grads, bptt_window_grads, mse_loss, WindowGrads};
pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{cell_forward, stack_forward, StackState};
pub use optim::{clip_global_norm, optimizer_step, Adam, ParamBlocks};

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::Stream;

/// Row-major `T x dim` sequence of feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    dim: usize,
    data: Vec<f64>,
}

impl Sequence {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptySequence)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.as_ref().len() != dim {
                return Err(Error::Shape("ragged rows".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Sequence {
        Sequence {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackSpec {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub output_dim: usize,
}

impl Default for StackSpec {
    fn default() -> Self {
        Self {
            input_dim: 2,
            hidden_sizes: vec![64, 64, 64],
            output_dim: 2,
        }
    }
}

impl StackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() {
            return Err(Error::Shape("at least one LSTM layer required".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_sizes.contains(&0) {
            return Err(Error::Shape("dimensions must be non-zero".into()));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.hidden_sizes.len()
    }

    /// Input width of layer `l`.
    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_sizes[l - 1]
        }
    }

    pub fn top_hidden(&self) -> usize {
        *self.hidden_sizes.last().unwrap()
    }
}

/// Gate parameters of one layer.
///
/// `weights` stacks `W_f, W_i, W_o, W_c` (in that order), each
/// `hidden x (hidden + input)` row-major; `bias` stacks `b_f, b_i, b_o, b_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub input: usize,
    pub hidden: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gate blocks in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Output = 2,
    Candidate = 3,
}

impl LayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            weights: vec![0.0; 4 * hidden * (hidden + input)],
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn concat_len(&self) -> usize {
        self.hidden + self.input
    }

    pub fn gate_weights(&self, gate: Gate) -> &[f64] {
        let n = self.hidden * self.concat_len();
        let g = gate as usize;
        &self.weights[g * n..(g + 1) * n]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        let g = gate as usize;
        &self.bias[g * self.hidden..(g + 1) * self.hidden]
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let g = gate as usize;
        let h = self.hidden;
        &mut self.bias[g * h..(g + 1) * h]
    }

    fn check(&self) -> Result<()> {
        if self.weights.len() != 4 * self.hidden * self.concat_len() || self.bias.len() != 4 * self.hidden {
            return Err(Error::Shape(format!(
                "layer {}->{} has {} weights and {} biases",
                self.input,
                self.hidden,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

/// Affine output map `y = W h + b`, `W` is `output x hidden` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub input: usize,
    pub output: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Projection {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            input,
            output,
            weights: vec![0.0; input * output],
            bias: vec![0.0; output],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackParams {
    pub layers: Vec<LayerParams>,
    pub projection: Projection,
}

impl StackParams {
    pub fn zeros(spec: &StackSpec) -> Self {
        Self {
            layers: (0..spec.n_layers())
                .map(|l| LayerParams::zeros(spec.layer_input(l), spec.hidden_sizes[l]))
                .collect(),
            projection: Projection::zeros(spec.top_hidden(), spec.output_dim),
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, forget-gate bias +1.
    pub fn init(spec: &StackSpec, rng: &mut Stream) -> Self {
        let mut p = Self::zeros(spec);
        for layer in &mut p.layers {
            let bound = 1.0 / (layer.concat_len() as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..=bound);
            }
            layer.gate_bias_mut(Gate::Forget).fill(1.0);
        }
        let bound = 1.0 / (p.projection.input as f64).sqrt();
        for w in p.projection.weights.iter_mut().chain(p.projection.bias.iter_mut()) {
            *w = rng.random_range(-bound..=bound);
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.blocks_mut().into_iter().for_each(|b| b.fill(0.0));
        z
    }

    /// Derives the spec from the parameter shapes.
    pub fn spec(&self) -> StackSpec {
        StackSpec {
            input_dim: self.layers[0].input,
            hidden_sizes: self.layers.iter().map(|l| l.hidden).collect(),
            output_dim: self.projection.output,
        }
    }

    /// Checks that every block has the shape `spec` calls for.
    pub fn check(&self, spec: &StackSpec) -> Result<()> {
        spec.validate()?;
        if self.layers.len() != spec.n_layers() {
            return Err(Error::Shape(format!(
                "{} layers, expected {}",
                self.layers.len(),
                spec.n_layers()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.check()?;
            if layer.input != spec.layer_input(l) || layer.hidden != spec.hidden_sizes[l] {
                return Err(Error::Shape(format!(
                    "layer {l} is {}->{}, expected {}->{}",
                    layer.input,
                    layer.hidden,
                    spec.layer_input(l),
                    spec.hidden_sizes[l]
                )));
            }
        }
        let proj = &self.projection;
        if proj.input != spec.top_hidden()
            || proj.output != spec.output_dim
            || proj.weights.len() != proj.input * proj.output
            || proj.bias.len() != proj.output
        {
            return Err(Error::Shape("projection does not match top layer".into()));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

impl ParamBlocks for StackParams {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.projection.weights);
        out.push(&self.projection.bias);
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.projection.weights);
        out.push(&mut self.projection.bias);
        out
    }

    fn block_name(&self, index: usize) -> String {
        let n = self.layers.len();
        match index {
            i if i < 2 * n && i % 2 == 0 => format!("layer{}.weights", i / 2),
            i if i < 2 * n => format!("layer{}.bias", i / 2),
            i if i == 2 * n => "projection.weights".into(),
            _ => "projection.bias".into(),
        }
    }
}

/// Recurrent state of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub bptt_window: usize,
    pub grad_clip: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 2e-3,
            epochs: 15,
            bptt_window: 60,
            grad_clip: 5.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.bptt_window == 0 {
            return Err(Error::Config("bptt_window must be at least 1".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config("grad_clip must be positive".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn shapes_and_init() {
        let spec = StackSpec::default();
        let p = StackParams::init(&spec, &mut seed::stream(1, "init", &[]));
        p.check(&spec).unwrap();
        assert_eq!(p.spec(), spec);
        let l0 = &p.layers[0];
        assert_eq!(l0.gate_weights(Gate::Candidate).len(), 64 * 66);
        assert!(l0.gate_bias(Gate::Forget).iter().all(|&b| b == 1.0));
        let bound = 1.0 / (66f64).sqrt();
        assert!(l0.gate_weights(Gate::Input).iter().all(|w| w.abs() <= bound));
        assert_eq!(p.block_name(0), "layer0.weights");
        assert_eq!(p.block_name(5), "layer2.bias");
        assert_eq!(p.block_name(6), "projection.weights");
        assert_eq!(p.block_name(7), "projection.bias");
    }

    #[test]
    fn check_rejects_wrong_hidden() {
        let p = StackParams::zeros(&StackSpec { hidden_sizes: vec![8], ..StackSpec::default() });
        assert!(p.check(&StackSpec { hidden_sizes: vec![16], ..StackSpec::default() }).is_err());
    }

    #[test]
    fn sequence_validation() {
        assert!(Sequence::new(2, vec![1.0, 2.0, 3.0]).is_err());
        let s = Sequence::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.step(1), &[3.0, 4.0]);
        assert!(Sequence::from_rows::<[f64; 2]>(&[]).is_err());
    }
}
