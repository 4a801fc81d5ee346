//! Compares the analytic BPTT gradients of a small LSTM stack against central
//! finite differences.
//!
//! `cargo run --example lstm_gradient_check`

use idcsim::lstm::{bptt_grads, mse_loss, stack_forward, ParamBlocks, Sequence, StackParams, StackSpec};
use idcsim::seed;
use rand::Rng;

fn main() -> idcsim::Result<()> {
    let spec = StackSpec {
        hidden_sizes: vec![8, 8],
        ..StackSpec::default()
    };
    let mut rng = seed::stream(7, "example-gradcheck", &[]);
    let params = StackParams::init(&spec, &mut rng);
    let mut seq = |t: usize| Sequence::new(2, (0..2 * t).map(|_| rng.random_range(-1.0..1.0)).collect());
    let x = seq(12)?;
    let y = seq(12)?;
    let (loss, grads) = bptt_grads(&params, &x, &y, 12)?;
    println!("{} parameters, loss {loss:.6}", params.n_params());

    let eps = 1e-6;
    let eval = |p: &StackParams| -> idcsim::Result<f64> { mse_loss(&stack_forward(p, &x)?.0, &y) };
    let mut worst: f64 = 0.0;
    for (b, block) in params.blocks().iter().enumerate() {
        let mut block_worst: f64 = 0.0;
        for k in 0..block.len() {
            let mut plus = params.clone();
            plus.blocks_mut()[b][k] += eps;
            let mut minus = params.clone();
            minus.blocks_mut()[b][k] -= eps;
            let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * eps);
            let an = grads.blocks()[b][k];
            block_worst = block_worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-4));
        }
        println!("block {b:>2} ({:>4} values): max relative error {block_worst:.2e}", block.len());
        worst = worst.max(block_worst);
    }
    println!("overall max relative error {worst:.2e}");
    Ok(())
}
