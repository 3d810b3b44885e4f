//! Verifies the hand-written LSTM backward pass against central finite
//! differences, both for its parameters and for its input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ti_avc::nn::{grad_check, input_grad_check, GradCheckOptions, Lstm, Tensor};

fn main() -> ti_avc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lstm = Lstm::<f64>::new("lstm", 4, 5, &mut rng);
    let x = Tensor::from_fn(&[2, 6, 4], |_| rng.random_range(-1.0..1.0));
    // Loss = Σ y ⊙ r, so dL/dy = r.
    let r = Tensor::from_fn(&[2, 6, 5], |_| rng.random_range(-1.0..1.0));
    let project =
        |y: &Tensor<f64>| -> f64 { y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum() };

    let params = grad_check(
        &mut lstm,
        |m| {
            let (y, cache) = m.forward(&x)?;
            m.backward(&cache, &r);
            Ok(project(&y))
        },
        GradCheckOptions::default(),
    )?;
    println!(
        "parameters: {} entries, max relative error {:.2e} (at {}[{}])",
        params.entries_checked, params.max_relative_error, params.worst, params.worst_index
    );

    let (_, cache) = lstm.forward(&x)?;
    let dx = lstm.backward(&cache, &r);
    let input = input_grad_check(
        &x,
        &dx,
        |x| Ok(project(&lstm.forward(x)?.0)),
        GradCheckOptions::default(),
    )?;
    println!(
        "input:      {} entries, max relative error {:.2e}",
        input.entries_checked, input.max_relative_error
    );
    Ok(())
}
