//! Finite-difference checks shared by the gradient tests and the acceptance
//! run. Every check yields a labelled report; callers decide how to judge it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ti_avc::models::{one_hot, BaselineModel, ClModel, JointModel, TiAvc, TlModel};
use ti_avc::nn::{
    binary_cross_entropy_with_logits, grad_check, input_grad_check, softmax_cross_entropy,
    Activation, AttentionPool, Conv1d, Dense, GradCheckOptions, GradCheckReport, Lstm, MaxPoolTime,
    Params, Tensor, TimeDistributed,
};
use ti_avc::optim::Trainable;
use ti_avc::Result;

use super::{examples, random_tensor, tiny_config};

pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const TOLERANCE: f64 = 1e-4;

pub struct Check {
    pub what: String,
    pub seed: u64,
    pub report: GradCheckReport,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.report.max_relative_error < TOLERANCE
    }

    pub fn describe(&self) -> String {
        format!(
            "{} (seed {}): relative error {:.3e} at {}[{}]",
            self.what,
            self.seed,
            self.report.max_relative_error,
            self.report.worst,
            self.report.worst_index
        )
    }
}

/// Loss `Σ y ⊙ r` for a fixed random `r`, so that `dL/dy = r`.
fn projection(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Checks parameter and input gradients of a layer with the interface
/// `forward(x) -> (y, cache)`, `backward(cache, dy) -> dx`.
macro_rules! check_layer {
    ($out:expr, $name:expr, $seed:expr, $layer:expr, $x:expr) => {{
        let mut layer = $layer;
        let x: Tensor<f64> = $x;
        let mut rng = ChaCha8Rng::seed_from_u64($seed + 100);
        let (y, _) = layer.forward(&x).unwrap();
        let r = random_tensor(&mut rng, y.shape());
        let report = grad_check(
            &mut layer,
            |m| {
                let (y, cache) = m.forward(&x)?;
                m.backward(&cache, &r);
                Ok(projection(&y, &r))
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        $out.push(Check {
            what: format!("{} params", $name),
            seed: $seed,
            report,
        });
        let (_, cache) = layer.forward(&x).unwrap();
        let dx = layer.backward(&cache, &r);
        let report = input_grad_check(
            &x,
            &dx,
            |x| Ok(projection(&layer.forward(x)?.0, &r)),
            GradCheckOptions::default(),
        )
        .unwrap();
        $out.push(Check {
            what: format!("{} input", $name),
            seed: $seed,
            report,
        });
    }};
}

/// Dense, time-distributed, LSTM, attention and both convolution widths.
pub fn layer_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for seed in SEEDS {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        check_layer!(
            out,
            "dense",
            seed,
            Dense::<f64>::new("d", 4, 3, rng),
            random_tensor(rng, &[2, 4])
        );
        check_layer!(
            out,
            "time_distributed",
            seed,
            TimeDistributed::<f64>::new("td", 3, 4, rng),
            random_tensor(rng, &[2, 5, 3])
        );
        check_layer!(
            out,
            "lstm",
            seed,
            Lstm::<f64>::new("l", 4, 5, rng),
            random_tensor(rng, &[2, 6, 4])
        );
        check_layer!(
            out,
            "attention",
            seed,
            AttentionPool::<f64>::new("a", 3, 4, rng),
            random_tensor(rng, &[2, 4, 3])
        );
        for k in [1, 3] {
            check_layer!(
                out,
                format!("conv1d k={k}"),
                seed,
                Conv1d::<f64>::new("c", 3, 4, k, rng).unwrap(),
                random_tensor(rng, &[2, 6, 3])
            );
        }
    }
    out
}

/// Max pooling, activations and both losses.
pub fn op_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for seed in SEEDS {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let mut push = |what: &str, report| {
            out.push(Check {
                what: what.to_string(),
                seed,
                report,
            })
        };

        let x = random_tensor(rng, &[2, 5, 3]);
        let r = random_tensor(rng, &[2, 3]);
        let (_, cache) = MaxPoolTime.forward(&x).unwrap();
        let dx = MaxPoolTime.backward(&cache, &r);
        let report = input_grad_check(
            &x,
            &dx,
            |x| Ok(projection(&MaxPoolTime.forward(x)?.0, &r)),
            GradCheckOptions::default(),
        )
        .unwrap();
        push("maxpool", report);

        let x = random_tensor(rng, &[3, 4]);
        let r = random_tensor(rng, &[3, 4]);
        for act in [Activation::Relu, Activation::Tanh, Activation::Sigmoid] {
            let y = act.apply(&x);
            let dx = act.backward(&y, &r);
            let report = input_grad_check(
                &x,
                &dx,
                |x| Ok(projection(&act.apply(x), &r)),
                GradCheckOptions::default(),
            )
            .unwrap();
            push(&format!("{act:?}").to_lowercase(), report);
        }

        let logits = random_tensor(rng, &[4, 3]);
        let targets: Tensor<f64> = one_hot(&[0, 2, 1, 2], 3).unwrap();
        let ce = softmax_cross_entropy(&logits, &targets, None, 4).unwrap();
        let report = input_grad_check(
            &logits,
            &ce.grad,
            |z| Ok(softmax_cross_entropy(z, &targets, None, 4)?.loss),
            GradCheckOptions::default(),
        )
        .unwrap();
        push("softmax cross-entropy", report);

        let z = random_tensor(rng, &[4, 1]);
        let labels = [1.0, 0.0, 0.0, 1.0];
        let bce = binary_cross_entropy_with_logits(&z, &labels, 1.0, 4).unwrap();
        let report = input_grad_check(
            &z,
            &bce.grad,
            |z| Ok(binary_cross_entropy_with_logits(z, &labels, 1.0, 4)?.loss),
            GradCheckOptions::default(),
        )
        .unwrap();
        push("binary cross-entropy", report);
    }
    out
}

/// Moves every parameter off its initial value. Zero-initialised biases
/// put ReLU inputs exactly on the kink, where central differences and the
/// one-sided analytic derivative disagree.
fn jitter<M: Params<f64>>(model: &mut M, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    model.visit_params_mut(&mut |_, p| {
        for v in p.value.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    });
}

fn check_trainable<M>(what: String, seed: u64, model: &mut M, batch: &[&M::Sample]) -> Check
where
    M: Trainable<f64>,
{
    jitter(model, seed);
    let report = grad_check(
        model,
        |m: &mut M| -> Result<f64> { m.accumulate_gradients(batch) },
        GradCheckOptions::default(),
    )
    .unwrap();
    Check { what, seed, report }
}

/// Baselines 1 and 2, the TL and CL stages of Ti-AVC and the joint model,
/// for both fusion widths.
pub fn system_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for seed in SEEDS {
        for kernel in [1, 3] {
            let config = tiny_config(kernel);
            let data = examples(&config, 6, seed);
            let batch: Vec<_> = data.iter().collect();
            let rng = &mut ChaCha8Rng::seed_from_u64(seed);
            let name = |s: &str| format!("{s} k={kernel}");

            for variant in [1, 2] {
                let mut m = BaselineModel::<f32>::new(&config, variant, rng)
                    .unwrap()
                    .cast::<f64>();
                out.push(check_trainable(
                    name(&format!("baseline{variant}")),
                    seed,
                    &mut m,
                    &batch,
                ));
            }

            let mut tl: TlModel<f64> = TlModel::<f32>::new(&config, rng).unwrap().cast();
            let positives: Vec<_> = data.iter().filter(|e| e.label).collect();
            out.push(check_trainable(
                name("ti-avc TL"),
                seed,
                &mut tl,
                &positives,
            ));

            let pipeline = TiAvc::new(&config, rng).unwrap();
            let features = pipeline.extract(&data).unwrap();
            let refs: Vec<_> = features.iter().collect();
            let mut cl: ClModel<f64> = pipeline.cl.cast();
            out.push(check_trainable(name("ti-avc CL"), seed, &mut cl, &refs));

            let mut joint = JointModel::<f32>::new(&config, 0.7, rng)
                .unwrap()
                .cast::<f64>();
            out.push(check_trainable(name("joint"), seed, &mut joint, &batch));
        }
    }
    out
}
