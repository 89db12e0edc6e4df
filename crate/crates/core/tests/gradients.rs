mod common;

use common::gradient_check;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmflow::autodiff::{Graph, Tensor, Var};
use swarmflow::diffusion::{ddpm_train_loss, DdpmDraws, DiffusionSchedule};
use swarmflow::flowmatch::{cfm_loss, CfmDraws, FlowSchedule};
use swarmflow::models::{Bound, CouplingInit, ModelConfig, ParamStore, SwarmModel};

const TOL: f64 = 1e-4;

fn store(a: Vec<f64>, b: Vec<f64>, rows: usize) -> ParamStore {
    let mut s = ParamStore::new();
    let cols = a.len() / rows;
    s.register("a", Tensor::matrix(rows, cols, a).unwrap());
    s.register("b", Tensor::matrix(rows, cols, b).unwrap());
    s
}

fn params(p: &Bound) -> (Var, Var) {
    (p.vars()[0], p.vars()[1])
}

type OpFn = fn(&Graph, Var, Var) -> Var;

/// Each primitive reduced to a scalar through a fixed random-looking weighting,
/// so that every output entry contributes a distinct amount to the gradient.
fn weighted(g: &Graph, v: Var) -> Var {
    let shape = g.shape(v);
    let w = Tensor::from_fn(&shape, |i| 0.3 + ((i * 7 + 3) % 11) as f64 * 0.1);
    let w = g.constant(w).unwrap();
    g.sum(g.mul(v, w).unwrap()).unwrap()
}

const OPS: &[(&str, OpFn)] = &[
    ("add", |g, a, b| g.add(a, b).unwrap()),
    ("sub", |g, a, b| g.sub(a, b).unwrap()),
    ("mul", |g, a, b| g.mul(a, b).unwrap()),
    ("scale", |g, a, _| g.scale(a, -1.7).unwrap()),
    ("sigmoid", |g, a, _| g.sigmoid(a).unwrap()),
    ("tanh", |g, a, _| g.tanh(a).unwrap()),
    ("relu", |g, a, _| g.relu(a).unwrap()),
    ("exp", |g, a, _| g.exp(a).unwrap()),
    ("log", |g, a, _| {
        let pos = g.add(g.mul(a, a).unwrap(), g.constant(Tensor::full(&g.shape(a), 0.5)).unwrap()).unwrap();
        g.log(pos).unwrap()
    }),
    ("mean", |g, a, _| g.mean(a).unwrap()),
    ("max_rows", |g, a, _| g.max_rows(a).unwrap()),
    ("concat_cols", |g, a, b| g.concat_cols(&[a, b, a]).unwrap()),
    ("slice_cols", |g, a, _| g.slice_cols(a, 1, 3).unwrap()),
    ("matmul", |g, a, b| g.matmul(g.slice_cols(a, 0, 3).unwrap(), b).unwrap()),
    ("broadcast_row", |g, a, b| {
        let row = g.slice_cols(g.max_rows(b).unwrap(), 0, g.shape(a)[1]).unwrap();
        g.mul(g.add(a, row).unwrap(), row).unwrap()
    }),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn primitive_gradients_match_central_differences(
        a in prop::collection::vec(-2.0f64..2.0, 12),
        b in prop::collection::vec(-2.0f64..2.0, 12),
    ) {
        for (name, op) in OPS {
            let s = store(a.clone(), b.clone(), 3);
            let report = gradient_check(&s, &|g, p| {
                let (x, y) = params(p);
                weighted(g, op(g, x, y))
            });
            prop_assert!(report.max_rel < TOL, "{name}: max relative error {}", report.max_rel);
            prop_assert!(report.checked > 0, "{name}: every coordinate skipped");
        }
    }
}

/// A tiny model with every parameter perturbed away from its initial value,
/// so zero-initialized output layers do not hide gradient paths.
fn perturbed_model(seed: u64) -> SwarmModel {
    let mut model = SwarmModel::with_init(ModelConfig::tiny(8), seed, CouplingInit::Identity).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for t in model.params.tensors_mut() {
        let noise = Tensor::from_fn(t.shape(), |_| rng.random_range(-0.1..0.1));
        *t = t.zip_map(&noise, |v, n| v + n);
    }
    model
}

fn cloud(seed: u64, m: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[m, 3], |_| rng.random_range(-1.5..1.5))
}

#[test]
fn flow_matching_loss_gradients_for_every_network() {
    let model = perturbed_model(11);
    let x0 = cloud(1, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws = CfmDraws::sample(&mut rng, 16, 8, 1.0);
    let sched = FlowSchedule::default();
    let report = gradient_check(&model.params, &|g, p| {
        cfm_loss(&model, &sched, g, p, &x0, &draws).unwrap().total
    });
    assert_eq!(report.checked + report.skipped, model.params.num_scalars());
    assert!(report.skipped * 50 < report.checked, "too many kinks: {report:?}");
    assert!(report.max_rel < TOL, "{report:?}");
}

#[test]
fn diffusion_loss_gradients_for_every_network() {
    let model = perturbed_model(12);
    let x0 = cloud(3, 16);
    let sched = DiffusionSchedule::linear(100, 1e-4, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws = DdpmDraws::sample(&mut rng, 16, 8, 100);
    let report = gradient_check(&model.params, &|g, p| {
        ddpm_train_loss(&model, &sched, g, p, &x0, &draws).unwrap().total
    });
    assert!(report.skipped * 50 < report.checked, "too many kinks: {report:?}");
    assert!(report.max_rel < TOL, "{report:?}");
}

#[test]
fn bijector_log_density_gradients() {
    let model = perturbed_model(13);
    let z = Tensor::row((0..8).map(|i| (i as f64 * 0.9).cos()).collect());
    let report = gradient_check(&model.params, &|g, p| {
        let zv = g.constant(z.clone()).unwrap();
        let (w, ld) = model.bijector.inverse(g, p, zv).unwrap();
        let sq = g.sum(g.mul(w, w).unwrap()).unwrap();
        g.add(g.scale(sq, -0.5).unwrap(), ld).unwrap()
    });
    assert!(report.max_rel < TOL, "{report:?}");
}

