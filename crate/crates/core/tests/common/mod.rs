#![allow(dead_code)]

use c2ftp::autograd::{Graph, Var};
use c2ftp::data::{generate_synthetic, prepare_windows, split_dataset, LabelConfig, SceneWindow, Split, SyntheticConfig, WindowConfig};
use c2ftp::nn::{Bound, ParamSet};
use c2ftp::pipeline::{Stage, TrainConfig};

/// Scene windows from the default three-lane synthetic road, thinned evenly
/// to at most `n`.
pub fn synthetic_windows(n: usize, seed: u64) -> Vec<SceneWindow> {
    let tracks = generate_synthetic(&SyntheticConfig {
        seed,
        ..SyntheticConfig::default()
    })
    .expect("synthetic tracks");
    let all = prepare_windows(&tracks, &WindowConfig::new(10), &LabelConfig::default()).expect("windows");
    let step = (all.len() / n.max(1)).max(1);
    all.into_iter().step_by(step).take(n).collect()
}

pub fn synthetic_split(n: usize, seed: u64) -> Split<SceneWindow> {
    split_dataset(synthetic_windows(n, seed), 0)
}

/// A small but complete configuration for fast training tests.
pub fn tiny_config(stage: Stage) -> TrainConfig {
    TrainConfig {
        epochs: 5,
        batch_size: 8,
        decay_period: 4,
        k: 4,
        tau: 3,
        diffusion_steps: 20,
        hidden: 8,
        embed: 8,
        heads: 2,
        context: 12,
        decoder_hidden: 12,
        refiner_width: 8,
        refiner_heads: 2,
        refiner_feedforward: 12,
        refiner_context: 12,
        refiner_hidden: 24,
        step_embedding: 8,
        ..TrainConfig::defaults(stage)
    }
}

/// Worst relative error between the autodiff gradient of `loss` and central
/// differences, over every parameter entry. Each tensor is compared as a
/// vector: `‖g_ad − g_fd‖ / max(‖g_ad‖, ‖g_fd‖, 1e-8)`.
pub fn gradient_check(params: &ParamSet<f64>, loss: impl Fn(&mut Graph<f64>, &Bound) -> Var) -> f64 {
    let mut g = Graph::new();
    let bound = params.bind(&mut g, true);
    let out = loss(&mut g, &bound);
    let grads = params.gradients(&bound, &g.backward(out));
    let eval = |ps: &ParamSet<f64>| {
        let mut g = Graph::new();
        let b = ps.bind(&mut g, false);
        let out = loss(&mut g, &b);
        g.scalar(out)
    };
    let h = 1e-6;
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (i, analytic) in grads.iter().enumerate() {
        let (mut diff, mut na, mut nf) = (0.0, 0.0, 0.0);
        for j in 0..analytic.len() {
            let orig = params.values()[i].as_slice().unwrap()[j];
            probe.values_mut()[i].as_slice_mut().unwrap()[j] = orig + h;
            let up = eval(&probe);
            probe.values_mut()[i].as_slice_mut().unwrap()[j] = orig - h;
            let down = eval(&probe);
            probe.values_mut()[i].as_slice_mut().unwrap()[j] = orig;
            let fd = (up - down) / (2.0 * h);
            let a = analytic.as_slice().unwrap()[j];
            diff += (a - fd) * (a - fd);
            na += a * a;
            nf += fd * fd;
        }
        let rel = diff.sqrt() / na.sqrt().max(nf.sqrt()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

/// A checkpoint holding freshly initialised interaction and refiner blocks.
pub fn untrained_checkpoint(cfg: &TrainConfig) -> c2ftp::pipeline::ModelCheckpoint {
    use c2ftp::diffusion::Refiner;
    use c2ftp::model::InteractionModel;
    let mut ckpt = c2ftp::pipeline::ModelCheckpoint::new::<f64>(cfg.clone());
    let (m, p) = InteractionModel::init::<f64>(cfg.interaction(), cfg.seed).unwrap();
    ckpt.set_interaction(&m, &p);
    let (r, rp) = Refiner::init::<f64>(cfg.refiner(), cfg.seed + 1).unwrap();
    ckpt.set_refiner(&r, &rp, &cfg.schedule().unwrap());
    ckpt
}
