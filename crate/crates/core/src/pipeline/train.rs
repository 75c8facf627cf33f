use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::checkpoint::{EpochRecord, ModelCheckpoint};
use super::config::{Stage, TrainConfig};
use crate::autograd::{Graph, Var};
use crate::data::SceneWindow;
use crate::diffusion::{DiffusionSchedule, NoiseDraw, Refiner};
use crate::error::{Error, Result};
use crate::model::{InteractionModel, SceneInput};
use crate::nn::{clip_global_norm, Adam, Bound, ParamSet};
use crate::predictor::{gaussian::argmax, reparameterized_samples};
use crate::scalar::Scalar;
use crate::traj::flatten_planar;

/// Checkpoints produced by a training run.
#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters after the last completed epoch.
    pub last: ModelCheckpoint,
    /// Parameters of the epoch with the lowest validation loss (training
    /// loss when there is no validation set).
    pub best: ModelCheckpoint,
    /// Set when a non-finite loss stopped training early; `last` then holds
    /// the last finite parameters.
    pub diverged: Option<Error>,
}

pub fn scene_inputs<T: Scalar>(windows: &[SceneWindow]) -> Vec<SceneInput<T>> {
    windows.iter().map(SceneInput::from_window).collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Split {
    Train,
    Val,
}

/// Shared epoch loop: epoch-0 evaluation, shuffled minibatches, Adam with
/// step decay, per-epoch validation and best-checkpoint tracking.
fn fit<T: Scalar>(
    cfg: &TrainConfig,
    params: &mut ParamSet<T>,
    n_train: usize,
    mut batch_loss: impl FnMut(&mut Graph<T>, &Bound, &[usize], &mut ChaCha8Rng) -> Result<Var>,
    mut evaluate: impl FnMut(&ParamSet<T>, Split) -> Result<Option<f64>>,
    snapshot: impl Fn(&ParamSet<T>, &[EpochRecord], usize) -> ModelCheckpoint,
) -> Result<TrainOutcome> {
    if n_train == 0 {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
    let initial = evaluate(params, Split::Train)?.unwrap_or(f64::NAN);
    let val = evaluate(params, Split::Val)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        learning_rate: cfg.learning_rate_at(0),
        train_loss: initial,
        val_loss: val,
    }];
    let mut best_score = val.unwrap_or(initial);
    let mut best = snapshot(params, &history, 0);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut diverged = None;
    let mut completed = 0;

    'epochs: for e in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(e);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut g = Graph::new();
            let bound = params.bind(&mut g, true);
            let loss = batch_loss(&mut g, &bound, batch, &mut rng)?;
            let value = g.scalar(loss).as_f64();
            if !value.is_finite() {
                diverged = Some(Error::Diverged {
                    epoch: e + 1,
                    loss: value,
                });
                break 'epochs;
            }
            let grads = g.backward(loss);
            let mut grads = params.gradients(&bound, &grads);
            if cfg.grad_clip > 0.0 {
                clip_global_norm(&mut grads, cfg.grad_clip);
            }
            adam.update(params, &grads, lr);
            total += value * batch.len() as f64;
        }
        completed = e + 1;
        let train_loss = total / n_train as f64;
        let val = evaluate(params, Split::Val)?;
        history.push(EpochRecord {
            epoch: completed,
            learning_rate: lr,
            train_loss,
            val_loss: val,
        });
        let score = val.unwrap_or(train_loss);
        if score < best_score || !best_score.is_finite() {
            best_score = score;
            best = snapshot(params, &history, completed);
        }
    }
    let last = snapshot(params, &history, completed);
    best.history = history;
    Ok(TrainOutcome { last, best, diverged })
}

fn limit<T: Clone>(items: Vec<T>, max: usize) -> Vec<T> {
    if max > 0 && items.len() > max {
        items[..max].to_vec()
    } else {
        items
    }
}

fn expect_stage(cfg: &TrainConfig, stage: Stage) -> Result<()> {
    cfg.validate()?;
    if cfg.stage != stage {
        return Err(Error::Config(format!("config is for stage {}, not {stage}", cfg.stage)));
    }
    Ok(())
}

/// Mean of a per-chunk loss over a dataset without updating anything.
fn mean_over<T: Scalar>(
    n: usize,
    chunk: usize,
    mut loss: impl FnMut(&mut Graph<T>, &[usize]) -> Result<Var>,
) -> Result<Option<f64>> {
    if n == 0 {
        return Ok(None);
    }
    let idx: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for c in idx.chunks(chunk) {
        let mut g = Graph::new();
        let l = loss(&mut g, c)?;
        total += g.scalar(l).as_f64() * c.len() as f64;
    }
    Ok(Some(total / n as f64))
}

/// Fits the noise estimator and its context encoder.
pub fn train_refiner<T: Scalar>(train: &[SceneWindow], val: &[SceneWindow], cfg: &TrainConfig) -> Result<TrainOutcome> {
    expect_stage(cfg, Stage::Refiner)?;
    let train: Vec<SceneInput<T>> = limit(scene_inputs(train), cfg.max_train_scenes);
    let val: Vec<SceneInput<T>> = scene_inputs(val);
    let schedule = cfg.schedule()?;
    let (refiner, mut params) = Refiner::init::<T>(cfg.refiner(), cfg.seed)?;
    let width = refiner.cfg.state_width();

    let loss_for = |g: &mut Graph<T>, p: &Bound, set: &[SceneInput<T>], idx: &[usize], rng: &mut ChaCha8Rng| {
        let scenes: Vec<&SceneInput<T>> = idx.iter().map(|&i| &set[i]).collect();
        let draw = NoiseDraw::sample(rng, scenes.len(), width, &schedule);
        refiner.noise_estimation_loss(g, p, &scenes, &schedule, &draw, cfg.squared_noise_loss)
    };
    let evaluate = |params: &ParamSet<T>, split: Split| {
        let set = if split == Split::Train { &train } else { &val };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        mean_over(set.len(), cfg.batch_size, |g, idx| {
            let p = params.bind(g, false);
            loss_for(g, &p, set, idx, &mut rng)
        })
    };
    let snapshot = |params: &ParamSet<T>, history: &[EpochRecord], epoch: usize| {
        let mut c = ModelCheckpoint::new::<T>(cfg.clone());
        c.set_refiner(&refiner, params, &schedule);
        c.history = history.to_vec();
        c.epoch = epoch;
        c
    };
    fit(
        cfg,
        &mut params,
        train.len(),
        |g, p, idx, rng| loss_for(g, p, &train, idx, rng),
        evaluate,
        snapshot,
    )
}

/// Fits the interaction stage alone with the likelihood loss.
pub fn train_interaction_standalone<T: Scalar>(
    train: &[SceneWindow],
    val: &[SceneWindow],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    expect_stage(cfg, Stage::InteractionStandalone)?;
    let train: Vec<SceneInput<T>> = limit(scene_inputs(train), cfg.max_train_scenes);
    let val: Vec<SceneInput<T>> = scene_inputs(val);
    let (model, mut params) = InteractionModel::init::<T>(cfg.interaction(), cfg.seed)?;

    let loss_for = |g: &mut Graph<T>, p: &Bound, set: &[SceneInput<T>], idx: &[usize]| -> Result<Var> {
        let losses = idx.iter().map(|&i| model.nll(g, p, &set[i])).collect::<Result<Vec<_>>>()?;
        let all = g.concat_rows(&losses);
        Ok(g.mean_all(all))
    };
    let evaluate = |params: &ParamSet<T>, split: Split| {
        let set = if split == Split::Train { &train } else { &val };
        mean_over(set.len(), cfg.batch_size, |g, idx| {
            let p = params.bind(g, false);
            loss_for(g, &p, set, idx)
        })
    };
    let snapshot = |params: &ParamSet<T>, history: &[EpochRecord], epoch: usize| {
        let mut c = ModelCheckpoint::new::<T>(cfg.clone());
        c.set_interaction(&model, params);
        c.history = history.to_vec();
        c.epoch = epoch;
        c
    };
    fit(
        cfg,
        &mut params,
        train.len(),
        |g, p, idx, _| loss_for(g, p, &train, idx),
        evaluate,
        snapshot,
    )
}

/// `min_k ‖Y − Ŷ_k‖₂` over the rows of `samples` (`K × 2T_f`, planar) with
/// `truth` a `1 × 2T_f` row.
pub fn min_over_k_loss<T: Scalar>(g: &mut Graph<T>, samples: Var, truth: Var) -> Var {
    let neg = g.scale(truth, -T::one());
    let diff = g.add_row(samples, neg);
    let norms = g.row_norms(diff);
    g.min_all(norms)
}

/// Pieces shared by every scene of an interaction-stage batch.
pub struct RefinementStage<'a> {
    pub refiner: &'a Refiner,
    pub params: &'a Bound,
    pub schedule: &'a DiffusionSchedule,
    pub tau: usize,
    pub k: usize,
}

/// Coarse samples of the most probable mode (reparameterised, so
/// differentiable in the interaction parameters) pushed through the frozen
/// refiner; returns the min-over-K loss.
pub fn interaction_scene_loss<T: Scalar, R: Rng>(
    g: &mut Graph<T>,
    p: &Bound,
    model: &InteractionModel,
    stage: &RefinementStage<'_>,
    scene: &SceneInput<T>,
    chi: &Array2<T>,
    rng: &mut R,
) -> Result<Var> {
    let future = scene
        .future
        .as_ref()
        .ok_or_else(|| Error::Contract("scene has no ground-truth future".into()))?;
    let fwd = model.forward(g, p, scene)?;
    let mode = argmax(&model.probs(g, &fwd).joint);
    let gv = model.decode(g, p, &fwd, &[mode])[0];
    let tf = model.cfg.future;
    let normal = |rng: &mut R| Array2::from_shape_simple_fn((stage.k, tf), || T::lit(rng.sample::<f64, _>(StandardNormal)));
    let eta1 = normal(rng);
    let eta2 = normal(rng);
    let samples = reparameterized_samples(g, gv, eta1, eta2);
    let refined = if stage.tau == 0 {
        samples
    } else {
        let noise = stage.refiner.draw_refine_noise(rng, stage.k, stage.tau);
        let chi = g.constant(chi.clone());
        stage
            .refiner
            .refine_graph(g, stage.params, samples, &scene.prior, chi, stage.schedule, stage.tau, &noise)
    };
    let flat = flatten_planar(future);
    let truth = g.constant(Array2::from_shape_vec((1, flat.len()), flat).expect("row shape"));
    Ok(min_over_k_loss(g, refined, truth))
}

/// Fits the interaction stage through the frozen refiner of `refiner_ckpt`.
/// When that checkpoint also carries interaction parameters of the same
/// shape, training starts from them.
pub fn train_interaction<T: Scalar>(
    train: &[SceneWindow],
    val: &[SceneWindow],
    refiner_ckpt: &ModelCheckpoint,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    expect_stage(cfg, Stage::Interaction)?;
    let (refiner, refiner_params, schedule) = refiner_ckpt.refiner_model::<T>()?;
    let schedule = schedule.with_tau(cfg.tau)?;
    let frozen = refiner_ckpt.refiner.clone().expect("refiner block loaded above");
    let train: Vec<SceneInput<T>> = limit(scene_inputs(train), cfg.max_train_scenes);
    let val: Vec<SceneInput<T>> = scene_inputs(val);
    let (model, mut params) = match &refiner_ckpt.interaction {
        Some(block) if block.config == cfg.interaction() => refiner_ckpt.interaction_model::<T>()?,
        _ => InteractionModel::init::<T>(cfg.interaction(), cfg.seed)?,
    };
    let chi_train: Vec<Array2<T>> = train.iter().map(|s| refiner.context_values(&refiner_params, s)).collect();
    let chi_val: Vec<Array2<T>> = val.iter().map(|s| refiner.context_values(&refiner_params, s)).collect();

    let loss_for = |g: &mut Graph<T>,
                    p: &Bound,
                    set: &[SceneInput<T>],
                    chis: &[Array2<T>],
                    idx: &[usize],
                    rng: &mut ChaCha8Rng|
     -> Result<Var> {
        let rp = refiner_params.bind(g, false);
        let stage = RefinementStage {
            refiner: &refiner,
            params: &rp,
            schedule: &schedule,
            tau: cfg.tau,
            k: cfg.k,
        };
        let losses = idx
            .iter()
            .map(|&i| interaction_scene_loss(g, p, &model, &stage, &set[i], &chis[i], rng))
            .collect::<Result<Vec<_>>>()?;
        let all = g.concat_rows(&losses);
        Ok(g.mean_all(all))
    };
    let evaluate = |params: &ParamSet<T>, split: Split| {
        let (set, chis) = if split == Split::Train { (&train, &chi_train) } else { (&val, &chi_val) };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        mean_over(set.len(), cfg.batch_size, |g, idx| {
            let p = params.bind(g, false);
            loss_for(g, &p, set, chis, idx, &mut rng)
        })
    };
    let snapshot = |params: &ParamSet<T>, history: &[EpochRecord], epoch: usize| {
        let mut c = ModelCheckpoint::new::<T>(cfg.clone());
        c.set_interaction(&model, params);
        c.refiner = Some(frozen.clone());
        c.history = history.to_vec();
        c.epoch = epoch;
        c
    };
    let outcome = fit(
        cfg,
        &mut params,
        train.len(),
        |g, p, idx, rng| loss_for(g, p, &train, &chi_train, idx, rng),
        evaluate,
        snapshot,
    )?;
    if refiner_params.to_records() != frozen.params {
        return Err(Error::Contract("refiner parameters changed during interaction training".into()));
    }
    Ok(outcome)
}
