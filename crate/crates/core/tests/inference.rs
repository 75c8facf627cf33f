mod common;

use c2ftp::model::SceneInput;
use c2ftp::pipeline::{infer, load_checkpoint, save_checkpoint, ModelCheckpoint, Pipeline, Stage, CHECKPOINT_VERSION};
use c2ftp::Error;
use common::{synthetic_windows, tiny_config, untrained_checkpoint};

fn scene() -> SceneInput<f64> {
    SceneInput::from_window(&synthetic_windows(5, 11)[2])
}

#[test]
fn zero_depth_returns_the_coarse_samples() {
    let ckpt = untrained_checkpoint(&tiny_config(Stage::Interaction));
    let p = infer(&scene(), &ckpt, 6, 0, 3).unwrap();
    assert_eq!(p.trajectories, p.coarse);
}

#[test]
fn output_has_k_trajectories_of_the_full_horizon() {
    let cfg = tiny_config(Stage::Interaction);
    let ckpt = untrained_checkpoint(&cfg);
    let p = infer(&scene(), &ckpt, 7, 3, 3).unwrap();
    assert_eq!(p.trajectories.len(), 7);
    assert!(p.trajectories.iter().all(|t| t.len() == cfg.future));
    assert!(p.trajectories.iter().flatten().flatten().all(|v| v.is_finite()));
    assert_ne!(p.trajectories, p.coarse);
    assert!((p.probs.joint.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn same_seed_same_output() {
    let ckpt = untrained_checkpoint(&tiny_config(Stage::Interaction));
    let s = scene();
    let a = infer(&s, &ckpt, 5, 3, 21).unwrap();
    assert_eq!(a, infer(&s, &ckpt, 5, 3, 21).unwrap());
    assert_ne!(a.trajectories, infer(&s, &ckpt, 5, 3, 22).unwrap().trajectories);
}

#[test]
fn depth_beyond_the_schedule_is_a_config_error() {
    let cfg = tiny_config(Stage::Interaction);
    let ckpt = untrained_checkpoint(&cfg);
    let r = infer(&scene(), &ckpt, 3, cfg.diffusion_steps + 1, 0);
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn refinement_needs_a_refiner_block() {
    let mut ckpt = untrained_checkpoint(&tiny_config(Stage::Interaction));
    ckpt.refiner = None;
    assert!(infer(&scene(), &ckpt, 3, 0, 0).is_ok());
    assert!(matches!(infer(&scene(), &ckpt, 3, 2, 0), Err(Error::Config(_))));
}

#[test]
fn checkpoint_round_trip_is_byte_stable_and_bit_identical() {
    let ckpt = untrained_checkpoint(&tiny_config(Stage::Interaction));
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ckpt");
    let b = dir.path().join("b.ckpt");
    save_checkpoint(&ckpt, &a).unwrap();
    let loaded = load_checkpoint(&a).unwrap();
    save_checkpoint(&loaded, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (_, p0) = ckpt.interaction_model::<f64>().unwrap();
    let (_, p1) = loaded.interaction_model::<f64>().unwrap();
    for (x, y) in p0.values().iter().zip(p1.values()) {
        assert!(x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
    let s = scene();
    assert_eq!(
        Pipeline::<f64>::from_checkpoint(&ckpt).unwrap().predict(&s, 4, 2, 1).unwrap(),
        Pipeline::<f64>::from_checkpoint(&loaded).unwrap().predict(&s, 4, 2, 1).unwrap()
    );
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let bytes = untrained_checkpoint(&tiny_config(Stage::Interaction)).to_bytes().unwrap();
    let truncated = &bytes[..bytes.len() - 10];
    assert!(matches!(ModelCheckpoint::from_bytes(truncated), Err(Error::Integrity(_))));
    let mut flipped = bytes.clone();
    let at = bytes.len() - 40;
    flipped[at] = if flipped[at] == b'1' { b'2' } else { b'1' };
    assert!(matches!(ModelCheckpoint::from_bytes(&flipped), Err(Error::Integrity(_))));
    let text = String::from_utf8(bytes).unwrap();
    let newer = text.replacen(
        &format!(" {CHECKPOINT_VERSION} "),
        &format!(" {} ", CHECKPOINT_VERSION + 1),
        1,
    );
    assert!(matches!(
        ModelCheckpoint::from_bytes(newer.as_bytes()),
        Err(Error::Version { found, .. }) if found == CHECKPOINT_VERSION + 1
    ));
}

#[test]
fn empty_checkpoints_cannot_be_written() {
    let ckpt = ModelCheckpoint::new::<f64>(tiny_config(Stage::Refiner));
    assert!(ckpt.to_bytes().is_err());
}
