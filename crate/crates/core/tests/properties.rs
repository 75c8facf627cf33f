use c2ftp::autograd::Graph;
use c2ftp::diffusion::{denoise_step, forward_diffuse, make_schedule};
use c2ftp::eval::{ade_fde, rmse_at, Aggregation};
use c2ftp::pipeline::{min_over_k_loss, Stage, TrainConfig};
use c2ftp::traj::Point;
use c2ftp::wave::{superpose_waves, surrounding_fc, AgentWave};
use ndarray::Array2;
use proptest::prelude::*;

fn traj(len: usize) -> impl Strategy<Value = Vec<Point<f64>>> {
    prop::collection::vec(prop::array::uniform2(-50.0..50.0f64), len)
}

type Paired = (Vec<Vec<Point<f64>>>, Vec<Vec<Point<f64>>>);

fn instances() -> impl Strategy<Value = Paired> {
    (1usize..6, 1usize..8).prop_flat_map(|(n, len)| (prop::collection::vec(traj(len), n), prop::collection::vec(traj(len), n)))
}

proptest! {
    #[test]
    fn metrics_are_symmetric((p, t) in instances()) {
        let wrap = |x: &[Vec<Point<f64>>]| x.iter().map(|v| vec![v.clone()]).collect::<Vec<_>>();
        let len = p[0].len();
        for step in 1..=len {
            prop_assert_eq!(rmse_at(&p, &t, step).unwrap(), rmse_at(&t, &p, step).unwrap());
        }
        prop_assert_eq!(
            ade_fde(&wrap(&p), &t, Aggregation::Single).unwrap(),
            ade_fde(&wrap(&t), &p, Aggregation::Single).unwrap()
        );
    }

    #[test]
    fn metrics_scale_with_the_coordinates((p, t) in instances(), c in 0.1..10.0f64) {
        let scale = |x: &[Vec<Point<f64>>]| -> Vec<Vec<Point<f64>>> {
            x.iter().map(|v| v.iter().map(|q| [q[0] * c, q[1] * c]).collect()).collect()
        };
        let (ps, ts) = (scale(&p), scale(&t));
        let r0 = rmse_at(&p, &t, 1).unwrap();
        prop_assert!((rmse_at(&ps, &ts, 1).unwrap() - c * r0).abs() <= 1e-9 * (1.0 + c * r0));
        let wrap = |x: Vec<Vec<Point<f64>>>| x.into_iter().map(|v| vec![v]).collect::<Vec<_>>();
        let (a0, f0) = ade_fde(&wrap(p), &t, Aggregation::Single).unwrap();
        let (a1, f1) = ade_fde(&wrap(ps), &ts, Aggregation::Single).unwrap();
        prop_assert!((a1 - c * a0).abs() <= 1e-9 * (1.0 + c * a0));
        prop_assert!((f1 - c * f0).abs() <= 1e-9 * (1.0 + c * f0));
    }

    #[test]
    fn metrics_vanish_only_on_exact_matches((p, t) in instances()) {
        let wrap = |x: &[Vec<Point<f64>>]| x.iter().map(|v| vec![v.clone()]).collect::<Vec<_>>();
        let (ade, fde) = ade_fde(&wrap(&p), &t, Aggregation::Single).unwrap();
        prop_assert!(ade >= 0.0 && fde >= 0.0);
        prop_assert_eq!(ade == 0.0, p == t);
        prop_assert_eq!(ade_fde(&wrap(&t), &t, Aggregation::Single).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn best_of_k_never_rises_with_more_samples(
        samples in prop::collection::vec(traj(5), 2..8),
        truth in traj(5),
    ) {
        let mut last = f64::INFINITY;
        for k in 1..=samples.len() {
            let (ade, _) = ade_fde(&[samples[..k].to_vec()], std::slice::from_ref(&truth), Aggregation::BestOfK).unwrap();
            prop_assert!(ade <= last);
            last = ade;
        }
    }

    #[test]
    fn min_over_k_loss_is_the_smallest_distance_and_monotone(
        rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 6), 1..7),
        truth in prop::collection::vec(-5.0..5.0f64, 6),
    ) {
        let dists: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        let mut running = f64::INFINITY;
        for k in 1..=rows.len() {
            let mut g = Graph::<f64>::new();
            let s = g.constant(Array2::from_shape_fn((k, 6), |(i, j)| rows[i][j]));
            let t = g.constant(Array2::from_shape_vec((1, 6), truth.clone()).unwrap());
            let l = min_over_k_loss(&mut g, s, t);
            let l = g.scalar(l);
            let want = dists[..k].iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!((l - want).abs() < 1e-12);
            prop_assert!(l <= running);
            running = l;
        }
    }

    #[test]
    fn superposed_amplitude_obeys_the_triangle_inequality(
        zi in 0.0..10.0f64, zj in 0.0..10.0f64, ti in -7.0..7.0f64, tj in -7.0..7.0f64,
    ) {
        let (z, _) = superpose_waves(&[zi], &[ti], &[zj], &[tj]);
        prop_assert!(z[0] >= (zi - zj).abs() - 1e-12 && z[0] <= zi + zj + 1e-12);
    }

    #[test]
    fn masked_slots_never_reach_the_output(
        n in 2usize..6,
        seed in any::<u64>(),
        junk in -100.0..100.0f64,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let wave = |rng: &mut rand_chacha::ChaCha8Rng| AgentWave::new(
            (0..d).map(|_| rng.gen_range(0.0..2.0)).collect(),
            (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        );
        let waves: Vec<AgentWave<f64>> = (0..n).map(|_| wave(&mut rng)).collect();
        let mask: Vec<bool> = (0..n).map(|i| i == 0 || rng.gen_bool(0.5)).collect();
        let wr = Array2::from_shape_simple_fn((n, n), || rng.gen_range(-1.0..1.0));
        let wi = Array2::from_shape_simple_fn((n, n), || rng.gen_range(-1.0..1.0));
        let bias: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = surrounding_fc(&waves, &mask, &wr, &wi, &bias).unwrap();
        let mut other = waves.clone();
        for (w, &m) in other.iter_mut().zip(&mask) {
            if !m {
                *w = AgentWave::new(vec![junk.abs(); d], vec![junk; d]);
            }
        }
        let again = surrounding_fc(&other, &mask, &wr, &wi, &bias).unwrap();
        for (a, b) in base.iter().flatten().zip(again.iter().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn true_noise_inverts_the_first_step(
        y0 in prop::collection::vec(-20.0..20.0f64, 8),
        eps in prop::collection::vec(-3.0..3.0f64, 8),
    ) {
        let s = make_schedule(50, 1e-4, 5e-2, 10).unwrap();
        let y0 = Array2::from_shape_vec((2, 4), y0).unwrap();
        let eps = Array2::from_shape_vec((2, 4), eps).unwrap();
        let y1 = forward_diffuse(&y0, 1, &eps, &s).unwrap();
        let back = denoise_step(&y1, &eps, 1, &Array2::zeros((2, 4)), &s).unwrap();
        for (a, b) in back.iter().zip(&y0) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn learning_rate_decays_in_steps(
        lr in 1e-5..1e-1f64, decay in 0.05..1.0f64, period in 1usize..20, epoch in 0usize..200,
    ) {
        let cfg = TrainConfig {
            learning_rate: lr,
            decay_factor: decay,
            decay_period: period,
            ..TrainConfig::defaults(Stage::Refiner)
        };
        prop_assert_eq!(cfg.learning_rate_at(epoch), lr * decay.powi((epoch / period) as i32));
    }

    #[test]
    fn config_documents_round_trip(epochs in 1usize..500, seed in any::<u32>(), k in 1usize..64, squared in any::<bool>()) {
        for stage in [Stage::Refiner, Stage::Interaction, Stage::InteractionStandalone] {
            let cfg = TrainConfig { epochs, seed: seed as u64, k, squared_noise_loss: squared, ..TrainConfig::defaults(stage) };
            prop_assert_eq!(TrainConfig::parse(&cfg.to_toml(), None).unwrap(), cfg);
        }
    }
}
