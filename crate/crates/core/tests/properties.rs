use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use motionspace::encoders::{encode_audio_weights, AudioClipFeature};
use motionspace::face::{
    expression_loss, landmark_loss, project_landmarks, ExpressionCoeff, ExpressionTarget, FaceModel, IdentityCoeff,
    Point2, DEFAULT_FOCAL, DEFAULT_LAMBDA_LDMK,
};
use motionspace::nn::SmallNet;
use motionspace::pose::PoseFrame;
use motionspace::AUDIO_FRAME_DIM;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn pose(rng: &mut ChaCha8Rng) -> PoseFrame {
    PoseFrame::new(
        [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)],
        [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 5.0],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shape_is_linear_in_coefficients(seed in 0u64..10_000) {
        let face = FaceModel::builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = IdentityCoeff(gaussian(&mut rng, face.identity_dim(), 1.0));
        let a2 = IdentityCoeff(gaussian(&mut rng, face.identity_dim(), 1.0));
        let b1 = ExpressionCoeff(gaussian(&mut rng, face.expression_dim(), 1.0));
        let b2 = ExpressionCoeff(gaussian(&mut rng, face.expression_dim(), 1.0));
        let sum_a = IdentityCoeff(a1.0.iter().zip(&a2.0).map(|(x, y)| x + y).collect());
        let sum_b = ExpressionCoeff(b1.0.iter().zip(&b2.0).map(|(x, y)| x + y).collect());
        let zero_a = IdentityCoeff(vec![0.0; face.identity_dim()]);
        let zero_b = ExpressionCoeff(vec![0.0; face.expression_dim()]);
        let mean = face.mean_shape();
        let s1 = face.reconstruct_shape(&a1, &b1).unwrap();
        let s2 = face.reconstruct_shape(&a2, &b2).unwrap();
        let s12 = face.reconstruct_shape(&sum_a, &sum_b).unwrap();
        prop_assert_eq!(face.reconstruct_shape(&zero_a, &zero_b).unwrap(), mean.to_vec());
        for i in 0..mean.len() {
            let expected = s1[i] + s2[i] - mean[i];
            prop_assert!((s12[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn landmark_loss_zero_iff_equal_and_quadratic(seed in 0u64..10_000, c in 0.01f64..10.0) {
        let face = FaceModel::builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = face.landmark_indices().len();
        let target: Vec<Point2> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let residual: Vec<Point2> = (0..n).map(|_| [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)]).collect();
        let omega = face.landmark_weights();
        prop_assert_eq!(landmark_loss(&target, &target, omega).unwrap().value, 0.0);
        let moved = |s: f64| -> Vec<Point2> {
            target.iter().zip(&residual).map(|(t, r)| [t[0] + s * r[0], t[1] + s * r[1]]).collect()
        };
        let base = landmark_loss(&moved(1.0), &target, omega).unwrap().value;
        let scaled = landmark_loss(&moved(c), &target, omega).unwrap().value;
        prop_assert!(base > 0.0);
        prop_assert!((scaled - c * c * base).abs() <= 1e-9 * scaled.max(1e-12));
    }

    #[test]
    fn expression_loss_nonnegative_and_zero_at_truth(seed in 0u64..10_000) {
        let face = FaceModel::builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = IdentityCoeff(gaussian(&mut rng, face.identity_dim(), 0.5));
        let beta = ExpressionCoeff(gaussian(&mut rng, face.expression_dim(), 0.5));
        let other = ExpressionCoeff(gaussian(&mut rng, face.expression_dim(), 0.5));
        let p = pose(&mut rng);
        let shape = face.reconstruct_shape(&alpha, &beta).unwrap();
        let landmarks = project_landmarks(&shape, &face, &p, DEFAULT_FOCAL).unwrap();
        let target = ExpressionTarget { beta: &beta, alpha: &alpha, pose: &p, landmarks: &landmarks };
        let at_truth = expression_loss(&beta, &target, &face, DEFAULT_LAMBDA_LDMK, DEFAULT_FOCAL).unwrap();
        prop_assert_eq!(at_truth.value, 0.0);
        let off = expression_loss(&other, &target, &face, DEFAULT_LAMBDA_LDMK, DEFAULT_FOCAL).unwrap();
        prop_assert!(off.value > 0.0);
        prop_assert!(off.l2 >= 0.0 && off.landmark >= 0.0);
    }

    #[test]
    fn audio_weights_on_simplex_and_pure(seed in 0u64..10_000, t in 2usize..6, s in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = SmallNet::audio_encoder(t, 8, s, &mut rng).unwrap();
        let params = gaussian(&mut rng, net.param_count(), 0.3);
        net.params_mut().copy_from_slice(&params);
        let audio = AudioClipFeature::new(gaussian(&mut rng, t * AUDIO_FRAME_DIM, 3.0), t).unwrap();
        let w = encode_audio_weights(&net, &audio).unwrap();
        prop_assert_eq!(w.len(), s);
        prop_assert!(w.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((w.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let again = encode_audio_weights(&net, &audio).unwrap();
        prop_assert_eq!(w, again);
    }
}
