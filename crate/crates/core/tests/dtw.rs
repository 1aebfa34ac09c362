mod common;

use alignnet::dtw::{dtw, dtw_1d, path_to_correspondence, WarpPath};
use alignnet::tensor::Tensor;
use alignnet::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_features(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Tensor {
    Tensor::new(
        vec![d, n],
        (0..d * n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    )
    .unwrap()
}

#[test]
fn identical_sequences_align_diagonally() {
    let x = [0.3, -1.0, 2.0, 0.5];
    let p = dtw_1d(&x, &x).unwrap();
    assert_eq!(p.total_cost, 0.0);
    assert_eq!(p.steps, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
}

#[test]
fn hand_example() {
    let p = dtw_1d(&[0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
    assert_eq!(p.total_cost, 0.0);
    assert_eq!(p.steps, vec![(0, 0), (0, 1), (1, 2)]);
}

#[test]
fn single_frames() {
    let p = dtw_1d(&[0.0], &[1.0]).unwrap();
    assert_eq!(p.total_cost, 1.0);
    assert_eq!(p.steps, vec![(0, 0)]);
}

#[test]
fn ties_prefer_the_diagonal() {
    let p = dtw_1d(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
    assert_eq!(p.steps, vec![(0, 0), (1, 1), (2, 2)]);
    // All three predecessors of (1,1) cost 0 except through the diagonal.
    let p = dtw_1d(&[0.0, 0.0], &[0.0]).unwrap();
    assert_eq!(p.steps, vec![(0, 0), (1, 0)]);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let x = Tensor::zeros(&[2, 3]);
    let y = Tensor::zeros(&[3, 3]);
    assert!(matches!(dtw(&x, &y), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn correspondence_from_paths() {
    let diag = WarpPath {
        steps: (0..5).map(|i| (i, i)).collect(),
        total_cost: 0.0,
    };
    assert_eq!(
        path_to_correspondence(&diag, 5, 5).unwrap(),
        vec![-1.0, -0.5, 0.0, 0.5, 1.0]
    );
    let p = WarpPath {
        steps: vec![(0, 0), (0, 1), (1, 2)],
        total_cost: 0.0,
    };
    let c = path_to_correspondence(&p, 2, 3).unwrap();
    assert_eq!(c, vec![-0.5, 1.0]);
}

proptest! {
    #[test]
    fn matches_exhaustive_enumeration(seed in 0u64..100_000, d in 1usize..3, n in 1usize..=6, m in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_features(&mut rng, d, n);
        let y = random_features(&mut rng, d, m);
        let p = dtw(&x, &y).unwrap();
        prop_assert_eq!(p.total_cost, common::brute_force_dtw(&common::columns(&x), &common::columns(&y)));
        let recomputed: f64 = p.steps.iter().map(|&(i, j)| {
            (0..d).map(|r| (x.at2(r, i) - y.at2(r, j)).powi(2)).sum::<f64>()
        }).sum();
        prop_assert!((recomputed - p.total_cost).abs() < 1e-12);
        prop_assert_eq!(p.steps[0], (0, 0));
        prop_assert_eq!(*p.steps.last().unwrap(), (n - 1, m - 1));
        for w in p.steps.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            prop_assert!(matches!((di, dj), (1, 0) | (0, 1) | (1, 1)));
        }
        let c = path_to_correspondence(&p, n, m.max(2)).unwrap();
        prop_assert_eq!(c.len(), n);
        for w in c.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn swapping_inputs_keeps_cost(seed in 0u64..10_000, n in 1usize..12, m in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = dtw_1d(&x, &y).unwrap();
        let b = dtw_1d(&y, &x).unwrap();
        prop_assert!((a.total_cost - b.total_cost).abs() < 1e-12);
        // With distinct random values ties are absent, so the path transposes.
        prop_assert_eq!(a.transposed().steps, b.steps);
    }

    #[test]
    fn common_offset_keeps_cost(seed in 0u64..10_000, c in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_features(&mut rng, 2, 7);
        let y = random_features(&mut rng, 2, 5);
        let shift = |t: &Tensor| Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v + c).collect()).unwrap();
        let a = dtw(&x, &y).unwrap();
        let b = dtw(&shift(&x), &shift(&y)).unwrap();
        prop_assert!((a.total_cost - b.total_cost).abs() < 1e-9);
    }
}
