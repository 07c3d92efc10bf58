//! Randomized invariants over the public API.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use priorvq::eval::{average_ranks, pearson_lcc, spearman_srocc};
use priorvq::net::{build_network, NetworkConfig, NetworkRole};
use priorvq::score::psnr;
use priorvq::tensor::{conv2d_raw, Shape4, Tensor4};

fn seeded_tensor(shape: Shape4, seed: u64) -> Tensor4 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor4::new(shape, values).unwrap()
}

fn seeded_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-10.0..10.0)).collect()
}

proptest! {
    /// The reported output extent must equal the number of kernel placements
    /// that actually fit, counted by sliding the window one step at a time.
    #[test]
    fn conv_shape_matches_sliding_window_count(
        h in 1usize..12,
        w in 1usize..12,
        k in prop::sample::select(vec![1usize, 3, 5]),
        s in 1usize..4,
        p in 0usize..3,
        seed in any::<u64>(),
    ) {
        prop_assume!(h + 2 * p >= k && w + 2 * p >= k);
        let placements = |d: usize| (0..).take_while(|y| y * s + k <= d + 2 * p).count();
        let input = seeded_tensor(Shape4::new(1, 1, h, w), seed);
        let weights = seeded_tensor(Shape4::new(1, 1, k, k), seed ^ 1);
        let out = conv2d_raw(&input, &weights, &[0.0], s, p).unwrap();
        prop_assert_eq!(
            out.shape(),
            Shape4::new(1, 1, placements(h), placements(w))
        );
    }

    /// Convolution with zero bias is linear in its input.
    #[test]
    fn conv_is_linear_in_the_input(
        seed in any::<u64>(),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        let shape = Shape4::new(1, 2, 6, 6);
        let x = seeded_tensor(shape, seed);
        let y = seeded_tensor(shape, seed ^ 2);
        let weights = seeded_tensor(Shape4::new(2, 2, 3, 3), seed ^ 3);
        let bias = [0.0, 0.0];

        let mixed_values: Vec<f64> = x
            .values()
            .iter()
            .zip(y.values())
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        let mixed = Tensor4::new(shape, mixed_values).unwrap();

        let conv_mixed = conv2d_raw(&mixed, &weights, &bias, 1, 1).unwrap();
        let conv_x = conv2d_raw(&x, &weights, &bias, 1, 1).unwrap();
        let conv_y = conv2d_raw(&y, &weights, &bias, 1, 1).unwrap();
        for ((&m, &a), &b) in conv_mixed
            .values()
            .iter()
            .zip(conv_x.values())
            .zip(conv_y.values())
        {
            prop_assert!((m - (alpha * a + beta * b)).abs() < 1e-10);
        }
    }

    /// Both correlation coefficients live in [-1, 1] whenever defined.
    #[test]
    fn correlations_stay_in_range(
        len in 2usize..12,
        seed in any::<u64>(),
    ) {
        let x = seeded_vec(len, seed);
        let y = seeded_vec(len, seed ^ 5);
        prop_assume!(x.windows(2).any(|w| w[0] != w[1]));
        prop_assume!(y.windows(2).any(|w| w[0] != w[1]));
        let lcc = pearson_lcc(&x, &y).unwrap();
        let srocc = spearman_srocc(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&lcc));
        prop_assert!((-1.0..=1.0).contains(&srocc));
        prop_assert_eq!(spearman_srocc(&x, &x).unwrap(), 1.0);
    }

    /// Average fractional ranks always sum to n(n+1)/2, ties or not.
    #[test]
    fn ranks_sum_is_invariant(
        len in 1usize..10,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // coarse grid forces ties often
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(0..4) as f64).collect();
        let total: f64 = average_ranks(&v).iter().sum();
        prop_assert_eq!(total, (len * (len + 1)) as f64 / 2.0);
    }

    /// PSNR is symmetric in its arguments, bit for bit.
    #[test]
    fn psnr_is_symmetric(seed in any::<u64>()) {
        let shape = Shape4::new(1, 1, 5, 7);
        let a = seeded_tensor(shape, seed);
        let b = seeded_tensor(shape, seed ^ 7);
        prop_assert_eq!(
            psnr(&a, &b, 1.0).unwrap().to_bits(),
            psnr(&b, &a, 1.0).unwrap().to_bits()
        );
    }

    /// The restorer preserves the spatial extent of any input whose sides
    /// divide by the downsample factor.
    #[test]
    fn restorer_preserves_divisible_shapes(
        blocks_h in 1usize..5,
        blocks_w in 1usize..5,
        seed in any::<u64>(),
    ) {
        let cfg = NetworkConfig {
            encoder_channels: vec![2, 2],
            ..NetworkConfig::default()
        };
        let net = build_network(&cfg, NetworkRole::Restorer).unwrap();
        let factor = cfg.downsample_factor();
        let shape = Shape4::new(1, 1, blocks_h * factor, blocks_w * factor);
        let frame = seeded_tensor(shape, seed);
        let restored = net.restore_frame(&frame).unwrap();
        prop_assert_eq!(restored.shape(), shape);
    }
}
