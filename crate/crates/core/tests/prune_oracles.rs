mod common;

use common::{random_dense, rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use spectral_impute::prune::{
    bernoulli_sparsify, channel_prune_l1, conv2d_via_matmul, conv_to_matrix, hard_threshold,
    signal_rearrange, sparsify_pc, ConvKernel, KeepPolicy, Signal, SparsifyParams,
};
use spectral_impute::DenseMatrix;

fn masked_deviation(a: &[f64], keep: u32) -> f64 {
    a.iter()
        .enumerate()
        .filter(|(i, _)| keep & (1 << i) == 0)
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn threshold_beats_every_equal_size_mask() {
    let masks: Vec<u32> = (0u32..1 << 16).filter(|m| m.count_ones() == 8).collect();
    assert_eq!(masks.len(), 12_870);
    for seed in 0..100 {
        let a = random_dense(&mut rng(seed), 4, 4);
        let ht = hard_threshold(&a, 0.5).unwrap();
        assert_eq!(ht.report.kept_count, 8);
        let best = masks
            .iter()
            .map(|&m| masked_deviation(a.as_slice(), m))
            .fold(f64::INFINITY, f64::min);
        assert!(ht.report.fro_norm_dev <= best + 1e-12, "seed {seed}");
    }
}

#[test]
fn threshold_ties_prefer_lower_index() {
    let a = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
    let s = hard_threshold(&a, 0.5).unwrap();
    assert_eq!(s.mask, vec![true, true, false, false]);
}

fn binomial_z(a: &DenseMatrix, p: f64, draws: u64, seed_base: u64) -> f64 {
    let mut sum = DenseMatrix::zeros(a.rows(), a.cols());
    for d in 0..draws {
        let s = bernoulli_sparsify(a, KeepPolicy::Constant { p }, seed_base + d).unwrap();
        sum.add_scaled(1.0, &s.matrix);
    }
    a.as_slice()
        .iter()
        .zip(sum.as_slice())
        .map(|(&v, &s)| {
            let se = (v * v * (1.0 / p - 1.0) / draws as f64).sqrt();
            (s / draws as f64 - v).abs() / se
        })
        .fold(0.0, f64::max)
}

#[test]
fn bernoulli_mean_is_unbiased() {
    // 4.5σ keeps the family-wise false alarm rate near 0.4% over 320 entries.
    for m in 0..5 {
        let a = random_dense(&mut rng(m), 8, 8);
        let z = binomial_z(&a, 0.5, 4_000, 10_000 * (m + 1));
        assert!(z < 4.5, "matrix {m}: z = {z}");
    }
}

#[test]
fn magnitude_policy_is_unbiased_in_expectation() {
    let a = random_dense(&mut rng(9), 6, 6);
    let draws = 4_000;
    let mut sum = DenseMatrix::zeros(6, 6);
    for d in 0..draws {
        let s = bernoulli_sparsify(&a, KeepPolicy::MagnitudeProportional { density: 0.3 }, d).unwrap();
        sum.add_scaled(1.0 / draws as f64, &s.matrix);
    }
    let probs = spectral_impute::prune::keep_probabilities(&a, KeepPolicy::MagnitudeProportional { density: 0.3 }).unwrap();
    for (k, (&v, &mean)) in a.as_slice().iter().zip(sum.as_slice()).enumerate() {
        let se = (v * v * (1.0 / probs[k] - 1.0) / draws as f64).sqrt();
        assert!((mean - v).abs() <= 4.5 * se + 1e-15, "entry {k}");
    }
}

#[test]
fn deviations_grow_with_sparsity() {
    let fractions = [0.20, 0.10, 0.05, 0.01];
    for seed in 0..3 {
        let a = random_dense(&mut rng(seed), 256, 256);
        let reps: Vec<_> = fractions.iter().map(|&f| hard_threshold(&a, f).unwrap().report).collect();
        for w in reps.windows(2) {
            assert!(w[1].fro_norm_dev >= w[0].fro_norm_dev);
            assert!(w[1].two_norm_dev >= w[0].two_norm_dev);
        }
    }
}

#[test]
fn permutations_commute_with_threshold() {
    let mut r = rng(12);
    for _ in 0..20 {
        let a = random_dense(&mut r, 7, 5);
        let mut rows: Vec<usize> = (0..7).collect();
        let mut cols: Vec<usize> = (0..5).collect();
        rows.shuffle(&mut r);
        cols.shuffle(&mut r);
        let permute = |m: &DenseMatrix| DenseMatrix::from_fn(7, 5, |i, j| m[(rows[i], cols[j])]);
        let direct = hard_threshold(&a, 0.4).unwrap();
        let via = hard_threshold(&permute(&a), 0.4).unwrap();
        assert_eq!(via.matrix, permute(&direct.matrix));
        assert!((via.report.two_norm_dev - direct.report.two_norm_dev).abs() < 1e-12);
        assert!((via.report.fro_norm_dev - direct.report.fro_norm_dev).abs() < 1e-12);
    }
}

#[test]
fn sparsify_degenerate_parameters() {
    let a = random_dense(&mut rng(13), 10, 8);
    let keep_all = sparsify_pc(&a, &SparsifyParams { c: 0.5, q: 0.0, svd_rank: 3, seed: 1 }).unwrap();
    assert_eq!(keep_all.matrix, a);

    let floor = sparsify_pc(&a, &SparsifyParams { c: 1.0, q: 0.6, svd_rank: 3, seed: 1 }).unwrap();
    assert_eq!(floor.report.kept_count, 80 - 48);
    let again = sparsify_pc(&a, &SparsifyParams { c: 1.0, q: 0.6, svd_rank: 3, seed: 99 }).unwrap();
    assert_eq!(floor, again);
    for (k, &kept) in floor.mask.iter().enumerate() {
        if kept {
            assert_eq!(floor.matrix.as_slice()[k], a.as_slice()[k]);
        }
    }
}

#[test]
fn sparsify_zero_threshold_is_flagged() {
    let mut a = DenseMatrix::zeros(4, 4);
    a[(0, 0)] = 2.0;
    a[(1, 1)] = 1.0;
    let s = sparsify_pc(&a, &SparsifyParams { c: 0.5, q: 0.5, svd_rank: 1, seed: 0 }).unwrap();
    assert!(s.report.zero_threshold);
    assert_eq!(s.matrix[(0, 0)], 2.0);
    assert_eq!(s.matrix[(1, 1)], 0.0);
}

#[test]
fn sparsify_is_reproducible_and_rescales_survivors() {
    let a = random_dense(&mut rng(14), 12, 12);
    let params = SparsifyParams { c: 0.3, q: 0.8, svd_rank: 4, seed: 5 };
    let x = sparsify_pc(&a, &params).unwrap();
    assert_eq!(x, sparsify_pc(&a, &params).unwrap());
    let changed = x
        .matrix
        .as_slice()
        .iter()
        .zip(a.as_slice())
        .filter(|(m, v)| **m != 0.0 && (*m - *v).abs() > 0.0)
        .count();
    for (m, v) in x.matrix.as_slice().iter().zip(a.as_slice()) {
        if *m != 0.0 {
            assert!(m.abs() >= v.abs() - 1e-15 && m.signum() == v.signum());
        }
    }
    assert!(changed > 0);
}

fn nested_conv(k: &ConvKernel, s: &Signal) -> Signal {
    let (oh, ow) = k.output_size(s.height, s.width).unwrap();
    let mut out = vec![0.0; k.out_channels * oh * ow];
    for o in 0..k.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for c in 0..k.in_channels {
                    for i in 0..k.kernel_size {
                        for j in 0..k.kernel_size {
                            let sy = (y * k.stride + i) as isize - k.padding as isize;
                            let sx = (x * k.stride + j) as isize - k.padding as isize;
                            if sy >= 0 && sx >= 0 && (sy as usize) < s.height && (sx as usize) < s.width {
                                acc += k.at(o, c, i, j) * s.at(c, sy as usize, sx as usize);
                            }
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    Signal::new(k.out_channels, oh, ow, out).unwrap()
}

fn random_vec(r: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

#[test]
fn unfolded_conv_matches_nested_loops() {
    let mut r = rng(15);
    for case in 0..100 {
        let (o, c) = (r.random_range(1..5), r.random_range(1..4));
        let ks = [1, 2, 3, 5][r.random_range(0..4)];
        let (h, w) = (r.random_range(ks..9), r.random_range(ks..9));
        let k = if case % 2 == 0 {
            ConvKernel::half_padded(o, c, ks, random_vec(&mut r, o * c * ks * ks)).unwrap()
        } else {
            ConvKernel::new(o, c, ks, random_vec(&mut r, o * c * ks * ks), r.random_range(1..4), r.random_range(0..3)).unwrap()
        };
        let s = Signal::new(c, h, w, random_vec(&mut r, c * h * w)).unwrap();
        let fast = conv2d_via_matmul(&k, &s).unwrap();
        let slow = nested_conv(&k, &s);
        assert_eq!((fast.channels, fast.height, fast.width), (slow.channels, slow.height, slow.width));
        let gap = fast.values.iter().zip(&slow.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-10, "case {case}: {gap}");
    }
}

#[test]
fn unfolding_shapes() {
    let k = ConvKernel::half_padded(4, 3, 3, vec![0.0; 108]).unwrap();
    assert_eq!(conv_to_matrix(&k).shape(), (27, 4));
    let s = Signal::new(3, 6, 6, vec![0.0; 108]).unwrap();
    assert_eq!(signal_rearrange(&s, &k).unwrap().shape(), (27, 36));
    assert!(signal_rearrange(&Signal::new(2, 6, 6, vec![0.0; 72]).unwrap(), &k).is_err());
}

#[test]
fn channel_prune_matches_full_ranking() {
    let mut r = rng(16);
    for _ in 0..20 {
        let k = ConvKernel::half_padded(8, 3, 3, random_vec(&mut r, 8 * 27)).unwrap();
        let (pruned, dropped, rep) = channel_prune_l1(&k, 0.25).unwrap();
        let mut mass: Vec<(f64, usize)> = (0..8).map(|o| (k.channel(o).iter().map(|v| v.abs()).sum(), o)).collect();
        mass.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut expect: Vec<usize> = mass[..2].iter().map(|m| m.1).collect();
        expect.sort_unstable();
        assert_eq!(dropped, expect);
        let fro = expect.iter().flat_map(|&o| k.channel(o)).map(|v| v * v).sum::<f64>().sqrt();
        assert!((rep.fro_norm_dev - fro).abs() < 1e-12);
        for o in 0..8 {
            let zeroed = pruned.channel(o).iter().all(|&v| v == 0.0);
            assert_eq!(zeroed, expect.contains(&o));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_keeps_exact_count(m in 1usize..10, n in 1usize..10, keep in 0.01f64..1.0, seed in any::<u64>()) {
        let a = random_dense(&mut rng(seed), m, n);
        let s = hard_threshold(&a, keep).unwrap();
        let expect = ((keep * (m * n) as f64) - 1e-9).ceil() as usize;
        prop_assert_eq!(s.report.kept_count, expect);
        prop_assert_eq!(s.mask.iter().filter(|&&k| k).count(), expect);
        let smallest_kept = s.mask.iter().zip(a.as_slice()).filter(|(k, _)| **k).map(|(_, v)| v.abs()).fold(f64::INFINITY, f64::min);
        let largest_dropped = s.mask.iter().zip(a.as_slice()).filter(|(k, _)| !**k).map(|(_, v)| v.abs()).fold(0.0, f64::max);
        prop_assert!(smallest_kept >= largest_dropped);
        prop_assert!(s.report.two_norm_dev <= s.report.fro_norm_dev + 1e-12);
    }

    #[test]
    fn sparsify_reports_are_consistent(q in 0.0f64..1.0, c in 0.0f64..1.0, seed in any::<u64>()) {
        let a = random_dense(&mut rng(seed), 9, 7);
        let s = sparsify_pc(&a, &SparsifyParams { c, q, svd_rank: 2, seed }).unwrap();
        let zeros = s.matrix.as_slice().iter().filter(|&&v| v == 0.0).count();
        prop_assert!((s.report.sparsity - zeros as f64 / 63.0).abs() < 1e-15);
        prop_assert_eq!(s.report.kept_count, s.mask.iter().filter(|&&k| k).count());
        prop_assert!(s.report.kept_count >= 63 - (63.0 * q) as usize);
    }
}
