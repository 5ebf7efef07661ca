mod common;

use proptest::prelude::*;

use common::{exhaustive_knn, naive_matmul, naive_transpose};
use parafac2::analysis::{knn, similarity, similarity_matrix};
use parafac2::linalg::random::Sampler;
use parafac2::linalg::{khatri_rao, pinv_small, RsvdParams};
use parafac2::{compress, greedy_partition, DenseMatrix, Executor, IrregularTensor};

fn matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    Sampler::new(seed).gaussian(rows, cols)
}

fn close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
    let scale = 1.0 + b.max_abs();
    a.max_abs_diff(b) <= tol * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn archive_round_trip(
        rows in prop::collection::vec(1usize..8, 1..6),
        cols in 1usize..6,
        seed in any::<u64>(),
        scale in prop::sample::select(vec![1e-300, 1e-8, 1.0, 1e8, 1e300]),
    ) {
        let mut rng = Sampler::new(seed);
        let slices = rows.iter().map(|&i| rng.gaussian(i, cols).scale(scale)).collect();
        let x = IrregularTensor::new(slices).unwrap();
        let mut buf = Vec::new();
        x.write_archive(&mut buf).unwrap();
        let y = IrregularTensor::read_archive(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(y.row_counts(), x.row_counts());
        for (a, b) in x.slices().iter().zip(y.slices()) {
            prop_assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn truncated_archive_is_rejected(
        rows in prop::collection::vec(1usize..5, 1..4),
        cut in 1usize..64,
        seed in any::<u64>(),
    ) {
        let mut rng = Sampler::new(seed);
        let x = IrregularTensor::new(rows.iter().map(|&i| rng.gaussian(i, 3)).collect()).unwrap();
        let mut buf = Vec::new();
        x.write_archive(&mut buf).unwrap();
        let keep = buf.len().saturating_sub(cut);
        prop_assert!(IrregularTensor::read_archive(&mut &buf[..keep]).is_err());
    }

    #[test]
    fn partition_covers_every_slice_once(
        rows in prop::collection::vec(1usize..500, 1..60),
        workers in 1usize..9,
    ) {
        let plan = greedy_partition(&rows, workers);
        let mut seen: Vec<usize> = plan.sets.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..rows.len()).collect::<Vec<_>>());
        for (set, load) in plan.sets.iter().zip(&plan.loads) {
            prop_assert_eq!(set.iter().map(|&k| rows[k]).sum::<usize>(), *load);
        }
        prop_assert!(plan.imbalance() <= *rows.iter().max().unwrap());
    }

    #[test]
    fn pinv_satisfies_penrose_conditions(n in 1usize..7, rank in 1usize..7, seed in any::<u64>()) {
        let rank = rank.min(n);
        let b = matrix(n, rank, seed);
        let c = matrix(rank, n, seed ^ 1);
        let a = naive_matmul(&b, &c);
        let p = pinv_small(&a).unwrap();
        let apa = naive_matmul(&naive_matmul(&a, &p), &a);
        let pap = naive_matmul(&naive_matmul(&p, &a), &p);
        let ap = naive_matmul(&a, &p);
        let pa = naive_matmul(&p, &a);
        prop_assert!(close(&apa, &a, 1e-8));
        prop_assert!(close(&pap, &p, 1e-8));
        prop_assert!(close(&ap, &naive_transpose(&ap), 1e-8));
        prop_assert!(close(&pa, &naive_transpose(&pa), 1e-8));
    }

    #[test]
    fn khatri_rao_matches_definition(i in 1usize..6, j in 1usize..6, r in 1usize..5, seed in any::<u64>()) {
        let a = matrix(i, r, seed);
        let b = matrix(j, r, seed ^ 7);
        let kr = khatri_rao(&a, &b).unwrap();
        prop_assert_eq!(kr.shape(), (i * j, r));
        for p in 0..i {
            for q in 0..j {
                for c in 0..r {
                    prop_assert_eq!(kr[(p * j + q, c)], a[(p, c)] * b[(q, c)]);
                }
            }
        }
    }

    #[test]
    fn gemm_matches_triple_loop(m in 1usize..9, k in 1usize..9, n in 1usize..9, seed in any::<u64>()) {
        let a = matrix(m, k, seed);
        let b = matrix(k, n, seed ^ 3);
        prop_assert!(close(&a.matmul(&b), &naive_matmul(&a, &b), 1e-12));
        prop_assert!(close(&a.t_matmul(&a), &naive_matmul(&naive_transpose(&a), &a), 1e-12));
        prop_assert!(close(&b.matmul_t(&b), &naive_matmul(&b, &naive_transpose(&b)), 1e-12));
    }

    #[test]
    fn knn_matches_exhaustive_search(
        scores in prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 0.5, 0.75, 1.0]), 1..30),
        target in 0usize..30,
        k in 0usize..30,
    ) {
        let target = target % scores.len();
        let k = k.min(scores.len() - 1);
        prop_assert_eq!(knn(&scores, target, k).unwrap(), exhaustive_knn(&scores, target, k));
    }

    #[test]
    fn similarity_is_a_symmetric_kernel(n in 1usize..6, rows in 1usize..6, seed in any::<u64>()) {
        let mut rng = Sampler::new(seed);
        let us: Vec<DenseMatrix> = (0..n).map(|_| rng.gaussian(rows, 2)).collect();
        let s = similarity_matrix(&us, 0.01, &Executor::new(2)).unwrap();
        for i in 0..n {
            prop_assert_eq!(s[(i, i)], 1.0);
            for j in 0..n {
                prop_assert_eq!(s[(i, j)], s[(j, i)]);
                prop_assert!(s[(i, j)] > 0.0 && s[(i, j)] <= 1.0);
                prop_assert_eq!(s[(i, j)], similarity(&us[i], &us[j], 0.01).unwrap());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn compression_ignores_partition_and_threads(
        rows in prop::collection::vec(6usize..20, 2..7),
        seed in any::<u64>(),
        workers in 2usize..5,
    ) {
        let mut rng = Sampler::new(seed);
        let x = IrregularTensor::new(rows.iter().map(|&i| rng.gaussian(i, 8)).collect()).unwrap();
        let params = RsvdParams::new(3, seed);
        let serial = compress(&x, &params, &greedy_partition(&x.row_counts(), 1), &Executor::new(1)).unwrap();
        let parallel =
            compress(&x, &params, &greedy_partition(&x.row_counts(), workers), &Executor::new(workers)).unwrap();
        for k in 0..x.num_slices() {
            prop_assert_eq!(serial.a(k).as_slice(), parallel.a(k).as_slice());
        }
        prop_assert_eq!(serial.d().as_slice(), parallel.d().as_slice());
        prop_assert_eq!(serial.e(), parallel.e());
        prop_assert_eq!(serial.f().as_slice(), parallel.f().as_slice());
    }

    #[test]
    fn compressed_slices_have_orthonormal_bases(
        rows in prop::collection::vec(5usize..15, 1..5),
        seed in any::<u64>(),
    ) {
        let mut rng = Sampler::new(seed);
        let x = IrregularTensor::new(rows.iter().map(|&i| rng.gaussian(i, 6)).collect()).unwrap();
        let c = compress(&x, &RsvdParams::new(3, seed), &greedy_partition(&x.row_counts(), 1), &Executor::new(1))
            .unwrap();
        for k in 0..x.num_slices() {
            prop_assert!(common::gram_deviation(c.a(k)) < 1e-10);
        }
        prop_assert!(common::gram_deviation(c.d()) < 1e-10);
        let r = 3;
        let floats: usize = rows.iter().sum::<usize>() * r + rows.len() * r * r + 6 * r + r;
        prop_assert_eq!(c.float_count(), floats);
    }
}
