mod common;

use proptest::prelude::*;
use token_insight::tensor::{gelu, layer_norm, linear, matmul, softmax_rows, Tensor};

fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i * n + j] += f64::from(a.data()[i * k + p]) * f64::from(b.data()[p * n + j]);
            }
        }
    }
    out
}

fn transpose(t: &Tensor) -> Tensor {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    let data = (0..c * r).map(|i| t.data()[(i % r) * c + i / r]).collect();
    Tensor::new(vec![c, r], data).unwrap()
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = common::rng(7);
    for _ in 0..20 {
        let a = common::random_tensor(&mut rng, vec![7, 5], 1.0);
        let b = common::random_tensor(&mut rng, vec![5, 3], 1.0);
        let got = matmul(&a, &b).unwrap();
        assert_eq!(got.shape(), &[7, 3]);
        for (g, w) in got.data().iter().zip(naive_matmul(&a, &b)) {
            assert!((f64::from(*g) - w).abs() < 1e-6, "{g} vs {w}");
        }
    }
}

#[test]
fn linear_is_matmul_with_transposed_weight_plus_bias() {
    let mut rng = common::rng(8);
    let x = common::random_tensor(&mut rng, vec![6, 9], 1.0);
    let w = common::random_tensor(&mut rng, vec![4, 9], 1.0);
    let b = common::random_tensor(&mut rng, vec![4], 1.0);
    let got = linear(&x, &w, &b).unwrap();
    let reference = matmul(&x, &transpose(&w)).unwrap();
    for (i, (g, r)) in got.data().iter().zip(reference.data()).enumerate() {
        assert!((g - (r + b.data()[i % 4])).abs() < 1e-5);
    }
}

#[test]
fn layer_norm_direct_formula() {
    let mut rng = common::rng(9);
    let x = common::random_tensor(&mut rng, vec![3, 16], 3.0);
    let g = common::random_tensor(&mut rng, vec![16], 1.0);
    let b = common::random_tensor(&mut rng, vec![16], 1.0);
    let got = layer_norm(&x, &g, &b, 1e-6).unwrap();
    for r in 0..3 {
        let row: Vec<f64> = x.row(r).iter().map(|&v| f64::from(v)).collect();
        let mean = row.iter().sum::<f64>() / 16.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
        for (c, &v) in row.iter().enumerate() {
            let want =
                (v - mean) / (var + 1e-6).sqrt() * f64::from(g.data()[c]) + f64::from(b.data()[c]);
            assert!((f64::from(got.row(r)[c]) - want).abs() < 1e-5);
        }
    }
}

/// Φ(1) by composite Simpson quadrature of the standard normal density.
fn normal_cdf_at_one() -> f64 {
    let n = 2000;
    let h = 1.0 / n as f64;
    let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(1.0);
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

#[test]
fn gelu_uses_exact_normal_cdf() {
    let want = normal_cdf_at_one();
    let got = gelu(&Tensor::vector(vec![1.0])).data()[0];
    assert!((f64::from(got) - want).abs() < 1e-6, "{got} vs {want}");
    // tanh approximation differs in the fourth decimal
    assert!((got - 0.841192).abs() > 1e-4);
}

#[test]
fn large_matmul_is_thread_count_invariant() {
    let mut rng = common::rng(10);
    let a = common::random_tensor(&mut rng, vec![96, 128], 1.0);
    let b = common::random_tensor(&mut rng, vec![128, 96], 1.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| matmul(&a, &b).unwrap())
    };
    let one = run(1);
    let eight = run(8);
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one), bits(&eight));
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-20.0f32..20.0, rows * cols)
        .prop_map(move |data| Tensor::new(vec![rows, cols], data).unwrap())
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(x in (1usize..6, 1usize..12).prop_flat_map(|(r, c)| matrix(r, c))) {
        let s = softmax_rows(&x);
        for r in 0..s.rows() {
            let row = s.row(r);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn softmax_shift_invariant(x in matrix(3, 7), shift in -50.0f32..50.0) {
        let shifted = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v + shift).collect()).unwrap();
        let (a, b) = (softmax_rows(&x), softmax_rows(&shifted));
        for (p, q) in a.data().iter().zip(b.data()) {
            prop_assert!((p - q).abs() < 1e-5);
        }
    }

    #[test]
    fn layer_norm_standardizes(x in matrix(4, 16)) {
        let ones = Tensor::vector(vec![1.0; 16]);
        let zeros = Tensor::vector(vec![0.0; 16]);
        let y = layer_norm(&x, &ones, &zeros, 1e-6).unwrap();
        for r in 0..4 {
            let row = x.row(r);
            let spread = row.iter().cloned().fold(f32::MIN, f32::max) - row.iter().cloned().fold(f32::MAX, f32::min);
            prop_assume!(spread > 1e-2);
            let out = y.row(r);
            let mean = out.iter().sum::<f32>() / 16.0;
            let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / 16.0;
            prop_assert!(mean.abs() < 1e-4);
            prop_assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn gelu_bounds(v in -30.0f32..30.0) {
        let g = gelu(&Tensor::vector(vec![v])).data()[0];
        prop_assert!(g >= -0.17 && g <= v.max(0.0) + 1e-6);
        if v > 0.0 {
            prop_assert!(g > 0.0);
        }
    }
}
