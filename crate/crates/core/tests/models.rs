use fedpp_core::linalg::{unvectorize, vectorize};
use fedpp_core::models::{
    forward_deep_linear, forward_two_layer, init_deep_linear, init_two_layer, square_loss, DeepLinearParams,
    LabeledBatch, Network, TwoLayerParams,
};
use fedpp_core::Matrix;
use proptest::prelude::*;

fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

fn relative_fd_error<P: Network<f64>>(p: &P, batch: &LabeledBatch<f64>, h: f64) -> f64 {
    let (_, grads) = p.loss_and_gradients(batch).unwrap();
    let base = p.tensors().to_vec();
    let (mut diff, mut norm) = (0.0, 0.0);
    for (i, g) in grads.iter().enumerate() {
        for e in 0..g.len() {
            let mut plus = base.clone();
            plus[i][e] += h;
            let mut minus = base.clone();
            minus[i][e] -= h;
            let fd = (p.with_tensors(plus).unwrap().loss(batch).unwrap()
                - p.with_tensors(minus).unwrap().loss(batch).unwrap())
                / (2.0 * h);
            diff += (fd - g[e]).powi(2);
            norm += g[e] * g[e];
        }
    }
    (diff / norm).sqrt()
}

#[test]
fn forward_matches_naive_products() {
    let p = init_deep_linear::<f64>(3, 5, 4, 2, 1).unwrap();
    let x = Matrix::from_fn(4, 6, |i, j| (i as f64 - j as f64) / 3.0);
    let mut h = x.clone();
    for w in p.tensors() {
        h = naive_matmul(w, &h);
    }
    let expected = h / (25.0f64 * 2.0).sqrt();
    let u = forward_deep_linear(&p, &x).unwrap();
    assert!((u - expected).abs().max() < 1e-12);
}

#[test]
fn single_layer_scale_is_inverse_sqrt_d_out() {
    let p = init_deep_linear::<f64>(1, 7, 3, 4, 2).unwrap();
    assert!((p.scale() - 0.5).abs() < 1e-15);
}

#[test]
fn two_layer_forward_by_hand() {
    let hidden = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let p = TwoLayerParams::from_parts(hidden, vec![1.0, -1.0]).unwrap();
    let x = Matrix::from_row_slice(2, 2, &[0.6, -0.6, 0.8, -0.8]);
    let u = forward_two_layer(&p, &x).unwrap();
    let s = 2.0f64.sqrt();
    assert!((u[(0, 0)] - 0.6 / s).abs() < 1e-15);
    assert!((u[(0, 1)] + 0.8 / s).abs() < 1e-15);
}

#[test]
fn deep_linear_gradients_match_finite_differences_across_depths() {
    for depth in 1..=4 {
        let p = init_deep_linear::<f64>(depth, 6, 3, 2, depth as u64).unwrap();
        let x = Matrix::from_fn(3, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 / 4.0 - 0.5);
        let y = Matrix::from_fn(2, 5, |i, j| (i + j) as f64 / 5.0);
        let b = LabeledBatch::new(x, y).unwrap();
        let e = relative_fd_error(&p, &b, 1e-6);
        assert!(e < 1e-6, "depth {depth}: {e}");
    }
}

#[test]
fn relu_gradients_match_finite_differences() {
    let p = init_two_layer::<f64>(32, 5, 4).unwrap();
    let x = Matrix::from_fn(5, 6, |i, j| ((i * 3 + j * 5) % 7) as f64 / 6.0 - 0.4);
    let pre = p.hidden() * &x;
    assert!(pre.iter().all(|z| z.abs() > 1e-4));
    let y = Matrix::from_fn(1, 6, |_, j| j as f64 / 6.0);
    let b = LabeledBatch::new(x, y).unwrap();
    assert!(relative_fd_error(&p, &b, 1e-7) < 1e-6);
}

#[test]
fn signs_are_not_trained() {
    let p = init_two_layer::<f64>(8, 3, 0).unwrap();
    assert_eq!(p.tensors().len(), 1);
    let q = p.with_tensors(vec![Matrix::zeros(8, 3)]).unwrap();
    assert_eq!(q.signs(), p.signs());
    assert!(p.signs().iter().all(|&a| a == 1.0 || a == -1.0));
}

#[test]
fn loss_is_half_squared_frobenius() {
    let u = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let y = Matrix::zeros(2, 2);
    assert!((square_loss(&u, &y).unwrap() - 15.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vec_of_product_is_kronecker_times_vec(a in matrix(2, 3), c in matrix(3, 4), b in matrix(4, 2)) {
        let lhs = vectorize(&(&a * &c * &b));
        let rhs = b.transpose().kronecker(&a) * vectorize(&c);
        prop_assert!((lhs - rhs).abs().max() < 1e-10);
    }

    #[test]
    fn vectorize_round_trips(m in matrix(3, 5)) {
        let v = vectorize(&m);
        prop_assert_eq!(v[3], m[(0, 1)]);
        prop_assert_eq!(unvectorize(&v, 3, 5).unwrap(), m);
    }

    #[test]
    fn deep_linear_output_is_linear_in_inputs(
        x1 in matrix(3, 4),
        x2 in matrix(3, 4),
        a in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        let p = init_deep_linear::<f64>(3, 4, 3, 2, seed).unwrap();
        let lhs = p.output(&(&x1 * a + &x2)).unwrap();
        let rhs = p.output(&x1).unwrap() * a + p.output(&x2).unwrap();
        prop_assert!((lhs - rhs).abs().max() < 1e-9);
    }

    #[test]
    fn relu_output_is_positively_homogeneous(x in matrix(4, 3), c in 0.01f64..10.0, seed in 0u64..1000) {
        let p = init_two_layer::<f64>(16, 4, seed).unwrap();
        let lhs = p.output(&(&x * c)).unwrap();
        let rhs = p.output(&x).unwrap() * c;
        prop_assert!((lhs - rhs).abs().max() < 1e-9 * (1.0 + c));
    }

    #[test]
    fn f32_and_f64_init_agree(seed in 0u64..1000) {
        let a = init_deep_linear::<f64>(2, 3, 2, 2, seed).unwrap();
        let b = init_deep_linear::<f32>(2, 3, 2, 2, seed).unwrap();
        for (wa, wb) in a.tensors().iter().zip(b.tensors()) {
            for (x, y) in wa.iter().zip(wb.iter()) {
                prop_assert!((*x as f32 - *y).abs() <= 1e-6 * (1.0 + x.abs() as f32));
            }
        }
    }
}

#[test]
fn shape_mismatch_is_rejected() {
    let layers = vec![Matrix::zeros(3, 2), Matrix::zeros(2, 4)];
    assert!(DeepLinearParams::from_layers(layers).is_err());
    let p = init_deep_linear::<f64>(2, 3, 2, 1, 0).unwrap();
    assert!(p.output(&Matrix::zeros(3, 1)).is_err());
}
