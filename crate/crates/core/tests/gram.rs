use std::f64::consts::PI;

use fedpp_core::analysis::{
    gram_h_infinity, gram_h_tkc, gram_p0, gram_p_tkc, spectrum, symmetric_spectrum,
};
use fedpp_core::data::synth_relu_dataset;
use fedpp_core::models::{init_deep_linear, init_two_layer, Network};
use fedpp_core::rng::{normals, stream, Purpose};
use fedpp_core::{DeepLinear, Matrix};
use proptest::prelude::*;

/// `C₁² Σ_i (A_iᵀA'_i)[s, s'] · (B_i B'_iᵀ)[j, j']` written out index by
/// index, with `A_i = W^{i−1:1}X` and `B_i = W^{L:i+1}`.
fn brute_force(g: &DeepLinear, l: &DeepLinear, x: &Matrix, xc: &Matrix) -> Matrix {
    let depth = g.depth();
    let d_out = g.d_out();
    let prefix = |p: &DeepLinear, i: usize, x: &Matrix| {
        let mut h = x.clone();
        for w in &p.tensors()[..i - 1] {
            h = w * h;
        }
        h
    };
    let suffix = |p: &DeepLinear, i: usize| {
        let w = p.tensors();
        let mut b = Matrix::identity(w[i - 1].nrows(), w[i - 1].nrows());
        for layer in &w[i..depth] {
            b = layer * b;
        }
        b
    };
    let (n, nc) = (x.ncols(), xc.ncols());
    let mut out = Matrix::zeros(n * d_out, nc * d_out);
    for i in 1..=depth {
        let (a, ac) = (prefix(g, i, x), prefix(l, i, xc));
        let (b, bc) = (suffix(g, i), suffix(l, i));
        for s in 0..n {
            for sc in 0..nc {
                let mut left = 0.0;
                for k in 0..a.nrows() {
                    left += a[(k, s)] * ac[(k, sc)];
                }
                for j in 0..d_out {
                    for jc in 0..d_out {
                        let mut right = 0.0;
                        for k in 0..b.ncols() {
                            right += b[(j, k)] * bc[(jc, k)];
                        }
                        out[(s * d_out + j, sc * d_out + jc)] += left * right;
                    }
                }
            }
        }
    }
    out * g.scale() * g.scale()
}

#[test]
fn kronecker_sum_matches_entrywise_formula() {
    for depth in 1..=3 {
        let g = init_deep_linear::<f64>(depth, 3, 2, 2, 10 + depth as u64).unwrap();
        let l = init_deep_linear::<f64>(depth, 3, 2, 2, 20 + depth as u64).unwrap();
        let x = Matrix::from_fn(2, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 1.2));
        let xc = x.columns(0, 2).into_owned();
        let p = gram_p_tkc(&g, &l, &x, &xc).unwrap();
        assert!((p - brute_force(&g, &l, &x, &xc)).abs().max() < 1e-10, "depth {depth}");
        assert!((gram_p0(&g, &x).unwrap() - brute_force(&g, &g, &x, &x)).abs().max() < 1e-10);
    }
}

#[test]
fn p0_is_symmetric_positive_semidefinite() {
    let p = init_deep_linear::<f64>(3, 16, 4, 3, 0).unwrap();
    let x = Matrix::from_fn(4, 6, |i, j| ((i * 5 + j * 2) % 7) as f64 - 3.0);
    let g = gram_p0(&p, &x).unwrap();
    let s = symmetric_spectrum(&g).unwrap();
    assert!(s.lambda_min.unwrap() > -1e-9 * s.lambda_max.unwrap());
    // rank(X) = 4, so only 4·d_out eigenvalues are nonzero.
    assert!(s.lambda_at_rank(12).unwrap() > 1e-6);
    assert!(s.lambda_at_rank(13).unwrap().abs() < 1e-8 * s.lambda_max.unwrap());
}

#[test]
fn h_infinity_two_by_two_eigenvalues() {
    let theta: f64 = 1.1;
    let x = Matrix::from_row_slice(2, 2, &[1.0, theta.cos(), 0.0, theta.sin()]);
    let h = gram_h_infinity(&x).unwrap();
    let off = theta.cos() * (PI - theta) / (2.0 * PI);
    assert!((h[(0, 1)] - off).abs() < 1e-14);
    let s = symmetric_spectrum(&h).unwrap();
    // roots of (1/2 − λ)² − off² = 0
    assert!((s.lambda_min.unwrap() - (0.5 - off.abs())).abs() < 1e-14);
    assert!((s.lambda_max.unwrap() - (0.5 + off.abs())).abs() < 1e-14);
}

#[test]
fn h_infinity_matches_monte_carlo() {
    let x = synth_relu_dataset::<f64>(4, 5, 1).unwrap().features().clone();
    let h = gram_h_infinity(&x).unwrap();
    let draws = 50_000;
    let mut rng = stream(99, Purpose::Perturbation, 1 << 41);
    let mut acc = Matrix::zeros(5, 5);
    for _ in 0..draws {
        let w = Matrix::from_vec(1, 4, normals::<f64, _>(&mut rng, 4));
        let on = (&w * &x).map(|z| if z >= 0.0 { 1.0 } else { 0.0 });
        acc += on.transpose() * on;
    }
    let mc = (x.transpose() * &x).component_mul(&acc) / draws as f64;
    assert!((h - mc).abs().max() < 1e-2);
}

#[test]
fn finite_width_gram_tends_to_h_infinity() {
    let x = synth_relu_dataset::<f64>(6, 5, 2).unwrap().features().clone();
    let p = init_two_layer::<f64>(20_000, 6, 3).unwrap();
    let h = gram_h_tkc(p.hidden(), p.hidden(), &x, &x).unwrap();
    assert!((h - gram_h_infinity(&x).unwrap()).abs().max() < 2e-2);
}

#[test]
fn h_infinity_of_antipodal_pair() {
    let x = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
    let h = gram_h_infinity(&x).unwrap();
    assert!(h[(0, 1)].abs() < 1e-15);
}

fn unit_columns(d: usize, n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, d * n)
        .prop_filter("nonzero columns", move |v| v.chunks(d).all(|c| c.iter().map(|a| a * a).sum::<f64>() > 1e-3))
        .prop_map(move |v| {
            let mut m = Matrix::from_vec(d, n, v);
            for mut c in m.column_iter_mut() {
                let norm = c.norm();
                c /= norm;
            }
            m
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn h_infinity_trace_is_half_n(x in unit_columns(3, 6)) {
        let h = gram_h_infinity(&x).unwrap();
        prop_assert!((h.trace() - 3.0).abs() < 1e-10);
        prop_assert!((&h - h.transpose()).abs().max() == 0.0);
    }

    #[test]
    fn h_infinity_is_positive_semidefinite(x in unit_columns(3, 5)) {
        let s = symmetric_spectrum(&gram_h_infinity(&x).unwrap()).unwrap();
        prop_assert!(s.lambda_min.unwrap() > -1e-12);
    }

    #[test]
    fn h_tkc_is_bounded_by_inner_products(x in unit_columns(3, 4), seed in 0u64..500) {
        let g = init_two_layer::<f64>(12, 3, seed).unwrap();
        let l = init_two_layer::<f64>(12, 3, seed + 1).unwrap();
        let h = gram_h_tkc(g.hidden(), l.hidden(), &x, &x).unwrap();
        let inner = x.transpose() * &x;
        for (a, b) in h.iter().zip(inner.iter()) {
            prop_assert!(a.abs() <= b.abs() + 1e-15);
        }
    }

    #[test]
    fn transposed_matrices_share_singular_values(
        v in prop::collection::vec(-3.0f64..3.0, 12),
    ) {
        let m = Matrix::from_vec(3, 4, v);
        let a = spectrum(&m).unwrap();
        let b = spectrum(&m.transpose()).unwrap();
        for (x, y) in a.singular_values.iter().zip(&b.singular_values) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + x));
        }
    }
}
