use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visrec_autodiff::{finite_diff_check, Graph, NodeId, Result, Tensor};

fn random(rng: &mut ChaCha8Rng, shape: Vec<usize>, scale: f64) -> Tensor {
    let n = shape.iter().product();
    let v = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::param(shape, v).unwrap()
}

fn triple_loop(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a = random(&mut rng, vec![3, 4], 2.0);
        let b = random(&mut rng, vec![4, 2], 2.0);
        let expect = triple_loop(a.values(), b.values(), 3, 4, 2);
        let mut g = Graph::new();
        let (ia, ib) = (g.insert(a).unwrap(), g.insert(b).unwrap());
        let c = g.matmul(ia, ib).unwrap();
        for (x, y) in g.values(c).unwrap().iter().zip(&expect) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} vs {y}");
        }
    }
}

/// x[4,5] -> tanh(x W1 + b1) -> (.) W2 + b2 -> mse against y
fn two_layer(x: Vec<f64>, y: Vec<f64>) -> impl Fn(&mut Graph, &[NodeId]) -> Result<NodeId> {
    move |g, p| {
        let x = g.constant(vec![4, 5], x.clone())?;
        let y = g.constant(vec![4, 2], y.clone())?;
        let h = g.matmul(x, p[0])?;
        let h = g.add_bias(h, p[1])?;
        let h = g.tanh(h)?;
        let o = g.matmul(h, p[2])?;
        let o = g.add_bias(o, p[3])?;
        g.mse(o, y)
    }
}

#[test]
fn two_layer_network_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = vec![
            random(&mut rng, vec![5, 6], 0.8),
            random(&mut rng, vec![6], 0.5),
            random(&mut rng, vec![6, 2], 0.8),
            random(&mut rng, vec![2], 0.5),
        ];
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = finite_diff_check(two_layer(x, y), &params, 1e-5).unwrap();
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn relu_and_elementwise_paths_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = vec![random(&mut rng, vec![3, 4], 1.0), random(&mut rng, vec![3, 4], 1.0)];
    let loss = |g: &mut Graph, p: &[NodeId]| {
        let m = g.mul(p[0], p[1])?;
        let r = g.relu(m)?;
        let s = g.slice(r, 1, 3)?;
        let c = g.concat(&[s, p[0]])?;
        let flat = g.reshape(c, vec![20])?;
        let sc = g.scale(flat, 0.7)?;
        let t = g.tanh(sc)?;
        let sq = g.mul(t, t)?;
        g.sum(sq)
    };
    let err = finite_diff_check(loss, &params, 1e-6).unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn backward_is_linear_in_the_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = random(&mut rng, vec![3, 3], 1.0);
    let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y1: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y2: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (a, b) = (1.7, -0.4);

    let mut g = Graph::new();
    let wi = g.insert(w).unwrap();
    let xi = g.constant(vec![2, 3], x).unwrap();
    let t1 = g.constant(vec![2, 3], y1).unwrap();
    let t2 = g.constant(vec![2, 3], y2).unwrap();
    let h = g.matmul(xi, wi).unwrap();
    let h = g.tanh(h).unwrap();
    let l1 = g.mse(h, t1).unwrap();
    let l2 = g.mse(h, t2).unwrap();
    let s1 = g.scale(l1, a).unwrap();
    let s2 = g.scale(l2, b).unwrap();
    let both = g.concat(&[s1, s2]);
    // scalars have rank 0, so lift to [1] before concatenating
    assert!(both.is_err());
    let s1 = g.reshape(s1, vec![1]).unwrap();
    let s2 = g.reshape(s2, vec![1]).unwrap();
    let both = g.concat(&[s1, s2]).unwrap();
    let total = g.sum(both).unwrap();

    g.backward(l1).unwrap();
    let g1 = g.grad(wi).unwrap().to_vec();
    g.backward(l2).unwrap();
    let g2 = g.grad(wi).unwrap().to_vec();
    g.backward(total).unwrap();
    let gt = g.grad(wi).unwrap().to_vec();
    for i in 0..gt.len() {
        let expect = a * g1[i] + b * g2[i];
        assert!((gt[i] - expect).abs() <= 1e-10 * expect.abs().max(1e-12), "{i}");
    }
}

#[test]
fn identical_inputs_give_bit_identical_results() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = vec![
            random(&mut rng, vec![5, 6], 0.8),
            random(&mut rng, vec![6], 0.5),
            random(&mut rng, vec![6, 2], 0.8),
            random(&mut rng, vec![2], 0.5),
        ];
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = two_layer(x, y);
        let mut g = Graph::new();
        let ids: Vec<_> = params.into_iter().map(|p| g.insert(p).unwrap()).collect();
        let l = f(&mut g, &ids).unwrap();
        g.backward(l).unwrap();
        let mut bits = vec![g.item(l).unwrap().to_bits()];
        for id in ids {
            bits.extend(g.grad(id).unwrap().iter().map(|x| x.to_bits()));
        }
        bits
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_affine_tanh_chains_have_correct_gradients(
        seed in 0u64..10_000,
        rows in 1usize..4,
        inner in 1usize..5,
        cols in 1usize..4,
        use_relu in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = vec![
            random(&mut rng, vec![inner, cols], 1.0),
            random(&mut rng, vec![cols], 1.0),
        ];
        let x: Vec<f64> = (0..rows * inner).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = move |g: &mut Graph, p: &[NodeId]| {
            let xi = g.constant(vec![rows, inner], x.clone())?;
            let h = g.matmul(xi, p[0])?;
            let h = g.add_bias(h, p[1])?;
            let h = if use_relu {
                // shift away from the kink so finite differences stay valid
                let h = g.tanh(h)?;
                let sq = g.mul(h, h)?;
                g.relu(sq)?
            } else {
                g.tanh(h)?
            };
            let s = g.scale(h, 1.3)?;
            let sq = g.mul(s, s)?;
            g.sum(sq)
        };
        let err = finite_diff_check(loss, &params, 1e-5).unwrap();
        prop_assert!(err < 1e-4, "max rel err {}", err);
    }
}
