use invnet::rng::stream_rng;
use invnet::{concat, full_parallelize, identity_net, parallelize, LayerWeights, Network, SparseMatrix};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random network with the given architecture; about a quarter of the
/// entries are zero so nonzero counting is exercised.
fn random_net(rng: &mut ChaCha8Rng, arch: &[usize]) -> Network {
    let layers = arch
        .windows(2)
        .map(|w| {
            let trip: Vec<(usize, usize, f64)> = (0..w[1])
                .flat_map(|i| (0..w[0]).map(move |j| (i, j)))
                .filter_map(|(i, j)| {
                    if rng.random_bool(0.25) {
                        None
                    } else {
                        Some((i, j, rng.random_range(-1.5..1.5)))
                    }
                })
                .collect();
            let bias = (0..w[1])
                .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect();
            LayerWeights::new(SparseMatrix::from_triplets(w[1], w[0], trip), bias).unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}

fn random_arch(rng: &mut ChaCha8Rng, input: usize, output: usize, depth: usize) -> Vec<usize> {
    let mut arch = vec![input];
    for _ in 1..depth {
        arch.push(rng.random_range(1..7));
    }
    arch.push(output);
    arch
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * (1.0 + y.abs()))
}

#[test]
fn concat_matches_sequential_evaluation() {
    let mut rng = stream_rng(42, 0);
    let a = random_arch(&mut rng, 3, 2, 3);
    let b = random_arch(&mut rng, 4, 3, 2);
    let phi1 = random_net(&mut rng, &a);
    let phi2 = random_net(&mut rng, &b);
    let c = concat(&phi1, &phi2).unwrap();
    assert_eq!(c.depth(), 5);
    for _ in 0..1000 {
        let x = random_point(&mut rng, 4);
        let seq = phi1.realize(&phi2.realize(&x).unwrap()).unwrap();
        assert!(close(&c.realize(&x).unwrap(), &seq, 1e-12));
    }
}

#[test]
fn concat_with_identity_is_transparent() {
    let mut rng = stream_rng(1, 0);
    let phi = random_net(&mut rng, &[2, 5, 3]);
    let left = concat(&identity_net(3, 2).unwrap(), &phi).unwrap();
    let right = concat(&phi, &identity_net(2, 3).unwrap()).unwrap();
    for _ in 0..200 {
        let x = random_point(&mut rng, 2);
        let y = phi.realize(&x).unwrap();
        assert!(close(&left.realize(&x).unwrap(), &y, 1e-12));
        assert!(close(&right.realize(&x).unwrap(), &y, 1e-12));
    }
}

#[test]
fn parallelize_duplicates_and_matches_exactly() {
    let mut rng = stream_rng(2, 0);
    let phi = random_net(&mut rng, &[3, 4, 4, 2]);
    let other = random_net(&mut rng, &[3, 6, 2, 5]);
    let dup = parallelize(&phi, &phi).unwrap();
    assert_eq!(dup.output_dim(), 4);
    let p = parallelize(&phi, &other).unwrap();
    assert_eq!(p.weight_count(), phi.weight_count() + other.weight_count());
    assert_eq!(p.depth(), 3);
    for _ in 0..1000 {
        let x = random_point(&mut rng, 3);
        let y = phi.realize(&x).unwrap();
        let d = dup.realize(&x).unwrap();
        assert_eq!(&d[..2], &y[..]);
        assert_eq!(&d[2..], &y[..]);
        let mut want = y.clone();
        want.extend(other.realize(&x).unwrap());
        assert_eq!(p.realize(&x).unwrap(), want);
    }
}

#[test]
fn full_parallelize_counts_and_values() {
    let mut rng = stream_rng(3, 0);
    let phi1 = random_net(&mut rng, &[2, 3, 1]);
    let phi2 = random_net(&mut rng, &[3, 2, 2]);
    let fp = full_parallelize(&phi1, &phi2).unwrap();
    let (m, m1, m2) = (fp.metrics(), phi1.metrics(), phi2.metrics());
    assert_eq!(m.weights, m1.weights + m2.weights);
    assert_eq!(m.weights_first, m1.weights_first + m2.weights_first);
    assert_eq!(m.weights_last, m1.weights_last + m2.weights_last);
    assert_eq!(fp.input_dim(), 5);
    for _ in 0..1000 {
        let x1 = random_point(&mut rng, 2);
        let x2 = random_point(&mut rng, 3);
        let mut x = x1.clone();
        x.extend(&x2);
        let mut want = phi1.realize(&x1).unwrap();
        want.extend(phi2.realize(&x2).unwrap());
        assert_eq!(fp.realize(&x).unwrap(), want);
    }
}

#[test]
fn identity_net_is_exact_on_many_points() {
    let mut rng = stream_rng(4, 0);
    let net = identity_net(6, 5).unwrap();
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1e3..1e3)).collect();
        assert_eq!(net.realize(&x).unwrap(), x);
    }
}

#[test]
fn extend_depth_preserves_realization() {
    let mut rng = stream_rng(5, 0);
    let phi = random_net(&mut rng, &[3, 4, 2]);
    for target in [3usize, 6, 9] {
        let ext = phi.extend_depth(target).unwrap();
        assert_eq!(ext.depth(), target);
        for _ in 0..1000 {
            let x = random_point(&mut rng, 3);
            assert!(close(&ext.realize(&x).unwrap(), &phi.realize(&x).unwrap(), 1e-12));
        }
    }
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let mut rng = stream_rng(6, 0);
    let phi = random_net(&mut rng, &[4, 7, 3, 2]);
    let dir = std::env::temp_dir().join(format!("invnet-net-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("net.txt");
    phi.save(&path).unwrap();
    let back = Network::load(&path).unwrap();
    assert_eq!(back, phi);
    let sparse = concat(&identity_net(2, 4).unwrap(), &phi).unwrap();
    assert_eq!(Network::from_text(&sparse.to_text()).unwrap(), sparse);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn batch_realization_matches_pointwise() {
    let mut rng = stream_rng(7, 0);
    let phi = random_net(&mut rng, &[3, 5, 5, 2]);
    let n = 600;
    let pts = ndarray::Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
    let out = phi.realize_batch(&pts).unwrap();
    for i in 0..n {
        let y = phi.realize(&pts.row(i).to_vec()).unwrap();
        assert_eq!(out.row(i).to_vec(), y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn calculus_size_and_depth_laws(seed in any::<u64>(), d in 1usize..4, q in 1usize..4,
                                     l1 in 1usize..4, l2 in 1usize..4) {
        let mut rng = stream_rng(seed, 0);
        let mid = rng.random_range(1..4);
        let a1 = random_arch(&mut rng, mid, q, l1);
        let a2 = random_arch(&mut rng, d, mid, l2);
        let phi1 = random_net(&mut rng, &a1);
        let phi2 = random_net(&mut rng, &a2);
        let c = concat(&phi1, &phi2).unwrap();
        prop_assert_eq!(c.depth(), l1 + l2);
        prop_assert!(c.weight_count() <= 2 * phi1.weight_count() + 2 * phi2.weight_count());
        // refined bound: the junction duplicates only the interface layers
        prop_assert!(c.weight_count() <= phi1.weight_count() + phi2.weight_count()
            + phi1.metrics().weights_first + phi2.metrics().weights_last);

        let b = random_arch(&mut rng, mid, q, l1);
        let psi = random_net(&mut rng, &b);
        let p = parallelize(&phi1, &psi).unwrap();
        prop_assert_eq!(p.depth(), l1);
        prop_assert_eq!(p.weight_count(), phi1.weight_count() + psi.weight_count());
        let fp = full_parallelize(&phi1, &psi).unwrap();
        prop_assert_eq!(fp.weight_count(), phi1.weight_count() + psi.weight_count());

        let id = identity_net(d, l2).unwrap();
        prop_assert_eq!(id.depth(), l2);
        prop_assert!(id.weight_count() <= 2 * d * l2);

        for _ in 0..20 {
            let x = random_point(&mut rng, d);
            let seq = phi1.realize(&phi2.realize(&x).unwrap()).unwrap();
            prop_assert!(close(&c.realize(&x).unwrap(), &seq, 1e-12));
        }
    }

    #[test]
    fn hidden_scaling_is_positively_homogeneous(seed in any::<u64>(), scale in 0.01f64..50.0) {
        let mut rng = stream_rng(seed, 1);
        let phi = random_net(&mut rng, &[3, 5, 1]);
        // scale the hidden layer only: output ρ(cAx + cb) weighted by the last layer
        let mut layers = phi.layers().to_vec();
        let bias0: Vec<f64> = layers[0].bias.iter().map(|b| b * scale).collect();
        layers[0] = LayerWeights::new(layers[0].matrix.scaled(scale), bias0).unwrap();
        let last = phi.layers()[1].clone();
        let no_bias = LayerWeights::new(last.matrix.clone(), vec![0.0]).unwrap();
        layers[1] = no_bias.clone();
        let scaled = Network::new(layers).unwrap();
        let base = Network::new(vec![phi.layers()[0].clone(), no_bias]).unwrap();
        for _ in 0..20 {
            let x = random_point(&mut rng, 3);
            let a = scaled.realize(&x).unwrap()[0];
            let b = scale * base.realize(&x).unwrap()[0];
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()) * scale.max(1.0));
        }
    }

    #[test]
    fn realization_is_locally_linear(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 2);
        let phi = random_net(&mut rng, &[3, 6, 6, 1]);
        let x = random_point(&mut rng, 3);
        let dir = random_point(&mut rng, 3);
        let at = |t: f64| {
            let p: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            phi.realize(&p).unwrap()[0]
        };
        let h = 1e-4;
        let f0 = at(0.0);
        let s1 = (at(h) - f0) / h;
        let s2 = (at(h / 10.0) - f0) / (h / 10.0);
        // both steps lie on the same linear piece unless a kink sits within h
        let kink_near = {
            let s3 = (at(2.0 * h) - at(h)) / h;
            (s3 - s1).abs() > 1e-6 * (1.0 + s1.abs())
        };
        if !kink_near {
            prop_assert!((s1 - s2).abs() <= 1e-9 * (1.0 + f0.abs()));
        }
    }
}
