use invnet::error::Error;
use invnet::forward::*;
use invnet::quadrature::QuadratureSpec;
use invnet::rng::stream_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn q() -> QuadratureSpec {
    QuadratureSpec::default_simpson()
}

fn c(v: f64) -> FunctionHandle {
    FunctionHandle::constant(v)
}

fn closure(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> FunctionHandle {
    FunctionHandle::new("test closure", vec![], f).unwrap()
}

/// Random smooth combination `offset + Σ c_k cos(π k x)` with `|c_k|` small
/// enough that the result stays above `offset / 2`.
fn random_smooth(rng: &mut ChaCha8Rng, offset: f64) -> FunctionHandle {
    let coeffs: Vec<f64> = (1..=4).map(|_| rng.random_range(-0.12..0.12) * offset).collect();
    closure(move |x| {
        offset + coeffs.iter().enumerate().map(|(k, c)| c * (std::f64::consts::PI * (k + 1) as f64 * x).cos()).sum::<f64>()
    })
}

/// Random hat combination on the mesh i/5 with kinks registered.
fn random_hats(rng: &mut ChaCha8Rng, offset: f64) -> FunctionHandle {
    let alpha: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
    let kinks = (0..=5).map(|i| i as f64 / 5.0).collect();
    FunctionHandle::new("hats", kinks, move |x| {
        offset + alpha.iter().enumerate().map(|(k, a)| a * (1.0 - (5.0 * x - (k + 1) as f64).abs()).max(0.0)).sum::<f64>()
    })
    .unwrap()
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
}

#[test]
fn function_handle_rejects_non_finite() {
    let e = FunctionHandle::new("pole", vec![], |x| if x == 0.0 { f64::NAN } else { x });
    assert!(matches!(e, Err(Error::Domain(_))));
}

#[test]
fn transmissivity_closed_forms() {
    let u = transmissivity_forward(&c(0.1), &c(1.0), 0.0, 0.0, 1.0, &q()).unwrap();
    assert!((u - 5.0).abs() < 1e-8);
    let u = transmissivity_forward(&c(1.0), &c(1.0), 0.0, 0.0, 0.5, &q()).unwrap();
    assert!((u - 0.125).abs() < 1e-12);
    let a = closure(|x| 0.3 + x);
    assert_eq!(transmissivity_forward(&a, &c(1.0), 0.2, 1.7, 0.0, &q()).unwrap(), 1.7);
    // c0, c1 enter as ∫ c0/a + c1
    let u = transmissivity_forward(&c(2.0), &c(0.0), 3.0, 1.0, 0.5, &q()).unwrap();
    assert!((u - (1.0 + 0.75)).abs() < 1e-12);
}

#[test]
fn transmissivity_rejects_nonpositive_coefficient() {
    let a = closure(|x| x - 0.5);
    assert!(matches!(transmissivity_forward(&a, &c(1.0), 0.0, 0.0, 1.0, &q()), Err(Error::Domain(_))));
    assert!(matches!(transmissivity_forward(&c(1.0), &c(1.0), 0.0, 0.0, 1.5, &q()), Err(Error::Domain(_))));
}

#[test]
fn eb_closed_forms() {
    let z = [0.0; 4];
    let u = eb_forward(&c(1.0), &c(1.0), &z, 1.0, &q()).unwrap();
    assert!((u - 1.0 / 24.0).abs() < 1e-12);
    assert_eq!(eb_forward(&c(1.0), &c(1.0), &[0.4, 1.0, 2.0, 3.0], 0.0, &q()).unwrap(), 0.4);
    let xs = grid(11);
    let one = eb_profile(&c(1.0), &c(1.0), &z, &xs, &q()).unwrap();
    let two = eb_profile(&c(2.0), &c(1.0), &z, &xs, &q()).unwrap();
    for (a, b) in one.iter().zip(&two) {
        assert!((a - 2.0 * b).abs() <= 1e-15);
    }
    // c3 s + c2 with a ≡ 1: ∫∫ (c3 s + c2) = c3 x³/6 + c2 x²/2
    let u = eb_forward(&c(1.0), &c(0.0), &[0.0, 0.0, 2.0, 6.0], 0.5, &q()).unwrap();
    assert!((u - (0.125 + 0.25)).abs() < 1e-12);
}

#[test]
fn volterra_closed_forms() {
    for t in [0.0, 0.3, 1.0] {
        assert!((volterra_forward(&c(1.0), t, &q()).unwrap() - t).abs() < 1e-14);
    }
    let v = volterra_forward(&closure(|s| s), 1.0, &q()).unwrap();
    assert!((v - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn frechet_closed_forms() {
    let d = transmissivity_frechet(&c(1.0), &c(1.0), &c(1.0), 1.0, &q()).unwrap();
    assert!((d + 0.5).abs() < 1e-12);
    assert_eq!(transmissivity_frechet(&c(1.0), &c(1.0), &c(0.0), 1.0, &q()).unwrap(), 0.0);
    let d = eb_frechet(&c(1.0), &c(1.0), &c(1.0), 1.0, &q()).unwrap();
    assert!((d + 1.0 / 24.0).abs() < 1e-12);
    assert_eq!(eb_frechet(&c(1.0), &c(1.0), &c(0.0), 1.0, &q()).unwrap(), 0.0);
    let d = volterra_frechet(&c(1.0), &c(1.0), 1.0, &q()).unwrap();
    assert!((d - 2.0).abs() < 1e-12);
    assert_eq!(volterra_frechet(&c(1.0), &c(0.0), 1.0, &q()).unwrap(), 0.0);
}

fn rel_close(fd: &[f64], exact: &[f64], tol: f64) -> bool {
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    fd.iter().zip(exact).all(|(a, b)| (a - b).abs() <= tol * scale.max(1e-300))
}

fn shifted(a: &FunctionHandle, da: &FunctionHandle, t: f64) -> FunctionHandle {
    FunctionHandle::combination(&[(1.0, a), (t, da)], 0.0).unwrap()
}

#[test]
fn frechet_matches_central_differences() {
    let mut rng = stream_rng(11, 0);
    let xs = grid(9);
    let t = 1e-5;
    let quad = q();
    for trial in 0..20 {
        let a = if trial % 2 == 0 { random_hats(&mut rng, 0.1) } else { random_smooth(&mut rng, 0.6) };
        let da = random_hats(&mut rng, 0.0);
        let f = random_smooth(&mut rng, 1.0);
        let c0 = rng.random_range(0.0..0.5);

        let plus = transmissivity_profile(&shifted(&a, &da, t), &f, c0, 0.3, &xs, &quad).unwrap();
        let minus = transmissivity_profile(&shifted(&a, &da, -t), &f, c0, 0.3, &xs, &quad).unwrap();
        let fd: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * t)).collect();
        let exact = transmissivity_frechet_profile(&a, &f, c0, &da, &xs, &quad).unwrap();
        assert!(rel_close(&fd, &exact, 1e-5), "transmissivity trial {trial}: {fd:?} vs {exact:?}");

        let cs = [0.0, 0.1, rng.random_range(0.0..0.3), rng.random_range(0.0..0.3)];
        let plus = eb_profile(&shifted(&a, &da, t), &f, &cs, &xs, &quad).unwrap();
        let minus = eb_profile(&shifted(&a, &da, -t), &f, &cs, &xs, &quad).unwrap();
        let fd: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * t)).collect();
        let exact = eb_frechet_profile(&a, &f, &cs, &da, &xs, &quad).unwrap();
        assert!(rel_close(&fd, &exact, 1e-5), "beam trial {trial}");

        let u = random_smooth(&mut rng, 1.0);
        let plus = volterra_profile(&shifted(&u, &da, t), &xs, &quad).unwrap();
        let minus = volterra_profile(&shifted(&u, &da, -t), &xs, &quad).unwrap();
        let fd: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * t)).collect();
        let exact = volterra_frechet_profile(&u, &da, &xs, &quad).unwrap();
        assert!(rel_close(&fd, &exact, 1e-5), "volterra trial {trial}");
    }
}

#[test]
fn frechet_maps_are_linear() {
    let mut rng = stream_rng(12, 0);
    let xs = grid(7);
    let quad = q();
    for _ in 0..5 {
        let a = random_hats(&mut rng, 0.1);
        let f = random_smooth(&mut rng, 1.0);
        let d1 = random_hats(&mut rng, 0.0);
        let d2 = random_smooth(&mut rng, 0.5);
        let lam = rng.random_range(-2.0..2.0);
        let comb = FunctionHandle::combination(&[(1.0, &d1), (lam, &d2)], 0.0).unwrap();
        let check = |g: &dyn Fn(&FunctionHandle) -> Vec<f64>| {
            let (l, r1, r2) = (g(&comb), g(&d1), g(&d2));
            for i in 0..l.len() {
                let want = r1[i] + lam * r2[i];
                assert!((l[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        };
        check(&|d| transmissivity_frechet_profile(&a, &f, 0.2, d, &xs, &quad).unwrap());
        check(&|d| eb_frechet_profile(&a, &f, &[0.0, 0.0, 0.1, 0.2], d, &xs, &quad).unwrap());
        check(&|d| volterra_frechet_profile(&f, d, &xs, &quad).unwrap());
    }
}

#[test]
fn transmissivity_is_monotone_in_the_coefficient() {
    let mut rng = stream_rng(13, 0);
    let xs = grid(21);
    for _ in 0..10 {
        let a2 = random_hats(&mut rng, 0.1);
        let bump = random_hats(&mut rng, 0.0);
        let a1 = FunctionHandle::combination(&[(1.0, &a2), (1.0, &bump)], 0.01).unwrap();
        let f = closure(|x| 1.0 + x * x);
        let u1 = transmissivity_profile(&a1, &f, 0.0, 0.0, &xs, &q()).unwrap();
        let u2 = transmissivity_profile(&a2, &f, 0.0, 0.0, &xs, &q()).unwrap();
        assert!(u1.iter().zip(&u2).all(|(a, b)| a <= b));
    }
}

#[test]
fn doubling_quadrature_nodes_changes_little() {
    let mut rng = stream_rng(14, 0);
    let xs = grid(20);
    let quad = q();
    let fine = quad.refined();
    for _ in 0..5 {
        let a = random_hats(&mut rng, 0.1);
        let f = c(1.0);
        let diff = |u: Vec<f64>, v: Vec<f64>| u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d = diff(
            transmissivity_profile(&a, &f, 0.0, 0.0, &xs, &quad).unwrap(),
            transmissivity_profile(&a, &f, 0.0, 0.0, &xs, &fine).unwrap(),
        );
        assert!(d <= 1e-8, "transmissivity {d:e}");
        let d = diff(eb_profile(&a, &f, &[0.0; 4], &xs, &quad).unwrap(), eb_profile(&a, &f, &[0.0; 4], &xs, &fine).unwrap());
        assert!(d <= 1e-8, "beam {d:e}");
        let u = random_smooth(&mut rng, 1.0);
        let d = diff(volterra_profile(&u, &xs, &quad).unwrap(), volterra_profile(&u, &xs, &fine).unwrap());
        assert!(d <= 1e-8, "volterra {d:e}");
    }
    let geom = GravGeometry::default();
    let g = QuadratureSpec::default_gauss();
    for p in geom.boundary_points(5).unwrap() {
        let a = grav_cell_potentials(p, &geom, &g).unwrap();
        let b = grav_cell_potentials(p, &geom, &g.refined()).unwrap();
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() <= 1e-8);
        }
    }
}

#[test]
fn transmissivity_round_trips() {
    let n = 1025;
    let xs = grid(n);
    let u = transmissivity_profile(&c(0.1), &c(1.0), 0.0, 0.0, &xs, &q()).unwrap();
    let a = transmissivity_inverse(&u, &c(1.0), 0.0).unwrap();
    assert_eq!(a.len(), n - 2);
    assert!(a.iter().all(|v| (v - 0.1).abs() <= 1e-4));

    let half: Vec<f64> = xs.iter().map(|x| x * x / 2.0).collect();
    let a = transmissivity_inverse(&half, &c(1.0), 0.0).unwrap();
    assert!(a.iter().all(|v| (v - 1.0).abs() <= 1e-9));

    let mut rng = stream_rng(15, 0);
    for _ in 0..5 {
        let a = random_smooth(&mut rng, 0.5);
        let f = random_smooth(&mut rng, 1.0);
        let u = transmissivity_profile(&a, &f, 0.1, 0.0, &xs, &q()).unwrap();
        let rec = transmissivity_inverse(&u, &f, 0.1).unwrap();
        let err = rec.iter().zip(&xs[1..n - 1]).map(|(r, x)| (r - a.eval(*x)).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-3, "smooth round trip {err:e}");
    }
    // hat coefficients: exact away from kinks, limited by h·|slope jump| next to them
    let a = random_hats(&mut rng, 0.1);
    let u = transmissivity_profile(&a, &c(1.0), 0.0, 0.0, &xs, &q()).unwrap();
    let rec = transmissivity_inverse(&u, &c(1.0), 0.0).unwrap();
    for (r, x) in rec.iter().zip(&xs[1..n - 1]) {
        let near_kink = (0..=5).any(|i| (x - i as f64 / 5.0).abs() < 1.5 / (n - 1) as f64);
        if !near_kink {
            assert!((r - a.eval(*x)).abs() <= 1e-3);
        }
    }
}

#[test]
fn eb_round_trips() {
    let n = 1025;
    let xs = grid(n);
    let u = eb_profile(&c(1.0), &c(1.0), &[0.0; 4], &xs, &q()).unwrap();
    let a = eb_inverse(&u, &c(1.0), 0.0, 0.0).unwrap();
    assert_eq!(a.len(), n - 4);
    let err = a.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-3, "{err:e}");

    // u = 3x² has u'' = 6, so a(x) = (x²/2)/6
    let quad_u: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
    let a = eb_inverse(&quad_u, &c(1.0), 0.0, 0.0).unwrap();
    for (v, x) in a.iter().zip(&xs[2..n - 2]) {
        assert!((v - x * x / 12.0).abs() <= 1e-6);
    }

    let mut rng = stream_rng(16, 0);
    for _ in 0..5 {
        let a = random_smooth(&mut rng, 0.5);
        let cs = [0.0, 0.0, 0.05, 0.1];
        let u = eb_profile(&a, &c(1.0), &cs, &xs, &q()).unwrap();
        let rec = eb_inverse(&u, &c(1.0), cs[2], cs[3]).unwrap();
        let err = rec.iter().zip(&xs[2..n - 2]).map(|(r, x)| (r - a.eval(*x)).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-3, "smooth beam round trip {err:e}");
    }
}

#[test]
fn volterra_round_trips() {
    let n = 1025;
    let xs = grid(n);
    let u = volterra_inverse(&xs).unwrap();
    assert!(u.iter().all(|v| (v - 1.0).abs() <= 1e-6));
    // √(v′) next to t = 0 carries √(t² + h²/3) − t ≈ 0.155 h, so this needs h < 6.5e-4
    let fine = grid(2049);
    let cubic: Vec<f64> = fine.iter().map(|t| t.powi(3) / 3.0).collect();
    let u = volterra_inverse(&cubic).unwrap();
    for (v, t) in u.iter().zip(&fine[1..fine.len() - 1]) {
        assert!((v - t).abs() <= 1e-4);
    }
    let mut rng = stream_rng(17, 0);
    for _ in 0..5 {
        let u = random_smooth(&mut rng, 1.0);
        let v = volterra_profile(&u, &xs, &q()).unwrap();
        let rec = volterra_inverse(&v).unwrap();
        let err = rec.iter().zip(&xs[1..n - 1]).map(|(r, t)| (r - u.eval(*t)).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-3);
    }
}

#[test]
fn inverses_reject_degenerate_samples() {
    let flat = vec![2.0; 50];
    assert!(matches!(transmissivity_inverse(&flat, &c(1.0), 0.0), Err(Error::IllPosed(_))));
    let line: Vec<f64> = grid(50).iter().map(|x| 1.0 + 2.0 * x).collect();
    assert!(matches!(eb_inverse(&line, &c(1.0), 0.0, 0.0), Err(Error::IllPosed(_))));
    let down: Vec<f64> = grid(50).iter().map(|x| -x).collect();
    assert!(matches!(volterra_inverse(&down), Err(Error::IllPosed(_))));
}

/// ∫ over [−0.5, 0] × [0, 0.5] of ln|x − (−1, 1)|, evaluated in 30-digit
/// arithmetic.
const CELL0_FROM_CORNER: f64 = 0.014_671_332_850_356_258;
/// Same integrand over [0, 0.5] × [0, 0.5].
const CELL1_FROM_CORNER: f64 = 0.094_213_446_547_896_042;

#[test]
fn grav_regression_constants() {
    let geom = GravGeometry::default();
    for order in [16, 64] {
        let quad = QuadratureSpec::gauss(order).unwrap();
        let v = grav_forward(&[1.0, 0.0, 0.0, 0.0], [-1.0, 1.0], &geom, &quad).unwrap();
        assert!((v - CELL0_FROM_CORNER).abs() < 1e-13, "order {order}: {v}");
        let v = grav_forward(&[0.0, 1.0, 0.0, 0.0], [-1.0, 1.0], &geom, &quad).unwrap();
        assert!((v - CELL1_FROM_CORNER).abs() < 1e-13);
    }
}

#[test]
fn grav_symmetry_and_zero() {
    let geom = GravGeometry::default();
    let quad = QuadratureSpec::default_gauss();
    for p in geom.boundary_points(3).unwrap() {
        assert_eq!(grav_forward(&[0.0; 4], p, &geom, &quad).unwrap(), 0.0);
    }
    let a = grav_forward(&[1.0; 4], [-1.0, 1.0], &geom, &quad).unwrap();
    let b = grav_forward(&[1.0; 4], [1.0, -1.0], &geom, &quad).unwrap();
    assert!((a - b).abs() < 1e-14);
    assert!(matches!(grav_forward(&[1.0; 4], [-0.25, 0.25], &geom, &quad), Err(Error::Geometry(_))));
    assert!(matches!(grav_forward(&[1.0; 3], [-1.0, 1.0], &geom, &quad), Err(Error::Shape(_))));
}

#[test]
fn grav_is_linear_in_density() {
    let geom = GravGeometry::default();
    let quad = QuadratureSpec::default_gauss();
    let mut rng = stream_rng(18, 0);
    for p in geom.boundary_points(4).unwrap() {
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = grav_forward(&s, p, &geom, &quad).unwrap();
        let rhs = grav_forward(&a, p, &geom, &quad).unwrap() + grav_forward(&b, p, &geom, &quad).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn boundary_walk() {
    let geom = GravGeometry::default();
    let pts = geom.boundary_points(2).unwrap();
    let want = [[-1.0, 1.0], [-1.0, 0.0], [-1.0, -1.0], [0.0, -1.0], [1.0, -1.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    assert_eq!(pts, want);
    for d in [1, 5, 40] {
        let pts = geom.boundary_points(d).unwrap();
        assert_eq!(pts.len(), 4 * d);
        assert!(pts.iter().all(|p| geom.min_separation(*p) >= 0.5 - 1e-15));
    }
}

#[test]
fn grav_matrix_properties() {
    let geom = GravGeometry::default();
    let quad = QuadratureSpec::default_gauss();
    let d = 6;
    let m = grav_matrix(d, &geom, &quad).unwrap();
    let pts = geom.boundary_points(d).unwrap();
    assert_eq!(m.dim(), (4 * d, 4));
    let mut rng = stream_rng(19, 0);
    for _ in 0..5 {
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        for (i, p) in pts.iter().enumerate() {
            let direct = grav_forward(&a, *p, &geom, &quad).unwrap();
            let prod: f64 = (0..4).map(|k| m[[i, k]] * a[k]).sum();
            assert!((direct - prod).abs() < 1e-12);
        }
    }
    // 180° rotation maps cell k to cell 3 − k and sample j to j + 2D
    let n = 4 * d;
    for j in 0..n {
        for k in 0..4 {
            assert!((m[[j, k]] - m[[(j + 2 * d) % n, 3 - k]]).abs() < 1e-13);
        }
    }
    // the log kernel grows with distance: the nearest cell gives the smallest entry
    for (i, p) in pts.iter().enumerate() {
        let dist: Vec<f64> = geom.cells.iter().map(|c| {
            let cx = 0.5 * (c.x0 + c.x1);
            let cy = 0.5 * (c.y0 + c.y1);
            (cx - p[0]).hypot(cy - p[1])
        }).collect();
        let near = (0..4).min_by(|a, b| dist[*a].total_cmp(&dist[*b])).unwrap();
        let far = (0..4).max_by(|a, b| dist[*a].total_cmp(&dist[*b])).unwrap();
        if dist[far] - dist[near] > 1e-9 {
            assert!(m[[i, near]] < m[[i, far]]);
        }
    }
}

#[test]
fn grav_least_squares() {
    let geom = GravGeometry::default();
    let quad = QuadratureSpec::default_gauss();
    let d = 10;
    let m = grav_matrix(d, &geom, &quad).unwrap();
    let alpha = [0.3, 0.9, 0.1, 0.55];
    let b: Vec<f64> = (0..4 * d).map(|i| (0..4).map(|k| m[[i, k]] * alpha[k]).sum()).collect();
    let rec = grav_lsq_inverse(&b, &m).unwrap();
    for k in 0..4 {
        assert!((rec[k] - alpha[k]).abs() <= 1e-8);
    }
    assert!(grav_lsq_inverse(&vec![0.0; 4 * d], &m).unwrap().iter().all(|v| *v == 0.0));

    let trials = 100;
    let sigma = 1e-2;
    let mut rng = stream_rng(20, 0);
    let mut sum = [0.0; 4];
    let mut sq = [0.0; 4];
    for _ in 0..trials {
        let noisy: Vec<f64> = b.iter().map(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + sigma * e
        }).collect();
        let r = grav_lsq_inverse(&noisy, &m).unwrap();
        for k in 0..4 {
            sum[k] += r[k];
            sq[k] += r[k] * r[k];
        }
    }
    for k in 0..4 {
        let mean = sum[k] / trials as f64;
        let var = (sq[k] / trials as f64 - mean * mean) * trials as f64 / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - alpha[k]).abs() <= 3.0 * se, "component {k}: {mean} vs {} (se {se:e})", alpha[k]);
    }

    let mut rank1 = m.clone();
    for i in 0..4 * d {
        rank1[[i, 1]] = rank1[[i, 0]];
    }
    assert!(matches!(grav_lsq_inverse(&b, &rank1), Err(Error::RankDeficient(_))));
}
