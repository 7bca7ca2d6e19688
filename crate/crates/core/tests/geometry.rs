use spinflow::geometry::*;
use spinflow::grid::*;
use spinflow::random::BandLimited;
use std::f64::consts::PI;

fn random_metric(n: usize, res: usize, seed: u64, amp: f64) -> (Sym2Field, BandLimited) {
    let mut rng = BandLimited::new(Grid::new(n, res).unwrap(), seed, 2).unwrap();
    (rng.metric(amp).unwrap(), rng)
}

fn conformal(res: usize, u: impl Fn([f64; 3]) -> f64) -> (Sym2Field, ScalarField) {
    let grid = Grid::new(2, res).unwrap();
    let u = ScalarField::from_fn(grid, u);
    let mut g = TensorField::identity_metric(grid);
    for i in [0, 3] {
        g.comps[i] = u.data.iter().map(|v| (2.0 * v).exp()).collect();
    }
    (g, u)
}

#[test]
fn frame_examples() {
    let grid = Grid::new(2, 8).unwrap();
    let frames = orthonormal_frame(&TensorField::identity_metric(grid)).unwrap();
    assert!(frames.iter().all(|e| (0..2).all(|i| (0..2).all(|a| (e[i][a] - (i == a) as u8 as f64).abs() < 1e-15))));
    let mut g = TensorField::identity_metric(grid);
    g.comps[0] = vec![4.0; grid.len()];
    let e = &orthonormal_frame(&g).unwrap()[0];
    assert!((e[0][0] - 0.5).abs() < 1e-15 && e[1][0].abs() < 1e-15 && (e[1][1] - 1.0).abs() < 1e-15);
    for n in [2, 3] {
        let (g, _) = random_metric(n, 16, 3, 0.2);
        let geo = GeometryCache::new(&g).unwrap();
        assert!(geo.frame_defect() < 1e-12);
        let chol = GeometryCache::with_gauge(&g, &FrameGauge::Cholesky).unwrap();
        assert!(chol.frame_defect() < 1e-12);
    }
}

#[test]
fn christoffel_and_connection_of_a_conformal_metric() {
    let (g, u) = conformal(32, |x| 0.2 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
    let geo = GeometryCache::new(&g).unwrap();
    let du = [partial_derivative(&u, 0, Scheme::Spectral).unwrap(), partial_derivative(&u, 1, Scheme::Spectral).unwrap()];
    for p in 0..u.grid().len() {
        let (u1, u2) = (du[0].data[p], du[1].data[p]);
        let c = &geo.christoffel[p];
        assert!((c[0][0][0] - u1).abs() < 1e-10);
        assert!((c[1][0][0] + u2).abs() < 1e-10);
        assert!((c[0][0][1] - u2).abs() < 1e-10);
        // e_a = e^{-u}∂_a: ω_{i12} = Γ^2_{i1}
        let w = &geo.omega[p];
        assert!((w[0][0][1] + u2).abs() < 1e-10 && (w[1][0][1] - u1).abs() < 1e-10);
    }
}

#[test]
fn connection_forms_are_antisymmetric() {
    for n in [2, 3] {
        let (g, _) = random_metric(n, 16, 7, 0.2);
        for gauge in [FrameGauge::SymmetricRoot, FrameGauge::Cholesky] {
            let geo = GeometryCache::with_gauge(&g, &gauge).unwrap();
            let worst = geo.omega.iter().flat_map(|w| {
                (0..n).flat_map(move |i| (0..n).flat_map(move |a| (0..n).map(move |b| (w[i][a][b] + w[i][b][a]).abs())))
            });
            assert!(worst.fold(0.0, f64::max) < 1e-10);
        }
    }
}

#[test]
fn levi_civita_is_metric_compatible() {
    for n in [2, 3] {
        let (g, _) = random_metric(n, 16, 11, 0.2);
        let geo = GeometryCache::new(&g).unwrap();
        let mut worst: f64 = 0.0;
        for p in 0..g.grid().len() {
            let (gm, c, dg) = (&geo.metric[p], &geo.christoffel[p], &geo.dg[p]);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let conn: f64 = (0..n).map(|l| c[l][k][i] * gm[l][j] + c[l][k][j] * gm[i][l]).sum();
                        worst = worst.max((dg[k][i][j] - conn).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-10, "{worst:e}");
    }
}

#[test]
fn conformal_scalar_curvature() {
    let (g, u) = conformal(32, |x| 0.3 * (2.0 * PI * x[0]).cos() + 0.1 * (4.0 * PI * x[1]).sin());
    let geo = GeometryCache::new(&g).unwrap();
    let flat = GeometryCache::new(&TensorField::identity_metric(*u.grid())).unwrap();
    let lap = flat.laplacian(&u);
    for p in 0..u.grid().len() {
        let want = -2.0 * (-2.0 * u.data[p]).exp() * lap.data[p];
        assert!((geo.scalar.data[p] - want).abs() < 1e-8);
    }
    assert!(geo.frame_scalar_curvature().plus(&geo.scalar, -1.0).max_abs() < 1e-8 * geo.scalar.max_abs());
}

#[test]
fn gauss_bonnet_on_the_torus() {
    for seed in 0..4 {
        let (g, _) = random_metric(2, 32, seed, 0.2);
        let geo = GeometryCache::new(&g).unwrap();
        let v: Vec<f64> = (0..g.grid().len()).map(|p| geo.scalar.data[p] * geo.sqrt_det[p]).collect();
        let total = flat_integral(g.grid(), &v);
        assert!(total.abs() < 1e-7, "{total:e}");
        let (_, r) = curvature(&g).unwrap();
        assert!(r.plus(&geo.scalar, -1.0).max_abs() < 1e-14);
    }
}

#[test]
fn curvature_is_frame_gauge_invariant() {
    let (g, _) = random_metric(3, 32, 5, 0.2);
    let a = GeometryCache::new(&g).unwrap();
    let b = GeometryCache::with_gauge(&g, &FrameGauge::Cholesky).unwrap();
    let scale = a.scalar.max_abs();
    assert!(a.frame_scalar_curvature().plus(&b.frame_scalar_curvature(), -1.0).max_abs() < 2e-8 * scale);
    assert!(b.frame_scalar_curvature().plus(&b.scalar, -1.0).max_abs() < 2e-8 * scale);
    assert!(a.ric.plus(&b.ric, -1.0).max_abs() == 0.0);
}

#[test]
fn weighted_scalar_examples() {
    let grid = Grid::new(2, 32).unwrap();
    let flat = GeometryCache::new(&TensorField::identity_metric(grid)).unwrap();
    let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
    let w = weighted_scalar_ops(&flat, &f).unwrap();
    for p in 0..grid.len() {
        let x = 2.0 * PI * grid.position(p)[0];
        let want = -8.0 * PI * PI * x.sin() - 4.0 * PI * PI * x.cos().powi(2);
        assert!((w.r_f.data[p] - want).abs() < 1e-9);
    }
    let (g, mut rng) = random_metric(2, 32, 2, 0.2);
    let geo = GeometryCache::new(&g).unwrap();
    let c = weighted_scalar_ops(&geo, &ScalarField::constant(*g.grid(), 0.4)).unwrap();
    assert!(c.r_f.plus(&geo.scalar, -1.0).max_abs() < 1e-12);
    assert!(c.ric_f.plus(&geo.ric, -1.0).max_abs() < 1e-12);
    let phi = rng.scalar(1.0);
    assert!(c.laplacian_f(&geo, &phi).plus(&geo.laplacian(&phi), -1.0).max_abs() < 1e-12);
}

#[test]
fn weighted_curvature_identity() {
    for n in [2, 3] {
        let (g, mut rng) = random_metric(n, 16, 8, 0.15);
        let f = rng.scalar(0.5);
        let geo = GeometryCache::new(&g).unwrap();
        let w = weighted_scalar_ops(&geo, &f).unwrap();
        let lf = w.laplacian_f(&geo, &f);
        let rhs = geo.scalar.plus(&w.grad_f_sq, 1.0).plus(&lf, 2.0);
        assert!(w.r_f.plus(&rhs, -1.0).max_abs() < 1e-10 * w.r_f.max_abs());
        // the other sign of the Δ_f f term misses by 4Δ_f f
        let other = geo.scalar.plus(&w.grad_f_sq, 1.0).plus(&lf, -2.0);
        assert!(w.r_f.plus(&other, -1.0).plus(&lf, -4.0).max_abs() < 1e-10 * w.r_f.max_abs());
        assert!(lf.max_abs() > 0.1);
    }
}

#[test]
fn lie_derivative_examples() {
    let grid = Grid::new(2, 32).unwrap();
    let mut rng = BandLimited::new(grid, 4, 3).unwrap();
    let f = rng.scalar(1.0);
    let flat = GeometryCache::new(&TensorField::identity_metric(grid)).unwrap();
    let lie = flat.lie_derivative_metric(&flat.gradient(&f));
    assert!(lie.plus(&flat.hessian(&f), -2.0).max_abs() < 1e-10 * lie.max_abs());
    for n in [2, 3] {
        let (g, mut rng) = random_metric(n, 16, 6, 0.2);
        let geo = GeometryCache::new(&g).unwrap();
        let x = rng.vector(1.0);
        let l = geo.lie_derivative_metric(&x);
        let tr = geo.trace(&l);
        assert!(tr.plus(&geo.divergence_vector(&x), -2.0).max_abs() < 1e-10 * tr.max_abs());
        assert!(lie_derivative_metric(&x, &g).unwrap().plus(&l, -1.0).max_abs() < 1e-14);
    }
}

#[test]
fn deturck_vector_examples() {
    for n in [2, 3] {
        let (g, _) = random_metric(n, 16, 9, 0.2);
        assert!(deturck_vector(&g, &g).unwrap().max_abs() < 1e-14);
        let grid = *g.grid();
        let mut flat = TensorField::identity_metric(grid);
        flat.comps[0] = vec![2.0; grid.len()];
        let g0 = TensorField::identity_metric(grid);
        assert!(deturck_vector(&flat, &g0).unwrap().max_abs() < 1e-14);
        assert!(deturck_vector(&g, &g0).unwrap().max_abs() > 1e-3);
    }
}
