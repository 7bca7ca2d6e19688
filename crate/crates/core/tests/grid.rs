use spinflow::geometry::{weighted_scalar_ops, GeometryCache};
use spinflow::grid::*;
use spinflow::io::Field;
use spinflow::random::BandLimited;
use std::f64::consts::PI;

fn random_scalar(res: usize, seed: u64) -> ScalarField {
    BandLimited::new(Grid::new(2, res).unwrap(), seed, 3).unwrap().scalar(1.0)
}

#[test]
fn fd4_converges_to_spectral_at_fourth_order() {
    let mut errs = Vec::new();
    for res in [16, 32, 64] {
        // same band-limited function sampled at each resolution
        let grid = Grid::new(2, res).unwrap();
        let phi = ScalarField::from_fn(grid, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).sin() + 0.5 * (4.0 * PI * x[0]).cos());
        let a = partial_derivative(&phi, 0, Scheme::Spectral).unwrap();
        let b = partial_derivative(&phi, 0, Scheme::Fd4).unwrap();
        errs.push(a.plus(&b, -1.0).max_abs());
    }
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate > 3.8 && rate < 4.3, "{errs:?}");
    }
}

#[test]
fn spectral_derivatives_commute() {
    let phi = random_scalar(32, 3);
    let xy = partial_derivative(&partial_derivative(&phi, 0, Scheme::Spectral).unwrap(), 1, Scheme::Spectral).unwrap();
    let yx = partial_derivative(&partial_derivative(&phi, 1, Scheme::Spectral).unwrap(), 0, Scheme::Spectral).unwrap();
    assert!(xy.plus(&yx, -1.0).max_abs() < 1e-10 * xy.max_abs().max(1.0));
    let xy = partial_derivative(&partial_derivative(&phi, 0, Scheme::Fd4).unwrap(), 1, Scheme::Fd4).unwrap();
    let yx = partial_derivative(&partial_derivative(&phi, 1, Scheme::Fd4).unwrap(), 0, Scheme::Fd4).unwrap();
    assert!(xy.plus(&yx, -1.0).max_abs() < 1e-10 * xy.max_abs().max(1.0));
}

#[test]
fn derivative_of_spinor_and_tensor_fields() {
    let grid = Grid::new(3, 16).unwrap();
    let chi = Spinor::new(num_complex::Complex64::new(0.3, 0.1), num_complex::Complex64::new(-0.2, 0.7));
    let psi = SpinorField::from_fn(grid, |x| chi * num_complex::Complex64::from_polar(1.0, 2.0 * PI * x[2]));
    let d = partial_derivative(&psi, 2, Scheme::Spectral).unwrap();
    let expect = psi.map_points(|_, v| v * num_complex::Complex64::new(0.0, 2.0 * PI));
    assert!(d.plus(&expect, -1.0).max_abs() < 1e-10);
    let mut t = TensorField::zeros(grid, 2);
    t.comps[4] = ScalarField::from_fn(grid, |x| (2.0 * PI * x[1]).cos()).data;
    let dt = partial_derivative(&t, 1, Scheme::Spectral).unwrap();
    let expect: Vec<f64> = (0..grid.len()).map(|p| -2.0 * PI * (2.0 * PI * grid.position(p)[1]).sin()).collect();
    assert!(dt.comps[4].iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-10));
    assert!(dt.comps[0].iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn quadrature_examples() {
    for n in [2, 3] {
        let grid = Grid::new(n, 8).unwrap();
        let one = ScalarField::constant(grid, 1.0);
        let m = weighted_measure(&TensorField::identity_metric(grid), &ScalarField::zeros(grid), 1.0 / (4.0 * PI)).unwrap();
        assert!((integrate(&one, &m).unwrap() - 1.0).abs() < 1e-14);
        let s = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        assert!(integrate(&s, &m).unwrap().abs() < 1e-15);
    }
    // conformal area e^{2u}: compare with 4× resolution
    let area = |res: usize| {
        let grid = Grid::new(2, res).unwrap();
        let u = ScalarField::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).sin());
        let mut g = TensorField::identity_metric(grid);
        for i in [0, 3] {
            g.comps[i] = u.data.iter().map(|v| (2.0 * v).exp()).collect();
        }
        let m = weighted_measure(&g, &ScalarField::zeros(grid), 1.0 / (4.0 * PI)).unwrap();
        integrate(&ScalarField::constant(grid, 1.0), &m).unwrap()
    };
    assert!((area(16) - area(64)).abs() < 1e-10);
}

#[test]
fn weighted_measure_examples() {
    let grid = Grid::new(2, 8).unwrap();
    let tau = 0.3;
    let m = weighted_measure(&TensorField::identity_metric(grid), &ScalarField::constant(grid, 0.7), tau).unwrap();
    let want = (4.0 * PI * tau).powf(-1.0) * (-0.7f64).exp();
    assert!(m.density.iter().all(|d| (d - want).abs() < 1e-15));
    let mut g = TensorField::identity_metric(grid);
    g.comps[0] = vec![4.0; grid.len()];
    let m = weighted_measure(&g, &ScalarField::zeros(grid), tau).unwrap();
    assert!(m.density.iter().all(|d| (d - 2.0 / (4.0 * PI * tau)).abs() < 1e-14));
    let a = ScalarField::constant(grid, 1.0);
    let b = ScalarField::from_fn(grid, |x| 2.0 + x[0]);
    let lin = integrate(&a.combine(2.0, &b, 3.0), &m).unwrap();
    assert!((lin - 2.0 * integrate(&a, &m).unwrap() - 3.0 * integrate(&b, &m).unwrap()).abs() < 1e-12);
    assert!(integrate(&b, &m).unwrap() > 0.0);
}

#[test]
fn weighted_laplacian_integrates_to_zero() {
    for (n, res) in [(2, 32), (3, 16)] {
        for seed in 0..3 {
            let grid = Grid::new(n, res).unwrap();
            let mut rng = BandLimited::new(grid, seed, 2).unwrap();
            let g = rng.metric(0.1).unwrap();
            let f = rng.scalar(0.5);
            let phi = rng.scalar(1.0);
            let geo = GeometryCache::new(&g).unwrap();
            let w = weighted_scalar_ops(&geo, &f).unwrap();
            let m = weighted_measure(&g, &f, 0.4).unwrap();
            let total = integrate(&w.laplacian_f(&geo, &phi), &m).unwrap();
            assert!(total.abs() < 1e-8 * phi.max_abs(), "n={n}: {total:e}");
        }
    }
}

#[test]
fn random_fields_contract() {
    let grid = Grid::new(2, 16).unwrap();
    let mut rng = BandLimited::new(grid, 9, 3).unwrap();
    assert_eq!(rng.scalar(0.0).max_abs(), 0.0);
    let g = rng.metric(0.0).unwrap();
    assert_eq!(g.plus(&TensorField::identity_metric(grid), -1.0).max_abs(), 0.0);
    let g = rng.metric(0.2).unwrap();
    let geo = GeometryCache::new(&g).unwrap();
    let min_eig = geo.metric.iter().map(|m| spinflow::linalg::min_eigenvalue(m, 2)).fold(f64::INFINITY, f64::min);
    assert!(min_eig >= 1.0 - 0.2 * 2.0);
    assert!(g.asymmetry() == 0.0);
    assert!(rng.metric(0.5).is_err());
    // spectral and fd4 agree to O(h⁴) on generated data
    let phi = BandLimited::new(Grid::new(2, 64).unwrap(), 1, 3).unwrap().scalar(1.0);
    let a = partial_derivative(&phi, 1, Scheme::Spectral).unwrap();
    let b = partial_derivative(&phi, 1, Scheme::Fd4).unwrap();
    assert!(a.plus(&b, -1.0).max_abs() < 2e-3 * a.max_abs());
}

#[test]
fn field_checkpoints_round_trip() {
    let dir = std::env::temp_dir().join(format!("spinflow-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let grid = Grid::new(3, 8).unwrap();
    let mut rng = BandLimited::new(grid, 4, 2).unwrap();
    let fields = [
        Field::Scalar(rng.scalar(1.0)),
        Field::Tensor(rng.vector(1.0)),
        Field::Tensor(rng.metric(0.1).unwrap()),
        Field::Spinor(rng.spinor(1.0)),
    ];
    for (i, f) in fields.iter().enumerate() {
        let stem = dir.join(format!("field{i}"));
        f.save(&stem).unwrap();
        assert_eq!(&Field::load(&stem).unwrap(), f);
        let header: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
        assert_eq!(header["n"], 3);
        assert_eq!(header["res"], 8);
    }
    let bytes = std::fs::read(dir.join("field0.bin")).unwrap();
    assert_eq!(bytes.len(), grid.len() * 8);
    std::fs::remove_dir_all(&dir).unwrap();
}
