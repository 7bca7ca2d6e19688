use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinflow::clifford::*;
use spinflow::grid::Spinor;

fn random_spinor(rng: &mut ChaCha8Rng) -> Spinor {
    let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Spinor::new(c(), c())
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn relations_and_volume_element() {
    let rep2 = build_rep(2).unwrap();
    let id = Matrix2::<Complex64>::identity();
    assert!((rep2.gamma(0) * rep2.gamma(0) + id).norm() < 1e-15);
    assert!((rep2.gamma(0) * rep2.gamma(1) + rep2.gamma(1) * rep2.gamma(0)).norm() < 1e-15);
    let rep3 = build_rep(3).unwrap();
    assert_eq!(rep3.relation_defect(), 0.0);
    // γ₁γ₂γ₃ = i³ σxσyσz = −i · i·id = id
    let vol = rep3.gamma(0) * rep3.gamma(1) * rep3.gamma(2);
    let dense = (pauli_x() * pauli_y() * pauli_z()) * Complex64::new(0.0, 1.0).powi(3);
    assert!((vol - dense).norm() < 1e-15);
    assert!((vol - id).norm() < 1e-15);
    for rep in [&rep2, &rep3] {
        let sum = rep.gammas().iter().fold(Matrix2::zeros(), |acc, g| acc + g * g);
        assert!((sum + id * Complex64::new(rep.n() as f64, 0.0)).norm() < 1e-15);
    }
    assert!(build_rep(4).is_err());
}

#[test]
fn clifford_multiplication_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [2, 3] {
        let rep = build_rep(n).unwrap();
        assert_eq!(rep.clifford_vector(&vec![0.0; n], &random_spinor(&mut rng)).unwrap(), Spinor::zeros());
        for _ in 0..50 {
            let (v, w) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
            let (phi, psi) = (random_spinor(&mut rng), random_spinor(&mut rng));
            let vpsi = rep.clifford_vector(&v, &psi).unwrap();
            assert!(re_inner(&vpsi, &psi).abs() < 1e-15);
            let v2: f64 = v.iter().map(|x| x * x).sum();
            assert!((rep.clifford_vector(&v, &vpsi).unwrap() + psi * Complex64::new(v2, 0.0)).norm() < 1e-14);
            let lhs = inner(&rep.clifford_vector(&v, &phi).unwrap(), &psi) + inner(&phi, &vpsi);
            assert!(lhs.norm() < 1e-14);
            let vw = rep.two_form_action(&v, &w, &psi).unwrap();
            assert!(re_inner(&vw, &psi).abs() < 1e-15);
            assert!(rep.two_form_action(&v, &v, &psi).unwrap().norm() < 1e-15);
        }
        let (e1, e2): (Vec<f64>, Vec<f64>) = ((0..n).map(|i| (i == 0) as u8 as f64).collect(), (0..n).map(|i| (i == 1) as u8 as f64).collect());
        assert!((rep.two_form_matrix(&e1, &e2) - rep.gamma(0) * rep.gamma(1)).norm() < 1e-15);
        assert!(rep.two_form_action(&[1.0], &[0.0], &Spinor::zeros()).is_err());
    }
}

#[test]
fn observables_are_representation_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rep = build_rep(3).unwrap();
    // random unitary exp(iH)
    let h = {
        let a = Matrix2::from_fn(|_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (a + a.adjoint()) * Complex64::new(0.5, 0.0)
    };
    let eig = h.symmetric_eigen();
    let u = eig.eigenvectors
        * Matrix2::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, l)))
        * eig.eigenvectors.adjoint();
    let conj = rep.conjugated(&u);
    assert!(conj.relation_defect() < 1e-14);
    for _ in 0..20 {
        let (v, w) = (random_vec(&mut rng, 3), random_vec(&mut rng, 3));
        let psi = random_spinor(&mut rng);
        let upsi = u * psi;
        let a = re_inner(&psi, &(rep.two_form_matrix(&v, &w) * rep.vector_matrix(&v) * psi));
        let b = re_inner(&upsi, &(conj.two_form_matrix(&v, &w) * conj.vector_matrix(&v) * upsi));
        assert!((a - b).abs() < 1e-13);
        assert!(((rep.vector_matrix(&v) * psi).norm() - (conj.vector_matrix(&v) * upsi).norm()).abs() < 1e-14);
    }
}
