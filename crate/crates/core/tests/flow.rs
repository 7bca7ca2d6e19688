use num_complex::Complex64;
use spinflow::clifford::build_rep;
use spinflow::flow::*;
use spinflow::functionals::FlowConstants;
use spinflow::geometry::{deturck_vector, GeometryCache};
use spinflow::grid::{Grid, LinearField, ScalarField, Spinor, SpinorField, TensorField};
use spinflow::random::BandLimited;
use spinflow::spinor::{kosmann_lie, re_inner_field, SpinGeometry};
use spinflow::variation::first_variation_of;
use std::f64::consts::PI;

fn flat_state(n: usize, res: usize, lambda: f64) -> FlowState {
    let grid = Grid::new(n, res).unwrap();
    let tau = 0.5;
    let k = FlowConstants::new(tau, lambda, 2.0 * tau).unwrap();
    let g = TensorField::identity_metric(grid);
    let f = ScalarField::constant(grid, -(n as f64 / 2.0) * (4.0 * PI * tau).ln());
    let c = k.c;
    let psi = SpinorField::constant(grid, Spinor::new(Complex64::new(c.sqrt(), 0.0), Complex64::new(0.0, 0.0)));
    FlowState::new(g, f, psi, k).unwrap()
}

/// Random state with g₀ ≠ g; `unit` selects |ψ|² ≡ c.
fn random_state(n: usize, res: usize, seed: u64, unit: bool) -> FlowState {
    let grid = Grid::new(n, res).unwrap();
    let mut rng = BandLimited::new(grid, seed, 2).unwrap();
    let g = rng.metric(0.1).unwrap();
    let g0 = rng.metric(0.1).unwrap();
    let f = rng.scalar(0.3);
    let k = FlowConstants::new(0.7, 0.4, 1.6).unwrap();
    let psi = if unit {
        rng.unit_spinor(k.c, Spinor::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)), 0.5)
    } else {
        rng.spinor(1.0).map_points(|_, v| v + Spinor::new(Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)))
    };
    let mut s = FlowState::new(g, f, psi, k).unwrap();
    s.g0 = g0;
    s
}

#[test]
fn flat_critical_state_is_stationary() {
    for n in [2, 3] {
        let s = flat_state(n, 8, 0.0);
        for r in [ungauged_rhs(&s).unwrap(), gauged_rhs(&s).unwrap()] {
            assert!(r.g_dot.max_abs() < 1e-10 && r.f_dot.max_abs() < 1e-10 && r.psi_dot.max_abs() < 1e-10);
        }
        let next = step_rk4(&s, 1e-3).unwrap();
        assert!(next.g.plus(&s.g, -1.0).max_abs() < 1e-12);
        assert!(next.psi.plus(&s.psi, -1.0).max_abs() < 1e-12);
    }
}

#[test]
fn lambda_terms_on_flat_data() {
    let lambda = 0.8;
    let s = flat_state(2, 8, lambda);
    let tau = s.constants.tau;
    for r in [ungauged_rhs(&s).unwrap(), gauged_rhs(&s).unwrap()] {
        assert!(r.g_dot.plus(&s.g, -lambda / tau).max_abs() < 1e-12);
        assert!(r.f_dot.data.iter().all(|x| (x - lambda * 2.0 / (2.0 * tau)).abs() < 1e-12));
        assert!(r.psi_dot.max_abs() < 1e-12);
    }
}

#[test]
fn ungauged_flow_moves_psi_norm_by_weighted_heat_equation() {
    let s = random_state(2, 32, 4, false);
    let ev = s.evaluate().unwrap();
    let r = ungauged_rhs(&s).unwrap();
    let rate = re_inner_field(&r.psi_dot, &s.psi).scaled(2.0);
    let heat = ev.w.laplacian_f(ev.geo(), &ev.psi_sq);
    let err = rate.plus(&heat, -1.0).max_abs();
    assert!(err < 1e-8 * heat.max_abs().max(1.0), "{err}");
}

#[test]
fn gauged_flow_transports_psi_norm() {
    let s = random_state(2, 32, 5, false);
    let ev = s.evaluate().unwrap();
    let k = s.constants;
    let r = gauged_rhs(&s).unwrap();
    let w = deturck_vector(&s.g, &s.g0).unwrap();
    let mut x = w.plus(&ev.tensors.u, -2.0 / k.tau);
    for i in 0..2 {
        for p in 0..s.grid().len() {
            x.comps[i][p] += (1.0 - ev.psi_sq.data[p] / k.tau) * ev.w.grad_f.comps[i][p];
        }
    }
    let d = ev.geo().differential(&ev.psi_sq);
    let rate = re_inner_field(&r.psi_dot, &s.psi).scaled(2.0);
    let heat = ev.w.laplacian_f(ev.geo(), &ev.psi_sq);
    let mut err = 0.0f64;
    for p in 0..s.grid().len() {
        let transport: f64 = (0..2).map(|i| x.comps[i][p] * d.comps[i][p]).sum();
        err = err.max((rate.data[p] - heat.data[p] - transport).abs());
    }
    assert!(err < 1e-8 * heat.max_abs().max(1.0), "{err}");
}

#[test]
fn gauge_difference_is_a_lie_derivative() {
    for unit in [false, true] {
        let s = random_state(2, 32, 6, unit);
        let ev = s.evaluate().unwrap();
        let k = s.constants;
        let gr = gauged_rhs(&s).unwrap();
        let ur = ungauged_rhs(&s).unwrap();
        let w = deturck_vector(&s.g, &s.g0).unwrap();
        let x = w.plus(&ev.tensors.vf, -2.0 / k.tau).plus(&ev.w.grad_f, 1.0);
        let lie = ev.geo().lie_derivative_metric(&x);
        let err = gr.g_dot.plus(&ur.g_dot, -1.0).plus(&lie, -1.0).max_abs();
        assert!(err < 1e-7, "metric: {err}");
        if unit {
            // With |ψ|² ≡ c the scalar and spinor equations also differ by ℒ_X.
            let df = ev.geo().differential(&s.f);
            let xf: Vec<f64> = (0..s.grid().len()).map(|p| (0..2).map(|i| x.comps[i][p] * df.comps[i][p]).sum()).collect();
            let ferr = (0..s.grid().len())
                .map(|p| (gr.f_dot.data[p] - ur.f_dot.data[p] - xf[p]).abs())
                .fold(0.0, f64::max);
            assert!(ferr < 1e-7, "scalar: {ferr}");
            let lx = kosmann_lie(&x, &s.psi, &ev.sg).unwrap();
            let perr = gr.psi_dot_parallel.plus(&ur.psi_dot_parallel, -1.0).plus(&lx, -1.0).max_abs();
            assert!(perr < 1e-7, "spinor: {perr}");
            let a = first_variation_of(&ev, k.lambda, &gr.direction()).unwrap();
            let b = first_variation_of(&ev, k.lambda, &ur.direction()).unwrap();
            assert!((a - b).abs() < 1e-7 * a.abs(), "{a} {b}");
        }
    }
}

#[test]
fn monotonicity_identity_misses_only_the_measure_exchange() {
    let s = random_state(2, 32, 7, true);
    let ev = s.evaluate().unwrap();
    let k = s.constants;
    let m = monitor(&s).unwrap();
    let e = measure_exchange(&ev, &k).unwrap();
    assert!((m.exchange - e).abs() < 1e-7 * m.dissipation, "{} {}", m.exchange, e);
    assert!(m.dissipation > 0.0);
    // The exchange term is not zero on generic data, so neither is d/dt ∫dΩ.
    assert!(e.abs() > 1e-6 && mass_rate(&ev, &k).abs() > 1e-6);
}

#[test]
fn constant_data_lower_order_parts() {
    let lambda = 0.6;
    let s = flat_state(2, 8, lambda);
    let tau = s.constants.tau;
    for form in [AForm::Printed, AForm::Derived] {
        let lo = lower_order_decomposition(&s, form).unwrap();
        assert!(lo.metric.plus(&s.g, -lambda / tau).max_abs() < 1e-12);
        assert!(lo.scalar.data.iter().all(|x| (x - lambda * 2.0 / (2.0 * tau)).abs() < 1e-12));
        assert!(lo.spinor.max_abs() < 1e-12);
    }
}

fn sin_mode(grid: Grid, nfreq: f64) -> Vec<f64> {
    (0..grid.len()).map(|p| (2.0 * PI * nfreq * grid.position(p)[0]).sin()).collect()
}

#[test]
fn metric_lower_order_part_has_no_second_derivatives() {
    let grid = Grid::new(2, 64).unwrap();
    let eps = 1e-4;
    let mut prev_top = 0.0;
    for nf in [4.0, 8.0, 16.0] {
        let mode = sin_mode(grid, nf);
        let probe = |sign: f64| {
            let mut s = flat_state(2, 64, 0.0);
            for p in 0..grid.len() {
                s.g.comps[0][p] += sign * eps * mode[p];
                s.g.comps[1][p] += sign * 0.5 * eps * mode[p];
                s.g.comps[2][p] += sign * 0.5 * eps * mode[p];
                s.g.comps[3][p] -= sign * 0.3 * eps * mode[p];
            }
            let lo = lower_order_decomposition(&s, AForm::Derived).unwrap();
            let full = gauged_rhs(&s).unwrap();
            (lo.metric, full.g_dot)
        };
        let (lp, fp) = probe(1.0);
        let (lm, fm) = probe(-1.0);
        let lower = lp.plus(&lm, -1.0).max_abs() / (2.0 * eps);
        let top = fp.plus(&fm, -1.0).max_abs() / (2.0 * eps);
        println!("N = {nf}: lower {lower:.3e} full {top:.3e}");
        assert!(lower < 1e-6 * top);
        assert!(top > 3.5 * prev_top);
        prev_top = top;
    }
}

#[test]
fn spinor_lower_order_part_is_first_order_in_psi() {
    // Unit-norm background; the probe direction is tangent to the sphere bundle.
    let grid = Grid::new(2, 64).unwrap();
    let eps = 1e-5;
    let mut growth = Vec::new();
    for form in [AForm::Derived, AForm::Printed] {
        let mut sizes = Vec::new();
        for nf in [4.0, 8.0, 16.0] {
            let mode = sin_mode(grid, nf);
            let probe = |sign: f64| {
                let mut s = flat_state(2, 64, 0.0);
                let c = s.constants.c;
                s.psi = s.psi.map_points(|p, v| {
                    v + Spinor::new(Complex64::new(0.0, 0.3), Complex64::new(0.5, -0.2))
                        * Complex64::new(sign * eps * c.sqrt() * mode[p], 0.0)
                });
                lower_order_decomposition(&s, form).unwrap().spinor
            };
            sizes.push(probe(1.0).plus(&probe(-1.0), -1.0).max_abs() / (2.0 * eps));
        }
        println!("{form:?}: {sizes:?}");
        growth.push(sizes[2] / sizes[0]);
    }
    // second-order leftovers would grow like N² (factor 16 from N=4 to 16)
    assert!(growth[0] < 5.0, "derived form grows by {}", growth[0]);
    assert!(growth[1] > 10.0, "printed form should keep second-order terms");
}

#[test]
fn marching_is_refused_outside_the_forward_regime() {
    for c in [0.5, 1.0] {
        let mut s = flat_state(2, 8, 0.0);
        s.constants = FlowConstants::new(1.0, 0.0, c).unwrap();
        s.psi = s.psi.scaled((c / 1.0f64).sqrt());
        assert!(matches!(step_rk4(&s, 1e-4), Err(spinflow::Error::Regime(_))));
        assert!(run_with_monitors(&s, 1e-4, 3).is_err());
    }
}

#[test]
fn lambda_flow_is_exponential_scaling() {
    let lambda = 0.9;
    let s = flat_state(2, 8, lambda);
    let tau = s.constants.tau;
    let dt = 0.05;
    let next = step_rk4(&s, dt).unwrap();
    let exact = (lambda * dt / tau).exp();
    let err = next.g.plus(&s.g, -exact).max_abs();
    let x = lambda * dt / tau;
    assert!(err < 2.0 * x.powi(5) / 120.0, "{err}");
    assert!(err > 0.0);
    let f_exact = s.f.data[0] + lambda * 2.0 / (2.0 * tau) * dt;
    assert!((next.f.data[0] - f_exact).abs() < 1e-13);
}

#[test]
fn rk4_is_fourth_order() {
    let k = FlowConstants::new(0.5, 0.3, 1.0).unwrap();
    let s = perturbed_flat_start(Grid::new(2, 16).unwrap(), 2, 0.05, k).unwrap();
    let dt = stable_dt(s.grid(), &k);
    let march = |h: f64, steps: usize| {
        let mut st = s.clone();
        for _ in 0..steps {
            st = step_rk4(&st, h).unwrap();
        }
        st
    };
    let a = march(dt, 8);
    let b = march(dt / 2.0, 16);
    let c = march(dt / 4.0, 32);
    let d1 = a.g.plus(&b.g, -1.0).max_abs() + a.psi.plus(&b.psi, -1.0).max_abs() + a.f.plus(&b.f, -1.0).max_abs();
    let d2 = b.g.plus(&c.g, -1.0).max_abs() + b.psi.plus(&c.psi, -1.0).max_abs() + b.f.plus(&c.f, -1.0).max_abs();
    println!("self-convergence ratio {}", d1 / d2);
    assert!(d1 / d2 > 12.0 && d1 / d2 < 20.0);
}

#[test]
fn short_monitored_run() {
    let k = FlowConstants::new(0.5, 0.0, 1.0).unwrap();
    let s = perturbed_flat_start(Grid::new(2, 16).unwrap(), 3, 1e-2, k).unwrap();
    let run = run_with_monitors(&s, stable_dt(s.grid(), &k), 30).unwrap();
    assert!(run.stopped.is_none());
    let sum = summarize(&run.records);
    assert_eq!(sum.steps, 30);
    assert!(sum.monotone && sum.max_psi_dev < 1e-8);
    assert!(sum.max_gap < 5e-3 && sum.max_gap_with_exchange < 5e-3);
    assert!(run.records.iter().all(|r| r.dissipation >= 0.0 && r.regime_coeff == -1.0));
}

#[test]
fn unstable_step_is_reported() {
    let k = FlowConstants::new(0.5, 0.0, 1.0).unwrap();
    let s = perturbed_flat_start(Grid::new(2, 16).unwrap(), 3, 1e-2, k).unwrap();
    let run = run_with_monitors(&s, 50.0 * stable_dt(s.grid(), &k), 200).unwrap();
    assert!(run.stopped.is_some());
    assert!(!run.records.last().unwrap().step_accepted);
}

#[test]
fn representation_is_irrelevant_for_the_rhs_norms() {
    // sanity: SpinGeometry construction with the default representation
    let s = random_state(3, 8, 1, true);
    let sg = SpinGeometry::new(GeometryCache::new(&s.g).unwrap(), build_rep(3).unwrap()).unwrap();
    assert_eq!(sg.n(), 3);
    assert!(gauged_rhs(&s).unwrap().g_dot.max_abs().is_finite());
}
