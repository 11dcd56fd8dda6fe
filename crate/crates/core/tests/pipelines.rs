use carleman_core::carleman::{
    carleman_sweep, sample_adjoint_data, transform_to_w, CarlemanParams, S0Policy, SweepConfig,
};
use carleman_core::coefficients::make_power_coefficient;
use carleman_core::control::synthesize_null_control;
use carleman_core::functionals::WeightGrid;
use carleman_core::pde_solver::{
    build_mesh, read_binary, solve_adjoint, solve_forward, write_binary, BoundaryRegime, Direction,
    ProblemSpec,
};
use carleman_core::weights::{build_psi, default_omega_prime, BridgeKind, CarlemanWeights, PsiFunction};
use std::f64::consts::PI;

fn spec(gamma: f64, regime: BoundaryRegime, n: usize) -> ProblemSpec {
    let mesh = build_mesh(n, 2.0).unwrap();
    ProblemSpec::new(&make_power_coefficient(gamma).unwrap(), regime, &mesh, 1.0, n)
        .unwrap()
        .with_omega(0.3, 0.7)
        .unwrap()
}

fn psi(gamma: f64) -> PsiFunction {
    let (ap, bp) = default_omega_prime(0.3, 0.7);
    build_psi(&make_power_coefficient(gamma).unwrap(), ap, bp, 16).unwrap()
}

#[test]
fn control_cost_grows_as_penalty_shrinks() {
    for (gamma, regime) in [(0.5, BoundaryRegime::DirichletZero), (1.5, BoundaryRegime::ZeroFlux)] {
        let sp = spec(gamma, regime, 48);
        let u0: Vec<f64> = sp.mesh().nodes().iter().map(|x| (0.5 * PI * x).cos() * (1.0 - x)).collect();
        let costs: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&e| {
                let r = synthesize_null_control(&sp, &u0, e, 1e-10, 500).unwrap();
                assert!(r.converged);
                r.control_cost
            })
            .collect();
        assert!(costs.windows(2).all(|w| w[1] >= w[0]), "{costs:?}");
    }
}

#[test]
fn transform_residual_decreases_under_refinement() {
    let mut last = f64::INFINITY;
    for n in [64, 128, 256] {
        let sp = spec(0.5, BoundaryRegime::DirichletZero, n);
        let weights = CarlemanWeights::new(psi(0.5), 2.0, 1.0).unwrap();
        let grid = WeightGrid::new(&weights, sp.mesh()).unwrap();
        let (v_t, f) = sample_adjoint_data(&sp, 11, 0);
        let v = solve_adjoint(&sp, &v_t, Some(&f)).unwrap();
        let params = CarlemanParams::new(S0Policy::default().s0(&weights), 2.0).unwrap();
        let tr = transform_to_w(&sp, &v, &grid, params).unwrap();
        let res = tr.source_residual(&grid, &f, sp.regime());
        assert!(res < last, "N={n}: {res:.3e} after {last:.3e}");
        last = res;
    }
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let sp = spec(1.5, BoundaryRegime::ZeroFlux, 32);
    let cfg = SweepConfig {
        n_samples: 4,
        lambdas: vec![2.0],
        s_multipliers: vec![1.0, 2.0],
        s0_policy: S0Policy::default(),
        lambda0: 2.0,
        seed: 5,
        with_source: true,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| carleman_sweep(&sp, &psi(1.5), &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn bridge_choice_barely_moves_the_constant() {
    let sp = spec(0.5, BoundaryRegime::DirichletZero, 64);
    let (ap, bp) = default_omega_prime(0.3, 0.7);
    let a = make_power_coefficient(0.5).unwrap();
    let cfg = SweepConfig {
        n_samples: 6,
        lambdas: vec![2.0],
        s_multipliers: vec![1.0, 2.0, 4.0],
        s0_policy: S0Policy::default(),
        lambda0: 2.0,
        seed: 9,
        with_source: true,
    };
    let c = |kind| {
        let psi = PsiFunction::with_bridge(&a, ap, bp, 16, kind).unwrap();
        carleman_sweep(&sp, &psi, &cfg).unwrap().empirical_c
    };
    let (q, s) = (c(BridgeKind::Quintic), c(BridgeKind::Septic));
    assert!(q.is_finite() && s.is_finite());
    assert!((q / s - 1.0).abs() < 0.5, "quintic {q:.3e}, septic {s:.3e}");
}

#[test]
fn binary_grid_round_trips() {
    let sp = spec(0.5, BoundaryRegime::DirichletZero, 16);
    let u0: Vec<f64> = sp.mesh().nodes().iter().map(|x| (PI * x).sin()).collect();
    let u = solve_forward(&sp, &u0, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.bin");
    write_binary(&u, &path).unwrap();
    let back = read_binary(&path, sp.mesh(), Direction::Forward).unwrap();
    assert_eq!(back.values, u.values);
    assert_eq!(back.times, u.times);
}

#[test]
fn energy_ratio_of_first_mode_is_mesh_stable() {
    let ratio = |n: usize| {
        let sp = spec(0.5, BoundaryRegime::DirichletZero, n);
        let u0: Vec<f64> = sp.mesh().nodes().iter().map(|x| (PI * x).sin()).collect();
        carleman_core::pde_solver::energy_report(&sp, &u0, None).unwrap().ratio
    };
    let (coarse, fine) = (ratio(128), ratio(256));
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((fine / coarse - 1.0).abs() < 0.05, "{coarse} -> {fine}");
}
