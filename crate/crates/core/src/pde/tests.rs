use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Array3};
use proptest::prelude::*;

use super::*;
use crate::control_space::{make_grid, ControlDictionary, ControlSet, Grid};
use crate::young_measures::{
    barycenter, CompositeFunctional, Factor, Integrand, Profile, RelaxedControl, ScalarFn,
    SpaceTimeYoungMeasure, Term,
};

fn interval() -> ControlSet {
    ControlSet::interval(-1.0, 1.0).unwrap()
}

fn mono(coef: f64, x: Vec<u32>, y: Vec<u32>, z: Vec<u32>) -> Term {
    Term::Monomial {
        coef,
        t: 0,
        x,
        y,
        z,
    }
}

fn problem(grid: Grid, field: Integrand, running: RunningCost, terminal: Integrand, y0: Vec<f64>) -> ParabolicProblem {
    ParabolicProblem::new(ProblemData {
        grid,
        state_dim: 1,
        diffusion: vec![Diffusion::scalar(1.0)],
        field: vec![field],
        running,
        terminal,
        initial: y0,
        control_set: interval(),
        derivatives: DerivativeSource::Analytic,
    })
    .unwrap()
}

fn constants(grid: &Grid, values: &[f64]) -> Arc<ControlDictionary> {
    let pts: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
    Arc::new(ControlDictionary::from_constants(grid, &interval(), &pts).unwrap())
}

fn zero_problem(grid: Grid, y0: Vec<f64>) -> ParabolicProblem {
    problem(grid, Integrand::zero(), RunningCost::Local(Integrand::zero()), Integrand::zero(), y0)
}

fn sine(grid: &Grid) -> Vec<f64> {
    (0..grid.n_nodes()).map(|n| (PI * grid.node_coords(n)[0]).sin()).collect()
}

#[test]
fn zero_data_gives_zero_state() {
    let g = make_grid(&[8], &[1.0], 10, 1.0).unwrap();
    let p = zero_problem(g.clone(), vec![0.0; 7]);
    let mu = RelaxedControl::uniform(constants(&g, &[-1.0, 1.0]));
    let y = solve_forward(&p, &mu).unwrap();
    assert_eq!(y.max_abs(), 0.0);
}

#[test]
fn heat_kernel_oracle_ladder() {
    // e^{−π² T} sin(πx) at T = 0.1
    let mut errs = Vec::new();
    for (cells, nt) in [(16, 50), (32, 200), (64, 800)] {
        let g = make_grid(&[cells], &[1.0], nt, 0.1).unwrap();
        let p = zero_problem(g.clone(), sine(&g));
        let mu = RelaxedControl::uniform(constants(&g, &[0.0]));
        let y = solve_forward(&p, &mu).unwrap();
        let decay = (-PI * PI * 0.1f64).exp();
        let err = y
            .final_slice()
            .iter()
            .zip(sine(&g))
            .map(|(a, b)| (a - decay * b).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[1] <= 0.5 * errs[0] && errs[2] <= 0.5 * errs[1], "{errs:?}");
}

#[test]
fn steady_state_of_unit_source() {
    // −y'' = 1 → x(1 − x)/2; central differences are exact on quadratics.
    let g = make_grid(&[20], &[1.0], 400, 4.0).unwrap();
    let p = problem(
        g.clone(),
        Integrand::constant(1.0),
        RunningCost::Local(Integrand::zero()),
        Integrand::zero(),
        vec![0.0; 19],
    );
    let mu = RelaxedControl::uniform(constants(&g, &[0.0]));
    let y = solve_forward(&p, &mu).unwrap();
    for (n, v) in y.final_slice().iter().enumerate() {
        let x = g.node_coords(n)[0];
        assert!((v - 0.5 * x * (1.0 - x)).abs() < 1e-9);
    }
}

#[test]
fn two_dimensional_heat_decay() {
    // e^{−2π² T} sin(πx) sin(πy); anisotropic tensor with cross term keeps
    // the solution finite and decaying.
    let g = make_grid(&[24, 24], &[1.0, 1.0], 100, 0.05).unwrap();
    let y0: Vec<f64> = (0..g.n_nodes())
        .map(|n| {
            let x = g.node_coords(n);
            (PI * x[0]).sin() * (PI * x[1]).sin()
        })
        .collect();
    let p = zero_problem(g.clone(), y0.clone());
    let mu = RelaxedControl::uniform(constants(&g, &[0.0]));
    let y = solve_forward(&p, &mu).unwrap();
    let decay = (-2.0 * PI * PI * 0.05f64).exp();
    let err = y
        .final_slice()
        .iter()
        .zip(&y0)
        .map(|(a, b)| (a - decay * b).abs())
        .fold(0.0, f64::max);
    assert!(err < 0.02, "{err}");

    let mut data = p.data().clone();
    data.diffusion = vec![Diffusion::Full {
        matrix: vec![vec![1.0, 0.4], vec![0.4, 0.5]],
    }];
    let p2 = ParabolicProblem::new(data).unwrap();
    let y = solve_forward(&p2, &mu).unwrap();
    for k in 1..=g.nt() {
        assert!(y.l2_norm(k) <= y.l2_norm(k - 1) + 1e-15);
    }
}

#[test]
fn average_field_examples() {
    let g = make_grid(&[6], &[1.0], 1, 1.0).unwrap();
    let dict = constants(&g, &[-1.0, 1.0]);
    let f = vec![Integrand::new(vec![
        mono(1.0, vec![], vec![1], vec![1]),
        mono(1.0, vec![], vec![], vec![2]),
        mono(0.5, vec![1], vec![], vec![]),
    ])];
    let y: Vec<f64> = (0..5).map(|i| 0.1 * i as f64).collect();
    let dirac = ndarray::arr1(&[0.0, 1.0]);
    let step = StepControl::Fine {
        dictionary: &dict,
        weights: dirac.view(),
    };
    let avg = average_field(&f, &g, 0.0, &y, &step).unwrap();
    for n in 0..5 {
        let x = g.node_coords(n)[0];
        assert_eq!(avg[n], y[n] + 1.0 + 0.5 * x);
    }

    let z = vec![Integrand::control_power(1.0, 1)];
    let half = ndarray::arr1(&[0.5, 0.5]);
    let step = StepControl::Fine {
        dictionary: &dict,
        weights: half.view(),
    };
    assert!(average_field(&z, &g, 0.0, &y, &step).unwrap().iter().all(|v| *v == 0.0));
    assert!(average_field(&z, &g, 0.0, &y[..3], &step).is_err());
}

#[test]
fn fine_and_barycenter_averages_agree() {
    let g = make_grid(&[6], &[1.0], 1, 1.0).unwrap();
    let set = interval();
    let atoms = vec![
        crate::control_space::ControlField::from_fn(&g, &set, |x| vec![x[0] - 0.5]).unwrap(),
        crate::control_space::ControlField::constant(&g, &[0.25], &set).unwrap(),
        crate::control_space::ControlField::from_fn(&g, &set, |x| vec![(4.0 * x[0]).sin()]).unwrap(),
    ];
    let dict = ControlDictionary::new(g.clone(), set.clone(), atoms).unwrap();
    let mu = crate::young_measures::ProbabilityVector::new(vec![0.2, 0.5, 0.3]).unwrap();
    let nu = barycenter(&mu, &dict).unwrap();
    let f = vec![Integrand::new(vec![
        mono(1.0, vec![], vec![1], vec![1]),
        mono(-2.0, vec![1], vec![], vec![3]),
    ])];
    let y: Vec<f64> = (0..5).map(|i| (i as f64).cos()).collect();
    let w = ndarray::arr1(mu.as_slice());
    let fine = average_field(
        &f,
        &g,
        0.0,
        &y,
        &StepControl::Fine {
            dictionary: &dict,
            weights: w.view(),
        },
    )
    .unwrap();
    let coarse = average_field(
        &f,
        &g,
        0.0,
        &y,
        &StepControl::Coarse {
            support: nu.support(),
            weights: nu.weights(),
        },
    )
    .unwrap();
    for (a, b) in fine.iter().zip(&coarse) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn cost_examples() {
    let g = make_grid(&[8], &[1.0], 5, 1.0).unwrap();
    let p = zero_problem(g.clone(), vec![0.0; 7]);
    let mu = RelaxedControl::uniform(constants(&g, &[-1.0, 1.0]));
    let y = solve_forward(&p, &mu).unwrap();
    assert_eq!(evaluate_cost(&p, &y, &mu).unwrap(), 0.0);

    // (z² − 1)² vanishes on both atoms
    let phi = Integrand::new(vec![
        mono(1.0, vec![], vec![], vec![4]),
        mono(-2.0, vec![], vec![], vec![2]),
        Term::Constant { value: 1.0 },
    ]);
    let p = problem(g.clone(), Integrand::control_power(1.0, 1), RunningCost::Local(phi), Integrand::zero(), vec![0.0; 7]);
    let y = solve_forward(&p, &mu).unwrap();
    assert_eq!(y.max_abs(), 0.0);
    assert_eq!(evaluate_cost(&p, &y, &mu).unwrap(), 0.0);
}

#[test]
fn composite_cost_varies_along_the_family_only_when_nonaffine() {
    use crate::young_measures::{choquet_represent, TwoAtomicSlice};
    let g = make_grid(&[16], &[1.0], 4, 1.0).unwrap();
    let set = ControlSet::interval(0.0, 1.0).unwrap();
    let u1 = crate::control_space::ControlField::constant(&g, &[0.0], &set).unwrap();
    let u2 = crate::control_space::ControlField::constant(&g, &[1.0], &set).unwrap();
    let region = TwoAtomicSlice::box_region(&g, &[0.0], &[0.5]);
    let ex = TwoAtomicSlice::new(g.clone(), set.clone(), u1, u2, region).unwrap();
    let costs = |func: ScalarFn| -> Vec<f64> {
        let p = ParabolicProblem::new(ProblemData {
            grid: g.clone(),
            state_dim: 1,
            diffusion: vec![Diffusion::scalar(1.0)],
            field: vec![Integrand::zero()],
            running: RunningCost::Composite(CompositeFunctional::single(func, Integrand::control_power(1.0, 1))),
            terminal: Integrand::zero(),
            initial: vec![0.0; 15],
            control_set: set.clone(),
            derivatives: DerivativeSource::Analytic,
        })
        .unwrap();
        [0.0, 0.1, 0.25]
            .iter()
            .map(|&a| {
                let (dict, row) = choquet_represent(&ex, a).unwrap();
                let mu = RelaxedControl::stationary(Arc::new(dict.with_time_steps(4).unwrap()), &row).unwrap();
                reduced_cost(&p, &mu).unwrap()
            })
            .collect()
    };
    let sq = costs(ScalarFn::Square);
    let s1 = (sq[1] - sq[0]) / 0.1;
    let s2 = (sq[2] - sq[1]) / 0.15;
    assert!((s1 - s2).abs() < 1e-10 && s1.abs() > 0.1, "{sq:?}");
    let lin = costs(ScalarFn::Affine { a: 2.0, b: 1.0 });
    assert!((lin[0] - lin[1]).abs() < 1e-12 && (lin[0] - lin[2]).abs() < 1e-12);
}

#[test]
fn adjoint_vanishes_without_costs() {
    let g = make_grid(&[8], &[1.0], 6, 1.0).unwrap();
    let p = problem(g.clone(), Integrand::control_power(1.0, 1), RunningCost::Local(Integrand::zero()), Integrand::zero(), vec![0.0; 7]);
    let mu = RelaxedControl::uniform(constants(&g, &[-1.0, 0.3, 1.0]));
    let y = solve_forward(&p, &mu).unwrap();
    let chi = solve_adjoint(&p, &y, &mu).unwrap();
    assert_eq!(chi.max_abs(), 0.0);

    let missing = p.with_derivatives(DerivativeSource::Missing);
    assert!(matches!(solve_adjoint(&missing, &y, &mu), Err(crate::Error::MissingDerivatives)));
}

#[test]
fn adjoint_terminal_row_is_negative_terminal_gradient() {
    let g = make_grid(&[8], &[1.0], 6, 1.0).unwrap();
    let terminal = Integrand::new(vec![
        Term::Tracking {
            weight: 0.5,
            component: 0,
            target: Profile::Sine {
                amplitude: 0.2,
                lengths: vec![1.0],
            },
        },
        mono(0.25, vec![], vec![4], vec![]),
    ]);
    let p = problem(g.clone(), Integrand::control_power(1.0, 1), RunningCost::Local(Integrand::zero()), terminal, vec![0.0; 7]);
    let mu = RelaxedControl::uniform(constants(&g, &[-1.0, 1.0, 0.8]));
    let y = solve_forward(&p, &mu).unwrap();
    let chi = solve_adjoint(&p, &y, &mu).unwrap();
    for n in 0..7 {
        let x = g.node_coords(n)[0];
        let yt = y.final_slice()[n];
        let d = (yt - 0.2 * (PI * x).sin()) + yt.powi(3);
        assert_eq!(chi.final_slice()[n], -d);
    }
}

/// `Δt (c_k(u_l) − Σ_x w_x ⟨f(t_k, x, y_k, u_l), χ_k⟩)` for every step and atom.
fn adjoint_gradient(p: &ParabolicProblem, dict: &ControlDictionary, weights: &Array2<f64>) -> Array2<f64> {
    let g = p.grid();
    let y = solve_forward(p, Control::Fine { dictionary: dict, weights: weights.view() }).unwrap();
    let chi = solve_adjoint(p, &y, Control::Fine { dictionary: dict, weights: weights.view() }).unwrap();
    let w = g.quadrature_weights();
    Array2::from_shape_fn(weights.dim(), |(k, l)| {
        let e = ndarray::Array1::from_shape_fn(dict.len(), |j| if j == l { 1.0 } else { 0.0 });
        let step = StepControl::Fine { dictionary: dict, weights: e.view() };
        let f = average_field(p.field(), g, g.time(k), y.slice(k), &step).unwrap();
        let pairing: f64 = (0..g.n_nodes()).map(|i| w[i] * f[i] * chi.slice(k)[i]).sum();
        g.dt() * (atom_cost(p, g.time(k), y.slice(k), dict.atom(l)) - pairing)
    })
}

fn fd_gradient(p: &ParabolicProblem, dict: &ControlDictionary, weights: &Array2<f64>, eps: f64) -> Array2<f64> {
    let cost = |w: &Array2<f64>| reduced_cost(p, Control::Fine { dictionary: dict, weights: w.view() }).unwrap();
    Array2::from_shape_fn(weights.dim(), |(k, l)| {
        let mut plus = weights.clone();
        plus[[k, l]] += eps;
        let mut minus = weights.clone();
        minus[[k, l]] -= eps;
        (cost(&plus) - cost(&minus)) / (2.0 * eps)
    })
}

fn max_rel(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let m = x.abs().max(y.abs());
            if m == 0.0 { 0.0 } else { (x - y).abs() / m }
        })
        .fold(0.0, f64::max)
}

fn nonlinear_problem(g: &Grid, running: RunningCost) -> ParabolicProblem {
    // f = −y³ + y z + z, terminal ½ y² + y⁴/4
    let field = Integrand::new(vec![
        mono(-1.0, vec![], vec![3], vec![]),
        mono(1.0, vec![], vec![1], vec![1]),
        mono(1.0, vec![], vec![], vec![1]),
    ]);
    let terminal = Integrand::new(vec![mono(0.5, vec![], vec![2], vec![]), mono(0.25, vec![], vec![4], vec![])]);
    let y0 = (0..g.n_nodes()).map(|n| 0.3 * (PI * g.node_coords(n)[0]).sin()).collect();
    problem(g.clone(), field, running, terminal, y0)
}

fn random_weights(nt: usize, l: usize) -> Array2<f64> {
    let mut w = Array2::from_shape_fn((nt, l), |(k, j)| 1.0 + ((k * 7 + j * 3) as f64).sin().abs());
    for mut row in w.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    w
}

#[test]
fn adjoint_gradient_matches_finite_differences_local_cost() {
    let g = make_grid(&[12], &[1.0], 10, 0.5).unwrap();
    let phi = Integrand::new(vec![
        Term::Tracking {
            weight: 1.0,
            component: 0,
            target: Profile::Sine { amplitude: 0.1, lengths: vec![1.0] },
        },
        mono(0.1, vec![], vec![], vec![2]),
        mono(0.3, vec![1], vec![2], vec![1]),
    ]);
    let p = nonlinear_problem(&g, RunningCost::Local(phi));
    let dict = constants(&g, &[-1.0, 0.0, 1.0]);
    let w = random_weights(10, 3);
    let a = adjoint_gradient(&p, &dict, &w);
    let b = fd_gradient(&p, &dict, &w, 1e-5);
    assert!(max_rel(&a, &b) < 1e-6, "{}", max_rel(&a, &b));

    let broken = p.with_derivatives(DerivativeSource::Perturbed { bias: 0.5 });
    let c = adjoint_gradient(&broken, &dict, &w);
    assert!(max_rel(&c, &b) > 1e-3);
}

#[test]
fn adjoint_gradient_matches_finite_differences_composite_cost() {
    let g = make_grid(&[10], &[1.0], 8, 0.5).unwrap();
    let v = CompositeFunctional::new(vec![
        vec![
            Factor { func: ScalarFn::Square, integrand: Integrand::new(vec![mono(1.0, vec![], vec![1], vec![])]) },
            Factor { func: ScalarFn::ExpClip { clip: 5.0 }, integrand: Integrand::control_power(0.5, 1) },
        ],
        vec![Factor { func: ScalarFn::Affine { a: 0.3, b: 0.0 }, integrand: Integrand::new(vec![mono(1.0, vec![], vec![2], vec![2])]) }],
    ])
    .unwrap();
    let p = nonlinear_problem(&g, RunningCost::Composite(v));
    let set = interval();
    let atoms = vec![
        crate::control_space::ControlField::constant(&g, &[-1.0], &set).unwrap(),
        crate::control_space::ControlField::from_fn(&g, &set, |x| vec![2.0 * x[0] - 1.0]).unwrap(),
        crate::control_space::ControlField::from_fn(&g, &set, |x| vec![(6.0 * x[0]).cos()]).unwrap(),
    ];
    let dict = ControlDictionary::new(g.clone(), set, atoms).unwrap();
    let w = random_weights(8, 3);
    let a = adjoint_gradient(&p, &dict, &w);
    let b = fd_gradient(&p, &dict, &w, 1e-5);
    assert!(max_rel(&a, &b) < 1e-6, "{}", max_rel(&a, &b));
}

#[test]
fn adjoint_gradient_matches_finite_differences_coarse_composite() {
    // ∂J/∂ν_{k,x,j} = Δt w_x (Σ_ij ∂φ̂ · h_ij(z_j) − ⟨f(z_j), χ_k⟩)
    let g = make_grid(&[4, 3], &[1.0, 1.0], 5, 0.4).unwrap();
    let v = CompositeFunctional::single(
        ScalarFn::Square,
        Integrand::new(vec![mono(1.0, vec![], vec![1], vec![]), mono(0.5, vec![], vec![], vec![1])]),
    );
    let field = Integrand::new(vec![mono(-1.0, vec![], vec![3], vec![]), mono(1.0, vec![], vec![], vec![1])]);
    let p = ParabolicProblem::new(ProblemData {
        grid: g.clone(),
        state_dim: 1,
        diffusion: vec![Diffusion::Full { matrix: vec![vec![1.0, 0.2], vec![0.2, 0.7]] }],
        field: vec![field],
        running: RunningCost::Composite(v.clone()),
        terminal: Integrand::new(vec![mono(0.5, vec![], vec![2], vec![])]),
        initial: vec![0.1; 6],
        control_set: interval(),
        derivatives: DerivativeSource::Analytic,
    })
    .unwrap();
    let support = vec![vec![-1.0], vec![0.2], vec![1.0]];
    let mut w = Array3::from_shape_fn((5, 6, 3), |(k, n, j)| 1.0 + ((k + 2 * n + 5 * j) as f64).sin().abs());
    for mut lane in w.lanes_mut(ndarray::Axis(2)) {
        let s = lane.sum();
        lane.mapv_inplace(|x| x / s);
    }
    let nu = SpaceTimeYoungMeasure::new(g.clone(), interval(), support.clone(), w.clone()).unwrap();
    let y = solve_forward(&p, &nu).unwrap();
    let chi = solve_adjoint(&p, &y, &nu).unwrap();
    let q = g.quadrature_weights();
    let cost = |w: &Array3<f64>| reduced_cost(&p, Control::Coarse { support: &support, weights: w.view() }).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let step = Control::from(&nu).step(k);
        let inner = composite_inner_coarse(&v, &g, g.time(k), y.slice(k), 1, &step);
        let gv = v.combine_gradient(&inner);
        for n in 0..6 {
            for j in 0..3 {
                let s = crate::young_measures::Sample { t: g.time(k), node: n, x: g.node_coords(n), y: &y.slice(k)[n..n + 1], z: &support[j] };
                let density = gv[0] * v.terms[0][0].integrand.eval(&s);
                let f = p.field()[0].eval(&s);
                let analytic = g.dt() * q[n] * (density - f * chi.slice(k)[n]);
                let eps = 1e-5;
                let mut plus = w.clone();
                plus[[k, n, j]] += eps;
                let mut minus = w.clone();
                minus[[k, n, j]] -= eps;
                let fd = (cost(&plus) - cost(&minus)) / (2.0 * eps);
                worst = worst.max((analytic - fd).abs() / analytic.abs().max(fd.abs()));
            }
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn heat_flow_preserves_sign_and_dissipates(
        y0 in prop::collection::vec(0.0f64..2.0, 11),
        nt in 1usize..30,
        two_d in any::<bool>(),
    ) {
        let (g, init) = if two_d {
            let g = make_grid(&[4, 4], &[1.0, 2.0], nt, 0.3).unwrap();
            (g, y0[..9].to_vec())
        } else {
            (make_grid(&[12], &[1.0], nt, 0.3).unwrap(), y0)
        };
        let p = zero_problem(g.clone(), init);
        let mu = RelaxedControl::uniform(constants(&g, &[0.0]));
        let y = solve_forward(&p, &mu).unwrap();
        prop_assert!(y.values().iter().all(|v| *v >= 0.0));
        for k in 1..=nt {
            prop_assert!(y.l2_norm(k) <= y.l2_norm(k - 1) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn forward_map_is_affine_when_field_is_affine_in_control(
        a in 0.0f64..1.0,
        seed in 0usize..100,
    ) {
        let g = make_grid(&[9], &[1.0], 6, 0.5).unwrap();
        let field = Integrand::new(vec![mono(2.0, vec![1], vec![], vec![1]), Term::Constant { value: 0.3 }]);
        let p = problem(g.clone(), field, RunningCost::Local(Integrand::zero()), Integrand::zero(), sine(&g));
        let dict = constants(&g, &[-1.0, 0.5, 1.0]);
        let w1 = random_weights(6, 3);
        let w2 = Array2::from_shape_fn((6, 3), |(k, l)| if (k + l + seed) % 3 == 0 { 1.0 } else { 0.0 });
        let mix = &w1 * a + &w2 * (1.0 - a);
        let solve = |w: &Array2<f64>| solve_forward(&p, Control::Fine { dictionary: &dict, weights: w.view() }).unwrap();
        let (y1, y2, ym) = (solve(&w1), solve(&w2), solve(&mix));
        for ((p1, p2), pm) in y1.values().iter().zip(y2.values()).zip(ym.values()) {
            prop_assert!((a * p1 + (1.0 - a) * p2 - pm).abs() < 1e-12);
        }
    }
}

#[test]
fn divergence_is_reported_with_step() {
    let g = make_grid(&[4], &[1.0], 50, 5.0).unwrap();
    let field = Integrand::new(vec![mono(1.0, vec![], vec![4], vec![])]);
    let p = problem(g.clone(), field, RunningCost::Local(Integrand::zero()), Integrand::zero(), vec![3.0; 3]);
    let mu = RelaxedControl::uniform(constants(&g, &[0.0]));
    match solve_forward(&p, &mu) {
        Err(crate::Error::Divergence { step }) => assert!(step > 0 && step <= 50),
        other => panic!("expected divergence, got {other:?}"),
    }
    assert_eq!(reduced_cost(&p, &mu).unwrap(), f64::INFINITY);
}

#[test]
fn trajectory_exports() {
    let g = make_grid(&[4], &[1.0], 2, 1.0).unwrap();
    let p = zero_problem(g.clone(), vec![1.0, 2.0, 3.0]);
    let mu = RelaxedControl::uniform(constants(&g, &[0.0]));
    let y = solve_forward(&p, &mu).unwrap();
    let mut buf = Vec::new();
    y.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# dim=1"));
    assert_eq!(lines[1], "step,t,n0c0,n1c0,n2c0");
    assert_eq!(lines[2], "0,0,1,2,3");
    assert_eq!(lines.len(), 5);
    let file: TrajectoryFile = serde_json::from_str(&y.to_json().unwrap()).unwrap();
    assert_eq!(file.values.len(), 3);
    assert_eq!(file.values[1], y.slice(1));
}
