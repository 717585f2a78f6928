use proptest::prelude::*;
use simplexdiff::geometry::onsager::{free_energy_gradient, free_energy_value};
use simplexdiff::geometry::{
    apply_generator, build_onsager, differential_operators, hje_residual, metric_tensor,
    onsager_matrix, solve_gradient_flow, wasserstein2_twopoint, DerivativeScheme, MeanFunction,
    Potential, QuadraticField, ScalarField,
};
use simplexdiff::linalg::{dot, Matrix};
use simplexdiff::network::{
    build_network, random_detailed_balanced, QMatrix, ReactionNetwork, SimplexState,
};
use simplexdiff::rng::{tag, Stream, StreamId};
use simplexdiff::special::incomplete_beta;

fn random_instance(d: usize, seed: u64, margin: f64) -> (ReactionNetwork, SimplexState, Stream) {
    let mut rng = Stream::new(StreamId::new(seed, tag::TEST, d as u64));
    let net = random_detailed_balanced(d, 0.5, &mut rng).unwrap();
    let x = SimplexState::random_interior(d, margin, &mut rng);
    (net, x, rng)
}

fn symmetric_pair() -> ReactionNetwork {
    build_network(QMatrix::from_rates(&[vec![1.0], vec![1.0]]).unwrap()).unwrap()
}

fn random_quadratic(d: usize, rng: &mut Stream) -> QuadraticField {
    let mut a = Matrix::from_fn(d, d, |_, _| rng.uniform() - 0.5);
    a = Matrix::from_fn(d, d, |i, j| a[(i, j)] + a[(j, i)]);
    QuadraticField {
        a,
        b: (0..d).map(|_| rng.uniform() - 0.5).collect(),
    }
}

/// `|g|^{-1/2} Σ_i ∂_i(|g|^{1/2} g^{ij} ∂_j F)` in the chart
/// `ξ = (x_1, ..., x_{d-1})`, by central differences of the flux. Uses only
/// `K` and a determinant, not the eigen-decomposition.
fn intrinsic_laplace_beltrami(
    net: &ReactionNetwork,
    mf: &MeanFunction,
    f: &dyn ScalarField,
    x: &[f64],
) -> f64 {
    let d = x.len();
    let n = d - 1;
    let lift = |xi: &[f64]| {
        let mut y = xi.to_vec();
        y.push(1.0 - xi.iter().sum::<f64>());
        y
    };
    let sqrt_det_g = |y: &[f64]| {
        (1.0 / onsager_matrix(net, mf, y)
            .unwrap()
            .leading_block(n)
            .determinant())
        .sqrt()
    };
    let flux = |xi: &[f64], i: usize| {
        let y = lift(xi);
        let k = onsager_matrix(net, mf, &y).unwrap();
        let grad = f.gradient(&y);
        let chart: Vec<f64> = (0..n).map(|j| grad[j] - grad[n]).collect();
        sqrt_det_g(&y) * (0..n).map(|j| k[(i, j)] * chart[j]).sum::<f64>()
    };
    let xi = &x[..n];
    let h = 1e-5;
    let mut total = 0.0;
    for i in 0..n {
        let mut plus = xi.to_vec();
        let mut minus = xi.to_vec();
        plus[i] += h;
        minus[i] -= h;
        total += (flux(&plus, i) - flux(&minus, i)) / (2.0 * h);
    }
    total / sqrt_det_g(x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_and_metric_identities(d in 2usize..9, seed in any::<u64>()) {
        let (net, x, _) = random_instance(d, seed, 0.01);
        let dec = build_onsager(&net, &MeanFunction::Logarithmic, &x).unwrap();
        let r = dec.residuals();
        prop_assert!(r.max() <= 1e-10, "{r:?}");
        let omega = net.omega();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    prop_assert!(dec.k[(i, j)] <= 0.0 || omega[(i, j)] == 0.0);
                }
            }
        }
        prop_assert!(dec.lambdas.windows(2).all(|w| w[0] >= w[1]));
        let m = metric_tensor(&dec).unwrap();
        let mr = m.residuals();
        prop_assert!(mr.inverse <= 1e-8 && mr.determinant <= 1e-8, "{mr:?}");
        prop_assert!(m.g_inv.max_abs_diff(&dec.k.leading_block(d - 1)) <= 1e-10);
    }

    #[test]
    fn kl_free_energy_solves_the_stationary_hje(d in 2usize..5, seed in any::<u64>()) {
        let (net, x, _) = random_instance(d, seed, 0.02);
        let mf = MeanFunction::Logarithmic;
        let grad = |y: &[f64]| free_energy_gradient(&net, &mf, y).unwrap();
        prop_assert!(hje_residual(&net, grad, x.as_slice()).abs() <= 1e-10);
    }

    #[test]
    fn laplace_beltrami_matches_intrinsic_chart_formula(d in 2usize..4, seed in any::<u64>()) {
        let (net, x, mut rng) = random_instance(d, seed, 0.1);
        let f = random_quadratic(d, &mut rng);
        for mf in [MeanFunction::Logarithmic, MeanFunction::Geometric] {
            let oracle = intrinsic_laplace_beltrami(&net, &mf, &f, x.as_slice());
            for scheme in [DerivativeScheme::Analytic, DerivativeScheme::FiniteDifference] {
                let ops = differential_operators(&net, &mf, &f, &x, scheme).unwrap();
                prop_assert!((ops.laplace_beltrami - oracle).abs() <= 1e-5 * oracle.abs().max(1.0),
                    "{:?} {scheme:?}: {} vs {oracle}", mf, ops.laplace_beltrami);
                prop_assert!(ops.dirichlet_density >= -1e-14);
            }
        }
    }

    #[test]
    fn dissipation_rate_matches_chain_rule(d in 2usize..6, seed in any::<u64>()) {
        let (net, x0, _) = random_instance(d, seed, 0.05);
        let mf = MeanFunction::Logarithmic;
        let dt = 1e-5;
        let traj = solve_gradient_flow(&net, &mf, &x0, 0.02, dt).unwrap();
        let psi: Vec<f64> = traj.states.iter().map(|x| free_energy_value(&net, &mf, x).unwrap()).collect();
        prop_assert!(psi.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for k in (1..traj.len() - 1).step_by(200) {
            let x = &traj.states[k];
            let grad = free_energy_gradient(&net, &mf, x).unwrap();
            let rate = -dot(&grad, &onsager_matrix(&net, &mf, x).unwrap().matvec(&grad));
            let fd = (psi[k + 1] - psi[k - 1]) / (2.0 * dt);
            prop_assert!(rate <= 0.0);
            prop_assert!((fd - rate).abs() <= 1e-6 * rate.abs().max(1.0), "{fd} vs {rate}");
        }
    }
}

#[test]
fn canonical_generator_is_the_one_dimensional_operator() {
    // Geometric mean on the symmetric pair: θ = 2 sqrt(x (1 - x)), ω = 1/2,
    // so h = 2 gives hω = 1 and L f = θ f'' + θ' f' / 2 in the chart.
    let net = symmetric_pair();
    let f = QuadraticField {
        a: Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap(),
        b: vec![0.0, 0.0],
    };
    for &x in &[0.1, 0.3, 0.5, 0.77, 0.95] {
        let state = SimplexState::new(vec![x, 1.0 - x]).unwrap();
        let theta = 2.0 * (x * (1.0 - x)).sqrt();
        let theta_prime = (1.0 - 2.0 * x) / (x * (1.0 - x)).sqrt();
        let expected = theta * 2.0 + 0.5 * theta_prime * 2.0 * x;
        let l = apply_generator(
            &net,
            &MeanFunction::Geometric,
            &f,
            &state,
            2.0,
            Potential::Zero,
            DerivativeScheme::Analytic,
        )
        .unwrap();
        assert!((l - expected).abs() <= 1e-6, "x = {x}: {l} vs {expected}");
    }
}

struct Poly(fn(f64) -> f64, fn(f64) -> f64);

impl ScalarField for Poly {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x[0])
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![(self.1)(x[0]), 0.0]
    }
}

#[test]
fn generator_is_symmetric_in_the_stationary_weight() {
    // Both functions and their derivatives vanish at 0 and 1, so the weighted
    // integrands are smooth enough for the midpoint rule.
    let f = Poly(
        |x| x * x - x.powi(3) - x.powi(4) + x.powi(5),
        |x| 2.0 * x - 3.0 * x * x - 4.0 * x.powi(3) + 5.0 * x.powi(4),
    );
    let g = Poly(
        |x| x.powi(3) - 2.0 * x.powi(4) + x.powi(5),
        |x| 3.0 * x * x - 8.0 * x.powi(3) + 5.0 * x.powi(4),
    );
    let net = symmetric_pair();
    let mf = MeanFunction::Geometric;
    let cells = 200;
    let dx = 1.0 / cells as f64;
    let (mut lhs, mut rhs, mut scale) = (0.0, 0.0, 0.0);
    for m in 0..cells {
        let x = (m as f64 + 0.5) * dx;
        let state = SimplexState::new(vec![x, 1.0 - x]).unwrap();
        let pi = (2.0 * (x * (1.0 - x)).sqrt()).powf(-0.5);
        let lf = apply_generator(
            &net,
            &mf,
            &f,
            &state,
            2.0,
            Potential::Zero,
            DerivativeScheme::Analytic,
        )
        .unwrap();
        let lg = apply_generator(
            &net,
            &mf,
            &g,
            &state,
            2.0,
            Potential::Zero,
            DerivativeScheme::Analytic,
        )
        .unwrap();
        lhs += lf * g.value(state.as_slice()) * pi * dx;
        rhs += f.value(state.as_slice()) * lg * pi * dx;
        scale += (lf * g.value(state.as_slice())).abs() * pi * dx;
    }
    assert!(scale > 1e-3);
    assert!((lhs - rhs).abs() <= 1e-4, "{lhs} vs {rhs} (scale {scale})");
}

#[test]
fn hje_residual_detects_a_wrong_potential() {
    let mut rng = Stream::new(StreamId::new(5, tag::TEST, 0));
    let net = random_detailed_balanced(3, 1.0, &mut rng).unwrap();
    let x = SimplexState::random_interior(3, 0.05, &mut rng);
    let mf = MeanFunction::Logarithmic;
    let doubled = |y: &[f64]| {
        free_energy_gradient(&net, &mf, y)
            .unwrap()
            .iter()
            .map(|v| 2.0 * v)
            .collect::<Vec<_>>()
    };
    assert!(hje_residual(&net, doubled, x.as_slice()).abs() > 1e-6);
}

#[test]
fn canonical_two_point_distance_is_an_incomplete_beta() {
    let net = symmetric_pair();
    let mut previous = 0.0;
    for k in 0..=20 {
        let x = k as f64 / 20.0;
        let w = wasserstein2_twopoint(&net, &MeanFunction::Geometric, x).unwrap();
        let oracle = incomplete_beta(x, 0.75, 0.75).unwrap() / 2f64.sqrt();
        assert!((w - oracle).abs() <= 1e-8, "x = {x}");
        assert!(w >= previous);
        previous = w;
    }
    assert!((previous - 1.19814).abs() < 1e-5);
}
