use proptest::prelude::*;
use simplexdiff::fp::{
    cell_center, fp_stable_dt, solve_fp, stationary_density, DensityGrid1D, ThetaProfile,
    TimeScheme,
};
use simplexdiff::geometry::{DerivativeScheme, MeanFunction, Potential};
use simplexdiff::langevin::{
    effective_potential, fold_unit, simulate_sde, NoiseForm, SdeConfig, TwoPointSde,
};
use simplexdiff::network::{
    build_network, random_detailed_balanced, QMatrix, ReactionNetwork, SimplexState,
};
use simplexdiff::rng::{tag, Stream, StreamId};
use simplexdiff::stats::{grid_bin_masses, l1_from_masses, Moments};

fn asymmetric_pair() -> ReactionNetwork {
    build_network(QMatrix::from_rates(&[vec![1.0], vec![2.0]]).unwrap()).unwrap()
}

#[test]
fn dropping_the_divergence_drift_misses_the_gibbs_law() {
    let net = asymmetric_pair();
    let mf = MeanFunction::Logarithmic;
    let sde = TwoPointSde::from_network(&net, &mf, Potential::FreeEnergy).unwrap();
    let h = 0.5;
    let pi = stationary_density(&sde.theta, &sde.potential, h, 1000).unwrap();
    let l1 = |divergence_drift: bool| {
        let mut cfg = SdeConfig::new(h, 1e-3, 3.0, NoiseForm::Eigen, 11);
        cfg.divergence_drift = divergence_drift;
        let ens = sde.ensemble(0.5, &cfg, 20_000, &[3.0]).unwrap();
        let hist = ens.histogram(0, 0, 20).unwrap();
        l1_from_masses(&hist.frequencies(), &grid_bin_masses(&pi, &hist)).unwrap()
    };
    let (with, without) = (l1(true), l1(false));
    assert!(without >= 0.05, "{without}");
    assert!(with < without, "{with} vs {without}");
}

#[test]
fn standard_error_scales_with_path_count() {
    let sde = TwoPointSde::canonical();
    let mut cfg = SdeConfig::new(2.0, 1e-3, 0.2, NoiseForm::Eigen, 5);
    cfg.potential = Potential::Zero;
    let se = |paths: usize| {
        sde.ensemble(0.3, &cfg, paths, &[0.2])
            .unwrap()
            .moments(0, 0)
            .standard_error()
    };
    let ratio = se(4000) / se(16_000);
    assert!((ratio - 2.0).abs() <= 0.4, "{ratio}");
}

#[test]
fn effective_potential_in_the_chart() {
    let net = asymmetric_pair();
    let mf = MeanFunction::Logarithmic;
    let theta = ThetaProfile::from_network(&net, &mf).unwrap();
    let sde = TwoPointSde::from_network(&net, &mf, Potential::FreeEnergy).unwrap();
    let h = 0.3;
    for &x in &[0.1, 0.35, 0.6, 0.9] {
        let state = SimplexState::new(vec![x, 1.0 - x]).unwrap();
        let (_, grad) =
            effective_potential(&net, &mf, &state, h, DerivativeScheme::Analytic).unwrap();
        let chart = grad[0] - grad[1];
        let expected =
            sde.potential.derivative(x) + 0.5 * h * theta.theta_prime(x) / theta.theta(x);
        assert!(
            (chart - expected).abs() <= 1e-8 * expected.abs().max(1.0),
            "x = {x}: {chart} vs {expected}"
        );
    }
}

#[test]
fn fold_handles_large_overshoots() {
    for (mut x, expected, crossings) in [
        (-0.25, 0.25, 1),
        (1.5, 0.5, 1),
        (2.25, 0.25, 2),
        (-3.5, 0.5, 4),
        (0.4, 0.4, 0),
    ] {
        assert_eq!(fold_unit(&mut x), crossings);
        assert!((x - expected).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn paths_stay_on_the_simplex(d in 3usize..6, seed in any::<u64>(), edge in any::<bool>()) {
        let mut rng = Stream::new(StreamId::new(seed, tag::TEST, 3));
        let net = random_detailed_balanced(d, 0.5, &mut rng).unwrap();
        let x0 = SimplexState::random_interior(d, 0.05, &mut rng);
        let noise = if edge { NoiseForm::Edge } else { NoiseForm::Eigen };
        let cfg = SdeConfig::new(0.05, 1e-3, 0.1, noise, seed);
        let path = simulate_sde(&net, &MeanFunction::Logarithmic, &x0, &cfg).unwrap();
        for x in &path.trajectory.states {
            prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(x.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn same_stream_same_path() {
    let sde = TwoPointSde::canonical();
    let mut cfg = SdeConfig::new(2.0, 1e-3, 0.5, NoiseForm::Eigen, 99);
    cfg.potential = Potential::Zero;
    let a = sde.simulate(0.3, &cfg).unwrap();
    let b = sde.simulate(0.3, &cfg).unwrap();
    assert_eq!(a, b);
    let m = Moments::of(&a.trajectory.states.iter().map(|x| x[0]).collect::<Vec<_>>());
    assert!(m.mean > 0.0 && m.mean < 1.0);
}

#[test]
fn ensemble_histogram_matches_the_fokker_planck_solution() {
    let sde = TwoPointSde::canonical();
    let (cells, start) = (400, 120);
    let mut values = vec![0.0; cells];
    values[start] = cells as f64;
    let p0 = DensityGrid1D::new(values).unwrap();
    let dt_fp = fp_stable_dt(&sde.theta, 2.0, 0.5, cells);
    let fp = solve_fp(
        &sde.theta,
        &sde.potential,
        2.0,
        0.5,
        &p0,
        0.5,
        dt_fp,
        TimeScheme::ExplicitEuler,
        &[],
    )
    .unwrap();
    let mut cfg = SdeConfig::new(2.0, 1e-4, 0.5, NoiseForm::Eigen, 13);
    cfg.potential = Potential::Zero;
    let ens = sde
        .ensemble(cell_center(start, cells), &cfg, 100_000, &[0.5])
        .unwrap();
    let hist = ens.histogram(0, 0, 50).unwrap();
    let l1 = l1_from_masses(&hist.frequencies(), &grid_bin_masses(&fp.density, &hist)).unwrap();
    assert!(l1 <= 0.05, "{l1}");
}
