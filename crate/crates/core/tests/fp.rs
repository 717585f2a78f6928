use simplexdiff::fp::{
    cell_center, fp_stable_dt, solve_fp, stationary_density, DensityGrid1D, GreenFunctionSpec,
    Potential1D, ThetaProfile, TimeScheme, WassersteinCoordinate,
};
use simplexdiff::geometry::MeanFunction;
use simplexdiff::network::{build_network, QMatrix};

fn canonical_run(p0: &DensityGrid1D, t: f64, scheme: TimeScheme) -> DensityGrid1D {
    let theta = ThetaProfile::canonical();
    let dt = fp_stable_dt(&theta, 2.0, 0.5, p0.cells());
    solve_fp(
        &theta,
        &Potential1D::zero(),
        2.0,
        0.5,
        p0,
        t,
        dt,
        scheme,
        &[],
    )
    .unwrap()
    .density
}

#[test]
fn stationary_density_is_preserved() {
    let net = build_network(QMatrix::from_rates(&[vec![1.0], vec![3.0]]).unwrap()).unwrap();
    let mf = MeanFunction::Logarithmic;
    let theta = ThetaProfile::from_network(&net, &mf).unwrap();
    let v = Potential1D::free_energy(&net, &mf).unwrap();
    let h = 0.2;
    let omega = 1.5;
    let pi = stationary_density(&theta, &v, h, 200).unwrap();
    let dt = fp_stable_dt(&theta, h, omega, 200);
    let sol = solve_fp(
        &theta,
        &v,
        h,
        omega,
        &pi,
        1.0,
        dt,
        TimeScheme::ExplicitEuler,
        &[],
    )
    .unwrap();
    let gap = pi
        .values()
        .iter()
        .zip(sol.density.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 1e-6, "{gap:e}");
    assert!(sol.max_mass_error <= 1e-12);
}

#[test]
fn mass_is_conserved_from_a_point_mass() {
    let mut values = vec![0.0; 300];
    values[7] = 300.0;
    let p0 = DensityGrid1D::new(values).unwrap();
    let theta = ThetaProfile::logarithmic();
    for scheme in [TimeScheme::ExplicitEuler, TimeScheme::Heun] {
        let dt = fp_stable_dt(&theta, 1.0, 1.0, 300);
        let sol = solve_fp(
            &theta,
            &Potential1D::zero(),
            1.0,
            1.0,
            &p0,
            0.2,
            dt,
            scheme,
            &[0.1],
        )
        .unwrap();
        assert!(sol.max_mass_error <= 1e-12);
        assert_eq!(sol.snapshots.len(), 1);
        assert!(sol.density.values().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn green_function_properties() {
    let spec = GreenFunctionSpec::new(&ThetaProfile::canonical()).unwrap();
    let theta = ThetaProfile::canonical();
    let t = 0.05;
    for &(x, z) in &[(0.2, 0.7), (0.05, 0.5), (0.4, 0.93)] {
        // θ^{1/2} G is symmetric in its two spatial arguments.
        let a = theta.theta(x).sqrt() * spec.green_function(t, x, z).unwrap();
        let b = theta.theta(z).sqrt() * spec.green_function(t, z, x).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }
    let cells = 4000;
    let mass: f64 = (0..cells)
        .map(|m| spec.green_function(t, cell_center(m, cells), 0.3).unwrap())
        .sum::<f64>()
        / cells as f64;
    assert!((mass - 1.0).abs() <= 2e-3, "{mass}");

    let pi = stationary_density(&theta, &Potential1D::zero(), 1.0, 400).unwrap();
    let evolved = spec.evolve(&pi, 0.1).unwrap();
    assert!(evolved.l1_distance(&pi).unwrap() <= 1e-3);
}

#[test]
fn green_evolution_matches_fp_and_improves_with_resolution() {
    let spec = GreenFunctionSpec::new(&ThetaProfile::canonical()).unwrap();
    let mut gaps = Vec::new();
    for cells in [50, 100, 200, 400] {
        let p0 = DensityGrid1D::from_fn(cells, |x| 2.0 * x).unwrap();
        let fp = canonical_run(&p0, 0.3, TimeScheme::ExplicitEuler);
        let green = spec.evolve(&p0, 0.3).unwrap();
        gaps.push(fp.l1_distance(&green).unwrap());
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] <= 2e-3, "{gaps:?}");
}

#[test]
fn fp_matches_green_evolution_on_a_fine_grid() {
    let spec = GreenFunctionSpec::new(&ThetaProfile::canonical()).unwrap();
    let p0 = DensityGrid1D::from_fn(1600, |x| 2.0 * x).unwrap();
    let fp = canonical_run(&p0, 0.3, TimeScheme::ExplicitEuler);
    let gap = fp.l1_distance(&spec.evolve(&p0, 0.3).unwrap()).unwrap();
    assert!(gap <= 5e-4, "{gap:e}");
}

/// Largest `|w_t - w_yy / Z²|` over `x ∈ [0.1, 0.9]` for `w = θ^{1/2} p`,
/// with nonuniform second differences in `y`.
fn heat_residual(cells: usize) -> f64 {
    let theta = ThetaProfile::canonical();
    let coord = WassersteinCoordinate::new(&theta).unwrap();
    let z = coord.total_length();
    let p0 = DensityGrid1D::from_fn(cells, |x| 2.0 * x).unwrap();
    let dt = fp_stable_dt(&theta, 2.0, 0.5, cells);
    let n1 = (0.05 / dt).round() as u64;
    let n2 = n1 + 20;
    let (t1, t2) = (n1 as f64 * dt, n2 as f64 * dt);
    let sol = solve_fp(
        &theta,
        &Potential1D::zero(),
        2.0,
        0.5,
        &p0,
        t2,
        dt,
        TimeScheme::Heun,
        &[t1, t2],
    )
    .unwrap();
    let x: Vec<f64> = (0..cells).map(|m| cell_center(m, cells)).collect();
    let y: Vec<f64> = x.iter().map(|&x| coord.y(x).unwrap()).collect();
    let w = |k: usize| -> Vec<f64> {
        sol.snapshots[k]
            .1
            .values()
            .iter()
            .zip(&x)
            .map(|(p, &x)| theta.theta(x).sqrt() * p)
            .collect()
    };
    let (w1, w2) = (w(0), w(1));
    let mut worst = 0.0_f64;
    for m in 1..cells - 1 {
        if !(0.1..=0.9).contains(&x[m]) {
            continue;
        }
        let wyy = |w: &[f64]| {
            let (hl, hr) = (y[m] - y[m - 1], y[m + 1] - y[m]);
            2.0 * (hl * w[m + 1] - (hl + hr) * w[m] + hr * w[m - 1]) / (hl * hr * (hl + hr))
        };
        let wt = (w2[m] - w1[m]) / (t2 - t1);
        let rhs = 0.5 * (wyy(&w1) + wyy(&w2)) / (z * z);
        worst = worst.max((wt - rhs).abs());
    }
    worst
}

#[test]
fn heat_coordinate_residual_is_second_order() {
    let r: Vec<f64> = [100, 200, 400].iter().map(|&m| heat_residual(m)).collect();
    // Second order: halving the cell width should cut the residual about fourfold.
    assert!(r[0] / r[1] >= 3.0 && r[1] / r[2] >= 3.0, "{r:?}");
}
