use proptest::prelude::*;
use simplexdiff::network::{build_network, build_network_raw, QMatrix, SimplexState};
use simplexdiff::Error;

/// Rates `Q_ij = w_ij / x_i` from a positive vector and symmetric weights,
/// so `x` is the stationary vector by construction.
fn detailed_balanced_rates(x: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut rows = vec![vec![0.0; d]; d];
    let mut k = 0;
    for i in 0..d {
        for j in i + 1..d {
            rows[i][j] = w[k] / x[i];
            rows[j][i] = w[k] / x[j];
            k += 1;
        }
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = -row.iter().sum::<f64>();
    }
    rows
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|d| {
        (
            prop::collection::vec(0.05f64..1.0, d),
            prop::collection::vec(0.1f64..3.0, d * (d - 1) / 2),
        )
    })
}

proptest! {
    #[test]
    fn recovers_the_constructed_stationary_vector((raw, w) in instance()) {
        let total: f64 = raw.iter().sum();
        let xs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let net = build_network(QMatrix::from_rates(&detailed_balanced_rates(&xs, &w)).unwrap()).unwrap();
        for (a, b) in net.x_stat().iter().zip(&xs) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!(net.stationarity_residual() <= 1e-10);
        prop_assert!((net.x_stat().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(net.detailed_balance_residual() <= 1e-12);
    }

    #[test]
    fn weights_are_symmetric_with_zero_row_sums((raw, w) in instance(), xi_seed in prop::collection::vec(-1.0f64..1.0, 7)) {
        let total: f64 = raw.iter().sum();
        let xs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let net = build_network(QMatrix::from_rates(&detailed_balanced_rates(&xs, &w)).unwrap()).unwrap();
        let omega = net.omega();
        let d = net.d();
        for i in 0..d {
            let row: f64 = (0..d).map(|j| omega[(i, j)]).sum();
            prop_assert!(row.abs() < 1e-12);
            for j in 0..d {
                prop_assert!((omega[(i, j)] - omega[(j, i)]).abs() < 1e-10);
                if i != j {
                    prop_assert!(omega[(i, j)] >= 0.0);
                }
            }
        }
        let xi = &xi_seed[..d];
        let form: f64 = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| xi[i] * omega[(i, j)] * xi[j]).sum();
        prop_assert!(form <= 1e-12);
    }

    #[test]
    fn bad_row_sums_are_rejected(d in 2usize..5, bump in 1e-6f64..1.0) {
        let mut rows = vec![vec![1.0; d]; d];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = -((d - 1) as f64);
        }
        rows[0][0] += bump;
        prop_assert!(matches!(QMatrix::from_rates(&rows), Err(Error::BadQMatrix(_))));
    }

    #[test]
    fn normalized_states_are_on_the_simplex(raw in prop::collection::vec(0.0f64..10.0, 2..9)) {
        prop_assume!(raw.iter().sum::<f64>() > 0.0);
        let x = SimplexState::normalized(raw).unwrap();
        prop_assert!((x.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(x.interior_margin() >= 0.0);
    }
}

#[test]
fn three_cycle_with_unequal_products_is_not_balanced() {
    let rows = vec![
        vec![-3.0, 1.0, 2.0],
        vec![2.0, -3.0, 1.0],
        vec![1.0, 2.0, -3.0],
    ];
    let q = QMatrix::from_rates(&rows).unwrap();
    assert!(matches!(
        build_network(q.clone()),
        Err(Error::NotDetailedBalanced { .. })
    ));
    let raw = build_network_raw(q).unwrap();
    assert!(raw.detailed_balance_residual() > 0.1);
    assert!(raw.stationarity_residual() < 1e-12);
}
