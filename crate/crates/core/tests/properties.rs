use fiscal_svar::bootstrap::{quantile_bands, simulate_bootstrap_series};
use fiscal_svar::dgp::{simulate_var, DgpSpec};
use fiscal_svar::ingest::{build_panel, read_csv, ColumnSchema};
use fiscal_svar::series::{first_difference, hall_transform, net_expenditure, Quarter, QuarterlySeries, Unit};
use fiscal_svar::svar::{identify_cholesky, irf, multiplier_path};
use fiscal_svar::var::estimate_var;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn series(values: Vec<f64>, unit: Unit) -> QuarterlySeries {
    QuarterlySeries::new(Quarter::new(1999, 1).unwrap(), values, unit).unwrap()
}

fn pd_matrix(k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, k * k).prop_map(move |v| {
        let a = DMatrix::from_vec(k, k, v);
        &a * a.transpose() + DMatrix::identity(k, k) * 0.1
    })
}

proptest! {
    #[test]
    fn hall_transform_is_scale_free(
        x in prop::collection::vec(1.0f64..100.0, 2..30),
        lambda in 0.01f64..100.0,
    ) {
        let y: Vec<f64> = x.iter().map(|v| v * 3.0 + 50.0).collect();
        let base = hall_transform(&series(x.clone(), Unit::LevelCurrency), &series(y.clone(), Unit::LevelCurrency)).unwrap();
        let scaled = hall_transform(
            &series(x.iter().map(|v| v * lambda).collect(), Unit::LevelCurrency),
            &series(y.iter().map(|v| v * lambda).collect(), Unit::LevelCurrency),
        ).unwrap();
        for (a, b) in base.values().iter().zip(scaled.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        prop_assert_eq!(base.len(), x.len() - 1);
        prop_assert_eq!(base.start(), Quarter::new(1999, 2).unwrap());
    }

    #[test]
    fn net_expenditure_is_linear(
        a in prop::collection::vec(-100.0f64..100.0, 1..20),
        shift in -10.0f64..10.0,
    ) {
        let s: Vec<f64> = a.iter().map(|v| v.abs() / 10.0).collect();
        let b: Vec<f64> = vec![shift; a.len()];
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = net_expenditure(&series(ab, Unit::LevelCurrency), &series(s.clone(), Unit::LevelCurrency)).unwrap();
        let rhs = net_expenditure(&series(a, Unit::LevelCurrency), &series(s, Unit::LevelCurrency)).unwrap();
        for (l, r) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((l - (r + shift)).abs() < 1e-12);
        }
    }

    #[test]
    fn first_difference_shrinks_by_one(x in prop::collection::vec(-5.0f64..5.0, 2..40)) {
        let d = first_difference(&series(x.clone(), Unit::RatePercent)).unwrap();
        prop_assert_eq!(d.len(), x.len() - 1);
        prop_assert_eq!(d.start(), Quarter::new(1999, 2).unwrap());
    }

    #[test]
    fn cholesky_reconstructs(sigma in pd_matrix(4)) {
        let model = identify_cholesky(&sigma, &["G", "T", "Y", "i"]).unwrap();
        let b = model.impact();
        prop_assert!((b * b.transpose() - &sigma).amax() < 1e-10);
        for i in 0..4 {
            prop_assert!(b[(i, i)] > 0.0);
            for j in i + 1..4 {
                prop_assert_eq!(b[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn first_ordered_impact_is_own_standard_deviation(sigma in pd_matrix(4), perm in Just([2usize, 0, 3, 1])) {
        let b = identify_cholesky(&sigma, &["a", "b", "c", "d"]).unwrap();
        prop_assert_eq!(b.impact()[(0, 0)], sigma[(0, 0)].sqrt());
        let permuted = DMatrix::from_fn(4, 4, |r, c| sigma[(perm[r], perm[c])]);
        let bp = identify_cholesky(&permuted, &["c", "a", "d", "b"]).unwrap();
        prop_assert_eq!(bp.impact()[(0, 0)], sigma[(2, 2)].sqrt());
    }

    #[test]
    fn band_levels_nest(samples in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 1..60), 1..6)) {
        let bands = quantile_bands(&samples, &[68.0, 90.0]).unwrap();
        let narrow = bands.level(68.0).unwrap();
        let wide = bands.level(90.0).unwrap();
        for h in 0..samples.len() {
            prop_assert!(wide.lower[h] <= narrow.lower[h]);
            prop_assert!(narrow.lower[h] <= narrow.upper[h]);
            prop_assert!(narrow.upper[h] <= wide.upper[h]);
        }
    }

    #[test]
    fn csv_row_order_is_irrelevant(seed in 0u64..1000) {
        let panel = simulate_var(&DgpSpec::fiscal_reference(30, 7)).unwrap();
        let data = fiscal_svar::dgp::synthetic_dataset(&panel, "ZZ", 3).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf, &ColumnSchema::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        // Deterministic shuffle keyed by seed.
        let mut keyed: Vec<(u64, &str)> = lines
            .iter()
            .enumerate()
            .map(|(i, l)| ((i as u64 + 1).wrapping_mul(seed.wrapping_mul(0x9E37_79B9) | 1) % 9973, *l))
            .collect();
        keyed.sort();
        let shuffled = std::iter::once(header)
            .chain(keyed.into_iter().map(|(_, l)| l))
            .collect::<Vec<_>>()
            .join("\n");
        let sorted = read_csv(text.as_bytes(), &ColumnSchema::default(), "ZZ").unwrap();
        let permuted = read_csv(shuffled.as_bytes(), &ColumnSchema::default(), "ZZ").unwrap();
        let window = sorted.coverage();
        prop_assert_eq!(build_panel(&sorted, window).unwrap(), build_panel(&permuted, window).unwrap());
    }
}

#[test]
fn multipliers_are_invariant_to_covariance_scale() {
    let panel = simulate_var(&DgpSpec::fiscal_reference(84, 21)).unwrap();
    let est = estimate_var(&panel, 4).unwrap();
    let base_model = identify_cholesky(est.sigma(), panel.labels()).unwrap();
    let base = multiplier_path(&irf(&est, &base_model, 20, 0).unwrap(), 0, 2, 20).unwrap();
    for alpha in [0.25, 4.0] {
        let model = identify_cholesky(&(est.sigma() * alpha), panel.labels()).unwrap();
        assert_eq!(model.impact(), &(base_model.impact() * alpha.sqrt()));
        let path = multiplier_path(&irf(&est, &model, 20, 0).unwrap(), 0, 2, 20).unwrap();
        assert_eq!(path.values(), base.values());
    }
}

#[test]
fn multiplier_equals_ratio_of_running_sums() {
    let panel = simulate_var(&DgpSpec::fiscal_reference(84, 22)).unwrap();
    let est = estimate_var(&panel, 4).unwrap();
    let model = identify_cholesky(est.sigma(), panel.labels()).unwrap();
    let set = irf(&est, &model, 20, 0).unwrap();
    let path = multiplier_path(&set, 0, 2, 20).unwrap();
    let (mut g, mut y) = (0.0, 0.0);
    for h in 1..=20 {
        g += set.responses()[(h - 1, 0)];
        y += set.responses()[(h - 1, 2)];
        assert_eq!(path.values()[h - 1], y / g);
        assert_eq!(set.cumulative()[(h - 1, 0)], g);
    }
}

#[test]
fn identity_resample_reconstructs_panel() {
    let panel = simulate_var(&DgpSpec::fiscal_reference(84, 23)).unwrap();
    let est = estimate_var(&panel, 4).unwrap();
    let sim = simulate_bootstrap_series(&est, est.residuals(), &panel).unwrap();
    assert!((sim.x() - panel.x()).amax() < 1e-10);
    assert_eq!(sim.z(), panel.z());
}
