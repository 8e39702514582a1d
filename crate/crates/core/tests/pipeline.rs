use heitler::analytic::{compensation_condition, gn_filtered, gn_homodyne};
use heitler::dynamics::{g2_tau_filtered, linear_grid};
use heitler::model::{ConfigFile, HomodyneConfig, SystemParams, TruncationConfig};
use heitler::moments::{gn_from_moments, liouvillian_steady_state, sensor_limit_gn, solve_sensor_hierarchy};
use heitler::trajectories::{simulate_batch, steady_click_rate, waiting_time_cdf, ClickTrain};

#[test]
fn config_file_drives_sensor_limit() {
    let fp = compensation_condition(1.0, 0.2).f_minus;
    let cfg = ConfigFile::parse(&format!("Gamma = 0.2\nf_prime = {fp}\nn_max = 6\n")).unwrap();
    let (p, h, t) = cfg.resolve();
    for n in [2, 3] {
        let lim = sensor_limit_gn(&p, &h, &t, n, 1e-4).unwrap();
        let want = gn_homodyne(n, 1.0, 0.2, fp).unwrap();
        assert!((lim.value - want).abs() < 1e-4, "N={n}: {} vs {want}", lim.value);
    }
}

#[test]
fn sensor_hierarchy_is_exact_at_finite_drive() {
    let t = TruncationConfig { n_max: 6, ..Default::default() };
    for w in [0.05, 0.3, 2.0] {
        let p = SystemParams::new(w, 1.0, 0.5, 1e-4, 0.0);
        let h = HomodyneConfig::none();
        let exact = liouvillian_steady_state(&p, &h, &t).unwrap().moments(&p, 4);
        let hier = solve_sensor_hierarchy(&p, 4).unwrap();
        let a = gn_from_moments(&exact, 2).unwrap();
        let b = gn_from_moments(&hier, 2).unwrap();
        assert!((a - b).abs() < 1e-5, "{w}: {a} vs {b}");
    }
    // at weak drive both reduce to the closed form
    let p = SystemParams::new(1e-4, 1.0, 0.5, 1e-4, 0.0);
    let hier = solve_sensor_hierarchy(&p, 4).unwrap();
    assert!((gn_from_moments(&hier, 2).unwrap() - gn_filtered(2, 1.0, 0.5)).abs() < 1e-6);
}

#[test]
fn filtered_correlation_decorrelates() {
    let p = SystemParams::new(1e-3, 1.0, 0.2, 1e-3, 0.0);
    let t = TruncationConfig::default();
    let long = 50.0 / 0.2;
    for h in [HomodyneConfig::none(), HomodyneConfig::with_f_prime(compensation_condition(1.0, 0.2).f_minus)] {
        let s = g2_tau_filtered(&p, &h, &t, &[0.0, long]).unwrap();
        assert!((s.values[1].re - 1.0).abs() < 1e-6, "{}", s.values[1]);
    }
    // scaling the unit of time leaves the curve unchanged in units of 1/γ
    let grid = linear_grid(10.0, 11);
    let a = g2_tau_filtered(&p, &HomodyneConfig::none(), &t, &grid).unwrap();
    let b = g2_tau_filtered(&p.scaled(3.0), &HomodyneConfig::none(), &t, &linear_grid(10.0 / 3.0, 11)).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).norm() < 1e-9);
    }
}

#[test]
fn merged_trains_match_steady_rate() {
    let p = SystemParams::new(0.2, 1.0, 0.5, 0.3, 0.0);
    let h = HomodyneConfig::none();
    let t = TruncationConfig { n_max: 5, tol: 1e-6, ..Default::default() };
    let trains = simulate_batch(&p, &h, &t, 2e4, &[11, 12, 13]).unwrap();
    let all = ClickTrain::concat(&trains).unwrap();
    let expected = steady_click_rate(&p, &h, &t).unwrap();
    assert!(all.len() > 500);
    assert!((all.rate() - expected).abs() <= 3.0 * all.rate_stderr(), "{} vs {expected}", all.rate());
    let cdf = waiting_time_cdf(&all).unwrap();
    let i = cdf.x_grid.iter().position(|&x| x >= 100.0).unwrap();
    assert_eq!(cdf.cdf[i], 1.0);
}
