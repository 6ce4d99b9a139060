//! Calibration recovers the parameters that generated a series.

use decumulation::esg::{
    calibrate, calibrate_returns, simulate, simulate_with, EconState, EsgParams, HistoricalSeries,
    PanelSpec, ReturnSeries, ShockVector,
};
use decumulation::Error;

fn long_series(p: &EsgParams, init: &EconState, years: usize, noise: bool) -> ReturnSeries {
    let spec = PanelSpec::new(1, years, 99, 0.7);
    let panel = if noise {
        simulate(p, init, &spec).unwrap()
    } else {
        simulate_with(p, init, &spec, |_| ShockVector::zero()).unwrap()
    };
    ReturnSeries::from_states(panel.path_states(0), 0)
}

#[test]
fn noiseless_transient_is_recovered_exactly() {
    let mut p = EsgParams::published();
    p.sigma_q = 0.0;
    p.sigma_s = 0.0;
    p.sigma_e = 0.0;
    p.sigma_n = 0.0;
    p.sigma_b = 0.0;
    p.sigma_o = 0.0;
    p.sigma_h = 0.0;
    // Start far from the fixed point so the decay identifies every coefficient.
    let init = EconState {
        inflation: 0.2,
        real_rate: -0.3,
        short_rate: -0.1,
        dom_equity: 0.9,
        intl_equity: -0.7,
        dom_bond: 0.4,
        intl_bond: -0.2,
        house: 0.3,
    };
    let fit = calibrate_returns(&long_series(&p, &init, 60, false)).unwrap().params;
    for ((name, got), (_, want)) in fit.entries().zip(p.entries()) {
        assert!((got - want).abs() <= 1e-8, "{name}: {got} vs {want}");
    }
}

#[test]
fn long_noisy_series_is_recovered_within_tolerance() {
    let p = EsgParams::published();
    let init = EconState::stationary(&p);
    let fit = calibrate_returns(&long_series(&p, &init, 100_000, true)).unwrap().params;
    for ((name, got), (_, want)) in fit.entries().zip(p.entries()) {
        let tol = if name.starts_with("sigma") { 0.005 } else { 0.01 };
        assert!((got - want).abs() <= tol, "{name}: {got} vs {want}");
    }
}

#[test]
fn too_little_history_is_rejected() {
    let text = "year,cpi,s,E,N,B,O,HPI\n2019,114.8,0.75,100,100,100,100,100\n2020,116.6,0.1,101,102,103,104,105\n";
    let h = HistoricalSeries::from_csv_reader(text.as_bytes(), "short.csv").unwrap();
    assert!(matches!(calibrate(&h), Err(Error::InsufficientData(_))));
}

#[test]
fn collinear_regressors_name_the_equation() {
    let p = EsgParams::published();
    let init = EconState::stationary(&p);
    // Every factor constant: the first regression is singular.
    let r = long_series(&p, &init, 40, false);
    match calibrate_returns(&r) {
        Err(Error::Calibration { equation, .. }) => assert_eq!(equation, "inflation"),
        other => panic!("expected a calibration error, got {other:?}"),
    }
}
