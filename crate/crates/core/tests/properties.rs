//! Invariants of the building blocks, checked over random inputs.

use decumulation::account::{age_pension, next_wealth, PensionParams};
use decumulation::data;
use decumulation::esg::{self, step_esg, EconState, EsgParams, PanelSpec, ShockVector};
use decumulation::mortality::Gender;
use decumulation::utility::{consumption_utility, UtilityParams};
use proptest::prelude::*;

const FREE_AREA: f64 = 263_250.0;
/// Largest real wealth whose deemed income stays inside the income-test free area.
const INCOME_FREE_WEALTH: f64 = 51_800.0 + (4_536.0 - 51_800.0 * 0.0025) / 0.0225;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn pension_is_non_increasing_in_wealth(
        w in 0.0..2.0e6f64,
        dw in 0.0..1.0e5f64,
        q in 0.5..5.0f64,
    ) {
        let p = PensionParams::default();
        prop_assert!(age_pension(w + dw, q, &p).unwrap() <= age_pension(w, q, &p).unwrap());
    }

    #[test]
    fn pension_is_homogeneous_in_prices(w in 0.0..2.0e6f64, q in 0.5..5.0f64, k in 0.2..4.0f64) {
        let p = PensionParams::default();
        let scaled = age_pension(k * w, k * q, &p).unwrap();
        let base = k * age_pension(w, q, &p).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-9 * 24_619.0 * k * q);
    }

    #[test]
    fn full_pension_while_both_tests_are_unbinding(frac in 0.0..=1.0f64, q in 0.5..5.0f64) {
        let p = PensionParams::default();
        let a = age_pension(frac * FREE_AREA.min(INCOME_FREE_WEALTH) * q, q, &p).unwrap();
        prop_assert!((a - 24_619.0 * q).abs() <= 1e-9 * a);
    }

    #[test]
    fn wealth_stays_non_negative(
        w in 0.0..3.0e6f64,
        a in 0.0..1.0e5f64,
        share in 0.0..=1.0f64,
        fee in 0.0..5.0e4f64,
        r in -3.0..3.0f64,
    ) {
        let c = share * (w + a);
        prop_assert!(next_wealth(w, c, a, fee, r) >= 0.0);
    }

    #[test]
    fn utility_increases_above_the_floor(
        c in 1.0..1.0e6f64,
        dc in 1.0..1.0e5f64,
        rho in 1.1..10.0f64,
    ) {
        let p = UtilityParams { rho, money_unit: 5.0e5, ..Default::default() };
        prop_assert!(consumption_utility(c + dc, &p) > consumption_utility(c, &p));
    }

    #[test]
    fn utility_is_flat_below_the_floor(c in -1.0e3..1e-10f64, rho in 1.1..10.0f64) {
        let p = UtilityParams { rho, ..Default::default() };
        prop_assert_eq!(consumption_utility(c, &p), consumption_utility(p.floor_epsilon, &p));
    }

    #[test]
    fn survival_is_non_increasing(age in 50u32..100, female in any::<bool>()) {
        let table = data::life_table().unwrap();
        let g = if female { Gender::Female } else { Gender::Male };
        let horizon = (table.terminal_age() + 1 - age) as usize;
        let c = table.survival_curve(g, age, horizon).unwrap();
        prop_assert_eq!(c.tpx[0], 1.0);
        prop_assert!(c.tpx.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(c.tpx.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nominal_rate_is_real_rate_plus_inflation(seed in any::<u64>()) {
        let p = EsgParams::published();
        let init = data::history().unwrap().last_state().unwrap();
        let panel = esg::simulate(&p, &init, &PanelSpec::new(8, 41, seed, 0.7)).unwrap();
        for m in 0..panel.paths() {
            for s in panel.path_states(m) {
                prop_assert_eq!(s.short_rate, s.real_rate + s.inflation);
            }
        }
    }

    /// A shock to one factor leaves every factor earlier in the cascade unchanged.
    #[test]
    fn shocks_only_propagate_downstream(
        z in prop::array::uniform7(-3.0..3.0f64),
        k in 0usize..7,
        bump in 0.01..1.0f64,
    ) {
        let p = EsgParams::published();
        let prev = EconState::stationary(&p);
        let base = step_esg(&p, &prev, &ShockVector::scaled(&p, z)).unwrap();
        let mut z2 = z;
        z2[k] += bump;
        let moved = step_esg(&p, &prev, &ShockVector::scaled(&p, z2)).unwrap();
        let order = |s: &EconState| [
            s.inflation, s.real_rate, s.dom_equity, s.intl_equity, s.dom_bond, s.intl_bond, s.house,
        ];
        let (a, b) = (order(&base), order(&moved));
        for j in 0..k {
            prop_assert_eq!(a[j], b[j], "factor {} moved after a shock to {}", j, k);
        }
        prop_assert_ne!(a[k], b[k]);
        prop_assert_eq!(step_esg(&p, &prev, &ShockVector::scaled(&p, z)).unwrap(), base);
    }
}
