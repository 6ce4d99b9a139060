//! CRRA consumption and bequest utility and mortality-weighted lifetime utility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mortality::SurvivalCurve;
use crate::tape::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityParams {
    /// Relative risk aversion.
    pub rho: f64,
    /// Bequest motive in `[0, 1)`.
    pub phi: f64,
    /// Lower clamp on real consumption and wealth, in dollars.
    pub floor_epsilon: f64,
    /// Dollar amount treated as one unit of money inside the utility.
    /// Changing it scales every utility by `money_unit^(rho - 1)`.
    pub money_unit: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        Self {
            rho: 5.0,
            phi: 0.5,
            floor_epsilon: 1e-10,
            money_unit: 1.0,
        }
    }
}

impl UtilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) || !self.rho.is_finite() || self.rho == 1.0 {
            return Err(Error::Config(format!("rho must be finite, >= 0 and != 1, got {}", self.rho)));
        }
        if !(0.0..1.0).contains(&self.phi) {
            return Err(Error::Config(format!("phi must lie in [0, 1), got {}", self.phi)));
        }
        if !(self.floor_epsilon > 0.0) {
            return Err(Error::Config("floor_epsilon must be positive".into()));
        }
        if !(self.money_unit > 0.0) || !self.money_unit.is_finite() {
            return Err(Error::Config("money_unit must be positive".into()));
        }
        Ok(())
    }

    /// `(phi / (1 - phi))^rho`; zero without a bequest motive.
    pub fn bequest_weight(&self) -> f64 {
        if self.phi == 0.0 {
            0.0
        } else {
            (self.phi / (1.0 - self.phi)).powf(self.rho)
        }
    }

    fn crra<T: Real>(&self, x: T) -> T {
        let e = 1.0 - self.rho;
        (x.max_c(self.floor_epsilon) / self.money_unit).powf(e) / e
    }
}

/// `u(c) = max(c, floor)^(1 - rho) / (1 - rho)` for real consumption `c`.
pub fn consumption_utility(c: f64, p: &UtilityParams) -> f64 {
    p.crra(c)
}

/// `v(w) = (phi / (1 - phi))^rho * u(w)` for real residual wealth `w`.
pub fn bequest_utility(w: f64, p: &UtilityParams) -> f64 {
    period_bequest(w, p)
}

pub fn period_consumption<T: Real>(c: T, p: &UtilityParams) -> T {
    p.crra(c)
}

pub fn period_bequest<T: Real>(w: T, p: &UtilityParams) -> T {
    let k = p.bequest_weight();
    if k == 0.0 {
        w.lift(0.0)
    } else {
        p.crra(w) * k
    }
}

/// `sum_t tpx[t] u(c_t) + dq[t] v(w_t)` over real consumption and wealth paths.
pub fn lifetime_utility(
    consumption: &[f64],
    wealth: &[f64],
    curve: &SurvivalCurve,
    p: &UtilityParams,
) -> Result<f64> {
    let n = curve.horizon() + 1;
    if consumption.len() != n || wealth.len() != n {
        return Err(Error::Dimension(format!(
            "paths of length {} and {} for a curve of length {n}",
            consumption.len(),
            wealth.len()
        )));
    }
    let mut total = 0.0;
    for t in 0..n {
        total += curve.tpx[t] * consumption_utility(consumption[t], p);
        if curve.dq[t] != 0.0 {
            total += curve.dq[t] * bequest_utility(wealth[t], p);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::Gender;

    fn params(rho: f64, phi: f64) -> UtilityParams {
        UtilityParams {
            rho,
            phi,
            ..Default::default()
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn consumption_examples() {
        assert_eq!(consumption_utility(1.0, &params(5.0, 0.5)), -0.25);
        assert!(rel(consumption_utility(50_000.0, &params(5.0, 0.5)), -4e-20) < 1e-12);
        assert_eq!(consumption_utility(2.0, &params(2.0, 0.5)), -0.5);
    }

    #[test]
    fn bequest_examples() {
        assert_eq!(bequest_utility(123.0, &params(5.0, 0.0)), 0.0);
        assert_eq!(bequest_utility(1.0, &params(5.0, 0.5)), -0.25);
        assert!(rel(bequest_utility(100_000.0, &params(5.0, 0.5)), -2.5e-21) < 1e-12);
    }

    #[test]
    fn money_unit_rescales_by_a_constant() {
        let base = params(5.0, 0.5);
        let scaled = UtilityParams {
            money_unit: 500_000.0,
            ..base
        };
        let k = 500_000f64.powf(4.0);
        for c in [1_000.0, 50_000.0, 2e6] {
            assert!(rel(consumption_utility(c, &scaled), k * consumption_utility(c, &base)) < 1e-12);
        }
    }

    #[test]
    fn floor_clamps() {
        let p = params(5.0, 0.5);
        assert_eq!(consumption_utility(0.0, &p), consumption_utility(1e-10, &p));
        assert!(consumption_utility(0.0, &p).is_finite());
    }

    #[test]
    fn pure_consumption_sum() {
        let curve = SurvivalCurve::from_tpx(67, Gender::Male, vec![1.0; 4]).unwrap();
        let p = params(2.0, 0.0);
        let c = [1.0, 2.0, 4.0, 8.0];
        let u = lifetime_utility(&c, &[0.0; 4], &curve, &p).unwrap();
        assert!((u - (-1.0 - 0.5 - 0.25 - 0.125)).abs() < 1e-15);
    }

    #[test]
    fn geometric_survival() {
        let pr: f64 = 0.9;
        let tpx: Vec<f64> = (0..6).map(|t| pr.powi(t)).collect();
        let curve = SurvivalCurve::from_tpx(67, Gender::Female, tpx).unwrap();
        let p = params(5.0, 0.0);
        let u = lifetime_utility(&[2.0; 6], &[0.0; 6], &curve, &p).unwrap();
        let expected = consumption_utility(2.0, &p) * (1.0 - pr.powi(6)) / (1.0 - pr);
        assert!(rel(u, expected) < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let curve = SurvivalCurve::from_tpx(67, Gender::Male, vec![1.0; 3]).unwrap();
        let p = params(5.0, 0.5);
        assert!(matches!(
            lifetime_utility(&[1.0; 2], &[1.0; 3], &curve, &p),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn validation() {
        assert!(params(1.0, 0.5).validate().is_err());
        assert!(params(5.0, 1.0).validate().is_err());
        assert!(params(5.0, 0.0).validate().is_ok());
    }
}
