use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Quadratic tariff `F(L) = aL² + bL + c` (currency/kWh at total demand `L` kW)
/// together with the billing constant `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriceModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kappa: f64,
}

impl Default for PriceModel {
    fn default() -> Self {
        Self {
            a: 0.01,
            b: 0.05,
            c: 0.1,
            kappa: 1.0,
        }
    }
}

impl PriceModel {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.c, self.kappa].iter().all(|v| v.is_finite());
        // a > 0 with b, c >= 0 makes F strictly increasing and strictly convex on L >= 0
        if !finite || self.a <= 0.0 || self.b < 0.0 || self.c < 0.0 || self.kappa <= 0.0 {
            return Err(Error::Config(format!(
                "price model needs a > 0, b >= 0, c >= 0, kappa > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn price(&self, load_kw: f64) -> Result<f64> {
        check_load(load_kw)?;
        Ok(self.price_unchecked(load_kw))
    }

    /// Network cost `C(L) = L·F(L)`.
    pub fn network_cost(&self, load_kw: f64) -> Result<f64> {
        check_load(load_kw)?;
        Ok(load_kw * self.price_unchecked(load_kw))
    }

    /// Marginal network cost `C'(L) = 3aL² + 2bL + c`.
    pub fn marginal_cost(&self, load_kw: f64) -> f64 {
        3.0 * self.a * load_kw * load_kw + 2.0 * self.b * load_kw + self.c
    }

    /// Share of `kappa·C(L_total)` owed by a user drawing `user_kw`.
    pub fn user_bill(&self, user_kw: f64, total_kw: f64) -> Result<f64> {
        check_load(total_kw)?;
        if !(user_kw >= 0.0) {
            return Err(Error::Domain(format!("user demand must be nonnegative, got {user_kw}")));
        }
        if user_kw > total_kw * (1.0 + 1e-12) {
            return Err(Error::Contract(format!(
                "user demand {user_kw} exceeds total demand {total_kw}"
            )));
        }
        if total_kw == 0.0 {
            return Ok(0.0);
        }
        Ok(self.kappa * (user_kw / total_kw) * self.network_cost(total_kw)?)
    }

    pub(crate) fn price_unchecked(&self, load_kw: f64) -> f64 {
        (self.a * load_kw + self.b) * load_kw + self.c
    }
}

fn check_load(load_kw: f64) -> Result<()> {
    if load_kw >= 0.0 && load_kw.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("demand must be a finite nonnegative kW value, got {load_kw}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn price_examples() {
        let m = PriceModel::default();
        assert_eq!(m.price(0.0).unwrap(), 0.1);
        assert!((m.price(10.0).unwrap() - 1.6).abs() < 1e-12);
        assert!(matches!(m.price(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn network_cost_examples() {
        let m = PriceModel::default();
        assert_eq!(m.network_cost(0.0).unwrap(), 0.0);
        assert!((m.network_cost(10.0).unwrap() - 16.0).abs() < 1e-12);
        assert!(m.network_cost(-0.5).is_err());
    }

    #[test]
    fn billing_examples() {
        let m = PriceModel { kappa: 1.3, ..Default::default() };
        let sole = m.user_bill(6.6, 6.6).unwrap();
        assert!((sole - 1.3 * m.network_cost(6.6).unwrap()).abs() < 1e-12);
        let (b2, b3) = (m.user_bill(2.0, 5.0).unwrap(), m.user_bill(3.0, 5.0).unwrap());
        assert!((b2 / b3 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.user_bill(0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(m.user_bill(4.0, 3.0), Err(Error::Contract(_))));
    }

    #[test]
    fn validation() {
        assert!(PriceModel::default().validate().is_ok());
        assert!(PriceModel { a: 0.0, ..Default::default() }.validate().is_err());
        assert!(PriceModel { kappa: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn cost_second_difference_is_nonnegative() {
        // finite-difference sweep over [0, N·a_max] for N = 20, a_max = 6.6
        let m = PriceModel::default();
        let hi = 20.0 * 6.6;
        let n = 2000;
        let step = hi / n as f64;
        let c: Vec<f64> = (0..=n).map(|k| m.network_cost(k as f64 * step).unwrap()).collect();
        for w in c.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }

    proptest! {
        #[test]
        fn bills_sum_to_scaled_cost(loads in proptest::collection::vec(0.0f64..10.0, 1..12), kappa in 0.1f64..3.0) {
            let m = PriceModel { kappa, ..Default::default() };
            let total: f64 = loads.iter().sum();
            let sum: f64 = loads.iter().map(|&l| m.user_bill(l, total).unwrap()).sum();
            prop_assert!((sum - kappa * m.network_cost(total).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn price_strictly_increasing_and_convex(l1 in 0.0f64..200.0, d in 1e-3f64..50.0, t in 0.01f64..0.99) {
            let m = PriceModel::default();
            let l2 = l1 + d;
            prop_assert!(m.price(l1).unwrap() < m.price(l2).unwrap());
            let mid = t * l1 + (1.0 - t) * l2;
            prop_assert!(m.price(mid).unwrap() < t * m.price(l1).unwrap() + (1.0 - t) * m.price(l2).unwrap());
        }
    }
}
