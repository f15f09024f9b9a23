//! Shared vocabulary: channel, code parameters, rates and growth orders.
//!
//! All rates are carried in nats per unit energy. Use
//! [`RatePerUnitEnergy::bits_per_energy`] at the presentation layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, Scalar};

/// Gaussian noise level. The per-dimension noise variance is `n0 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams<T = f64> {
    pub n0: T,
}

impl<T: Scalar> ChannelParams<T> {
    pub fn new(n0: T) -> Result<Self> {
        if n0 > T::zero() && n0.is_finite() {
            Ok(ChannelParams { n0 })
        } else {
            Err(Error::domain("ChannelParams::new", format!("N0 = {n0} must be positive")))
        }
    }

    /// Per-dimension noise variance `N0 / 2`.
    pub fn noise_variance(&self) -> T {
        self.n0 * T::lit(0.5)
    }
}

impl Default for ChannelParams<f64> {
    /// `N0 = 2`, i.e. unit noise variance per dimension.
    fn default() -> Self {
        ChannelParams { n0: 2.0 }
    }
}

/// Symmetric code parameters: blocklength, messages per user, energy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec<T = f64> {
    pub n: u64,
    pub m: u128,
    pub e: T,
}

impl<T: Scalar> CodeSpec<T> {
    pub fn new(n: u64, m: u128, e: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("CodeSpec::new", "blocklength n must be at least 1"));
        }
        if m == 0 {
            return Err(Error::domain("CodeSpec::new", "message count m must be at least 1"));
        }
        if !(e >= T::zero()) || !e.is_finite() {
            return Err(Error::domain("CodeSpec::new", format!("energy {e} must be nonnegative")));
        }
        Ok(CodeSpec { n, m, e })
    }
}

/// Rate per unit energy, in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RatePerUnitEnergy<T = f64> {
    pub nats_per_energy: T,
}

impl<T: Scalar> RatePerUnitEnergy<T> {
    pub fn from_nats(nats_per_energy: T) -> Result<Self> {
        if nats_per_energy >= T::zero() {
            Ok(RatePerUnitEnergy { nats_per_energy })
        } else {
            Err(Error::domain(
                "RatePerUnitEnergy::from_nats",
                format!("rate {nats_per_energy} is negative"),
            ))
        }
    }

    pub fn from_bits(bits_per_energy: T) -> Result<Self> {
        Self::from_nats(bits_per_energy * T::LN_2())
    }

    pub fn nats_per_energy(&self) -> T {
        self.nats_per_energy
    }

    pub fn bits_per_energy(&self) -> T {
        self.nats_per_energy * T::LOG2_E()
    }
}

/// `Ṙ = ln(m) / e`.
pub fn rate_from_spec<T: Scalar>(spec: &CodeSpec<T>) -> Result<RatePerUnitEnergy<T>> {
    if !(spec.e > T::zero()) {
        return Err(Error::domain("rate_from_spec", "energy budget must be positive"));
    }
    RatePerUnitEnergy::from_nats(count::<T>(spec.m).ln() / spec.e)
}

/// Single-user Gaussian capacity per unit energy, `1/N0` nats.
pub fn single_user_capacity_cpue<T: Scalar>(ch: &ChannelParams<T>) -> RatePerUnitEnergy<T> {
    RatePerUnitEnergy {
        nats_per_energy: ch.n0.recip(),
    }
}

/// Growth class `k_n = Θ(n^poly (log n)^loglog)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthOrder {
    pub poly: f64,
    pub loglog: f64,
}

impl GrowthOrder {
    /// Rejects negative polynomial exponents and the sub-constant orders
    /// `(0, b < 0)`, which would describe fewer than one user.
    pub fn new(poly: f64, loglog: f64) -> Result<Self> {
        if !poly.is_finite() || !loglog.is_finite() {
            return Err(Error::domain("GrowthOrder::new", "exponents must be finite"));
        }
        if poly < 0.0 {
            return Err(Error::domain("GrowthOrder::new", format!("poly = {poly} is negative")));
        }
        if poly == 0.0 && loglog < 0.0 {
            return Err(Error::domain(
                "GrowthOrder::new",
                format!("Θ((log n)^{loglog}) vanishes; k_n must be at least 1"),
            ));
        }
        Ok(GrowthOrder { poly, loglog })
    }

    /// `Θ(n / log n)`, the feasibility threshold.
    pub fn threshold() -> Self {
        GrowthOrder {
            poly: 1.0,
            loglog: -1.0,
        }
    }
}

/// What a [`BoundValue`] bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundDirection {
    UpperOnPe,
    LowerOnPe,
    UpperOnRate,
}

/// A bound evaluation with its direction, validity and a provenance label.
///
/// Error-probability bounds are clamped to `[0, 1]`. An invalid bound (its
/// preconditions failed) must not take part in sandwich comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue<T = f64> {
    pub value: T,
    pub direction: BoundDirection,
    pub valid: bool,
    pub provenance: String,
}

impl<T: Scalar> BoundValue<T> {
    pub fn new(value: T, direction: BoundDirection, valid: bool, provenance: impl Into<String>) -> Self {
        let value = match direction {
            BoundDirection::UpperOnRate => value,
            _ if value.is_nan() => match direction {
                BoundDirection::LowerOnPe => T::zero(),
                _ => T::one(),
            },
            _ => value.max(T::zero()).min(T::one()),
        };
        BoundValue {
            value,
            direction,
            valid,
            provenance: provenance.into(),
        }
    }

    pub fn upper_pe(value: T, provenance: impl Into<String>) -> Self {
        Self::new(value, BoundDirection::UpperOnPe, true, provenance)
    }

    pub fn lower_pe(value: T, provenance: impl Into<String>) -> Self {
        Self::new(value, BoundDirection::LowerOnPe, true, provenance)
    }

    pub fn invalid(direction: BoundDirection, provenance: impl Into<String>) -> Self {
        let value = match direction {
            BoundDirection::LowerOnPe => T::zero(),
            BoundDirection::UpperOnPe => T::one(),
            BoundDirection::UpperOnRate => T::infinity(),
        };
        BoundValue {
            value,
            direction,
            valid: false,
            provenance: provenance.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rate_examples() {
        let r = rate_from_spec(&CodeSpec::new(8, 1, 5.0).unwrap()).unwrap();
        assert_eq!(r.nats_per_energy(), 0.0);
        let r = rate_from_spec(&CodeSpec::new(8, 2, 2f64.ln()).unwrap()).unwrap();
        assert_relative_eq!(r.nats_per_energy(), 1.0, max_relative = 1e-15);
        let r = rate_from_spec(&CodeSpec::new(100, 37, 36.1).unwrap()).unwrap();
        assert_relative_eq!(r.nats_per_energy(), 0.100_025_426_943_053_3, max_relative = 1e-14);
        assert!(rate_from_spec(&CodeSpec::new(8, 2, 0.0).unwrap()).is_err());
    }

    #[test]
    fn capacity_examples() {
        let c = single_user_capacity_cpue(&ChannelParams::new(2.0).unwrap());
        assert_eq!(c.nats_per_energy(), 0.5);
        assert_relative_eq!(c.bits_per_energy(), 0.721_347_520_444_481_7, max_relative = 1e-15);
        assert_eq!(single_user_capacity_cpue(&ChannelParams::new(1.0).unwrap()).nats_per_energy(), 1.0);
    }

    #[test]
    fn constructors_validate() {
        assert!(ChannelParams::new(0.0).is_err());
        assert!(CodeSpec::new(0, 2, 1.0).is_err());
        assert!(CodeSpec::new(1, 0, 1.0).is_err());
        assert!(CodeSpec::new(1, 2, -1.0).is_err());
        assert!(GrowthOrder::new(-0.5, 0.0).is_err());
        assert!(GrowthOrder::new(0.0, -1.0).is_err());
        assert!(GrowthOrder::new(0.0, 3.0).is_ok());
    }

    #[test]
    fn bound_values_clamp() {
        assert_eq!(BoundValue::upper_pe(3.0, "x").value, 1.0);
        assert_eq!(BoundValue::lower_pe(-1.0, "x").value, 0.0);
        assert_eq!(BoundValue::new(5.0, BoundDirection::UpperOnRate, true, "x").value, 5.0);
    }

    #[test]
    fn json_field_names() {
        let v = serde_json::to_value(CodeSpec::new(4, 3, 1.5).unwrap()).unwrap();
        assert_eq!(v, serde_json::json!({"n": 4, "m": 3, "e": 1.5}));
        let v = serde_json::to_value(GrowthOrder::threshold()).unwrap();
        assert_eq!(v, serde_json::json!({"poly": 1.0, "loglog": -1.0}));
        let v = serde_json::to_value(BoundValue::lower_pe(0.25, "p")).unwrap();
        assert_eq!(v["direction"], "LowerOnPe");
        assert_eq!(v["valid"], true);
    }

    proptest! {
        #[test]
        fn bits_nats_roundtrip(bits in 0.0f64..1e6) {
            let r = RatePerUnitEnergy::from_bits(bits).unwrap();
            let back = r.bits_per_energy();
            prop_assert!((back - bits).abs() <= 1e-15 * bits);
        }

        #[test]
        fn rate_monotone(m in 1u128..1_000_000, e in 0.1f64..1e3) {
            let r = |m, e| rate_from_spec(&CodeSpec::new(10, m, e).unwrap()).unwrap().nats_per_energy();
            prop_assert!(r(m + 1, e) > r(m, e));
            if m > 1 {
                prop_assert!(r(m, e * 1.5) < r(m, e));
            }
        }
    }
}
