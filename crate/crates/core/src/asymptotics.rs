//! The phase diagram in the user growth `k_n`: which side of `n / log n` a
//! growth order falls on, the capacity per unit energy in each regime, the
//! orthogonal-access capacity for sub-linear orders, and the energy schedule
//! used by the TDMA achievability argument.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orthoexp::ortho_capacity_cpue;
use crate::scalar::{lit, Scalar};
use crate::types::{single_user_capacity_cpue, ChannelParams, GrowthOrder, RatePerUnitEnergy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdComparison {
    StrictlyBelow,
    StrictlyAbove,
    Boundary,
}

/// Position of `Θ(n^a (log n)^b)` relative to `Θ(n / log n)`, compared
/// lexicographically on `(a, b)`.
pub fn compare_to_threshold(g: GrowthOrder) -> ThresholdComparison {
    let t = GrowthOrder::threshold();
    let ord = g
        .poly
        .partial_cmp(&t.poly)
        .and_then(|o| match o {
            Ordering::Equal => g.loglog.partial_cmp(&t.loglog),
            o => Some(o),
        })
        .unwrap_or(Ordering::Equal);
    match ord {
        Ordering::Less => ThresholdComparison::StrictlyBelow,
        Ordering::Greater => ThresholdComparison::StrictlyAbove,
        Ordering::Equal => ThresholdComparison::Boundary,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rate")]
pub enum Regime<T = f64> {
    /// No positive rate per unit energy is achievable.
    Infeasible,
    /// Every user achieves the single-user value `1/N0`.
    SingleUserCapacity(RatePerUnitEnergy<T>),
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict<T = f64> {
    pub regime: Regime<T>,
    pub rationale: String,
}

/// Capacity per unit energy of the many-access channel for a growth order.
pub fn capacity_per_unit_energy<T: Scalar>(
    g: GrowthOrder,
    ch: &ChannelParams<T>,
) -> FeasibilityVerdict<T> {
    match compare_to_threshold(g) {
        ThresholdComparison::StrictlyAbove => FeasibilityVerdict {
            regime: Regime::Infeasible,
            rationale: format!(
                "k_n = Θ(n^{} (log n)^{}) grows faster than n/log n: the per-user energy cannot grow \
                 like log k_n, so every code has vanishing rate per unit energy",
                g.poly, g.loglog
            ),
        },
        ThresholdComparison::StrictlyBelow => FeasibilityVerdict {
            regime: Regime::SingleUserCapacity(single_user_capacity_cpue(ch)),
            rationale: format!(
                "k_n = Θ(n^{} (log n)^{}) = o(n/log n): TDMA with per-user energy c_n ln n and \
                 random coding in each slot achieves every rate below 1/N0",
                g.poly, g.loglog
            ),
        },
        ThresholdComparison::Boundary => FeasibilityVerdict {
            regime: Regime::Unresolved,
            rationale: "k_n = Θ(n/log n) sits on the threshold; neither the converse nor the \
                        achievability argument covers it"
                .to_string(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rate")]
pub enum OrthoCapacity<T = f64> {
    Rate(RatePerUnitEnergy<T>),
    Unresolved,
}

/// Capacity per unit energy when every user is restricted to an orthogonal
/// codebook. Known for polylogarithmic growth and for exact `Θ(n^c)`,
/// `0 < c < 1`; everything else is `Unresolved`.
pub fn ortho_capacity_for_growth<T: Scalar>(
    g: GrowthOrder,
    ch: &ChannelParams<T>,
) -> OrthoCapacity<T> {
    if g.poly == 0.0 {
        return OrthoCapacity::Rate(single_user_capacity_cpue(ch));
    }
    if g.poly < 1.0 && g.loglog == 0.0 {
        if let Ok(r) = ortho_capacity_cpue(lit(g.poly), ch) {
            return OrthoCapacity::Rate(r);
        }
    }
    OrthoCapacity::Unresolved
}

/// Per-user energy `E_n = ln(n / (k ln n)) · ln n`.
pub fn energy_schedule<T: Scalar>(n: u64, k: u64) -> Result<T> {
    if n < 3 || k < 1 {
        return Err(Error::domain(
            "energy_schedule",
            format!("need n ≥ 3 and k ≥ 1, got n = {n}, k = {k}"),
        ));
    }
    let ln_n = lit::<T>(n as f64).ln();
    let ratio = lit::<T>(n as f64) / (lit::<T>(k as f64) * ln_n);
    if !(ratio > T::one()) {
        return Err(Error::domain(
            "energy_schedule",
            format!("n/(k ln n) = {ratio} ≤ 1: too many users for the schedule"),
        ));
    }
    Ok(ratio.ln() * ln_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ch() -> ChannelParams<f64> {
        ChannelParams::new(2.0).unwrap()
    }

    fn g(a: f64, b: f64) -> GrowthOrder {
        GrowthOrder::new(a, b).unwrap()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(compare_to_threshold(g(0.5, 0.0)), ThresholdComparison::StrictlyBelow);
        assert_eq!(compare_to_threshold(g(1.0, 1.0)), ThresholdComparison::StrictlyAbove);
        assert_eq!(compare_to_threshold(g(1.0, -1.0)), ThresholdComparison::Boundary);
        assert_eq!(compare_to_threshold(g(1.0, -2.0)), ThresholdComparison::StrictlyBelow);
        assert_eq!(compare_to_threshold(g(1.0, 0.0)), ThresholdComparison::StrictlyAbove);
    }

    #[test]
    fn capacity_verdicts() {
        let v = capacity_per_unit_energy(g(0.9, 0.0), &ch());
        match v.regime {
            Regime::SingleUserCapacity(r) => assert_eq!(r.nats_per_energy(), 0.5),
            other => panic!("{other:?}"),
        }
        assert_eq!(capacity_per_unit_energy(g(1.0, 1.0), &ch()).regime, Regime::Infeasible);
        assert_eq!(capacity_per_unit_energy(g(1.0, -1.0), &ch()).regime, Regime::Unresolved);
    }

    #[test]
    fn ortho_capacity_examples() {
        let rate = |o: OrthoCapacity<f64>| match o {
            OrthoCapacity::Rate(r) => Some(r.nats_per_energy()),
            OrthoCapacity::Unresolved => None,
        };
        assert_eq!(rate(ortho_capacity_for_growth(g(0.0, 3.0), &ch())), Some(0.5));
        assert_relative_eq!(
            rate(ortho_capacity_for_growth(g(0.5, 0.0), &ch())).unwrap(),
            0.125,
            max_relative = 1e-12
        );
        assert_eq!(rate(ortho_capacity_for_growth(g(0.5, 1.0), &ch())), None);
        assert_eq!(rate(ortho_capacity_for_growth(g(1.0, -2.0), &ch())), None);
        assert_eq!(rate(ortho_capacity_for_growth(g(1.5, 0.0), &ch())), None);
    }

    #[test]
    fn orthogonal_access_is_strictly_suboptimal() {
        for i in 1..20 {
            let c = i as f64 / 20.0;
            let OrthoCapacity::Rate(r) = ortho_capacity_for_growth(g(c, 0.0), &ch()) else {
                panic!("c = {c} unresolved");
            };
            let Regime::SingleUserCapacity(full) = capacity_per_unit_energy(g(c, 0.0), &ch()).regime
            else {
                panic!("c = {c} not below threshold");
            };
            assert!(r.nats_per_energy() < full.nats_per_energy());
        }
    }

    #[test]
    fn schedule_examples() {
        let n = 1_000_000u64;
        let ln_n = (n as f64).ln();
        let k = (n as f64 / (ln_n * ln_n)).ceil() as u64;
        assert_eq!(k, 5240);
        let e: f64 = energy_schedule(n, k).unwrap();
        assert!((e - 36.27).abs() < 0.01, "{e}");
        let e15: f64 = energy_schedule(15, 1).unwrap();
        assert_relative_eq!(e15, (15.0 / 15f64.ln()).ln() * 15f64.ln(), max_relative = 1e-15);
        assert!(energy_schedule::<f64>(2, 1).is_err());
        assert!(energy_schedule::<f64>(100, 0).is_err());
        assert!(energy_schedule::<f64>(100, 50).is_err());
    }

    #[test]
    fn schedule_outgrows_log_n_for_sqrt_users() {
        let mut last = 0.0;
        for p in (10..=24).step_by(2) {
            let n = 1u64 << p;
            let k = (n as f64).sqrt() as u64;
            let e: f64 = energy_schedule(n, k).unwrap();
            let ratio = e / (n as f64).ln();
            assert!(ratio > last);
            last = ratio;
        }
    }

    #[test]
    fn schedule_total_energy_fraction_vanishes() {
        // n^0.9/ln n is also o(n/log n), but its fraction 0.1·ln n·n^-0.1
        // only starts falling past n = e^10.
        let users: [fn(f64) -> f64; 2] = [|n| n.sqrt(), |n| n / (n.ln() * n.ln())];
        for k_of in users {
            let mut last = f64::INFINITY;
            for p in 10..=24 {
                let n = 1u64 << p;
                let k = k_of(n as f64).ceil() as u64;
                let e: f64 = energy_schedule(n, k).unwrap();
                let frac = k as f64 * e / n as f64;
                assert!(frac < last, "n = 2^{p}: {frac} ≥ {last}");
                last = frac;
            }
        }
    }

    proptest! {
        #[test]
        fn trichotomy_reflects(a in 0.0f64..2.0, b in -4.0f64..2.0) {
            prop_assume!(!(a == 0.0 && b < 0.0));
            let here = compare_to_threshold(GrowthOrder { poly: a, loglog: b });
            let mirror = compare_to_threshold(GrowthOrder { poly: 2.0 - a, loglog: -2.0 - b });
            let expected = match here {
                ThresholdComparison::StrictlyAbove => ThresholdComparison::StrictlyBelow,
                ThresholdComparison::StrictlyBelow => ThresholdComparison::StrictlyAbove,
                ThresholdComparison::Boundary => ThresholdComparison::Boundary,
            };
            prop_assert_eq!(mirror, expected);
        }

        #[test]
        fn grid_trichotomy(ai in 0u32..=8, bi in 0u32..=8) {
            let (a, b) = (ai as f64 * 0.25, bi as f64 * 0.5 - 2.0);
            prop_assume!(!(a == 0.0 && b < 0.0));
            let c = compare_to_threshold(g(a, b));
            let above = a > 1.0 || (a == 1.0 && b > -1.0);
            let below = a < 1.0 || (a == 1.0 && b < -1.0);
            prop_assert_eq!(c == ThresholdComparison::StrictlyAbove, above);
            prop_assert_eq!(c == ThresholdComparison::StrictlyBelow, below);
            prop_assert_eq!(c == ThresholdComparison::Boundary, !above && !below);
        }
    }
}
