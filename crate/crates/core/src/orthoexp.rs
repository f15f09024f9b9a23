//! Error exponents and finite-energy bounds for a single user with an
//! orthogonal codebook: the exponent `a(Ṙ)`, the orthogonal capacity per
//! unit energy `C⊥(c)` when `k_n = Θ(n^c)`, the achievability upper bound,
//! and three lower bounds (sphere-packing at high rate, minimum distance at
//! low rate, and their list-decoding combination).
//!
//! The lower bounds keep every finite-`E` correction term, so each returned
//! number is a bound at that `E` rather than an asymptote. Where the
//! construction degenerates the result is flagged invalid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_q_unchecked, LogProbability};
use crate::scalar::{count, lit, Scalar};
use crate::types::{BoundDirection, BoundValue, ChannelParams, RatePerUnitEnergy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentBranch {
    LowRate,
    HighRate,
}

/// `a(Ṙ)` together with the branch it was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoExponent<T = f64> {
    pub a: T,
    pub branch: ExponentBranch,
}

/// Reliability function of orthogonal signalling per unit energy,
/// `max_ρ [ρ/((1+ρ)N0) − ρṘ]`. Low-rate branch up to `Ṙ = 1/(4N0)`.
fn orthogonal_reliability<T: Scalar>(rate: T, ch: &ChannelParams<T>) -> (T, ExponentBranch) {
    let quarter = (lit::<T>(4.0) * ch.n0).recip();
    if rate <= quarter {
        ((lit::<T>(2.0) * ch.n0).recip() - rate, ExponentBranch::LowRate)
    } else {
        let d = ch.n0.recip().sqrt() - rate.sqrt();
        (d * d, ExponentBranch::HighRate)
    }
}

/// `a(Ṙ)`: the exponent with `P_e ≈ M^{-a}` for orthogonal codebooks.
pub fn ortho_exponent_a<T: Scalar>(
    r: RatePerUnitEnergy<T>,
    ch: &ChannelParams<T>,
) -> Result<OrthoExponent<T>> {
    let rate = r.nats_per_energy();
    if !(rate > T::zero() && rate <= ch.n0.recip()) {
        return Err(Error::domain(
            "ortho_exponent_a",
            format!("rate {rate} outside (0, 1/N0]"),
        ));
    }
    let (rel, branch) = orthogonal_reliability(rate, ch);
    Ok(OrthoExponent {
        a: (rel / rate).max(T::zero()),
        branch,
    })
}

/// Both branch expressions of `a(Ṙ)` at the same rate, `(low, high)`,
/// regardless of which one applies. They meet at `Ṙ = 1/(4N0)`.
pub fn ortho_exponent_branches<T: Scalar>(rate: T, ch: &ChannelParams<T>) -> (T, T) {
    let low = (lit::<T>(2.0) * ch.n0).recip() - rate;
    let d = ch.n0.recip().sqrt() - rate.sqrt();
    (low / rate, d * d / rate)
}

/// Closed form of the orthogonal capacity per unit energy when
/// `k_n = Θ(n^c)`; `c = 0` stands for `k_n = o(n^c)` for every `c > 0`.
pub fn ortho_capacity_cpue<T: Scalar>(c: T, ch: &ChannelParams<T>) -> Result<RatePerUnitEnergy<T>> {
    if !(c >= T::zero() && c < T::one()) {
        return Err(Error::domain("ortho_capacity_cpue", format!("c = {c} not in [0, 1)")));
    }
    let single = ch.n0.recip();
    let half = lit::<T>(0.5);
    let value = if c == T::zero() {
        single
    } else if c <= half {
        let root = T::one() + (c / (T::one() - c)).sqrt();
        single / (root * root)
    } else {
        (T::one() - c) / (lit::<T>(2.0) * ch.n0)
    };
    RatePerUnitEnergy::from_nats(value)
}

/// `sup { Ṙ : a(Ṙ) > c/(1−c) }` by bisection; `a` is strictly decreasing.
pub fn ortho_capacity_via_sup<T: Scalar>(c: T, ch: &ChannelParams<T>) -> Result<RatePerUnitEnergy<T>> {
    if !(c > T::zero() && c < T::one()) {
        return Err(Error::domain("ortho_capacity_via_sup", format!("c = {c} not in (0, 1)")));
    }
    let threshold = c / (T::one() - c);
    let a_of = |rate: T| orthogonal_reliability(rate, ch).0 / rate;
    let mut lo = T::zero(); // a(lo⁺) = ∞ > threshold
    let mut hi = ch.n0.recip(); // a(hi) = 0 ≤ threshold
    for _ in 0..200 {
        let mid = (lo + hi) * lit(0.5);
        if !(mid > lo && mid < hi) {
            break;
        }
        if a_of(mid) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    RatePerUnitEnergy::from_nats((lo + hi) * lit(0.5))
}

/// Log of the orthogonal-codebook upper bound `exp[−E · max_ρ E0(ρ, Ṙ)]`
/// for `M = e^{ln_m}` codewords; `None` when `Ṙ > 1/N0`.
pub fn ortho_error_upper_bound_ln<T: Scalar>(ln_m: T, e: T, ch: &ChannelParams<T>) -> Option<T> {
    let rate = ln_m / e;
    if rate > ch.n0.recip() {
        return None;
    }
    let (rel, _) = orthogonal_reliability(rate, ch);
    Some((-e * rel).min(T::zero()))
}

/// Achievability bound for `m` orthogonal codewords of energy `e`.
pub fn ortho_error_upper_bound<T: Scalar>(
    m: u128,
    e: T,
    ch: &ChannelParams<T>,
) -> Result<BoundValue<T>> {
    const LABEL: &str = "orthogonal-upper";
    if m < 2 || !(e > T::zero()) {
        return Err(Error::domain("ortho_error_upper_bound", "needs m >= 2 and e > 0"));
    }
    Ok(match ortho_error_upper_bound_ln(count::<T>(m).ln(), e, ch) {
        Some(log) => BoundValue::upper_pe(log.exp(), LABEL),
        None => BoundValue::invalid(BoundDirection::UpperOnPe, LABEL),
    })
}

/// Moment-generating quantities of the pairwise log-likelihood ratio for two
/// orthogonal codewords of energy `E`.
///
/// `δ_E` collects the finite-`E` slack; the derived quantities used inside
/// [`sgb_high_rate_lower_bound`] are `δ'_E = 1/E + δ_E/N0` (rate loss from
/// expurgation plus slack) and `δ''_E = δ_E/(2N0) − ln 2 / E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgbState<T = f64> {
    pub mu: T,
    pub mu_prime: T,
    pub mu_double_prime: T,
    pub s: T,
    pub delta_e: T,
    /// `sqrt(Ṙ N0 − δ_E)`; `None` if no rate was given or the radicand is
    /// negative (bound inapplicable at this energy).
    pub s_e: Option<T>,
}

fn delta_e<T: Scalar>(e: T, ch: &ChannelParams<T>) -> T {
    let snr = e / ch.n0;
    lit::<T>(2.0) * (lit::<T>(2.0) / snr.sqrt() + lit::<T>(4.0).ln() / snr)
}

pub fn sgb_state<T: Scalar>(
    s: T,
    e: T,
    ch: &ChannelParams<T>,
    rate: Option<RatePerUnitEnergy<T>>,
) -> Result<SgbState<T>> {
    if !(s >= T::zero() && s <= T::one()) {
        return Err(Error::domain("sgb_state", format!("s = {s} not in [0, 1]")));
    }
    if !(e > T::zero()) {
        return Err(Error::domain("sgb_state", "energy must be positive"));
    }
    let snr = e / ch.n0;
    let delta = delta_e(e, ch);
    let s_e = rate.and_then(|r| {
        let rad = r.nats_per_energy() * ch.n0 - delta;
        (rad >= T::zero()).then(|| rad.sqrt())
    });
    Ok(SgbState {
        mu: -snr * s * (T::one() - s),
        mu_prime: -snr * (T::one() - lit::<T>(2.0) * s),
        mu_double_prime: lit::<T>(2.0) * snr,
        s,
        delta_e: delta,
        s_e,
    })
}

/// Expurgated sphere-packing bound (in logs) for a code whose list-decoding
/// rate is `ln(M/L)/E`. `None` when `s_E` falls outside `[0, 1]`.
fn sgb_expurgated_ln<T: Scalar>(ln_ratio: T, e: T, ch: &ChannelParams<T>) -> Option<T> {
    if !(e > T::zero()) {
        return None;
    }
    let delta = delta_e(e, ch);
    // Rate of the better half of the codebook, less the slack δ_E/N0.
    let radicand = ln_ratio / e - e.recip() - delta / ch.n0;
    if !(radicand >= T::zero()) || radicand * ch.n0 > T::one() {
        return None;
    }
    let gap = ch.n0.recip().sqrt() - radicand.sqrt();
    Some(-T::LN_2() - e * (gap * gap + delta / (lit::<T>(2.0) * ch.n0)))
}

/// High-rate (sphere-packing) lower bound with expurgation.
pub fn sgb_high_rate_lower_bound<T: Scalar>(m: u128, e: T, ch: &ChannelParams<T>) -> BoundValue<T> {
    const LABEL: &str = "sphere-packing-expurgated";
    if m < 4 {
        return BoundValue::invalid(BoundDirection::LowerOnPe, LABEL);
    }
    match sgb_expurgated_ln(count::<T>(m).ln(), e, ch) {
        Some(log) => BoundValue::lower_pe(log.exp(), LABEL),
        None => BoundValue::invalid(BoundDirection::LowerOnPe, LABEL),
    }
}

/// `ln[(1/2) Q(sqrt(E M'/(N0 (M'−1))))]` with `M' = max(2, ⌊M/2⌋)` codewords
/// kept after expurgation; `M` is passed as a real so it may be huge.
fn min_distance_ln<T: Scalar>(m: T, e: T, ch: &ChannelParams<T>) -> T {
    let kept = (m * lit(0.5)).floor().max(lit(2.0));
    let beta = (e * kept / (ch.n0 * (kept - T::one()))).sqrt();
    -T::LN_2() + ln_q_unchecked(beta)
}

/// Low-rate lower bound from the minimum distance of `⌊m/2⌋` expurgated
/// codewords, using the exact Gaussian tail.
pub fn min_distance_low_rate_lower_bound<T: Scalar>(
    m: u128,
    e: T,
    ch: &ChannelParams<T>,
) -> BoundValue<T> {
    const LABEL: &str = "min-distance-expurgated";
    if m < 4 || !(e >= T::zero()) {
        return BoundValue::invalid(BoundDirection::LowerOnPe, LABEL);
    }
    BoundValue::lower_pe(min_distance_ln(count::<T>(m), e, ch).exp(), LABEL)
}

/// Energy split used by the combined lower bound.
///
/// The integer quantities (`m_tilde`, `l`, `n1`, `n2`) are stored as
/// floating point because `m̃` may exceed every machine integer; they are
/// exact whenever `m̃ ≤ 2^53`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListSplit<T = f64> {
    pub m_tilde: T,
    pub l: T,
    pub n1: T,
    pub n2: T,
    pub e1: T,
    pub e2: T,
    pub lambda: T,
    pub gamma_e: T,
    /// `ln(L+1)/E2`, re-derived from the integer list size.
    pub rate2: T,
    /// `round(λ m̃)` fell outside `[1, m̃ − 1]` before clamping.
    pub degenerate: bool,
}

/// `(γ_E, λ_E)` for rate `Ṙ` at energy `e`.
pub fn split_fraction<T: Scalar>(rate: T, e: T, ch: &ChannelParams<T>) -> (T, T) {
    let gamma = e.sqrt().recip().min(rate * lit(0.5));
    let quarter = (lit::<T>(4.0) * ch.n0).recip();
    (gamma, (rate - gamma) / (quarter - gamma))
}

/// Builds the list split for `M = e^{ln_m}` codewords of energy `e`.
///
/// `m̃` is taken one power of two lower when `log2 M` is within rounding of
/// an integer, which keeps `m̃ ≤ M`.
pub fn list_split<T: Scalar>(ln_m: T, e: T, ch: &ChannelParams<T>) -> Result<ListSplit<T>> {
    let log2_m = ln_m / T::LN_2();
    let j = (log2_m - lit::<T>(1e-9) * log2_m.max(T::one())).floor();
    let m_tilde = lit::<T>(2.0).powi(j.to_i32().unwrap_or(0).clamp(0, 1023));
    list_split_with(ln_m, m_tilde, e, ch)
}

fn list_split_with<T: Scalar>(ln_m: T, m_tilde: T, e: T, ch: &ChannelParams<T>) -> Result<ListSplit<T>> {
    const OP: &str = "list_split";
    if !(e > T::zero()) {
        return Err(Error::domain(OP, "energy must be positive"));
    }
    if !(ln_m / T::LN_2() >= lit::<T>(3.0) - lit(1e-12)) || m_tilde < lit(2.0) {
        return Err(Error::domain(OP, "needs m >= 8"));
    }
    let rate = ln_m / e;
    if rate > (lit::<T>(4.0) * ch.n0).recip() {
        return Err(Error::domain(OP, format!("rate {rate} above 1/(4 N0)")));
    }
    let (gamma, lambda_target) = split_fraction(rate, e, ch);
    let raw_n1 = (lambda_target * m_tilde + lit(0.5)).floor();
    let degenerate = !(raw_n1 >= T::one() && raw_n1 <= m_tilde - T::one());
    let n1 = raw_n1.max(T::one()).min(m_tilde - T::one());
    let n2 = m_tilde - n1;
    let e1 = e * n1 / m_tilde;
    let e2 = e * n2 / m_tilde;
    let l = ((gamma * e2).exp().floor() - T::one()).max(T::one()).min(m_tilde);
    Ok(ListSplit {
        m_tilde,
        l,
        n1,
        n2,
        e1,
        e2,
        lambda: e1 / e,
        gamma_e: gamma,
        rate2: (l + T::one()).ln() / e2,
        degenerate,
    })
}

/// Log-domain result of [`combined_lower_bound_ln`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedBound<T = f64> {
    pub log_value: LogProbability<T>,
    pub split: Option<ListSplit<T>>,
    /// The list-split bound did not apply and the minimum-distance bound on
    /// the whole codebook was returned instead.
    pub fallback: bool,
    pub provenance: String,
}

/// Combined lower bound for `M = e^{ln_m}` orthogonal codewords:
/// `P⊥(E, M) ≥ P⊥(E, m̃) ≥ P_list(E1, m̃, L) · P(E2, L+1)`, where the list
/// factor is the expurgated sphere-packing bound at rate `ln(m̃/L)/E1` and
/// the second factor is the expurgated minimum-distance bound.
pub fn combined_lower_bound_ln<T: Scalar>(ln_m: T, e: T, ch: &ChannelParams<T>) -> Result<CombinedBound<T>> {
    combine(ln_m, list_split(ln_m, e, ch)?, e, ch)
}

fn combine<T: Scalar>(ln_m: T, split: ListSplit<T>, e: T, ch: &ChannelParams<T>) -> Result<CombinedBound<T>> {
    let fallback = |why: &str| CombinedBound {
        log_value: LogProbability::clamped(min_distance_ln(ln_m.exp(), e, ch)),
        split: Some(split),
        fallback: true,
        provenance: format!("combined-list-split/fallback:min-distance ({why})"),
    };
    if split.degenerate {
        return Ok(fallback("degenerate split"));
    }
    let list_ln = match sgb_expurgated_ln((split.m_tilde / split.l).ln(), split.e1, ch) {
        Some(v) => v,
        None => return Ok(fallback("list factor inapplicable")),
    };
    let short_ln = min_distance_ln(split.l + T::one(), split.e2, ch);
    Ok(CombinedBound {
        log_value: LogProbability::clamped(list_ln + short_ln),
        split: Some(split),
        fallback: false,
        provenance: "combined-list-split".to_string(),
    })
}

/// Combined list-split lower bound for `m` codewords; valid for `m ≥ 8` and
/// `Ṙ ≤ 1/(4N0)`.
pub fn combined_lower_bound<T: Scalar>(m: u128, e: T, ch: &ChannelParams<T>) -> BoundValue<T> {
    if m < 8 || !(e > T::zero()) {
        return BoundValue::invalid(BoundDirection::LowerOnPe, "combined-list-split");
    }
    let ln_m = count::<T>(m).ln();
    let m_tilde = count::<T>(1u128 << (127 - m.leading_zeros()));
    match list_split_with(ln_m, m_tilde, e, ch).and_then(|split| combine(ln_m, split, e, ch)) {
        Ok(b) => BoundValue::lower_pe(b.log_value.log_value().exp(), b.provenance),
        Err(_) => BoundValue::invalid(BoundDirection::LowerOnPe, "combined-list-split"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::ppm_exact_error;
    use approx::assert_relative_eq;

    fn ch() -> ChannelParams<f64> {
        ChannelParams::new(2.0).unwrap()
    }

    fn rate(r: f64) -> RatePerUnitEnergy<f64> {
        RatePerUnitEnergy::from_nats(r).unwrap()
    }

    #[test]
    fn exponent_examples() {
        let boundary = ortho_exponent_a(rate(0.125), &ch()).unwrap();
        assert_relative_eq!(boundary.a, 1.0, max_relative = 1e-12);
        assert_eq!(boundary.branch, ExponentBranch::LowRate);
        let above = ortho_exponent_a(rate(0.125 + 1e-15), &ch()).unwrap();
        assert_eq!(above.branch, ExponentBranch::HighRate);
        assert!((above.a - boundary.a).abs() < 1e-12);
        assert_eq!(ortho_exponent_a(rate(0.5), &ch()).unwrap().a, 0.0);
        assert_relative_eq!(ortho_exponent_a(rate(0.0625), &ch()).unwrap().a, 3.0, max_relative = 1e-14);
        assert!(ortho_exponent_a(rate(0.0), &ch()).is_err());
        assert!(ortho_exponent_a(rate(0.51), &ch()).is_err());
    }

    #[test]
    fn capacity_examples() {
        let c = |x| ortho_capacity_cpue(x, &ch()).unwrap().nats_per_energy();
        assert_relative_eq!(c(0.5), 0.125, max_relative = 1e-15);
        assert_relative_eq!(c(0.25), 0.200_961_894_323_342, max_relative = 1e-13);
        assert_relative_eq!(c(0.75), 0.0625, max_relative = 1e-15);
        assert_eq!(c(0.0), 0.5);
        assert!((c(0.5 - 1e-9) - c(0.5 + 1e-9)).abs() <= 1e-7);
        assert!((c(1e-9) - 0.5).abs() <= 1e-4);
        assert!(ortho_capacity_cpue(1.0, &ch()).is_err());
        assert!(ortho_capacity_cpue(-0.1, &ch()).is_err());
    }

    #[test]
    fn sup_oracle_matches_closed_form() {
        for i in 1..=9 {
            let cc = i as f64 / 10.0;
            let closed = ortho_capacity_cpue(cc, &ch()).unwrap().nats_per_energy();
            let sup = ortho_capacity_via_sup(cc, &ch()).unwrap().nats_per_energy();
            assert!((closed - sup).abs() <= 1e-9, "c={cc}");
        }
        assert!(ortho_capacity_via_sup(0.999_999, &ch()).unwrap().nats_per_energy() < 1e-6);
    }

    #[test]
    fn upper_bound_examples() {
        let b = ortho_error_upper_bound(2, 20.0, &ch()).unwrap();
        assert_relative_eq!(b.value, 0.013_475_893_998_170_934, max_relative = 1e-12);
        let exact = ppm_exact_error(2, 20.0, &ch()).unwrap().value();
        assert_relative_eq!(exact, 7.827_011_290_012_748e-4, max_relative = 1e-8);
        assert!(exact <= b.value);
        // Ṙ = 1/N0 exactly: e = 2 ln m.
        let m = 16u128;
        let b = ortho_error_upper_bound(m, 2.0 * (m as f64).ln(), &ch()).unwrap();
        assert_relative_eq!(b.value, 1.0, max_relative = 1e-14);
        let b = ortho_error_upper_bound(m, 1.9 * (m as f64).ln(), &ch()).unwrap();
        assert!(!b.valid);
        // Branch continuity at Ṙ = 1/(4N0).
        let e = 8.0 * (m as f64).ln();
        let lo = ortho_error_upper_bound_ln((m as f64).ln(), e * (1.0 + 1e-13), &ch()).unwrap();
        let hi = ortho_error_upper_bound_ln((m as f64).ln(), e * (1.0 - 1e-13), &ch()).unwrap();
        assert!((lo - hi).abs() < 1e-10);
    }

    #[test]
    fn sgb_state_examples() {
        let st = sgb_state(0.5, 10.0, &ch(), None).unwrap();
        assert_relative_eq!(st.mu, -10.0 / 8.0);
        assert_eq!(st.mu_double_prime, 10.0);
        assert_eq!(sgb_state(0.1, 10.0, &ch(), None).unwrap().mu_double_prime, 10.0);
        let st = sgb_state(0.3, 200.0, &ch(), Some(rate(0.4))).unwrap();
        assert_relative_eq!(st.delta_e, 0.427_725_887_222_397_8, max_relative = 1e-14);
        assert_relative_eq!(st.s_e.unwrap(), (0.8 - st.delta_e).sqrt());
        assert!(sgb_state(0.3, 200.0, &ch(), Some(rate(0.1))).unwrap().s_e.is_none());
        assert!(sgb_state(1.5, 200.0, &ch(), None).is_err());
    }

    #[test]
    fn sgb_high_rate_examples() {
        // Ṙ = 0.25 at E = 200 (m = e^50).
        let e = 200.0;
        let ln_m = 50.0f64;
        let log = sgb_expurgated_ln(ln_m, e, &ch()).unwrap();
        let upper = ortho_error_upper_bound_ln(ln_m, e, &ch()).unwrap();
        assert!(log.is_finite() && log < upper);
        let m = ln_m.exp().round() as u128;
        let b = sgb_high_rate_lower_bound(m, e, &ch());
        assert!(b.valid && b.value > 0.0);
        assert!(b.value < ortho_error_upper_bound(m, e, &ch()).unwrap().value);

        // Collapsed square: radicand exactly zero.
        let delta = delta_e(e, &ch());
        let ln_ratio = e * (1.0 / e + delta / 2.0);
        let log = sgb_expurgated_ln(ln_ratio, e, &ch()).unwrap();
        let want = 0.5f64.ln() - e * (0.5 + delta / 4.0);
        // sqrt of a rounding-level radicand shifts the exponent by ~1e-6.
        assert!((log - want).abs() < 1e-5);

        // More messages at the same energy: the bound can only grow.
        let mut last = 0.0;
        for m in [1u128 << 64, 1 << 70, 1 << 80, 1 << 100] {
            let v = sgb_high_rate_lower_bound(m, e, &ch());
            assert!(v.valid);
            assert!(v.value >= last);
            last = v.value;
        }
        assert!(!sgb_high_rate_lower_bound(2, e, &ch()).valid);
        assert!(!sgb_high_rate_lower_bound(100, 10.0, &ch()).valid);
    }

    #[test]
    fn min_distance_examples() {
        let b = min_distance_low_rate_lower_bound(4, 2.0, &ch());
        assert_relative_eq!(b.value, 0.039_324_801_762_571_28, max_relative = 1e-12);
        assert_relative_eq!(min_distance_low_rate_lower_bound(10, 0.0, &ch()).value, 0.25);
        assert!(!min_distance_low_rate_lower_bound(3, 1.0, &ch()).valid);
        // Exact Q dominates (1 − 1/β²) e^{−β²/2} / (sqrt(2π) β).
        for beta in [0.5f64, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0] {
            let series = (1.0 - 1.0 / (beta * beta)) * (-beta * beta / 2.0).exp()
                / ((2.0 * std::f64::consts::PI).sqrt() * beta);
            assert!(ln_q_unchecked(beta).exp() >= series);
        }
    }

    #[test]
    fn list_split_examples() {
        // Second factor at L+1 = 2 in the E2 → 0 limit.
        assert_relative_eq!(min_distance_ln(2.0, 0.0, &ch()).exp(), 0.25);

        let (_, lambda) = split_fraction(0.05, 1e6, &ch());
        assert!((lambda - 0.4).abs() < 1e-2);

        let s = list_split(40.0, 400.0, &ch()).unwrap();
        assert_eq!(s.m_tilde, 2f64.powi(57));
        assert_eq!(s.n1 + s.n2, s.m_tilde);
        assert_relative_eq!(s.e1 + s.e2, 400.0, max_relative = 1e-14);
        assert_relative_eq!(s.lambda, s.e1 / 400.0);
        assert!(s.l >= 1.0);
        assert!(list_split(2.0, 400.0, &ch()).is_err());
        assert!(list_split(60.0, 400.0, &ch()).is_err());
    }

    #[test]
    fn combined_examples() {
        let m = 40f64.exp().round() as u128;
        let b = combined_lower_bound(m, 400.0, &ch());
        assert!(b.valid);
        assert!(b.value >= 0.0);
        assert!(b.value <= ortho_error_upper_bound(m, 400.0, &ch()).unwrap().value);

        // Large energy: the list split itself applies.
        let c = combined_lower_bound_ln(400.0, 4000.0, &ch()).unwrap();
        assert!(!c.fallback, "{}", c.provenance);
        let upper = ortho_error_upper_bound_ln(400.0, 4000.0, &ch()).unwrap();
        assert!(c.log_value.log_value() <= upper);
        assert!(c.log_value.log_value().is_finite());

        assert!(!combined_lower_bound(4, 10.0, &ch()).valid);
    }
}
