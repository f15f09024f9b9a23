//! Finite-parameter converse and achievability bounds for a single user and
//! for TDMA across `k` users, plus the exact error probability of PPM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    integrate_gaussian_weighted_tol, q_inverse, q_unchecked, Probability, Tolerance,
};
use crate::scalar::{count, lit, Scalar};
use crate::types::{BoundDirection, BoundValue, ChannelParams, CodeSpec};

/// Number of grid points used before golden-section refinement of `ρ`.
pub const RHO_GRID_POINTS: usize = 1000;
const RHO_TOLERANCE: f64 = 1e-10;

/// Minimises `f` over `ρ ∈ (0, 1]`: dense grid, then golden-section search
/// in the bracket around the best grid point. Returns `(ρ*, f(ρ*))`.
pub(crate) fn minimize_over_rho<T: Scalar, F: Fn(T) -> T>(f: F) -> (T, T) {
    let step = T::one() / lit(RHO_GRID_POINTS as f64);
    let mut best = (step, f(step));
    let mut best_i = 1usize;
    for i in 2..=RHO_GRID_POINTS {
        let rho = step * lit(i as f64);
        let v = f(rho);
        if v < best.1 {
            best = (rho, v);
            best_i = i;
        }
    }
    let lo_i = best_i.saturating_sub(1);
    let hi_i = (best_i + 1).min(RHO_GRID_POINTS);
    let (mut a, mut b) = (step * lit(lo_i as f64), step * lit(hi_i as f64));
    let a_floor = a;
    let inv_phi = lit::<T>(0.618_033_988_749_894_9);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > lit(RHO_TOLERANCE) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
        if !(b - a > T::epsilon()) {
            break;
        }
    }
    let rho = ((a + b) * lit(0.5)).max(a_floor);
    let v = if rho > T::zero() { f(rho) } else { T::infinity() };
    if v < best.1 {
        (rho, v)
    } else {
        best
    }
}

/// Fano-type converse on the rate per unit energy of a symmetric `k`-user
/// code with blocklength `n`, energy `e` and error probability `pe`.
pub fn fano_rate_upper_bound<T: Scalar>(
    n: u64,
    k: u64,
    e: T,
    pe: Probability<T>,
    ch: &ChannelParams<T>,
) -> BoundValue<T> {
    const LABEL: &str = "fano-mutual-information";
    if pe.value() >= T::one() || !(e > T::zero()) || k == 0 || n == 0 {
        return BoundValue::invalid(BoundDirection::UpperOnRate, LABEL);
    }
    let (n, k) = (lit::<T>(n as f64), lit::<T>(k as f64));
    let ke = k * e;
    let mutual = n / (lit::<T>(2.0) * ke) * (lit::<T>(2.0) * ke / (n * ch.n0)).ln_1p();
    let value = (ke.recip() + mutual) / (T::one() - pe.value());
    BoundValue::new(value, BoundDirection::UpperOnRate, true, LABEL)
}

/// Minimum-energy converse: `ε ≥ 1 − Q(Q⁻¹(1/m) − sqrt(2E/N0))`.
pub fn polyanskiy_eps_lower_bound<T: Scalar>(
    m: u128,
    e: T,
    ch: &ChannelParams<T>,
) -> Result<BoundValue<T>> {
    if m < 2 {
        return Err(Error::domain("polyanskiy_eps_lower_bound", "needs m >= 2"));
    }
    if !(e >= T::zero()) {
        return Err(Error::domain("polyanskiy_eps_lower_bound", "energy must be nonnegative"));
    }
    let p = Probability::new(count::<T>(m).recip())?;
    let shift = q_inverse(p)? - (lit::<T>(2.0) * e / ch.n0).sqrt();
    Ok(BoundValue::lower_pe(
        T::one() - q_unchecked(shift),
        "finite-energy-converse",
    ))
}

/// Birgé-inequality converse over a distance-3 covering partition of the
/// joint message set: `1 − (64E/N0 + ln 2) / ln(k(m−1))`.
pub fn birge_error_lower_bound<T: Scalar>(
    k: u64,
    m: u128,
    e: T,
    ch: &ChannelParams<T>,
) -> BoundValue<T> {
    const LABEL: &str = "birge-covering-partition";
    let size = u128::from(k).saturating_mul(m.saturating_sub(1));
    if size <= 1 || !(e >= T::zero()) {
        return BoundValue::invalid(BoundDirection::LowerOnPe, LABEL);
    }
    let num = lit::<T>(64.0) * e / ch.n0 + T::LN_2();
    BoundValue::lower_pe(T::one() - num / count::<T>(size).ln(), LABEL)
}

/// Gallager's random-coding function for the power-constrained AWGN channel,
/// nats per channel use.
pub fn gallager_e0<T: Scalar>(rho: T, p: T, ch: &ChannelParams<T>) -> T {
    rho * lit(0.5) * (lit::<T>(2.0) * p / ((T::one() + rho) * ch.n0)).ln_1p()
}

/// `ln(m^ρ exp[−n E0(ρ, P)])` minimised over `ρ` (or evaluated at a fixed
/// `ρ`) for a real-valued blocklength.
fn gallager_log_bound<T: Scalar>(n: T, m: u128, p: T, ch: &ChannelParams<T>, rho: Option<T>) -> T {
    let ln_m = count::<T>(m).ln();
    let exponent = |r: T| r * ln_m - n * gallager_e0(r, p, ch);
    match rho {
        Some(r) => exponent(r),
        None => minimize_over_rho(exponent).1,
    }
}

/// Gallager random-coding upper bound `min_ρ m^ρ exp[−n E0(ρ, P)]`.
pub fn gallager_error_upper_bound<T: Scalar>(
    n: u64,
    m: u128,
    p: T,
    ch: &ChannelParams<T>,
) -> BoundValue<T> {
    let log = gallager_log_bound(lit(n as f64), m, p, ch, None);
    BoundValue::upper_pe(log.exp(), "gallager-random-coding")
}

/// Like [`gallager_error_upper_bound`] at a fixed `ρ ∈ (0, 1]`.
pub fn gallager_error_upper_bound_at<T: Scalar>(
    n: u64,
    m: u128,
    p: T,
    rho: T,
    ch: &ChannelParams<T>,
) -> BoundValue<T> {
    let log = gallager_log_bound(lit(n as f64), m, p, ch, Some(rho));
    BoundValue::upper_pe(log.exp(), "gallager-random-coding")
}

/// Parameters of the TDMA scheme: `k` users share `n` channel uses, each
/// getting `n/k` of them and sending with power `P_n = E k / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdmaParams<T = f64> {
    pub n: u64,
    pub k: u64,
    pub spec: CodeSpec<T>,
    pub ch: ChannelParams<T>,
    /// Fixed `ρ`; `None` optimises over `(0, 1]`.
    pub rho: Option<T>,
}

impl<T: Scalar> TdmaParams<T> {
    pub fn new(n: u64, k: u64, spec: CodeSpec<T>, ch: ChannelParams<T>) -> Result<Self> {
        let tp = TdmaParams { n, k, spec, ch, rho: None };
        tp.validate()?;
        Ok(tp)
    }

    pub fn with_rho(mut self, rho: T) -> Result<Self> {
        self.rho = Some(rho);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        const OP: &str = "TdmaParams";
        if self.k == 0 {
            return Err(Error::domain(OP, "k must be at least 1"));
        }
        if self.k > self.n {
            return Err(Error::domain(
                OP,
                format!("per-user blocklength n/k = {}/{} < 1", self.n, self.k),
            ));
        }
        if let Some(rho) = self.rho {
            if !(rho > T::zero() && rho <= T::one()) {
                return Err(Error::domain(OP, format!("rho = {rho} not in (0, 1]")));
            }
        }
        Ok(())
    }

    /// Real-valued per-user blocklength `n/k`.
    pub fn per_user_blocklength(&self) -> T {
        lit::<T>(self.n as f64) / lit(self.k as f64)
    }

    /// Per-user power `P_n = E k / n`.
    pub fn per_user_power(&self) -> T {
        self.spec.e * lit(self.k as f64) / lit(self.n as f64)
    }
}

fn tdma_log_bound<T: Scalar>(tp: &TdmaParams<T>) -> Result<T> {
    tp.validate()?;
    Ok(gallager_log_bound(
        tp.per_user_blocklength(),
        tp.spec.m,
        tp.per_user_power(),
        &tp.ch,
        tp.rho,
    ))
}

/// Gallager's bound for one user of the TDMA scheme, i.e. the single-user
/// bound with `n → n/k` and `P → E k / n`.
pub fn tdma_per_user_error_upper_bound<T: Scalar>(tp: &TdmaParams<T>) -> Result<BoundValue<T>> {
    Ok(BoundValue::upper_pe(
        tdma_log_bound(tp)?.exp(),
        "tdma-per-user-gallager",
    ))
}

/// `(1 − per-user bound)^k`, a lower bound on joint correct decoding.
pub fn tdma_joint_success_lower_bound<T: Scalar>(tp: &TdmaParams<T>) -> Result<Probability<T>> {
    Ok(Probability::clamped(
        tdma_log_joint_success(tp)?.exp(),
    ))
}

/// Natural log of [`tdma_joint_success_lower_bound`]; stays finite where the
/// probability itself underflows.
pub fn tdma_log_joint_success<T: Scalar>(tp: &TdmaParams<T>) -> Result<T> {
    let per_user = tdma_per_user_error_upper_bound(tp)?.value;
    Ok(lit::<T>(tp.k as f64) * (-per_user).ln_1p())
}

/// Exact ML error probability of `m` orthogonal equal-energy codewords:
/// `1 − ∫ φ(y; √E, N0/2) (1 − Q(y / sqrt(N0/2)))^(m−1) dy`.
///
/// The integrand is evaluated as the conditional *error* probability
/// `1 − (1 − Q)^(m−1)` through `expm1`/`ln1p`, so tiny error probabilities
/// keep their relative accuracy.
pub fn ppm_exact_error<T: Scalar>(m: u128, e: T, ch: &ChannelParams<T>) -> Result<Probability<T>> {
    if m == 0 {
        return Err(Error::domain("ppm_exact_error", "needs m >= 1"));
    }
    if !(e >= T::zero()) || !e.is_finite() {
        return Err(Error::domain("ppm_exact_error", "energy must be nonnegative"));
    }
    if m == 1 {
        return Ok(Probability::zero());
    }
    let sigma = ch.noise_variance().sqrt();
    let others = count::<T>(m - 1);
    let cond_error = |y: T| -(others * (-q_unchecked(y / sigma)).ln_1p()).exp_m1();
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-11,
    };
    let v = integrate_gaussian_weighted_tol(cond_error, e.sqrt(), ch.noise_variance(), tol)?;
    Ok(Probability::clamped(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ch() -> ChannelParams<f64> {
        ChannelParams::new(2.0).unwrap()
    }

    #[test]
    fn fano_examples() {
        let b = fano_rate_upper_bound(100, 1, 10.0, Probability::zero(), &ch());
        assert!(b.valid);
        assert_relative_eq!(b.value, 0.576_550_899_021_624_7, max_relative = 1e-13);
        let p9 = fano_rate_upper_bound(100, 1, 10.0, Probability::new(0.9).unwrap(), &ch()).value;
        let p99 = fano_rate_upper_bound(100, 1, 10.0, Probability::new(0.99).unwrap(), &ch()).value;
        assert!(p99 > p9 && p9 > b.value);
        assert!(!fano_rate_upper_bound(100, 1, 10.0, Probability::one(), &ch()).valid);
        // ln(1+x) ≤ x caps the bound at 1/(kE) + 1/N0 when pe = 0 ...
        for (n, e) in [(10u64, 1.0), (1000, 10.0), (100, 1e3), (1 << 40, 1e2)] {
            let v = fano_rate_upper_bound(n, 1, e, Probability::zero(), &ch()).value;
            assert!(v <= 1.0 / e + 0.5);
        }
        // ... and it exceeds 1/N0 once n/E is large enough.
        let v = fano_rate_upper_bound(100_000_000, 1, 100.0, Probability::zero(), &ch()).value;
        assert!(v > 0.5);
    }

    #[test]
    fn polyanskiy_examples() {
        let b = polyanskiy_eps_lower_bound(2, 0.0, &ch()).unwrap();
        assert!((b.value - 0.5).abs() < 1e-12);
        let b = polyanskiy_eps_lower_bound(2, 1.0, &ch()).unwrap();
        assert_relative_eq!(b.value, 0.158_655_253_931_457_05, max_relative = 1e-10);
        assert!(polyanskiy_eps_lower_bound(1, 1.0, &ch()).is_err());
        let mut last = 1.0;
        for e in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let v = polyanskiy_eps_lower_bound(16, e, &ch()).unwrap().value;
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn birge_examples() {
        assert_eq!(birge_error_lower_bound(2, 2, 1.0, &ch()).value, 0.0);
        let b = birge_error_lower_bound(10, 6, 0.1, &ch());
        assert_relative_eq!(b.value, 0.004_825_080_231_381_393, max_relative = 1e-10);
        let b = birge_error_lower_bound(2, 50, 0.05, &ch());
        assert_relative_eq!(b.value, 0.499_855_300_778_523_3, max_relative = 1e-12);
        assert!(!birge_error_lower_bound(1, 2, 0.1, &ch()).valid);
        assert!(birge_error_lower_bound(10, 6, 0.2, &ch()).value <= b.value);
        assert!(
            birge_error_lower_bound(20, 6, 0.01, &ch()).value
                >= birge_error_lower_bound(10, 6, 0.01, &ch()).value
        );
    }

    #[test]
    fn e0_examples() {
        assert_eq!(gallager_e0(0.0, 3.0, &ch()), 0.0);
        assert_relative_eq!(gallager_e0(1.0, 2.0, &ch()), 0.5 * 2f64.ln(), max_relative = 1e-15);
        assert!(gallager_e0(0.5, 1.1, &ch()) > gallager_e0(0.5, 1.0, &ch()));
    }

    #[test]
    fn gallager_examples() {
        let single = gallager_error_upper_bound(10, 1, 1.0, &ch()).value;
        assert!((0.0..=1.0).contains(&single));
        let at_one = gallager_error_upper_bound_at(100, 4, 1.0, 1.0, &ch()).value;
        assert_relative_eq!(at_one, 6.273_314_181_935_834e-9, max_relative = 1e-10);
        let opt = gallager_error_upper_bound(100, 4, 1.0, &ch()).value;
        assert!(opt <= at_one);
        let mut last = 1.0;
        for n in [10, 20, 50, 100, 200] {
            let v = gallager_error_upper_bound(n, 64, 0.5, &ch()).value;
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn tdma_examples() {
        let spec = CodeSpec::new(100, 4, 10.0).unwrap();
        let tp = TdmaParams::new(1000, 10, spec, ch()).unwrap();
        let at_one = tdma_per_user_error_upper_bound(&tp.with_rho(1.0).unwrap()).unwrap().value;
        assert_relative_eq!(at_one, 0.348_814_907_889_521_9, max_relative = 1e-10);
        let joint = tdma_joint_success_lower_bound(&tp.with_rho(1.0).unwrap()).unwrap().value();
        assert_relative_eq!(joint, (1.0 - at_one).powi(10), max_relative = 1e-12);
        assert!((joint - 0.013_710_222).abs() < 1e-8);
        assert!(tdma_joint_success_lower_bound(&tp).unwrap().value() >= joint);

        // Substitution identity with the single-user bound.
        let opt = tdma_per_user_error_upper_bound(&tp).unwrap().value;
        assert_eq!(opt, gallager_error_upper_bound(100, 4, 0.1, &ch()).value);

        let single = TdmaParams::new(1000, 10, CodeSpec::new(100, 1, 10.0).unwrap(), ch()).unwrap();
        let b = tdma_per_user_error_upper_bound(&single).unwrap().value;
        assert!(b <= 1.0);

        let k1 = TdmaParams::new(1000, 1, spec, ch()).unwrap();
        let pu = tdma_per_user_error_upper_bound(&k1).unwrap().value;
        assert_relative_eq!(tdma_joint_success_lower_bound(&k1).unwrap().value(), 1.0 - pu);

        assert!(TdmaParams::new(5, 10, spec, ch()).is_err());
        assert!(tp.with_rho(0.0).is_err());
    }

    #[test]
    fn ppm_examples() {
        assert_eq!(ppm_exact_error(1, 3.0, &ch()).unwrap().value(), 0.0);
        assert!((ppm_exact_error(2, 0.0, &ch()).unwrap().value() - 0.5).abs() < 1e-12);
        let v = ppm_exact_error(2, 2.0, &ch()).unwrap().value();
        assert!((v - 0.158_655_253_931_457_05).abs() < 1e-10);
        // Values from an independent 40-digit quadrature.
        for (m, e, want) in [
            (4u128, 8.0, 0.057_466_548_505_471_33),
            (8, 16.0, 0.013_649_169_251_025_458),
            (16, 10.0, 0.106_128_056_345_902_7),
            (3, 5.0, 0.099_220_563_583_716_26),
            (7, 20.0, 0.004_219_109_122_450_106),
        ] {
            let got = ppm_exact_error(m, e, &ch()).unwrap().value();
            assert!((got - want).abs() < 1e-9, "m={m} e={e}: {got} vs {want}");
        }
        let tiny = ppm_exact_error(55, 80.0, &ch()).unwrap().value();
        assert_relative_eq!(tiny, 6.825_469_267_192_549e-9, max_relative = 1e-7);
    }

    #[test]
    fn ppm_monotone_in_m() {
        let mut last = 0.0;
        for m in [2u128, 3, 5, 10, 100, 10_000, 1 << 40] {
            let v = ppm_exact_error(m, 20.0, &ch()).unwrap().value();
            assert!(v > last);
            last = v;
        }
    }
}
