//! Seeded, parallel error-rate estimation with Wilson intervals, and the
//! sandwich check that sets analytic bounds against the exact PPM error and
//! a simulation.
//!
//! Trials are grouped into fixed batches of [`BATCH_TRIALS`]; batch `b`
//! draws from block `b` of the seed's stream. Which worker runs a batch
//! therefore has no effect on the result, and partial counts merge by
//! addition.

use std::fs::OpenOptions;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{polyanskiy_eps_lower_bound, ppm_exact_error};
use crate::codec::{
    add_noise, make_ppm_codebook, ml_decode, ml_decode_joint_exhaustive, ml_decode_per_segment, Codebook,
    MnacSystem, ReceivedVector,
};
use crate::error::{Error, Result};
use crate::numerics::{q_inverse, Probability, RngSeed, StreamRng};
use crate::orthoexp::{
    combined_lower_bound, min_distance_low_rate_lower_bound, ortho_error_upper_bound, sgb_high_rate_lower_bound,
};
use crate::scalar::Scalar;
use crate::types::{BoundDirection, BoundValue, ChannelParams};

pub const BATCH_TRIALS: u64 = 1024;
/// Confidence of the intervals used by [`sandwich_check`].
pub const SANDWICH_CONFIDENCE: f64 = 0.999;
/// Largest `M` that [`sandwich_check`] simulates.
pub const SANDWICH_SIM_LIMIT: u128 = 1 << 20;
const BOUND_REL_TOL: f64 = 1e-9;

/// A random experiment that either decodes correctly or not.
pub trait TrialModel<T: Scalar>: Sync {
    type Scratch: Send;

    fn scratch(&self) -> Self::Scratch;

    /// One transmission with uniformly drawn messages; `true` on error.
    fn trial(&self, rng: &mut StreamRng, sigma: T, scratch: &mut Self::Scratch) -> bool;
}

/// Single user, minimum-distance decoding.
impl<T: Scalar> TrialModel<T> for Codebook<T> {
    type Scratch = Vec<T>;

    fn scratch(&self) -> Vec<T> {
        vec![T::zero(); self.n()]
    }

    fn trial(&self, rng: &mut StreamRng, sigma: T, y: &mut Vec<T>) -> bool {
        let w = rng.random_range(0..self.m());
        y.iter_mut().for_each(|v| *v = T::zero());
        self.add_row_to(w, y);
        add_noise(y, sigma, rng);
        ml_decode(self, y) != w + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointDecoder {
    /// Each user from its own slots.
    PerSegment,
    /// Exhaustive search over all message tuples.
    Exhaustive,
}

/// All users of a system; an error is any user decoded wrongly.
#[derive(Debug, Clone, Copy)]
pub struct SystemTrial<'a, T = f64> {
    pub sys: &'a MnacSystem<T>,
    pub ch: ChannelParams<T>,
    pub decoder: JointDecoder,
}

impl<T: Scalar> TrialModel<T> for SystemTrial<'_, T> {
    type Scratch = (Vec<usize>, ReceivedVector<T>);

    fn scratch(&self) -> Self::Scratch {
        (
            vec![1; self.sys.k()],
            ReceivedVector {
                y: vec![T::zero(); self.sys.n()],
            },
        )
    }

    fn trial(&self, rng: &mut StreamRng, sigma: T, (msgs, y): &mut Self::Scratch) -> bool {
        for w in msgs.iter_mut() {
            *w = rng.random_range(1..=self.sys.m());
        }
        self.sys.superpose_into(msgs, &mut y.y);
        add_noise(&mut y.y, sigma, rng);
        let decoded = match self.decoder {
            JointDecoder::PerSegment => ml_decode_per_segment(self.sys, &y.y),
            JointDecoder::Exhaustive => ml_decode_joint_exhaustive(self.sys, y, &self.ch)
                .expect("system within the joint search budget"),
        };
        decoded != *msgs
    }
}

/// Trial and error counts; merging is plain addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub trials: u64,
    pub errors: u64,
}

impl Counts {
    pub fn merge(self, other: Counts) -> Counts {
        Counts {
            trials: self.trials + other.trials,
            errors: self.errors + other.errors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub seed: RngSeed,
}

impl SimEstimate {
    pub fn from_counts(counts: Counts, confidence: f64, seed: RngSeed) -> Result<Self> {
        let (ci_low, ci_high) = wilson_interval(counts.errors, counts.trials, confidence)?;
        Ok(SimEstimate {
            trials: counts.trials,
            errors: counts.errors,
            p_hat: counts.errors as f64 / counts.trials as f64,
            ci_low,
            ci_high,
            confidence,
            seed,
        })
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    pub fn overlaps(&self, other: &SimEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Wilson score interval for `errors` successes in `trials` at two-sided
/// `confidence`.
pub fn wilson_interval(errors: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || errors > trials {
        return Err(Error::domain(
            "wilson_interval",
            format!("{errors} errors in {trials} trials"),
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain("wilson_interval", format!("confidence {confidence} ∉ (0, 1)")));
    }
    let z = q_inverse(Probability::new((1.0 - confidence) / 2.0)?)?;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2n = z * z / n;
    let center = (p + z2n / 2.0) / (1.0 + z2n);
    let half = z / (1.0 + z2n) * (p * (1.0 - p) / n + z2n / (4.0 * n)).sqrt();
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0).min(p) };
    let hi = if errors == trials { 1.0 } else { (center + half).min(1.0).max(p) };
    Ok((lo, hi))
}

fn run_batches<T: Scalar, M: TrialModel<T>>(model: &M, sigma: T, trials: u64, seed: RngSeed) -> Counts {
    let batches = trials.div_ceil(BATCH_TRIALS);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let size = BATCH_TRIALS.min(trials - b * BATCH_TRIALS);
            let mut rng = seed.block_rng(b);
            let mut scratch = model.scratch();
            let errors = (0..size)
                .filter(|_| model.trial(&mut rng, sigma, &mut scratch))
                .count() as u64;
            Counts { trials: size, errors }
        })
        .reduce(Counts::default, Counts::merge)
}

/// Monte Carlo error rate of `model` on the rayon pool of the caller.
pub fn estimate_error<T: Scalar, M: TrialModel<T>>(
    model: &M,
    ch: &ChannelParams<T>,
    trials: u64,
    seed: RngSeed,
    confidence: f64,
) -> Result<SimEstimate> {
    if trials == 0 {
        return Err(Error::domain("estimate_error", "trials must be at least 1"));
    }
    let counts = run_batches(model, ch.noise_variance().sqrt(), trials, seed);
    SimEstimate::from_counts(counts, confidence, seed)
}

/// [`estimate_error`] on a dedicated pool of `workers` threads.
pub fn estimate_error_with_workers<T: Scalar, M: TrialModel<T>>(
    model: &M,
    ch: &ChannelParams<T>,
    trials: u64,
    seed: RngSeed,
    confidence: f64,
    workers: usize,
) -> Result<SimEstimate> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::domain("estimate_error", e.to_string()))?;
    pool.install(|| estimate_error(model, ch, trials, seed, confidence))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichParams {
    pub k: u64,
    pub m: u128,
    pub e: f64,
    pub n0: f64,
    pub trials: u64,
    pub seed: RngSeed,
}

/// One inequality `lhs ≤ rhs + slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Check {
    fn new(relation: String, lhs: f64, rhs: f64, slack: f64) -> Check {
        Check {
            pass: lhs <= rhs + slack,
            relation,
            lhs,
            rhs,
            slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub parameters: SandwichParams,
    pub lower_bounds: Vec<BoundValue<f64>>,
    pub upper_bounds: Vec<BoundValue<f64>>,
    pub exact: Option<f64>,
    pub estimate: Option<SimEstimate>,
    /// The smallest valid upper bound is below `10/trials`, so simulation is
    /// not used to confirm lower bounds.
    pub underpowered: bool,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SandwichReport {
    /// Recomputes `checks` and `pass` from the bounds, exact value and
    /// estimate currently held.
    pub fn evaluate(&mut self) {
        let lowers: Vec<&BoundValue<f64>> = self.lower_bounds.iter().filter(|b| b.valid).collect();
        let uppers: Vec<&BoundValue<f64>> = self.upper_bounds.iter().filter(|b| b.valid).collect();
        let mut checks = Vec::new();
        if let Some(p) = self.exact {
            for l in &lowers {
                checks.push(Check::new(
                    format!("{} <= exact", l.provenance),
                    l.value,
                    p,
                    p * BOUND_REL_TOL,
                ));
            }
            for u in &uppers {
                checks.push(Check::new(
                    format!("exact <= {}", u.provenance),
                    p,
                    u.value,
                    u.value * BOUND_REL_TOL,
                ));
            }
        }
        let min_upper = uppers.iter().map(|u| u.value).fold(f64::INFINITY, f64::min);
        self.underpowered = false;
        if let Some(est) = self.estimate {
            let slack = 1.0 / est.trials as f64;
            self.underpowered = min_upper < 10.0 / est.trials as f64;
            if !self.underpowered {
                for l in &lowers {
                    checks.push(Check::new(
                        format!("{} <= ci_high", l.provenance),
                        l.value,
                        est.ci_high,
                        slack,
                    ));
                }
            }
            for u in &uppers {
                checks.push(Check::new(
                    format!("ci_low <= {}", u.provenance),
                    est.ci_low,
                    u.value,
                    slack,
                ));
            }
            if let Some(p) = self.exact {
                checks.push(Check::new("ci_low <= exact".into(), est.ci_low, p, slack));
                checks.push(Check::new("exact <= ci_high".into(), p, est.ci_high, slack));
            }
        }
        self.pass = checks.iter().all(|c| c.pass);
        self.checks = checks;
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Multiplies every upper bound by `factor` and re-evaluates. Used to
    /// confirm that a corrupted bound is caught.
    pub fn scale_upper_bounds(&mut self, factor: f64) {
        for u in &mut self.upper_bounds {
            u.value *= factor;
            u.provenance = format!("{}*{factor:e}", u.provenance);
        }
        self.evaluate();
    }
}

fn bound_or_invalid(b: Result<BoundValue<f64>>, direction: BoundDirection, label: &str) -> BoundValue<f64> {
    b.unwrap_or_else(|_| BoundValue::invalid(direction, label))
}

/// Lower and upper bounds on the PPM error together with its exact value;
/// no simulation.
pub fn sandwich_bounds(m: u128, e: f64, ch: &ChannelParams<f64>) -> Result<SandwichReport> {
    let exact = ppm_exact_error(m, e, ch)?.value();
    let (lower_bounds, upper_bounds) = if m == 1 {
        let trivial = |d, label: &str| BoundValue::new(0.0, d, true, format!("{label}/single-message"));
        (
            ["finite-energy-converse", "sphere-packing-expurgated", "min-distance-expurgated", "combined-list-split"]
                .iter()
                .map(|l| trivial(BoundDirection::LowerOnPe, l))
                .collect(),
            vec![trivial(BoundDirection::UpperOnPe, "orthogonal-upper")],
        )
    } else {
        (
            vec![
                bound_or_invalid(
                    polyanskiy_eps_lower_bound(m, e, ch),
                    BoundDirection::LowerOnPe,
                    "finite-energy-converse",
                ),
                sgb_high_rate_lower_bound(m, e, ch),
                min_distance_low_rate_lower_bound(m, e, ch),
                combined_lower_bound(m, e, ch),
            ],
            vec![bound_or_invalid(
                ortho_error_upper_bound(m, e, ch),
                BoundDirection::UpperOnPe,
                "orthogonal-upper",
            )],
        )
    };
    let mut report = SandwichReport {
        parameters: SandwichParams {
            k: 1,
            m,
            e,
            n0: ch.n0,
            trials: 0,
            seed: RngSeed::new(0, 0),
        },
        lower_bounds,
        upper_bounds,
        exact: Some(exact),
        estimate: None,
        underpowered: false,
        checks: Vec::new(),
        pass: false,
    };
    report.evaluate();
    Ok(report)
}

/// [`sandwich_bounds`] plus a PPM simulation of `trials` transmissions when
/// `M ≤ SANDWICH_SIM_LIMIT`.
pub fn sandwich_check(
    m: u128,
    e: f64,
    ch: &ChannelParams<f64>,
    trials: u64,
    seed: RngSeed,
) -> Result<SandwichReport> {
    let mut report = sandwich_bounds(m, e, ch)?;
    report.parameters.trials = trials;
    report.parameters.seed = seed;
    if trials > 0 && m <= SANDWICH_SIM_LIMIT {
        let cb = make_ppm_codebook(m as usize, e)?;
        report.estimate = Some(estimate_error(&cb, ch, trials, seed, SANDWICH_CONFIDENCE)?);
    }
    report.evaluate();
    Ok(report)
}

#[derive(Debug, Serialize)]
struct LedgerRow<'a> {
    label: &'a str,
    seed: u64,
    stream_index: u64,
    trials: u64,
    errors: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    confidence: f64,
}

/// Appends one row per estimate to a CSV file, writing the header when the
/// file is new or empty.
pub fn append_ledger<P: AsRef<Path>>(path: P, label: &str, est: &SimEstimate) -> Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path.as_ref())
        .map_err(|e| Error::io("append_ledger", e))?;
    let fresh = file.metadata().map_err(|e| Error::io("append_ledger", e))?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(LedgerRow {
        label,
        seed: est.seed.seed,
        stream_index: est.seed.stream_index,
        trials: est.trials,
        errors: est.errors,
        p_hat: est.p_hat,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        confidence: est.confidence,
    })
    .map_err(|e| Error::io("append_ledger", e))?;
    w.flush().map_err(|e| Error::io("append_ledger", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::compose_tdma;
    use crate::types::CodeSpec;

    fn ch() -> ChannelParams<f64> {
        ChannelParams::new(2.0).unwrap()
    }

    #[test]
    fn wilson_known_values() {
        // 95%: 10/100 → [0.0552, 0.1744] (standard tables).
        let (lo, hi) = wilson_interval(10, 100, 0.95).unwrap();
        assert!((lo - 0.055_229_86).abs() < 1e-6, "{lo}");
        assert!((hi - 0.174_366_6).abs() < 1e-6, "{hi}");
        let (lo, hi) = wilson_interval(0, 50, 0.99).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.13);
        assert_eq!(wilson_interval(7, 7, 0.9).unwrap().1, 1.0);
        assert!(wilson_interval(3, 2, 0.9).is_err());
        assert!(wilson_interval(0, 0, 0.9).is_err());
    }

    #[test]
    fn noiseless_has_no_errors() {
        let quiet = ChannelParams::new(2e-30).unwrap();
        let cb = make_ppm_codebook(16, 1.0).unwrap();
        let est = estimate_error(&cb, &quiet, 1000, RngSeed::new(3, 0), 0.99).unwrap();
        assert_eq!((est.trials, est.errors), (1000, 0));
        let sys = compose_tdma(3, 30, &CodeSpec::new(10, 8, 1.0).unwrap()).unwrap();
        for decoder in [JointDecoder::PerSegment, JointDecoder::Exhaustive] {
            let model = SystemTrial { sys: &sys, ch: quiet, decoder };
            let est = estimate_error(&model, &quiet, 1000, RngSeed::new(3, 1), 0.99).unwrap();
            assert_eq!(est.errors, 0);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cb = make_ppm_codebook(4, 3.0).unwrap();
        let seed = RngSeed::new(11, 4);
        let runs: Vec<SimEstimate> = [1, 2, 8]
            .iter()
            .map(|&w| estimate_error_with_workers(&cb, &ch(), 10_000, seed, 0.99, w).unwrap())
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
        assert_eq!(runs[0].trials, 10_000);
    }

    #[test]
    fn counts_merge_is_associative_and_commutative() {
        let a = Counts { trials: 3, errors: 1 };
        let b = Counts { trials: 5, errors: 0 };
        let c = Counts { trials: 7, errors: 7 };
        assert_eq!(a.merge(b).merge(c), a.merge(b.merge(c)));
        assert_eq!(a.merge(b), b.merge(a));
    }

    #[test]
    fn sandwich_examples() {
        let r = sandwich_check(2, 20.0, &ch(), 20_000, RngSeed::new(1, 0)).unwrap();
        assert!(r.pass, "{:?}", r.failures().collect::<Vec<_>>());
        assert!((r.exact.unwrap() - 7.827_011_290_012_748e-4).abs() < 1e-12);
        assert!((r.upper_bounds[0].value - 0.013_475_893_998_170_934).abs() < 1e-12);
        let r = sandwich_check(1, 5.0, &ch(), 1000, RngSeed::new(1, 0)).unwrap();
        assert!(r.pass);
        assert_eq!(r.exact, Some(0.0));
        assert!(r.lower_bounds.iter().all(|b| b.value == 0.0));
        for en in [10.0, 20.0, 40.0] {
            for rn in [0.1, 0.2] {
                let m = (rn / 2.0 * en * 2.0f64).exp().round() as u128;
                let r = sandwich_check(m, en * 2.0, &ch(), 5_000, RngSeed::new(2, 0)).unwrap();
                assert!(r.pass, "E/N0 = {en}, ṘN0 = {rn}: {:?}", r.failures().collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn corrupted_upper_bound_fails() {
        let mut r = sandwich_check(8, 10.0, &ch(), 10_000, RngSeed::new(4, 0)).unwrap();
        assert!(r.pass);
        r.scale_upper_bounds(1e-3);
        assert!(!r.pass);
        assert!(r.failures().any(|c| c.relation.contains("orthogonal-upper")));
    }

    #[test]
    fn underpowered_flag() {
        let r = sandwich_check(2, 60.0, &ch(), 1000, RngSeed::new(1, 0)).unwrap();
        assert!(r.underpowered);
        assert!(r.pass);
        assert!(!r.checks.iter().any(|c| c.relation.ends_with("<= ci_high") && c.relation != "exact <= ci_high"));
    }

    #[test]
    fn report_json_round_trip() {
        let r = sandwich_check(4, 8.0, &ch(), 2000, RngSeed::new(5, 1)).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: SandwichReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn ledger_appends_with_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.csv");
        let cb = make_ppm_codebook(2, 2.0).unwrap();
        let est = estimate_error(&cb, &ch(), 500, RngSeed::new(1, 0), 0.99).unwrap();
        append_ledger(&path, "ppm-2", &est).unwrap();
        append_ledger(&path, "ppm-2-again", &est).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("label,seed,stream_index,trials,errors"));
        assert!(lines[2].starts_with("ppm-2-again,1,0,500,"));
    }
}
