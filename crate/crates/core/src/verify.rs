//! The verification suite: ten numbered checks covering the phase curve,
//! the exponent, the bound sandwich, simulation against exact values, the
//! TDMA product law, rotation invariance, the rate converse, the partition
//! gadgets, the energy-schedule demonstration and the growth classifier.
//!
//! Every check returns a [`CriterionResult`]; a check passes only if its
//! inequalities hold and it finishes within its time budget.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    capacity_per_unit_energy, energy_schedule, ortho_capacity_for_growth, OrthoCapacity, Regime,
};
use crate::bounds::{fano_rate_upper_bound, ppm_exact_error, tdma_log_joint_success, TdmaParams};
use crate::codec::{compose_tdma, hadamard_rotate, make_ppm_codebook, MnacSystem};
use crate::error::Result;
use crate::gadgets::{brute_force_birge_check, build_partition, verify_kl_radius};
use crate::montecarlo::{estimate_error, JointDecoder, SandwichReport, SimEstimate, SystemTrial};
use crate::numerics::{q_tail, Probability, RngSeed};
use crate::orthoexp::{ortho_capacity_cpue, ortho_capacity_via_sup, ortho_exponent_a, ortho_exponent_branches};
use crate::types::{rate_from_spec, ChannelParams, CodeSpec, GrowthOrder, RatePerUnitEnergy};

pub const PHASE_CURVE_TOL: f64 = 1e-9;
pub const PHASE_CONTINUITY_TOL: f64 = 1e-7;
pub const EXPONENT_BRANCH_TOL: f64 = 1e-12;
pub const EXPONENT_GRID: usize = 1000;
pub const EXACT_VS_Q_TOL: f64 = 1e-8;
pub const ROTATED_MAGNITUDE_TOL: f64 = 1e-12;
pub const SIM_CONFIDENCE_TIGHT: f64 = 0.999;
pub const SIM_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Smaller trial counts and enumeration ranges.
    pub quick: bool,
    pub seed: u64,
    /// Multiplies the upper bounds of the sandwich check; anything other
    /// than 1 is a deliberate corruption.
    pub upper_scale: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            quick: false,
            seed: 20_240_601,
            upper_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub budget_secs: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {} ({:.2}s / {:.0}s) {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed_secs,
            self.budget_secs,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub options: SuiteOptions,
    pub results: Vec<CriterionResult>,
    pub pass: bool,
}

pub const CRITERIA: [(u8, &str, f64); 10] = [
    (1, "phase-curve", 1.0),
    (2, "exponent-boundary", 1.0),
    (3, "bound-sandwich", 30.0),
    (4, "simulation-vs-exact", 60.0),
    (5, "tdma-product-law", 60.0),
    (6, "hadamard-invariance", 30.0),
    (7, "converse-consistency", 60.0),
    (8, "partition-gadgets", 120.0),
    (9, "energy-schedule-threshold", 5.0),
    (10, "growth-classifier", 1.0),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ch() -> ChannelParams<f64> {
    ChannelParams::new(2.0).expect("N0 = 2 is valid")
}

pub fn run_criterion(id: u8, opts: &SuiteOptions) -> CriterionResult {
    let (_, name, budget) = CRITERIA
        .iter()
        .copied()
        .find(|c| c.0 == id)
        .unwrap_or((id, "unknown", 0.0));
    let start = Instant::now();
    let out = match id {
        1 => phase_curve(),
        2 => exponent_boundary(),
        3 => bound_sandwich(opts),
        4 => simulation_vs_exact(opts).map(|(o, _)| o),
        5 => tdma_product_law(opts).map(|(o, _)| o),
        6 => hadamard_invariance(opts).map(|(o, _)| o),
        7 => converse_consistency(opts),
        8 => partition_gadgets(opts),
        9 => energy_schedule_threshold(),
        10 => growth_classifier(),
        _ => Ok(outcome(false, format!("no criterion {id}"))),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let out = out.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    let in_time = elapsed <= budget;
    CriterionResult {
        id,
        name: name.to_string(),
        pass: out.pass && in_time,
        detail: if in_time {
            out.detail
        } else {
            format!("{} [over time budget]", out.detail)
        },
        elapsed_secs: elapsed,
        budget_secs: budget,
    }
}

pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    let results: Vec<CriterionResult> = CRITERIA.iter().map(|c| run_criterion(c.0, opts)).collect();
    SuiteReport {
        options: *opts,
        pass: results.iter().all(|r| r.pass),
        results,
    }
}

fn phase_curve() -> Result<Outcome> {
    let ch = ch();
    let mut worst = 0f64;
    let mut below = true;
    for i in 1..=19 {
        let c = i as f64 * 0.05;
        let closed = ortho_capacity_cpue(c, &ch)?.nats_per_energy();
        let oracle = ortho_capacity_via_sup(c, &ch)?.nats_per_energy();
        worst = worst.max((closed - oracle).abs());
        below &= closed < 1.0 / ch.n0;
    }
    let d = 1e-9;
    let jump = (ortho_capacity_cpue(0.5 - d, &ch)?.nats_per_energy()
        - ortho_capacity_cpue(0.5 + d, &ch)?.nats_per_energy())
    .abs();
    Ok(outcome(
        worst <= PHASE_CURVE_TOL && jump <= PHASE_CONTINUITY_TOL && below,
        format!("max |closed − sup| = {worst:.1e}, jump at 1/2 = {jump:.1e}, all below 1/N0: {below}"),
    ))
}

fn exponent_boundary() -> Result<Outcome> {
    let ch = ch();
    let (low, high) = ortho_exponent_branches(1.0 / (4.0 * ch.n0), &ch);
    let gap = (low - high).abs();
    let mut last = f64::INFINITY;
    let mut decreasing = true;
    for i in 1..=EXPONENT_GRID {
        let r = i as f64 / EXPONENT_GRID as f64 / ch.n0;
        let a = ortho_exponent_a(RatePerUnitEnergy::from_nats(r)?, &ch)?.a;
        decreasing &= a < last;
        last = a;
    }
    Ok(outcome(
        gap <= EXPONENT_BRANCH_TOL && decreasing,
        format!("branch gap {gap:.1e}, strictly decreasing on {EXPONENT_GRID} points: {decreasing}"),
    ))
}

/// The sandwich grid: `(E, ṘN0, M)` with `M = round(e^{ṘE})`.
pub fn sandwich_grid(n0: f64) -> Vec<(f64, f64, u128)> {
    let mut grid = Vec::new();
    for e in [10.0, 20.0, 40.0, 80.0] {
        for rn in [0.1, 0.2, 0.4, 0.8] {
            let m = (rn / n0 * e).exp().round() as u128;
            grid.push((e, rn, m));
        }
    }
    grid
}

fn bound_sandwich(opts: &SuiteOptions) -> Result<Outcome> {
    let ch = ch();
    let reports: Vec<(f64, f64, Result<SandwichReport>)> = sandwich_grid(ch.n0)
        .into_par_iter()
        .map(|(e, rn, m)| {
            let r = crate::montecarlo::sandwich_bounds(m, e, &ch).map(|mut r| {
                if opts.upper_scale != 1.0 {
                    r.scale_upper_bounds(opts.upper_scale);
                }
                r
            });
            (e, rn, r)
        })
        .collect();
    let mut comparisons = 0;
    let mut violations = Vec::new();
    for (e, rn, r) in reports {
        let r = r?;
        comparisons += r.checks.len();
        for c in r.failures() {
            violations.push(format!(
                "E={e} ṘN0={rn} M={}: {} ({:.3e} > {:.3e})",
                r.parameters.m, c.relation, c.lhs, c.rhs
            ));
        }
    }
    Ok(outcome(
        violations.is_empty(),
        if violations.is_empty() {
            format!("{comparisons} comparisons, 0 violations")
        } else {
            format!("{} violations: {}", violations.len(), violations.join("; "))
        },
    ))
}

/// A simulated configuration and its estimate, for the converse check.
struct Simulated {
    label: String,
    spec: CodeSpec<f64>,
    k: u64,
    n: u64,
    estimate: SimEstimate,
}

fn seed(opts: &SuiteOptions, stream: u64) -> RngSeed {
    RngSeed::new(opts.seed, stream)
}

fn simulation_vs_exact(opts: &SuiteOptions) -> Result<(Outcome, Vec<Simulated>)> {
    let ch = ch();
    let trials = if opts.quick { 200_000 } else { 1_000_000 };
    let cb = make_ppm_codebook(2, 2.0)?;
    let est = estimate_error(&cb, &ch, trials, seed(opts, 4), SIM_CONFIDENCE_TIGHT)?;
    let q1 = q_tail(1.0)?.value();
    let covered = est.contains(q1);
    let mut worst = 0f64;
    for e in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let exact = ppm_exact_error(2, e, &ch)?.value();
        let q = q_tail((e / ch.n0).sqrt())?.value();
        worst = worst.max((exact - q).abs());
    }
    let sims = vec![Simulated {
        label: "ppm M=2 E=2".into(),
        spec: CodeSpec::new(2, 2, 2.0)?,
        k: 1,
        n: 2,
        estimate: est,
    }];
    Ok((
        outcome(
            covered && worst <= EXACT_VS_Q_TOL,
            format!(
                "p̂ = {:.6} [{:.6}, {:.6}] ∋ Q(1) = {q1:.6}: {covered}; max |exact − Q| = {worst:.1e}",
                est.p_hat, est.ci_low, est.ci_high
            ),
        ),
        sims,
    ))
}

fn tdma_product_law(opts: &SuiteOptions) -> Result<(Outcome, Vec<Simulated>)> {
    let ch = ch();
    let trials = if opts.quick { 20_000 } else { 100_000 };
    let (m, e) = (4usize, 8.0);
    let single = make_ppm_codebook(m, e)?;
    let p1 = estimate_error(&single, &ch, trials, seed(opts, 50), SIM_CONFIDENCE)?;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut sims = vec![Simulated {
        label: "tdma single user M=4 E=8".into(),
        spec: CodeSpec::new(m as u64, m as u128, e)?,
        k: 1,
        n: m as u64,
        estimate: p1,
    }];
    for k in [2usize, 5, 10] {
        let sys = compose_tdma(k, k * m, &CodeSpec::new(m as u64, m as u128, e)?)?;
        let model = SystemTrial {
            sys: &sys,
            ch,
            decoder: JointDecoder::PerSegment,
        };
        let joint = estimate_error(&model, &ch, trials, seed(opts, 50 + k as u64), SIM_CONFIDENCE)?;
        let law = |p: f64| 1.0 - (1.0 - p).powi(k as i32);
        let (lo, hi) = (law(p1.ci_low), law(p1.ci_high));
        let ok = joint.ci_low <= hi && lo <= joint.ci_high;
        pass &= ok;
        parts.push(format!(
            "k={k}: joint {:.4} [{:.4}, {:.4}] vs law {:.4} [{lo:.4}, {hi:.4}] {}",
            joint.p_hat,
            joint.ci_low,
            joint.ci_high,
            law(p1.p_hat),
            if ok { "ok" } else { "DISJOINT" }
        ));
        sims.push(Simulated {
            label: format!("tdma k={k} M=4 E=8"),
            spec: CodeSpec::new(m as u64, m as u128, e)?,
            k: k as u64,
            n: (k * m) as u64,
            estimate: joint,
        });
    }
    Ok((outcome(pass, parts.join("; ")), sims))
}

fn hadamard_invariance(opts: &SuiteOptions) -> Result<(Outcome, Vec<Simulated>)> {
    let ch = ch();
    let trials = if opts.quick { 20_000 } else { 100_000 };
    let (m, e) = (8usize, 16.0);
    let ppm = make_ppm_codebook(m, e)?;
    let rot = hadamard_rotate(&ppm)?;
    let target = (e / m as f64).sqrt();
    let worst_entry = rot
        .words()
        .unwrap_or_default()
        .iter()
        .map(|x| (x.abs() - target).abs())
        .fold(0.0, f64::max);
    let a = estimate_error(&ppm, &ch, trials, seed(opts, 60), SIM_CONFIDENCE)?;
    let b = estimate_error(&rot, &ch, trials, seed(opts, 61), SIM_CONFIDENCE)?;
    let overlap = a.overlaps(&b);
    let spec = CodeSpec::new(m as u64, m as u128, e)?;
    let sims = vec![
        Simulated {
            label: "ppm M=8 E=16".into(),
            spec,
            k: 1,
            n: m as u64,
            estimate: a,
        },
        Simulated {
            label: "rotated ppm M=8 E=16".into(),
            spec,
            k: 1,
            n: m as u64,
            estimate: b,
        },
    ];
    Ok((
        outcome(
            overlap && worst_entry <= ROTATED_MAGNITUDE_TOL,
            format!(
                "PPM {:.5} [{:.5}, {:.5}], rotated {:.5} [{:.5}, {:.5}], overlap: {overlap}; max ||x| − √(E/M)| = {worst_entry:.1e}",
                a.p_hat, a.ci_low, a.ci_high, b.p_hat, b.ci_low, b.ci_high
            ),
        ),
        sims,
    ))
}

fn converse_consistency(opts: &SuiteOptions) -> Result<Outcome> {
    let ch = ch();
    let mut sims = simulation_vs_exact(opts)?.1;
    sims.extend(tdma_product_law(opts)?.1);
    sims.extend(hadamard_invariance(opts)?.1);
    let mut bad = Vec::new();
    for s in &sims {
        let rate = rate_from_spec(&s.spec)?.nats_per_energy();
        let pe = Probability::new(s.estimate.ci_high)?;
        let bound = fano_rate_upper_bound(s.n, s.k, s.spec.e, pe, &ch);
        if !(bound.valid && rate <= bound.value) {
            bad.push(format!("{}: rate {rate:.4} > bound {:.4}", s.label, bound.value));
        }
    }
    Ok(outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} configurations, 0 violations", sims.len())
        } else {
            bad.join("; ")
        },
    ))
}

/// All `(k, m)` with `m ≥ 2` and `m^k ≤ limit`.
pub fn enumerable_spaces(limit: u64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for k in 1..64usize {
        if 2u64.checked_pow(k as u32).is_none_or(|s| s > limit) {
            break;
        }
        let mut m = 2usize;
        while (m as u64).checked_pow(k as u32).is_some_and(|s| s <= limit) {
            out.push((k, m));
            m += 1;
        }
    }
    out
}

fn partition_gadgets(opts: &SuiteOptions) -> Result<Outcome> {
    let ch = ch();
    let cert_limit = if opts.quick { 10_000 } else { 100_000 };
    let spaces = enumerable_spaces(cert_limit);
    let broken: Vec<String> = spaces
        .par_iter()
        .filter_map(|&(k, m)| match build_partition(k, m) {
            Ok(c) => {
                let v = c.violations();
                (!v.is_empty()).then(|| format!("k={k} m={m}: {}", v[0]))
            }
            Err(e) => Some(format!("k={k} m={m}: {e}")),
        })
        .collect();
    // Pairwise divergences grow with the square of the part size, so the
    // divergence sweep covers the spaces with M ≤ 16 and M^k ≤ 10^4.
    let kl_spaces: Vec<(usize, usize)> = enumerable_spaces(10_000).into_iter().filter(|s| s.1 <= 16).collect();
    let mut kl_bad = Vec::new();
    let mut worst_ratio = 0f64;
    for &(k, m) in &kl_spaces {
        let cert = build_partition(k, m)?;
        for e in [0.5, 4.0] {
            let sys = MnacSystem::tdma(k, k * m, make_ppm_codebook(m, e)?)?;
            let kl = verify_kl_radius(&sys, &cert, &ch)?;
            worst_ratio = worst_ratio.max(kl.max_divergence / kl.cap);
            if let Some((a, b, d)) = kl.violation {
                kl_bad.push(format!("k={k} m={m} E={e}: D({a:?}, {b:?}) = {d}"));
            }
        }
    }
    let trials = if opts.quick { 5_000 } else { 20_000 };
    let birge = brute_force_birge_check(2, 50, 0.05, &ch, trials, seed(opts, 80))?;
    let est = birge.estimate.expect("brute-force check simulates");
    let pass = broken.is_empty() && kl_bad.is_empty() && birge.pass;
    let mut detail = format!(
        "{} certificates (M^k ≤ {cert_limit}), {} broken; KL on {} spaces, max D/cap = {worst_ratio:.3}, {} over cap; \
         Birgé bound {:.4} vs joint error {:.4} [{:.4}, {:.4}]",
        spaces.len(),
        broken.len(),
        kl_spaces.len(),
        kl_bad.len(),
        birge.lower_bounds[0].value,
        est.p_hat,
        est.ci_low,
        est.ci_high
    );
    for b in broken.iter().chain(&kl_bad).take(3) {
        detail.push_str("; ");
        detail.push_str(b);
    }
    Ok(outcome(pass, detail))
}

/// One row of the energy-schedule demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub n: u64,
    pub k: u64,
    pub energy: f64,
    pub m: u128,
    pub total_energy_fraction: f64,
    pub ln_joint_success: f64,
}

/// `k_n = ⌈n/(ln n)²⌉`, `E_n` from the schedule, `M = round(e^{Ṙ E_n})`.
pub fn schedule_rows(rate: f64, ch: &ChannelParams<f64>) -> Result<Vec<ScheduleRow>> {
    (10..=20)
        .step_by(2)
        .map(|p| {
            let n = 1u64 << p;
            let ln_n = (n as f64).ln();
            let k = (n as f64 / (ln_n * ln_n)).ceil() as u64;
            let energy: f64 = energy_schedule(n, k)?;
            let m = (rate * energy).exp().round() as u128;
            let tp = TdmaParams::new(n, k, CodeSpec::new(n / k, m, energy)?, *ch)?;
            Ok(ScheduleRow {
                n,
                k,
                energy,
                m,
                total_energy_fraction: k as f64 * energy / n as f64,
                ln_joint_success: tdma_log_joint_success(&tp)?,
            })
        })
        .collect()
}

fn energy_schedule_threshold() -> Result<Outcome> {
    let ch = ch();
    let rows = schedule_rows(0.8 / ch.n0, &ch)?;
    let success_up = rows.windows(2).all(|w| w[1].ln_joint_success > w[0].ln_joint_success);
    let fraction_down = rows
        .windows(2)
        .all(|w| w[1].total_energy_fraction < w[0].total_energy_fraction);
    let succ: Vec<String> = rows.iter().map(|r| format!("{:.1}", r.ln_joint_success)).collect();
    let frac: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.total_energy_fraction)).collect();
    Ok(outcome(
        success_up && fraction_down,
        format!(
            "ln joint success [{}] increasing: {success_up}; kE/n [{}] decreasing: {fraction_down}",
            succ.join(", "),
            frac.join(", ")
        ),
    ))
}

fn growth_classifier() -> Result<Outcome> {
    let ch = ch();
    let single = 1.0 / ch.n0;
    let mut rows = Vec::new();
    let v = capacity_per_unit_energy(GrowthOrder::new(0.5, 0.0)?, &ch).regime;
    rows.push(("Θ(n^0.5) → single-user", matches!(v, Regime::SingleUserCapacity(r) if r.nats_per_energy() == single)));
    let v = capacity_per_unit_energy(GrowthOrder::new(1.0, 1.0)?, &ch).regime;
    rows.push(("Θ(n log n) → infeasible", v == Regime::Infeasible));
    let v = capacity_per_unit_energy(GrowthOrder::threshold(), &ch).regime;
    rows.push(("Θ(n/log n) → unresolved", v == Regime::Unresolved));
    let v = ortho_capacity_for_growth(GrowthOrder::new(0.0, 3.0)?, &ch);
    rows.push((
        "Θ(log³ n) → C⊥ = 1/N0",
        matches!(v, OrthoCapacity::Rate(r) if r.nats_per_energy() == single),
    ));
    let pass = rows.iter().all(|r| r.1);
    let detail: Vec<String> = rows
        .iter()
        .map(|(name, ok)| format!("{name}: {}", if *ok { "ok" } else { "WRONG" }))
        .collect();
    Ok(outcome(pass, detail.join("; ")))
}
