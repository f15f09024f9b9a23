use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mnac::asymptotics::{capacity_per_unit_energy, compare_to_threshold, ortho_capacity_for_growth};
use mnac::bounds::{
    birge_error_lower_bound, fano_rate_upper_bound, ppm_exact_error, tdma_log_joint_success,
    tdma_per_user_error_upper_bound,
};
use mnac::codec::{compose_tdma, ml_decode_joint_exhaustive};
use mnac::montecarlo::{append_ledger, estimate_error, sandwich_bounds, JointDecoder, SystemTrial};
use mnac::orthoexp::{ortho_capacity_cpue, ortho_capacity_via_sup};
use mnac::types::{rate_from_spec, single_user_capacity_cpue};
use mnac::verify::{run_criterion, SuiteOptions, SuiteReport, CRITERIA};
use mnac::{
    BoundDirection, BoundValue, ChannelParams, CodeSpec, GrowthOrder, OrthoCapacity, Probability, Regime,
    RngSeed, TdmaParams,
};

use crate::config::Resolver;
use crate::output::{Report, Table};
use crate::Failure;

pub struct Prepared(Box<dyn FnOnce() -> Result<Report, Failure>>);

impl Prepared {
    fn new(f: impl FnOnce() -> Result<Report, Failure> + 'static) -> Self {
        Prepared(Box::new(f))
    }

    pub fn run(self) -> Result<Report, Failure> {
        (self.0)()
    }
}

fn channel(res: &mut Resolver, flag: Option<f64>) -> Result<ChannelParams, Failure> {
    Ok(ChannelParams::new(res.or("n0", flag, 2.0)?)?)
}

const UNITS_PE: &str = "probability";
const UNITS_NATS: &str = "nats_per_energy";
const UNITS_BITS: &str = "bits_per_energy";

#[derive(Debug, Serialize)]
struct BoundRow {
    quantity: &'static str,
    kind: &'static str,
    value: f64,
    valid: bool,
    units: &'static str,
    provenance: String,
}

impl BoundRow {
    fn from_bound(b: &BoundValue) -> Self {
        let (quantity, kind, units) = match b.direction {
            BoundDirection::UpperOnPe => ("error_probability", "upper", UNITS_PE),
            BoundDirection::LowerOnPe => ("error_probability", "lower", UNITS_PE),
            BoundDirection::UpperOnRate => ("rate_per_unit_energy", "upper", UNITS_NATS),
        };
        BoundRow {
            quantity,
            kind,
            value: b.value,
            valid: b.valid,
            units,
            provenance: b.provenance.clone(),
        }
    }
}

fn bound_table(rows: &[BoundRow]) -> Table {
    Table {
        headers: vec!["quantity", "kind", "value", "valid", "units", "provenance"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.quantity.to_string(),
                    r.kind.to_string(),
                    r.value.to_string(),
                    r.valid.to_string(),
                    r.units.to_string(),
                    r.provenance.clone(),
                ]
            })
            .collect(),
    }
}

fn legend(rows: &[BoundRow]) -> BTreeMap<String, String> {
    rows.iter()
        .map(|r| (r.provenance.clone(), format!("{} {} ({})", r.kind, r.quantity, r.units)))
        .collect()
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Messages per user.
    #[arg(long)]
    m: Option<u128>,
    /// Energy per codeword.
    #[arg(long)]
    e: Option<f64>,
    /// Noise level; per-dimension variance N0/2.
    #[arg(long)]
    n0: Option<f64>,
    /// Blocklength, for the TDMA and Fano bounds.
    #[arg(long)]
    n: Option<u64>,
    /// Number of users, for the TDMA, Birgé and Fano bounds.
    #[arg(long)]
    k: Option<u64>,
}

pub fn bounds(a: BoundsArgs, res: &mut Resolver) -> Result<Prepared, Failure> {
    let m: u128 = res.required("m", a.m)?;
    let e: f64 = res.required("e", a.e)?;
    let ch = channel(res, a.n0)?;
    let n = res.optional("n", a.n)?;
    let k = res.optional("k", a.k)?;
    let spec = CodeSpec::new(n.unwrap_or(1), m, e)?;
    if m == 0 {
        return Err(Failure::Usage("m must be at least 1".into()));
    }
    let tdma = match (n, k) {
        (Some(n), Some(k)) => Some(TdmaParams::new(n, k, spec, ch)?),
        (None, None) => None,
        (Some(_), None) => return Err(Failure::Usage("--n needs --k".into())),
        (None, Some(_)) => None,
    };
    Ok(Prepared::new(move || {
        let sandwich = sandwich_bounds(m, e, &ch)?;
        let exact = sandwich.exact.unwrap_or(f64::NAN);
        let mut rows: Vec<BoundRow> = sandwich
            .lower_bounds
            .iter()
            .chain(&sandwich.upper_bounds)
            .map(BoundRow::from_bound)
            .collect();
        rows.push(BoundRow {
            quantity: "error_probability",
            kind: "exact",
            value: exact,
            valid: true,
            units: UNITS_PE,
            provenance: "ppm-exact-integral".into(),
        });
        rows.push(BoundRow {
            quantity: "rate_per_unit_energy",
            kind: "value",
            value: rate_from_spec(&spec)?.nats_per_energy(),
            valid: true,
            units: UNITS_NATS,
            provenance: "rate-from-spec".into(),
        });
        rows.push(BoundRow {
            quantity: "rate_per_unit_energy",
            kind: "upper",
            value: single_user_capacity_cpue(&ch).nats_per_energy(),
            valid: true,
            units: UNITS_NATS,
            provenance: "single-user-capacity".into(),
        });
        if let Some(k) = k {
            rows.push(BoundRow::from_bound(&birge_error_lower_bound(k, m, e, &ch)));
        }
        if let Some(tp) = tdma {
            rows.push(BoundRow::from_bound(&tdma_per_user_error_upper_bound(&tp)?));
            rows.push(BoundRow {
                quantity: "joint_success_probability",
                kind: "lower",
                value: tdma_log_joint_success(&tp)?.exp(),
                valid: true,
                units: UNITS_PE,
                provenance: "tdma-joint-gallager".into(),
            });
            // Fano at the joint error of k independent PPM users.
            let pe_joint = -(tp.k as f64 * (-exact).ln_1p()).exp_m1();
            let pe = Probability::new(pe_joint.clamp(0.0, 1.0))?;
            let mut fano = BoundRow::from_bound(&fano_rate_upper_bound(tp.n, tp.k, e, pe, &ch));
            fano.provenance = format!("{}/ppm-tdma-joint-error", fano.provenance);
            rows.push(fano);
        }
        Ok(Report {
            provenance: legend(&rows),
            table: bound_table(&rows),
            result: json!({ "bounds": rows, "exact": exact, "sandwich_checks": sandwich.checks }),
            failure: None,
        })
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderArg {
    PerSegment,
    Exhaustive,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    e: Option<f64>,
    #[arg(long)]
    n0: Option<f64>,
    /// Number of TDMA users (default 1).
    #[arg(long)]
    k: Option<u64>,
    /// Blocklength (default k·m).
    #[arg(long)]
    n: Option<u64>,
    /// Number of transmissions (default 100000).
    #[arg(long)]
    trials: Option<u64>,
    /// ChaCha stream index (default 0).
    #[arg(long)]
    stream: Option<u64>,
    /// Confidence of the Wilson interval (default 0.99).
    #[arg(long)]
    confidence: Option<f64>,
    /// Joint decoder for k > 1.
    #[arg(long, value_enum)]
    decoder: Option<DecoderArg>,
    /// Write the per-user codebook as CSV, one codeword per row.
    #[arg(long)]
    export_csv: Option<PathBuf>,
    /// Write the per-user codebook as little-endian f64, row-major.
    #[arg(long)]
    export_binary: Option<PathBuf>,
    /// Append the estimate to a CSV ledger.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs, res: &mut Resolver, seed: u64) -> Result<Prepared, Failure> {
    let m: u64 = res.required("m", a.m)?;
    let e: f64 = res.required("e", a.e)?;
    let ch = channel(res, a.n0)?;
    let k: u64 = res.or("k", a.k, 1)?;
    let n: u64 = res.or("n", a.n, k.saturating_mul(m))?;
    let trials: u64 = res.or("trials", a.trials, 100_000)?;
    let stream: u64 = res.or("stream", a.stream, 0)?;
    let confidence: f64 = res.or("confidence", a.confidence, 0.99)?;
    let decoder = res.or("decoder", a.decoder, DecoderArg::PerSegment)?;
    let export_csv: Option<PathBuf> = res.optional("export_csv", a.export_csv)?;
    let export_binary: Option<PathBuf> = res.optional("export_binary", a.export_binary)?;
    let ledger: Option<PathBuf> = res.optional("ledger", a.ledger)?;
    if m == 0 || k == 0 {
        return Err(Failure::Usage("m and k must be at least 1".into()));
    }
    if trials == 0 {
        return Err(Failure::Usage("trials must be at least 1".into()));
    }
    let sys = compose_tdma(k as usize, n as usize, &CodeSpec::new(n, u128::from(m), e)?)?;
    let rng_seed = RngSeed::new(seed, stream);
    Ok(Prepared::new(move || {
        let cb = sys.per_user();
        let est = if k == 1 {
            estimate_error(cb, &ch, trials, rng_seed, confidence)?
        } else {
            let decoder = match decoder {
                DecoderArg::PerSegment => JointDecoder::PerSegment,
                DecoderArg::Exhaustive => {
                    // One dry run surfaces the search-budget error before
                    // the trials start.
                    ml_decode_joint_exhaustive(&sys, &mnac::ReceivedVector { y: vec![0.0; sys.n()] }, &ch)?;
                    JointDecoder::Exhaustive
                }
            };
            let model = SystemTrial { sys: &sys, ch, decoder };
            estimate_error(&model, &ch, trials, rng_seed, confidence)?
        };
        if let Some(p) = &export_csv {
            cb.write_csv(BufWriter::new(File::create(p)?))?;
        }
        if let Some(p) = &export_binary {
            cb.write_binary(BufWriter::new(File::create(p)?))?;
        }
        if let Some(p) = &ledger {
            append_ledger(p, &format!("ppm-tdma/k={k}/m={m}/e={e}/n0={}", ch.n0), &est)?;
        }
        let per_user = ppm_exact_error(u128::from(m), e, &ch)?.value();
        let joint = -(k as f64 * (-per_user).ln_1p()).exp_m1();
        let provenance = BTreeMap::from([
            ("estimate".to_string(), "monte-carlo-wilson".to_string()),
            ("reference".to_string(), "ppm-exact-integral/tdma-product-law".to_string()),
        ]);
        Ok(Report {
            table: Table {
                headers: vec![
                    "k", "m", "n", "e", "n0", "trials", "errors", "p_hat", "ci_low", "ci_high", "confidence",
                    "seed", "stream_index", "reference", "units",
                ],
                rows: vec![vec![
                    k.to_string(),
                    m.to_string(),
                    n.to_string(),
                    e.to_string(),
                    ch.n0.to_string(),
                    est.trials.to_string(),
                    est.errors.to_string(),
                    est.p_hat.to_string(),
                    est.ci_low.to_string(),
                    est.ci_high.to_string(),
                    est.confidence.to_string(),
                    est.seed.seed.to_string(),
                    est.seed.stream_index.to_string(),
                    joint.to_string(),
                    UNITS_PE.to_string(),
                ]],
            },
            result: json!({
                "system": { "k": k, "m": m, "n": n, "e": e, "n0": ch.n0, "slot_len": sys.slot_len() },
                "estimate": est,
                "reference": { "per_user": per_user, "joint": joint, "units": UNITS_PE },
            }),
            provenance,
            failure: None,
        })
    }))
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Smallest c (default 0.05).
    #[arg(long)]
    c_min: Option<f64>,
    /// Largest c (default 0.95).
    #[arg(long)]
    c_max: Option<f64>,
    /// Number of grid points (default 19).
    #[arg(long)]
    c_steps: Option<usize>,
    #[arg(long)]
    n0: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    c: f64,
    closed_form: f64,
    sup_oracle: f64,
    single_user: f64,
    units: &'static str,
}

pub fn sweep(a: SweepArgs, res: &mut Resolver) -> Result<Prepared, Failure> {
    let lo: f64 = res.or("c_min", a.c_min, 0.05)?;
    let hi: f64 = res.or("c_max", a.c_max, 0.95)?;
    let steps: usize = res.or("c_steps", a.c_steps, 19)?;
    let ch = channel(res, a.n0)?;
    if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
        return Err(Failure::Usage(format!("c grid [{lo}, {hi}] must lie inside (0, 1)")));
    }
    if steps == 0 || (steps == 1 && lo != hi) {
        return Err(Failure::Usage("c_steps must be at least 2 unless c_min = c_max".into()));
    }
    Ok(Prepared::new(move || {
        let mut rows = Vec::with_capacity(2 * steps);
        for i in 0..steps {
            let c = if steps == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            };
            let closed = ortho_capacity_cpue(c, &ch)?;
            let oracle = ortho_capacity_via_sup(c, &ch)?;
            let single = single_user_capacity_cpue(&ch);
            rows.push(SweepRow {
                c,
                closed_form: closed.nats_per_energy(),
                sup_oracle: oracle.nats_per_energy(),
                single_user: single.nats_per_energy(),
                units: UNITS_NATS,
            });
            rows.push(SweepRow {
                c,
                closed_form: closed.bits_per_energy(),
                sup_oracle: oracle.bits_per_energy(),
                single_user: single.bits_per_energy(),
                units: UNITS_BITS,
            });
        }
        let table = Table {
            headers: vec!["c", "closed_form", "sup_oracle", "single_user", "units"],
            rows: rows
                .iter()
                .map(|r| {
                    vec![
                        r.c.to_string(),
                        r.closed_form.to_string(),
                        r.sup_oracle.to_string(),
                        r.single_user.to_string(),
                        r.units.to_string(),
                    ]
                })
                .collect(),
        };
        Ok(Report {
            result: json!({ "rows": rows }),
            table,
            provenance: BTreeMap::from([
                ("closed_form".to_string(), "orthogonal-capacity-closed-form".to_string()),
                ("sup_oracle".to_string(), "orthogonal-capacity-sup-bisection".to_string()),
                ("single_user".to_string(), "single-user-capacity".to_string()),
            ]),
            failure: None,
        })
    }))
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Polynomial exponent a in Θ(n^a (log n)^b).
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Logarithmic exponent b in Θ(n^a (log n)^b).
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    n0: Option<f64>,
}

pub fn classify(a: ClassifyArgs, res: &mut Resolver) -> Result<Prepared, Failure> {
    let poly: f64 = res.required("a", a.a)?;
    let loglog: f64 = res.or("b", a.b, 0.0)?;
    let ch = channel(res, a.n0)?;
    let g = GrowthOrder::new(poly, loglog)?;
    Ok(Prepared::new(move || {
        let comparison = compare_to_threshold(g);
        let verdict = capacity_per_unit_energy(g, &ch);
        let ortho = ortho_capacity_for_growth(g, &ch);
        let (regime, rate) = match &verdict.regime {
            Regime::Infeasible => ("Infeasible", Some(0.0)),
            Regime::SingleUserCapacity(r) => ("SingleUserCapacity", Some(r.nats_per_energy())),
            Regime::Unresolved => ("Unresolved", None),
        };
        let ortho_rate = match &ortho {
            OrthoCapacity::Rate(r) => Some(r.nats_per_energy()),
            OrthoCapacity::Unresolved => None,
        };
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        Ok(Report {
            table: Table {
                headers: vec!["a", "b", "comparison", "regime", "capacity", "ortho_capacity", "units"],
                rows: vec![vec![
                    poly.to_string(),
                    loglog.to_string(),
                    format!("{comparison:?}"),
                    regime.to_string(),
                    cell(rate),
                    cell(ortho_rate),
                    UNITS_NATS.to_string(),
                ]],
            },
            result: json!({
                "growth": g,
                "comparison": comparison,
                "verdict": verdict,
                "ortho_capacity": ortho,
                "units": UNITS_NATS,
            }),
            provenance: BTreeMap::from([
                ("verdict".to_string(), "many-access-threshold".to_string()),
                ("ortho_capacity".to_string(), "orthogonal-capacity-closed-form".to_string()),
            ]),
            failure: None,
        })
    }))
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Reduced trial counts and enumeration ranges.
    #[arg(long)]
    quick: bool,
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<u8>>,
    /// Test hook: multiply the sandwich upper bounds by this factor.
    #[arg(long, hide = true)]
    inject_upper_scale: Option<f64>,
}

pub fn verify(a: VerifyArgs, res: &mut Resolver, seed: u64) -> Result<Prepared, Failure> {
    let quick: bool = res.or("quick", a.quick.then_some(true), false)?;
    let ids: Vec<u8> = res.or("criteria", a.criteria, CRITERIA.iter().map(|c| c.0).collect())?;
    let upper_scale: f64 = res.or("inject_upper_scale", a.inject_upper_scale, 1.0)?;
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(Failure::Usage(format!("no criterion {bad}; ids run from 1 to {}", CRITERIA.len())));
    }
    let opts = SuiteOptions {
        quick,
        seed,
        upper_scale,
    };
    Ok(Prepared::new(move || {
        let mut results = Vec::with_capacity(ids.len());
        for id in ids {
            let r = run_criterion(id, &opts);
            eprintln!("{}", r.line());
            results.push(r);
        }
        let report = SuiteReport {
            options: opts,
            pass: results.iter().all(|r| r.pass),
            results,
        };
        let failure = (!report.pass).then(|| {
            report
                .results
                .iter()
                .filter(|r| !r.pass)
                .map(|r| format!("criterion {} {}: {}", r.id, r.name, r.detail))
                .collect::<Vec<_>>()
                .join("; ")
        });
        let table = Table {
            headers: vec!["id", "name", "pass", "elapsed_secs", "budget_secs", "detail"],
            rows: report
                .results
                .iter()
                .map(|r| {
                    vec![
                        r.id.to_string(),
                        r.name.clone(),
                        r.pass.to_string(),
                        r.elapsed_secs.to_string(),
                        r.budget_secs.to_string(),
                        r.detail.clone(),
                    ]
                })
                .collect(),
        };
        let provenance = report
            .results
            .iter()
            .map(|r| (format!("criterion_{:02}", r.id), r.name.clone()))
            .collect();
        Ok(Report {
            result: serde_json::to_value(&report).unwrap_or(Value::Null),
            table,
            provenance,
            failure,
        })
    }))
}
