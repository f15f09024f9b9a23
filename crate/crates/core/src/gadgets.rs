//! The converse machinery for many users made executable: a partition of
//! the joint message set `{1..M}^k` around a distance-3 covering code, the
//! pairwise divergence check inside each part, and a brute-force comparison
//! of the Birgé bound with simulated joint ML decoding on tiny systems.
//!
//! Message tuples are identified by their lexicographic rank
//! `Σ_i (w_i − 1) M^{k−1−i}`, first user most significant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::birge_error_lower_bound;
use crate::codec::{compose_tdma, Codebook, MnacSystem};
use crate::error::{Error, Result};
use crate::montecarlo::{
    estimate_error, JointDecoder, SandwichParams, SandwichReport, SystemTrial, SANDWICH_CONFIDENCE,
};
use crate::numerics::RngSeed;
use crate::scalar::{lit, Scalar};
use crate::types::{ChannelParams, CodeSpec};

/// Ranks are `u32`; the budget keeps them far below `u32::MAX`.
pub const PARTITION_BUDGET: u128 = 1_000_000;
pub const BRUTE_FORCE_BUDGET: u128 = 10_000;
/// Cap on the intra-part divergence, in units of `E/N0`.
pub const KL_RADIUS_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartStats {
    pub parts: usize,
    pub sizes: Vec<usize>,
    pub min_size: usize,
    pub max_size: usize,
}

/// Partition of `{1..M}^k` into parts that each contain a codeword of a
/// distance-3 code and every tuple within distance 1 of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCertificate {
    pub k: usize,
    pub m: usize,
    /// Part centres as 1-based tuples, in rank order.
    pub covering_code: Vec<Vec<u32>>,
    /// Members of each part as lexicographic ranks, ascending.
    pub parts: Vec<Vec<u32>>,
    pub stats: PartStats,
}

fn space_size(k: usize, m: usize, budget: u128, op: &'static str) -> Result<u32> {
    let size = (m as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if size > budget {
        return Err(Error::Budget { op, size, budget });
    }
    Ok(size as u32)
}

fn digits_of(rank: u32, k: usize, m: usize, out: &mut [u32]) {
    let (mut rank, m) = (rank, m as u32);
    for d in out[..k].iter_mut().rev() {
        *d = rank % m;
        rank /= m;
    }
}

fn hamming(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Ranks within Hamming distance 2 of `digits`, with their distance.
fn for_each_in_ball(digits: &[u32], m: usize, weights: &[u32], mut f: impl FnMut(u32, u8)) {
    let k = digits.len();
    let base: u32 = digits.iter().zip(weights).map(|(&d, &w)| d * w).sum();
    f(base, 0);
    for i in 0..k {
        let wi = weights[i];
        let ri = base - digits[i] * wi;
        for vi in (0..m as u32).filter(|&v| v != digits[i]) {
            let r1 = ri + vi * wi;
            f(r1, 1);
            for j in i + 1..k {
                let wj = weights[j];
                let rj = r1 - digits[j] * wj;
                for vj in (0..m as u32).filter(|&v| v != digits[j]) {
                    f(rj + vj * wj, 2);
                }
            }
        }
    }
}

impl PartitionCertificate {
    pub fn tuple(&self, rank: u32) -> Vec<u32> {
        let mut d = vec![0; self.k];
        digits_of(rank, self.k, self.m, &mut d);
        d.iter().map(|x| x + 1).collect()
    }

    /// Every violated invariant, described; empty when the certificate holds.
    pub fn violations(&self) -> Vec<String> {
        let (k, m) = (self.k, self.m);
        let mut out = Vec::new();
        let total = match space_size(k, m, PARTITION_BUDGET, "PartitionCertificate") {
            Ok(t) => t,
            Err(e) => return vec![e.to_string()],
        };
        if self.parts.len() != self.covering_code.len() {
            out.push(format!("{} parts for {} centres", self.parts.len(), self.covering_code.len()));
            return out;
        }
        let mut seen = vec![false; total as usize];
        for (p, part) in self.parts.iter().enumerate() {
            for &r in part {
                match seen.get_mut(r as usize) {
                    Some(s) if !*s => *s = true,
                    Some(_) => out.push(format!("tuple {:?} in more than one part", self.tuple(r))),
                    None => out.push(format!("rank {r} in part {p} is out of range")),
                }
            }
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            out.push(format!("tuple {:?} in no part", self.tuple(r as u32)));
        }
        let centres: Vec<Vec<u32>> = self
            .covering_code
            .iter()
            .map(|c| c.iter().map(|x| x - 1).collect())
            .collect();
        for (i, a) in centres.iter().enumerate() {
            for b in &centres[i + 1..] {
                if hamming(a, b) < 3 {
                    out.push(format!("centres {a:?} and {b:?} closer than 3"));
                }
            }
        }
        let min_size = 1 + k * (m - 1);
        let mut digits = vec![0u32; k];
        let mut members = Vec::new();
        for (p, part) in self.parts.iter().enumerate() {
            if part.len() < min_size {
                out.push(format!("part {p} has {} < {min_size} tuples", part.len()));
            }
            members.clear();
            for &r in part {
                digits_of(r, k, m, &mut digits);
                if hamming(&digits, &centres[p]) > 2 {
                    out.push(format!("tuple {:?} farther than 2 from its centre", self.tuple(r)));
                }
                if k > 4 {
                    members.extend_from_slice(&digits);
                }
            }
            // With k ≤ 4 no two tuples can be farther apart than 4.
            if k > 4 {
                let rows: Vec<&[u32]> = members.chunks_exact(k).collect();
                let far = (0..rows.len()).into_par_iter().find_first(|&i| {
                    rows[i + 1..].iter().any(|b| hamming(rows[i], b) > 4)
                });
                if let Some(i) = far {
                    out.push(format!("part {p} has diameter above 4 (member {i})"));
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }
}

/// Greedy distance-3 code in lexicographic order, then the assignment:
/// each tuple goes to the centre at distance ≤ 1 if there is one (it is
/// unique), otherwise to the lowest-index centre at distance 2.
pub fn build_partition(k: usize, m: usize) -> Result<PartitionCertificate> {
    if k == 0 || m < 2 {
        return Err(Error::domain("build_partition", format!("need k ≥ 1 and m ≥ 2, got k = {k}, m = {m}")));
    }
    let total = space_size(k, m, PARTITION_BUDGET, "build_partition")?;
    let weights: Vec<u32> = (0..k).map(|i| (m as u32).pow((k - 1 - i) as u32)).collect();
    let mut dist = vec![u8::MAX; total as usize];
    let mut owner = vec![u32::MAX; total as usize];
    let mut centres = Vec::new();
    let mut digits = vec![0u32; k];
    for r in 0..total {
        if dist[r as usize] != u8::MAX {
            continue;
        }
        let c = centres.len() as u32;
        digits_of(r, k, m, &mut digits);
        for_each_in_ball(&digits, m, &weights, |t, d| {
            let t = t as usize;
            if d < dist[t] {
                dist[t] = d;
                owner[t] = c;
            }
        });
        centres.push(digits.iter().map(|x| x + 1).collect::<Vec<u32>>());
    }
    let mut sizes = vec![0usize; centres.len()];
    for &o in &owner {
        sizes[o as usize] += 1;
    }
    let mut parts: Vec<Vec<u32>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for (r, &o) in owner.iter().enumerate() {
        parts[o as usize].push(r as u32);
    }
    let stats = PartStats {
        parts: parts.len(),
        min_size: sizes.iter().copied().min().unwrap_or(0),
        max_size: sizes.iter().copied().max().unwrap_or(0),
        sizes,
    };
    Ok(PartitionCertificate {
        k,
        m,
        covering_code: centres,
        parts,
        stats,
    })
}

/// Squared distances between codewords; tabulated for small codebooks.
struct PairDistances<'a, T> {
    cb: &'a Codebook<T>,
    table: Option<Vec<T>>,
}

impl<'a, T: Scalar> PairDistances<'a, T> {
    const TABLE_LIMIT: usize = 2048;

    fn new(cb: &'a Codebook<T>) -> Self {
        let m = cb.m();
        let table = (cb.pulse_amplitude().is_none() && m <= Self::TABLE_LIMIT).then(|| {
            let rows: Vec<Vec<T>> = (0..m).map(|i| cb.row(i)).collect();
            let mut t = vec![T::zero(); m * m];
            for a in 0..m {
                for b in 0..m {
                    t[a * m + b] = rows[a]
                        .iter()
                        .zip(&rows[b])
                        .fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y));
                }
            }
            t
        });
        PairDistances { cb, table }
    }

    fn get(&self, a: usize, b: usize) -> T {
        if a == b {
            return T::zero();
        }
        if let Some(amp) = self.cb.pulse_amplitude() {
            return lit::<T>(2.0) * amp * amp;
        }
        match &self.table {
            Some(t) => t[a * self.cb.m() + b],
            None => {
                let (ra, rb) = (self.cb.row(a), self.cb.row(b));
                ra.iter().zip(&rb).fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
            }
        }
    }

    /// `‖x̄(w) − x̄(w')‖²` for 0-based digit tuples. Users occupy disjoint
    /// slots, so the norm is the sum of per-user terms.
    fn tuple(&self, a: &[u32], b: &[u32]) -> T {
        a.iter()
            .zip(b)
            .fold(T::zero(), |s, (&x, &y)| s + self.get(x as usize, y as usize))
    }
}

/// Outcome of [`verify_kl_radius`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlCheck {
    pub pairs: u64,
    /// Largest exact `D(P_w ‖ P_w')` over intra-part pairs.
    pub max_divergence: f64,
    /// `64 E / N0`.
    pub cap: f64,
    pub violation: Option<(Vec<u32>, Vec<u32>, f64)>,
}

impl KlCheck {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Exact `D = ‖x̄(w) − x̄(w')‖²/N0` for every pair inside every part, against
/// the cap `64E/N0`.
pub fn verify_kl_radius<T: Scalar>(
    sys: &MnacSystem<T>,
    cert: &PartitionCertificate,
    ch: &ChannelParams<T>,
) -> Result<KlCheck> {
    if sys.k() != cert.k || sys.m() != cert.m {
        return Err(Error::domain(
            "verify_kl_radius",
            format!(
                "system has k = {}, M = {} but the certificate k = {}, M = {}",
                sys.k(),
                sys.m(),
                cert.k,
                cert.m
            ),
        ));
    }
    let (k, m) = (cert.k, cert.m);
    let n0 = ch.n0.to_f64_lossy();
    let cap = KL_RADIUS_FACTOR * sys.per_user().energy_budget().to_f64_lossy() / n0;
    let dist = PairDistances::new(sys.per_user());
    let per_part: Vec<(u64, f64, Option<(Vec<u32>, Vec<u32>, f64)>)> = cert
        .parts
        .par_iter()
        .map(|part| {
            let mut members = vec![0u32; part.len() * k];
            for (r, d) in part.iter().zip(members.chunks_exact_mut(k)) {
                digits_of(*r, k, m, d);
            }
            let rows: Vec<&[u32]> = members.chunks_exact(k).collect();
            let (mut pairs, mut max, mut bad) = (0u64, 0f64, None);
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    let d = dist.tuple(rows[i], rows[j]).to_f64_lossy() / n0;
                    pairs += 1;
                    max = max.max(d);
                    if d > cap && bad.is_none() {
                        let one = |r: &[u32]| r.iter().map(|x| x + 1).collect::<Vec<u32>>();
                        bad = Some((one(rows[i]), one(rows[j]), d));
                    }
                }
            }
            (pairs, max, bad)
        })
        .collect();
    Ok(KlCheck {
        pairs: per_part.iter().map(|p| p.0).sum(),
        max_divergence: per_part.iter().map(|p| p.1).fold(0.0, f64::max),
        cap,
        violation: per_part.into_iter().find_map(|p| p.2),
    })
}

/// Birgé's inequality on one part: the average error over the part's tuples
/// is at least `1 − ((1/N²) Σ_{i,j} D_ij + ln 2) / ln(N − 1)`, with the exact
/// pairwise divergences. `None` when the part has fewer than 3 members.
pub fn birge_part_bound<T: Scalar>(
    sys: &MnacSystem<T>,
    cert: &PartitionCertificate,
    part: usize,
    ch: &ChannelParams<T>,
) -> Option<f64> {
    let members = cert.parts.get(part)?;
    let n = members.len();
    if n < 3 {
        return None;
    }
    let k = cert.k;
    let mut digits = vec![0u32; n * k];
    for (r, d) in members.iter().zip(digits.chunks_exact_mut(k)) {
        digits_of(*r, k, cert.m, d);
    }
    let rows: Vec<&[u32]> = digits.chunks_exact(k).collect();
    let dist = PairDistances::new(sys.per_user());
    let mut total = 0.0;
    for a in &rows {
        for b in &rows {
            total += dist.tuple(a, b).to_f64_lossy();
        }
    }
    let mean_kl = total / ch.n0.to_f64_lossy() / (n * n) as f64;
    Some((1.0 - (mean_kl + std::f64::consts::LN_2) / ((n - 1) as f64).ln()).max(0.0))
}

/// Simulated joint error of a tiny TDMA/PPM system under exhaustive ML,
/// compared with the Birgé lower bound for `(k, m, E)`.
pub fn brute_force_birge_check(
    k: usize,
    m: usize,
    e: f64,
    ch: &ChannelParams<f64>,
    trials: u64,
    seed: RngSeed,
) -> Result<SandwichReport> {
    space_size(k, m, BRUTE_FORCE_BUDGET, "brute_force_birge_check")?;
    let sys = compose_tdma(k, k * m, &CodeSpec::new(m as u64, m as u128, e)?)?;
    let model = SystemTrial {
        sys: &sys,
        ch: *ch,
        decoder: JointDecoder::Exhaustive,
    };
    let estimate = estimate_error(&model, ch, trials, seed, SANDWICH_CONFIDENCE)?;
    let mut report = SandwichReport {
        parameters: SandwichParams {
            k: k as u64,
            m: m as u128,
            e,
            n0: ch.n0,
            trials,
            seed,
        },
        lower_bounds: vec![birge_error_lower_bound(k as u64, m as u128, e, ch)],
        upper_bounds: Vec::new(),
        exact: None,
        estimate: Some(estimate),
        underpowered: false,
        checks: Vec::new(),
        pass: false,
    };
    report.evaluate();
    Ok(report)
}
