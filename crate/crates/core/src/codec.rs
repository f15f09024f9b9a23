//! Concrete codebooks and the Gaussian many-access channel: PPM and its
//! Hadamard rotation, TDMA composition across users, transmission and
//! maximum-likelihood decoding.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::RngSeed;
use crate::scalar::{lit, Scalar};
use crate::types::{ChannelParams, CodeSpec};

/// Largest `M` for which a PPM codebook is stored as a dense matrix.
pub const DENSE_LIMIT: usize = 1 << 14;
/// Largest number of message tuples the joint exhaustive decoder will scan.
pub const JOINT_SEARCH_BUDGET: u128 = 1_000_000;
const ENERGY_SLACK: f64 = 1e-9;

/// `M` codewords of length `n` under a per-codeword energy budget.
///
/// PPM codebooks remember their pulse amplitude so that decoding and
/// transmission never touch the `M × M` matrix; the matrix itself is kept
/// only while `M ≤ DENSE_LIMIT`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T = f64> {
    m: usize,
    n: usize,
    energy_budget: T,
    words: Option<Vec<T>>,
    energies: Vec<T>,
    pulse: Option<T>,
}

impl<T: Scalar> Codebook<T> {
    /// Dense codebook from a row-major `m × n` matrix.
    pub fn from_row_major(m: usize, n: usize, words: Vec<T>, energy_budget: T) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::domain("Codebook", "needs at least one codeword of positive length"));
        }
        if words.len() != m * n {
            return Err(Error::domain(
                "Codebook",
                format!("{} entries for a {m} × {n} matrix", words.len()),
            ));
        }
        if !(energy_budget >= T::zero()) {
            return Err(Error::domain("Codebook", format!("energy budget {energy_budget} < 0")));
        }
        let cap = energy_budget * (T::one() + lit(ENERGY_SLACK));
        let mut energies = Vec::with_capacity(m);
        for (i, row) in words.chunks_exact(n).enumerate() {
            let en = row.iter().fold(T::zero(), |s, &x| s + x * x);
            if !(en <= cap) {
                return Err(Error::domain(
                    "Codebook",
                    format!("codeword {} has energy {en} above the budget {energy_budget}", i + 1),
                ));
            }
            energies.push(en);
        }
        Ok(Codebook {
            m,
            n,
            energy_budget,
            words: Some(words),
            energies,
            pulse: None,
        })
    }

    pub fn from_rows(rows: &[Vec<T>], energy_budget: T) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::domain("Codebook", "rows have different lengths"));
        }
        Self::from_row_major(rows.len(), n, rows.concat(), energy_budget)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn energy_budget(&self) -> T {
        self.energy_budget
    }

    /// Row-major matrix, if it is materialised.
    pub fn words(&self) -> Option<&[T]> {
        self.words.as_deref()
    }

    /// Pulse amplitude when codeword `i` is a single pulse in slot `i`.
    pub fn pulse_amplitude(&self) -> Option<T> {
        self.pulse
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        match (&self.words, self.pulse) {
            (Some(w), _) => w[i * self.n + j],
            (None, Some(a)) if i == j => a,
            _ => T::zero(),
        }
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.n).map(|j| self.entry(i, j)).collect()
    }

    pub fn row_energy(&self, i: usize) -> T {
        match self.pulse {
            Some(a) => a * a,
            None => self.energies[i],
        }
    }

    /// `⟨y, x_i⟩` over the first `n` samples of `y`.
    pub fn correlation(&self, i: usize, y: &[T]) -> T {
        match (&self.words, self.pulse) {
            (_, Some(a)) => a * y[i],
            (Some(w), None) => w[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(y)
                .fold(T::zero(), |s, (&x, &v)| s + x * v),
            (None, None) => unreachable!("codebook without words or pulse"),
        }
    }

    /// Adds codeword `i` into `out`.
    pub fn add_row_to(&self, i: usize, out: &mut [T]) {
        match (&self.words, self.pulse) {
            (_, Some(a)) => out[i] = out[i] + a,
            (Some(w), None) => {
                for (o, &x) in out.iter_mut().zip(&w[i * self.n..(i + 1) * self.n]) {
                    *o = *o + x;
                }
            }
            (None, None) => unreachable!("codebook without words or pulse"),
        }
    }

    /// Gram matrix `X Xᵀ`, row-major.
    pub fn gram(&self) -> Vec<T> {
        let rows: Vec<Vec<T>> = (0..self.m).map(|i| self.row(i)).collect();
        let mut g = vec![T::zero(); self.m * self.m];
        for i in 0..self.m {
            for j in 0..self.m {
                g[i * self.m + j] = self.correlation(j, &rows[i]);
            }
        }
        g
    }

    /// Multiplies codeword `i` by `factors[i]`; the budget is unchanged.
    pub fn scale_rows(&self, factors: &[T]) -> Result<Self> {
        if factors.len() != self.m {
            return Err(Error::domain("Codebook::scale_rows", "one factor per codeword"));
        }
        let mut words = Vec::with_capacity(self.m * self.n);
        for (i, &f) in factors.iter().enumerate() {
            words.extend(self.row(i).into_iter().map(|x| x * f));
        }
        Self::from_row_major(self.m, self.n, words, self.energy_budget)
    }

    /// Comma-separated text, one codeword per line, no header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.m {
            w.write_record(self.row(i).iter().map(|x| x.to_f64_lossy().to_string()))
                .map_err(|e| Error::io("Codebook::write_csv", e))?;
        }
        w.flush().map_err(|e| Error::io("Codebook::write_csv", e))
    }

    /// Raw little-endian `f64`, row-major, `m · n` values and no header.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = Vec::with_capacity(self.n * 8);
        for i in 0..self.m {
            buf.clear();
            for x in self.row(i) {
                buf.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
            }
            out.write_all(&buf)
                .map_err(|e| Error::io("Codebook::write_binary", e))?;
        }
        Ok(())
    }
}

/// PPM: codeword `i` is `√E` in slot `i` and zero elsewhere.
pub fn make_ppm_codebook<T: Scalar>(m: usize, e: T) -> Result<Codebook<T>> {
    if m == 0 {
        return Err(Error::domain("make_ppm_codebook", "m must be at least 1"));
    }
    if !(e >= T::zero()) || !e.is_finite() {
        return Err(Error::domain("make_ppm_codebook", format!("energy {e} must be finite and ≥ 0")));
    }
    // Round the amplitude down so the pulse energy never exceeds E.
    let mut a = e.sqrt();
    while a * a > e {
        a = a - a * T::epsilon();
    }
    let words = (m <= DENSE_LIMIT).then(|| {
        let mut w = vec![T::zero(); m * m];
        for i in 0..m {
            w[i * m + i] = a;
        }
        w
    });
    Ok(Codebook {
        m,
        n: m,
        energy_budget: e,
        words,
        energies: Vec::new(),
        pulse: Some(a),
    })
}

fn fwht<T: Scalar>(v: &mut [T]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// `H̃ X` with `H̃ = H_M / √M` the normalised Sylvester–Hadamard matrix.
pub fn hadamard_rotate<T: Scalar>(cb: &Codebook<T>) -> Result<Codebook<T>> {
    let m = cb.m();
    if !m.is_power_of_two() {
        return Err(Error::domain("hadamard_rotate", format!("M = {m} is not a power of 2")));
    }
    if cb.words().is_none() {
        return Err(Error::domain(
            "hadamard_rotate",
            format!("M = {m} exceeds the dense limit {DENSE_LIMIT}"),
        ));
    }
    let n = cb.n();
    let scale = lit::<T>(m as f64).sqrt().recip();
    let mut out = vec![T::zero(); m * n];
    let mut col = vec![T::zero(); m];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = cb.entry(i, j);
        }
        fwht(&mut col);
        for (i, &c) in col.iter().enumerate() {
            out[i * n + j] = c * scale;
        }
    }
    Codebook::from_row_major(m, n, out, cb.energy_budget())
}

/// Slots `[start, end)` owned by one user (0-based user index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotRange {
    pub user: usize,
    pub start: usize,
    pub end: usize,
}

/// `k` users time-sharing `n` channel uses, each with the same codebook in
/// its own block of `⌊n/k⌋` slots. Leftover slots carry no signal.
#[derive(Debug, Clone, PartialEq)]
pub struct MnacSystem<T = f64> {
    k: usize,
    n: usize,
    per_user: Codebook<T>,
    schedule: Vec<SlotRange>,
}

impl<T: Scalar> MnacSystem<T> {
    pub fn tdma(k: usize, n: usize, per_user: Codebook<T>) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("compose_tdma", "k must be at least 1"));
        }
        let slot_len = n / k;
        if slot_len < per_user.n() {
            return Err(Error::domain(
                "compose_tdma",
                format!(
                    "⌊n/k⌋ = ⌊{n}/{k}⌋ = {slot_len} < {} slots needed per user",
                    per_user.n()
                ),
            ));
        }
        let schedule = (0..k)
            .map(|user| SlotRange {
                user,
                start: user * slot_len,
                end: (user + 1) * slot_len,
            })
            .collect();
        Ok(MnacSystem {
            k,
            n,
            per_user,
            schedule,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.per_user.m()
    }

    pub fn per_user(&self) -> &Codebook<T> {
        &self.per_user
    }

    pub fn schedule(&self) -> &[SlotRange] {
        &self.schedule
    }

    pub fn slot_len(&self) -> usize {
        self.n / self.k
    }

    pub fn unused_slots(&self) -> usize {
        self.n - self.k * self.slot_len()
    }

    pub fn segment<'a>(&self, user: usize, y: &'a [T]) -> &'a [T] {
        let r = self.schedule[user];
        &y[r.start..r.end]
    }

    /// `Σ_i x_i(w_i)` written into `out` (length `n`); messages are 1-based.
    pub fn superpose_into(&self, messages: &[usize], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        for (r, &w) in self.schedule.iter().zip(messages) {
            self.per_user.add_row_to(w - 1, &mut out[r.start..r.end]);
        }
    }

    fn check_messages(&self, messages: &[usize]) -> Result<()> {
        if messages.len() != self.k {
            return Err(Error::domain(
                "transmit",
                format!("{} messages for {} users", messages.len(), self.k),
            ));
        }
        if let Some((i, &w)) = messages
            .iter()
            .enumerate()
            .find(|(_, &w)| w == 0 || w > self.m())
        {
            return Err(Error::domain(
                "transmit",
                format!("message {w} of user {} outside [1, {}]", i + 1, self.m()),
            ));
        }
        Ok(())
    }
}

/// TDMA system with a PPM codebook of `spec.m` messages and energy `spec.e`
/// per user. The per-user blocklength is `⌊n/k⌋`, not `spec.n`.
pub fn compose_tdma<T: Scalar>(k: usize, n: usize, per_user_spec: &CodeSpec<T>) -> Result<MnacSystem<T>> {
    let m = usize::try_from(per_user_spec.m)
        .map_err(|_| Error::domain("compose_tdma", format!("M = {} too large", per_user_spec.m)))?;
    if k > 0 && n / k < m {
        return Err(Error::domain(
            "compose_tdma",
            format!("⌊n/k⌋ = ⌊{n}/{k}⌋ = {} < M = {m}: PPM needs M slots per user", n / k),
        ));
    }
    MnacSystem::tdma(k, n, make_ppm_codebook(m, per_user_spec.e)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceivedVector<T = f64> {
    pub y: Vec<T>,
}

pub(crate) fn add_noise<T: Scalar, R: Rng + ?Sized>(y: &mut [T], sigma: T, rng: &mut R) {
    for v in y {
        let z: f64 = StandardNormal.sample(rng);
        *v = *v + T::lit(z) * sigma;
    }
}

/// `Y = Σ_i x_i(W_i) + Z`, `Z` i.i.d. `N(0, N0/2)` from the stream `seed`.
pub fn transmit<T: Scalar>(
    sys: &MnacSystem<T>,
    messages: &[usize],
    ch: &ChannelParams<T>,
    seed: RngSeed,
) -> Result<ReceivedVector<T>> {
    sys.check_messages(messages)?;
    let mut y = vec![T::zero(); sys.n()];
    sys.superpose_into(messages, &mut y);
    add_noise(&mut y, ch.noise_variance().sqrt(), &mut seed.rng());
    Ok(ReceivedVector { y })
}

/// Maximum correlation, first index on ties. ML for equal-energy codebooks.
pub fn ml_decode_orthogonal<T: Scalar>(cb: &Codebook<T>, y_segment: &[T]) -> usize {
    argmax_from_one(cb.m(), |i| cb.correlation(i, y_segment))
}

/// Minimum Euclidean distance, `argmax ⟨y, x_i⟩ − ‖x_i‖²/2`. ML for any
/// codebook under white Gaussian noise.
pub fn ml_decode<T: Scalar>(cb: &Codebook<T>, y_segment: &[T]) -> usize {
    let half = lit::<T>(0.5);
    argmax_from_one(cb.m(), |i| cb.correlation(i, y_segment) - half * cb.row_energy(i))
}

fn argmax_from_one<T: Scalar>(m: usize, score: impl Fn(usize) -> T) -> usize {
    let mut best = (0, score(0));
    for i in 1..m {
        let s = score(i);
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0 + 1
}

/// Each user decoded from its own slots.
pub fn ml_decode_per_segment<T: Scalar>(sys: &MnacSystem<T>, y: &[T]) -> Vec<usize> {
    (0..sys.k())
        .map(|u| ml_decode_orthogonal(sys.per_user(), sys.segment(u, y)))
        .collect()
}

/// Scans all `M^k` message tuples for the one minimising `‖y − Σ x_i(w_i)‖²`,
/// first in lexicographic order on ties.
///
/// The users' slot ranges are disjoint, so the squared distance splits into
/// per-user terms; those are tabulated once and summed for every tuple.
pub fn ml_decode_joint_exhaustive<T: Scalar>(
    sys: &MnacSystem<T>,
    y: &ReceivedVector<T>,
    ch: &ChannelParams<T>,
) -> Result<Vec<usize>> {
    let (k, m) = (sys.k(), sys.m());
    let tuples = (m as u128)
        .checked_pow(k as u32)
        .filter(|&t| t <= JOINT_SEARCH_BUDGET)
        .ok_or(Error::Budget {
            op: "ml_decode_joint_exhaustive",
            size: (m as u128).saturating_pow(k as u32),
            budget: JOINT_SEARCH_BUDGET,
        })?;
    if y.y.len() != sys.n() {
        return Err(Error::domain(
            "ml_decode_joint_exhaustive",
            format!("received length {} ≠ n = {}", y.y.len(), sys.n()),
        ));
    }
    let scale = ch.n0.recip();
    let cb = sys.per_user();
    let two = lit::<T>(2.0);
    let cost: Vec<T> = (0..k)
        .flat_map(|u| {
            let seg = sys.segment(u, &y.y);
            (0..m).map(move |w| (cb.row_energy(w) - two * cb.correlation(w, seg)) * scale)
        })
        .collect();
    let mut digits = vec![0usize; k];
    let mut best = (T::infinity(), digits.clone());
    for _ in 0..tuples {
        let d = digits
            .iter()
            .enumerate()
            .fold(T::zero(), |s, (u, &w)| s + cost[u * m + w]);
        if d < best.0 {
            best = (d, digits.clone());
        }
        for pos in (0..k).rev() {
            digits[pos] += 1;
            if digits[pos] < m {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(best.1.into_iter().map(|w| w + 1).collect())
}
