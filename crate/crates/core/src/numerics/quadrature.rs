//! Adaptive Gauss–Kronrod (7/15) quadrature against a Gaussian weight.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

use super::std_normal_pdf;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Standardised integration range; the weight is below `1e-340` outside it.
const HALF_RANGE: f64 = 40.0;
const INITIAL_PIECES: usize = 16;
const MAX_INTERVALS: usize = 20_000;

/// Accuracy target for [`integrate_gaussian_weighted_tol`]. The loop stops
/// once the estimated error is below `max(abs, rel * |result|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-12, rel: 0.0 }
    }
}

struct Piece<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

fn gk15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Piece<T> {
    let half = (b - a) * lit(0.5);
    let centre = (a + b) * lit(0.5);
    let fc = f(centre);
    let mut kronrod = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * lit(x);
        let pair = f(centre - dx) + f(centre + dx);
        kronrod = kronrod + pair * lit(w);
        if j % 2 == 1 {
            gauss = gauss + pair * lit(WG[j / 2]);
        }
    }
    Piece {
        a,
        b,
        value: kronrod * half,
        err: ((kronrod - gauss) * half).abs(),
    }
}

/// `∫ f(y) φ(y; mean, variance) dy` to an absolute accuracy of `1e-12`.
///
/// Adaptive 15-point Gauss–Kronrod on the standardised variable over
/// `[-40, 40]`, starting from 16 panels and bisecting the worst panel until
/// the summed error estimate meets the tolerance or 20 000 panels are used.
pub fn integrate_gaussian_weighted<T, F>(f: F, mean: T, variance: T) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    integrate_gaussian_weighted_tol(f, mean, variance, Tolerance::default())
}

pub fn integrate_gaussian_weighted_tol<T, F>(
    f: F,
    mean: T,
    variance: T,
    tol: Tolerance,
) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    const OP: &str = "integrate_gaussian_weighted";
    if !(variance > T::zero()) || !variance.is_finite() || !mean.is_finite() {
        return Err(Error::domain(OP, "variance must be positive and finite"));
    }
    let sigma = variance.sqrt();
    let g = |t: T| f(mean + sigma * t) * std_normal_pdf(t);

    let span = lit::<T>(2.0 * HALF_RANGE / INITIAL_PIECES as f64);
    let mut pieces: Vec<Piece<T>> = (0..INITIAL_PIECES)
        .map(|i| {
            let a = lit::<T>(-HALF_RANGE) + span * lit(i as f64);
            gk15(&g, a, a + span)
        })
        .collect();

    let floor = lit::<T>(64.0) * T::epsilon();
    loop {
        let total: T = pieces.iter().fold(T::zero(), |s, p| s + p.value);
        let err: T = pieces.iter().fold(T::zero(), |s, p| s + p.err);
        let target = lit::<T>(tol.abs).max(lit::<T>(tol.rel) * total.abs()).max(floor * total.abs());
        if err <= target {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Numerical {
                op: OP,
                achieved: err.to_f64_lossy(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .expect("non-empty");
        let p = pieces.swap_remove(worst);
        let mid = (p.a + p.b) * lit(0.5);
        if !(mid > p.a && mid < p.b) {
            // Panel cannot be split further in this precision.
            return Err(Error::Numerical {
                op: OP,
                achieved: err.to_f64_lossy(),
            });
        }
        pieces.push(gk15(&g, p.a, mid));
        pieces.push(gk15(&g, mid, p.b));
    }
}
