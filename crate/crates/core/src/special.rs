//! Special functions and endpoint-aware quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

/// Relative gap below which two-point means switch to their limit formula.
pub const MEAN_SWITCH: f64 = 1e-9;

/// Logarithmic mean `(s - t) / (ln s - ln t)`, continuous through `s = t`.
pub fn log_mean(s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && t > 0.0) || !s.is_finite() || !t.is_finite() {
        return Err(Error::Domain(format!(
            "log_mean needs positive arguments, got ({s}, {t})"
        )));
    }
    Ok(log_mean_unchecked(s, t))
}

#[inline]
pub(crate) fn log_mean_unchecked(s: f64, t: f64) -> f64 {
    let (hi, lo) = if s >= t { (s, t) } else { (t, s) };
    let diff = hi - lo;
    if diff <= MEAN_SWITCH * hi {
        0.5 * (s + t)
    } else {
        // Dividing by the smaller argument keeps the ln_1p argument >= 0.
        diff / (diff / lo).ln_1p()
    }
}

/// Regularity of the integrand at the endpoints of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// At worst `t^{-1/2}` or `(1-t)^{-1/2}` at the endpoints.
    SqrtEndpoint,
    /// Like `sqrt(ln(1/t) / t)` near the endpoints.
    LogEndpoint,
    Smooth,
}

const QUAD_TOLERANCE: f64 = 1e-12;
const MAX_EVALUATIONS: usize = 1_000_000;

/// `∫_0^x f(t) dt` for `0 <= x <= 1`, with a substitution chosen by the
/// endpoint certificate so the transformed integrand is bounded or only
/// logarithmically singular.
pub fn quad_singular(f: impl Fn(f64) -> f64, x: f64, certificate: Certificate) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("upper limit {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    match certificate {
        Certificate::Smooth => Ok(integrate(&f, 0.0, x, QUAD_TOLERANCE)?.value),
        Certificate::SqrtEndpoint => {
            // t = sin^2 u, dt = sin 2u du
            let g = |u: f64| {
                let s = u.sin();
                let t = s * s;
                // Past the point where 1 - t rounds to zero the bounded
                // transformed integrand is dominated by its vanishing weight.
                if t >= 1.0 {
                    return 0.0;
                }
                f(t) * (2.0 * u).sin()
            };
            Ok(integrate(g, 0.0, x.sqrt().asin(), QUAD_TOLERANCE)?.value)
        }
        Certificate::LogEndpoint => {
            // t = u^2 on [0, 1/2] and 1 - t = u^2 on [1/2, 1].
            let left = |u: f64| 2.0 * u * f(u * u);
            let right = |u: f64| 2.0 * u * f(1.0 - u * u);
            let head = x.min(0.5);
            let mut total = integrate(left, 0.0, head.sqrt(), QUAD_TOLERANCE)?.value;
            if x > 0.5 {
                total += integrate(right, (1.0 - x).sqrt(), 0.5_f64.sqrt(), QUAD_TOLERANCE)?.value;
            }
            Ok(total)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

// Gauss-Kronrod 7-15 nodes and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// `(node, weight)` pairs of the 15-point Kronrod rule on `[-1, 1]`.
pub fn kronrod_rule() -> Vec<(f64, f64)> {
    let mut rule: Vec<(f64, f64)> = XGK.iter().zip(&WGK).map(|(&x, &w)| (x, w)).collect();
    rule.extend(XGK[..7].iter().zip(&WGK).map(|(&x, &w)| (-x, w)));
    rule
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut finite = fc.is_finite();
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        finite &= pair.is_finite();
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    if !finite {
        return Err(Error::QuadratureFailure(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Globally adaptive Gauss-Kronrod 7-15 quadrature on `[a, b]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate drops below `tol * max(1, |I|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error) = gk15(&f, a, b)?;
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let (mut total, mut total_error) = (value, error);
    while total_error > tol * total.abs().max(1.0) {
        if evaluations + 30 > MAX_EVALUATIONS {
            return Err(Error::QuadratureFailure(format!(
                "no convergence on [{a}, {b}] after {evaluations} evaluations (error {total_error:e})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel can no longer be split in floating point; accept it.
            total_error -= worst.error;
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            continue;
        }
        let (lv, le) = gk15(&f, worst.a, mid)?;
        let (rv, re) = gk15(&f, mid, worst.b)?;
        evaluations += 30;
        total += lv + rv - worst.value;
        total_error += le + re - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // Re-sum to shed the drift of incremental updates.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(Quadrature {
        value,
        error,
        evaluations,
    })
}

/// Lower incomplete beta function `B(x; a, b) = ∫_0^x t^{a-1} (1-t)^{b-1} dt`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "incomplete_beta needs a, b > 0, got ({a}, {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "incomplete_beta needs x in [0, 1], got {x}"
        )));
    }
    if x <= 0.5 {
        Ok(beta_series(x, a, b))
    } else {
        Ok(complete_beta(a, b) - beta_series(1.0 - x, b, a))
    }
}

/// Complete beta function `B(a, b)`.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    incomplete_beta(1.0, a, b)
}

fn complete_beta(a: f64, b: f64) -> f64 {
    beta_series(0.5, a, b) + beta_series(0.5, b, a)
}

/// `x^a Σ_n (1-b)_n x^n / (n! (a+n))`, convergent for `x <= 1/2` at rate `2^{-n}`.
fn beta_series(x: f64, a: f64, b: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut coeff = 1.0; // (1-b)_n / n! * x^n
    let mut sum = 1.0 / a;
    for n in 0..2000 {
        let nf = n as f64;
        coeff *= (nf + 1.0 - b) / (nf + 1.0) * x;
        let term = coeff / (a + nf + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    x.powf(a) * sum
}
