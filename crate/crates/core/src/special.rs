//! Scalar special functions and their inverses.
//!
//! All projection systems reduce to the digamma function ψ(x), the trigamma
//! function ψ'(x), ln Γ(x), and two scalar inverses: ψ⁻¹(y) and the root of
//! h(x) = ψ(x) - ln x = c for c < 0. Evaluation uses the classical
//! recurrence shift upward followed by the Bernoulli asymptotic series;
//! h(x) is evaluated by its own series so that the ψ(x) - ln x cancellation
//! at large x never happens in floating point.

use crate::{Error, Result};
use alloc::format;
use libm::{fabs, log};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn require_positive(x: f64, name: &'static str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("{name} requires x > 0, got {x}")));
    }
    Ok(())
}

/// ln Γ(x) for x > 0.
///
/// Shift to x ≥ 10, then the Stirling series with seven Bernoulli terms.
pub fn log_gamma(x: f64) -> Result<f64> {
    require_positive(x, "log_gamma")?;
    Ok(raw_log_gamma(x))
}

pub(crate) fn raw_log_gamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift += log(x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    // B_{2n} / (2n(2n-1) x^{2n-1}) for n = 1..7
    let series = (1.0 / 12.0
        + z * (-1.0 / 360.0
            + z * (1.0 / 1260.0
                + z * (-1.0 / 1680.0
                    + z * (1.0 / 1188.0 + z * (-691.0 / 360_360.0 + z * (1.0 / 156.0)))))))
        / x;
    const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;
    (x - 0.5) * log(x) - x + HALF_LN_TWO_PI + series - shift
}

/// ψ(x) = d/dx ln Γ(x) for x > 0.
///
/// Shift to x ≥ 6, then ψ(x) ≈ ln x - 1/(2x) - Σ B_{2k}/(2k x^{2k}).
pub fn digamma(x: f64) -> Result<f64> {
    require_positive(x, "digamma")?;
    Ok(raw_digamma(x))
}

pub(crate) fn raw_digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    acc + log(x) - 0.5 / x - digamma_tail(x)
}

// Σ B_{2k}/(2k x^{2k}) for k = 1..6, the part of ln x - ψ(x) beyond 1/(2x).
fn digamma_tail(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    z * (1.0 / 12.0
        + z * (-1.0 / 120.0
            + z * (1.0 / 252.0 + z * (-1.0 / 240.0 + z * (1.0 / 132.0 + z * (-691.0 / 32_760.0))))))
}

/// ψ'(x) for x > 0.
///
/// Shift to x ≥ 6, then ψ'(x) ≈ 1/x + 1/(2x²) + Σ B_{2k}/x^{2k+1}.
pub fn trigamma(x: f64) -> Result<f64> {
    require_positive(x, "trigamma")?;
    Ok(raw_trigamma(x))
}

pub(crate) fn raw_trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 6.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    acc + 1.0 / x + trigamma_tail(x)
}

// 1/(2x²) + Σ B_{2k}/x^{2k+1} for k = 1..6, i.e. ψ'(x) - 1/x for x ≥ 6.
fn trigamma_tail(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    let series = 0.5
        + (1.0 / 6.0
            + z * (-1.0 / 30.0
                + z * (1.0 / 42.0 + z * (-1.0 / 30.0 + z * (5.0 / 66.0 + z * (-691.0 / 2730.0))))))
            / x;
    z * series
}

/// h(x) = ψ(x) - ln x, evaluated without cancellation.
///
/// Strictly increasing on (0, ∞) with range (-∞, 0).
pub(crate) fn digamma_minus_log(mut x: f64) -> f64 {
    let mut acc = 0.0;
    let x0 = x;
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // ψ(x0) - ln x0 = [ψ(x) - ln x] + ln(x/x0) - Σ 1/(x0+i)
    acc + log(x / x0) - 0.5 / x - digamma_tail(x)
}

/// h'(x) = ψ'(x) - 1/x, evaluated without cancellation.
fn trigamma_minus_recip(mut x: f64) -> f64 {
    let mut acc = 0.0;
    let x0 = x;
    while x < 6.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    // ψ'(x0) - 1/x0 = [ψ'(x) - 1/x] + (1/x - 1/x0) + Σ 1/(x0+i)²
    acc + (x0 - x) / (x * x0) + trigamma_tail(x)
}

const INV_TOL: f64 = 1e-11;

/// Solves ψ(x) = y for x > 0.
///
/// Newton iteration from the classical start exp(y) + 1/2 (y ≥ -2.22) or
/// -1/(y + γ) (y < -2.22), capped at 50 iterations.
pub fn inv_digamma(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::Domain(format!("inv_digamma requires finite y, got {y}")));
    }
    let mut x = if y >= -2.22 {
        libm::exp(y) + 0.5
    } else {
        -1.0 / (y + EULER_GAMMA)
    };
    if !(x > 0.0) {
        x = 1e-10;
    }
    for iter in 0..50 {
        let r = raw_digamma(x) - y;
        if fabs(r) <= INV_TOL {
            return Ok(x);
        }
        let step = r / raw_trigamma(x);
        let mut next = x - step;
        // ψ is increasing; keep the iterate positive by halving toward x.
        while next <= 0.0 {
            next = 0.5 * (x + next.max(0.0));
            if iter > 40 {
                break;
            }
        }
        x = next;
    }
    let residual = fabs(raw_digamma(x) - y);
    if residual <= 1e-10 {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        what: "inv_digamma",
        residual,
        iterations: 50,
    })
}

/// Solves ψ(x) - ln x = c for x > 0, requiring c < 0.
///
/// Bracketed Newton on the monotone h(x) = ψ(x) - ln x, with bisection
/// whenever a Newton step leaves the bracket.
pub fn inv_digamma_minus_log(c: f64) -> Result<f64> {
    if !(c < 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!(
            "inv_digamma_minus_log requires c < 0 (h(x) = digamma(x) - ln x < 0 for all x), got {c}"
        )));
    }
    let mut lo = 1e-8_f64.min(-0.1 / c);
    let mut hi = 1e12_f64.max(-10.0 / c);
    if digamma_minus_log(lo) > c {
        lo = 1e-300;
    }
    // Asymptotics: h(x) ≈ -1/(2x) for large x, h(x) ≈ -1/x for small x.
    let mut x = (-0.5 / c).clamp(lo, hi);
    for _ in 0..200 {
        let r = digamma_minus_log(x) - c;
        if fabs(r) <= INV_TOL {
            return Ok(x);
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - r / trigamma_minus_recip(x);
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let residual = fabs(digamma_minus_log(x) - c);
    if residual <= 1e-10 {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        what: "inv_digamma_minus_log",
        residual,
        iterations: 200,
    })
}

/// ln B(a, b) for a, b > 0.
pub(crate) fn log_beta(a: f64, b: f64) -> f64 {
    raw_log_gamma(a) + raw_log_gamma(b) - raw_log_gamma(a + b)
}

// Lentz continued fraction for the incomplete beta, valid for
// x < (a + 1)/(a + b + 2).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=400 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < 3e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b) for a, b > 0, x in [0, 1].
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "reg_inc_beta requires a, b > 0, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "reg_inc_beta requires x in [0, 1], got {x}"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let front = libm::exp(a * log(x) + b * log(1.0 - x) - log_beta(a, b));
    // Use the continued fraction on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(a, b, x) / a)
    } else {
        Ok(1.0 - front * beta_cf(b, a, 1.0 - x) / b)
    }
}
