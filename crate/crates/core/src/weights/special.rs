//! Digamma and polygamma functions on the positive real axis.
//!
//! Strategy: recurrence-shift the argument up until it reaches the asymptotic
//! region (x >= 12), then apply an 8-term Bernoulli-number expansion. Only
//! orders 0..=3 are provided; that is what the product-weight derivatives up
//! to order four need.

use crate::error::{Error, Result};

const SHIFT_THRESHOLD: f64 = 12.0;

// B_{2k}/(2k) for k = 1..8 (digamma tail ln x - 1/2x - sum c_k x^{-2k}).
const DIGAMMA_TAIL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

// B_{2k} for k = 1..8 (trigamma tail 1/x + 1/2x^2 + sum B_{2k} x^{-2k-1}).
const B2K: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

fn check_positive(x: f64) -> Result<()> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "polygamma argument must be positive, got {x}"
        )));
    }
    Ok(())
}

/// Digamma function psi(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    let mut shift = 0.0;
    let mut xx = x;
    while xx < SHIFT_THRESHOLD {
        shift -= 1.0 / xx;
        xx += 1.0;
    }
    let inv2 = (1.0 / xx) * (1.0 / xx);
    let mut tail = 0.0;
    let mut pow = inv2;
    for c in DIGAMMA_TAIL {
        tail += c * pow;
        pow *= inv2;
    }
    Ok(shift + xx.ln() - 0.5 / xx - tail)
}

/// Polygamma function psi^{(k)}(x) for k in 1..=3 and x > 0.
pub fn polygamma(k: usize, x: f64) -> Result<f64> {
    check_positive(x)?;
    if !(1..=3).contains(&k) {
        return Err(Error::Domain(format!("polygamma order {k} not in 1..=3")));
    }
    // Upward recurrence: psi^{(k)}(x) = psi^{(k)}(x+1) + (-1)^k k! / x^{k+1}.
    let fact = [1.0, 1.0, 2.0, 6.0][k];
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut shift = 0.0;
    let mut xx = x;
    while xx < SHIFT_THRESHOLD {
        shift += sign * fact / xx.powi(k as i32 + 1);
        xx += 1.0;
    }
    let inv = 1.0 / xx;
    let inv2 = inv * inv;
    let tail = match k {
        1 => {
            // 1/x + 1/(2x^2) + sum B_{2k} x^{-2k-1}
            let mut s = inv + 0.5 * inv2;
            let mut pow = inv2 * inv;
            for b in B2K {
                s += b * pow;
                pow *= inv2;
            }
            s
        }
        2 => {
            let mut s = -inv2 - inv2 * inv;
            let mut pow = inv2 * inv2;
            for (i, b) in B2K.iter().enumerate() {
                let m = (2 * i + 3) as f64;
                s -= m * b * pow;
                pow *= inv2;
            }
            s
        }
        3 => {
            let mut s = 2.0 * inv2 * inv + 3.0 * inv2 * inv2;
            let mut pow = inv2 * inv2 * inv;
            for (i, b) in B2K.iter().enumerate() {
                let m = ((2 * i + 3) * (2 * i + 4)) as f64;
                s += m * b * pow;
                pow *= inv2;
            }
            s
        }
        _ => unreachable!(),
    };
    Ok(shift + tail)
}
