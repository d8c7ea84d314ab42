//! Integer-order Bessel functions of the first kind.
//!
//! Values come from Miller's backward recurrence normalized with
//! `J_0 + 2 Σ J_2k = 1`, which is stable for every order and keeps full
//! relative precision in the `n > x` tail where the Floquet couplings live.

use crate::error::{Result, SlError};

pub const MAX_ORDER: i32 = 64;
pub const MAX_ARGUMENT: f64 = 100.0;

/// `J_n(x)` for `|n| <= 64`, `|x| <= 100`.
pub fn bessel_j(n: i32, x: f64) -> Result<f64> {
    if n.abs() > MAX_ORDER {
        return Err(SlError::InvalidParameter(format!(
            "Bessel order {n} outside |n| <= {MAX_ORDER}"
        )));
    }
    if !x.is_finite() || x.abs() > MAX_ARGUMENT {
        return Err(SlError::InvalidParameter(format!(
            "Bessel argument {x} outside |x| <= {MAX_ARGUMENT}"
        )));
    }
    let order = n.unsigned_abs() as usize;
    let table = bessel_j_table(order, x.abs());
    let mut value = table[order];
    // J_{-n}(x) = (-1)^n J_n(x), J_n(-x) = (-1)^n J_n(x)
    if n < 0 && order % 2 == 1 {
        value = -value;
    }
    if x < 0.0 && order % 2 == 1 {
        value = -value;
    }
    Ok(value)
}

/// `[J_0(x), …, J_max_order(x)]` from a single recurrence, `x >= 0`.
pub(crate) fn bessel_j_table(max_order: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let scale = max_order.max(x.ceil() as usize) as f64;
    let mut start = (scale + 20.0 + (40.0 * scale).sqrt()) as usize + 10;
    if start % 2 == 1 {
        start += 1;
    }

    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = (2.0 * k as f64 / x) * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = vals[0];
    for k in (2..=start).step_by(2) {
        norm += 2.0 * vals[k];
    }
    for (o, v) in out.iter_mut().zip(vals.iter()) {
        *o = v / norm;
    }
    out
}

/// `J_n(x)` for all `n` in `-n_max..=n_max`, indexed by `n + n_max`.
pub(crate) fn bessel_j_symmetric(n_max: usize, x: f64) -> Vec<f64> {
    let table = bessel_j_table(n_max, x.abs());
    let mut out = vec![0.0; 2 * n_max + 1];
    for n in -(n_max as i64)..=(n_max as i64) {
        let k = n.unsigned_abs() as usize;
        let mut v = table[k];
        let odd = k % 2 == 1;
        if odd && ((n < 0) ^ (x < 0.0)) {
            v = -v;
        }
        out[(n + n_max as i64) as usize] = v;
    }
    out
}
