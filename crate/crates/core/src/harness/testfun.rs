//! Closed-form simulators for the benchmark examples.

use crate::error::{Error, Result};

fn check_level(factor: usize, l: usize) -> Result<()> {
    if (1..=3).contains(&l) {
        Ok(())
    } else {
        Err(Error::LevelOutOfRange {
            row: None,
            factor,
            level: l,
            max: 3,
        })
    }
}

fn check_x(x: &[f64], p: usize) -> Result<()> {
    if x.len() == p {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: p,
            got: x.len(),
        })
    }
}

/// `f_i(x) * (g_j(x) + h_k(x))` on three quantitative inputs.
pub fn testfun_ex4(x: &[f64], i: usize, j: usize, k: usize) -> Result<f64> {
    check_x(x, 3)?;
    check_level(1, i)?;
    check_level(2, j)?;
    check_level(3, k)?;
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let f = match i {
        1 => x1 + x2 * x2 + x3.powi(3),
        2 => x1 * x1 + x2 + x3.powi(3),
        _ => x1.powi(3) + x2 * x2 + x3,
    };
    let g = match j {
        1 => x1.cos() + (2.0 * x2).cos() + (3.0 * x3).cos(),
        2 => (3.0 * x1).cos() + (2.0 * x2).cos() + x3.cos(),
        _ => (2.0 * x1).cos() + x2.cos() + (3.0 * x3).cos(),
    };
    let h = match k {
        1 => x1.sin() + (2.0 * x2).sin() + (3.0 * x3).sin(),
        2 => (3.0 * x1).sin() + (2.0 * x2).sin() + x3.sin(),
        _ => (2.0 * x1).sin() + x2.sin() + (3.0 * x3).sin(),
    };
    Ok(f * (g + h))
}

/// Exponent/frequency offsets `(r1, r2, r3)` for function family `l` at level `s`.
fn offsets(l: usize, s: usize) -> (f64, f64, f64) {
    let r1 = (s + l + 1) % 3;
    let r2 = (s + l + 2) % 3;
    let r3 = (s + l) % 3;
    ((r1 + 1) as f64, (r2 + 1) as f64, (r3 + 1) as f64)
}

pub(crate) fn ex5_f(l: usize, s: usize, a: f64, b: f64, c: f64) -> f64 {
    let (e1, e2, e3) = offsets(l, s);
    a.powf(e1) + b.powf(e2) + c.powf(e3)
}

pub(crate) fn ex5_g(l: usize, s: usize, a: f64, b: f64, c: f64) -> f64 {
    let (e1, e2, e3) = offsets(l, s);
    (e2 * a).cos() + (e1 * b).cos() + (e3 * c).cos()
}

pub(crate) fn ex5_h(l: usize, s: usize, a: f64, b: f64, c: f64) -> f64 {
    let (e1, e2, e3) = offsets(l, s);
    (e3 * a).sin() + (e2 * b).sin() + (e1 * c).sin()
}

/// Nine quantitative and nine three-level inputs; `levels` is
/// `(i1, i2, i3, j1, j2, j3, k1, k2, k3)`.
pub fn testfun_ex5(x: &[f64], levels: &[usize]) -> Result<f64> {
    check_x(x, 9)?;
    if levels.len() != 9 {
        return Err(Error::DimensionMismatch {
            expected: 9,
            got: levels.len(),
        });
    }
    for (h, &l) in levels.iter().enumerate() {
        check_level(h + 1, l)?;
    }
    let [i1, i2, i3, j1, j2, j3, k1, k2, k3] = levels.try_into().expect("length checked");
    let b1 = (x[0], x[1], x[2]);
    let b2 = (x[3], x[4], x[5]);
    let b3 = (x[6], x[7], x[8]);
    let f = |l, s, (a, b, c): (f64, f64, f64)| ex5_f(l, s, a, b, c);
    let g = |l, s, (a, b, c): (f64, f64, f64)| ex5_g(l, s, a, b, c);
    let h = |l, s, (a, b, c): (f64, f64, f64)| ex5_h(l, s, a, b, c);
    Ok(f(1, i1, b1) * g(1, j1, b1)
        + f(2, i2, b2) * g(2, j2, b2)
        + f(3, i3, b3) * g(3, j3, b3)
        + f(1, i1, b3) * h(1, k1, b3)
        + f(2, i2, b2) * h(2, k2, b2)
        + f(3, i3, b1) * h(3, k3, b1))
}
