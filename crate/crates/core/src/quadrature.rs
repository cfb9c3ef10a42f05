//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first split into 64 panels so narrow features (e.g. a
/// mixture component far from the centre) cannot hide between the initial
/// Simpson nodes.
pub fn adaptive_simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, tol: T) -> Result<T> {
    let panels = 64;
    let width = (b - a) / T::of(panels as f64);
    let panel_tol = tol / T::of(panels as f64);
    let mut total = T::zero();
    for p in 0..panels {
        let lo = a + width * T::of(p as f64);
        let hi = if p + 1 == panels { b } else { lo + width };
        let mid = (lo + hi) / T::of(2.0);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = simpson(lo, hi, flo, fmid, fhi);
        total = total + refine(&f, lo, hi, flo, fmid, fhi, whole, panel_tol, MAX_DEPTH)?;
    }
    if !total.is_finite() {
        return Err(Error::Quadrature {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    Ok(total)
}

#[inline]
fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::of(6.0) * (fa + T::of(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<T: Real>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> Result<T> {
    let two = T::of(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= T::of(15.0) * tol || (b - a).abs() <= T::epsilon() * (a.abs() + b.abs()) {
        return Ok(left + right + delta / T::of(15.0));
    }
    if depth == 0 || !delta.is_finite() {
        return Err(Error::Quadrature {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    let half = tol / two;
    Ok(refine(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}
