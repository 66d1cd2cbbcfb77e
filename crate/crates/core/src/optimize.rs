//! Bracketed scalar root finding and minimisation.

use crate::error::{GkpError, Result};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub abs: T,
    pub max_iter: usize,
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Self {
            abs: lit(1e-12),
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub f_x: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<T> {
    pub x: T,
    pub f_x: T,
    pub iterations: usize,
}

fn bracket_error<T: Real>(lo: T, hi: T, f_lo: T, f_hi: T) -> GkpError {
    GkpError::BracketFailure {
        lo: to_f64(lo),
        hi: to_f64(hi),
        f_lo: to_f64(f_lo),
        f_hi: to_f64(f_hi),
    }
}

/// Plain bisection. Requires a sign change on `[lo, hi]`.
pub fn bisect<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, tol: Tolerance<T>) -> Result<Root<T>> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == T::zero() {
        return Ok(Root { x: lo, f_x: f_lo, iterations: 0 });
    }
    if f_hi == T::zero() {
        return Ok(Root { x: hi, f_x: f_hi, iterations: 0 });
    }
    if (f_lo > T::zero()) == (f_hi > T::zero()) {
        return Err(bracket_error(lo, hi, f_lo, f_hi));
    }
    let half = lit::<T>(0.5);
    for it in 1..=tol.max_iter {
        let mid = (lo + hi) * half;
        let f_mid = f(mid);
        if f_mid == T::zero() || (hi - lo) * half < tol.abs {
            return Ok(Root { x: mid, f_x: f_mid, iterations: it });
        }
        if (f_mid > T::zero()) == (f_lo > T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(GkpError::NotConverged {
        what: "bisection",
        detail: format!("bracket [{lo}, {hi}] after {} iterations", tol.max_iter),
    })
}

/// Brent's method (inverse quadratic interpolation safeguarded by bisection).
pub fn brent_root<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, tol: Tolerance<T>) -> Result<Root<T>> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == T::zero() {
        return Ok(Root { x: a, f_x: fa, iterations: 0 });
    }
    if fb == T::zero() {
        return Ok(Root { x: b, f_x: fb, iterations: 0 });
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(bracket_error(lo, hi, fa, fb));
    }
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let half = lit::<T>(0.5);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for it in 1..=tol.max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::eps() * b.abs() + half * tol.abs;
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(Root { x: b, f_x: fb, iterations: it });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = three * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < if min1 < min2 { min1 } else { min2 } {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += if xm > T::zero() { tol1 } else { -tol1 };
        }
        fb = f(b);
    }
    Err(GkpError::NotConverged {
        what: "Brent root",
        detail: format!("no convergence after {} iterations", tol.max_iter),
    })
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_min<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, tol: Tolerance<T>) -> Result<Minimum<T>> {
    if !(lo < hi) {
        return Err(GkpError::invalid("interval", format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let inv_phi = (lit::<T>(5.0).sqrt() - T::one()) * lit::<T>(0.5);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for it in 1..=tol.max_iter {
        if (b - a).abs() <= tol.abs {
            let (x, f_x) = if fc < fd { (c, fc) } else { (d, fd) };
            return Ok(Minimum { x, f_x, iterations: it });
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) * lit::<T>(0.5);
    Ok(Minimum { x, f_x: f(x), iterations: tol.max_iter })
}
