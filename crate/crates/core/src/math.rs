//! Scalar helpers: `libm` wrappers, the `Log` convention, root bracketing and
//! adaptive quadrature.

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// `Log t := 1 + max{0, log t}`.
#[inline]
pub fn big_log(t: f64) -> f64 {
    if t > 1.0 {
        1.0 + ln(t)
    } else {
        1.0
    }
}

/// `Log Log t`, i.e. `Log` applied twice.
#[inline]
pub fn big_loglog(t: f64) -> f64 {
    big_log(big_log(t))
}

/// Hölder conjugate `p' = p / (p - 1)`.
#[inline]
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Median of a slice (copied and sorted); `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = alloc::vec::Vec::from(values);
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Finds `x` in `[lo, hi]` with `f(x) = 0` for a monotone `f` whose values at
/// the endpoints have opposite signs. Illinois-modified regula falsi, stopping
/// when the bracket is narrower than `xtol`.
pub fn solve_bracketed<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> f64 {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        if (hi - lo).abs() <= xtol {
            break;
        }
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        // fall back to bisection when the secant step leaves the bracket or
        // lands on an endpoint
        if !(x > lo.min(hi) && x < lo.max(hi)) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == (fhi > 0.0) {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + hi)
}

/// Plain bisection on a monotone predicate: returns the boundary between
/// `pred = false` (at `lo`) and `pred = true` (at `hi`).
pub fn bisect<F: FnMut(f64) -> bool>(mut pred: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    for _ in 0..400 {
        if hi - lo <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`. The interval is pre-split into `pieces` panels so that narrow
/// features are not missed by the first coarse estimate.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, pieces: usize) -> f64 {
    let pieces = pieces.max(1);
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let lo = a + h * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + h };
        let fa = f(lo);
        let fb = f(hi);
        let fm = f(0.5 * (lo + hi));
        let whole = simpson(fa, fm, fb, lo, hi);
        total += adaptive(&mut f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_convention() {
        assert_eq!(big_log(0.5), 1.0);
        assert_eq!(big_log(1.0), 1.0);
        assert!((big_log(core::f64::consts::E) - 2.0).abs() < 1e-15);
        assert_eq!(big_loglog(1.0), 1.0);
    }

    #[test]
    fn quadrature_polynomial() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12, 4);
        assert!((v - 9.0).abs() < 1e-10);
        let v = integrate(|x| exp(-x), 0.0, 40.0, 1e-12, 8);
        assert!((v - (1.0 - exp(-40.0))).abs() < 1e-10);
    }

    #[test]
    fn root_finder() {
        let r = solve_bracketed(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200);
        assert!((r - powf(2.0, 1.0 / 3.0)).abs() < 1e-12);
    }
}
