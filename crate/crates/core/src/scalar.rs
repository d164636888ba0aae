//! One-dimensional root finding used by the projection solvers.

/// Brent's method on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite sign
/// (or one of them zero). Returns the best abscissa found.
///
/// Terminates when the bracket is below `xtol` (absolute plus a relative part)
/// or after `max_iter` evaluations.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
    max_iter: usize,
) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa.signum() != fb.signum(), "brent: root not bracketed");
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when only two points
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}

/// Root of a nondecreasing function, bracketed by expanding outward from `guess`.
///
/// `f` must be nondecreasing and cross zero somewhere. Returns the abscissa.
pub fn monotone_root<F: FnMut(f64) -> f64>(mut f: F, guess: f64, step: f64, xtol: f64) -> f64 {
    let f0 = f(guess);
    if f0 == 0.0 {
        return guess;
    }
    let mut step = step.abs().max(1e-12);
    let (mut lo, mut flo, mut hi, mut fhi);
    if f0 < 0.0 {
        lo = guess;
        flo = f0;
        loop {
            hi = lo + step;
            fhi = f(hi);
            if fhi >= 0.0 {
                break;
            }
            lo = hi;
            flo = fhi;
            step *= 4.0;
        }
    } else {
        hi = guess;
        fhi = f0;
        loop {
            lo = hi - step;
            flo = f(lo);
            if flo <= 0.0 {
                break;
            }
            hi = lo;
            fhi = flo;
            step *= 4.0;
        }
    }
    brent(f, lo, hi, flo, fhi, xtol, 200)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| x * x * x - 2.0;
        let r = brent(f, 0.0, 2.0, f(0.0), f(2.0), 1e-15, 100);
        assert!((r - 2f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn monotone_root_expands_bracket() {
        let r = monotone_root(|x| x - 1234.5, 0.0, 1.0, 1e-12);
        assert!((r - 1234.5).abs() < 1e-9);
        let r = monotone_root(|x| (x + 7.0).exp() - 1.0, 3.0, 0.1, 1e-14);
        assert!((r + 7.0).abs() < 1e-12);
    }
}
