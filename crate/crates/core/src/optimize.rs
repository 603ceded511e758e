//! Bounded scalar optimisation for profile likelihoods.

/// Brent's method (golden section with parabolic steps) maximising `f` on
/// `[lo, hi]`. Returns `(argmax, max)`.
pub fn brent_maximize<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut neg = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };

    let mut x = a + GOLD * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = neg(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = neg(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx)
}

/// Drives `grad` to zero near `x0` inside `[lo, hi]` by bracketing and
/// Illinois false position. Returns `None` when no sign change is found
/// close to `x0`.
pub fn refine_stationary<G>(mut grad: G, x0: f64, lo: f64, hi: f64, tol: f64) -> Option<f64>
where
    G: FnMut(f64) -> f64,
{
    let g0 = grad(x0);
    if !g0.is_finite() {
        return None;
    }
    if g0 == 0.0 {
        return Some(x0);
    }
    // march towards the ascent direction until the gradient flips
    let dir = g0.signum();
    let mut step = (1e-9 * (hi - lo)).max(1e-14);
    let (mut a, mut ga) = (x0, g0);
    let (mut b, mut gb);
    loop {
        let cand = (x0 + dir * step).clamp(lo, hi);
        let gc = grad(cand);
        if !gc.is_finite() {
            return None;
        }
        if gc.signum() != g0.signum() {
            b = cand;
            gb = gc;
            break;
        }
        a = cand;
        ga = gc;
        if cand == lo || cand == hi || step > 0.5 * (hi - lo) {
            return None;
        }
        step *= 4.0;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let gc = grad(c);
        if gc.abs() <= tol || (b - a).abs() <= 1e-15 * (1.0 + c.abs()) {
            return Some(c);
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    Some(if ga.abs() < gb.abs() { a } else { b })
}
