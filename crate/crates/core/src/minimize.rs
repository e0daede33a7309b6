//! Bounded scalar minimization: golden-section search with parabolic
//! interpolation steps (Brent's method restricted to an interval).

#[derive(Clone, Copy, Debug)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn bounded_brent<F>(mut f: F, lower: f64, upper: f64, rel_tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    const ABS_TOL: f64 = 1e-300;
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let (mut a, mut b) = (lower, upper);

    let mut xf = a + golden * (b - a);
    let mut fx = f(xf);
    let (mut nfc, mut fnfc) = (xf, fx);
    let (mut fulc, mut ffulc) = (xf, fx);
    let (mut rat, mut e) = (0.0f64, 0.0f64);

    let mut xm = 0.5 * (a + b);
    let mut tol1 = rel_tol * xf.abs() + ABS_TOL / 3.0;
    let mut tol2 = 2.0 * tol1;
    let mut iterations = 0;

    while (xf - xm).abs() > tol2 - 0.5 * (b - a) {
        if iterations >= max_iter {
            return Minimum { x: xf, fx, iterations, converged: false };
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            use_golden = false;
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                rat = p / q;
                let x = xf + rat;
                if (x - a) < tol2 || (b - x) < tol2 {
                    rat = if xm >= xf { tol1 } else { -tol1 };
                }
            } else {
                use_golden = true;
            }
        }
        if use_golden {
            e = if xf >= xm { a - xf } else { b - xf };
            rat = golden * e;
        }
        let step = if rat >= 0.0 { rat.abs().max(tol1) } else { -rat.abs().max(tol1) };
        let x = xf + step;
        let fu = f(x);
        iterations += 1;

        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            fulc = nfc;
            ffulc = fnfc;
            nfc = xf;
            fnfc = fx;
            xf = x;
            fx = fu;
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                fulc = nfc;
                ffulc = fnfc;
                nfc = x;
                fnfc = fu;
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                fulc = x;
                ffulc = fu;
            }
        }
        xm = 0.5 * (a + b);
        tol1 = rel_tol * xf.abs() + ABS_TOL / 3.0;
        tol2 = 2.0 * tol1;
    }
    Minimum { x: xf, fx, iterations, converged: true }
}
