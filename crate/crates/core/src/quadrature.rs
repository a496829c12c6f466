/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`, with a recursion depth cap.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrates to a tolerance relative to a coarse first estimate of the
/// integral. Splits the interval at `breaks` (e.g. a resonance) first.
pub fn integrate_relative<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> f64 {
    let mut points = vec![a];
    points.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    points.push(b);
    points.sort_by(|x, y| x.total_cmp(y));
    let coarse: f64 = points
        .windows(2)
        .map(|w| {
            let n = 64;
            let h = (w[1] - w[0]) / n as f64;
            (0..n)
                .map(|i| {
                    let x = w[0] + (i as f64 + 0.5) * h;
                    f(x).abs() * h
                })
                .sum::<f64>()
        })
        .sum();
    if coarse == 0.0 {
        return 0.0;
    }
    let tol = rel_tol * coarse / (points.len() - 1) as f64;
    points
        .windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
    }

    #[test]
    fn lorentzian_area() {
        // Integral of 1/(1+x^2) over [-1000, 1000] = 2 atan(1000).
        let v = integrate_relative(&|x: f64| 1.0 / (1.0 + x * x), -1000.0, 1000.0, &[0.0], 1e-10);
        assert!((v - 2.0 * 1000f64.atan()).abs() < 1e-8);
    }
}
