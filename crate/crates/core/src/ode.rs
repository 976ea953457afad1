//! Fixed-step RK4 and cubic Hermite helpers shared by the profile solvers.

pub(crate) fn rk4<const N: usize>(
    y: [f64; N],
    h: f64,
    rhs: impl Fn(&[f64; N]) -> [f64; N],
) -> [f64; N] {
    let shift = |base: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *base;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += s * ki;
        }
        out
    };
    let k1 = rhs(&y);
    let k2 = rhs(&shift(&y, &k1, 0.5 * h));
    let k3 = rhs(&shift(&y, &k2, 0.5 * h));
    let k4 = rhs(&shift(&y, &k3, h));
    let mut out = y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Cubic Hermite interpolant on a cell of width `h`, evaluated at fraction `s` in [0, 1].
pub(crate) fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative (with respect to the physical variable) of [`hermite`].
pub(crate) fn hermite_deriv(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let g00 = 6.0 * s2 - 6.0 * s;
    let g10 = 3.0 * s2 - 4.0 * s + 1.0;
    let g01 = -6.0 * s2 + 6.0 * s;
    let g11 = 3.0 * s2 - 2.0 * s;
    (g00 * y0 + g01 * y1) / h + g10 * d0 + g11 * d1
}

/// Fraction in [0, 1] where the Hermite cell crosses `level`, assuming the
/// endpoint values bracket it.
pub(crate) fn hermite_crossing(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let below_at_lo = y0 < level;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (hermite(y0, d0, y1, d1, h, mid) < level) == below_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
