//! Complete elliptic integrals by the arithmetic-geometric mean, and the reduced
//! ring function built from them.
//!
//! The parameter convention is `m = k^2`. Every routine also takes the
//! complementary parameter `m1 = 1 - m`, which callers compute directly from
//! geometry so that it keeps full relative precision as `m -> 1`.

use std::f64::consts::FRAC_PI_2;

const AGM_MAX_ITER: usize = 40;

/// Below this parameter the ring function and its derivatives come from the
/// power series; above it from `K`, `E` and their derivative identities.
pub const SERIES_SWITCH: f64 = 0.3;

pub(crate) const SERIES_TERMS: usize = 40;

/// Output of a complete AGM sweep.
#[derive(Clone, Copy, Debug)]
pub struct AgmSweep {
    /// `K(m)`
    pub k: f64,
    /// `E(m)`
    pub e: f64,
    /// `(2 - m) K(m) - 2 E(m)`, accumulated without cancellation.
    pub p: f64,
}

/// AGM evaluation of `K(m)`, `E(m)` and `P(m) = (2 - m)K - 2E`.
///
/// Uses `c_{n+1} = c_n^2 / (4 a_{n+1})`, so no difference of nearly equal
/// numbers is ever formed; `P = K * sum_{n>=1} 2^n c_n^2`.
pub fn agm_sweep(m: f64, m1: f64) -> AgmSweep {
    debug_assert!((0.0..=1.0).contains(&m) && m1 > 0.0);
    let mut a = 1.0;
    let mut b = m1.sqrt();
    // c_n^2 with c_0^2 = m
    let mut csq = m;
    let mut pow2 = 1.0;
    let mut tail = 0.0;
    for _ in 0..AGM_MAX_ITER {
        let a_next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = a_next;
        csq = csq * csq / (16.0 * a * a);
        pow2 *= 2.0;
        let term = pow2 * csq;
        tail += term;
        if term <= 1e-17 * tail || csq == 0.0 {
            break;
        }
    }
    let k = FRAC_PI_2 / a;
    let p = k * tail;
    // 2E = K (2 - m - tail)
    let e = 0.5 * k * (2.0 - m - tail);
    AgmSweep { k, e, p }
}

/// Complete elliptic integral of the first kind, `K(m)`.
pub fn ellip_k(m: f64) -> f64 {
    agm_sweep(m, 1.0 - m).k
}

/// Complete elliptic integral of the second kind, `E(m)`.
pub fn ellip_e(m: f64) -> f64 {
    if m == 1.0 {
        return 1.0;
    }
    agm_sweep(m, 1.0 - m).e
}

pub(crate) struct SeriesCoeffs {
    pub(crate) d: [f64; SERIES_TERMS],
}

const fn series_coeffs() -> SeriesCoeffs {
    // c_n = ((2n)! / (4^n n!^2))^2, d_n = 4n c_n / (2n - 1) - c_{n-1};
    // ghat(m) = (pi/2) sum_{k>=0} d_{k+2} m^k.
    let mut d = [0.0; SERIES_TERMS];
    let mut c_prev = 0.25; // c_1
    let mut n = 2;
    while n < SERIES_TERMS + 2 {
        let ratio = (2.0 * n as f64 - 1.0) / (2.0 * n as f64);
        let c_n = c_prev * ratio * ratio;
        d[n - 2] = FRAC_PI_2 * (4.0 * n as f64 * c_n / (2.0 * n as f64 - 1.0) - c_prev);
        c_prev = c_n;
        n += 1;
    }
    SeriesCoeffs { d }
}

pub(crate) static SERIES: SeriesCoeffs = series_coeffs();

/// Reduced ring function `ghat(m) = ((2 - m)K(m) - 2E(m)) / m^2` with its
/// first and second derivatives.
///
/// The angular kernel is `F = 16 r_x r_y ghat(m) / s^3`; `ghat(0) = pi/16`
/// and `ghat` is analytic on `[0, 1)` with a logarithmic singularity at 1.
#[inline]
pub fn ghat_d2(m: f64, m1: f64) -> [f64; 3] {
    if m < SERIES_SWITCH {
        return series_d2(m);
    }
    let sw = agm_sweep(m, m1);
    let (k, e, p) = (sw.k, sw.e, sw.p);
    let dk = (e - m1 * k) / (2.0 * m * m1);
    let de = (e - k) / (2.0 * m);
    let dde = (de - dk) / (2.0 * m) - (e - k) / (2.0 * m * m);
    let n_prime = de + k - m1 * dk;
    let ddk = (n_prime - dk * 2.0 * (m1 - m)) / (2.0 * m * m1);
    let dp = -k + (2.0 - m) * dk - 2.0 * de;
    let ddp = -2.0 * dk + (2.0 - m) * ddk - 2.0 * dde;
    let m2 = m * m;
    let m3 = m2 * m;
    [
        p / m2,
        dp / m2 - 2.0 * p / m3,
        ddp / m2 - 4.0 * dp / m3 + 6.0 * p / (m3 * m),
    ]
}

/// As [`ghat_d2`] but only value and first derivative.
#[inline]
pub fn ghat_d1(m: f64, m1: f64) -> [f64; 2] {
    if m < SERIES_SWITCH {
        return series_d1(m);
    }
    let sw = agm_sweep(m, m1);
    let (k, e, p) = (sw.k, sw.e, sw.p);
    let dk = (e - m1 * k) / (2.0 * m * m1);
    let de = (e - k) / (2.0 * m);
    let dp = -k + (2.0 - m) * dk - 2.0 * de;
    let m2 = m * m;
    [p / m2, dp / m2 - 2.0 * p / (m2 * m)]
}

#[inline]
fn series_d1(m: f64) -> [f64; 2] {
    let d = &SERIES.d;
    let mut g = d[SERIES_TERMS - 1];
    let mut dg = 0.0;
    for k in (0..SERIES_TERMS - 1).rev() {
        dg = dg * m + g;
        g = g * m + d[k];
    }
    [g, dg]
}

#[inline]
fn series_d2(m: f64) -> [f64; 3] {
    let d = &SERIES.d;
    let mut g = d[SERIES_TERMS - 1];
    let mut dg = 0.0;
    let mut ddg = 0.0;
    for k in (0..SERIES_TERMS - 1).rev() {
        ddg = ddg * m + 2.0 * dg;
        dg = dg * m + g;
        g = g * m + d[k];
    }
    [g, dg, ddg]
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from mpmath (ellipk / ellipe at 30 digits).
    #[allow(clippy::excessive_precision)]
    const K_REF: [(f64, f64); 4] = [
        (0.1, 1.6124413487202194),
        (0.5, 1.8540746773013719),
        (0.9, 2.5780921133481733),
        (0.999, 4.8411325605502966),
    ];
    const E_REF: [(f64, f64); 4] = [
        (0.1, 1.5307576368977632),
        (0.5, 1.3506438810476755),
        (0.9, 1.1047747327040733),
        (0.999, 1.0021707908344452),
    ];

    #[test]
    fn agm_matches_reference_values() {
        for (m, k) in K_REF {
            assert!((ellip_k(m) - k).abs() < 1e-14 * k, "K({m})");
        }
        for (m, e) in E_REF {
            assert!((ellip_e(m) - e).abs() < 1e-14 * e, "E({m})");
        }
    }

    #[test]
    fn limits() {
        assert!((ellip_k(0.0) - FRAC_PI_2).abs() < 1e-16);
        assert!((ellip_e(0.0) - FRAC_PI_2).abs() < 1e-16);
        assert_eq!(ellip_e(1.0), 1.0);
        assert!((series_d1(0.0)[0] - std::f64::consts::PI / 16.0).abs() < 1e-17);
    }

    #[test]
    fn series_and_elliptic_branches_agree_at_switch() {
        for &m in &[0.2, 0.25, SERIES_SWITCH, 0.35, 0.45] {
            let s = series_d2(m);
            let sw = agm_sweep(m, 1.0 - m);
            assert!((sw.p / (m * m) - s[0]).abs() < 1e-14 * s[0]);
            // second derivative series converges more slowly near the upper end
            let e = ghat_elliptic_d2(m);
            for i in 0..3 {
                assert!((e[i] - s[i]).abs() < 1e-11 * s[i].abs().max(1.0), "m={m} i={i}: {} vs {}", e[i], s[i]);
            }
        }
    }

    fn ghat_elliptic_d2(m: f64) -> [f64; 3] {
        // force the elliptic branch
        let sw = agm_sweep(m, 1.0 - m);
        let m1 = 1.0 - m;
        let (k, e, p) = (sw.k, sw.e, sw.p);
        let dk = (e - m1 * k) / (2.0 * m * m1);
        let de = (e - k) / (2.0 * m);
        let dde = (de - dk) / (2.0 * m) - (e - k) / (2.0 * m * m);
        let ddk = (de + k - m1 * dk - dk * 2.0 * (m1 - m)) / (2.0 * m * m1);
        let dp = -k + (2.0 - m) * dk - 2.0 * de;
        let ddp = -2.0 * dk + (2.0 - m) * ddk - 2.0 * dde;
        [p / (m * m), dp / (m * m) - 2.0 * p / m.powi(3), ddp / (m * m) - 4.0 * dp / m.powi(3) + 6.0 * p / m.powi(4)]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &m in &[0.05, 0.29, 0.31, 0.6, 0.95] {
            let h = 1e-5;
            let gp = ghat_d2(m + h, 1.0 - m - h);
            let gm = ghat_d2(m - h, 1.0 - m + h);
            let g = ghat_d2(m, 1.0 - m);
            let fd1 = (gp[0] - gm[0]) / (2.0 * h);
            let fd2 = (gp[1] - gm[1]) / (2.0 * h);
            assert!((fd1 - g[1]).abs() < 1e-7 * g[1].abs().max(1.0), "m={m}");
            assert!((fd2 - g[2]).abs() < 1e-6 * g[2].abs().max(1.0), "m={m}");
        }
    }
}
