//! Globally adaptive Gauss-Kronrod (7/15) quadrature for small vector
//! integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

pub const DEFAULT_MAX_INTERVALS: usize = 2000;

/// Kronrod estimate and `|Kronrod - Gauss|` per component on `[a, b]`.
pub fn gk15<const N: usize>(f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> ([f64; N], [f64; N]) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for n in 0..N {
        k[n] = WGK[7] * fc[n];
        g[n] = WG[3] * fc[n];
    }
    for j in 0..7 {
        let dx = hl * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for n in 0..N {
            let s = f1[n] + f2[n];
            k[n] += WGK[j] * s;
            if j % 2 == 1 {
                g[n] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; N];
    for n in 0..N {
        k[n] *= hl;
        err[n] = (k[n] - g[n] * hl).abs();
    }
    (k, err)
}

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    val: [f64; N],
    err: [f64; N],
    worst: f64,
}

impl<const N: usize> PartialEq for Piece<N> {
    fn eq(&self, other: &Self) -> bool {
        self.worst == other.worst
    }
}
impl<const N: usize> Eq for Piece<N> {}
impl<const N: usize> PartialOrd for Piece<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Piece<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.worst.total_cmp(&other.worst)
    }
}

fn worst<const N: usize>(err: &[f64; N]) -> f64 {
    err.iter().fold(0.0f64, |m, &e| if e.is_nan() { f64::INFINITY } else { m.max(e) })
}

/// Integrate `f` over the union of consecutive intervals given by
/// `breakpoints` until every component's summed error estimate is below
/// `tol` (absolute). The interval with the largest estimate is bisected
/// first.
pub fn integrate<const N: usize>(
    mut f: impl FnMut(f64) -> [f64; N],
    breakpoints: &[f64],
    tol: f64,
    max_intervals: usize,
) -> Result<[f64; N]> {
    assert!(breakpoints.len() >= 2);
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        let (val, err) = gk15(&mut f, w[0], w[1]);
        heap.push(Piece { a: w[0], b: w[1], worst: worst(&err), val, err });
    }
    loop {
        let mut total = [0.0; N];
        let mut total_err = [0.0; N];
        for p in heap.iter() {
            for n in 0..N {
                total[n] += p.val[n];
                total_err[n] += p.err[n];
            }
        }
        let est = worst(&total_err);
        if est <= tol {
            return Ok(total);
        }
        if heap.len() >= max_intervals {
            return Err(Error::QuadratureFailed { estimate: est, tol });
        }
        let p = heap.pop().expect("nonempty");
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::QuadratureFailed { estimate: est, tol });
        }
        for (a, b) in [(p.a, mid), (mid, p.b)] {
            let (val, err) = gk15(&mut f, a, b);
            heap.push(Piece { a, b, worst: worst(&err), val, err });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_have_their_polynomial_degree() {
        // Kronrod: exact to degree 22; Gauss: degree 13.
        for deg in 0..=22 {
            let mut f = |x: f64| [x.powi(deg)];
            let (k, e) = gk15(&mut f, -1.0, 1.0);
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((k[0] - exact).abs() < 1e-15, "deg {deg}: {}", k[0]);
            if deg <= 13 {
                assert!(e[0] < 1e-15, "deg {deg}: gauss error {}", e[0]);
            }
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // int_{-1}^{1} eps / (x^2 + eps^2) = 2 atan(1 / eps)
        let eps = 1e-4;
        let v = integrate(|x| [eps / (x * x + eps * eps)], &[-1.0, 1.0], 1e-12, 2000).unwrap();
        assert!((v[0] - 2.0 * (1.0 / eps).atan()).abs() < 1e-11);
    }

    #[test]
    fn failure_reports_estimate() {
        let r = integrate(|x: f64| [1.0 / x.abs().sqrt().max(1e-300)], &[-1.0, 1.0], 1e-15, 8);
        assert!(matches!(r, Err(Error::QuadratureFailed { .. })));
    }
}
