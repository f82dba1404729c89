//! Second-order forward-mode dual numbers in two variables `(r, z)`.

use std::ops::{Add, Mul, Neg, Sub};

/// Value, gradient `[d_r, d_z]` and Hessian `[d_rr, d_rz, d_zz]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct D2 {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [f64; 3],
}

impl D2 {
    pub fn constant(v: f64) -> Self {
        Self { v, g: [0.0; 2], h: [0.0; 3] }
    }

    pub fn var_r(v: f64) -> Self {
        Self { v, g: [1.0, 0.0], h: [0.0; 3] }
    }

    pub fn var_z(v: f64) -> Self {
        Self { v, g: [0.0, 1.0], h: [0.0; 3] }
    }

    /// `f(self)` given `f`, `f'`, `f''` at `self.v`.
    #[inline]
    pub fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let [a, b] = self.g;
        Self {
            v: f0,
            g: [f1 * a, f1 * b],
            h: [
                f2 * a * a + f1 * self.h[0],
                f2 * a * b + f1 * self.h[1],
                f2 * b * b + f1 * self.h[2],
            ],
        }
    }

    pub fn recip(self) -> Self {
        let i = 1.0 / self.v;
        self.chain(i, -i * i, 2.0 * i * i * i)
    }

    pub fn powf(self, p: f64) -> Self {
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            v: c * self.v,
            g: [c * self.g[0], c * self.g[1]],
            h: [c * self.h[0], c * self.h[1], c * self.h[2]],
        }
    }
}

impl Add for D2 {
    type Output = D2;
    fn add(self, o: D2) -> D2 {
        D2 {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }
}

impl Sub for D2 {
    type Output = D2;
    fn sub(self, o: D2) -> D2 {
        self + (-o)
    }
}

impl Neg for D2 {
    type Output = D2;
    fn neg(self) -> D2 {
        self.scale(-1.0)
    }
}

impl Mul for D2 {
    type Output = D2;
    fn mul(self, o: D2) -> D2 {
        let (a, b) = (self, o);
        D2 {
            v: a.v * b.v,
            g: [a.g[0] * b.v + a.v * b.g[0], a.g[1] * b.v + a.v * b.g[1]],
            h: [
                a.h[0] * b.v + 2.0 * a.g[0] * b.g[0] + a.v * b.h[0],
                a.h[1] * b.v + a.g[0] * b.g[1] + a.g[1] * b.g[0] + a.v * b.h[1],
                a.h[2] * b.v + 2.0 * a.g[1] * b.g[1] + a.v * b.h[2],
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_closed_form_derivatives() {
        // f = r^2 z / (1 + r z)^{3/2} at (0.7, -0.4)
        let f = |r: D2, z: D2| r * r * z * (D2::constant(1.0) + r * z).powf(-1.5);
        let (r0, z0) = (0.7, -0.4);
        let d = f(D2::var_r(r0), D2::var_z(z0));
        let s = |r: f64, z: f64| r * r * z * (1.0 + r * z).powf(-1.5);
        let e = 1e-4;
        let fr = (s(r0 + e, z0) - s(r0 - e, z0)) / (2.0 * e);
        let fz = (s(r0, z0 + e) - s(r0, z0 - e)) / (2.0 * e);
        let frr = (s(r0 + e, z0) - 2.0 * s(r0, z0) + s(r0 - e, z0)) / (e * e);
        let fzz = (s(r0, z0 + e) - 2.0 * s(r0, z0) + s(r0, z0 - e)) / (e * e);
        let frz = (s(r0 + e, z0 + e) - s(r0 + e, z0 - e) - s(r0 - e, z0 + e) + s(r0 - e, z0 - e)) / (4.0 * e * e);
        assert!((d.v - s(r0, z0)).abs() < 1e-15);
        assert!((d.g[0] - fr).abs() < 1e-7 && (d.g[1] - fz).abs() < 1e-7);
        assert!((d.h[0] - frr).abs() < 1e-5 && (d.h[1] - frz).abs() < 1e-5 && (d.h[2] - fzz).abs() < 1e-5);
        let q = (D2::var_r(r0) - D2::var_z(z0)).recip();
        assert!((q.h[1] - (-2.0 / (r0 - z0).powi(3))).abs() < 1e-12);
    }
}
