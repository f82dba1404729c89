//! Axisymmetric Green-function machinery.
//!
//! The angular kernel
//!
//! ```text
//! F(x, y) = int_{-pi}^{pi} cos(t) / sqrt(r_x^2 + r_y^2 - 2 r_x r_y cos(t) + (z_x - z_y)^2 + delta^2) dt
//! ```
//!
//! is the azimuthal reduction of `1/|X - Y|` against `cos(t)`. With the
//! `1/(4 pi)` normalisation of the Green function of `-Laplace`, the stream
//! function of a field `q = omega_theta / r` is
//! `psi(x) = (1/4pi) int int F(x, y) q(y) r_y^2 dr_y dz_y`, so a particle of
//! volume `vol = 2 pi r h^2` contributes with weight `q r vol / (8 pi^2)`.
//! Velocity is `u_r = -d_z psi`, `u_z = d_r psi + psi / r`.
//!
//! `F` is evaluated either in closed form through complete elliptic integrals
//! or by adaptive Gauss-Kronrod quadrature of the angular integral; the two
//! paths are independent and cross-checked in the test suite.

pub mod dual;
pub mod elliptic;
pub mod quadrature;
pub mod ring;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Lattice, MeridianPoint, ParticleField, RelativeVorticityField, VelocityGrid, VelocitySample};
use dual::D2;
pub use ring::{RingSums, SourceSet};

/// Evaluation policy for the angular kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    /// Absolute tolerance of the adaptive quadrature path.
    pub quad_tol: f64,
    /// Use the elliptic-integral closed form instead of quadrature.
    pub use_elliptic: bool,
    /// Blob radius `delta`, added as `delta^2` under the square root.
    pub blob_delta: f64,
    /// When the closest approach of the two rings is below this fraction of
    /// `sqrt(r_x r_y)`, quadrature starts from a geometric split of the
    /// angle range around the peak at `t = 0`.
    pub near_field_switch: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { quad_tol: 1e-10, use_elliptic: true, blob_delta: 0.0, near_field_switch: 0.5 }
    }
}

impl KernelConfig {
    pub fn with_delta(delta: f64) -> Self {
        Self { blob_delta: delta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quad_tol > 0.0) {
            return Err(Error::invalid(format!("quad_tol must be positive, got {}", self.quad_tol)));
        }
        if !(self.blob_delta >= 0.0 && self.blob_delta.is_finite()) {
            return Err(Error::invalid(format!("blob_delta must be >= 0, got {}", self.blob_delta)));
        }
        if !(self.near_field_switch > 0.0) {
            return Err(Error::invalid("near_field_switch must be positive"));
        }
        Ok(())
    }

    fn d2(&self) -> f64 {
        self.blob_delta * self.blob_delta
    }
}

/// `F` and its derivatives with respect to the target coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "dF_dr")]
    pub df_dr: f64,
    #[serde(rename = "dF_dz")]
    pub df_dz: f64,
}

/// Second derivatives of `F` with respect to the target coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KernelHessian {
    pub value: KernelValue,
    pub f_rr: f64,
    pub f_rz: f64,
    pub f_zz: f64,
}

fn singular_pair(x: &MeridianPoint, y: &MeridianPoint, d2: f64) -> bool {
    d2 == 0.0 && x.r == y.r && x.z == y.z
}

/// `[H, H_r, H_z]` with `H = F / r_x` from the elliptic closed form.
fn elliptic_h(x: &MeridianPoint, y: &MeridianPoint, d2: f64) -> [f64; 3] {
    let (rx, ry) = (x.r, y.r);
    if ry == 0.0 {
        return [0.0; 3];
    }
    let dz = x.z - y.z;
    let a2 = dz * dz + d2;
    let sp = (rx + ry) * (rx + ry) + a2;
    let inv = 1.0 / sp;
    let m = 4.0 * rx * ry * inv;
    let m1 = ((rx - ry) * (rx - ry) + a2) * inv;
    let [g, dg] = elliptic::ghat_d1(m, m1);
    let c = 16.0 * ry * inv * inv.sqrt();
    let mr = 4.0 * ry * (ry * ry - rx * rx + a2) * inv * inv;
    let mz = -2.0 * m * dz * inv;
    [c * g, c * (dg * mr - 3.0 * g * (rx + ry) * inv), c * (dg * mz - 3.0 * g * dz * inv)]
}

/// `H = F / r_x` as a second-order dual number in `(r_x, z_x)`.
fn elliptic_h_d2(x: &MeridianPoint, y: &MeridianPoint, d2: f64) -> D2 {
    let ry = y.r;
    if ry == 0.0 {
        return D2::constant(0.0);
    }
    let r = D2::var_r(x.r);
    let dz = D2::var_z(x.z) - D2::constant(y.z);
    let rp = r + D2::constant(ry);
    let sp = rp * rp + dz * dz + D2::constant(d2);
    let m = (r * sp.recip()).scale(4.0 * ry);
    let dzv = x.z - y.z;
    let m1 = ((x.r - ry) * (x.r - ry) + dzv * dzv + d2) / sp.v;
    let [g0, g1, g2] = elliptic::ghat_d2(m.v, m1);
    (m.chain(g0, g1, g2) * sp.powf(-1.5)).scale(16.0 * ry)
}

/// `[F, F_r, F_z, F / r_x]` by adaptive quadrature of the angular integral.
fn quadrature_terms(x: &MeridianPoint, y: &MeridianPoint, cfg: &KernelConfig) -> Result<[f64; 4]> {
    let (rx, ry) = (x.r, y.r);
    if ry == 0.0 {
        return Ok([0.0; 4]);
    }
    let dz = x.z - y.z;
    let a2 = dz * dz + cfg.d2();
    let d0 = (ry * ry + a2).sqrt();
    let integrand = |t: f64| -> [f64; 4] {
        let c = t.cos();
        let s = (0.5 * t).sin();
        let d = ((rx - ry) * (rx - ry) + 4.0 * rx * ry * s * s + a2).sqrt();
        let d3 = d * d * d;
        [
            c / d,
            -c * (rx - ry * c) / d3,
            -c * dz / d3,
            c * (2.0 * ry * c - rx) / (d * d0 * (d + d0)),
        ]
    };
    let mut breaks = vec![0.0];
    let closest = ((rx - ry) * (rx - ry) + a2).sqrt();
    let scale = (rx * ry).sqrt();
    if scale > 0.0 && closest < cfg.near_field_switch * scale {
        let mut t = closest / scale;
        while t < PI {
            breaks.push(t);
            t *= 2.0;
        }
    }
    breaks.push(PI);
    // the integrand is even in t
    let half = quadrature::integrate(integrand, &breaks, 0.5 * cfg.quad_tol, quadrature::DEFAULT_MAX_INTERVALS)?;
    Ok(half.map(|v| 2.0 * v))
}

/// `F(x, y)` and its target derivatives under `cfg`.
pub fn angular_kernel(x: &MeridianPoint, y: &MeridianPoint, cfg: &KernelConfig) -> Result<KernelValue> {
    cfg.validate()?;
    if cfg.use_elliptic {
        angular_kernel_elliptic(x, y, cfg.blob_delta)
    } else {
        angular_kernel_quadrature(x, y, cfg)
    }
}

/// Closed-form path: `F = 16 r_x r_y ghat(m) / s^3` with
/// `s^2 = (r_x + r_y)^2 + dz^2 + delta^2`, `m = 4 r_x r_y / s^2` and
/// `ghat(m) = ((2 - m) K(m) - 2 E(m)) / m^2`.
pub fn angular_kernel_elliptic(x: &MeridianPoint, y: &MeridianPoint, delta: f64) -> Result<KernelValue> {
    let d2 = delta * delta;
    if singular_pair(x, y, d2) {
        return Err(Error::SingularEvaluation);
    }
    let [h, hr, hz] = elliptic_h(x, y, d2);
    Ok(KernelValue { f: x.r * h, df_dr: h + x.r * hr, df_dz: x.r * hz })
}

/// Adaptive Gauss-Kronrod path; each component is accurate to `quad_tol`.
pub fn angular_kernel_quadrature(x: &MeridianPoint, y: &MeridianPoint, cfg: &KernelConfig) -> Result<KernelValue> {
    cfg.validate()?;
    if singular_pair(x, y, cfg.d2()) {
        return Err(Error::SingularEvaluation);
    }
    let [f, df_dr, df_dz, _] = quadrature_terms(x, y, cfg)?;
    Ok(KernelValue { f, df_dr, df_dz })
}

/// `F(x, y) / r_x`, finite on the axis.
pub fn kernel_over_r(x: &MeridianPoint, y: &MeridianPoint, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    if singular_pair(x, y, cfg.d2()) {
        return Err(Error::SingularEvaluation);
    }
    if cfg.use_elliptic {
        Ok(elliptic_h(x, y, cfg.d2())[0])
    } else {
        Ok(quadrature_terms(x, y, cfg)?[3])
    }
}

/// Second target derivatives of `F` (elliptic path).
pub fn kernel_hessian(x: &MeridianPoint, y: &MeridianPoint, delta: f64) -> Result<KernelHessian> {
    let d2 = delta * delta;
    if singular_pair(x, y, d2) {
        return Err(Error::SingularEvaluation);
    }
    let h = elliptic_h_d2(x, y, d2);
    let rx = x.r;
    Ok(KernelHessian {
        value: KernelValue { f: rx * h.v, df_dr: h.v + rx * h.g[0], df_dz: rx * h.g[1] },
        f_rr: 2.0 * h.g[0] + rx * h.h[0],
        f_rz: h.g[1] + rx * h.h[1],
        f_zz: rx * h.h[2],
    })
}

fn particles_of(field: &RelativeVorticityField) -> Result<std::borrow::Cow<'_, ParticleField>> {
    if field.is_empty() {
        return Err(Error::EmptyField);
    }
    Ok(match field {
        RelativeVorticityField::Particles(p) => std::borrow::Cow::Borrowed(p),
        RelativeVorticityField::Grid(_) => std::borrow::Cow::Owned(field.to_particles()),
    })
}

/// Quadrature-path sums `[sum W F, sum W F_r, sum W F_z, sum W F/r_x]`.
fn quadrature_sums(p: &ParticleField, x: &MeridianPoint, cfg: &KernelConfig) -> Result<[f64; 4]> {
    let c = 1.0 / (8.0 * PI * PI);
    let mut acc = [0.0; 4];
    for part in &p.particles {
        let w = part.q * part.pos.r * part.vol * c;
        if w == 0.0 {
            continue;
        }
        if singular_pair(x, &part.pos, cfg.d2()) {
            return Err(Error::SingularEvaluation);
        }
        let t = quadrature_terms(x, &part.pos, cfg)?;
        for k in 0..4 {
            acc[k] += w * t[k];
        }
    }
    Ok(acc)
}

/// Stream function `psi` at `x`. Zero on the axis.
pub fn stream_eval(field: &RelativeVorticityField, x: &MeridianPoint, cfg: &KernelConfig) -> Result<f64> {
    Ok(stream_at(field, std::slice::from_ref(x), cfg)?[0])
}

/// [`stream_eval`] at many targets.
pub fn stream_at(field: &RelativeVorticityField, xs: &[MeridianPoint], cfg: &KernelConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = particles_of(field)?;
    if cfg.use_elliptic {
        let src = SourceSet::from_particles(&p);
        let targets: Vec<(f64, f64)> = xs.iter().map(|x| (x.r, x.z)).collect();
        Ok(ring::ring_sums_at(&src, &targets, cfg.d2())?.iter().zip(xs).map(|(s, x)| s.psi(x.r)).collect())
    } else {
        xs.par_iter().map(|x| Ok(quadrature_sums(&p, x, cfg)?[0])).collect()
    }
}

/// Meridian velocity `(u_r, u_z)` at `x`. `u_r` is exactly zero on the axis.
pub fn velocity_eval(field: &RelativeVorticityField, x: &MeridianPoint, cfg: &KernelConfig) -> Result<VelocitySample> {
    velocity_at(field, std::slice::from_ref(x), cfg).map(|v| v[0]).map_err(unwrap_index)
}

fn unwrap_index(e: Error) -> Error {
    match e {
        Error::VelocityFailed { source, .. } => *source,
        other => other,
    }
}

/// [`velocity_eval`] at many targets. A failure is reported as
/// [`Error::VelocityFailed`] carrying the first failing target index.
pub fn velocity_at(field: &RelativeVorticityField, xs: &[MeridianPoint], cfg: &KernelConfig) -> Result<Vec<VelocitySample>> {
    cfg.validate()?;
    let p = particles_of(field)?;
    let fail = |index: usize, e: Error| Error::VelocityFailed { index, source: Box::new(e) };
    if cfg.use_elliptic {
        let src = SourceSet::from_particles(&p);
        let d2 = cfg.d2();
        xs.par_iter()
            .enumerate()
            .map(|(k, x)| ring::ring_sums(&src, x.r, x.z, d2).map(|s| s.velocity(x.r)).map_err(|e| fail(k, e)))
            .collect()
    } else {
        xs.par_iter()
            .enumerate()
            .map(|(k, x)| {
                let [_, fr, fz, h] = quadrature_sums(&p, x, cfg).map_err(|e| fail(k, e))?;
                Ok(VelocitySample { u_r: if x.r == 0.0 { 0.0 } else { -fz }, u_z: fr + h })
            })
            .collect()
    }
}

/// Velocity of a particle field at its own particles, self-term included.
///
/// On the elliptic path each unordered pair is evaluated once; the summation
/// order depends only on the particle list.
pub fn self_velocity(field: &ParticleField, cfg: &KernelConfig) -> Result<Vec<VelocitySample>> {
    cfg.validate()?;
    if field.is_empty() {
        return Err(Error::EmptyField);
    }
    if !cfg.use_elliptic || cfg.blob_delta == 0.0 {
        let xs: Vec<MeridianPoint> = field.particles.iter().map(|p| p.pos).collect();
        return velocity_at(&RelativeVorticityField::Particles(field.clone()), &xs, cfg);
    }
    let src = SourceSet::from_particles(field);
    let live = ring::self_velocity(&src, cfg.d2())?;
    let mut out = vec![None; field.len()];
    for (k, &o) in src.origin.iter().enumerate() {
        out[o] = Some(live[k]);
    }
    // particles carrying no weight are passive tracers
    let d2 = cfg.d2();
    let mut result = Vec::with_capacity(field.len());
    for (k, slot) in out.into_iter().enumerate() {
        let v = match slot {
            Some(v) => v,
            None => {
                let x = field.particles[k].pos;
                ring::ring_sums(&src, x.r, x.z, d2)
                    .map_err(|e| Error::VelocityFailed { index: k, source: Box::new(e) })?
                    .velocity(x.r)
            }
        };
        result.push(v);
    }
    Ok(result)
}

/// Sample the velocity on every node of `lattice`.
pub fn sample_velocity(field: &RelativeVorticityField, lattice: &Lattice, cfg: &KernelConfig) -> Result<VelocityGrid> {
    let v = velocity_at(field, &lattice.points(), cfg)?;
    VelocityGrid::from_samples(*lattice, &v)
}

/// Meridian velocity gradient, plus `u_r / r` and its derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VelocityGradient {
    pub u: VelocitySample,
    pub du_r_dr: f64,
    pub du_r_dz: f64,
    pub du_z_dr: f64,
    pub du_z_dz: f64,
    /// `u_r / r`, with the axis value `d_r u_r(0, z)`.
    pub ur_over_r: f64,
    pub d_ur_over_r_dr: f64,
    pub d_ur_over_r_dz: f64,
}

impl VelocityGradient {
    /// `[[d_r u_r, d_z u_r], [d_r u_z, d_z u_z]]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.du_r_dr, self.du_r_dz], [self.du_z_dr, self.du_z_dz]]
    }

    /// `d_r u_r + u_r / r + d_z u_z`, the 3D divergence.
    pub fn trace_residual(&self) -> f64 {
        self.du_r_dr + self.ur_over_r + self.du_z_dz
    }

    /// Frobenius norm of the full 3D gradient in the cylindrical frame,
    /// whose only non-meridian entry is the hoop strain `u_r / r`.
    pub fn frobenius(&self) -> f64 {
        (self.du_r_dr.powi(2) + self.du_r_dz.powi(2) + self.du_z_dr.powi(2) + self.du_z_dz.powi(2) + self.ur_over_r.powi(2)).sqrt()
    }
}

/// Velocity gradient at `x` from second derivatives of the regularised
/// kernel (always on the elliptic path).
pub fn velocity_gradient_eval(field: &RelativeVorticityField, x: &MeridianPoint, cfg: &KernelConfig) -> Result<VelocityGradient> {
    Ok(velocity_gradient_at(field, std::slice::from_ref(x), cfg)?[0])
}

/// [`velocity_gradient_eval`] at many targets.
pub fn velocity_gradient_at(field: &RelativeVorticityField, xs: &[MeridianPoint], cfg: &KernelConfig) -> Result<Vec<VelocityGradient>> {
    cfg.validate()?;
    let p = particles_of(field)?;
    let d2 = cfg.d2();
    let c = 1.0 / (8.0 * PI * PI);
    let src: Vec<(MeridianPoint, f64)> = p
        .particles
        .iter()
        .map(|s| (s.pos, s.q * s.pos.r * s.vol * c))
        .filter(|&(pos, w)| w != 0.0 && pos.r > 0.0)
        .collect();
    xs.par_iter()
        .map(|x| {
            let mut acc = D2::constant(0.0);
            for (pos, w) in &src {
                if singular_pair(x, pos, d2) {
                    return Err(Error::SingularEvaluation);
                }
                acc = acc + elliptic_h_d2(x, pos, d2).scale(*w);
            }
            let rx = x.r;
            let (h, [hr, hz], [hrr, hrz, hzz]) = (acc.v, acc.g, acc.h);
            Ok(VelocityGradient {
                u: VelocitySample { u_r: -rx * hz, u_z: 2.0 * h + rx * hr },
                du_r_dr: -(hz + rx * hrz),
                du_r_dz: -rx * hzz,
                du_z_dr: 3.0 * hr + rx * hrr,
                du_z_dz: 2.0 * hz + rx * hrz,
                ur_over_r: -hz,
                d_ur_over_r_dr: -hrz,
                d_ur_over_r_dz: -hzz,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::VortexParticle;

    fn pt(r: f64, z: f64) -> MeridianPoint {
        MeridianPoint::new(r, z).unwrap()
    }

    // mpmath.quad of cos(t)/sqrt(5 - 4 cos(t)) over [-pi, pi] at 30 digits:
    // 0.873152581892675549645633563233
    const F_1_2: f64 = 0.873_152_581_892_675_5;

    #[test]
    fn reference_pair_on_both_paths() {
        let cfg = KernelConfig::default();
        let (x, y) = (pt(1.0, 0.0), pt(2.0, 0.0));
        let e = angular_kernel_elliptic(&x, &y, 0.0).unwrap();
        let q = angular_kernel_quadrature(&x, &y, &cfg).unwrap();
        assert!((e.f - F_1_2).abs() < 1e-14, "{}", e.f);
        assert!((q.f - F_1_2).abs() < 1e-10);
        assert!((e.df_dr - q.df_dr).abs() < 1e-9 && (e.df_dz - q.df_dz).abs() < 1e-9);
        assert_eq!(e.df_dz, 0.0);
    }

    #[test]
    fn axis_and_symmetry() {
        let cfg = KernelConfig::default();
        for y in [pt(0.3, 1.0), pt(2.0, -0.5), pt(0.0, 0.2)] {
            let k = angular_kernel(&pt(0.0, 0.1), &y, &cfg).unwrap();
            assert_eq!(k.f, 0.0);
            assert_eq!(k.df_dz, 0.0);
        }
        let (a, b) = (pt(0.4, 0.3), pt(1.3, -0.2));
        let fab = angular_kernel(&a, &b, &cfg).unwrap().f;
        let fba = angular_kernel(&b, &a, &cfg).unwrap().f;
        assert!((fab - fba).abs() < 1e-15 * fab.abs());
    }

    #[test]
    fn coincident_points_need_a_blob() {
        let x = pt(0.7, 0.1);
        let cfg = KernelConfig::default();
        assert!(matches!(angular_kernel(&x, &x, &cfg), Err(Error::SingularEvaluation)));
        assert!(matches!(angular_kernel_quadrature(&x, &x, &cfg), Err(Error::SingularEvaluation)));
        let blob = KernelConfig::with_delta(0.05);
        let e = angular_kernel(&x, &x, &blob).unwrap();
        let q = angular_kernel_quadrature(&x, &x, &blob).unwrap();
        assert!((e.f - q.f).abs() < 1e-9 && (e.df_dr - q.df_dr).abs() < 1e-9);
    }

    #[test]
    fn over_r_paths_agree_and_reach_the_axis() {
        let quad = KernelConfig { use_elliptic: false, ..KernelConfig::default() };
        let ell = KernelConfig::default();
        for x in [pt(0.0, 0.3), pt(1e-6, 0.3), pt(0.5, 0.0), pt(1.9, -1.0)] {
            let y = pt(1.0, 0.1);
            let a = kernel_over_r(&x, &y, &ell).unwrap();
            let b = kernel_over_r(&x, &y, &quad).unwrap();
            assert!((a - b).abs() < 1e-9, "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn hessian_matches_differences_of_first_derivatives() {
        let (x, y) = (pt(0.8, 0.2), pt(1.1, -0.1));
        let d = 0.1;
        let hs = kernel_hessian(&x, &y, d).unwrap();
        let e = 1e-5;
        let k = |r: f64, z: f64| angular_kernel_elliptic(&pt(r, z), &y, d).unwrap();
        let frr = (k(x.r + e, x.z).df_dr - k(x.r - e, x.z).df_dr) / (2.0 * e);
        let frz = (k(x.r, x.z + e).df_dr - k(x.r, x.z - e).df_dr) / (2.0 * e);
        let fzz = (k(x.r, x.z + e).df_dz - k(x.r, x.z - e).df_dz) / (2.0 * e);
        assert!((hs.f_rr - frr).abs() < 1e-6 && (hs.f_rz - frz).abs() < 1e-6 && (hs.f_zz - fzz).abs() < 1e-6);
    }

    #[test]
    fn gradient_trace_vanishes_and_matches_velocity() {
        let ps = ParticleField::new(vec![
            VortexParticle::new(pt(1.0, 0.0), 2.0, 0.1).unwrap(),
            VortexParticle::new(pt(0.6, 0.4), -1.0, 0.05).unwrap(),
        ]);
        let field = RelativeVorticityField::Particles(ps);
        let cfg = KernelConfig::with_delta(0.1);
        for x in [pt(0.0, 0.2), pt(0.3, 0.1), pt(1.2, -0.3)] {
            let g = velocity_gradient_eval(&field, &x, &cfg).unwrap();
            let u = velocity_eval(&field, &x, &cfg).unwrap();
            assert!((g.u.u_r - u.u_r).abs() < 1e-13 && (g.u.u_z - u.u_z).abs() < 1e-13);
            assert!(g.trace_residual().abs() < 1e-12);
        }
        let on_axis = velocity_eval(&field, &pt(0.0, 0.7), &cfg).unwrap();
        assert_eq!(on_axis.u_r, 0.0);
    }
}
