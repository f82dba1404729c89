//! Batched ring-to-ring interaction sums on the elliptic path.
//!
//! For a source ring `y` and target `x` the kernel divided by the target
//! radius is `H = F / r_x = 16 r_y ghat(m) s^{-3}`, smooth up to the axis.
//! With weights `W_j = q_j r_j vol_j / (8 pi^2)`:
//!
//! ```text
//! psi   = r_x  sum W H
//! u_r   = -r_x sum W dH/dz_x
//! u_z   = sum W (2 H + r_x dH/dr_x)
//! ```
//!
//! Inner loops work on fixed chunks of [`LANES`] sources so the compiler
//! can keep them in vector registers.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use super::elliptic::{SERIES, SERIES_SWITCH, SERIES_TERMS};
use crate::error::{Error, Result};
use crate::fields::{ParticleField, VelocitySample};

pub const LANES: usize = 8;

type Lane = [f64; LANES];

/// Horner length for the small-`m` series so that `m_max^n < 1e-17`.
#[inline(always)]
fn series_terms(m: &Lane) -> usize {
    let hi = m.iter().fold(0.0f64, |acc, &x| acc.max(x));
    if hi < 0.05 {
        14
    } else if hi < 0.1 {
        18
    } else if hi < 0.2 {
        26
    } else {
        SERIES_TERMS
    }
}

/// AGM stops once `(a - b) / (a + b) <= AGM_FINISH` in every lane; the
/// remainder is closed with the expansion of `AGM(1 + x, 1 - x)`.
const AGM_FINISH: f64 = 2e-3;

/// `ghat` and `ghat'` for eight parameters at once. Lanes with `m1 <= 0`
/// produce non-finite output.
#[inline(always)]
pub(crate) fn ghat_lanes(m: &Lane, m1: &Lane) -> (Lane, Lane) {
    let d = &SERIES.d;
    let mut out_g = [0.0; LANES];
    let mut out_dg = [0.0; LANES];
    if m.iter().any(|&x| x < SERIES_SWITCH) {
        let n = series_terms(m);
        let mut gs = [d[n - 1]; LANES];
        let mut dgs = [0.0; LANES];
        for k in (0..n - 1).rev() {
            for l in 0..LANES {
                dgs[l] = dgs[l] * m[l] + gs[l];
                gs[l] = gs[l] * m[l] + d[k];
            }
        }
        out_g = gs;
        out_dg = dgs;
        if m.iter().all(|&x| x < SERIES_SWITCH) {
            return (out_g, out_dg);
        }
    }
    let mut a = [1.0; LANES];
    let mut b = [0.0; LANES];
    for l in 0..LANES {
        b[l] = m1[l].max(0.0).sqrt();
    }
    let mut tail = [0.0; LANES];
    let mut pow2 = 1.0;
    for _ in 0..12 {
        let mut done = true;
        for l in 0..LANES {
            done &= a[l] - b[l] <= AGM_FINISH * (a[l] + b[l]);
        }
        if done {
            break;
        }
        pow2 *= 2.0;
        for l in 0..LANES {
            let c = 0.5 * (a[l] - b[l]);
            let an = 0.5 * (a[l] + b[l]);
            b[l] = (a[l] * b[l]).sqrt();
            a[l] = an;
            tail[l] += pow2 * c * c;
        }
    }
    for l in 0..LANES {
        let (m, m1) = (m[l], m1[l]);
        // with s = (a+b)/2, x = (a-b)/(a+b): AGM = s / K1(x^2) where
        // K1(k^2) = 1 + k^2/4 + 9k^4/64 + 25k^6/256 + ...
        let s = 0.5 * (a[l] + b[l]);
        let dd = 0.5 * (a[l] - b[l]);
        let x2 = (dd / s) * (dd / s);
        let k1 = 1.0 + x2 * (0.25 + x2 * (9.0 / 64.0 + x2 * (25.0 / 256.0)));
        let t1 = 2.0 * pow2 * dd * dd;
        let tl = tail[l] + t1 * (1.0 + 0.125 * x2);
        let k = FRAC_PI_2 * k1 / s;
        let p = k * tl;
        let e = 0.5 * k * (2.0 - m - tl);
        let rmm1 = 1.0 / (m * m1);
        let im = m1 * rmm1;
        let dk = 0.5 * (e - m1 * k) * rmm1;
        let de = 0.5 * (e - k) * im;
        let dp = -k + (2.0 - m) * dk - 2.0 * de;
        if m >= SERIES_SWITCH {
            out_g[l] = p * im * im;
            out_dg[l] = (dp - 2.0 * p * im) * im * im;
        }
    }
    (out_g, out_dg)
}

/// Source rings in structure-of-arrays form, padded with inert entries to a
/// multiple of [`LANES`]. Rings on the axis carry no weight and are dropped.
#[derive(Clone, Debug)]
pub struct SourceSet {
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// Index of each stored ring in the originating particle list.
    pub origin: Vec<usize>,
    n: usize,
}

impl SourceSet {
    pub fn from_particles(field: &ParticleField) -> Self {
        let mut r = Vec::with_capacity(field.len() + LANES);
        let mut z = Vec::with_capacity(field.len() + LANES);
        let mut w = Vec::with_capacity(field.len() + LANES);
        let mut origin = Vec::with_capacity(field.len());
        let c = 1.0 / (8.0 * PI * PI);
        for (k, p) in field.particles.iter().enumerate() {
            let wk = p.q * p.pos.r * p.vol * c;
            if p.pos.r > 0.0 && wk != 0.0 {
                r.push(p.pos.r);
                z.push(p.pos.z);
                w.push(wk);
                origin.push(k);
            }
        }
        let n = r.len();
        while r.len() % LANES != 0 || r.is_empty() {
            // r = 0 makes every kernel term vanish identically
            r.push(0.0);
            z.push(0.0);
            w.push(0.0);
        }
        Self { r, z, w, origin, n }
    }

    /// Number of live (non-padding) rings.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Weighted sums `(sum W H, sum W H_r, sum W H_z)` at one target.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RingSums {
    pub h: f64,
    pub hr: f64,
    pub hz: f64,
}

impl RingSums {
    pub fn psi(&self, rx: f64) -> f64 {
        rx * self.h
    }

    pub fn velocity(&self, rx: f64) -> VelocitySample {
        VelocitySample { u_r: -rx * self.hz, u_z: 2.0 * self.h + rx * self.hr }
    }
}

/// Interaction sums at `(rx, zx)`. Returns `Err(SingularEvaluation)` when a
/// weighted source coincides with the target and `d2 = 0`.
pub fn ring_sums(src: &SourceSet, rx: f64, zx: f64, d2: f64) -> Result<RingSums> {
    let mut h = [0.0; LANES];
    let mut hr = [0.0; LANES];
    let mut hz = [0.0; LANES];
    let mut bad = false;
    for ((rc, zc), wc) in src.r.chunks_exact(LANES).zip(src.z.chunks_exact(LANES)).zip(src.w.chunks_exact(LANES)) {
        let mut m = [0.0; LANES];
        let mut m1 = [0.0; LANES];
        let mut inv = [0.0; LANES];
        let mut dz = [0.0; LANES];
        let mut a2 = [0.0; LANES];
        for l in 0..LANES {
            dz[l] = zx - zc[l];
            a2[l] = dz[l] * dz[l] + d2;
            let sp = (rx + rc[l]) * (rx + rc[l]) + a2[l];
            let sm = (rx - rc[l]) * (rx - rc[l]) + a2[l];
            inv[l] = 1.0 / sp;
            m[l] = 4.0 * rx * rc[l] * inv[l];
            m1[l] = sm * inv[l];
        }
        for l in 0..LANES {
            bad |= !(m1[l] > 0.0) && wc[l] != 0.0;
        }
        let (g, dg) = ghat_lanes(&m, &m1);
        for l in 0..LANES {
            let ry = rc[l];
            let i = inv[l];
            let c = 16.0 * i * i.sqrt() * ry * wc[l];
            let mr = 4.0 * ry * (ry * ry - rx * rx + a2[l]) * i * i;
            let mz = -2.0 * m[l] * dz[l] * i;
            h[l] += c * g[l];
            hr[l] += c * (dg[l] * mr - 3.0 * g[l] * (rx + ry) * i);
            hz[l] += c * (dg[l] * mz - 3.0 * g[l] * dz[l] * i);
        }
    }
    if bad {
        return Err(Error::SingularEvaluation);
    }
    Ok(RingSums { h: h.iter().sum(), hr: hr.iter().sum(), hz: hz.iter().sum() })
}

/// [`ring_sums`] at many targets, in parallel over targets. Each target's
/// sum runs in a fixed order, so results do not depend on the thread count.
pub fn ring_sums_at(src: &SourceSet, targets: &[(f64, f64)], d2: f64) -> Result<Vec<RingSums>> {
    targets.par_iter().map(|&(r, z)| ring_sums(src, r, z, d2)).collect()
}

const SWEEP_BLOCK: usize = 128;
const SWEEP_MAX_BLOCKS: usize = 32;

/// Velocity induced by a ring set on its own rings (self-term included),
/// evaluating each unordered pair once.
///
/// Rows are split into a fixed number of contiguous blocks that depends only
/// on the ring count; each block scatters into its own buffer and the
/// buffers are summed in block order, so the result is independent of the
/// thread count. Output is indexed like `src.r[..src.len()]`.
pub fn self_velocity(src: &SourceSet, d2: f64) -> Result<Vec<VelocitySample>> {
    let n = src.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if d2 <= 0.0 {
        return Err(Error::SingularEvaluation);
    }
    let nblocks = n.div_ceil(SWEEP_BLOCK).clamp(1, SWEEP_MAX_BLOCKS);
    let bounds: Vec<(usize, usize)> = (0..nblocks).map(|b| (b * n / nblocks, (b + 1) * n / nblocks)).collect();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = bounds.par_iter().map(|&(lo, hi)| sweep_rows(src, lo, hi, d2)).collect();
    let mut ur = vec![0.0; n];
    let mut uz = vec![0.0; n];
    for (pr, pz) in &parts {
        for k in 0..n {
            ur[k] += pr[k];
            uz[k] += pz[k];
        }
    }
    let out: Vec<VelocitySample> = ur.into_iter().zip(uz).map(|(u_r, u_z)| VelocitySample { u_r, u_z }).collect();
    if out.iter().any(|v| !(v.u_r.is_finite() && v.u_z.is_finite())) {
        return Err(Error::SingularEvaluation);
    }
    Ok(out)
}

fn sweep_rows(src: &SourceSet, lo: usize, hi: usize, d2: f64) -> (Vec<f64>, Vec<f64>) {
    let n = src.len();
    let (rs, zs, ws) = (&src.r[..n], &src.z[..n], &src.w[..n]);
    let mut bur = vec![0.0; n];
    let mut buz = vec![0.0; n];
    for i in lo..hi {
        let (rx, zx, wi) = (rs[i], zs[i], ws[i]);
        // self term: dz = 0, so only u_z picks up a contribution
        {
            let sp = 4.0 * rx * rx + d2;
            let inv = 1.0 / sp;
            let m = 4.0 * rx * rx * inv;
            let m1 = d2 * inv;
            let (g, dg) = ghat_lanes(&[m; LANES], &[m1; LANES]);
            let c = 16.0 * inv * inv.sqrt() * rx;
            let mr = 4.0 * rx * d2 * inv * inv;
            let h = c * g[0];
            let hr = c * (dg[0] * mr - 3.0 * g[0] * 2.0 * rx * inv);
            buz[i] += wi * (2.0 * h + rx * hr);
        }
        let mut aur = [0.0; LANES];
        let mut auz = [0.0; LANES];
        let mut j = i + 1;
        while j < n {
            let take = (n - j).min(LANES);
            let mut ry = [0.0; LANES];
            let mut zy = [0.0; LANES];
            let mut wy = [0.0; LANES];
            ry[..take].copy_from_slice(&rs[j..j + take]);
            zy[..take].copy_from_slice(&zs[j..j + take]);
            wy[..take].copy_from_slice(&ws[j..j + take]);
            let mut m = [0.0; LANES];
            let mut m1 = [0.0; LANES];
            let mut inv = [0.0; LANES];
            let mut dz = [0.0; LANES];
            let mut a2 = [0.0; LANES];
            for l in 0..LANES {
                dz[l] = zx - zy[l];
                a2[l] = dz[l] * dz[l] + d2;
                let sp = (rx + ry[l]) * (rx + ry[l]) + a2[l];
                let sm = (rx - ry[l]) * (rx - ry[l]) + a2[l];
                inv[l] = 1.0 / sp;
                m[l] = 4.0 * rx * ry[l] * inv[l];
                m1[l] = sm * inv[l];
            }
            let (g, dg) = ghat_lanes(&m, &m1);
            let mut cur = [0.0; LANES];
            let mut cuz = [0.0; LANES];
            for l in 0..LANES {
                let y = ry[l];
                let iv = inv[l];
                let c = 16.0 * iv * iv.sqrt();
                let s = rx + y;
                let t = c * (dg[l] * (-2.0 * m[l] * dz[l] * iv) - 3.0 * g[l] * dz[l] * iv);
                let pr = rx * y * t;
                // target i, source j
                let mr_i = 4.0 * y * (y * y - rx * rx + a2[l]) * iv * iv;
                let hr_i = c * y * (dg[l] * mr_i - 3.0 * g[l] * s * iv);
                aur[l] -= wy[l] * pr;
                auz[l] += wy[l] * (2.0 * c * y * g[l] + rx * hr_i);
                // target j, source i
                let mr_j = 4.0 * rx * (rx * rx - y * y + a2[l]) * iv * iv;
                let hr_j = c * rx * (dg[l] * mr_j - 3.0 * g[l] * s * iv);
                cur[l] = wi * pr;
                cuz[l] = wi * (2.0 * c * rx * g[l] + y * hr_j);
            }
            for l in 0..take {
                bur[j + l] += cur[l];
                buz[j + l] += cuz[l];
            }
            j += take;
        }
        bur[i] += aur.iter().sum::<f64>();
        buz[i] += auz.iter().sum::<f64>();
    }
    (bur, buz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{MeridianPoint, VortexParticle};
    use crate::kernel::elliptic::ghat_d1;

    #[test]
    fn lanes_match_scalar_reference() {
        let mut ms = Vec::new();
        for k in 0..64 {
            let m = k as f64 / 64.0;
            ms.push((m, 1.0 - m));
        }
        for e in 1..15 {
            let m1 = 10f64.powi(-e);
            ms.push((1.0 - m1, m1));
        }
        for chunk in ms.chunks(LANES) {
            let mut m = [0.1; LANES];
            let mut m1 = [0.9; LANES];
            for (l, &(a, b)) in chunk.iter().enumerate() {
                m[l] = a;
                m1[l] = b;
            }
            let (g, dg) = ghat_lanes(&m, &m1);
            for l in 0..LANES {
                let r = ghat_d1(m[l], m1[l]);
                assert!((g[l] - r[0]).abs() <= 2e-14 * r[0].abs(), "m={} {} vs {}", m[l], g[l], r[0]);
                assert!((dg[l] - r[1]).abs() <= 1e-12 * r[1].abs().max(1.0), "m={} {} vs {}", m[l], dg[l], r[1]);
            }
        }
    }

    fn cloud(n: usize) -> ParticleField {
        let mut ps = Vec::new();
        let mut s: u64 = 7;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            let pos = MeridianPoint::new(0.2 + next(), next() - 0.5).unwrap();
            ps.push(VortexParticle::new(pos, next() - 0.3, 0.01 + 0.01 * next()).unwrap());
        }
        ParticleField::new(ps)
    }

    #[test]
    fn symmetric_sweep_matches_per_target_sums() {
        let field = cloud(301);
        let src = SourceSet::from_particles(&field);
        let d2 = 0.05f64.powi(2);
        let sweep = self_velocity(&src, d2).unwrap();
        for k in 0..src.len() {
            let direct = ring_sums(&src, src.r[k], src.z[k], d2).unwrap().velocity(src.r[k]);
            let scale = direct.norm().max(1e-3);
            assert!((sweep[k].u_r - direct.u_r).abs() < 1e-12 * scale);
            assert!((sweep[k].u_z - direct.u_z).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn coincident_target_without_blob_is_singular() {
        let field = cloud(9);
        let src = SourceSet::from_particles(&field);
        assert!(matches!(ring_sums(&src, src.r[3], src.z[3], 0.0), Err(Error::SingularEvaluation)));
        assert!(matches!(self_velocity(&src, 0.0), Err(Error::SingularEvaluation)));
    }
}
