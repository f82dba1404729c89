//! Weak-form residuals of computed trajectories and the regularisation
//! (epsilon) convergence study.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GridField, Lattice, MeridianPoint, RelativeVorticityField, VelocitySample};
use crate::initdata::{make_initial, regularize, BumpProfile, Composition, CutoffMode, DataFamily, MollifierSpec};
use crate::kernel::dual::D2;
use crate::kernel::velocity_at;
use crate::transport::{simulate, SimConfig, TrajectoryRecord};

pub const SCHEMA_VERSION: u32 = 1;

/// `exp(-1 / (1 - s^2))` on `|s| < 1` as a dual number.
fn bump(s: D2) -> D2 {
    if s.v.abs() >= 1.0 {
        return D2::constant(0.0);
    }
    let g = (D2::constant(1.0) - s * s).recip().scale(-1.0);
    let e = g.v.exp();
    g.chain(e, e, e)
}

/// `(B(s), B'(s))` of the scalar bump.
fn bump_dt(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let w = 1.0 - s * s;
    let b = (-1.0 / w).exp();
    (b, -2.0 * s / (w * w) * b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestShape {
    /// `B((r - r_c)/a) B((z - z_c)/b)`, with `r_c > a`.
    OffAxis { r_center: f64, r_half: f64, z_center: f64, z_half: f64 },
    /// `r B(r/a) B((z - z_c)/b)`: odd in `r`, so `phi` is smooth across the axis.
    Axis { r_half: f64, z_center: f64, z_half: f64 },
}

/// `phi = curl(eta e_theta)` with `eta(r, z, t) = A T(t) S(r, z)` built from
/// tensor bumps. `phi` is divergence-free and axisymmetric by construction,
/// and `T` vanishes outside `(t_start, t_end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTestFunction {
    pub label: String,
    pub shape: TestShape,
    pub t_start: f64,
    pub t_end: f64,
    pub amplitude: f64,
}

/// `phi` and its meridian gradient at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TestValue {
    /// `(phi_r, phi_z)`
    pub phi: [f64; 2],
    /// `[[d_r phi_r, d_z phi_r], [d_r phi_z, d_z phi_z]]`
    pub grad: [[f64; 2]; 2],
}

impl WeakTestFunction {
    pub fn new(label: impl Into<String>, shape: TestShape, t_start: f64, t_end: f64, amplitude: f64) -> Result<Self> {
        if !(t_start < t_end) {
            return Err(Error::invalid("test time support must have t_start < t_end"));
        }
        match shape {
            TestShape::OffAxis { r_center, r_half, z_half, .. } if !(r_half > 0.0 && z_half > 0.0 && r_center > r_half) => {
                Err(Error::invalid("off-axis test support must be nonempty and clear of the axis"))
            }
            TestShape::Axis { r_half, z_half, .. } if !(r_half > 0.0 && z_half > 0.0) => Err(Error::invalid("test support must be nonempty")),
            _ => Ok(Self { label: label.into(), shape, t_start, t_end, amplitude }),
        }
    }

    /// Five functions around a ring near `(1, 0)` travelling along `z`,
    /// active on the middle of `[0, t_end]`.
    pub fn builtin(t_end: f64) -> Vec<Self> {
        let (t0, t1) = (0.1 * t_end, 0.9 * t_end);
        let off = |r_center, z_center| TestShape::OffAxis { r_center, r_half: 0.45, z_center, z_half: 0.5 };
        vec![
            Self::new("core", off(1.0, 0.1), t0, t1, 1.0).unwrap(),
            Self::new("inner", off(0.6, 0.0), t0, t1, 1.0).unwrap(),
            Self::new("outer", off(1.4, 0.0), t0, t1, 1.0).unwrap(),
            Self::new("wake", off(1.0, -0.4), t0, t1, 1.0).unwrap(),
            Self::new("axis", TestShape::Axis { r_half: 0.8, z_center: 0.2, z_half: 0.8 }, t0, t1, 1.0).unwrap(),
        ]
    }

    /// `(r_lo, r_hi, z_lo, z_hi)` containing the spatial support.
    pub fn support(&self) -> (f64, f64, f64, f64) {
        match self.shape {
            TestShape::OffAxis { r_center, r_half, z_center, z_half } => (r_center - r_half, r_center + r_half, z_center - z_half, z_center + z_half),
            TestShape::Axis { r_half, z_center, z_half } => (0.0, r_half, z_center - z_half, z_center + z_half),
        }
    }

    /// `(T(t), T'(t))`, scaled by the amplitude.
    pub fn time_factor(&self, t: f64) -> (f64, f64) {
        let c = 0.5 * (self.t_start + self.t_end);
        let w = 0.5 * (self.t_end - self.t_start);
        let (b, db) = bump_dt((t - c) / w);
        (self.amplitude * b, self.amplitude * db / w)
    }

    fn eta(&self, r: f64, z: f64) -> D2 {
        let (rv, zv) = (D2::var_r(r), D2::var_z(z));
        match self.shape {
            TestShape::OffAxis { r_center, r_half, z_center, z_half } => {
                bump((rv - D2::constant(r_center)).scale(1.0 / r_half)) * bump((zv - D2::constant(z_center)).scale(1.0 / z_half))
            }
            TestShape::Axis { r_half, z_center, z_half } => rv * bump(rv.scale(1.0 / r_half)) * bump((zv - D2::constant(z_center)).scale(1.0 / z_half)),
        }
    }

    /// Spatial part of `phi` (without the time factor) at `r > 0`.
    pub fn spatial(&self, r: f64, z: f64) -> TestValue {
        let e = self.eta(r, z);
        let [er, ez] = e.g;
        let [err, erz, ezz] = e.h;
        let v = e.v;
        TestValue {
            phi: [-ez, er + v / r],
            grad: [[-erz, -ezz], [err + er / r - v / (r * r), erz + ez / r]],
        }
    }
}

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; times.len()];
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        w[k - 1] += 0.5 * dt;
        w[k] += 0.5 * dt;
    }
    w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub schema_version: u32,
    pub labels: Vec<String>,
    pub residuals: Vec<f64>,
    /// Midpoint cells per direction over each test support.
    pub resolution: usize,
    pub snapshots: usize,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Midpoint nodes and `2 pi r dr dz` weights over a test support.
fn support_nodes(test: &WeakTestFunction, n: usize) -> Vec<(MeridianPoint, f64)> {
    let (r0, r1, z0, z1) = test.support();
    let (dr, dz) = ((r1 - r0) / n as f64, (z1 - z0) / n as f64);
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let r = r0 + (i as f64 + 0.5) * dr;
            let z = z0 + (j as f64 + 0.5) * dz;
            out.push((MeridianPoint { r, z }, 2.0 * PI * r * dr * dz));
        }
    }
    out
}

/// `R(phi) = int_0^T int (u . d_t phi + u . grad(phi) . u) dx dt` for each
/// test, with `u(t_k, x)` supplied by `velocity(k, points)` at the given
/// times. Time integration is trapezoidal over `times`, space integration
/// the midpoint rule with `resolution^2` cells on each test support.
pub fn weak_residual_with(
    times: &[f64],
    mut velocity: impl FnMut(usize, &[MeridianPoint]) -> Result<Vec<VelocitySample>>,
    tests: &[WeakTestFunction],
    resolution: usize,
) -> Result<ResidualReport> {
    let t_end = *times.last().ok_or(Error::EmptyRecord)?;
    for t in tests {
        if t.t_start < times[0] || t.t_end > t_end {
            return Err(Error::TestSupportOutsideRecord { t0: t.t_start, t1: t.t_end, t_end });
        }
        let found = times.iter().filter(|&&s| s > t.t_start && s < t.t_end).count();
        if found < 4 {
            return Err(Error::InsufficientSnapshots { found, needed: 4 });
        }
    }
    let nodes: Vec<Vec<(MeridianPoint, f64)>> = tests.iter().map(|t| support_nodes(t, resolution)).collect();
    let values: Vec<Vec<TestValue>> = tests
        .iter()
        .zip(&nodes)
        .map(|(t, ns)| ns.iter().map(|(x, _)| t.spatial(x.r, x.z)).collect())
        .collect();
    let points: Vec<MeridianPoint> = nodes.iter().flatten().map(|(x, _)| *x).collect();
    let w = trapezoid_weights(times);
    let mut res = vec![0.0; tests.len()];
    for (k, &t) in times.iter().enumerate() {
        let active: Vec<(f64, f64)> = tests.iter().map(|f| f.time_factor(t)).collect();
        if active.iter().all(|&(a, da)| a == 0.0 && da == 0.0) || w[k] == 0.0 {
            continue;
        }
        let u = velocity(k, &points)?;
        let mut off = 0;
        for (m, test_nodes) in nodes.iter().enumerate() {
            let (a, da) = active[m];
            let mut lin = 0.0;
            let mut quad = 0.0;
            for (n, (_, vol)) in test_nodes.iter().enumerate() {
                let v = u[off + n];
                let tv = &values[m][n];
                let uu = [v.u_r, v.u_z];
                lin += vol * (uu[0] * tv.phi[0] + uu[1] * tv.phi[1]);
                let mut s = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        // u_i (d_i phi_j) u_j
                        s += uu[i] * tv.grad[j][i] * uu[j];
                    }
                }
                quad += vol * s;
            }
            res[m] += w[k] * (da * lin + a * quad);
            off += test_nodes.len();
        }
    }
    Ok(ResidualReport {
        schema_version: SCHEMA_VERSION,
        labels: tests.iter().map(|t| t.label.clone()).collect(),
        residuals: res,
        resolution,
        snapshots: times.len(),
        metadata: BTreeMap::new(),
    })
}

/// [`weak_residual_with`] for a computed trajectory, evaluating `u` from
/// each snapshot with the record's kernel.
pub fn weak_residual(record: &TrajectoryRecord, tests: &[WeakTestFunction], resolution: usize) -> Result<ResidualReport> {
    if record.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let kernel = record.config.kernel;
    let mut rep = weak_residual_with(
        &record.times,
        |k, pts| {
            let f = &record.snapshots[k];
            if f.particles.iter().all(|p| p.q == 0.0) {
                return Ok(vec![VelocitySample::default(); pts.len()]);
            }
            velocity_at(&RelativeVorticityField::Particles(f.clone()), pts, &kernel)
        },
        tests,
        resolution,
    )?;
    rep.metadata.insert("dt".into(), record.config.dt.to_string());
    rep.metadata.insert("blob_delta".into(), kernel.blob_delta.to_string());
    rep.metadata.insert("particles".into(), record.snapshots[0].len().to_string());
    Ok(rep)
}

/// Settings of the epsilon study shared by every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Lattice carrying the regularised data.
    pub lattice: Lattice,
    pub sim: SimConfig,
    pub profile: BumpProfile,
    pub cutoff_mode: CutoffMode,
    pub composition: Composition,
    /// Nodes with `|q_eps| <= floor` are not seeded.
    pub floor: f64,
    /// Radii of the comparison cylinders.
    pub radii: Vec<f64>,
    pub probe_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub eps: Vec<f64>,
    pub radii: Vec<f64>,
    /// `differences[m][k] = ||u^{eps_k} - u^{eps_{k+1}}||_{L^2(0,T; Cyl(R_m))}`.
    pub differences: Vec<Vec<f64>>,
    pub particles: Vec<usize>,
}

impl ConvergenceReport {
    /// Strict decrease of the successive differences for every radius.
    pub fn is_cauchy(&self) -> bool {
        self.differences.iter().all(|d| d.windows(2).all(|w| w[1] < w[0]))
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for (r, d) in self.radii.iter().zip(&self.differences) {
            let cells: Vec<String> = d.iter().map(|v| format!("{v:.6e}")).collect();
            s.push_str(&format!("R={r}: [{}] ", cells.join(", ")));
        }
        s.trim_end().to_string()
    }
}

/// Regularised data `q_eps` for one `eps`.
pub fn regularized_data(family: &DataFamily, eps: f64, cfg: &StudyConfig) -> Result<GridField> {
    let q = make_initial(family, &cfg.lattice)?;
    let spec = MollifierSpec::new(eps, cfg.profile, cfg.cutoff_mode)?;
    regularize(&q, &spec, cfg.composition)
}

/// Simulate from `q_eps` and sample `u` on `probes` at every snapshot.
pub fn regularized_run(family: &DataFamily, eps: f64, cfg: &StudyConfig, probes: &Lattice) -> Result<(Vec<f64>, Vec<Vec<VelocitySample>>, usize)> {
    let q = regularized_data(family, eps, cfg)?;
    let particles = q.to_particles_above(cfg.floor);
    let rec = simulate(&particles.clone().into(), &cfg.sim)?;
    let pts = probes.points();
    let u = rec
        .snapshots
        .iter()
        .map(|f| velocity_at(&RelativeVorticityField::Particles(f.clone()), &pts, &cfg.sim.kernel))
        .collect::<Result<Vec<_>>>()?;
    Ok((rec.times, u, particles.len()))
}

/// `||u - v||_{L^2(0,T; Cyl(R))}` for samples on a common probe lattice
/// and common times.
pub fn space_time_difference(times: &[f64], u: &[Vec<VelocitySample>], v: &[Vec<VelocitySample>], probes: &Lattice, radius: f64) -> f64 {
    let w = trapezoid_weights(times);
    let mut acc = 0.0;
    for k in 0..times.len() {
        let mut s = 0.0;
        for j in 0..probes.nz {
            for i in 0..probes.nr {
                let (r, z) = (probes.r(i), probes.z(j));
                if r <= radius && z.abs() <= radius {
                    let n = probes.index(i, j);
                    let d2 = (u[k][n].u_r - v[k][n].u_r).powi(2) + (u[k][n].u_z - v[k][n].u_z).powi(2);
                    s += probes.cell_volume(i) * d2;
                }
            }
        }
        acc += w[k] * s;
    }
    acc.sqrt()
}

/// Successive differences of the velocities computed from regularised data
/// for each `eps` (strictly decreasing, at least three values). Fails with
/// [`Error::NotCauchy`], carrying the table, if any sequence of differences
/// does not decrease strictly.
pub fn epsilon_convergence_study(family: &DataFamily, eps_list: &[f64], cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let rep = epsilon_study_table(family, eps_list, cfg)?;
    if rep.is_cauchy() {
        Ok(rep)
    } else {
        Err(Error::NotCauchy { table: rep.table() })
    }
}

/// [`epsilon_convergence_study`] without the final verdict.
pub fn epsilon_study_table(family: &DataFamily, eps_list: &[f64], cfg: &StudyConfig) -> Result<ConvergenceReport> {
    if eps_list.len() < 3 || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps_list must be strictly decreasing with at least 3 entries"));
    }
    let r_max = cfg.radii.iter().cloned().fold(0.0, f64::max);
    let n = (r_max / cfg.probe_h).round() as usize;
    let probes = Lattice::with_counts(n, 2 * n, -r_max, cfg.probe_h)?;
    // each run is internally parallel; running them one after another keeps
    // the memory footprint at one trajectory
    let runs = eps_list.iter().map(|&e| regularized_run(family, e, cfg, &probes)).collect::<Result<Vec<_>>>()?;
    let times = &runs[0].0;
    let differences = cfg
        .radii
        .par_iter()
        .map(|&r| runs.windows(2).map(|w| space_time_difference(times, &w[0].1, &w[1].1, &probes, r)).collect())
        .collect();
    Ok(ConvergenceReport {
        schema_version: SCHEMA_VERSION,
        eps: eps_list.to_vec(),
        radii: cfg.radii.clone(),
        differences,
        particles: runs.iter().map(|r| r.2).collect(),
    })
}
