//! Lagrangian transport of `q = omega_theta / r`.
//!
//! Particles move with the Biot-Savart velocity; `q` and `vol` ride along
//! untouched, so every particle norm of `q` is constant between remeshes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{divergence_residual, lp_norm, remesh, Lattice, MeridianPoint, NormSpec, ParticleField, RelativeVorticityField, RemeshKernel, RemeshOptions, VelocitySample};
use crate::kernel::{sample_velocity, self_velocity, KernelConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    #[serde(rename = "RK2")]
    Rk2,
    #[serde(rename = "RK4")]
    Rk4,
}

fn default_snapshot_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Remesh after every `remesh_every` steps; 0 disables remeshing.
    #[serde(default)]
    pub remesh_every: usize,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub monitor_norms: Vec<NormSpec>,
    /// Keep every `snapshot_every`-th step (the final state is always kept).
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Target lattice for remeshing.
    #[serde(default)]
    pub remesh_grid: Option<Lattice>,
    #[serde(default)]
    pub remesh_floor: f64,
    #[serde(default)]
    pub remesh_kernel: RemeshKernel,
    /// Lattice on which the divergence residual of `u` is monitored.
    #[serde(default)]
    pub probe_grid: Option<Lattice>,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, integrator: Integrator, kernel: KernelConfig) -> Self {
        Self {
            dt,
            t_end,
            integrator,
            remesh_every: 0,
            kernel,
            monitor_norms: Vec::new(),
            snapshot_every: 1,
            remesh_grid: None,
            remesh_floor: 0.0,
            remesh_kernel: RemeshKernel::M4Prime,
            probe_grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end == 0.0 || self.t_end >= self.dt) {
            return Err(Error::invalid(format!("t_end must be 0 or >= dt, got {}", self.t_end)));
        }
        if self.remesh_every > 0 && self.remesh_grid.is_none() {
            return Err(Error::invalid("remeshing requires remesh_grid"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::invalid("snapshot_every must be >= 1"));
        }
        self.kernel.validate()
    }

    /// Number of steps; the last one is shortened if `t_end` is not a
    /// multiple of `dt`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Monitor values at one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub step: usize,
    pub time: f64,
    /// One entry per `SimConfig::monitor_norms`.
    pub norms: Vec<f64>,
    /// `sum q vol`, constant between remeshes.
    pub strength: f64,
    /// Axial impulse `(1/2) sum q r^2 vol`.
    pub impulse: f64,
    pub divergence_residual: Option<f64>,
    pub particles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemeshEvent {
    pub step: usize,
    pub strength_before: f64,
    pub strength_after: f64,
    pub particles_before: usize,
    pub particles_after: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub config: SimConfig,
    pub times: Vec<f64>,
    pub snapshots: Vec<ParticleField>,
    pub monitors: Vec<MonitorRow>,
    pub remesh_events: Vec<RemeshEvent>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_field(&self) -> Option<&ParticleField> {
        self.snapshots.last()
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

fn moved(field: &ParticleField, base: &ParticleField, vel: &[VelocitySample], h: f64) -> ParticleField {
    let mut out = field.clone();
    for ((p, b), v) in out.particles.iter_mut().zip(&base.particles).zip(vel) {
        // a step across the axis is folded back; q is even in r
        p.pos = MeridianPoint { r: (b.pos.r + h * v.u_r).abs(), z: b.pos.z + h * v.u_z };
    }
    out
}

/// One step of size `dt` (negative values integrate backwards).
pub fn step_with(field: &ParticleField, kernel: &KernelConfig, integrator: Integrator, dt: f64) -> Result<ParticleField> {
    let vel = |f: &ParticleField| self_velocity(f, kernel);
    match integrator {
        Integrator::Rk2 => {
            let k1 = vel(field)?;
            let mid = moved(field, field, &k1, 0.5 * dt);
            let k2 = vel(&mid)?;
            Ok(moved(field, field, &k2, dt))
        }
        Integrator::Rk4 => {
            let k1 = vel(field)?;
            let k2 = vel(&moved(field, field, &k1, 0.5 * dt))?;
            let k3 = vel(&moved(field, field, &k2, 0.5 * dt))?;
            let k4 = vel(&moved(field, field, &k3, dt))?;
            let avg: Vec<VelocitySample> = (0..field.len())
                .map(|i| VelocitySample {
                    u_r: (k1[i].u_r + 2.0 * k2[i].u_r + 2.0 * k3[i].u_r + k4[i].u_r) / 6.0,
                    u_z: (k1[i].u_z + 2.0 * k2[i].u_z + 2.0 * k3[i].u_z + k4[i].u_z) / 6.0,
                })
                .collect();
            Ok(moved(field, field, &avg, dt))
        }
    }
}

/// Advance a particle field by `cfg.dt`. Particle count, `q` and `vol` are
/// unchanged; positions stay at `r >= 0`.
pub fn advect_step(field: &RelativeVorticityField, cfg: &SimConfig) -> Result<RelativeVorticityField> {
    cfg.validate()?;
    let p = field.as_particles().ok_or_else(|| Error::invalid("advect_step needs a particle field"))?;
    if cfg.kernel.blob_delta <= 0.0 {
        return Err(Error::invalid("advect_step needs blob_delta > 0"));
    }
    Ok(step_with(p, &cfg.kernel, cfg.integrator, cfg.dt)?.into())
}

/// Largest stable-looking step `safety * h / max|u|` for the current field.
pub fn cfl_dt(field: &ParticleField, kernel: &KernelConfig, h: f64, safety: f64) -> Result<f64> {
    let v = self_velocity(field, kernel)?;
    let umax = v.iter().map(|s| s.norm()).fold(0.0, f64::max);
    Ok(if umax > 0.0 { safety * h / umax } else { f64::INFINITY })
}

fn monitor(field: &ParticleField, step: usize, time: f64, cfg: &SimConfig) -> Result<MonitorRow> {
    let norms = if field.is_empty() {
        vec![0.0; cfg.monitor_norms.len()]
    } else {
        cfg.monitor_norms.iter().map(|spec| lp_norm(field, spec)).collect::<Result<Vec<_>>>()?
    };
    let divergence_residual = match (&cfg.probe_grid, field.is_empty()) {
        (Some(l), false) => {
            let u = sample_velocity(&field.clone().into(), l, &cfg.kernel)?;
            Some(divergence_residual(&u)?)
        }
        _ => None,
    };
    Ok(MonitorRow {
        step,
        time,
        norms,
        strength: field.total_strength(),
        impulse: 0.5 * field.particles.iter().map(|p| p.q * p.pos.r * p.pos.r * p.vol).sum::<f64>(),
        divergence_residual,
        particles: field.len(),
    })
}

fn finite(field: &ParticleField) -> bool {
    field.particles.iter().all(|p| p.pos.r.is_finite() && p.pos.z.is_finite())
}

/// Integrate from `initial` to `cfg.t_end`, keeping snapshots and monitors.
pub fn simulate(initial: &RelativeVorticityField, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if initial.is_empty() {
        return Err(Error::EmptyField);
    }
    let mut field = initial.to_particles();
    let mut rec = TrajectoryRecord {
        config: cfg.clone(),
        times: vec![0.0],
        snapshots: vec![field.clone()],
        monitors: vec![monitor(&field, 0, 0.0, cfg)?],
        remesh_events: Vec::new(),
    };
    let steps = cfg.steps();
    if steps > 0 && cfg.kernel.blob_delta <= 0.0 {
        return Err(Error::invalid("time stepping needs blob_delta > 0"));
    }
    let mut t = 0.0;
    for n in 1..=steps {
        let dt = (cfg.t_end - t).min(cfg.dt);
        field = step_with(&field, &cfg.kernel, cfg.integrator, dt)?;
        t = if n == steps { cfg.t_end } else { n as f64 * cfg.dt };
        if !finite(&field) {
            return Err(Error::NonFiniteState { step: n, time: t, snapshot: Box::new(field) });
        }
        if cfg.remesh_every > 0 && n % cfg.remesh_every == 0 {
            let grid = cfg.remesh_grid.as_ref().expect("validated");
            let before = field.total_strength();
            let count = field.len();
            field = remesh(&field, grid, RemeshOptions { floor: cfg.remesh_floor, kernel: cfg.remesh_kernel })?;
            rec.remesh_events.push(RemeshEvent {
                step: n,
                strength_before: before,
                strength_after: field.total_strength(),
                particles_before: count,
                particles_after: field.len(),
            });
        }
        if n % cfg.snapshot_every == 0 || n == steps {
            rec.times.push(t);
            rec.monitors.push(monitor(&field, n, t, cfg)?);
            rec.snapshots.push(field.clone());
        }
    }
    Ok(rec)
}
