//! Meridian-plane field representations and cylindrical-measure norms.
//!
//! Every field here is a function of `(r, z)` on the half plane `r >= 0`.
//! Integrals over R^3 reduce to `2 pi r dr dz`; the flat half-plane measure is
//! `dr dz`. Grids are cell-centred: node `(i, j)` sits at
//! `r = (i + 1/2) h`, `z = z_min + (j + 1/2) h`, so no node lies on the axis
//! and the midpoint rule is exact for piecewise constants.

mod diff;
pub mod io;
mod remesh;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use diff::{divergence_field, divergence_residual, VelocityGrid};
pub use remesh::{m4_prime, m6_prime, remesh, remesh_to_grid, remesh_to_grid_with, RemeshKernel, RemeshOptions, M4_OVERSHOOT_1D};

/// A point `(r, z)` of the meridian half plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeridianPoint {
    pub r: f64,
    pub z: f64,
}

impl MeridianPoint {
    pub fn new(r: f64, z: f64) -> Result<Self> {
        if !(r.is_finite() && z.is_finite()) {
            return Err(Error::invalid(format!("non-finite point ({r}, {z})")));
        }
        if r < 0.0 {
            return Err(Error::invalid(format!("negative radius {r}")));
        }
        Ok(Self { r, z })
    }

    /// Euclidean distance in the meridian plane.
    pub fn dist(&self, other: &MeridianPoint) -> f64 {
        (self.r - other.r).hypot(self.z - other.z)
    }
}

/// A Lagrangian carrier of `q = omega_theta / r`.
///
/// `vol` is the 3D volume of the ring cell, so it already contains the
/// `2 pi r` azimuthal factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexParticle {
    pub pos: MeridianPoint,
    pub q: f64,
    pub vol: f64,
}

impl VortexParticle {
    pub fn new(pos: MeridianPoint, q: f64, vol: f64) -> Result<Self> {
        if !(vol > 0.0 && vol.is_finite()) {
            return Err(Error::invalid(format!("particle volume must be positive, got {vol}")));
        }
        if !q.is_finite() {
            return Err(Error::invalid("non-finite particle strength"));
        }
        Ok(Self { pos, q, vol })
    }

    /// `omega_theta = q r`.
    pub fn omega(&self) -> f64 {
        self.q * self.pos.r
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParticleField {
    pub particles: Vec<VortexParticle>,
}

impl ParticleField {
    pub fn new(particles: Vec<VortexParticle>) -> Self {
        Self { particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// `sum q vol`, the quantity conserved by remeshing.
    pub fn total_strength(&self) -> f64 {
        self.particles.iter().map(|p| p.q * p.vol).sum()
    }

    /// `sum q r vol / (2 pi)`: the meridian circulation `int omega dr dz`.
    pub fn circulation(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| p.q * p.pos.r * p.vol)
            .sum::<f64>()
            / (2.0 * PI)
    }

    /// Bounding box `(r_max, z_min, z_max)` of the particle positions.
    pub fn bounds(&self) -> Option<(f64, f64, f64)> {
        if self.particles.is_empty() {
            return None;
        }
        let mut b = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.particles {
            b.0 = b.0.max(p.pos.r);
            b.1 = b.1.min(p.pos.z);
            b.2 = b.2.max(p.pos.z);
        }
        Some(b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(
            self.particles
                .iter()
                .map(|p| VortexParticle { q: c * p.q, ..*p })
                .collect(),
        )
    }

    pub fn translated(&self, dz: f64) -> Self {
        Self::new(
            self.particles
                .iter()
                .map(|p| VortexParticle {
                    pos: MeridianPoint { r: p.pos.r, z: p.pos.z + dz },
                    ..*p
                })
                .collect(),
        )
    }
}

/// Uniform cell-centred lattice over `[0, r_max] x [z_min, z_max]`.
/// Serialised as its extent and spacing; the cell counts are re-derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeSpec", into = "LatticeSpec")]
pub struct Lattice {
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub h: f64,
    pub nr: usize,
    pub nz: usize,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct LatticeSpec {
    r_max: f64,
    z_min: f64,
    z_max: f64,
    h: f64,
}

impl TryFrom<LatticeSpec> for Lattice {
    type Error = Error;

    fn try_from(s: LatticeSpec) -> Result<Self> {
        Lattice::new(s.r_max, s.z_min, s.z_max, s.h)
    }
}

impl From<Lattice> for LatticeSpec {
    fn from(l: Lattice) -> Self {
        LatticeSpec { r_max: l.r_max, z_min: l.z_min, z_max: l.z_max, h: l.h }
    }
}

impl Lattice {
    /// The extents must be integer multiples of `h` (to 1e-9 relative).
    pub fn new(r_max: f64, z_min: f64, z_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {h}")));
        }
        if !(r_max > 0.0 && z_max > z_min) {
            return Err(Error::invalid("degenerate lattice extent"));
        }
        let count = |len: f64| -> Result<usize> {
            let n = (len / h).round();
            if (n * h - len).abs() > 1e-9 * len.max(h) || n < 1.0 {
                return Err(Error::invalid(format!(
                    "extent {len} is not a multiple of spacing {h}"
                )));
            }
            Ok(n as usize)
        };
        Ok(Self { r_max, z_min, z_max, h, nr: count(r_max)?, nz: count(z_max - z_min)? })
    }

    /// Lattice of `nr x nz` cells with spacing `h` starting at `z_min`.
    pub fn with_counts(nr: usize, nz: usize, z_min: f64, h: f64) -> Result<Self> {
        if nr == 0 || nz == 0 || !(h > 0.0) {
            return Err(Error::invalid("empty lattice"));
        }
        Ok(Self { r_max: nr as f64 * h, z_min, z_max: z_min + nz as f64 * h, h, nr, nz })
    }

    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.z_min + (j as f64 + 0.5) * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nr + i
    }

    pub fn point(&self, i: usize, j: usize) -> MeridianPoint {
        MeridianPoint { r: self.r(i), z: self.z(j) }
    }

    /// Node points in storage order (row-major, rows along `z`).
    pub fn points(&self) -> Vec<MeridianPoint> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.nz {
            for i in 0..self.nr {
                out.push(self.point(i, j));
            }
        }
        out
    }

    /// 3D volume of cell `i` (any row): `2 pi r_i h^2`.
    #[inline]
    pub fn cell_volume(&self, i: usize) -> f64 {
        2.0 * PI * self.r(i) * self.h * self.h
    }

    /// Same spacing, extent grown to cover `[0, r_max] x [z_min, z_max]`.
    pub fn covers(&self, r_max: f64, z_min: f64, z_max: f64) -> bool {
        let tol = 1e-12 * (self.r_max.abs() + self.z_max.abs() + self.z_min.abs() + self.h);
        self.r_max + tol >= r_max && self.z_min - tol <= z_min && self.z_max + tol >= z_max
    }
}

/// Scalar values on a [`Lattice`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::invalid(format!(
                "grid has {} nodes but {} values",
                lattice.len(),
                values.len()
            )));
        }
        Ok(Self { lattice, values })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        Self { lattice, values: vec![0.0; lattice.len()] }
    }

    pub fn from_fn(lattice: Lattice, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(lattice.len());
        for j in 0..lattice.nz {
            for i in 0..lattice.nr {
                values.push(f(lattice.r(i), lattice.z(j)));
            }
        }
        Self { lattice, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.lattice.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { lattice: self.lattice, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Nodes with non-zero value become particles of volume `2 pi r h^2`.
    pub fn to_particles(&self) -> ParticleField {
        self.to_particles_above(0.0)
    }

    /// Particles at nodes with `|q| > floor`.
    pub fn to_particles_above(&self, floor: f64) -> ParticleField {
        let l = &self.lattice;
        let mut out = Vec::new();
        for j in 0..l.nz {
            for i in 0..l.nr {
                let q = self.at(i, j);
                if q.abs() > floor {
                    out.push(VortexParticle { pos: l.point(i, j), q, vol: l.cell_volume(i) });
                }
            }
        }
        ParticleField::new(out)
    }
}

/// The solver state `q = omega_theta / r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RelativeVorticityField {
    Particles(ParticleField),
    Grid(GridField),
}

impl RelativeVorticityField {
    pub fn is_empty(&self) -> bool {
        match self {
            Self::Particles(p) => p.is_empty(),
            Self::Grid(g) => g.values.is_empty(),
        }
    }

    /// Particle view; grid nodes become particles at the cell centres.
    pub fn to_particles(&self) -> ParticleField {
        match self {
            Self::Particles(p) => p.clone(),
            Self::Grid(g) => g.to_particles(),
        }
    }

    pub fn as_particles(&self) -> Option<&ParticleField> {
        match self {
            Self::Particles(p) => Some(p),
            Self::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridField> {
        match self {
            Self::Grid(g) => Some(g),
            Self::Particles(_) => None,
        }
    }
}

impl From<ParticleField> for RelativeVorticityField {
    fn from(p: ParticleField) -> Self {
        Self::Particles(p)
    }
}

impl From<GridField> for RelativeVorticityField {
    fn from(g: GridField) -> Self {
        Self::Grid(g)
    }
}

/// Meridian velocity `(u_r, u_z)`; the swirl component does not exist.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    pub u_r: f64,
    pub u_z: f64,
}

impl VelocitySample {
    pub fn norm(&self) -> f64 {
        self.u_r.hypot(self.u_z)
    }
}

/// `B_R x [-R, R]`: the disk of radius `R` times an axial interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderRegion {
    pub radius: f64,
}

impl CylinderRegion {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("cylinder radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn contains(&self, r: f64, z: f64) -> bool {
        r <= self.radius && z.abs() <= self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `B_R x [-R, R]` with the 3D measure `2 pi r dr dz`.
    Cylinder(CylinderRegion),
    /// `[0, R] x [-R, R]` with the flat measure `dr dz`.
    HalfPlaneRect { radius: f64 },
    /// All samples, 3D measure.
    WholeSpace,
}

impl Region {
    pub fn cylinder(radius: f64) -> Self {
        Region::Cylinder(CylinderRegion { radius })
    }

    pub fn contains(&self, r: f64, z: f64) -> bool {
        match *self {
            Region::Cylinder(c) => c.contains(r, z),
            Region::HalfPlaneRect { radius } => r <= radius && z.abs() <= radius,
            Region::WholeSpace => true,
        }
    }

    fn flat(&self) -> bool {
        matches!(self, Region::HalfPlaneRect { .. })
    }

    fn radius(&self) -> Option<f64> {
        match *self {
            Region::Cylinder(c) => Some(c.radius),
            Region::HalfPlaneRect { radius } => Some(radius),
            Region::WholeSpace => None,
        }
    }
}

/// An `L^p` request: exponent (`f64::INFINITY` allowed) and region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub p: f64,
    pub region: Region,
}

impl NormSpec {
    pub fn new(p: f64, region: Region) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::invalid(format!("norm exponent must be >= 1, got {p}")));
        }
        Ok(Self { p, region })
    }

    pub fn whole(p: f64) -> Self {
        Self { p, region: Region::WholeSpace }
    }

    pub fn cylinder(p: f64, radius: f64) -> Self {
        Self { p, region: Region::cylinder(radius) }
    }
}

/// One quadrature sample of a meridian field.
#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub r: f64,
    pub z: f64,
    /// Magnitude of the field at the sample.
    pub value: f64,
    /// Weight for the 3D measure `2 pi r dr dz`.
    pub cyl_weight: f64,
    /// Weight for the flat measure `dr dz`.
    pub flat_weight: f64,
}

/// Anything that can be reduced to a quadrature set in the meridian plane.
pub trait SampledField {
    fn for_each_sample(&self, f: &mut dyn FnMut(Sample));

    /// `(r_max, z_min, z_max)` covered by the samples, or `None` when the
    /// field is zero outside its samples (particles).
    fn extent(&self) -> Option<(f64, f64, f64)>;

    fn sample_count(&self) -> usize;
}

impl SampledField for ParticleField {
    fn for_each_sample(&self, f: &mut dyn FnMut(Sample)) {
        for p in &self.particles {
            let flat = if p.pos.r > 0.0 { p.vol / (2.0 * PI * p.pos.r) } else { 0.0 };
            f(Sample { r: p.pos.r, z: p.pos.z, value: p.q.abs(), cyl_weight: p.vol, flat_weight: flat });
        }
    }

    fn extent(&self) -> Option<(f64, f64, f64)> {
        None
    }

    fn sample_count(&self) -> usize {
        self.len()
    }
}

impl SampledField for GridField {
    fn for_each_sample(&self, f: &mut dyn FnMut(Sample)) {
        let l = &self.lattice;
        let area = l.h * l.h;
        for j in 0..l.nz {
            for i in 0..l.nr {
                f(Sample {
                    r: l.r(i),
                    z: l.z(j),
                    value: self.at(i, j).abs(),
                    cyl_weight: l.cell_volume(i),
                    flat_weight: area,
                });
            }
        }
    }

    fn extent(&self) -> Option<(f64, f64, f64)> {
        Some((self.lattice.r_max, self.lattice.z_min, self.lattice.z_max))
    }

    fn sample_count(&self) -> usize {
        self.values.len()
    }
}

impl SampledField for RelativeVorticityField {
    fn for_each_sample(&self, f: &mut dyn FnMut(Sample)) {
        match self {
            Self::Particles(p) => p.for_each_sample(f),
            Self::Grid(g) => g.for_each_sample(f),
        }
    }

    fn extent(&self) -> Option<(f64, f64, f64)> {
        match self {
            Self::Particles(p) => p.extent(),
            Self::Grid(g) => g.extent(),
        }
    }

    fn sample_count(&self) -> usize {
        match self {
            Self::Particles(p) => p.sample_count(),
            Self::Grid(g) => g.sample_count(),
        }
    }
}

/// `L^p` norm of a sampled meridian field over `spec.region`.
///
/// Cylinder and whole-space regions use `2 pi r dr dz`, the half-plane
/// rectangle uses `dr dz`; `p = inf` is the maximum over samples in the
/// region. Sums run in sample order, so the result is deterministic.
pub fn lp_norm(field: &dyn SampledField, spec: &NormSpec) -> Result<f64> {
    if !(spec.p >= 1.0) {
        return Err(Error::invalid(format!("norm exponent must be >= 1, got {}", spec.p)));
    }
    if field.sample_count() == 0 {
        return Err(Error::EmptyField);
    }
    if let (Some((r_max, z_min, z_max)), Some(radius)) = (field.extent(), spec.region.radius()) {
        let tol = 1e-12 * (radius + r_max);
        if r_max + tol < radius || z_min - tol > -radius || z_max + tol < radius {
            return Err(Error::RegionExceedsSupport);
        }
    }
    let flat = spec.region.flat();
    let p = spec.p;
    if p.is_infinite() {
        let mut sup = 0.0f64;
        field.for_each_sample(&mut |s| {
            if spec.region.contains(s.r, s.z) {
                sup = sup.max(s.value);
            }
        });
        return Ok(sup);
    }
    let mut acc = 0.0;
    field.for_each_sample(&mut |s| {
        if spec.region.contains(s.r, s.z) {
            let w = if flat { s.flat_weight } else { s.cyl_weight };
            let v = if p == 1.0 {
                s.value
            } else if p == 2.0 {
                s.value * s.value
            } else {
                s.value.powf(p)
            };
            acc += w * v;
        }
    });
    Ok(if p == 1.0 {
        acc
    } else if p == 2.0 {
        acc.sqrt()
    } else {
        acc.powf(1.0 / p)
    })
}

/// `max(||f||_1, ||f||_p)` over the whole space: the `L^1 cap L^p` norm.
pub fn l1_cap_lp(field: &dyn SampledField, p: f64) -> Result<f64> {
    let l1 = lp_norm(field, &NormSpec::whole(1.0))?;
    let lp = lp_norm(field, &NormSpec::whole(p))?;
    Ok(l1.max(lp))
}
