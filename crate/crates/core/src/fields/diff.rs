use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{GridField, Lattice, Sample, SampledField, VelocitySample};
use crate::error::{Error, Result};

/// Meridian velocity sampled on a [`Lattice`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub lattice: Lattice,
    pub u_r: Vec<f64>,
    pub u_z: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(lattice: Lattice, u_r: Vec<f64>, u_z: Vec<f64>) -> Result<Self> {
        if u_r.len() != lattice.len() || u_z.len() != lattice.len() {
            return Err(Error::invalid("velocity grid size mismatch"));
        }
        Ok(Self { lattice, u_r, u_z })
    }

    pub fn from_samples(lattice: Lattice, samples: &[VelocitySample]) -> Result<Self> {
        Self::new(
            lattice,
            samples.iter().map(|s| s.u_r).collect(),
            samples.iter().map(|s| s.u_z).collect(),
        )
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(f64, f64) -> VelocitySample) -> Self {
        let mut u_r = Vec::with_capacity(lattice.len());
        let mut u_z = Vec::with_capacity(lattice.len());
        for j in 0..lattice.nz {
            for i in 0..lattice.nr {
                let v = f(lattice.r(i), lattice.z(j));
                u_r.push(v.u_r);
                u_z.push(v.u_z);
            }
        }
        Self { lattice, u_r, u_z }
    }

    pub fn at(&self, i: usize, j: usize) -> VelocitySample {
        let k = self.lattice.index(i, j);
        VelocitySample { u_r: self.u_r[k], u_z: self.u_z[k] }
    }

    /// Pointwise magnitude `|u|` as a scalar grid.
    pub fn magnitude(&self) -> GridField {
        GridField {
            lattice: self.lattice,
            values: self.u_r.iter().zip(&self.u_z).map(|(a, b)| a.hypot(*b)).collect(),
        }
    }

    /// Pointwise difference `self - other` on the same lattice.
    pub fn difference(&self, other: &VelocityGrid) -> Result<VelocityGrid> {
        if self.lattice != other.lattice {
            return Err(Error::invalid("velocity grids live on different lattices"));
        }
        Ok(VelocityGrid {
            lattice: self.lattice,
            u_r: self.u_r.iter().zip(&other.u_r).map(|(a, b)| a - b).collect(),
            u_z: self.u_z.iter().zip(&other.u_z).map(|(a, b)| a - b).collect(),
        })
    }
}

impl SampledField for VelocityGrid {
    fn for_each_sample(&self, f: &mut dyn FnMut(Sample)) {
        let l = &self.lattice;
        let area = l.h * l.h;
        for j in 0..l.nz {
            for i in 0..l.nr {
                let k = l.index(i, j);
                f(Sample {
                    r: l.r(i),
                    z: l.z(j),
                    value: self.u_r[k].hypot(self.u_z[k]),
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
        self.lattice.len()
    }
}

/// First derivative along one lattice axis. `even_at_start` applies the axis
/// reflection (ghost node `-1` mirrors node `0`); other ends use the
/// second-order one-sided stencil.
#[inline]
fn d1(f: impl Fn(usize) -> f64, k: usize, n: usize, h: f64, even_at_start: bool) -> f64 {
    if k == 0 {
        if even_at_start {
            (f(1) - f(0)) / (2.0 * h)
        } else {
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
        }
    } else if k == n - 1 {
        (3.0 * f(k) - 4.0 * f(k - 1) + f(k - 2)) / (2.0 * h)
    } else {
        (f(k + 1) - f(k - 1)) / (2.0 * h)
    }
}

/// Discrete divergence `d_r(r u_r) + d_z(r u_z)` at every node.
pub fn divergence_field(u: &VelocityGrid) -> Result<GridField> {
    let l = u.lattice;
    if l.nr < 3 || l.nz < 3 {
        return Err(Error::StencilTooSmall { nr: l.nr, nz: l.nz });
    }
    let mut values = Vec::with_capacity(l.len());
    for j in 0..l.nz {
        for i in 0..l.nr {
            // r u_r is even across the axis because u_r is odd.
            let dr = d1(|ii| l.r(ii) * u.u_r[l.index(ii, j)], i, l.nr, l.h, true);
            let ri = l.r(i);
            let dz = d1(|jj| ri * u.u_z[l.index(i, jj)], j, l.nz, l.h, false);
            values.push(dr + dz);
        }
    }
    GridField::new(l, values)
}

/// Cylindrical-measure `L^2` norm of `d_r(r u_r) + d_z(r u_z)`, centred
/// differences in the interior, reflection at the axis row and one-sided
/// stencils at the outer edges.
pub fn divergence_residual(u: &VelocityGrid) -> Result<f64> {
    let div = divergence_field(u)?;
    let l = div.lattice;
    let mut acc = 0.0;
    for j in 0..l.nz {
        for i in 0..l.nr {
            let d = div.at(i, j);
            acc += d * d * 2.0 * PI * l.r(i) * l.h * l.h;
        }
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(h: f64) -> Lattice {
        Lattice::new(2.0, -2.0, 2.0, h).unwrap()
    }

    #[test]
    fn zero_and_translation_fields_are_divergence_free() {
        let l = lattice(0.1);
        let zero = VelocityGrid::from_fn(l, |_, _| VelocitySample::default());
        assert_eq!(divergence_residual(&zero).unwrap(), 0.0);
        let axial = VelocityGrid::from_fn(l, |_, _| VelocitySample { u_r: 0.0, u_z: 1.0 });
        assert!(divergence_residual(&axial).unwrap() < 1e-13);
    }

    #[test]
    fn too_small_grid_is_rejected() {
        let l = Lattice::with_counts(2, 10, 0.0, 0.1).unwrap();
        let u = VelocityGrid::from_fn(l, |_, _| VelocitySample::default());
        assert!(matches!(divergence_residual(&u), Err(Error::StencilTooSmall { .. })));
    }

    // u = curl(psi e_theta) for psi = r exp(-r^2 - z^2) is exactly solenoidal;
    // the discrete residual must fall by ~4x per halving.
    #[test]
    fn analytic_solenoidal_field_converges_at_second_order() {
        let field = |r: f64, z: f64| {
            let e = (-r * r - z * z).exp();
            VelocitySample { u_r: 2.0 * z * r * e, u_z: (2.0 - 2.0 * r * r) * e }
        };
        let res: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| divergence_residual(&VelocityGrid::from_fn(lattice(h), field)).unwrap())
            .collect();
        let r1 = res[0] / res[1];
        let r2 = res[1] / res[2];
        assert!((3.5..4.5).contains(&r1) && (3.5..4.5).contains(&r2), "{res:?}");
    }
}
