//! Initial data: built-in vorticity families, mollification and cut-off.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GridField, Lattice};
use crate::kernel::quadrature;

/// Built-in families of `q = omega_theta / r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DataFamily {
    /// `A exp(-((r - r_c)^2 + (z - z_c)^2) / w^2)`.
    GaussianRing { center_r: f64, center_z: f64, width: f64, amplitude: f64 },
    /// Two Gaussian rings of common width.
    DoubleRing { r1: f64, z1: f64, a1: f64, r2: f64, z2: f64, a2: f64, width: f64 },
    /// `A (1 + (r / r0)^2)^(-a/2) exp(-z^2 / w^2)`: a thin layer around
    /// `z = 0` decaying slowly in `r`. For `2 < a <= 5/2` the field lies in
    /// every `L^p`, `p >= 1`, but its kinetic energy is infinite.
    NearSheet { amplitude: f64, r0: f64, decay: f64, z_width: f64 },
    /// `q*` of the stream function `psi* = r^2 exp(-r^2 - z^2)`.
    Manufactured,
}

impl DataFamily {
    pub fn gaussian_ring(center_r: f64, center_z: f64, width: f64, amplitude: f64) -> Self {
        Self::GaussianRing { center_r, center_z, width, amplitude }
    }

    pub fn near_sheet(amplitude: f64, decay: f64) -> Self {
        Self::NearSheet { amplitude, r0: 0.5, decay, z_width: 0.25 }
    }

    /// Family with its default parameters.
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "gaussian_ring" => Self::gaussian_ring(1.0, 0.0, 0.25, 1.0),
            "double_ring" => Self::DoubleRing { r1: 0.8, z1: -0.5, a1: 1.0, r2: 1.2, z2: 0.5, a2: 1.0, width: 0.25 },
            "near_sheet" => Self::near_sheet(1.0, 2.2),
            "manufactured" => Self::Manufactured,
            other => return Err(Error::invalid(format!("unknown data family {other:?}"))),
        })
    }

    /// Family `name` with defaults overridden by the keys of the JSON
    /// object `params`.
    pub fn with_params(name: &str, params: Option<&str>) -> Result<Self> {
        let base = Self::named(name)?;
        let Some(text) = params else { return Ok(base) };
        let mut v = serde_json::to_value(&base)?;
        let extra: serde_json::Value = serde_json::from_str(text)?;
        let (Some(obj), Some(over)) = (v.as_object_mut(), extra.as_object()) else {
            return Err(Error::invalid("family parameters must be a JSON object"));
        };
        for (k, val) in over {
            if k == "name" || !obj.contains_key(k) {
                return Err(Error::invalid(format!("unknown parameter {k:?} for {name}")));
            }
            obj.insert(k.clone(), val.clone());
        }
        let fam: Self = serde_json::from_value(v)?;
        fam.validate()?;
        Ok(fam)
    }

    /// `(r_max, z_min, z_max)` of a lattice carrying the data to well below
    /// double precision relative to its peak (the near-sheet family is cut
    /// at a finite radius).
    pub fn default_extent(&self) -> (f64, f64, f64) {
        match self {
            Self::GaussianRing { .. } => (2.5, -1.5, 1.5),
            Self::DoubleRing { .. } => (2.5, -2.0, 2.0),
            Self::NearSheet { .. } => (8.0, -1.5, 1.5),
            Self::Manufactured => (5.0, -5.0, 5.0),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::GaussianRing { .. } => "gaussian_ring",
            Self::DoubleRing { .. } => "double_ring",
            Self::NearSheet { .. } => "near_sheet",
            Self::Manufactured => "manufactured",
        }
    }

    /// Whether the induced velocity has finite kinetic energy.
    pub fn finite_energy(&self) -> bool {
        match *self {
            Self::NearSheet { decay, .. } => decay > 2.5,
            _ => true,
        }
    }

    /// Parameter checks, including integrability of `q`.
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        let finite = |v: f64, what: &str| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be finite")))
            }
        };
        match *self {
            Self::GaussianRing { center_r, center_z, width, amplitude } => {
                positive(width, "width")?;
                finite(center_r, "center_r")?;
                finite(center_z, "center_z")?;
                finite(amplitude, "amplitude")
            }
            Self::DoubleRing { r1, z1, a1, r2, z2, a2, width } => {
                positive(width, "width")?;
                for (v, w) in [(r1, "r1"), (z1, "z1"), (a1, "a1"), (r2, "r2"), (z2, "z2"), (a2, "a2")] {
                    finite(v, w)?;
                }
                Ok(())
            }
            Self::NearSheet { amplitude, r0, decay, z_width } => {
                positive(r0, "r0")?;
                positive(z_width, "z_width")?;
                finite(amplitude, "amplitude")?;
                // int (1 + r^2)^(-a/2) r dr < inf  iff  a > 2
                if !(decay > 2.0) {
                    return Err(Error::NonIntegrable { norm: "L1".into() });
                }
                Ok(())
            }
            Self::Manufactured => Ok(()),
        }
    }

    /// `q(r, z)`.
    pub fn eval(&self, r: f64, z: f64) -> f64 {
        match *self {
            Self::GaussianRing { center_r, center_z, width, amplitude } => {
                amplitude * (-((r - center_r).powi(2) + (z - center_z).powi(2)) / (width * width)).exp()
            }
            Self::DoubleRing { r1, z1, a1, r2, z2, a2, width } => {
                let w2 = width * width;
                a1 * (-((r - r1).powi(2) + (z - z1).powi(2)) / w2).exp() + a2 * (-((r - r2).powi(2) + (z - z2).powi(2)) / w2).exp()
            }
            Self::NearSheet { amplitude, r0, decay, z_width } => {
                amplitude * (1.0 + (r / r0).powi(2)).powf(-0.5 * decay) * (-(z / z_width).powi(2)).exp()
            }
            Self::Manufactured => manufactured::q(r, z),
        }
    }
}

/// The manufactured pair `psi* = r^2 exp(-r^2 - z^2)` and
/// `omega* = -(d_zz psi* + d_r(d_r psi* + psi*/r))`.
///
/// `omega*(0, z) = -3 exp(-z^2)` does not vanish on the axis, so `q*` grows
/// like `-3/r` there; `q* r^2` is still smooth and integrable.
pub mod manufactured {
    pub fn psi(r: f64, z: f64) -> f64 {
        r * r * (-r * r - z * z).exp()
    }

    pub fn omega(r: f64, z: f64) -> f64 {
        let r2 = r * r;
        -(3.0 - 14.0 * r2 + 4.0 * r2 * r2 + 4.0 * r2 * z * z) * (-r2 - z * z).exp()
    }

    pub fn q(r: f64, z: f64) -> f64 {
        omega(r, z) / r
    }

    /// `(u_r, u_z) = (-d_z psi*, d_r psi* + psi*/r)`.
    pub fn velocity(r: f64, z: f64) -> (f64, f64) {
        let e = (-r * r - z * z).exp();
        (2.0 * z * r * r * e, (3.0 * r - 2.0 * r * r * r) * e)
    }

    /// `[[d_r u_r, d_z u_r], [d_r u_z, d_z u_z]]`.
    pub fn gradient(r: f64, z: f64) -> [[f64; 2]; 2] {
        let e = (-r * r - z * z).exp();
        let (r2, r3) = (r * r, r * r * r);
        [
            [(4.0 * z * r - 4.0 * z * r3) * e, (2.0 * r2 - 4.0 * z * z * r2) * e],
            [(3.0 - 12.0 * r2 + 4.0 * r2 * r2) * e, -2.0 * z * (3.0 * r - 2.0 * r3) * e],
        ]
    }
}

/// Sample `family` on the nodes of `lattice`.
pub fn make_initial(family: &DataFamily, lattice: &Lattice) -> Result<GridField> {
    make_dilated(family, 1.0, lattice)
}

/// `q_lambda(r, z) = q(lambda r, lambda z)` on the nodes of `lattice`.
pub fn make_dilated(family: &DataFamily, lambda: f64, lattice: &Lattice) -> Result<GridField> {
    family.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::invalid("dilation factor must be positive"));
    }
    let g = GridField::from_fn(*lattice, |r, z| family.eval(lambda * r, lambda * z));
    if g.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonIntegrable { norm: "L_inf".into() });
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// `exp(-1 / (1 - s^2))`
    Standard,
    /// `(1 - s^2)^2`
    Quartic,
}

impl BumpProfile {
    fn at(self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        match self {
            Self::Standard => (-1.0 / (1.0 - s * s)).exp(),
            Self::Quartic => (1.0 - s * s).powi(2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMode {
    /// `chi(eps |x|)`: plateau `|x| <= 1/eps`, support `|x| <= 2/eps`.
    Grow,
    /// `chi(|x| / eps)`: support `|x| <= 2 eps`.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub eps: f64,
    pub profile: BumpProfile,
    pub cutoff_mode: CutoffMode,
    /// `2 pi int_0^1 rho(s) s ds`, the mass of the unnormalised profile.
    pub profile_mass: f64,
}

impl MollifierSpec {
    pub fn new(eps: f64, profile: BumpProfile, cutoff_mode: CutoffMode) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        let m = quadrature::integrate(|s| [2.0 * PI * profile.at(s) * s], &[0.0, 0.5, 1.0], 1e-16, 4000)?;
        Ok(Self { eps, profile, cutoff_mode, profile_mass: m[0] })
    }

    pub fn standard(eps: f64) -> Result<Self> {
        Self::new(eps, BumpProfile::Standard, CutoffMode::Grow)
    }

    /// `rho_eps(x) = eps^-2 rho(|x| / eps) / mass` in the meridian plane.
    pub fn density(&self, dist: f64) -> f64 {
        self.profile.at(dist / self.eps) / (self.eps * self.eps * self.profile_mass)
    }

    /// Smooth cut-off: 1 on the plateau, 0 beyond twice its radius.
    pub fn chi(&self, dist: f64) -> f64 {
        let s = match self.cutoff_mode {
            CutoffMode::Grow => self.eps * dist,
            CutoffMode::Literal => dist / self.eps,
        };
        if s <= 1.0 {
            1.0
        } else if s >= 2.0 {
            0.0
        } else {
            let f = |t: f64| (-1.0 / t).exp();
            let (a, b) = (f(2.0 - s), f(s - 1.0));
            a / (a + b)
        }
    }

    /// Radius outside which the cut-off vanishes.
    pub fn support_radius(&self) -> f64 {
        match self.cutoff_mode {
            CutoffMode::Grow => 2.0 / self.eps,
            CutoffMode::Literal => 2.0 * self.eps,
        }
    }
}

/// Mollify `q` in the meridian plane.
///
/// The bump acts on `omega = q r`, extended oddly across the axis, and the
/// result is divided by `r` again: `q_eps = (rho_eps * omega) / r`. The
/// stencil weights are renormalised to unit sum, so this reproduces linear
/// `omega` exactly: constants in `q` survive to rounding, including next to
/// the axis, and `sum |q| vol` can only decrease. Values beyond the lattice
/// are taken as zero.
pub fn mollify(field: &GridField, spec: &MollifierSpec) -> Result<GridField> {
    let l = field.lattice;
    if l.h > 0.5 * spec.eps {
        return Err(Error::MollifierUnderResolved { h: l.h, eps: spec.eps });
    }
    let reach = (spec.eps / l.h).floor() as isize;
    let mut stencil = Vec::new();
    let mut total = 0.0;
    for b in -reach..=reach {
        for a in -reach..=reach {
            let d = ((a * a + b * b) as f64).sqrt() * l.h;
            let w = spec.density(d) * l.h * l.h;
            if w > 0.0 {
                stencil.push((a, b, w));
                total += w;
            }
        }
    }
    for s in stencil.iter_mut() {
        s.2 /= total;
    }
    let (nr, nz) = (l.nr as isize, l.nz as isize);
    let omega: Vec<f64> = (0..l.len()).map(|k| field.values[k] * l.r(k % l.nr)).collect();
    let mut out = vec![0.0; l.len()];
    for j in 0..nz {
        for i in 0..nr {
            let mut acc = 0.0;
            for &(a, b, w) in &stencil {
                let jj = j + b;
                if jj < 0 || jj >= nz {
                    continue;
                }
                let ii = i + a;
                let (src, sign) = if ii < 0 { (-1 - ii, -1.0) } else { (ii, 1.0) };
                if src >= nr {
                    continue;
                }
                acc += sign * w * omega[(jj * nr + src) as usize];
            }
            out[(j * nr + i) as usize] = acc / l.r(i as usize);
        }
    }
    GridField::new(l, out)
}

/// Multiply `q` by the radial cut-off `chi(|x|)`, `|x| = sqrt(r^2 + z^2)`.
pub fn cutoff(field: &GridField, spec: &MollifierSpec) -> GridField {
    let l = field.lattice;
    let mut out = field.clone();
    for j in 0..l.nz {
        for i in 0..l.nr {
            let k = l.index(i, j);
            out.values[k] *= spec.chi(l.r(i).hypot(l.z(j)));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// `chi_eps (rho_eps * q)`
    MollifyThenCutoff,
    /// `rho_eps * (chi_eps q)`
    CutoffThenMollify,
}

/// Regularised data `q_eps` in either composition order.
pub fn regularize(field: &GridField, spec: &MollifierSpec, order: Composition) -> Result<GridField> {
    match order {
        Composition::MollifyThenCutoff => Ok(cutoff(&mollify(field, spec)?, spec)),
        Composition::CutoffThenMollify => mollify(&cutoff(field, spec), spec),
    }
}
