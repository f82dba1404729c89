//! Recover psi = r^2 exp(-r^2 - z^2) and its velocity from the matching
//! vorticity and watch the error fall at second order.

use axiflow::fields::{Lattice, MeridianPoint, RelativeVorticityField};
use axiflow::initdata::{make_initial, manufactured, DataFamily};
use axiflow::kernel::{stream_at, velocity_at, KernelConfig};

fn main() -> axiflow::Result<()> {
    let probes: Vec<MeridianPoint> = (-10..=10).flat_map(|j| (1..=10).map(move |i| MeridianPoint { r: 0.2 * i as f64, z: 0.2 * j as f64 })).collect();
    let cfg = KernelConfig::default();
    let mut prev: Option<f64> = None;
    for h in [0.1, 0.05, 0.025] {
        let field: RelativeVorticityField = make_initial(&DataFamily::Manufactured, &Lattice::new(5.0, -5.0, 5.0, h)?)?.to_particles().into();
        let psi = stream_at(&field, &probes, &cfg)?;
        let u = velocity_at(&field, &probes, &cfg)?;
        let (mut e_psi, mut n_psi, mut e_u, mut n_u) = (0.0, 0.0, 0.0, 0.0);
        for (k, x) in probes.iter().enumerate() {
            let exact = manufactured::psi(x.r, x.z);
            let (ur, uz) = manufactured::velocity(x.r, x.z);
            e_psi += x.r * (psi[k] - exact).powi(2);
            n_psi += x.r * exact * exact;
            e_u += x.r * ((u[k].u_r - ur).powi(2) + (u[k].u_z - uz).powi(2));
            n_u += x.r * (ur * ur + uz * uz);
        }
        let err = (e_psi / n_psi).sqrt();
        let ratio = prev.map(|p| format!("{:.2}", p / err)).unwrap_or_else(|| "-".into());
        println!("h = {h:<6} psi error {err:.3e}  velocity error {:.3e}  ratio {ratio}", (e_u / n_u).sqrt());
        prev = Some(err);
    }
    Ok(())
}
