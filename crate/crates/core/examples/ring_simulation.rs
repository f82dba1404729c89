//! Transport a Gaussian vortex ring with periodic remeshing and print the
//! monitored norms, impulse and divergence residual.

use axiflow::fields::{Lattice, NormSpec, RemeshKernel};
use axiflow::initdata::{make_initial, DataFamily};
use axiflow::kernel::KernelConfig;
use axiflow::transport::{simulate, Integrator, SimConfig};

fn main() -> axiflow::Result<()> {
    let h = 0.05;
    let data = make_initial(&DataFamily::named("gaussian_ring")?, &Lattice::new(2.5, -1.5, 1.5, h)?)?;
    let mut cfg = SimConfig::new(0.05, 1.0, Integrator::Rk2, KernelConfig::with_delta(2.0 * h));
    cfg.remesh_every = 5;
    cfg.remesh_grid = Some(Lattice::new(3.0, -2.5, 2.5, h)?);
    cfg.remesh_floor = 1e-12;
    cfg.remesh_kernel = RemeshKernel::M6Prime;
    cfg.monitor_norms = vec![NormSpec::whole(1.0), NormSpec::whole(2.0), NormSpec::cylinder(2.0, 1.0)];
    cfg.probe_grid = Some(Lattice::new(1.6, -0.8, 0.8, 0.02)?);
    cfg.snapshot_every = 5;
    let rec = simulate(&data.to_particles_above(1e-12).into(), &cfg)?;
    println!("{:>5} {:>6} {:>6} {:>14} {:>14} {:>14} {:>12} {:>10}", "step", "t", "N", "L1", "L2", "L2(Cyl 1)", "impulse", "div");
    for m in &rec.monitors {
        let div = m.divergence_residual.map(|d| format!("{d:.2e}")).unwrap_or_default();
        println!("{:>5} {:>6.2} {:>6} {:>14.10} {:>14.10} {:>14.10} {:>12.8} {:>10}", m.step, m.time, m.particles, m.norms[0], m.norms[1], m.norms[2], m.impulse, div);
    }
    println!("{} remesh events", rec.remesh_events.len());
    Ok(())
}
