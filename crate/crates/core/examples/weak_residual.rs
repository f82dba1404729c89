//! Weak-form residual of a computed ring trajectory against the built-in
//! test functions, at two resolutions.

use axiflow::fields::Lattice;
use axiflow::harness::{weak_residual, WeakTestFunction};
use axiflow::initdata::{make_initial, DataFamily};
use axiflow::kernel::KernelConfig;
use axiflow::transport::{simulate, Integrator, SimConfig};

fn main() -> axiflow::Result<()> {
    let t_end = 0.5;
    let tests = WeakTestFunction::builtin(t_end);
    for h in [0.1, 0.05] {
        let data = make_initial(&DataFamily::named("gaussian_ring")?, &Lattice::new(2.5, -1.5, 1.5, h)?)?;
        let mut cfg = SimConfig::new(h / 2.0, t_end, Integrator::Rk2, KernelConfig::with_delta(2.0 * h));
        cfg.snapshot_every = 1;
        let rec = simulate(&data.to_particles_above(1e-12).into(), &cfg)?;
        let rep = weak_residual(&rec, &tests, 32)?;
        let cells: Vec<String> = rep.labels.iter().zip(&rep.residuals).map(|(l, r)| format!("{l} {r:+.3e}")).collect();
        println!("h = {h}: {}", cells.join("  "));
    }
    Ok(())
}
