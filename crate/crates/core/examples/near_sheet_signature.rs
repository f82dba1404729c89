//! Data near a vortex sheet: the local L^4 norm of the velocity stays put
//! under refinement while the L^2 norm over growing cylinders keeps rising.

use axiflow::estimates::{energy_growth, run_ladder, EstimateConfig, EstimateId, Ladder};
use axiflow::fields::{Lattice, RelativeVorticityField};
use axiflow::initdata::{make_initial, DataFamily};
use axiflow::kernel::KernelConfig;

fn main() -> axiflow::Result<()> {
    let sheet = DataFamily::named("near_sheet")?;
    for r in run_ladder(EstimateId::HighIntegrability, &sheet, 4.0 / 3.0, 1.0, &Ladder { base_h: 0.2, ..Ladder::default() })? {
        println!("level {} ||u||_L4(Cyl 1) = {:.5}  C = {:.5}", r.refinement_level, r.lhs, r.empirical_c);
    }
    let field: RelativeVorticityField = make_initial(&sheet, &Lattice::new(16.0, -1.5, 1.5, 0.1)?)?.to_particles_above(1e-12).into();
    let g = energy_growth(&field, &[1.0, 2.0, 4.0, 8.0], &EstimateConfig::new(KernelConfig::with_delta(0.1), 0.2))?;
    for (r, (n, e)) in g.radii.iter().zip(g.norms.iter().zip(&g.shell_energies)) {
        println!("R = {r:<3} ||u||_L2(Cyl R) = {n:.5}  shell energy {e:.5}");
    }
    println!("unbounded signature: {}", g.unbounded_signature());
    Ok(())
}
