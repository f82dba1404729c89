//! Empirical constants of the a priori estimates over a three-level
//! refinement ladder, with the boundedness verdict for each.

use axiflow::estimates::{ladder_verdicts, run_ladder, EstimateId, Ladder};
use axiflow::initdata::DataFamily;

fn main() -> axiflow::Result<()> {
    let family = DataFamily::named("gaussian_ring")?;
    let ladder = Ladder::default();
    for (id, p) in [(EstimateId::VelocityLp, 1.5), (EstimateId::TildeUHalfplane, 1.5), (EstimateId::UrOverR, 2.0), (EstimateId::GradientLp, 1.5)] {
        let reports = run_ladder(id, &family, p, 1.0, &ladder)?;
        for (name, v) in ladder_verdicts(&reports, 0.1)? {
            let cs: Vec<String> = v.constants.iter().map(|c| format!("{c:.5}")).collect();
            println!("{name:<28} p = {p:<4} C = [{}]  finest change {:.1}%", cs.join(", "), 100.0 * v.finest_variation);
        }
    }
    Ok(())
}
