//! Build regularised initial data and write it in both on-disk formats.

use axiflow::cli::make_data;
use axiflow::fields::io::{grid_to_json, write_particles_csv};
use axiflow::fields::{lp_norm, NormSpec};
use axiflow::initdata::DataFamily;

fn main() -> axiflow::Result<()> {
    let dir = std::env::temp_dir().join("axiflow_make_data");
    std::fs::create_dir_all(&dir)?;
    let grid = make_data(&DataFamily::named("near_sheet")?, 0.1, Some(0.3))?;
    std::fs::write(dir.join("sheet.json"), grid_to_json(&grid)?)?;
    let particles = grid.to_particles_above(1e-12);
    write_particles_csv(&particles, std::fs::File::create(dir.join("sheet.csv"))?)?;
    println!("{} nodes, {} particles above floor", grid.values.len(), particles.len());
    println!("||q||_L1 = {:.6}, ||q||_L2 = {:.6}", lp_norm(&grid, &NormSpec::whole(1.0))?, lp_norm(&grid, &NormSpec::whole(2.0))?);
    println!("wrote {}", dir.display());
    Ok(())
}
