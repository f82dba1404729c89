//! Mollify near-sheet data at decreasing eps, evolve each, and compare
//! successive velocity fields in L^2(0, T; Cyl(R)).

use axiflow::cli::default_study;
use axiflow::harness::epsilon_study_table;
use axiflow::initdata::DataFamily;

fn main() -> axiflow::Result<()> {
    let family = DataFamily::named("near_sheet")?;
    let cfg = default_study(&family, 0.1, 8.0, 0.1, 0.05, vec![0.5, 1.0], 0.1)?;
    let rep = epsilon_study_table(&family, &[0.8, 0.4, 0.2], &cfg)?;
    println!("{}", rep.table());
    println!("particles per run {:?}, Cauchy: {}", rep.particles, rep.is_cauchy());
    Ok(())
}
