//! Angular kernel F(x, y) and its x-derivatives, evaluated through the
//! elliptic-integral path and the adaptive quadrature oracle side by side.

use axiflow::fields::MeridianPoint;
use axiflow::kernel::{angular_kernel_elliptic, angular_kernel_quadrature, KernelConfig};

fn main() -> axiflow::Result<()> {
    let cases = [(1.0, 0.8, 0.3, 0.0), (0.5, 2.0, -1.0, 0.1), (1.0, 1.0, 0.001, 0.0), (3.0, 0.2, 0.0, 0.05)];
    println!("{:>6} {:>6} {:>7} {:>5} | {:>22} {:>22} {:>22} | {:>9}", "r_x", "r_y", "dz", "delta", "F", "dF/dr", "dF/dz", "|diff|");
    for (rx, ry, dz, delta) in cases {
        let x = MeridianPoint::new(rx, dz)?;
        let y = MeridianPoint::new(ry, 0.0)?;
        let e = angular_kernel_elliptic(&x, &y, delta)?;
        let q = angular_kernel_quadrature(&x, &y, &KernelConfig { quad_tol: 1e-11, ..KernelConfig::with_delta(delta) })?;
        let diff = (e.f - q.f).abs().max((e.df_dr - q.df_dr).abs()).max((e.df_dz - q.df_dz).abs());
        println!("{rx:>6} {ry:>6} {dz:>7} {delta:>5} | {:>22.15e} {:>22.15e} {:>22.15e} | {diff:>9.2e}", e.f, e.df_dr, e.df_dz);
    }
    Ok(())
}
