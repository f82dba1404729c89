//! Values frozen from independent high-precision evaluations (mpmath at 30
//! digits for one-dimensional integrals, scipy `dblquad` with the
//! `ellipk`/`ellipe` closed form for the stream function).

#![allow(clippy::excessive_precision)]

use axiflow::fields::{lp_norm, GridField, Lattice, MeridianPoint, NormSpec, RelativeVorticityField};
use axiflow::initdata::{make_initial, DataFamily};
use axiflow::kernel::{angular_kernel_elliptic, angular_kernel_quadrature, stream_eval, velocity_eval, KernelConfig};

fn pt(r: f64, z: f64) -> MeridianPoint {
    MeridianPoint::new(r, z).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// (r_x, r_y, z_x - z_y, delta) -> (F, dF/dr_x, dF/dz_x)
type Row = ((f64, f64, f64, f64), (f64, f64, f64));

const KERNEL_TABLE: [Row; 6] = [
    ((1.0, 0.8, 0.3, 0.0), (2.388_397_955_217_325_1, -3.217_306_474_331_280_2, -4.495_794_437_161_372_6)),
    ((0.5, 2.0, -1.0, 0.1), (0.279_944_693_530_472_03, 0.558_373_346_251_695_05, 0.176_117_235_248_354_43)),
    ((0.001, 1.0, 0.2, 0.0), (0.002_962_101_869_401_791_6, 2.962_103_594_739_256_7, -0.001_708_907_231_426_242_7)),
    ((1.0, 1.0, 0.001, 0.0), (13.974_396_886_522_521, -5.987_201_500_959_616_7, -1_999.993_884_603_287_3)),
    ((3.0, 0.2, 0.0, 0.05), (0.069_900_527_111_001_416, -0.046_658_649_582_375_945, 0.0)),
    ((1.0, 1.0, 0.0, 0.05), (6.154_792_366_096_512_2, -2.081_371_520_633_621_7, 0.0)),
];

#[test]
fn kernel_table_elliptic_path() {
    for ((rx, ry, dz, d), (f, fr, fz)) in KERNEL_TABLE {
        let v = angular_kernel_elliptic(&pt(rx, dz), &pt(ry, 0.0), d).unwrap();
        let scale = f.abs() + fr.abs() + fz.abs();
        assert!((v.f - f).abs() <= 1e-13 * scale, "F at {rx},{ry},{dz},{d}: {} vs {f}", v.f);
        assert!((v.df_dr - fr).abs() <= 1e-12 * scale, "dF_dr at {rx},{ry},{dz},{d}: {} vs {fr}", v.df_dr);
        assert!((v.df_dz - fz).abs() <= 1e-12 * scale, "dF_dz at {rx},{ry},{dz},{d}: {} vs {fz}", v.df_dz);
    }
}

#[test]
fn kernel_table_quadrature_path() {
    let tol = 1e-11;
    for ((rx, ry, dz, d), (f, fr, fz)) in KERNEL_TABLE {
        let cfg = KernelConfig { quad_tol: tol, use_elliptic: false, blob_delta: d, ..KernelConfig::default() };
        let v = angular_kernel_quadrature(&pt(rx, dz), &pt(ry, 0.0), &cfg).unwrap();
        let scale = 1.0 + f.abs() + fr.abs() + fz.abs();
        assert!((v.f - f).abs() <= 10.0 * tol * scale, "F {} vs {f}", v.f);
        assert!((v.df_dr - fr).abs() <= 10.0 * tol * scale, "dF_dr {} vs {fr}", v.df_dr);
        assert!((v.df_dz - fz).abs() <= 10.0 * tol * scale, "dF_dz {} vs {fz}", v.df_dz);
    }
}

fn ring_grid(h: f64) -> GridField {
    make_initial(&DataFamily::named("gaussian_ring").unwrap(), &Lattice::new(2.5, -1.5, 1.5, h).unwrap()).unwrap()
}

#[test]
fn gaussian_ring_norms() {
    // integral of exp(-((r-1)^2 + z^2)/w^2) over R^3, w = 1/4; the L^2 norm is pi/4
    const L1: f64 = 1.233_700_550_417_166_9;
    const L2: f64 = std::f64::consts::FRAC_PI_4;
    let g = ring_grid(0.05);
    assert!(rel(lp_norm(&g, &NormSpec::whole(1.0)).unwrap(), L1) < 1e-9);
    assert!(rel(lp_norm(&g, &NormSpec::whole(2.0)).unwrap(), L2) < 1e-9);
}

/// Midpoint-rule error at spacings `h` and `h/2`: the finer error must be
/// below `tol` and the pair must show second-order decay.
fn assert_second_order(norm: impl Fn(f64) -> f64, exact: f64, h: f64, tol: f64) {
    let (e1, e2) = (rel(norm(h), exact), rel(norm(h / 2.0), exact));
    assert!(e2 < tol, "error {e2:e} at h = {}", h / 2.0);
    assert!((3.5..4.5).contains(&(e1 / e2)), "ratio {}", e1 / e2);
}

#[test]
fn gaussian_norm_on_cylinder() {
    // ||exp(-r^2 - z^2)||_{L^2(Cyl(2))}
    const NORM: f64 = 1.402_824_349_991_601_8;
    let norm = |h| {
        let g = GridField::from_fn(Lattice::new(2.0, -2.0, 2.0, h).unwrap(), |r, z| (-r * r - z * z).exp());
        lp_norm(&g, &NormSpec::cylinder(2.0, 2.0)).unwrap()
    };
    assert_second_order(norm, NORM, 0.025, 2e-5);
}

#[test]
fn near_sheet_norms_on_unit_cylinder() {
    const L1: f64 = 0.517_367_536_672_789_86;
    const L4_3: f64 = 0.446_331_711_702_115_89;
    let sheet = |h| make_initial(&DataFamily::named("near_sheet").unwrap(), &Lattice::new(8.0, -1.5, 1.5, h).unwrap()).unwrap();
    assert_second_order(|h| lp_norm(&sheet(h), &NormSpec::cylinder(1.0, 1.0)).unwrap(), L1, 0.025, 1e-4);
    assert_second_order(|h| lp_norm(&sheet(h), &NormSpec::cylinder(4.0 / 3.0, 1.0)).unwrap(), L4_3, 0.025, 1e-4);
}

#[test]
fn stream_function_of_gaussian_ring() {
    // scipy dblquad over [0,3] x [-2,2] at (0.3, 0.9), velocity by
    // Richardson-extrapolated central differences of psi
    const PSI: f64 = 0.006_014_384_296_782_58;
    const U_R: f64 = 0.008_687_401_927_469_593;
    const U_Z: f64 = 0.039_235_390_852_128_15;
    let field: RelativeVorticityField = ring_grid(0.025).into();
    let cfg = KernelConfig::default();
    let x = pt(0.3, 0.9);
    assert!(rel(stream_eval(&field, &x, &cfg).unwrap(), PSI) < 1e-7);
    let u = velocity_eval(&field, &x, &cfg).unwrap();
    assert!(rel(u.u_r, U_R) < 1e-6, "{}", u.u_r);
    assert!(rel(u.u_z, U_Z) < 1e-6, "{}", u.u_z);
}
