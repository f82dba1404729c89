use axiflow::estimates::{verify_velocity_lp_estimate, EstimateConfig};
use axiflow::fields::io::{grid_from_json, grid_to_json, read_particles_csv, write_particles_csv};
use axiflow::fields::{lp_norm, remesh, RemeshOptions, GridField, Lattice, MeridianPoint, NormSpec, ParticleField, RelativeVorticityField, VelocitySample, VortexParticle};
use axiflow::harness::{weak_residual_with, TestShape, WeakTestFunction};
use axiflow::initdata::{make_initial, mollify, BumpProfile, CutoffMode, DataFamily, MollifierSpec};
use axiflow::kernel::{angular_kernel, angular_kernel_elliptic, angular_kernel_quadrature, KernelConfig};
use proptest::prelude::*;

fn pt(r: f64, z: f64) -> MeridianPoint {
    MeridianPoint::new(r, z).unwrap()
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

fn particles() -> impl Strategy<Value = ParticleField> {
    prop::collection::vec((0.01f64..3.0, -2.0f64..2.0, -5.0f64..5.0, 1e-6f64..1e-2), 1..40).prop_map(|v| {
        ParticleField::new(v.into_iter().map(|(r, z, q, vol)| VortexParticle::new(pt(r, z), q, vol).unwrap()).collect())
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn kernel_is_symmetric(rx in 0.01f64..5.0, ry in 0.01f64..5.0, dz in -3.0f64..3.0, d in 0.0f64..0.5) {
        prop_assume!(d > 0.0 || (rx - ry).abs() + dz.abs() > 1e-6);
        let a = angular_kernel_elliptic(&pt(rx, dz), &pt(ry, 0.0), d).unwrap().f;
        let b = angular_kernel_elliptic(&pt(ry, 0.0), &pt(rx, dz), d).unwrap().f;
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
    }

    #[test]
    fn kernel_vanishes_on_the_axis(ry in 0.0f64..5.0, zx in -3.0f64..3.0, d in 0.0f64..0.5) {
        prop_assume!(ry > 0.0 || zx.abs() > 0.0 || d > 0.0);
        let k = angular_kernel(&pt(0.0, zx), &pt(ry, 0.0), &KernelConfig::with_delta(d)).unwrap();
        prop_assert_eq!(k.f, 0.0);
    }

    #[test]
    fn elliptic_and_quadrature_paths_agree(rx in 0.05f64..4.0, ry in 0.05f64..4.0, dz in -2.0f64..2.0, d in 0.0f64..0.3) {
        prop_assume!(d > 0.0 || (rx - ry).hypot(dz) > 1e-3);
        let cfg = KernelConfig { quad_tol: 1e-10, ..KernelConfig::with_delta(d) };
        let e = angular_kernel_elliptic(&pt(rx, dz), &pt(ry, 0.0), d).unwrap();
        let q = angular_kernel_quadrature(&pt(rx, dz), &pt(ry, 0.0), &cfg).unwrap();
        prop_assert!((e.f - q.f).abs() <= 10.0 * cfg.quad_tol * (1.0 + e.f.abs()));
    }

    #[test]
    fn particle_csv_round_trip_is_exact(field in particles()) {
        let mut buf = Vec::new();
        write_particles_csv(&field, &mut buf).unwrap();
        prop_assert_eq!(read_particles_csv(buf.as_slice()).unwrap(), field);
    }

    #[test]
    fn grid_json_round_trip_is_exact(values in prop::collection::vec(-1e3f64..1e3, 12)) {
        let g = GridField::new(Lattice::new(0.3, -0.2, 0.2, 0.1).unwrap(), values).unwrap();
        prop_assert_eq!(grid_from_json(&grid_to_json(&g).unwrap()).unwrap(), g);
    }

    #[test]
    fn remesh_conserves_total_strength(field in particles()) {
        let out = remesh(&field, &Lattice::new(4.0, -3.0, 3.0, 0.1).unwrap(), RemeshOptions::default()).unwrap();
        let (a, b) = (field.total_strength(), out.total_strength());
        let scale: f64 = field.particles.iter().map(|p| (p.q * p.vol).abs()).sum();
        prop_assert!((a - b).abs() <= 1e-12 * scale);
    }

    #[test]
    fn norms_grow_with_the_region(r1 in 0.1f64..1.5, dr in 0.0f64..1.0, p in 1.0f64..4.0) {
        let g = make_initial(&DataFamily::named("gaussian_ring").unwrap(), &Lattice::new(2.5, -2.5, 2.5, 0.05).unwrap()).unwrap();
        let a = lp_norm(&g, &NormSpec::cylinder(p, r1)).unwrap();
        let b = lp_norm(&g, &NormSpec::cylinder(p, r1 + dr)).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn cutoff_is_a_monotone_switch(eps in 0.05f64..1.0, d1 in 0.0f64..50.0, d2 in 0.0f64..50.0) {
        for mode in [CutoffMode::Grow, CutoffMode::Literal] {
            let s = MollifierSpec::new(eps, BumpProfile::Standard, mode).unwrap();
            let (lo, hi) = (d1.min(d2), d1.max(d2));
            let (a, b) = (s.chi(lo), s.chi(hi));
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert!(a >= b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn velocity_constant_is_amplitude_invariant(c in 0.01f64..100.0) {
        let l = Lattice::new(2.0, -1.0, 1.0, 0.1).unwrap();
        let base = make_initial(&DataFamily::named("gaussian_ring").unwrap(), &l).unwrap();
        let cfg = EstimateConfig::new(KernelConfig::with_delta(0.1), 0.1);
        let a = verify_velocity_lp_estimate(&base.clone().into(), 2.0, 1.0, &cfg).unwrap();
        let scaled: RelativeVorticityField = base.map(|v| c * v).into();
        let b = verify_velocity_lp_estimate(&scaled, 2.0, 1.0, &cfg).unwrap();
        prop_assert!((a.empirical_c - b.empirical_c).abs() <= 1e-12 * a.empirical_c);
    }

    #[test]
    fn mollification_does_not_raise_l1(eps in 0.2f64..0.6, amp in -3.0f64..3.0, rc in 0.3f64..1.5) {
        let l = Lattice::new(3.0, -2.0, 2.0, 0.1).unwrap();
        let g = make_initial(&DataFamily::gaussian_ring(rc, 0.0, 0.3, amp), &l).unwrap();
        let m = mollify(&g, &MollifierSpec::new(eps, BumpProfile::Standard, CutoffMode::Grow).unwrap()).unwrap();
        let (a, b) = (lp_norm(&g, &NormSpec::whole(1.0)).unwrap(), lp_norm(&m, &NormSpec::whole(1.0)).unwrap());
        prop_assert!(b <= a * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn residual_is_linear_in_the_test_function(a in -5.0f64..5.0, rc in 0.6f64..1.4, zc in -0.3f64..0.3) {
        let ts: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let shape = TestShape::OffAxis { r_center: rc, r_half: 0.4, z_center: zc, z_half: 0.4 };
        let one = WeakTestFunction::new("one", shape, 0.1, 0.9, 1.0).unwrap();
        let scaled = WeakTestFunction::new("scaled", shape, 0.1, 0.9, a).unwrap();
        let u = |k: usize, p: &[MeridianPoint]| -> axiflow::Result<Vec<VelocitySample>> {
            let t = ts[k];
            Ok(p.iter().map(|x| VelocitySample { u_r: x.z * (1.0 + t), u_z: 1.0 - 2.0 * x.r * t }).collect())
        };
        let rep = weak_residual_with(&ts, u, &[one, scaled], 24).unwrap();
        let (r1, ra) = (rep.residuals[0], rep.residuals[1]);
        prop_assert!((ra - a * r1).abs() <= 1e-12 * (a * r1).abs().max(1e-12));
    }
}
