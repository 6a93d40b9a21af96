use proptest::prelude::*;

use relaxed_polar::energy::{energy, isochoric_project, relative_energy, MaterialParams};
use relaxed_polar::relax::{reduced_energy, relaxed_polar};
use relaxed_polar::rotcore::{
    covering_map, is_rotation, orthogonality_defect, polar_factor, recover_absolute,
    rotation_to_quat, svd_ordered, symmetry_orbit, Mat3, Quat, Vec3,
};
use relaxed_polar::sampling::{sample_rotation, RngState};

fn unit_quat() -> impl Strategy<Value = Quat> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("nonzero", |c| c.iter().map(|v| v * v).sum::<f64>() > 1e-3)
        .prop_map(|c| {
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            Quat::new(c[0] / n, c[1] / n, c[2] / n, c[3] / n)
        })
}

fn rotation() -> impl Strategy<Value = Mat3> {
    unit_quat().prop_map(covering_map)
}

/// `R₁ diag(σ) R₂` with separated singular values.
fn deformation() -> impl Strategy<Value = Mat3> {
    (
        rotation(),
        rotation(),
        0.2f64..1.5,
        0.1f64..2.0,
        0.1f64..2.0,
    )
        .prop_map(|(a, b, s3, g2, g1)| {
            a * Mat3::from_diagonal(&Vec3::new(s3 + g2 + g1, s3 + g2, s3)) * b
        })
}

fn weights() -> impl Strategy<Value = MaterialParams> {
    (0.1f64..3.0, 0.0f64..3.0).prop_map(|(mu, muc)| MaterialParams::new(mu, muc).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn svd_reconstructs(f in deformation()) {
        let dec = svd_ordered(&f).unwrap();
        let rebuilt = dec.rp * dec.q * dec.diag() * dec.q.transpose();
        prop_assert!((f - rebuilt).norm() <= 1e-10 * f.norm());
        prop_assert!((dec.q.determinant() - 1.0).abs() < 1e-12);
        prop_assert!(is_rotation(&dec.rp));
        prop_assert!(dec.sigma[0] >= dec.sigma[1] && dec.sigma[1] >= dec.sigma[2]);
        prop_assert_eq!(svd_ordered(&f).unwrap(), dec);
    }

    #[test]
    fn antipodal_covering(q in unit_quat()) {
        prop_assert_eq!(covering_map(q), covering_map(-q));
        prop_assert!(orthogonality_defect(&covering_map(q)) < 1e-10);
    }

    #[test]
    fn off_sphere_is_not_orthogonal(q in unit_quat(), s in 1.1f64..3.0) {
        prop_assert!(orthogonality_defect(&covering_map(q.scale(s))) > 1e-3);
    }

    #[test]
    fn recover_absolute_round_trip(f in deformation(), r in rotation()) {
        let dec = svd_ordered(&f).unwrap();
        let back = recover_absolute(&dec.relative(&r), &dec);
        prop_assert!((back - r).norm() < 1e-12);
    }

    #[test]
    fn energy_transformation_identity(f in deformation(), r in rotation(), p in weights()) {
        let dec = svd_ordered(&f).unwrap();
        let lhs = energy(&r, &f, &p).unwrap();
        let rhs = relative_energy(&dec.relative(&r), &dec.sigma, &p).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs));
        prop_assert!(lhs >= 0.0);
    }

    #[test]
    fn relative_energy_orbit_invariance(r in rotation(), p in weights(), s3 in 0.1f64..2.0, g in 0.0f64..2.0, h in 0.0f64..2.0) {
        let sigma = [s3 + g + h, s3 + g, s3];
        let e = relative_energy(&r, &sigma, &p).unwrap();
        for c in symmetry_orbit(&r).unwrap() {
            prop_assert!((relative_energy(&c, &sigma, &p).unwrap() - e).abs() < 1e-12 * (1.0 + e));
        }
    }

    #[test]
    fn energy_objectivity(f in deformation(), r in rotation(), q in rotation(), p in weights()) {
        let a = energy(&(q * r), &(q * f), &p).unwrap();
        let b = energy(&r, &f, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + b));
    }

    #[test]
    fn isochoric_has_unit_determinant(f in deformation()) {
        prop_assert!((isochoric_project(&f).unwrap().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rpolar_pair_has_equal_energy(f in deformation(), p in weights()) {
        let rr = relaxed_polar(&f, &p).unwrap();
        let ep = energy(&rr.r_plus, &f, &p).unwrap();
        let em = energy(&rr.r_minus, &f, &p).unwrap();
        prop_assert!((ep - em).abs() < 1e-12 * (1.0 + ep));
        prop_assert!((ep - reduced_energy(&f, &p).unwrap()).abs() < 1e-10 * (1.0 + ep));
        prop_assert!(rr.reduced_energy >= 0.0);
    }
}

#[test]
fn haar_round_trip_through_quaternions() {
    let mut rng = RngState::new(11);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let r = sample_rotation(&mut rng);
        let back = rotation_to_quat(&r).unwrap().to_rotation();
        worst = worst.max((back - r).norm());
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn polar_of_near_identity_matches_exponential() {
    let a0 = Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -7.0, -2.0, 7.0, 0.0);
    let a = a0 * (1e-4 / a0.norm());
    let rp = polar_factor(&(Mat3::identity() + a)).unwrap();
    let exp = Mat3::identity() + a + a * a * 0.5;
    assert!((rp - exp).norm() < 1e-11);
}

#[test]
fn classical_weights_keep_polar_optimal() {
    let mut rng = RngState::new(12);
    let f = Mat3::new(2.5, -0.4, 0.3, 0.8, 1.9, -1.1, 0.2, 0.5, 0.7);
    let rp = polar_factor(&f).unwrap();
    for p in [
        MaterialParams::new(1.0, 1.0).unwrap(),
        MaterialParams::new(1.0, 2.0).unwrap(),
    ] {
        let e0 = energy(&rp, &f, &p).unwrap();
        for _ in 0..100_000 {
            let r = sample_rotation(&mut rng);
            assert!(energy(&r, &f, &p).unwrap() - e0 >= -1e-10);
        }
    }
}
