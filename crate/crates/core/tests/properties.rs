//! Randomized invariants of the packed representation and steering.

use proptest::prelude::*;
use rotsparse::steerbasis::{steer, BasisSpec, PackedRotation, SteerableBasis};

fn basis(n: usize) -> SteerableBasis {
    SteerableBasis::new(&BasisSpec::new(n)).unwrap()
}

fn patch(n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    let rows = basis(n).rows();
    prop::collection::vec(-1.0f64..1.0, rows).prop_map(move |x| (n, x))
}

fn any_patch() -> impl Strategy<Value = (usize, Vec<f64>)> {
    prop_oneof![patch(3), patch(5), patch(7), patch(9)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pack_unpack_round_trip((n, x) in any_patch()) {
        let b = basis(n);
        let layout = b.packed_layout();
        let c = b.analyze(&x).unwrap();
        let p = layout.pack(&c);
        let back = layout.unpack(&p);
        for (u, v) in back.0.iter().zip(&c.0) {
            prop_assert!((u - v).norm() < 1e-12);
        }
        let sq: f64 = p.iter().map(|v| v * v).sum();
        prop_assert!((sq - c.norm().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn steering_preserves_norm_and_inverts((n, x) in any_patch(), angle in -7.0f64..7.0) {
        let b = basis(n);
        let c = b.analyze(&x).unwrap();
        let s = steer(&c, &b.phases_for_angle(angle)).unwrap();
        prop_assert!((s.norm() - c.norm()).abs() < 1e-12);
        prop_assert!(b.is_conjugate_symmetric(&s, 1e-8));
        let back = steer(&s, &b.phases_for_angle(-angle)).unwrap();
        for (u, v) in back.0.iter().zip(&c.0) {
            prop_assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn packed_rotation_matches_complex((n, x) in any_patch(), angle in -7.0f64..7.0) {
        let b = basis(n);
        let layout = b.packed_layout();
        let c = b.analyze(&x).unwrap();
        let want = layout.pack(&steer(&c, &b.phases_for_angle(angle)).unwrap());
        let got = PackedRotation::new(&layout, angle).apply(&layout.pack(&c));
        for (u, v) in got.iter().zip(&want) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }
}
