use proptest::prelude::*;

use shiftlab_core::seqspace::{cw_root, ProductKind, SeqVec, SpaceNorm};

fn sparse(max_len: usize, max_index: u64) -> impl Strategy<Value = SeqVec> {
    prop::collection::vec((0..=max_index, -3.0f64..3.0), 0..=max_len).prop_map(SeqVec::from_pairs)
}

fn norms() -> impl Strategy<Value = SpaceNorm> {
    prop_oneof![
        Just(SpaceNorm::L1),
        Just(SpaceNorm::Sup),
        (1.0f64..6.0).prop_map(|p| SpaceNorm::Lp { p }),
    ]
}

proptest! {
    #[test]
    fn canonical_form_has_no_zeros(x in sparse(12, 40)) {
        prop_assert!(x.iter().all(|(_, c)| c != 0.0));
        let back: SeqVec = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn convolution_is_submultiplicative(x in sparse(8, 30), y in sparse(8, 30)) {
        let lhs = x.product(&y, ProductKind::Convolution).unwrap().norm(SpaceNorm::L1);
        prop_assert!(lhs <= x.norm(SpaceNorm::L1) * y.norm(SpaceNorm::L1) * (1.0 + 1e-12));
    }

    #[test]
    fn convolution_support_adds(x in sparse(6, 30), y in sparse(6, 30)) {
        let z = x.product(&y, ProductKind::Convolution).unwrap();
        if let (Some(a), Some(b), Some(c)) = (x.max_support(), y.max_support(), z.max_support()) {
            prop_assert!(c <= a + b);
        }
    }

    #[test]
    fn products_commute(x in sparse(6, 20), y in sparse(6, 20)) {
        for kind in [ProductKind::Convolution, ProductKind::Coordinatewise] {
            let a = x.product(&y, kind).unwrap();
            let b = y.product(&x, kind).unwrap();
            prop_assert!(a.sub(&b).norm(SpaceNorm::Sup) <= 1e-12 * (1.0 + a.norm(SpaceNorm::Sup)));
        }
    }

    #[test]
    fn convolution_associates(x in sparse(4, 10), y in sparse(4, 10), z in sparse(4, 10)) {
        let k = ProductKind::Convolution;
        let a = x.product(&y, k).unwrap().product(&z, k).unwrap();
        let b = x.product(&y.product(&z, k).unwrap(), k).unwrap();
        let scale = x.norm(SpaceNorm::L1) * y.norm(SpaceNorm::L1) * z.norm(SpaceNorm::L1);
        prop_assert!(a.sub(&b).norm(SpaceNorm::L1) <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn power_is_repeated_product(x in sparse(4, 8), m in 1u32..5) {
        for kind in [ProductKind::Convolution, ProductKind::Coordinatewise] {
            let mut r = x.clone();
            for _ in 1..m {
                r = r.product(&x, kind).unwrap();
            }
            let p = x.power(m, kind).unwrap();
            prop_assert!(p.sub(&r).norm(SpaceNorm::L1) <= 1e-10 * (1.0 + r.norm(SpaceNorm::L1)));
        }
    }

    #[test]
    fn coordinatewise_root_inverts_power(x in sparse(8, 40), m in 1u32..6) {
        let pos = SeqVec::from_pairs(x.iter().map(|(k, c)| (k, c.abs())));
        let r = cw_root(&pos, m).unwrap();
        let back = r.power(m, ProductKind::Coordinatewise).unwrap();
        prop_assert!(back.sub(&pos).norm(SpaceNorm::Sup) <= 1e-12 * (1.0 + pos.norm(SpaceNorm::Sup)));
    }

    #[test]
    fn norm_scaling(x in sparse(8, 40), n in norms(), c in -4.0f64..4.0) {
        let nx = x.norm(n);
        let nc = x.scale(c).norm(n);
        if c.abs() <= 1.0 {
            prop_assert!(nc <= nx * (1.0 + 1e-12));
        }
        prop_assert!(nc <= (c.abs() + 1.0) * nx * (1.0 + 1e-12));
    }

    #[test]
    fn triangle_inequality(x in sparse(8, 40), y in sparse(8, 40), n in norms()) {
        prop_assert!(x.add(&y).norm(n) <= (x.norm(n) + y.norm(n)) * (1.0 + 1e-12) + 1e-300);
    }
}

#[test]
fn root_rejects_negative() {
    assert!(cw_root(&SeqVec::from_pairs([(0, 1.0), (3, -1.0)]), 2).is_err());
}

#[test]
fn lp_validation() {
    assert!(SpaceNorm::lp(0.5).is_err());
    assert!(SpaceNorm::lp(2.0).is_ok());
}
