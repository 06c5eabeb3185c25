mod common;

use proptest::prelude::*;
use rand::Rng;
use ssnmf_core::extract::{top_p_abs, top_p_signed_extreme, top_p_signed_median};
use ssnmf_core::Sign;

fn sign_i32(s: Sign) -> i32 {
    match s {
        Sign::Positive => 1,
        Sign::Negative => -1,
    }
}

#[test]
fn length_100_p_7_matches_full_sort() {
    let mut rng = common::rng(100);
    for _ in 0..50 {
        let u = common::gaussian_vec(&mut rng, 100);
        assert_eq!(top_p_abs(&u, 7).unwrap(), common::oracle_top_p_abs(&u, 7));
        let s = top_p_signed_median(&u, 7).unwrap();
        assert_eq!((s.indices, sign_i32(s.sign)), common::oracle_signed_median(&u, 7));
        let s = top_p_signed_extreme(&u, 7).unwrap();
        assert_eq!((s.indices, sign_i32(s.sign)), common::oracle_signed_extreme(&u, 7));
    }
}

#[test]
fn heavy_ties_match_full_sort() {
    let mut rng = common::rng(3);
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let p = rng.random_range(1..=n);
        // small integer alphabet forces ties in value and magnitude
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-3i32..=3) as f64).collect();
        assert_eq!(top_p_abs(&u, p).unwrap(), common::oracle_top_p_abs(&u, p));
        let s = top_p_signed_median(&u, p).unwrap();
        assert_eq!((s.indices, sign_i32(s.sign)), common::oracle_signed_median(&u, p));
        let s = top_p_signed_extreme(&u, p).unwrap();
        assert_eq!((s.indices, sign_i32(s.sign)), common::oracle_signed_extreme(&u, p));
    }
}

proptest! {
    #[test]
    fn rules_agree_with_oracles(
        (u, p) in prop::collection::vec(-100.0f64..100.0, 1..200)
            .prop_flat_map(|u| { let n = u.len(); (Just(u), 1..=n) })
    ) {
        prop_assert_eq!(top_p_abs(&u, p).unwrap(), common::oracle_top_p_abs(&u, p));
        let s = top_p_signed_median(&u, p).unwrap();
        prop_assert_eq!((s.indices, sign_i32(s.sign)), common::oracle_signed_median(&u, p));
        let s = top_p_signed_extreme(&u, p).unwrap();
        prop_assert_eq!((s.indices, sign_i32(s.sign)), common::oracle_signed_extreme(&u, p));
    }
}
