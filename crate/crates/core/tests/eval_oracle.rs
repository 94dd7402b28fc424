mod common;

use common::oracles::agree;
use dimgp::rng;
use dimgp::tree::{evaluate, Method, Sampler};
use proptest::prelude::*;

#[test]
fn engine_matches_reference_interpreter() {
    let g = common::grammar();
    let tm = common::transitions(&g);
    let s = Sampler::new(&g, &tm);
    let mut r = rng::master(77);
    let d = common::random_rows(&mut r, 100);
    let mut missing = 0;
    for i in 0..1000 {
        let method = if i % 2 == 0 {
            Method::Grow
        } else {
            Method::Full
        };
        let t = s.sample_tree(&mut r, method, 1, 6, None).unwrap();
        agree(&t, &g, &d).unwrap();
        missing += evaluate(&t, &g, &d)
            .unwrap()
            .iter()
            .filter(|v| v.is_nan())
            .count();
    }
    assert!(missing > 0);
}

#[test]
fn division_by_zero_and_domain_errors_are_missing() {
    let g = common::grammar();
    let s = common::schema();
    let d = common::random_rows(&mut rng::master(1), 100);
    for text in [
        "pt_lep / (pt_tau - pt_tau)",
        "Acos(pt_lep / pt_tau)",
        "Sqrt(Square(pt_lep) - Square(pt_tau))",
        "Tan(phi_lep) * 0.5",
    ] {
        let t = dimgp::tree::parse_expression(text, &g, &s).unwrap();
        agree(&t, &g, &d).unwrap();
    }
    let t = dimgp::tree::parse_expression("pt_lep / (pt_tau - pt_tau)", &g, &s).unwrap();
    assert!(evaluate(&t, &g, &d).unwrap().iter().all(|v| v.is_nan()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn reference_agreement_on_random_data(seed in any::<u64>()) {
        let g = common::grammar();
        let tm = common::transitions(&g);
        let s = Sampler::new(&g, &tm);
        let mut r = rng::master(seed);
        let d = common::random_rows(&mut r, 30);
        let t = s.sample_tree(&mut r, Method::Grow, 1, 8, None).unwrap();
        prop_assert!(agree(&t, &g, &d).is_ok());
    }
}
