mod common;

use dimgp::evolve::{
    init_population, init_population_with_plan, respects_transitions, EvolutionConfig,
};
use dimgp::grammar::{Grammar, Operator, ProductionId};
use dimgp::rng;
use dimgp::tree::{type_check, Method, Sampler};
use proptest::prelude::*;

/// Pearson statistic and its `df + 3 sqrt(2 df)` acceptance bound.
fn chi_squared(observed: &[usize], expected_p: &[f64]) -> (f64, f64) {
    let n: usize = observed.iter().sum();
    let stat = observed
        .iter()
        .zip(expected_p)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    (stat, df + 3.0 * (2.0 * df).sqrt())
}

fn prod(g: &Grammar, op: Operator, ret: &str, args: &[&str]) -> ProductionId {
    let ids: Vec<usize> = args.iter().map(|a| g.type_id(a).unwrap()).collect();
    g.find_production(op, g.type_id(ret).unwrap(), &ids)
        .unwrap()
}

#[test]
fn ramped_target_depths_are_uniform() {
    let g = common::grammar();
    let tm = common::transitions(&g);
    let s = Sampler::new(&g, &tm);
    let cfg = EvolutionConfig::default();
    let (pop, plan) = init_population_with_plan(&cfg, &s, &mut rng::master(11)).unwrap();
    assert_eq!(pop.len(), 500);
    let mut hist = vec![0usize; 7];
    let mut full = 0;
    for (ind, p) in pop.iter().zip(&plan) {
        assert_eq!(ind.trees.len(), 1);
        let (method, target) = p[0];
        let t = &ind.trees[0];
        type_check(t, &g).unwrap();
        match method {
            Method::Full => {
                full += 1;
                assert_eq!(t.height(), target);
            }
            Method::Grow => assert!((2..=target).contains(&t.height())),
        }
        hist[target - 2] += 1;
    }
    let (stat, bound) = chi_squared(&hist, &[1.0 / 7.0; 7]);
    assert!(
        stat < bound,
        "target depths {hist:?}: chi2 {stat:.2} >= {bound:.2}"
    );
    assert!((200..=300).contains(&full), "{full} full trees out of 500");
}

#[test]
fn individuals_have_n_trees() {
    let g = common::grammar();
    let tm = common::transitions(&g);
    let s = Sampler::new(&g, &tm);
    let cfg = EvolutionConfig {
        population_size: 40,
        n_features: 6,
        ..EvolutionConfig::default()
    };
    let pop = init_population(&cfg, &s, &mut rng::master(2)).unwrap();
    assert!(pop.iter().all(|i| i.trees.len() == 6));
    let one = EvolutionConfig {
        population_size: 1,
        ..EvolutionConfig::default()
    };
    assert_eq!(
        init_population(&one, &s, &mut rng::master(2))
            .unwrap()
            .len(),
        1
    );
}

#[test]
fn children_of_sqrt_follow_table_i() {
    let g = common::grammar();
    let tm = common::transitions(&g);
    let s = Sampler::new(&g, &tm);
    let sqrt = prod(&g, Operator::Sqrt, "E", &["E2"]);
    let e2 = g.type_id("E2").unwrap();
    let expect = [
        (prod(&g, Operator::Add, "E2", &["E2", "E2"]), 0.7),
        (prod(&g, Operator::Sub, "E2", &["E2", "E2"]), 0.25),
        (prod(&g, Operator::Mul, "E2", &["E2", "F"]), 0.05),
    ];
    let forbidden = [
        prod(&g, Operator::Square, "E2", &["E"]),
        prod(&g, Operator::Div, "E2", &["E2", "F"]),
    ];
    let mut counts = [0usize; 3];
    let mut r = rng::master(5);
    for _ in 0..20_000 {
        let n = s
            .grow_subtree(&mut r, Some(sqrt), e2, 1, 8, Method::Full, 2)
            .unwrap();
        let id = n.production().expect("E2 has no bound terminal");
        assert!(
            !forbidden.contains(&id),
            "{} under Sqrt",
            g.production_signature(id)
        );
        let k = expect.iter().position(|&(e, _)| e == id).unwrap();
        counts[k] += 1;
    }
    let p: Vec<f64> = expect.iter().map(|&(_, p)| p).collect();
    let (stat, bound) = chi_squared(&counts, &p);
    assert!(stat < bound, "{counts:?}: chi2 {stat:.2} >= {bound:.2}");
}

#[test]
fn root_operators_are_uniform_without_p_init() {
    let g = common::grammar();
    let tm = common::transitions(&g);
    let s = Sampler::new(&g, &tm);
    let e = g.type_id("E").unwrap();
    let ops = g.productions_returning(e).to_vec();
    let mut counts = vec![0usize; ops.len()];
    let mut r = rng::master(8);
    for _ in 0..10_000 {
        let t = s
            .sample_tree_at(&mut r, Method::Full, 6, 2, Some(e))
            .unwrap();
        let id = t.root.production().unwrap();
        counts[ops.iter().position(|&o| o == id).unwrap()] += 1;
    }
    let p = vec![1.0 / ops.len() as f64; ops.len()];
    let (stat, bound) = chi_squared(&counts, &p);
    assert!(stat < bound, "{counts:?}: chi2 {stat:.2} >= {bound:.2}");
}

#[test]
fn sampled_trees_never_use_forbidden_pairs() {
    let g = common::grammar();
    let tm = common::transitions(&g);
    let s = Sampler::new(&g, &tm);
    let mut r = rng::master(21);
    for i in 0..5_000 {
        let method = if i % 2 == 0 {
            Method::Grow
        } else {
            Method::Full
        };
        let t = s.sample_tree(&mut r, method, 2, 8, None).unwrap();
        assert!(respects_transitions(&t, &g, &tm));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sampled_trees_are_well_formed(seed in any::<u64>(), lo in 1usize..5, extra in 0usize..4, full in any::<bool>()) {
        let g = common::grammar();
        let tm = common::transitions(&g);
        let s = Sampler::new(&g, &tm);
        let mut r = rng::master(seed);
        let hi = lo + extra;
        let method = if full { Method::Full } else { Method::Grow };
        let t = s.sample_tree(&mut r, method, lo, hi, None).unwrap();
        prop_assert!(type_check(&t, &g).is_ok());
        prop_assert!(respects_transitions(&t, &g, &tm));
        prop_assert!(t.height() >= lo && t.height() <= hi);
        prop_assert!(g.start_types().contains(&t.return_type));
    }
}
