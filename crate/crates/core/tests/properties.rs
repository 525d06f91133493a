use chaosbound::bounds::{bound_profile, distribution_params, Theorem};
use chaosbound::flattening::{
    build_table, chaos_parameters, enumerate_assignments, oracle_check, FlatteningClass, ParameterValue,
    DEFAULT_ORACLE_CAP,
};
use chaosbound::generate::{random_schema, random_shape, SchemaGen};
use chaosbound::graph::{brute_force_separator_size, min_vertex_separator, norm_exponents, sigma_exponent};
use chaosbound::linalg::{spectral_norm, svd_norm, Matrix};
use chaosbound::monomial::MonomialMax;
use chaosbound::sampler::{monte_carlo, SampleConfig, Target};
use chaosbound::schema::{khatri_rao_schema, DistributionSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(cases) }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn generated_schemas_validate(seed in any::<u64>(), weighted in any::<bool>()) {
        let g = SchemaGen { min_dim: 2, max_p: 5, weighted, ..SchemaGen::default() };
        let s = random_schema(&mut rng(seed), &g);
        prop_assert!(s.validate().is_ok(), "{:?}", s.validate());
    }

    #[test]
    fn derived_dims_match_products(seed in any::<u64>()) {
        let g = SchemaGen { max_p: 5, max_dim: 6, ..SchemaGen::default() };
        let s = random_schema(&mut rng(seed), &g);
        let sizes = s.sizes().unwrap();
        let prod = |t: usize| s.coord(t).iter().map(|u| sizes[u] as f64).product::<f64>();
        let d = s.dims_of().unwrap();
        prop_assert_eq!(d.d1, prod(s.q));
        prop_assert_eq!(d.d2, prod(s.q + 1));
        let m = (0..s.q).map(prod).fold(0.0, f64::max);
        prop_assert_eq!(d.m, m);
    }

    #[test]
    fn weightless_oracle_is_exact(seed in any::<u64>()) {
        let s = random_schema(&mut rng(seed), &SchemaGen::default());
        let report = oracle_check(&s, DEFAULT_ORACLE_CAP).unwrap();
        prop_assert!(report.all_pass(), "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn weighted_oracle_is_upper(seed in any::<u64>()) {
        let g = SchemaGen { weighted: true, ..SchemaGen::default() };
        let s = random_schema(&mut rng(seed), &g);
        let report = oracle_check(&s, DEFAULT_ORACLE_CAP).unwrap();
        prop_assert!(report.all_pass(), "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn relabeling_keeps_norms(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_schema(&mut r, &SchemaGen::default());
        let mut perm: Vec<usize> = (0..s.p).collect();
        for i in (1..s.p).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let a = build_table(&s);
        let b = build_table(&s.relabel(&perm));
        let values = |t: &chaosbound::flattening::FlatteningTable| {
            t.rows.iter().map(|row| row.norm_sq_numeric.unwrap()).collect::<Vec<_>>()
        };
        prop_assert_eq!(values(&a), values(&b));
    }

    #[test]
    fn transpose_keeps_sigma_norms(seed in any::<u64>()) {
        let s = random_schema(&mut rng(seed), &SchemaGen::default());
        let norms = |s: &chaosbound::schema::ChaosSchema| {
            let t = build_table(s);
            sorted(t.class_rows(FlatteningClass::Sigma).map(|r| r.norm_sq_numeric.unwrap()).collect())
        };
        prop_assert_eq!(norms(&s), norms(&s.transpose()));
    }

    #[test]
    fn menger_duality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = random_shape(&mut r, 8, 0.35);
        let sep = min_vertex_separator(&shape);
        prop_assert!(shape.is_separator(&sep.separator));
        prop_assert_eq!(sep.size, sep.disjoint_paths.len());
        prop_assert_eq!(sep.size, brute_force_separator_size(&shape));
        for p in &sep.disjoint_paths {
            prop_assert_eq!(p.iter().filter(|v| sep.separator.contains(v)).count(), 1);
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in sep.disjoint_paths.iter().flatten() {
            prop_assert!(seen.insert(*v), "paths share vertex {}", v);
        }
    }

    #[test]
    fn edge_ordering_within_f(seed in any::<u64>()) {
        let shape = random_shape(&mut rng(seed), 8, 0.35);
        let report = norm_exponents(&shape);
        prop_assert!(report.k() <= report.f);
        let mut order = report.ordering.order.clone();
        order.sort_unstable();
        prop_assert_eq!(order, (0..shape.edges.len()).collect::<Vec<_>>());
    }

    #[test]
    fn sigma_exponent_is_poly(seed in any::<u64>()) {
        let shape = random_shape(&mut rng(seed), 6, 0.3);
        if shape.edges.is_empty() || shape.edges.len() > 8 {
            return Ok(());
        }
        prop_assert_eq!(sigma_exponent(&shape).unwrap(), norm_exponents(&shape).poly_exponent);
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn r_below_sigma_and_v(seed in any::<u64>()) {
        let s = random_schema(&mut rng(seed), &SchemaGen::default());
        let (sigma, v, r) = chaos_parameters(&s).values().unwrap();
        prop_assert!(r <= sigma && r <= v, "sigma {} v {} r {}", sigma, v, r);
    }

    #[test]
    fn spectral_norm_matches_svd(seed in any::<u64>(), rows in 1usize..=64, cols in 1usize..=64) {
        let mut r = rng(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0));
        let est = spectral_norm(&Matrix::Dense(a.clone()), 1e-6, 500).value;
        let exact = svd_norm(&a);
        prop_assert!((est - exact).abs() <= 1e-6 * exact.max(1e-300));
    }

    #[test]
    fn profiles_monotone(
        sigma in 0.0f64..100.0, v in 0.0f64..100.0, r in 0.0f64..100.0,
        bump in 0.0f64..10.0, d in 1.0f64..1e4, m in 1.0f64..1e4, q in 1usize..4,
    ) {
        let params = distribution_params(&DistributionSpec::Rademacher, d, m).unwrap();
        let cp = |s: f64, v: f64, r: f64| chaosbound::flattening::ChaosParameters {
            q,
            sigma: ParameterValue { norm_sq: MonomialMax::default(), value: Some(s) },
            v: ParameterValue { norm_sq: MonomialMax::default(), value: Some(v) },
            r: ParameterValue { norm_sq: MonomialMax::default(), value: Some(r) },
            symbol_order: Vec::new(),
        };
        let base = cp(sigma, v, r);
        for t in Theorem::UPPER {
            let at = |c: &chaosbound::flattening::ChaosParameters, d: f64, m: f64| {
                bound_profile(t, &params, c, q, d, m).unwrap().numeric_value.unwrap()
            };
            let b = at(&base, d, m);
            prop_assert!(at(&cp(sigma + bump, v, r), d, m) >= b);
            prop_assert!(at(&cp(sigma, v + bump, r), d, m) >= b);
            prop_assert!(at(&cp(sigma, v, r + bump), d, m) >= b);
            prop_assert!(at(&base, d + bump, m) >= b);
            prop_assert!(at(&base, d, m + bump) >= b);
        }
        let upper = bound_profile(Theorem::NckUpper, &params, &base, q, d, m).unwrap().numeric_value.unwrap();
        let lower = bound_profile(Theorem::NckLower, &params, &base, q, d, m).unwrap().numeric_value.unwrap();
        prop_assert!(upper >= lower);
    }
}

#[test]
fn class_counts() {
    for q in 1..=6u32 {
        let s = khatri_rao_schema(q as usize, 2, 2).unwrap();
        let count = |c| enumerate_assignments(&s, c).len();
        assert_eq!(count(FlatteningClass::Sigma), 1 << q);
        assert_eq!(count(FlatteningClass::V), (1 << q) - 1);
        assert_eq!(count(FlatteningClass::Rr), 3usize.pow(q) - (1 << q));
    }
}

#[test]
fn trial_order_is_irrelevant() {
    let config = SampleConfig {
        target: Target::Schema(khatri_rao_schema(2, 3, 5).unwrap()),
        trials: 8,
        seed: 77,
        ..SampleConfig::default()
    };
    let forward = monte_carlo(&config).unwrap().norms;
    let mut backward: Vec<f64> = (0..8u64)
        .rev()
        .map(|t| {
            let m = config.materialize(t).unwrap();
            spectral_norm(&m, config.norm_tol, 500).value
        })
        .collect();
    backward.reverse();
    assert_eq!(forward, backward);
}
