//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p chaosbound-cli --test acceptance`.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::{Duration, Instant};

use chaosbound::bounds::{BoundProfile, Theorem};
use chaosbound::flattening::{build_table, chaos_parameters, oracle_check, FlatteningClass, DEFAULT_ORACLE_CAP};
use chaosbound::generate::{random_schema, random_shape, SchemaGen};
use chaosbound::graph::{
    brute_force_separator_size, enumerate_shapes, min_vertex_separator, norm_exponents, sigma_witness, Shape,
};
use chaosbound::monomial::{Monomial, MonomialMax};
use chaosbound::sampler::{monte_carlo, scaling_fit_reports, SampleConfig, SampleMode, Target};
use chaosbound::schema::{khatri_rao_schema, ChaosSchema};
use chaosbound_cli::{builtin, run, Input};
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn max(s: &str) -> MonomialMax {
    MonomialMax::from_str(s).expect("valid monomial list")
}

fn mono(s: &str) -> Monomial {
    Monomial::from_str(s).expect("valid monomial")
}

fn builtin_schema(name: &str) -> ChaosSchema {
    match builtin(name) {
        Some(Input::Schema(s)) => s,
        _ => panic!("{name} is a schema builtin"),
    }
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["chaosbound"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).expect("utf-8"))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    check(elapsed < limit, || format!("{what} took {elapsed:?}, limit {limit:?}"))
}

fn class_norms(schema: &ChaosSchema, class: FlatteningClass) -> Vec<Monomial> {
    build_table(schema).class_rows(class).map(|r| r.norm_sq_symbolic.clone()).collect()
}

fn c1_tables() -> Outcome {
    let start = Instant::now();
    let kr = builtin_schema("khatri-rao-q2");
    let (code, text) = cli(&["analyze", "--builtin", "khatri-rao-q2"]);
    check(code == 0, || format!("analyze exited {code}"))?;
    let table = build_table(&kr);
    check(table.rows.len() == 12, || format!("{} rows", table.rows.len()))?;
    let want = |list: &[&str]| list.iter().map(|s| mono(s)).collect::<Vec<_>>();
    check(class_norms(&kr, FlatteningClass::Sigma) == want(&["d^2", "d", "d", "n"]), || "KR σ rows".into())?;
    check(class_norms(&kr, FlatteningClass::V) == want(&["1", "d", "d"]), || "KR v rows".into())?;
    check(class_norms(&kr, FlatteningClass::Rr) == want(&["d", "1", "d", "1", "1"]), || "KR r rows".into())?;
    let sigma_marked: Vec<Monomial> =
        (0..4).filter(|&i| table.is_highlighted(i)).map(|i| table.rows[i].norm_sq_symbolic.clone()).collect();
    check(sigma_marked == want(&["d^2", "n"]), || format!("KR σ highlights {sigma_marked:?}"))?;
    let marked_lines = text.lines().filter(|l| l.starts_with('σ') && l.ends_with('*')).count();
    check(marked_lines == 2, || format!("{marked_lines} highlighted σ lines in the printed table"))?;

    let cases: [(&str, FlatteningClass, &str); 8] = [
        ("tensor-pca-1", FlatteningClass::Sigma, "n·d"),
        ("tensor-pca-1", FlatteningClass::Rr, "1"),
        ("tensor-pca-2", FlatteningClass::Sigma, "n·d^2"),
        ("tensor-pca-2", FlatteningClass::V, "d^2 ∨ n"),
        ("ellipsoid-phi", FlatteningClass::Sigma, "d^2·m ∨ m^2"),
        ("ellipsoid-phi", FlatteningClass::V, "m·d ∨ d^2"),
        ("ellipsoid-psi", FlatteningClass::Sigma, "m^2 ∨ m·d"),
        ("ellipsoid-psi", FlatteningClass::V, "m ∨ d"),
    ];
    for (name, class, expected) in cases {
        let got = chaos_parameters(&builtin_schema(name)).get(class).norm_sq.clone();
        check(got == max(expected), || format!("{name} {class:?}: {got:?} vs {expected}"))?;
        let (code, _) = cli(&["analyze", "--builtin", name]);
        check(code == 0, || format!("analyze {name} exited {code}"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1), "table reproduction")?;
    Ok(format!("5 builtins, symbolic equality, {elapsed:.2?}"))
}

fn corpus() -> (Vec<ChaosSchema>, Vec<ChaosSchema>) {
    let plain: Vec<ChaosSchema> = (0..100u64)
        .map(|seed| random_schema(&mut ChaCha8Rng::seed_from_u64(seed), &SchemaGen::default()))
        .collect();
    let g = SchemaGen { weighted: true, ..SchemaGen::default() };
    let weighted: Vec<ChaosSchema> =
        (0..50u64).map(|seed| random_schema(&mut ChaCha8Rng::seed_from_u64(1000 + seed), &g)).collect();
    (plain, weighted)
}

fn c2_oracle(plain: &[ChaosSchema], weighted: &[ChaosSchema]) -> Outcome {
    let start = Instant::now();
    let mut rows = 0;
    for (i, s) in plain.iter().chain(weighted).enumerate() {
        let r = oracle_check(s, DEFAULT_ORACLE_CAP).map_err(|e| format!("schema {i}: {e}"))?;
        rows += r.rows.len();
        let first = r.failures().next().map(|f| {
            format!("schema {i} {:?} {}: formula {} explicit {}", f.class, f.placements, f.formula_norm_sq, f.explicit_norm_sq)
        });
        if let Some(msg) = first {
            return Err(msg);
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60), "oracle sweep")?;
    Ok(format!("{} + {} schemas, {rows} flattenings, {elapsed:.2?}", plain.len(), weighted.len()))
}

fn c3_ordering(plain: &[ChaosSchema], weighted: &[ChaosSchema]) -> Outcome {
    for (i, s) in plain.iter().chain(weighted).enumerate() {
        let (sigma, v, r) = chaos_parameters(s).values().ok_or("unbound schema")?;
        check(r <= v && r <= sigma, || format!("schema {i}: σ {sigma} v {v} r {r}"))?;
    }
    Ok(format!("{} schemas", plain.len() + weighted.len()))
}

fn c4_graph() -> Outcome {
    let start = Instant::now();
    let named = [
        ("β", Shape::wigner(), Ratio::new(1, 2), 1),
        ("γ", Shape::z_shape(), Ratio::from_integer(1), 2),
        ("δ", Shape::star(), Ratio::from_integer(3), 2),
    ];
    for (name, shape, poly, f) in named {
        let r = norm_exponents(&shape);
        check(r.poly_exponent == poly && r.f == f, || {
            format!("{name}: poly {} f {}, expected {poly} and {f}", r.poly_exponent, r.f)
        })?;
    }
    let mut count = 0usize;
    for shape in enumerate_shapes(6, 5) {
        let report = norm_exponents(&shape);
        let Some((sigma, realized)) = sigma_witness(&shape, report.separator.size) else { continue };
        count += 1;
        check(sigma == report.poly_exponent && realized, || {
            format!("{}: σ exponent {sigma} (witness {realized}) vs poly {}", shape.to_json(), report.poly_exponent)
        })?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(120), "shape sweep")?;
    Ok(format!("β γ δ exact; {count} shapes with ≤ 6 vertices and ≤ 5 edges, {elapsed:.2?}"))
}

fn shape_corpus() -> Vec<Shape> {
    (0..100u64).map(|seed| random_shape(&mut ChaCha8Rng::seed_from_u64(seed), 8, 0.35)).collect()
}

fn c5_menger(shapes: &[Shape]) -> Outcome {
    for (i, s) in shapes.iter().enumerate() {
        let sep = min_vertex_separator(s);
        let brute = brute_force_separator_size(s);
        check(s.is_separator(&sep.separator), || format!("shape {i}: cut does not separate"))?;
        check(sep.size == brute && sep.disjoint_paths.len() == brute, || {
            format!("shape {i}: cut {} paths {} exhaustive {brute}", sep.size, sep.disjoint_paths.len())
        })?;
        let mut used = std::collections::BTreeSet::new();
        for p in &sep.disjoint_paths {
            check(p.iter().all(|v| used.insert(*v)), || format!("shape {i}: paths overlap"))?;
            check(p.windows(2).all(|w| s.edges.iter().any(|&(a, b)| (a, b) == (w[0], w[1]) || (b, a) == (w[0], w[1]))), || {
                format!("shape {i}: path {p:?} uses a missing edge")
            })?;
        }
    }
    Ok(format!("{} shapes", shapes.len()))
}

fn c6_ordering(shapes: &[Shape]) -> Outcome {
    let mut tight = 0;
    for (i, s) in shapes.iter().enumerate() {
        let r = norm_exponents(s);
        check(r.ordering.k1 + r.ordering.k2 <= r.f, || {
            format!("shape {i}: k1 {} + k2 {} > f {}", r.ordering.k1, r.ordering.k2, r.f)
        })?;
        tight += usize::from(r.k() == r.f);
    }
    Ok(format!("{} shapes, {tight} with k = f", shapes.len()))
}

fn series(target: Target, mode: SampleMode, sym: &str, sizes: &[u64], link: Option<(&str, u32)>, trials: usize) -> Result<f64, String> {
    let mut points = Vec::new();
    for &size in sizes {
        let mut dims = BTreeMap::from([(sym.to_string(), size)]);
        if let Some((other, k)) = link {
            dims.insert(other.to_string(), size.pow(k));
        }
        let config = SampleConfig { target: target.clone(), mode, dims, trials, seed: 2024, ..SampleConfig::default() };
        points.push((size as f64, monte_carlo(&config).map_err(|e| e.to_string())?));
    }
    Ok(scaling_fit_reports(&points).map_err(|e| e.to_string())?.slope)
}

fn c7_scaling() -> Outcome {
    let start = Instant::now();
    let wigner = series(Target::Shape(Shape::wigner()), SampleMode::Coupled, "n", &[64, 128, 256, 512, 1024], None, 20)?;
    let kr = series(
        Target::Schema(builtin_schema("khatri-rao-q2")),
        SampleMode::Decoupled,
        "d",
        &[8, 16, 32, 64],
        Some(("n", 2)),
        5,
    )?;
    let elapsed = start.elapsed();
    check((0.4..=0.6).contains(&wigner), || format!("Wigner slope {wigner:.4}"))?;
    check((0.8..=1.2).contains(&kr), || format!("KR slope {kr:.4}"))?;
    within(elapsed, Duration::from_secs(600), "scaling runs")?;
    Ok(format!("Wigner slope {wigner:.4}, KR (n = d²) slope {kr:.4}, {elapsed:.2?}"))
}

fn c8_kr3() -> Outcome {
    let cp = chaos_parameters(&khatri_rao_schema(3, 1, 1).map_err(|e| e.to_string())?.unbind());
    check(cp.sigma.norm_sq == max("d^3 ∨ n"), || format!("σ² = {:?}", cp.sigma.norm_sq))?;
    let d2 = mono("d^2");
    for (name, p) in [("v", &cp.v), ("r", &cp.r)] {
        check(p.norm_sq.terms().iter().all(|m| m.dominated_by(&d2)), || format!("{name}² = {:?}", p.norm_sq))?;
    }
    Ok(format!(
        "σ = {}, v = {}, r = {}",
        cp.render(FlatteningClass::Sigma),
        cp.render(FlatteningClass::V),
        cp.render(FlatteningClass::Rr)
    ))
}

fn c9_determinism() -> Outcome {
    let commands: [&[&str]; 3] = [
        &["sample", "--builtin", "khatri-rao-q2", "--dims", "d=6,n=36", "--trials", "8", "--seed", "5"],
        &["sample", "--builtin", "wigner", "--n", "100", "--trials", "8", "--seed", "5"],
        &["scaling", "--builtin", "wigner", "--sizes", "16,32,64", "--trials", "4", "--seed", "5"],
    ];
    for args in commands {
        let (c1, a) = cli(args);
        let (c2, b) = cli(args);
        check(c1 == 0 && c2 == 0, || format!("{args:?} exited {c1}/{c2}"))?;
        check(a == b, || format!("{args:?} differs between runs"))?;
    }
    Ok(format!("{} sampling commands byte-identical", commands.len()))
}

const PROFILE_TRANSCRIPTION: &str = include_str!("golden/bound_profiles.txt");

fn c10_profiles() -> Outcome {
    let want: Vec<&str> = PROFILE_TRANSCRIPTION.lines().collect();
    for q in 1..=4 {
        let got: Vec<String> = Theorem::ALL.iter().map(|&t| BoundProfile::symbolic(t, q).canonical()).collect();
        check(got == want, || format!("q = {q}: {got:#?}"))?;
    }
    let (_, text) = cli(&["analyze", "--builtin", "tensor-pca-2"]);
    let printed: Vec<&str> = text.lines().filter(|l| l.contains("E‖Y‖")).map(str::trim).collect();
    check(printed == want, || "analyze output differs from the transcription".into())?;
    Ok(format!("{} profiles", want.len()))
}

fn main() {
    let (plain, weighted) = corpus();
    let shapes = shape_corpus();
    let criteria: Vec<Criterion> = vec![
        ("table reproduction", Box::new(c1_tables)),
        ("oracle equivalence", Box::new(|| c2_oracle(&plain, &weighted))),
        ("parameter ordering r ≤ v, r ≤ σ", Box::new(|| c3_ordering(&plain, &weighted))),
        ("graph exponents", Box::new(c4_graph)),
        ("Menger certificate", Box::new(|| c5_menger(&shapes))),
        ("edge-ordering bound", Box::new(|| c6_ordering(&shapes))),
        ("empirical scaling", Box::new(c7_scaling)),
        ("Khatri-Rao q = 3 parameters", Box::new(c8_kr3)),
        ("determinism", Box::new(c9_determinism)),
        ("bound-profile golden file", Box::new(c10_profiles)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
