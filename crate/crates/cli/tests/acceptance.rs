//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 2 to 7 also register the equivalent `treeqi` invocations;
//! criterion 9 reruns each of them and compares every output byte.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeqi_core::generate::{
    levelwise_automorphism, perturb_in_subtree, perturb_order_preserving, random_automorphism,
};
use treeqi_core::mixed::{build_mixed, verify_mixed_structure, MixedPolicy};
use treeqi_core::qi::{
    check_geodesic_image, check_same_depth, is_order_preserving, measure_qi, sup_distance, write_map_file,
    FiniteTreeMap, MeasureOptions, PairSource,
};
use treeqi_core::rational::{format_rational, int, Rational};
use treeqi_core::transforms::{approximate_by_mixed, normalize_order_preserving, Approximation, ValidationFailure};
use treeqi_core::tree::{boundary, FiniteSubtree, TreeShape, VertexAddress};
use treeqi_core::TransformError;

type Verdict = Result<String, String>;

fn d3() -> TreeShape {
    TreeShape::new(3).unwrap()
}

fn exhaustive() -> MeasureOptions {
    MeasureOptions::default()
}

/// A `treeqi` run whose stdout, exit status and `outputs` must be
/// reproducible.
struct Invocation {
    args: Vec<String>,
    outputs: Vec<PathBuf>,
}

struct Ctx {
    dir: tempfile::TempDir,
    invocations: Vec<Invocation>,
    mixed_maps: Vec<FiniteTreeMap>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn save(&self, m: &FiniteTreeMap, name: &str) -> String {
        let p = self.path(name);
        write_map_file(m, &p).unwrap();
        p.display().to_string()
    }

    fn invoke(&mut self, args: &[&str], outputs: &[&str]) {
        self.invocations.push(Invocation {
            args: args.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| self.dir.path().join(s)).collect(),
        });
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    check(elapsed.as_secs() < limit_secs, || {
        format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn random_vertex(rng: &mut ChaCha8Rng, shape: TreeShape, max_depth: usize) -> VertexAddress {
    let mut v = VertexAddress::root();
    for _ in 0..rng.gen_range(0..=max_depth) {
        v = v.child(rng.gen_range(0..shape.child_count(&v)));
    }
    v
}

fn isoperimetry(_: &mut Ctx) -> Verdict {
    let start = Instant::now();
    let mut checked = 0;
    for d in [3u32, 4, 5] {
        let shape = TreeShape::new(d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(d));
        for _ in 0..1000 {
            let root = if rng.gen_bool(0.5) {
                VertexAddress::root()
            } else {
                random_vertex(&mut rng, shape, 4)
            };
            let size = rng.gen_range(1..=200);
            let s = FiniteSubtree::random(shape, root, size, &mut rng);
            let got = boundary(s.vertices().cloned(), shape).map_err(|e| e.to_string())?.len();
            let expected = s.len() * (d as usize - 2) + if s.contains_tree_root() { 2 } else { 1 };
            check(got == expected, || format!("d={d} |S|={}: |∂S|={got}, expected {expected}", s.len()))?;
            checked += 1;
        }
    }
    within(start.elapsed(), 5)?;
    Ok(format!("{checked} subtrees, 0 exceptions"))
}

fn isometry_baseline(ctx: &mut Ctx) -> Verdict {
    let start = Instant::now();
    let mut maps = vec![("identity".to_string(), FiniteTreeMap::identity(d3(), 8).unwrap())];
    for seed in 0..50 {
        maps.push((format!("levelwise seed {seed}"), levelwise_automorphism(d3(), 8, seed).unwrap()));
    }
    for (k, (name, m)) in maps.iter().enumerate() {
        let r = measure_qi(m, &exhaustive()).map_err(|e| e.to_string())?;
        check(
            r.best_single_c == int(1) && r.coarse_surjectivity_radius == 0 && r.order_preserving,
            || format!("{name}: C={} coarse={} order={}", format_rational(&r.best_single_c), r.coarse_surjectivity_radius, r.order_preserving),
        )?;
        check(r.pairs_checked == 766 * 765 / 2, || format!("{name}: {} pairs", r.pairs_checked))?;
        let file = ctx.save(m, &format!("c2_{k}.qi"));
        ctx.invoke(&["verify", "--in", &file, "--pairs", "exhaustive"], &[]);
    }
    within(start.elapsed(), 60)?;
    Ok(format!("{} maps on 766 vertices: C=1, coarse=0, order-preserving", maps.len()))
}

fn mixed_guarantees(ctx: &mut Ctx) -> Verdict {
    let start = Instant::now();
    let mut worst_c = int(1);
    let mut worst_mult = 0;
    let mut worst_coarse = 0;
    let mut dist_range = (u32::MAX, 0);
    for seed in 0..100u64 {
        let (m, _) = build_mixed(d3(), 2, 4, &MixedPolicy::Random { seed }).map_err(|e| e.to_string())?;
        let report = verify_mixed_structure(&m, 2).map_err(|e| e.to_string())?;
        check(report.passed(), || format!("seed {seed}: {}", report.violations[0]))?;
        let mult = *report.max_multiplicity.iter().max().unwrap();
        let (lo, hi) = report.child_distance_range.unwrap();
        check(mult <= 9, || format!("seed {seed}: multiplicity {mult}"))?;
        check(lo >= 1 && hi <= 81, || format!("seed {seed}: child distances {lo}..{hi}"))?;
        let q = measure_qi(
            &m,
            &MeasureOptions {
                max_lca_depth: Some(4),
                target_radius: Some(6),
                ..exhaustive()
            },
        )
        .map_err(|e| e.to_string())?;
        check(q.best_single_c <= int(162), || format!("seed {seed}: C={}", format_rational(&q.best_single_c)))?;
        check(q.coarse_surjectivity_radius <= 81, || format!("seed {seed}: coarse {}", q.coarse_surjectivity_radius))?;
        worst_c = worst_c.max(q.best_single_c.clone());
        worst_mult = worst_mult.max(mult);
        worst_coarse = worst_coarse.max(q.coarse_surjectivity_radius);
        dist_range = (dist_range.0.min(lo), dist_range.1.max(hi));

        let out = format!("c3_{seed}.qi");
        let trace = format!("c3_{seed}.trace");
        let file = ctx.path(&out).display().to_string();
        let seed_text = seed.to_string();
        ctx.invoke(
            &[
                "gen-mixed", "--degree", "3", "--D", "2", "--levels", "4", "--policy", "random", "--seed",
                &seed_text, "--out", &file, "--trace-out", &ctx.path(&trace).display().to_string(),
            ],
            &[&out, &trace],
        );
        ctx.invoke(&["verify-mixed", "--in", &file, "--D", "2"], &[]);
        ctx.invoke(&["verify", "--in", &file, "--max-lca-depth", "4", "--target-radius", "6"], &[]);
        ctx.mixed_maps.push(m);
    }
    within(start.elapsed(), 600)?;
    Ok(format!(
        "100 seeds: max multiplicity {worst_mult}, child distances {}..{}, max C {} (lca depth <= 4), max coarse radius {worst_coarse}",
        dist_range.0,
        dist_range.1,
        format_rational(&worst_c)
    ))
}

fn geodesic_suites(ctx: &mut Ctx) -> Verdict {
    let mut maps: Vec<(String, FiniteTreeMap)> = ctx
        .mixed_maps
        .iter()
        .enumerate()
        .map(|(s, m)| (format!("mixed seed {s}"), m.clone()))
        .collect();
    for seed in 0..100u64 {
        let base = if seed % 2 == 0 {
            ctx.mixed_maps[seed as usize].clone()
        } else {
            random_automorphism(d3(), 8, seed).unwrap()
        };
        let g = perturb_order_preserving(&base, seed).unwrap();
        check(is_order_preserving(&g).preserving, || format!("perturbed seed {seed} lost order"))?;
        maps.push((format!("perturbed seed {seed}"), g));
    }
    let mut geodesic_checked = 0;
    for (k, (name, m)) in maps.iter().enumerate() {
        let c = measure_qi(m, &exhaustive()).map_err(|e| e.to_string())?.best_single_c;
        let geo = check_geodesic_image(m, &c, &PairSource::Exhaustive);
        check(geo.is_empty(), || format!("{name}: geodesic violation {:?}", geo[0]))?;
        let same = check_same_depth(m, &c).map_err(|e| format!("{name}: {e}"))?;
        check(same.is_empty(), || format!("{name}: same-depth violation {:?}", same[0]))?;
        geodesic_checked += 1;
        let file = ctx.save(m, &format!("c4_{k}.qi"));
        ctx.invoke(&["verify", "--in", &file, "--C", &format_rational(&c)], &[]);
    }
    Ok(format!("{geodesic_checked} maps: 0 geodesic, 0 same-depth violations at the measured C"))
}

fn normalization(ctx: &mut Ctx) -> Verdict {
    let mut worst = (0u32, int(0));
    let mut max_c = int(1);
    for seed in 0..100u64 {
        let base = random_automorphism(d3(), 7, seed).unwrap();
        let f = perturb_in_subtree(&base, 2, seed).unwrap();
        let c = measure_qi(&f, &exhaustive()).map_err(|e| e.to_string())?.best_single_c;
        check(c <= int(3), || format!("seed {seed}: measured C={} above 3", format_rational(&c)))?;
        let n = normalize_order_preserving(&f, &c).map_err(|e| e.to_string())?;
        check(is_order_preserving(&n.map).preserving, || format!("seed {seed}: output not order-preserving"))?;
        let again = normalize_order_preserving(&n.map, &c).map_err(|e| e.to_string())?;
        check(again.map == n.map, || format!("seed {seed}: not idempotent"))?;
        let d = sup_distance(&f, &n.map).map_err(|e| e.to_string())?;
        let bound = int(3) * &c * &c * &c + int(2) * &c;
        check(Rational::from_integer(d.into()) <= bound, || {
            format!("seed {seed}: distance {d} above {}", format_rational(&bound))
        })?;
        if d > worst.0 {
            worst = (d, bound.clone());
        }
        max_c = max_c.max(c.clone());
        let input = ctx.save(&f, &format!("c5_{seed}.qi"));
        let out = format!("c5_{seed}_norm.qi");
        let c_text = format_rational(&c);
        ctx.invoke(
            &["normalize", "--in", &input, "--C", &c_text, "--out", &ctx.path(&out).display().to_string()],
            &[&out],
        );
    }
    Ok(format!(
        "100 maps, C <= {}: order-preserving, idempotent, max distance {} (bound there {})",
        format_rational(&max_c),
        worst.0,
        format_rational(&worst.1)
    ))
}

fn guaranteed_regime(ctx: &mut Ctx) -> Verdict {
    let start = Instant::now();
    let mut worst = 0;
    for seed in 0..20u64 {
        let g = levelwise_automorphism(d3(), 14, seed).unwrap();
        let a = approximate_by_mixed(&g, &int(1), None).map_err(|e| match e {
            TransformError::Validation(f) => format!("seed {seed}: {f}"),
            other => format!("seed {seed}: {other}"),
        })?;
        check(a.constants.d_used == 7 && a.levels == 2, || format!("seed {seed}: D={} n={}", a.constants.d_used, a.levels))?;
        check(a.sup_distance <= 13, || format!("seed {seed}: distance {}", a.sup_distance))?;
        worst = worst.max(a.sup_distance);
        let input = ctx.save(&g, &format!("c6_{seed}.qi"));
        let out = format!("c6_{seed}_mixed.qi");
        ctx.invoke(
            &["approximate", "--in", &input, "--C", "1", "--out", &ctx.path(&out).display().to_string()],
            &[&out],
        );
    }
    within(start.elapsed(), 300)?;
    Ok(format!("20 automorphisms of the radius-14 ball: all validated, max distance {worst} <= 13"))
}

type Outcome = (bool, FiniteTreeMap, u32, Vec<ValidationFailure>);

fn outcome(r: Result<Approximation, TransformError>) -> Result<Outcome, String> {
    match r {
        Ok(a) => Ok((true, a.map, a.sup_distance, Vec::new())),
        Err(TransformError::Validation(f)) => {
            let f = *f;
            Ok((false, f.approximation.map, f.approximation.sup_distance, f.failures))
        }
        Err(other) => Err(other.to_string()),
    }
}

fn round_trip(ctx: &mut Ctx) -> Verdict {
    let mut passed = 0;
    let mut distances = Vec::new();
    for seed in 0..100u64 {
        let f0 = &ctx.mixed_maps[seed as usize];
        let c = measure_qi(f0, &exhaustive()).map_err(|e| e.to_string())?.best_single_c;
        let first = outcome(approximate_by_mixed(f0, &c, Some(2)))?;
        let second = outcome(approximate_by_mixed(f0, &c, Some(2)))?;
        check(first == second, || format!("seed {seed}: reruns differ"))?;
        if first.0 {
            passed += 1;
            let bound = treeqi_core::transforms::constants(&c, Some(2)).unwrap().final_bound;
            check(Rational::from_integer(first.2.into()) <= bound, || {
                format!("seed {seed}: distance {} above {}", first.2, format_rational(&bound))
            })?;
            check(verify_mixed_structure(&first.1, 2).map_err(|e| e.to_string())?.passed(), || {
                format!("seed {seed}: validated output fails the structure check")
            })?;
            distances.push(first.2);
        }
        let input = ctx.path(&format!("c3_{seed}.qi")).display().to_string();
        let out = format!("c7_{seed}.qi");
        let trace = format!("c7_{seed}.trace");
        let c_text = format_rational(&c);
        ctx.invoke(&["oracle", "--in", &input], &[]);
        ctx.invoke(
            &[
                "approximate", "--in", &input, "--C", &c_text, "--D-override", "2", "--out",
                &ctx.path(&out).display().to_string(), "--trace-out", &ctx.path(&trace).display().to_string(),
            ],
            &[&out, &trace],
        );
    }
    let spread = match (distances.iter().min(), distances.iter().max()) {
        (Some(lo), Some(hi)) => format!("{lo}..{hi}"),
        _ => "none".into(),
    };
    Ok(format!(
        "100 seeds at D=2: deterministic; validation passed {passed}/100, achieved distances {spread}, all within the final bound"
    ))
}

fn oracle_equivalence(_: &mut Ctx) -> Verdict {
    for seed in 0..20u64 {
        let radius = 1 + (seed % 5) as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let m = FiniteTreeMap::from_fn(d3(), radius, |_| random_vertex(&mut rng, d3(), radius as usize + 1)).unwrap();
        let n = m.len() as u64;
        let full = measure_qi(&m, &exhaustive()).map_err(|e| e.to_string())?;
        let sampled = measure_qi(
            &m,
            &MeasureOptions {
                pairs: PairSource::Sampled {
                    count: n * (n - 1) / 2,
                    seed,
                },
                ..exhaustive()
            },
        )
        .map_err(|e| e.to_string())?;
        check(full.same_measurements(&sampled), || format!("seed {seed}: reports differ"))?;
        check(full.pairs_checked == sampled.pairs_checked, || format!("seed {seed}: pair counts differ"))?;
    }
    Ok("20 random maps, radius 1..5: sampled-all equals exhaustive in every measured field".into())
}

fn run_cli(inv: &Invocation) -> Result<(Vec<u8>, Option<i32>, Vec<Vec<u8>>), String> {
    for out in &inv.outputs {
        let _ = std::fs::remove_file(out);
    }
    let output = Command::new(env!("CARGO_BIN_EXE_treeqi"))
        .args(&inv.args)
        .output()
        .map_err(|e| e.to_string())?;
    let files = inv
        .outputs
        .iter()
        .map(|p| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((output.stdout, output.status.code(), files))
}

fn determinism(ctx: &mut Ctx) -> Verdict {
    let mut by_status = std::collections::BTreeMap::new();
    for inv in &ctx.invocations {
        let first = run_cli(inv)?;
        let second = run_cli(inv)?;
        let line = inv.args.join(" ");
        check(matches!(first.1, Some(0) | Some(2)), || {
            format!("`treeqi {line}` exited with {:?}", first.1)
        })?;
        check(first == second, || format!("`treeqi {line}` is not reproducible"))?;
        *by_status.entry(first.1.unwrap()).or_insert(0) += 1;
    }
    let statuses: Vec<String> = by_status.iter().map(|(code, n)| format!("{n} exit {code}")).collect();
    Ok(format!(
        "{} invocations rerun byte-identically ({})",
        ctx.invocations.len(),
        statuses.join(", ")
    ))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [(u32, &str, fn(&mut Ctx) -> Verdict); 9] = [
        (1, "isoperimetry exactness", isoperimetry),
        (2, "isometry baseline", isometry_baseline),
        (3, "mixed-construction guarantees", mixed_guarantees),
        (4, "geodesic-image and same-depth suites", geodesic_suites),
        (5, "normalization contract", normalization),
        (6, "approximation at the guaranteed depth", guaranteed_regime),
        (7, "round trip at D=2", round_trip),
        (8, "sampled/exhaustive oracle equivalence", oracle_equivalence),
        (9, "CLI determinism", determinism),
    ];
    let mut ctx = Ctx {
        dir: tempfile::tempdir().expect("temporary directory"),
        invocations: Vec::new(),
        mixed_maps: Vec::new(),
    };
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let verdict = run(&mut ctx);
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {id} [PRIMARY] PASS {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("criterion {id} [PRIMARY] FAIL {name}: {why} ({secs:.1}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
