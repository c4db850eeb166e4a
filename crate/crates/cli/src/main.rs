//! `treeqi`: generate, verify and transform finite self-maps of regular trees.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 when a requested
//! check or validation fails, 3 when a size budget is exceeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use treeqi_core::mixed::{build_mixed_with_budget, verify_mixed_structure, write_trace, BuildTrace, MixedPolicy};
use treeqi_core::qi::{
    check_geodesic_image, check_same_depth, compose, measure_qi, read_map_file, sup_distance, write_map_file,
    FiniteTreeMap, MeasureOptions, PairSource,
};
use treeqi_core::rational::{format_rational, parse_rational, Rational};
use treeqi_core::transforms::{approximate_by_mixed, constants, normalize_order_preserving, Approximation};
use treeqi_core::tree::DEFAULT_MAX_VERTICES;
use treeqi_core::{MapError, MixedError, TransformError, TreeError, TreeShape};

/// Exhaustive `verify` refuses more pairs than this; `oracle` does not.
const EXHAUSTIVE_PAIR_LIMIT: u64 = 500_000_000;
/// Violation lines printed in a text report.
const SHOWN_VIOLATIONS: usize = 1000;

#[derive(Parser)]
#[command(name = "treeqi", version, about = "Quasi-isometries of regular trees on finite balls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Emit a JSON report instead of key=value lines.
    #[arg(long, global = true)]
    json: bool,
    /// Refuse balls with more vertices than this.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_VERTICES)]
    max_vertices: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyName {
    Minimal,
    Random,
    Deepest,
}

#[derive(Subcommand)]
enum Command {
    /// Build a D-deep mixed-subtree map.
    GenMixed {
        #[arg(long)]
        degree: u32,
        #[arg(long = "D")]
        step: u32,
        #[arg(long)]
        levels: u32,
        #[arg(long, value_enum, default_value = "minimal")]
        policy: PolicyName,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the construction trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Measure the QI constant and related properties of a map.
    Verify {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Pair selection: `exhaustive` or `sampled:<n>`.
        #[arg(long, default_value = "exhaustive")]
        pairs: String,
        /// Seed for sampled pairs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Measure exhaustively with no pair-count limit.
    Oracle {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Check the mixed-subtree structure of a map.
    VerifyMixed {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "D")]
        step: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Replace a map by its order-preserving normalization.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "C")]
        c: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Approximate an order-preserving root-fixing map by a mixed-subtree map.
    Approximate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "C")]
        c: String,
        #[arg(long = "D-override")]
        d_override: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compose two maps: `a` after `b`.
    Compose {
        /// Outer map, applied second.
        #[arg(long)]
        a: PathBuf,
        /// Inner map, applied first.
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sup distance between two maps over the smaller domain.
    Distance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the constants derived from a QI constant.
    Constants {
        #[arg(long = "C")]
        c: String,
        #[arg(long = "D-override")]
        d_override: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Candidate constant; violating pairs are listed and the structural
    /// checks run at this constant.
    #[arg(long = "C")]
    c: Option<String>,
    /// Target ball radius for coarse surjectivity.
    #[arg(long)]
    target_radius: Option<u32>,
    /// Only pairs whose lowest common ancestor is at most this deep.
    #[arg(long)]
    max_lca_depth: Option<u32>,
}

/// A run that completed but whose requested check failed.
struct Outcome {
    report: String,
    passed: bool,
}

impl Outcome {
    fn pass(report: String) -> Self {
        Self { report, passed: true }
    }
}

fn parse_c(text: &str) -> Result<Rational> {
    parse_rational(text).ok_or_else(|| anyhow!("invalid constant {text:?}: expected an integer, n/d or a decimal"))
}

fn parse_pairs(text: &str, seed: u64) -> Result<PairSource> {
    if text == "exhaustive" {
        return Ok(PairSource::Exhaustive);
    }
    let count = text
        .strip_prefix("sampled:")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| anyhow!("invalid --pairs {text:?}: expected `exhaustive` or `sampled:<n>`"))?;
    Ok(PairSource::Sampled { count, seed })
}

fn read(path: &Path, common: &Common) -> Result<FiniteTreeMap> {
    read_map_file(path, common.max_vertices).with_context(|| format!("reading {}", path.display()))
}

fn write(m: &FiniteTreeMap, path: &Path) -> Result<()> {
    write_map_file(m, path).with_context(|| format!("writing {}", path.display()))
}

fn write_trace_file(trace: &BuildTrace, path: &Path) -> Result<()> {
    std::fs::write(path, write_trace(trace)).with_context(|| format!("writing {}", path.display()))
}

fn json_text(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

fn gen_mixed(
    degree: u32,
    step: u32,
    levels: u32,
    policy: PolicyName,
    seed: u64,
    out: &Path,
    trace_out: Option<&Path>,
    common: &Common,
) -> Result<Outcome> {
    let shape = TreeShape::new(degree)?;
    let policy = match policy {
        PolicyName::Minimal => MixedPolicy::Minimal,
        PolicyName::Random => MixedPolicy::Random { seed },
        PolicyName::Deepest => MixedPolicy::DeepestFeasible,
    };
    let (m, trace) = build_mixed_with_budget(shape, step, levels, &policy, common.max_vertices)?;
    write(&m, out)?;
    if let Some(path) = trace_out {
        write_trace_file(&trace, path)?;
    }
    let report = if common.json {
        json_text(&json!({
            "degree": degree,
            "D": step,
            "levels": levels,
            "radius": m.radius(),
            "vertices": m.len(),
            "policy": policy.to_string(),
            "classes": trace.classes.len(),
        }))
    } else {
        format!(
            "degree={degree}\nD={step}\nlevels={levels}\nradius={}\nvertices={}\npolicy={policy}\nclasses={}\n",
            m.radius(),
            m.len(),
            trace.classes.len()
        )
    };
    Ok(Outcome::pass(report))
}

fn measure(args: &MeasureArgs, pairs: PairSource, limit: Option<u64>, common: &Common) -> Result<Outcome> {
    let m = read(&args.input, common)?;
    let n = m.len() as u64;
    let total = n * n.saturating_sub(1) / 2;
    if let (PairSource::Exhaustive, Some(limit)) = (&pairs, limit) {
        if total > limit && args.max_lca_depth.is_none() {
            return Err(TreeError::BudgetExceeded {
                radius: m.radius(),
                size: Some(n),
                budget: common.max_vertices,
            })
            .with_context(|| {
                format!("{total} pairs is too many for an exhaustive check; use --pairs sampled:<n> or the oracle command")
            });
        }
    }
    let candidate = args.c.as_deref().map(parse_c).transpose()?;
    let options = MeasureOptions {
        pairs: pairs.clone(),
        candidate: candidate.clone(),
        target_radius: args.target_radius,
        max_lca_depth: args.max_lca_depth,
        max_vertices: common.max_vertices,
    };
    let mut report = measure_qi(&m, &options)?;
    if let Some(c) = &candidate {
        report
            .violations
            .extend(check_geodesic_image(&m, c, &pairs).iter().map(|v| v.to_violation()));
        if report.order_preserving {
            report
                .violations
                .extend(check_same_depth(&m, c)?.iter().map(|v| v.to_violation()));
        }
    }
    let passed = report.violations.is_empty();
    let text = if common.json {
        json_text(&serde_json::to_value(&report)?)
    } else {
        let full = report.to_string();
        let mut lines: Vec<&str> = full.lines().collect();
        let listed = report.violations.len();
        if listed > SHOWN_VIOLATIONS {
            lines.truncate(lines.len() - (listed - SHOWN_VIOLATIONS));
            lines.push("violations_truncated=true");
        }
        lines.iter().fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
    };
    Ok(Outcome { report: text, passed })
}

fn verify_mixed(input: &Path, step: u32, common: &Common) -> Result<Outcome> {
    let m = read(input, common)?;
    let report = verify_mixed_structure(&m, step)?;
    let text = if common.json {
        json_text(&json!({
            "report": report,
            "passed": report.passed(),
        }))
    } else {
        report.to_string()
    };
    Ok(Outcome {
        report: text,
        passed: report.passed(),
    })
}

fn normalize(input: &Path, c: &str, out: &Path, common: &Common) -> Result<Outcome> {
    let f = read(input, common)?;
    let c = parse_c(c)?;
    let n = normalize_order_preserving(&f, &c)?;
    write(&n.map, out)?;
    let text = if common.json {
        json_text(&serde_json::to_value(&n)?)
    } else {
        let mut t = String::new();
        writeln!(t, "C={}", format_rational(&c)).unwrap();
        writeln!(t, "sup_distance={}", n.sup_distance).unwrap();
        writeln!(t, "bound={}", format_rational(&n.bound)).unwrap();
        writeln!(t, "within_bound={}", n.within_bound).unwrap();
        writeln!(t, "measured_C={}", format_rational(&n.measured_c)).unwrap();
        writeln!(t, "measured_exhaustively={}", n.measured_exhaustively).unwrap();
        for w in &n.warnings {
            writeln!(t, "warning={w}").unwrap();
        }
        t
    };
    Ok(Outcome {
        report: text,
        passed: n.within_bound,
    })
}

fn approximation_text(a: &Approximation, failures: &[String]) -> String {
    let mut t = a.constants.to_string();
    writeln!(t, "levels={}", a.levels).unwrap();
    writeln!(t, "radius={}", a.map.radius()).unwrap();
    writeln!(t, "sup_distance={}", a.sup_distance).unwrap();
    writeln!(t, "measured_C={}", format_rational(&a.measured_c)).unwrap();
    writeln!(t, "measured_exhaustively={}", a.measured_exhaustively).unwrap();
    writeln!(t, "passed={}", failures.is_empty()).unwrap();
    writeln!(t, "failures={}", failures.len()).unwrap();
    for f in failures.iter().take(SHOWN_VIOLATIONS) {
        writeln!(t, "failure {f}").unwrap();
    }
    for w in &a.warnings {
        writeln!(t, "warning={w}").unwrap();
    }
    t
}

fn approximate(
    input: &Path,
    c: &str,
    d_override: Option<u64>,
    out: &Path,
    trace_out: Option<&Path>,
    common: &Common,
) -> Result<Outcome> {
    let g = read(input, common)?;
    let c = parse_c(c)?;
    let (approximation, failures) = match approximate_by_mixed(&g, &c, d_override) {
        Ok(a) => (a, Vec::new()),
        Err(TransformError::Validation(failed)) => {
            let failed = *failed;
            (failed.approximation, failed.failures)
        }
        Err(other) => return Err(other.into()),
    };
    write(&approximation.map, out)?;
    if let Some(path) = trace_out {
        write_trace_file(&approximation.trace, path)?;
    }
    let text = if common.json {
        json_text(&json!({
            "approximation": approximation,
            "passed": failures.is_empty(),
            "failures": failures,
        }))
    } else {
        let lines: Vec<String> = failures.iter().map(ToString::to_string).collect();
        approximation_text(&approximation, &lines)
    };
    Ok(Outcome {
        report: text,
        passed: failures.is_empty(),
    })
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::GenMixed {
            degree,
            step,
            levels,
            policy,
            seed,
            out,
            trace_out,
            common,
        } => gen_mixed(degree, step, levels, policy, seed, &out, trace_out.as_deref(), &common),
        Command::Verify {
            measure: args,
            pairs,
            seed,
            common,
        } => {
            let pairs = parse_pairs(&pairs, seed)?;
            measure(&args, pairs, Some(EXHAUSTIVE_PAIR_LIMIT), &common)
        }
        Command::Oracle { measure: args, common } => measure(&args, PairSource::Exhaustive, None, &common),
        Command::VerifyMixed { input, step, common } => verify_mixed(&input, step, &common),
        Command::Normalize { input, c, out, common } => normalize(&input, &c, &out, &common),
        Command::Approximate {
            input,
            c,
            d_override,
            out,
            trace_out,
            common,
        } => approximate(&input, &c, d_override, &out, trace_out.as_deref(), &common),
        Command::Compose { a, b, out, common } => {
            let outer = read(&a, &common)?;
            let inner = read(&b, &common)?;
            let composed = compose(&outer, &inner)?;
            write(&composed.map, &out)?;
            let text = if common.json {
                json_text(&json!({
                    "requested_radius": composed.requested_radius,
                    "effective_radius": composed.effective_radius,
                }))
            } else {
                format!(
                    "requested_radius={}\neffective_radius={}\n",
                    composed.requested_radius, composed.effective_radius
                )
            };
            Ok(Outcome::pass(text))
        }
        Command::Distance { a, b, common } => {
            let d = sup_distance(&read(&a, &common)?, &read(&b, &common)?)?;
            let text = if common.json {
                json_text(&json!({ "sup_distance": d }))
            } else {
                format!("sup_distance={d}\n")
            };
            Ok(Outcome::pass(text))
        }
        Command::Constants { c, d_override, common } => {
            let bundle = constants(&parse_c(&c)?, d_override)?;
            let text = if common.json {
                json_text(&serde_json::to_value(&bundle)?)
            } else {
                bundle.to_string()
            };
            Ok(Outcome::pass(text))
        }
    }
}

/// Whether the error chain bottoms out in an exceeded size budget.
fn is_budget(err: &anyhow::Error) -> bool {
    fn tree(e: &TreeError) -> bool {
        matches!(e, TreeError::BudgetExceeded { .. })
    }
    fn map(e: &MapError) -> bool {
        matches!(e, MapError::Tree(t) if tree(t))
    }
    fn mixed(e: &MixedError) -> bool {
        match e {
            MixedError::Tree(t) => tree(t),
            MixedError::Map(m) => map(m),
            _ => false,
        }
    }
    err.chain().any(|cause| {
        cause.downcast_ref::<TreeError>().is_some_and(tree)
            || cause.downcast_ref::<MapError>().is_some_and(map)
            || cause.downcast_ref::<MixedError>().is_some_and(mixed)
            || cause.downcast_ref::<TransformError>().is_some_and(|t| match t {
                TransformError::Map(m) => map(m),
                TransformError::Mixed(m) => mixed(m),
                _ => false,
            })
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_budget(&err) {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
