//! Conversions between classes of tree quasi-isometries.
//!
//! [`normalize_order_preserving`] replaces a map by the lowest common
//! ancestor of the image of each subtree, which is order-preserving and
//! within `3C³ + 2C` of a root-fixing `C`-quasi-isometry.
//! [`approximate_by_mixed`] runs the mixed-subtree construction guided by an
//! order-preserving map `g`, sending each D-child `b` to the shallowest
//! vertex of `A_v = g(B_v)` above `g(b)`, and validates every step.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MapError, TransformError};
use crate::mixed::{apply_class, form_classes, span_between, BuildTrace, ClassRecord, LevelClass};
use crate::qi::{is_order_preserving, measure_qi, sup_distance, FiniteTreeMap, MeasureOptions, PairSource};
use crate::rational::{self, ceil_u64, floor_u64, format_rational, int, Rational};
use crate::tree::{Ball, VertexAddress};

/// Pair count up to which the honest-C measurement is exhaustive.
const EXHAUSTIVE_MEASURE_LIMIT: u64 = 20_000_000;
/// Pairs sampled above that limit.
const SAMPLED_MEASURE_PAIRS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstantsBundle {
    #[serde(serialize_with = "rational::serialize")]
    pub c: Rational,
    /// `3C³ + 2C`.
    #[serde(serialize_with = "rational::serialize")]
    pub k_normalize: Rational,
    /// `4C³ + C`.
    #[serde(serialize_with = "rational::serialize")]
    pub k_samedepth: Rational,
    /// `⌈C(C + K) + 1⌉` with `K = k_samedepth`.
    pub d_paper: u64,
    pub d_used: u64,
    /// `K + C·D + C` with `D = d_used`.
    #[serde(serialize_with = "rational::serialize")]
    pub final_bound: Rational,
}

impl fmt::Display for ConstantsBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "C={}", format_rational(&self.c))?;
        writeln!(f, "K_normalize={}", format_rational(&self.k_normalize))?;
        writeln!(f, "K_samedepth={}", format_rational(&self.k_samedepth))?;
        writeln!(f, "D_paper={}", self.d_paper)?;
        writeln!(f, "D={}", self.d_used)?;
        writeln!(f, "bound={}", format_rational(&self.final_bound))
    }
}

pub fn constants(c: &Rational, d_override: Option<u64>) -> Result<ConstantsBundle, TransformError> {
    if *c < int(1) {
        return Err(MapError::InvalidConstant(format_rational(c)).into());
    }
    if d_override == Some(0) {
        return Err(TransformError::InvalidOverride);
    }
    let cube = c * c * c;
    let k_normalize = int(3) * &cube + int(2) * c;
    let k_samedepth = int(4) * &cube + c;
    let d_paper = ceil_u64(&(c * (c + &k_samedepth) + int(1)));
    let d_used = d_override.unwrap_or(d_paper);
    let final_bound = &k_samedepth + c * Rational::from_integer(d_used.into()) + c;
    Ok(ConstantsBundle {
        c: c.clone(),
        k_normalize,
        k_samedepth,
        d_paper,
        d_used,
        final_bound,
    })
}

/// The constant of `m` on its ball: exhaustive for small balls, otherwise a
/// lower bound from a fixed-seed sample.
fn ball_constant(m: &FiniteTreeMap) -> Result<(Rational, bool), MapError> {
    let n = m.len() as u64;
    let pairs = n * n.saturating_sub(1) / 2;
    let exhaustive = pairs <= EXHAUSTIVE_MEASURE_LIMIT;
    let options = MeasureOptions {
        pairs: if exhaustive {
            PairSource::Exhaustive
        } else {
            PairSource::Sampled {
                count: SAMPLED_MEASURE_PAIRS,
                seed: 0,
            }
        },
        // coarse surjectivity is not needed here; keep the target small
        target_radius: Some(0),
        ..MeasureOptions::default()
    };
    Ok((measure_qi(m, &options)?.best_single_c, exhaustive))
}

fn promise_warning(measured: &Rational, exhaustive: bool, c: &Rational) -> Option<String> {
    (measured > c).then(|| {
        format!(
            "input constant on the ball is {}{}, above the promised C={}; the bounds are not guaranteed",
            if exhaustive { "" } else { "at least " },
            format_rational(measured),
            format_rational(c)
        )
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Normalization {
    #[serde(skip)]
    pub map: FiniteTreeMap,
    pub sup_distance: u32,
    /// `3C³ + 2C`.
    #[serde(serialize_with = "rational::serialize")]
    pub bound: Rational,
    pub within_bound: bool,
    /// The input's constant on its ball.
    #[serde(serialize_with = "rational::serialize")]
    pub measured_c: Rational,
    /// Whether `measured_c` covers all pairs or is a sampled lower bound.
    pub measured_exhaustively: bool,
    pub warnings: Vec<String>,
}

/// `g(v) = lca{ f(w) : w a stored descendant of v }`.
pub fn normalize_order_preserving(f: &FiniteTreeMap, c: &Rational) -> Result<Normalization, TransformError> {
    let k = constants(c, None)?.k_normalize;
    let ball = f.ball();
    let mut acc: Vec<VertexAddress> = f.images().to_vec();
    // preorder puts every descendant after its ancestor
    for i in (1..ball.len()).rev() {
        let p = ball.parent(i);
        let merged = acc[p].lca(&acc[i]);
        acc[p] = merged;
    }
    let g = FiniteTreeMap::from_ball(f.shared_ball(), acc)?;
    let order = is_order_preserving(&g);
    assert!(order.preserving, "lca normalization broke order at {:?}", order.witness);

    let distance = sup_distance(f, &g)?;
    let (measured_c, measured_exhaustively) = ball_constant(f)?;
    let mut warnings = Vec::new();
    if !f.image(0).is_root() {
        warnings.push(format!(
            "input sends the root to {}; the bound assumes a root-fixing map",
            f.image(0)
        ));
    }
    warnings.extend(promise_warning(&measured_c, measured_exhaustively, c));
    Ok(Normalization {
        within_bound: Rational::from_integer(distance.into()) <= k,
        map: g,
        sup_distance: distance,
        bound: k,
        measured_c,
        measured_exhaustively,
        warnings,
    })
}

/// Which requirement of the construction failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FailureKind {
    /// The class's image set is not the boundary of a finite subtree rooted
    /// at the class image.
    #[serde(rename = "(1)")]
    Boundary,
    /// Sources with different D-parents share an image.
    #[serde(rename = "(2)")]
    SharedImage,
    /// `d(f(u), g(u)) ≤ K` at a level vertex.
    #[serde(rename = "a")]
    LevelDistance,
    /// `g(u) ∈ T_{f(u)}` at a level vertex.
    #[serde(rename = "b")]
    Containment,
    /// `d(f(w), g(w)) ≤ K + CD + C` at an intermediate vertex.
    #[serde(rename = "c")]
    IntermediateDistance,
    /// `sup_distance(f, g)` above the final bound.
    #[serde(rename = "bound")]
    FinalBound,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::Boundary => "(1)",
            FailureKind::SharedImage => "(2)",
            FailureKind::LevelDistance => "a",
            FailureKind::Containment => "b",
            FailureKind::IntermediateDistance => "c",
            FailureKind::FinalBound => "bound",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationFailure {
    /// Level of the class whose step failed.
    pub level: u32,
    /// Key of that class; the root for the final bound.
    pub class: VertexAddress,
    pub kind: FailureKind,
    pub vertex: VertexAddress,
    pub detail: String,
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "level={} class={} kind={} vertex={} {}",
            self.level, self.class, self.kind, self.vertex, self.detail
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Approximation {
    #[serde(skip)]
    pub map: FiniteTreeMap,
    pub constants: ConstantsBundle,
    #[serde(skip)]
    pub trace: BuildTrace,
    /// Number of levels `n = ⌊R / D⌋`; the map has radius `n·D`.
    pub levels: u32,
    pub sup_distance: u32,
    #[serde(serialize_with = "rational::serialize")]
    pub measured_c: Rational,
    pub measured_exhaustively: bool,
    pub warnings: Vec<String>,
}

/// A completed construction that failed validation.
#[derive(Clone, Debug, Serialize)]
pub struct FailedApproximation {
    pub failures: Vec<ValidationFailure>,
    pub approximation: Approximation,
}

impl fmt::Display for FailedApproximation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "approximation failed validation with {} failure(s)", self.failures.len())?;
        if let Some(first) = self.failures.first() {
            write!(f, "; first: {first}")?;
        }
        Ok(())
    }
}

struct Limits {
    level: u64,
    intermediate: u64,
}

/// Runs one class: `f'(b)` is the shallowest vertex of `A_v` above `g(b)`.
fn approximate_class(
    class: &LevelClass,
    ball: &Ball,
    g: &FiniteTreeMap,
    step: u32,
    limits: &Limits,
) -> (ClassRecord, Vec<ValidationFailure>) {
    let shape = ball.shape();
    let v = &class.image;
    let mut failures = Vec::new();
    let mut fail = |kind, vertex: &VertexAddress, detail: String| {
        failures.push(ValidationFailure {
            level: class.level,
            class: class.key().clone(),
            kind,
            vertex: vertex.clone(),
            detail,
        })
    };
    let image_of = |b: &VertexAddress| g.image(ball.index_of(b).expect("source in the ball"));
    let targets: BTreeSet<&VertexAddress> = class.sources().map(image_of).collect();

    let mut assignment = Vec::with_capacity(class.b_count());
    for b in class.sources() {
        let gb = image_of(b);
        // ancestors of g(b) form a chain, so the shallowest one in A_v is
        // unique
        let chosen = (0..=gb.depth())
            .map(|depth| gb.truncated(depth))
            .find(|a| targets.contains(a))
            .expect("g(b) itself lies in A_v");
        debug_assert!(gb.is_descendant_of(&chosen));
        assignment.push((b.clone(), chosen));
    }

    // (1): images strictly below v spanning a subtree whose boundary they are
    let mut images = BTreeSet::new();
    for (b, a) in &assignment {
        if a == v || !a.is_descendant_of(v) {
            fail(
                FailureKind::Boundary,
                b,
                format!("image {a} is not strictly below the class image {v}"),
            );
        } else {
            images.insert(a.clone());
        }
    }
    let spanned: Vec<VertexAddress> = images.iter().cloned().collect();
    let span = span_between(v, &spanned);
    let boundary: BTreeSet<VertexAddress> = span.boundary(shape).into_iter().collect();
    if let Some(missing) = boundary.difference(&images).next() {
        fail(
            FailureKind::Boundary,
            missing,
            "is on the spanned boundary but no source reaches it".into(),
        );
    }

    // (2): shared images need a shared D-parent
    let mut owner: HashMap<&VertexAddress, (usize, &VertexAddress)> = HashMap::new();
    let grouped = class
        .children
        .iter()
        .enumerate()
        .flat_map(|(k, group)| group.iter().map(move |b| (k, b)));
    for ((k, b), (_, a)) in grouped.zip(&assignment) {
        match owner.get(a) {
            Some(&(other_k, other)) if other_k != k => fail(
                FailureKind::SharedImage,
                b,
                format!("shares image {a} with {other} from another D-parent"),
            ),
            Some(_) => {}
            None => {
                owner.insert(a, (k, b));
            }
        }
    }

    // a), b) at the new level vertices
    for (b, a) in &assignment {
        let gb = image_of(b);
        let d = a.distance(gb);
        if u64::from(d) > limits.level {
            fail(
                FailureKind::LevelDistance,
                b,
                format!("d(f, g) = {d} exceeds {}", limits.level),
            );
        }
        if !gb.is_descendant_of(a) {
            fail(FailureKind::Containment, b, format!("g = {gb} is not below f = {a}"));
        }
    }

    // c) at the vertices strictly between members and their D-children
    for member in &class.members {
        let top = ball.index_of(member).expect("member in the ball");
        for w in ball.subtree(top).skip(1) {
            if ball.depth(w) < ball.depth(top) + step {
                let d = v.distance(g.image(w));
                if u64::from(d) > limits.intermediate {
                    fail(
                        FailureKind::IntermediateDistance,
                        ball.address(w),
                        format!("d(f, g) = {d} exceeds {}", limits.intermediate),
                    );
                }
            }
        }
    }

    let record = ClassRecord {
        level: class.level,
        key: class.key().clone(),
        image: v.clone(),
        seed: None,
        subtree: span.vertices().cloned().collect(),
        restricted: images.iter().any(|a| a.depth() > ball.radius() as usize),
        assignment,
    };
    (record, failures)
}

/// Builds a `D`-deep mixed-subtree map close to the order-preserving,
/// root-fixing map `g`, with `D = d_override` or the guaranteed depth.
pub fn approximate_by_mixed(
    g: &FiniteTreeMap,
    c: &Rational,
    d_override: Option<u64>,
) -> Result<Approximation, TransformError> {
    let bundle = constants(c, d_override)?;
    if let Some(witness) = is_order_preserving(g).witness {
        return Err(TransformError::NotOrderPreserving(witness));
    }
    if !g.image(0).is_root() {
        return Err(TransformError::RootNotFixed(g.image(0).clone()));
    }
    let levels = u64::from(g.radius()) / bundle.d_used;
    if levels == 0 {
        return Err(TransformError::RadiusTooSmall {
            radius: g.radius(),
            step: u32::try_from(bundle.d_used).unwrap_or(u32::MAX),
        });
    }
    let step = bundle.d_used as u32;
    let levels = levels as u32;
    let g = g.restrict(levels * step)?;
    let ball: Arc<Ball> = g.shared_ball();
    let limits = Limits {
        level: floor_u64(&bundle.k_samedepth),
        intermediate: floor_u64(&bundle.final_bound),
    };

    let placeholder = VertexAddress::root();
    let mut images: Vec<Option<VertexAddress>> = vec![None; ball.len()];
    images[0] = Some(VertexAddress::root());
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for level in 0..levels {
        let mut classes = form_classes(&ball, level, step, |i| {
            images[i].as_ref().unwrap_or(&placeholder)
        });
        for class in &mut classes {
            class.targets = Some(
                class
                    .sources()
                    .map(|b| g.evaluate(b).expect("source in the ball").clone())
                    .collect(),
            );
        }
        let resolved: Vec<(ClassRecord, Vec<ValidationFailure>)> = classes
            .par_iter()
            .map(|class| approximate_class(class, &ball, &g, step, &limits))
            .collect();
        for (class, (record, found)) in classes.iter().zip(resolved) {
            apply_class(&ball, &mut images, class, &record.assignment, step);
            records.push(record);
            failures.extend(found);
        }
    }
    let images = images
        .into_iter()
        .map(|slot| slot.expect("construction covers the ball"))
        .collect();
    let f = FiniteTreeMap::from_ball(ball, images)?;
    let distance = sup_distance(&f, &g)?;
    if Rational::from_integer(distance.into()) > bundle.final_bound {
        failures.push(ValidationFailure {
            level: levels,
            class: VertexAddress::root(),
            kind: FailureKind::FinalBound,
            vertex: VertexAddress::root(),
            detail: format!(
                "sup distance {distance} exceeds {}",
                format_rational(&bundle.final_bound)
            ),
        });
    }

    let (measured_c, measured_exhaustively) = ball_constant(&g)?;
    let mut warnings: Vec<String> = promise_warning(&measured_c, measured_exhaustively, c)
        .into_iter()
        .collect();
    if bundle.d_used < bundle.d_paper {
        warnings.push(format!(
            "D={} is below the guaranteed depth {}; success is not guaranteed",
            bundle.d_used, bundle.d_paper
        ));
    }
    let trace = BuildTrace {
        degree: f.shape().degree(),
        step,
        levels,
        classes: records,
    };
    let approximation = Approximation {
        map: f,
        constants: bundle,
        trace,
        levels,
        sup_distance: distance,
        measured_c,
        measured_exhaustively,
        warnings,
    };
    if failures.is_empty() {
        Ok(approximation)
    } else {
        Err(TransformError::Validation(Box::new(FailedApproximation {
            failures,
            approximation,
        })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixed::{build_mixed, verify_mixed_structure, MixedPolicy};
    use crate::rational::ratio;
    use crate::tree::TreeShape;

    fn d3() -> TreeShape {
        TreeShape::new(3).unwrap()
    }

    #[test]
    fn constants_examples() {
        let one = constants(&int(1), None).unwrap();
        assert_eq!(one.k_normalize, int(5));
        assert_eq!(one.k_samedepth, int(5));
        assert_eq!(one.d_paper, 7);
        assert_eq!(one.d_used, 7);
        assert_eq!(one.final_bound, int(13));
        let two = constants(&int(2), None).unwrap();
        assert_eq!(two.k_samedepth, int(34));
        assert_eq!(two.d_paper, 73);
        let overridden = constants(&int(1), Some(2)).unwrap();
        assert_eq!(overridden.d_used, 2);
        assert_eq!(overridden.final_bound, int(8));
        assert!(matches!(constants(&int(1), Some(0)), Err(TransformError::InvalidOverride)));
        assert!(constants(&ratio(1, 2), None).is_err());
    }

    #[test]
    fn constants_for_fractional_c() {
        // C = 3/2: K = 4·27/8 + 3/2 = 15, D = ⌈3/2·(3/2 + 15) + 1⌉ = ⌈25.75⌉
        let b = constants(&ratio(3, 2), None).unwrap();
        assert_eq!(b.k_samedepth, int(15));
        assert_eq!(b.k_normalize, ratio(105, 8));
        assert_eq!(b.d_paper, 26);
    }

    #[test]
    fn constants_display() {
        let text = constants(&int(1), Some(2)).unwrap().to_string();
        assert_eq!(text, "C=1\nK_normalize=5\nK_samedepth=5\nD_paper=7\nD=2\nbound=8\n");
    }

    #[test]
    fn normalizing_an_order_preserving_map_is_a_no_op() {
        let id = FiniteTreeMap::identity(d3(), 4).unwrap();
        let n = normalize_order_preserving(&id, &int(1)).unwrap();
        assert_eq!(n.map, id);
        assert_eq!(n.sup_distance, 0);
        assert!(n.warnings.is_empty());
        let (mixed, _) = build_mixed(d3(), 2, 2, &MixedPolicy::Random { seed: 1 }).unwrap();
        assert_eq!(normalize_order_preserving(&mixed, &int(100)).unwrap().map, mixed);
    }

    #[test]
    fn normalization_fixes_a_bent_map() {
        // 0 ↦ 1 while 0's subtree stays put: g(0) becomes the root
        let bent = FiniteTreeMap::from_fn(d3(), 3, |v| {
            if v.to_string() == "0" {
                "1".parse().unwrap()
            } else {
                v.clone()
            }
        })
        .unwrap();
        let n = normalize_order_preserving(&bent, &int(2)).unwrap();
        assert!(is_order_preserving(&n.map).preserving);
        assert_eq!(n.map.evaluate(&"0".parse().unwrap()).unwrap(), &VertexAddress::root());
        assert_eq!(n.sup_distance, 1);
        assert!(n.within_bound);
    }

    #[test]
    fn approximating_the_identity() {
        let id = FiniteTreeMap::identity(d3(), 3).unwrap();
        let a = approximate_by_mixed(&id, &int(1), Some(1)).unwrap();
        assert_eq!(a.map, id);
        assert_eq!(a.sup_distance, 0);
        assert_eq!(a.levels, 3);
    }

    #[test]
    fn identity_at_the_guaranteed_depth() {
        let id = FiniteTreeMap::identity(d3(), 7).unwrap();
        let a = approximate_by_mixed(&id, &int(1), None).unwrap();
        assert_eq!(a.constants.d_used, 7);
        assert!(a.sup_distance <= 13);
        assert!(verify_mixed_structure(&a.map, 7).unwrap().passed());
    }

    #[test]
    fn preconditions() {
        let bent = FiniteTreeMap::from_fn(d3(), 2, |v| {
            if v.to_string() == "0" {
                "1".parse().unwrap()
            } else {
                v.clone()
            }
        })
        .unwrap();
        assert!(matches!(
            approximate_by_mixed(&bent, &int(1), Some(1)),
            Err(TransformError::NotOrderPreserving(_))
        ));
        let shifted = FiniteTreeMap::from_fn(d3(), 2, |_| "0".parse().unwrap()).unwrap();
        assert!(matches!(
            approximate_by_mixed(&shifted, &int(1), Some(1)),
            Err(TransformError::RootNotFixed(_))
        ));
        let id = FiniteTreeMap::identity(d3(), 3).unwrap();
        assert!(matches!(
            approximate_by_mixed(&id, &int(1), None),
            Err(TransformError::RadiusTooSmall { radius: 3, step: 7 })
        ));
    }

    #[test]
    fn round_trip_of_a_mixed_map_reports_outcome() {
        let (f0, _) = build_mixed(d3(), 2, 3, &MixedPolicy::Minimal).unwrap();
        match approximate_by_mixed(&f0, &int(20), Some(2)) {
            Ok(a) => {
                assert!(Rational::from_integer(a.sup_distance.into()) <= a.constants.final_bound);
                assert!(verify_mixed_structure(&a.map, 2).unwrap().passed());
            }
            Err(TransformError::Validation(failed)) => assert!(!failed.failures.is_empty()),
            Err(other) => panic!("unexpected {other}"),
        }
    }
}
