use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{is_order_preserving, FiniteTreeMap};
use crate::error::MapError;
use crate::rational::{self, format_decimal, format_rational, int, lower_root, ratio, Rational};
use crate::tree::{Ball, VertexAddress, DEFAULT_MAX_VERTICES};

/// Which unordered pairs of distinct domain vertices to check.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum PairSource {
    #[default]
    Exhaustive,
    /// `count` pairs drawn without replacement; covers every pair when
    /// `count` is at least the number of pairs.
    Sampled { count: u64, seed: u64 },
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairSource::Exhaustive => f.write_str("exhaustive"),
            PairSource::Sampled { count, .. } => write!(f, "sampled:{count}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasureOptions {
    pub pairs: PairSource,
    /// Constant to test; pairs violating it are listed in the report.
    pub candidate: Option<Rational>,
    /// Radius of the target ball for coarse surjectivity; defaults to the
    /// domain radius.
    pub target_radius: Option<u32>,
    /// Only check pairs whose lowest common ancestor is at most this deep.
    pub max_lca_depth: Option<u32>,
    pub max_vertices: u64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            pairs: PairSource::Exhaustive,
            candidate: None,
            target_radius: None,
            max_lca_depth: None,
            max_vertices: DEFAULT_MAX_VERTICES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Upper,
    Lower,
    Geodesic,
    #[serde(rename = "samedepth")]
    SameDepth,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Upper => "upper",
            ViolationKind::Lower => "lower",
            ViolationKind::Geodesic => "geodesic",
            ViolationKind::SameDepth => "samedepth",
        })
    }
}

/// A witness pair for a failed inequality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub x: VertexAddress,
    pub y: VertexAddress,
    pub kind: ViolationKind,
    pub value: u32,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x={} y={} kind={} value={}", self.x, self.y, self.kind, self.value)
    }
}

/// `multiplicative · d + additive` bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearFit {
    #[serde(serialize_with = "rational::serialize")]
    pub multiplicative: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub additive: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub degree: u32,
    pub radius: u32,
    pub pair_source: PairSource,
    pub max_lca_depth: Option<u32>,
    pub pairs_checked: u64,
    pub sampling_seed: Option<u64>,
    /// Smallest `C ≥ 1` with `d/C − C ≤ d' ≤ C·d + C` on every checked pair.
    #[serde(serialize_with = "rational::serialize")]
    pub best_single_c: Rational,
    /// A checked pair forcing `best_single_c`; absent when the clamp at 1
    /// binds.
    pub best_witness: Option<(VertexAddress, VertexAddress)>,
    /// Upper bound `d' ≤ λ·d + ε` with `λ = best_single_c` and least `ε ≥ 0`.
    pub upper_fit: LinearFit,
    /// Lower bound `d' ≥ d/λ − ε` with `λ = best_single_c` and least `ε ≥ 0`.
    pub lower_fit: LinearFit,
    pub target_radius: u32,
    pub coarse_surjectivity_radius: u32,
    pub order_preserving: bool,
    pub order_witness: Option<VertexAddress>,
    #[serde(serialize_with = "rational::serialize_opt")]
    pub candidate_c: Option<Rational>,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    /// Whether the report's measured fields agree, ignoring how the pairs
    /// were chosen.
    pub fn same_measurements(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            pair_source: PairSource::Exhaustive,
            sampling_seed: None,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "degree={}", self.degree)?;
        writeln!(f, "radius={}", self.radius)?;
        writeln!(f, "pairs={}", self.pair_source)?;
        writeln!(f, "max_lca_depth={}", opt(&self.max_lca_depth))?;
        writeln!(f, "pairs_checked={}", self.pairs_checked)?;
        writeln!(f, "sampling_seed={}", opt(&self.sampling_seed))?;
        writeln!(f, "best_single_C={}", format_rational(&self.best_single_c))?;
        writeln!(f, "best_single_C_decimal={}", format_decimal(&self.best_single_c))?;
        match &self.best_witness {
            Some((x, y)) => writeln!(f, "best_witness=x={x} y={y}")?,
            None => writeln!(f, "best_witness=none")?,
        }
        for (key, fit) in [("upper_fit", &self.upper_fit), ("lower_fit", &self.lower_fit)] {
            writeln!(
                f,
                "{key}={},{}",
                format_rational(&fit.multiplicative),
                format_rational(&fit.additive)
            )?;
        }
        writeln!(f, "target_radius={}", self.target_radius)?;
        writeln!(f, "coarse_surjectivity_radius={}", self.coarse_surjectivity_radius)?;
        writeln!(f, "order_preserving={}", self.order_preserving)?;
        writeln!(f, "order_witness={}", opt(&self.order_witness))?;
        writeln!(
            f,
            "candidate_C={}",
            self.candidate_c.as_ref().map_or_else(|| "none".to_string(), format_rational)
        )?;
        writeln!(f, "violations={}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// The set of pairs `(i, j)`, `i < j`, of preorder indices to visit.
pub(crate) struct PairPlan {
    n: usize,
    sampled: Option<Vec<u64>>,
    max_lca_depth: Option<u32>,
}

const ROWS_PER_CHUNK: usize = 16;
const PAIRS_PER_CHUNK: usize = 1 << 14;

fn row_offset(n: u64, i: u64) -> u64 {
    i * n - i * (i + 1) / 2
}

impl PairPlan {
    pub(crate) fn new(n: usize, source: &PairSource, max_lca_depth: Option<u32>) -> Self {
        let total = (n as u64) * (n as u64).saturating_sub(1) / 2;
        let sampled = match *source {
            PairSource::Exhaustive => None,
            PairSource::Sampled { count, .. } if count >= total => Some((0..total).collect()),
            PairSource::Sampled { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picked: Vec<u64> =
                    rand::seq::index::sample(&mut rng, total as usize, count as usize)
                        .into_iter()
                        .map(|k| k as u64)
                        .collect();
                picked.sort_unstable();
                Some(picked)
            }
        };
        Self {
            n,
            sampled,
            max_lca_depth,
        }
    }

    #[cfg(test)]
    fn decode(&self, k: u64) -> (usize, usize) {
        let n = self.n as u64;
        // last row whose offset is ≤ k
        let (mut lo, mut hi) = (0u64, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if row_offset(n, mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let j = i + 1 + (k - row_offset(n, i));
        (i as usize, j as usize)
    }

    /// Visits every planned pair in ascending `(i, j)` order, chunked for
    /// parallel evaluation. Chunk results come back in order together with
    /// the number of pairs each visited.
    pub(crate) fn fold<T, I, F>(&self, ball: &Ball, init: I, visit: F) -> Vec<(T, u64)>
    where
        T: Send,
        I: Fn() -> T + Sync,
        F: Fn(&mut T, usize, usize) + Sync,
    {
        let keep = |i: usize, j: usize| self.max_lca_depth.is_none_or(|cap| ball.lca_depth(i, j) <= cap);
        match &self.sampled {
            None => {
                let chunks = self.n.div_ceil(ROWS_PER_CHUNK);
                (0..chunks)
                    .into_par_iter()
                    .map(|c| {
                        let mut acc = init();
                        let mut count = 0;
                        for i in c * ROWS_PER_CHUNK..((c + 1) * ROWS_PER_CHUNK).min(self.n) {
                            for j in i + 1..self.n {
                                if keep(i, j) {
                                    visit(&mut acc, i, j);
                                    count += 1;
                                }
                            }
                        }
                        (acc, count)
                    })
                    .collect()
            }
            Some(indices) => {
                let offsets: Vec<u64> = (0..self.n as u64).map(|i| row_offset(self.n as u64, i)).collect();
                indices
                    .par_chunks(PAIRS_PER_CHUNK)
                    .map(|chunk| {
                        let mut acc = init();
                        let mut count = 0;
                        for &k in chunk {
                            let i = offsets.partition_point(|&o| o <= k) - 1;
                            let j = i + 1 + (k - offsets[i]) as usize;
                            if keep(i, j) {
                                visit(&mut acc, i, j);
                                count += 1;
                            }
                        }
                        (acc, count)
                    })
                    .collect()
            }
        }
    }
}

/// Extreme image distances seen at one domain distance, with the first pair
/// (in visiting order) attaining each.
#[derive(Clone, Copy, Debug, Default)]
struct Extremes {
    max: Option<(u32, usize, usize)>,
    min: Option<(u32, usize, usize)>,
}

impl Extremes {
    fn offer(&mut self, other: (u32, usize, usize)) {
        if self.max.is_none_or(|m| other.0 > m.0) {
            self.max = Some(other);
        }
        if self.min.is_none_or(|m| other.0 < m.0) {
            self.min = Some(other);
        }
    }

    fn absorb(&mut self, later: &Extremes) {
        if let Some(m) = later.max {
            if self.max.is_none_or(|cur| m.0 > cur.0) {
                self.max = Some(m);
            }
        }
        if let Some(m) = later.min {
            if self.min.is_none_or(|cur| m.0 < cur.0) {
                self.min = Some(m);
            }
        }
    }
}

/// Per domain distance `d`, the admissible image distances `[lo, hi]` under a
/// candidate constant `C`: `hi = ⌊C(d+1)⌋`, `lo = ⌈d/C − C⌉`.
fn admissible_ranges(candidate: &Rational, max_distance: u32) -> Vec<(u64, u64)> {
    (0..=max_distance)
        .map(|d| {
            let d = int(i64::from(d));
            let hi = rational::floor_u64(&(candidate * (&d + int(1))));
            let lo = rational::ceil_u64(&(&d / candidate - candidate));
            (lo, hi)
        })
        .collect()
}

pub fn measure_qi(m: &FiniteTreeMap, options: &MeasureOptions) -> Result<VerificationReport, MapError> {
    if let Some(c) = &options.candidate {
        if *c < int(1) {
            return Err(MapError::InvalidConstant(format_rational(c)));
        }
    }
    let ball = m.ball();
    let max_distance = 2 * m.radius();
    let ranges = options
        .candidate
        .as_ref()
        .map(|c| admissible_ranges(c, max_distance));
    let plan = PairPlan::new(m.len(), &options.pairs, options.max_lca_depth);

    struct Acc {
        extremes: Vec<Extremes>,
        violations: Vec<(usize, usize, ViolationKind, u32)>,
    }
    let chunks = plan.fold(
        ball,
        || Acc {
            extremes: vec![Extremes::default(); max_distance as usize + 1],
            violations: Vec::new(),
        },
        |acc, i, j| {
            let domain = ball.distance(i, j);
            let image = m.image(i).distance(m.image(j));
            acc.extremes[domain as usize].offer((image, i, j));
            if let Some(ranges) = &ranges {
                let (lo, hi) = ranges[domain as usize];
                if u64::from(image) > hi {
                    acc.violations.push((i, j, ViolationKind::Upper, image));
                }
                if u64::from(image) < lo {
                    acc.violations.push((i, j, ViolationKind::Lower, image));
                }
            }
        },
    );

    let mut extremes = vec![Extremes::default(); max_distance as usize + 1];
    let mut violations = Vec::new();
    let mut pairs_checked = 0;
    for (acc, count) in chunks {
        pairs_checked += count;
        for (mine, theirs) in extremes.iter_mut().zip(&acc.extremes) {
            mine.absorb(theirs);
        }
        violations.extend(acc.violations.into_iter().map(|(i, j, kind, value)| Violation {
            x: ball.address(i).clone(),
            y: ball.address(j).clone(),
            kind,
            value,
        }));
    }

    let mut best = int(1);
    let mut best_pair = None;
    for (d, ext) in extremes.iter().enumerate().skip(1) {
        if let Some((b, i, j)) = ext.max {
            let upper = ratio(i64::from(b), d as i64 + 1);
            if upper > best {
                best = upper;
                best_pair = Some((i, j));
            }
        }
        if let Some((b, i, j)) = ext.min {
            let lower = lower_root(d as u32, b);
            if lower > best {
                best = lower;
                best_pair = Some((i, j));
            }
        }
    }

    let zero = int(0);
    let mut upper_additive = zero.clone();
    let mut lower_additive = zero.clone();
    for (d, ext) in extremes.iter().enumerate().skip(1) {
        let d = int(d as i64);
        if let Some((b, ..)) = ext.max {
            upper_additive = upper_additive.max(int(i64::from(b)) - &best * &d);
        }
        if let Some((b, ..)) = ext.min {
            lower_additive = lower_additive.max(&d / &best - int(i64::from(b)));
        }
    }

    let target_radius = options.target_radius.unwrap_or(m.radius());
    let coarse = coarse_surjectivity_radius_with_budget(m, target_radius, options.max_vertices)?;
    let order = is_order_preserving(m);

    Ok(VerificationReport {
        degree: m.shape().degree(),
        radius: m.radius(),
        pair_source: options.pairs.clone(),
        max_lca_depth: options.max_lca_depth,
        pairs_checked,
        sampling_seed: match options.pairs {
            PairSource::Sampled { seed, .. } => Some(seed),
            PairSource::Exhaustive => None,
        },
        best_witness: best_pair.map(|(i, j)| (ball.address(i).clone(), ball.address(j).clone())),
        upper_fit: LinearFit {
            multiplicative: best.clone(),
            additive: upper_additive,
        },
        lower_fit: LinearFit {
            multiplicative: best.clone(),
            additive: lower_additive,
        },
        best_single_c: best,
        target_radius,
        coarse_surjectivity_radius: coarse,
        order_preserving: order.preserving,
        order_witness: order.witness,
        candidate_c: options.candidate.clone(),
        violations,
    })
}

/// Largest distance from a vertex of the target ball (radius `target_radius`
/// about the root) to the image of `m`.
pub fn coarse_surjectivity_radius(m: &FiniteTreeMap, target_radius: u32) -> Result<u32, MapError> {
    coarse_surjectivity_radius_with_budget(m, target_radius, DEFAULT_MAX_VERTICES)
}

pub(crate) fn coarse_surjectivity_radius_with_budget(
    m: &FiniteTreeMap,
    target_radius: u32,
    max_vertices: u64,
) -> Result<u32, MapError> {
    let target = Ball::new(m.shape(), target_radius, max_vertices)?;
    // below[t]: distance from t down to the nearest image inside T_t
    let mut below = vec![u32::MAX; target.len()];
    for image in m.images() {
        let reach = image.depth().min(target_radius as usize);
        for depth in 0..=reach {
            let t = target
                .index_of(&image.truncated(depth))
                .expect("ancestor within the target ball");
            below[t] = below[t].min((image.depth() - depth) as u32);
        }
    }
    // nearest[y] = min(below[y], nearest[parent(y)] + 1); preorder visits
    // parents first
    let mut nearest = vec![0u32; target.len()];
    let mut worst = 0;
    for y in 0..target.len() {
        nearest[y] = if y == 0 {
            below[0]
        } else {
            below[y].min(nearest[target.parent(y)].saturating_add(1))
        };
        worst = worst.max(nearest[y]);
    }
    Ok(worst)
}
