//! Exhaustive checks of two structural properties every quasi-isometry of a
//! tree satisfies: images of geodesics coarsely cover the image geodesic, and
//! an order-preserving map cannot nest the images of two far-apart vertices
//! of equal depth.

use serde::Serialize;

use super::measure::{PairPlan, PairSource, Violation, ViolationKind};
use super::{is_order_preserving, FiniteTreeMap};
use crate::error::MapError;
use crate::rational::{floor_u64, format_rational, int, Rational};
use crate::tree::VertexAddress;

/// Above this many domain vertices image distances are computed on demand
/// instead of tabulated.
const DISTANCE_TABLE_LIMIT: usize = 4096;

/// Image distances between domain vertices.
struct ImageMetric<'a> {
    map: &'a FiniteTreeMap,
    table: Option<Vec<u32>>,
}

impl<'a> ImageMetric<'a> {
    fn new(map: &'a FiniteTreeMap) -> Self {
        let n = map.len();
        let table = (n <= DISTANCE_TABLE_LIMIT).then(|| {
            let mut t = vec![0u32; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let d = map.image(i).distance(map.image(j));
                    t[i * n + j] = d;
                    t[j * n + i] = d;
                }
            }
            t
        });
        Self { map, table }
    }

    fn get(&self, i: usize, j: usize) -> u32 {
        match &self.table {
            Some(t) => t[i * self.map.len() + j],
            None => self.map.image(i).distance(self.map.image(j)),
        }
    }
}

/// A vertex `a` on `[f(u), f(v)]` farther than `C` from every `f(b)`,
/// `b ∈ [u, v]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GeodesicViolation {
    pub u: VertexAddress,
    pub v: VertexAddress,
    pub uncovered: VertexAddress,
    /// `min_b d(f(b), a)`.
    pub distance: u32,
}

impl GeodesicViolation {
    pub fn to_violation(&self) -> Violation {
        Violation {
            x: self.u.clone(),
            y: self.v.clone(),
            kind: ViolationKind::Geodesic,
            value: self.distance,
        }
    }
}

/// For each checked pair `(u, v)` and each `a ∈ [f(u), f(v)]`, confirms some
/// `b ∈ [u, v]` has `d(f(b), a) ≤ C`.
pub fn check_geodesic_image(
    m: &FiniteTreeMap,
    c: &Rational,
    pairs: &PairSource,
) -> Vec<GeodesicViolation> {
    let reach = floor_u64(c).min(u64::from(u32::MAX)) as u32;
    let ball = m.ball();
    let metric = ImageMetric::new(m);
    let plan = PairPlan::new(m.len(), pairs, None);

    let chunks = plan.fold(ball, Vec::new, |found: &mut Vec<GeodesicViolation>, i, j| {
        let length = metric.get(i, j);
        if length <= reach {
            // every point of the image geodesic is within C of f(u) or f(v)
            return;
        }
        let path = ball.path(i, j);
        // each f(b) projects onto [f(u), f(v)] at `pos`, `off` away, and
        // covers the positions within `reach - off` of `pos`
        let projections: Vec<(u32, u32)> = path
            .iter()
            .map(|&b| {
                let p = metric.get(b, i);
                let q = metric.get(b, j);
                ((p + length - q) / 2, (p + q - length) / 2)
            })
            .collect();
        let mut intervals: Vec<(u32, u32)> = projections
            .iter()
            .filter(|&&(_, off)| off <= reach)
            .map(|&(pos, off)| {
                let r = reach - off;
                (pos.saturating_sub(r), pos.saturating_add(r).min(length))
            })
            .collect();
        intervals.sort_unstable();
        let mut next = 0u32; // first position not yet covered
        let mut gaps = Vec::new();
        for (start, end) in intervals {
            if start > next {
                gaps.extend(next..start);
            }
            if end + 1 > next {
                next = end + 1;
            }
        }
        if next <= length {
            gaps.extend(next..=length);
        }
        if gaps.is_empty() {
            return;
        }
        let image_path = m.image(i).geodesic(m.image(j));
        for t in gaps {
            let distance = projections
                .iter()
                .map(|&(pos, off)| off + pos.abs_diff(t))
                .min()
                .unwrap_or(u32::MAX);
            found.push(GeodesicViolation {
                u: ball.address(i).clone(),
                v: ball.address(j).clone(),
                uncovered: image_path[t as usize].clone(),
                distance,
            });
        }
    });
    chunks.into_iter().flat_map(|(found, _)| found).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SameDepthBound {
    /// `d(u, v) ≤ K` failed.
    Domain,
    /// `d(f(u), f(v)) ≤ K` failed.
    Image,
}

/// Equal-depth `u ≠ v` with `f(u)` below `f(v)` that are farther apart than
/// `K = 4C³ + C`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SameDepthViolation {
    pub u: VertexAddress,
    pub v: VertexAddress,
    pub bound: SameDepthBound,
    pub distance: u32,
    pub limit: u64,
}

impl SameDepthViolation {
    pub fn to_violation(&self) -> Violation {
        Violation {
            x: self.u.clone(),
            y: self.v.clone(),
            kind: ViolationKind::SameDepth,
            value: self.distance,
        }
    }
}

/// Checks every ordered pair of equal-depth domain vertices `(u, v)` with
/// `f(u) ∈ T_{f(v)}` against `K = 4C³ + C`. The map must be order-preserving.
pub fn check_same_depth(m: &FiniteTreeMap, c: &Rational) -> Result<Vec<SameDepthViolation>, MapError> {
    if *c < int(1) {
        return Err(MapError::InvalidConstant(format_rational(c)));
    }
    if let Some(witness) = is_order_preserving(m).witness {
        return Err(MapError::NotOrderPreserving(witness));
    }
    let limit = floor_u64(&(int(4) * c * c * c + c));
    let ball = m.ball();
    let mut found = Vec::new();
    for depth in 0..=m.radius() {
        let mut level: Vec<usize> = ball.level(depth).collect();
        level.sort_by(|&a, &b| m.image(a).cmp(m.image(b)).then(a.cmp(&b)));
        for &v in &level {
            let top = m.image(v);
            // images below `top` form a contiguous run starting at `top`
            let start = level.partition_point(|&x| m.image(x) < top);
            let run = level[start..]
                .iter()
                .take_while(|&&x| m.image(x).is_descendant_of(top));
            for &u in run {
                if u == v {
                    continue;
                }
                let domain = ball.distance(u, v);
                if u64::from(domain) > limit {
                    found.push(SameDepthViolation {
                        u: ball.address(u).clone(),
                        v: ball.address(v).clone(),
                        bound: SameDepthBound::Domain,
                        distance: domain,
                        limit,
                    });
                }
                let image = m.image(u).distance(top);
                if u64::from(image) > limit {
                    found.push(SameDepthViolation {
                        u: ball.address(u).clone(),
                        v: ball.address(v).clone(),
                        bound: SameDepthBound::Image,
                        distance: image,
                        limit,
                    });
                }
            }
        }
    }
    found.sort_by(|a, b| (&a.u, &a.v, a.bound as u8).cmp(&(&b.u, &b.v, b.bound as u8)));
    Ok(found)
}
