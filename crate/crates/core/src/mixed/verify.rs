//! Exhaustive structural checks for D-deep mixed-subtree maps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::form_classes;
use crate::error::MixedError;
use crate::qi::FiniteTreeMap;
use crate::tree::{FiniteSubtree, TreeShape, VertexAddress};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixedViolation {
    RootNotFixed {
        image: VertexAddress,
    },
    /// A vertex strictly between `parent` and its D-children is not sent to
    /// `f(parent)`.
    IntermediateNotCollapsed {
        parent: VertexAddress,
        vertex: VertexAddress,
        image: VertexAddress,
        expected: VertexAddress,
    },
    /// Two level vertices with different D-parents share an image.
    SharedImageAcrossParents {
        level: u32,
        first: VertexAddress,
        second: VertexAddress,
        image: VertexAddress,
    },
    /// Distinct images on one level are nested.
    NestedImages {
        level: u32,
        first: VertexAddress,
        second: VertexAddress,
        ancestor: VertexAddress,
        descendant: VertexAddress,
    },
    Multiplicity {
        level: u32,
        image: VertexAddress,
        count: u64,
        bound: u64,
    },
    ChildDistance {
        parent: VertexAddress,
        child: VertexAddress,
        distance: u32,
        bound: u64,
    },
    /// A D-child of a class is not sent strictly below the class image.
    ImageOutsideClassSubtree {
        level: u32,
        class: VertexAddress,
        child: VertexAddress,
        image: VertexAddress,
    },
    /// The image set of a class is not the boundary of the subtree it spans.
    NotBoundary {
        level: u32,
        class: VertexAddress,
        witness: VertexAddress,
        reason: String,
    },
}

impl fmt::Display for MixedViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MixedViolation::*;
        match self {
            RootNotFixed { image } => write!(f, "root: sent to {image}"),
            IntermediateNotCollapsed { parent, vertex, image, expected } => write!(
                f,
                "intermediate: {vertex} below {parent} is sent to {image}, expected {expected}"
            ),
            SharedImageAcrossParents { level, first, second, image } => write!(
                f,
                "claim1: level {level}: {first} and {second} share image {image} but not a D-parent"
            ),
            NestedImages { level, first, second, ancestor, descendant } => write!(
                f,
                "claim1: level {level}: image {descendant} of {second} lies below image {ancestor} of {first}"
            ),
            Multiplicity { level, image, count, bound } => write!(
                f,
                "claim2: level {level}: {count} vertices share image {image}, bound {bound}"
            ),
            ChildDistance { parent, child, distance, bound } => write!(
                f,
                "claim3: d(f({child}), f({parent})) = {distance} outside [1, {bound}]"
            ),
            ImageOutsideClassSubtree { level, class, child, image } => write!(
                f,
                "condition1: level {level}, class {class}: {child} is sent to {image}, not strictly below the class image"
            ),
            NotBoundary { level, class, witness, reason } => write!(
                f,
                "condition1: level {level}, class {class}: {witness} {reason}"
            ),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MixedReport {
    pub degree: u32,
    pub step: u32,
    pub levels: u32,
    /// `K = d^D`.
    pub multiplicity_bound: u64,
    /// `K²`.
    pub distance_bound: u64,
    /// Largest image multiplicity at each level `0..=levels`.
    pub max_multiplicity: Vec<u64>,
    /// Smallest and largest `d(f(b), f(x))` over D-parent/D-child pairs.
    pub child_distance_range: Option<(u32, u32)>,
    pub violations: Vec<MixedViolation>,
}

impl MixedReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for MixedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "degree={}", self.degree)?;
        writeln!(f, "D={}", self.step)?;
        writeln!(f, "levels={}", self.levels)?;
        writeln!(f, "multiplicity_bound={}", self.multiplicity_bound)?;
        writeln!(f, "distance_bound={}", self.distance_bound)?;
        let mult: Vec<String> = self.max_multiplicity.iter().map(u64::to_string).collect();
        writeln!(f, "max_multiplicity={}", mult.join(","))?;
        match self.child_distance_range {
            Some((lo, hi)) => writeln!(f, "child_distance_range={lo},{hi}")?,
            None => writeln!(f, "child_distance_range=-")?,
        }
        writeln!(f, "passed={}", self.passed())?;
        writeln!(f, "violations={}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "violation {v}")?;
        }
        Ok(())
    }
}

/// The subtree spanned by `v` and the parents of `images`, when every image
/// lies strictly below `v`.
pub(crate) fn span_between(v: &VertexAddress, images: &[VertexAddress]) -> FiniteSubtree {
    let mut vertices = BTreeSet::from([v.clone()]);
    for a in images {
        let mut w = a.parent();
        while w.depth() > v.depth() && vertices.insert(w.clone()) {
            w = w.parent();
        }
    }
    FiniteSubtree::new(vertices).expect("span of descendants is connected")
}

/// Compares a class's image set with the boundary of the subtree it spans.
/// Returns the first vertex in the symmetric difference.
pub(crate) fn boundary_mismatch(
    shape: TreeShape,
    v: &VertexAddress,
    images: &BTreeSet<VertexAddress>,
) -> Option<(VertexAddress, String)> {
    let list: Vec<VertexAddress> = images.iter().cloned().collect();
    let span = span_between(v, &list);
    let boundary: BTreeSet<VertexAddress> = span.boundary(shape).into_iter().collect();
    if let Some(extra) = images.difference(&boundary).next() {
        return Some((extra.clone(), "is an image but not on the spanned boundary".into()));
    }
    boundary
        .difference(images)
        .next()
        .map(|missing| (missing.clone(), "is on the spanned boundary but not an image".into()))
}

/// Checks the structure of a `step`-deep mixed-subtree map on its whole
/// stored ball.
pub fn verify_mixed_structure(m: &FiniteTreeMap, step: u32) -> Result<MixedReport, MixedError> {
    if step == 0 {
        return Err(MixedError::ZeroStep);
    }
    if m.radius() % step != 0 {
        return Err(MixedError::RadiusNotMultiple {
            radius: m.radius(),
            step,
        });
    }
    let shape = m.shape();
    let ball = m.ball();
    let levels = m.radius() / step;
    let multiplicity_bound = u64::from(shape.degree()).saturating_pow(step);
    let distance_bound = multiplicity_bound.saturating_mul(multiplicity_bound);
    let mut violations = Vec::new();

    if !m.image(0).is_root() {
        violations.push(MixedViolation::RootNotFixed {
            image: m.image(0).clone(),
        });
    }

    let mut max_multiplicity = Vec::new();
    let mut child_distance_range: Option<(u32, u32)> = None;
    for level in 0..=levels {
        let depth = level * step;
        // per image: the level vertices sharing it
        let mut sharing: BTreeMap<&VertexAddress, Vec<usize>> = BTreeMap::new();
        for i in ball.level(depth) {
            sharing.entry(m.image(i)).or_default().push(i);
        }
        let worst = sharing.values().map(|s| s.len() as u64).max().unwrap_or(0);
        max_multiplicity.push(worst);
        for (image, members) in &sharing {
            if members.len() as u64 > multiplicity_bound {
                violations.push(MixedViolation::Multiplicity {
                    level,
                    image: (*image).clone(),
                    count: members.len() as u64,
                    bound: multiplicity_bound,
                });
            }
        }
        if level == 0 {
            continue;
        }
        for members in sharing.values() {
            let first = members[0];
            let first_parent = ball.address(first).truncated((depth - step) as usize);
            if let Some(&other) = members[1..]
                .iter()
                .find(|&&i| ball.address(i).truncated((depth - step) as usize) != first_parent)
            {
                violations.push(MixedViolation::SharedImageAcrossParents {
                    level,
                    first: ball.address(first).clone(),
                    second: ball.address(other).clone(),
                    image: m.image(first).clone(),
                });
            }
        }
        // sorted images nest only if some adjacent pair nests
        let ordered: Vec<(&&VertexAddress, &Vec<usize>)> = sharing.iter().collect();
        for pair in ordered.windows(2) {
            let (upper, upper_members) = pair[0];
            let (lower, lower_members) = pair[1];
            if lower.is_descendant_of(upper) {
                violations.push(MixedViolation::NestedImages {
                    level,
                    first: ball.address(upper_members[0]).clone(),
                    second: ball.address(lower_members[0]).clone(),
                    ancestor: (*upper).clone(),
                    descendant: (*lower).clone(),
                });
            }
        }
    }

    for level in 0..levels {
        let classes = form_classes(ball, level, step, |i| m.image(i));
        for class in &classes {
            let v = &class.image;
            for (member, children) in class.members.iter().zip(&class.children) {
                let top = ball.index_of(member).expect("member in the ball");
                for w in ball.subtree(top).skip(1) {
                    if ball.depth(w) < ball.depth(top) + step && m.image(w) != v {
                        violations.push(MixedViolation::IntermediateNotCollapsed {
                            parent: member.clone(),
                            vertex: ball.address(w).clone(),
                            image: m.image(w).clone(),
                            expected: v.clone(),
                        });
                    }
                }
                for child in children {
                    let image = m.evaluate(child).expect("child in the ball");
                    let distance = image.distance(v);
                    child_distance_range = Some(match child_distance_range {
                        None => (distance, distance),
                        Some((lo, hi)) => (lo.min(distance), hi.max(distance)),
                    });
                    if distance == 0 || u64::from(distance) > distance_bound {
                        violations.push(MixedViolation::ChildDistance {
                            parent: member.clone(),
                            child: child.clone(),
                            distance,
                            bound: distance_bound,
                        });
                    }
                }
            }
            let mut images = BTreeSet::new();
            let mut contained = true;
            for child in class.sources() {
                let image = m.evaluate(child).expect("child in the ball");
                if image == v || !image.is_descendant_of(v) {
                    violations.push(MixedViolation::ImageOutsideClassSubtree {
                        level,
                        class: class.key().clone(),
                        child: child.clone(),
                        image: image.clone(),
                    });
                    contained = false;
                } else {
                    images.insert(image.clone());
                }
            }
            if contained {
                if let Some((witness, reason)) = boundary_mismatch(shape, v, &images) {
                    violations.push(MixedViolation::NotBoundary {
                        level,
                        class: class.key().clone(),
                        witness,
                        reason,
                    });
                }
            }
        }
    }

    Ok(MixedReport {
        degree: shape.degree(),
        step,
        levels,
        multiplicity_bound,
        distance_bound,
        max_multiplicity,
        child_distance_range,
        violations,
    })
}
