//! Level-by-level construction of D-deep mixed-subtree maps.
//!
//! Vertices at depth `i·D` are grouped into classes by their image `v`. For
//! each class the D-children of all members (the set `B_v`) are sent onto the
//! boundary of a finite subtree `S_v` rooted at `v`, such that two sources
//! share an image only if they share a D-parent. Vertices strictly between a
//! member and its D-children collapse onto `v`.
//!
//! Every free choice (the size and shape of `S_v`, and the assignment of
//! sources to boundary vertices) is delegated to a [`MixedPolicy`].

mod trace;
mod verify;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::MixedError;
use crate::qi::FiniteTreeMap;
use crate::tree::{Ball, FiniteSubtree, TreeShape, VertexAddress, DEFAULT_MAX_VERTICES, MAX_DEPTH};

pub use trace::{parse_trace, write_trace, BuildTrace, ClassRecord, TRACE_HEADER};
pub use verify::{verify_mixed_structure, MixedReport, MixedViolation};
pub(crate) use verify::span_between;

/// Strategy for the free choices of the construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MixedPolicy {
    /// Smallest feasible boundary, subtree grown along the leftmost branch,
    /// sources paired with boundary vertices in lexicographic order.
    Minimal,
    /// Uniform feasible boundary size, uniform boundary slot at each growth
    /// step, uniform dealing and folding. Each class draws from its own
    /// stream derived from `seed` and the class key.
    Random { seed: u64 },
    /// Largest feasible boundary, subtree grown breadth-first, lexicographic
    /// pairing.
    DeepestFeasible,
    /// Replays recorded subtrees and assignments.
    Explicit(BuildTrace),
}

impl fmt::Display for MixedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MixedPolicy::Minimal => f.write_str("minimal"),
            MixedPolicy::Random { seed } => write!(f, "random:{seed}"),
            MixedPolicy::DeepestFeasible => f.write_str("deepest"),
            MixedPolicy::Explicit(_) => f.write_str("explicit"),
        }
    }
}

/// How a boundary subtree is grown one vertex at a time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthRule {
    /// Absorb the lexicographically first boundary vertex.
    Leftmost,
    /// Absorb the shallowest boundary vertex, lexicographically first among
    /// those.
    BreadthFirst,
    /// Absorb a uniformly chosen boundary vertex.
    Random,
}

/// How sources are dealt onto boundary vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignRule {
    Lexicographic,
    Random,
}

/// Same-depth vertices sharing an image, together with their D-children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelClass {
    pub level: u32,
    /// Common image `v`.
    pub image: VertexAddress,
    /// Members `X`, sorted.
    pub members: Vec<VertexAddress>,
    /// `children[k]`: the D-children of `members[k]`, sorted. Their union is
    /// `B_v`.
    pub children: Vec<Vec<VertexAddress>>,
    /// Images of `B_v` under a reference map, when approximating one.
    pub targets: Option<Vec<VertexAddress>>,
}

impl LevelClass {
    /// Lexicographically least member; identifies the class.
    pub fn key(&self) -> &VertexAddress {
        &self.members[0]
    }

    pub fn b_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// All of `B_v` in sorted order.
    pub fn sources(&self) -> impl Iterator<Item = &VertexAddress> {
        self.children.iter().flatten()
    }
}

/// Groups the depth-`level·step` vertices of `ball` by image. Classes come
/// ordered by least member.
pub(crate) fn form_classes<'a, F>(ball: &Ball, level: u32, step: u32, image_of: F) -> Vec<LevelClass>
where
    F: Fn(usize) -> &'a VertexAddress,
{
    let depth = level * step;
    let mut order: Vec<VertexAddress> = Vec::new();
    let mut grouped: HashMap<VertexAddress, Vec<usize>> = HashMap::new();
    for index in ball.level(depth) {
        let image = image_of(index);
        grouped
            .entry(image.clone())
            .or_insert_with(|| {
                order.push(image.clone());
                Vec::new()
            })
            .push(index);
    }
    let shape = ball.shape();
    let with_children = depth + step <= ball.radius();
    order
        .into_iter()
        .map(|image| {
            let members: Vec<VertexAddress> = grouped[&image]
                .iter()
                .map(|&i| ball.address(i).clone())
                .collect();
            let children = if with_children {
                members.iter().map(|x| shape.d_children(x, step)).collect()
            } else {
                vec![Vec::new(); members.len()]
            };
            LevelClass {
                level,
                image,
                members,
                children,
                targets: None,
            }
        })
        .collect()
}

/// Boundary sizes reachable by a finite subtree rooted at `v` that lie in
/// `[class_size, b_count]`: `base + k(d − 2)` for `k ≥ 0`, where `base` is
/// `d` when `v` is the tree root and `d − 1` otherwise.
pub fn feasible_boundary_sizes(
    class_size: usize,
    b_count: usize,
    v_is_root: bool,
    shape: TreeShape,
) -> Vec<usize> {
    let degree = shape.degree() as usize;
    let base = if v_is_root { degree } else { degree - 1 };
    (0..)
        .map(|k| base + k * (degree - 2))
        .take_while(|&size| size <= b_count)
        .filter(|&size| size >= class_size)
        .collect()
}

/// Grows a subtree rooted at `v` whose boundary has exactly `target` vertices.
pub fn grow_subtree<R: Rng + ?Sized>(
    v: &VertexAddress,
    target: usize,
    rule: GrowthRule,
    shape: TreeShape,
    rng: &mut R,
) -> Result<FiniteSubtree, String> {
    let degree = shape.degree() as usize;
    let base = if v.is_root() { degree } else { degree - 1 };
    if target < base || (target - base) % (degree - 2) != 0 {
        return Err(format!("no subtree rooted at {v} has a boundary of size {target}"));
    }
    let steps = (target - base) / (degree - 2);
    let subtree = FiniteSubtree::grow(shape, v.clone(), steps, |frontier| match rule {
        GrowthRule::Leftmost => 0,
        GrowthRule::BreadthFirst => {
            let shallowest = frontier.iter().map(VertexAddress::depth).min().unwrap_or(0);
            frontier.iter().position(|w| w.depth() == shallowest).unwrap_or(0)
        }
        GrowthRule::Random => rng.gen_range(0..frontier.len()),
    });
    debug_assert_eq!(subtree.boundary(shape).len(), target);
    Ok(subtree)
}

/// Sends `B_v` onto `boundary`. Boundary vertices are first dealt one per
/// D-parent group, then the rest go injectively to unassigned sources, then
/// the remaining sources fold onto images already used by their own group.
/// The result is sorted by source.
pub fn assign_images<R: Rng + ?Sized>(
    class: &LevelClass,
    boundary: &[VertexAddress],
    rule: AssignRule,
    rng: &mut R,
) -> Result<Vec<(VertexAddress, VertexAddress)>, String> {
    let groups = &class.children;
    if boundary.len() < groups.len() || boundary.len() > class.b_count() {
        return Err(format!(
            "cannot map {} sources in {} groups onto {} boundary vertices",
            class.b_count(),
            groups.len(),
            boundary.len()
        ));
    }
    let mut dealt: Vec<VertexAddress> = boundary.to_vec();
    if rule == AssignRule::Random {
        dealt.shuffle(rng);
    }
    let mut dealt = dealt.into_iter();
    // assigned[g][s]: image of source s of group g
    let mut assigned: Vec<Vec<Option<VertexAddress>>> =
        groups.iter().map(|g| vec![None; g.len()]).collect();

    for (g, group) in groups.iter().enumerate() {
        let s = match rule {
            AssignRule::Lexicographic => 0,
            AssignRule::Random => rng.gen_range(0..group.len()),
        };
        assigned[g][s] = dealt.next();
    }
    let mut open: Vec<(usize, usize)> = assigned
        .iter()
        .enumerate()
        .flat_map(|(g, slots)| {
            slots
                .iter()
                .enumerate()
                .filter(|(_, slot)| slot.is_none())
                .map(move |(s, _)| (g, s))
        })
        .collect();
    if rule == AssignRule::Random {
        open.shuffle(rng);
    }
    let mut open = open.into_iter();
    for image in dealt {
        let (g, s) = open.next().expect("enough sources for the boundary");
        assigned[g][s] = Some(image);
    }
    let mut leftovers: Vec<(usize, usize)> = open.collect();
    leftovers.sort_unstable();
    for (g, s) in leftovers {
        let mut used: Vec<&VertexAddress> = assigned[g].iter().flatten().collect();
        used.sort();
        let pick = match rule {
            AssignRule::Lexicographic => used[0].clone(),
            AssignRule::Random => used[rng.gen_range(0..used.len())].clone(),
        };
        assigned[g][s] = Some(pick);
    }

    let mut out: Vec<(VertexAddress, VertexAddress)> = groups
        .iter()
        .zip(assigned)
        .flat_map(|(group, slots)| {
            group
                .iter()
                .cloned()
                .zip(slots.into_iter().map(|s| s.expect("every source assigned")))
        })
        .collect();
    out.sort();
    check_assignment(class, boundary, &out)?;
    Ok(out)
}

/// Confirms that `assignment` is a function on exactly `B_v`, onto
/// `boundary`, and that sources sharing an image share a D-parent.
pub fn check_assignment(
    class: &LevelClass,
    boundary: &[VertexAddress],
    assignment: &[(VertexAddress, VertexAddress)],
) -> Result<(), String> {
    let mut parent_of: HashMap<&VertexAddress, usize> = HashMap::new();
    for (g, group) in class.children.iter().enumerate() {
        for b in group {
            parent_of.insert(b, g);
        }
    }
    let mut seen_sources = BTreeSet::new();
    let mut owner: BTreeMap<&VertexAddress, (usize, &VertexAddress)> = BTreeMap::new();
    let allowed: BTreeSet<&VertexAddress> = boundary.iter().collect();
    for (source, image) in assignment {
        let g = *parent_of
            .get(source)
            .ok_or_else(|| format!("{source} is not a D-child of the class"))?;
        if !seen_sources.insert(source) {
            return Err(format!("{source} is assigned twice"));
        }
        if !allowed.contains(image) {
            return Err(format!("{source} is sent to {image}, outside the boundary"));
        }
        if let Some(&(other_group, other)) = owner.get(image) {
            if other_group != g {
                return Err(format!(
                    "{other} and {source} share image {image} but not a D-parent"
                ));
            }
        } else {
            owner.insert(image, (g, source));
        }
    }
    if seen_sources.len() != parent_of.len() {
        let missing = class.sources().find(|b| !seen_sources.contains(b)).expect("missing source");
        return Err(format!("{missing} is not assigned"));
    }
    if owner.len() != allowed.len() {
        let missing = boundary.iter().find(|a| !owner.contains_key(a)).expect("missing image");
        return Err(format!("boundary vertex {missing} is not hit"));
    }
    Ok(())
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the private random stream of one class.
pub fn class_seed(master: u64, level: u32, key: &VertexAddress) -> u64 {
    let mut h = splitmix(master ^ splitmix(u64::from(level)));
    h = splitmix(h ^ key.depth() as u64);
    for &label in key.labels() {
        h = splitmix(h ^ u64::from(label));
    }
    h
}

/// Chooses `S_v` and the assignment for one class under `policy`.
fn resolve_class(
    class: &LevelClass,
    shape: TreeShape,
    policy: &MixedPolicy,
    replay: &HashMap<(u32, VertexAddress), &ClassRecord>,
) -> Result<ClassRecord, MixedError> {
    let fail = |reason: String| MixedError::policy(class.level, class.key(), reason);
    let sizes = feasible_boundary_sizes(
        class.members.len(),
        class.b_count(),
        class.image.is_root(),
        shape,
    );
    let (seed, subtree, assignment) = match policy {
        MixedPolicy::Explicit(_) => {
            let record = replay
                .get(&(class.level, class.key().clone()))
                .ok_or_else(|| fail("no recorded choice for this class".into()))?;
            if record.image != class.image {
                return Err(fail(format!(
                    "recorded image {} differs from {}",
                    record.image, class.image
                )));
            }
            let subtree = FiniteSubtree::new(record.subtree.iter().cloned())
                .map_err(|e| fail(format!("recorded subtree: {e}")))?;
            if subtree.local_root() != &class.image {
                return Err(fail(format!(
                    "recorded subtree is rooted at {}, not {}",
                    subtree.local_root(),
                    class.image
                )));
            }
            let size = subtree.boundary(shape).len();
            if !sizes.contains(&size) {
                return Err(fail(format!("boundary size {size} is infeasible")));
            }
            (record.seed, subtree, record.assignment.clone())
        }
        _ => {
            let (seed, growth, assign) = match policy {
                MixedPolicy::Minimal => (None, GrowthRule::Leftmost, AssignRule::Lexicographic),
                MixedPolicy::DeepestFeasible => {
                    (None, GrowthRule::BreadthFirst, AssignRule::Lexicographic)
                }
                MixedPolicy::Random { seed } => (
                    Some(class_seed(*seed, class.level, class.key())),
                    GrowthRule::Random,
                    AssignRule::Random,
                ),
                MixedPolicy::Explicit(_) => unreachable!(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            let target = match policy {
                MixedPolicy::Minimal => sizes.first().copied(),
                MixedPolicy::DeepestFeasible => sizes.last().copied(),
                _ => (!sizes.is_empty()).then(|| sizes[rng.gen_range(0..sizes.len())]),
            }
            .ok_or_else(|| fail("no feasible boundary size".into()))?;
            let subtree = grow_subtree(&class.image, target, growth, shape, &mut rng).map_err(fail)?;
            let boundary = subtree.boundary(shape);
            let assignment = assign_images(class, &boundary, assign, &mut rng).map_err(fail)?;
            (seed, subtree, assignment)
        }
    };
    let boundary = subtree.boundary(shape);
    if let Some(deep) = boundary.iter().find(|a| a.depth() > MAX_DEPTH) {
        return Err(fail(format!("image {} exceeds depth {MAX_DEPTH}", deep.depth())));
    }
    check_assignment(class, &boundary, &assignment).map_err(fail)?;
    Ok(ClassRecord {
        level: class.level,
        key: class.key().clone(),
        image: class.image.clone(),
        seed,
        subtree: subtree.vertices().cloned().collect(),
        assignment,
        restricted: false,
    })
}

/// Writes a class's assignment into `images` and collapses the vertices
/// strictly between each member and its D-children onto the class image.
pub(crate) fn apply_class(
    ball: &Ball,
    images: &mut [Option<VertexAddress>],
    class: &LevelClass,
    assignment: &[(VertexAddress, VertexAddress)],
    step: u32,
) {
    for (source, image) in assignment {
        let index = ball.index_of(source).expect("D-child inside the ball");
        images[index] = Some(image.clone());
    }
    for member in &class.members {
        let top = ball.index_of(member).expect("member inside the ball");
        let depth = ball.depth(top);
        for w in ball.subtree(top).skip(1) {
            if ball.depth(w) < depth + step {
                images[w] = Some(class.image.clone());
            }
        }
    }
}

/// Builds a `step`-deep mixed-subtree map on the ball of radius
/// `levels · step`.
pub fn build_mixed(
    shape: TreeShape,
    step: u32,
    levels: u32,
    policy: &MixedPolicy,
) -> Result<(FiniteTreeMap, BuildTrace), MixedError> {
    build_mixed_with_budget(shape, step, levels, policy, DEFAULT_MAX_VERTICES)
}

pub fn build_mixed_with_budget(
    shape: TreeShape,
    step: u32,
    levels: u32,
    policy: &MixedPolicy,
    max_vertices: u64,
) -> Result<(FiniteTreeMap, BuildTrace), MixedError> {
    if step == 0 {
        return Err(MixedError::ZeroStep);
    }
    let radius = step
        .checked_mul(levels)
        .filter(|&r| r as usize <= MAX_DEPTH)
        .ok_or(crate::error::TreeError::TooDeep(MAX_DEPTH + 1))?;
    let ball = Arc::new(Ball::new(shape, radius, max_vertices)?);
    let replay: HashMap<(u32, VertexAddress), &ClassRecord> = match policy {
        MixedPolicy::Explicit(trace) => trace
            .classes
            .iter()
            .map(|r| ((r.level, r.key.clone()), r))
            .collect(),
        _ => HashMap::new(),
    };

    let placeholder = VertexAddress::root();
    let mut images: Vec<Option<VertexAddress>> = vec![None; ball.len()];
    images[0] = Some(VertexAddress::root());
    let mut records = Vec::new();
    for level in 0..levels {
        let classes = form_classes(&ball, level, step, |i| {
            images[i].as_ref().unwrap_or(&placeholder)
        });
        let resolved: Vec<Result<ClassRecord, MixedError>> = classes
            .par_iter()
            .map(|class| resolve_class(class, shape, policy, &replay))
            .collect();
        for (class, record) in classes.iter().zip(resolved) {
            let record = record?;
            apply_class(&ball, &mut images, class, &record.assignment, step);
            records.push(record);
        }
    }
    let images = images
        .into_iter()
        .map(|slot| slot.expect("construction covers the ball"))
        .collect();
    let map = FiniteTreeMap::from_ball(ball, images)?;
    let trace = BuildTrace {
        degree: shape.degree(),
        step,
        levels,
        classes: records,
    };
    Ok((map, trace))
}
