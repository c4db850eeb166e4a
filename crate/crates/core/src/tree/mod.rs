//! Combinatorics of the rooted d-regular tree.
//!
//! Vertices are addressed by the sequence of child labels on the path from
//! the root. The root has `d` children labelled `0..d`; every other vertex has
//! `d - 1` children labelled `0..d-1`, so that every vertex has total degree
//! `d`. Comparing addresses with the derived `Ord` gives lexicographic order,
//! which is also preorder (ancestors first, children ascending).

mod ball;
mod subtree;

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

pub use ball::Ball;
pub use subtree::{boundary, FiniteSubtree};

use crate::error::TreeError;

/// Deepest address accepted from parsing or produced by constructions.
pub const MAX_DEPTH: usize = 64;

/// Default cap on the number of vertices a single ball enumeration may touch.
pub const DEFAULT_MAX_VERTICES: u64 = 10_000_000;

/// Degree of the ambient regular tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeShape {
    degree: u32,
}

impl TreeShape {
    pub fn new(degree: u32) -> Result<Self, TreeError> {
        if degree < 3 {
            return Err(TreeError::DegreeTooSmall(degree));
        }
        Ok(Self { degree })
    }

    pub fn degree(self) -> u32 {
        self.degree
    }

    /// Number of children of `v`: `d` at the root, `d - 1` elsewhere.
    pub fn child_count(self, v: &VertexAddress) -> u32 {
        if v.is_root() {
            self.degree
        } else {
            self.degree - 1
        }
    }

    /// Checks every label of `v` against the branching allowed at its depth.
    pub fn validate(self, v: &VertexAddress) -> Result<(), TreeError> {
        if v.depth() > MAX_DEPTH {
            return Err(TreeError::TooDeep(v.depth()));
        }
        for (position, &label) in v.labels().iter().enumerate() {
            let limit = if position == 0 { self.degree } else { self.degree - 1 };
            if label >= limit {
                return Err(TreeError::InvalidLabel {
                    address: v.to_string(),
                    position,
                    label,
                    limit,
                });
            }
        }
        Ok(())
    }

    pub fn is_valid(self, v: &VertexAddress) -> bool {
        self.validate(v).is_ok()
    }

    /// Children of `v` in ascending label order.
    pub fn children(self, v: &VertexAddress) -> impl Iterator<Item = VertexAddress> + '_ {
        (0..self.child_count(v)).map(move |label| v.child(label))
    }

    /// Number of vertices at distance exactly `depth` below `v`.
    pub fn d_child_count(self, v: &VertexAddress, depth: u32) -> Option<u64> {
        if depth == 0 {
            return Some(1);
        }
        let branch = u64::from(self.degree - 1);
        let below = branch.checked_pow(depth - 1)?;
        let first = u64::from(self.child_count(v));
        first.checked_mul(below)
    }

    /// All descendants of `v` at distance exactly `depth`, in lexicographic
    /// order. `depth = 0` yields `v` itself.
    pub fn d_children(self, v: &VertexAddress, depth: u32) -> Vec<VertexAddress> {
        let mut level = vec![v.clone()];
        for _ in 0..depth {
            level = level
                .iter()
                .flat_map(|u| self.children(u).collect::<Vec<_>>())
                .collect();
        }
        level
    }

    /// Number of vertices at depth exactly `depth` in the whole tree.
    pub fn sphere_size(self, depth: u32) -> Option<u64> {
        self.d_child_count(&VertexAddress::root(), depth)
    }

    /// Number of vertices of depth at most `radius`.
    pub fn ball_size(self, radius: u32) -> Option<u64> {
        (0..=radius).try_fold(0u64, |acc, k| acc.checked_add(self.sphere_size(k)?))
    }

    /// Fails fast if the ball of `radius` would exceed `max_vertices`.
    pub fn check_budget(self, radius: u32, max_vertices: u64) -> Result<u64, TreeError> {
        match self.ball_size(radius) {
            Some(size) if size <= max_vertices => Ok(size),
            size => Err(TreeError::BudgetExceeded {
                radius,
                size,
                budget: max_vertices,
            }),
        }
    }
}

/// A vertex, stored as its label path from the root. The empty path is the
/// root.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexAddress(Vec<u32>);

impl VertexAddress {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_labels(labels: Vec<u32>) -> Self {
        Self(labels)
    }

    pub fn labels(&self) -> &[u32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Drops the last label. The parent of the root is the root.
    pub fn parent(&self) -> Self {
        let mut labels = self.0.clone();
        labels.pop();
        Self(labels)
    }

    pub fn child(&self, label: u32) -> Self {
        let mut labels = Vec::with_capacity(self.0.len() + 1);
        labels.extend_from_slice(&self.0);
        labels.push(label);
        Self(labels)
    }

    /// Extends the address by a relative path.
    pub fn join(&self, suffix: &[u32]) -> Self {
        let mut labels = self.0.clone();
        labels.extend_from_slice(suffix);
        Self(labels)
    }

    /// The ancestor at depth `depth`, or `self` when it is not deeper.
    pub fn truncated(&self, depth: usize) -> Self {
        Self(self.0[..depth.min(self.0.len())].to_vec())
    }

    /// Whether `self` lies in the subtree rooted at `ancestor` (every vertex
    /// is a descendant of itself).
    pub fn is_descendant_of(&self, ancestor: &VertexAddress) -> bool {
        self.0.starts_with(&ancestor.0)
    }

    pub fn common_prefix_len(&self, other: &VertexAddress) -> usize {
        common_prefix_len(&self.0, &other.0)
    }

    pub fn lca(&self, other: &VertexAddress) -> VertexAddress {
        self.truncated(self.common_prefix_len(other))
    }

    pub fn distance(&self, other: &VertexAddress) -> u32 {
        label_distance(&self.0, &other.0)
    }

    /// The unique non-backtracking path from `self` to `other`, both ends
    /// included.
    pub fn geodesic(&self, other: &VertexAddress) -> Vec<VertexAddress> {
        let meet = self.common_prefix_len(other);
        let mut path = Vec::with_capacity(self.depth() + other.depth() + 1 - 2 * meet);
        for depth in (meet..=self.depth()).rev() {
            path.push(self.truncated(depth));
        }
        for depth in meet + 1..=other.depth() {
            path.push(other.truncated(depth));
        }
        path
    }

    /// Ancestors from the root down to `self`, inclusive.
    pub fn ancestors_from_root(&self) -> impl Iterator<Item = VertexAddress> + '_ {
        (0..=self.depth()).map(move |depth| self.truncated(depth))
    }
}

pub(crate) fn common_prefix_len(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

pub(crate) fn label_distance(a: &[u32], b: &[u32]) -> u32 {
    let meet = common_prefix_len(a, b);
    (a.len() + b.len() - 2 * meet) as u32
}

pub fn parent(v: &VertexAddress) -> VertexAddress {
    v.parent()
}

pub fn distance(u: &VertexAddress, v: &VertexAddress) -> u32 {
    u.distance(v)
}

pub fn geodesic(u: &VertexAddress, v: &VertexAddress) -> Vec<VertexAddress> {
    u.geodesic(v)
}

/// Whether `u` is a descendant of `v`.
pub fn is_descendant(u: &VertexAddress, v: &VertexAddress) -> bool {
    u.is_descendant_of(v)
}

/// Lowest common ancestor of a nonempty set: the longest common prefix.
pub fn lca<'a, I>(vertices: I) -> Result<VertexAddress, TreeError>
where
    I: IntoIterator<Item = &'a VertexAddress>,
{
    let mut iter = vertices.into_iter();
    let first = iter.next().ok_or(TreeError::EmptySet)?;
    let mut len = first.depth();
    for v in iter {
        len = len.min(common_prefix_len(&first.0[..len], &v.0));
    }
    Ok(first.truncated(len))
}

impl fmt::Display for VertexAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str(".");
        }
        for (i, label) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{label}")?;
        }
        Ok(())
    }
}

impl FromStr for VertexAddress {
    type Err = TreeError;

    /// Parses the text form: `.` for the root, otherwise dot-separated
    /// decimal labels. Labels are not checked against a degree here.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "." {
            return Ok(Self::root());
        }
        let labels = s
            .split('.')
            .map(|part| {
                if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(TreeError::Parse(s.to_string()));
                }
                part.parse::<u32>().map_err(|_| TreeError::Parse(s.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if labels.len() > MAX_DEPTH {
            return Err(TreeError::TooDeep(labels.len()));
        }
        Ok(Self(labels))
    }
}

impl Serialize for VertexAddress {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
