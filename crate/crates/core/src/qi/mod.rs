//! Self-maps of the tree restricted to a finite ball, and their verification.

mod checks;
mod format;
mod measure;

use std::sync::Arc;

use crate::error::MapError;
use crate::tree::{Ball, TreeShape, VertexAddress, DEFAULT_MAX_VERTICES};

pub use checks::{
    check_geodesic_image, check_same_depth, GeodesicViolation, SameDepthBound, SameDepthViolation,
};
pub use format::{parse_map, read_map_file, write_map, write_map_file, MAP_HEADER};
pub use measure::{
    coarse_surjectivity_radius, measure_qi, LinearFit, MeasureOptions, PairSource,
    VerificationReport, Violation, ViolationKind,
};

/// A map from the ball of radius `radius` about the root into the tree,
/// stored as a table indexed by the preorder position of the source.
#[derive(Clone, Debug)]
pub struct FiniteTreeMap {
    ball: Arc<Ball>,
    images: Vec<VertexAddress>,
}

impl PartialEq for FiniteTreeMap {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.radius() == other.radius() && self.images == other.images
    }
}

impl Eq for FiniteTreeMap {}

impl FiniteTreeMap {
    /// Builds a map from images listed in preorder (lexicographic) source
    /// order.
    pub fn from_images(
        shape: TreeShape,
        radius: u32,
        images: Vec<VertexAddress>,
    ) -> Result<Self, MapError> {
        let ball = Ball::new(shape, radius, u64::MAX)?;
        Self::from_ball(Arc::new(ball), images)
    }

    pub(crate) fn from_ball(ball: Arc<Ball>, images: Vec<VertexAddress>) -> Result<Self, MapError> {
        if images.len() != ball.len() {
            return Err(MapError::TableSize {
                expected: ball.len(),
                got: images.len(),
            });
        }
        for image in &images {
            ball.shape().validate(image)?;
        }
        Ok(Self { ball, images })
    }

    pub fn from_fn<F>(shape: TreeShape, radius: u32, f: F) -> Result<Self, MapError>
    where
        F: FnMut(&VertexAddress) -> VertexAddress,
    {
        Self::from_fn_with_budget(shape, radius, DEFAULT_MAX_VERTICES, f)
    }

    pub fn from_fn_with_budget<F>(
        shape: TreeShape,
        radius: u32,
        max_vertices: u64,
        f: F,
    ) -> Result<Self, MapError>
    where
        F: FnMut(&VertexAddress) -> VertexAddress,
    {
        let ball = Arc::new(Ball::new(shape, radius, max_vertices)?);
        let images = ball.addresses().iter().map(f).collect();
        Self::from_ball(ball, images)
    }

    pub fn identity(shape: TreeShape, radius: u32) -> Result<Self, MapError> {
        Self::from_fn(shape, radius, VertexAddress::clone)
    }

    pub fn shape(&self) -> TreeShape {
        self.ball.shape()
    }

    pub fn radius(&self) -> u32 {
        self.ball.radius()
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub(crate) fn shared_ball(&self) -> Arc<Ball> {
        Arc::clone(&self.ball)
    }

    /// Images in preorder source order.
    pub fn images(&self) -> &[VertexAddress] {
        &self.images
    }

    pub fn image(&self, index: usize) -> &VertexAddress {
        &self.images[index]
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `(source, image)` pairs in lexicographic source order.
    pub fn entries(&self) -> impl Iterator<Item = (&VertexAddress, &VertexAddress)> {
        self.ball.addresses().iter().zip(&self.images)
    }

    pub fn evaluate(&self, v: &VertexAddress) -> Result<&VertexAddress, MapError> {
        if v.depth() > self.radius() as usize {
            return Err(MapError::OutOfDomain {
                vertex: v.clone(),
                radius: self.radius(),
            });
        }
        self.shape().validate(v)?;
        let index = self.ball.index_of(v).expect("valid address inside the ball");
        Ok(&self.images[index])
    }

    /// The same map on a smaller ball.
    pub fn restrict(&self, radius: u32) -> Result<Self, MapError> {
        if radius >= self.radius() {
            return Ok(self.clone());
        }
        let ball = Arc::new(Ball::new(self.shape(), radius, u64::MAX)?);
        let images = ball
            .addresses()
            .iter()
            .map(|v| self.evaluate(v).cloned())
            .collect::<Result<_, _>>()?;
        Self::from_ball(ball, images)
    }
}

/// Outcome of the order-preservation test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderCheck {
    pub preserving: bool,
    /// Shallowest (then lexicographically first) vertex whose image is not
    /// below its parent's image.
    pub witness: Option<VertexAddress>,
}

/// Checks `f(v) ∈ T_{f(parent(v))}` for every non-root domain vertex, which is
/// equivalent to order preservation on the ball by transitivity.
pub fn is_order_preserving(m: &FiniteTreeMap) -> OrderCheck {
    let ball = m.ball();
    let witness = (1..m.len())
        .filter(|&i| !m.images[i].is_descendant_of(&m.images[ball.parent(i)]))
        .min_by_key(|&i| (ball.depth(i), i))
        .map(|i| ball.address(i).clone());
    OrderCheck {
        preserving: witness.is_none(),
        witness,
    }
}

fn ensure_same_shape(a: &FiniteTreeMap, b: &FiniteTreeMap) -> Result<(), MapError> {
    if a.shape() != b.shape() {
        return Err(MapError::ShapeMismatch {
            left: a.shape().degree(),
            right: b.shape().degree(),
        });
    }
    Ok(())
}

/// `max d(m1(x), m2(x))` over the common (smaller) domain ball.
pub fn sup_distance(m1: &FiniteTreeMap, m2: &FiniteTreeMap) -> Result<u32, MapError> {
    ensure_same_shape(m1, m2)?;
    let (small, large) = if m1.radius() <= m2.radius() { (m1, m2) } else { (m2, m1) };
    let mut best = 0;
    for (v, image) in small.entries() {
        best = best.max(image.distance(large.evaluate(v)?));
    }
    Ok(best)
}

/// Result of composing two finite maps.
#[derive(Clone, Debug)]
pub struct Composition {
    pub map: FiniteTreeMap,
    /// Radius of the inner map's domain.
    pub requested_radius: u32,
    /// Largest radius on which every inner image lands in the outer domain.
    pub effective_radius: u32,
}

/// `outer ∘ inner`, on the largest ball about the root that `inner` maps into
/// the domain of `outer`.
pub fn compose(outer: &FiniteTreeMap, inner: &FiniteTreeMap) -> Result<Composition, MapError> {
    ensure_same_shape(outer, inner)?;
    let first_escape = inner
        .entries()
        .filter(|(_, image)| image.depth() > outer.radius() as usize)
        .map(|(v, _)| v.depth() as u32)
        .min();
    let effective_radius = match first_escape {
        Some(0) => return Err(MapError::EmptyComposition),
        Some(depth) => depth - 1,
        None => inner.radius(),
    };
    let restricted = inner.restrict(effective_radius)?;
    let images = restricted
        .images()
        .iter()
        .map(|image| outer.evaluate(image).cloned())
        .collect::<Result<_, _>>()?;
    Ok(Composition {
        map: FiniteTreeMap::from_ball(restricted.shared_ball(), images)?,
        requested_radius: inner.radius(),
        effective_radius,
    })
}
