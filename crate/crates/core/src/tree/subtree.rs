use std::collections::BTreeSet;

use rand::Rng;

use super::{TreeShape, VertexAddress};
use crate::error::TreeError;

/// A finite connected vertex set, closed under parents down to its unique
/// shallowest vertex (the local root).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteSubtree {
    root: VertexAddress,
    vertices: BTreeSet<VertexAddress>,
}

impl FiniteSubtree {
    pub fn new<I>(vertices: I) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = VertexAddress>,
    {
        let vertices: BTreeSet<_> = vertices.into_iter().collect();
        let min_depth = vertices
            .iter()
            .map(VertexAddress::depth)
            .min()
            .ok_or(TreeError::EmptySubtree)?;
        let mut roots = vertices.iter().filter(|v| v.depth() == min_depth);
        let root = roots.next().cloned().ok_or(TreeError::EmptySubtree)?;
        if let Some(other) = roots.next() {
            return Err(TreeError::Disconnected(other.clone()));
        }
        for v in &vertices {
            if *v != root && !vertices.contains(&v.parent()) {
                return Err(TreeError::Disconnected(v.clone()));
            }
        }
        Ok(Self { root, vertices })
    }

    pub fn singleton(v: VertexAddress) -> Self {
        Self {
            vertices: BTreeSet::from([v.clone()]),
            root: v,
        }
    }

    pub fn local_root(&self) -> &VertexAddress {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: &VertexAddress) -> bool {
        self.vertices.contains(v)
    }

    /// Vertices in lexicographic order.
    pub fn vertices(&self) -> impl Iterator<Item = &VertexAddress> {
        self.vertices.iter()
    }

    pub fn contains_tree_root(&self) -> bool {
        self.root.is_root()
    }

    /// Vertices outside the subtree whose parent is inside, sorted.
    pub fn boundary(&self, shape: TreeShape) -> Vec<VertexAddress> {
        let mut out: Vec<_> = self
            .vertices
            .iter()
            .flat_map(|v| shape.children(v).collect::<Vec<_>>())
            .filter(|c| !self.vertices.contains(c))
            .collect();
        out.sort();
        out
    }

    /// Boundary size predicted by the isoperimetric identity.
    pub fn expected_boundary_len(&self, shape: TreeShape) -> usize {
        let base = if self.contains_tree_root() { 2 } else { 1 };
        self.len() * (shape.degree() as usize - 2) + base
    }

    /// Grows a subtree from `root` by `steps` single-vertex additions. At each
    /// step `pick` receives the current boundary (sorted) and returns the
    /// index of the vertex to absorb.
    pub fn grow<F>(shape: TreeShape, root: VertexAddress, steps: usize, mut pick: F) -> Self
    where
        F: FnMut(&[VertexAddress]) -> usize,
    {
        let mut vertices = BTreeSet::from([root.clone()]);
        let mut frontier: Vec<_> = shape.children(&root).collect();
        for _ in 0..steps {
            let chosen = frontier.remove(pick(&frontier));
            for child in shape.children(&chosen) {
                let at = frontier.binary_search(&child).unwrap_err();
                frontier.insert(at, child);
            }
            vertices.insert(chosen);
        }
        Self { root, vertices }
    }

    /// Grows by attaching each new vertex at a uniformly chosen boundary slot.
    pub fn random<R: Rng + ?Sized>(
        shape: TreeShape,
        root: VertexAddress,
        size: usize,
        rng: &mut R,
    ) -> Self {
        Self::grow(shape, root, size.saturating_sub(1), |frontier| {
            rng.gen_range(0..frontier.len())
        })
    }
}

/// Boundary of a vertex set, which must form a valid finite subtree.
pub fn boundary<I>(vertices: I, shape: TreeShape) -> Result<Vec<VertexAddress>, TreeError>
where
    I: IntoIterator<Item = VertexAddress>,
{
    Ok(FiniteSubtree::new(vertices)?.boundary(shape))
}
