use std::ops::Range;

use super::{label_distance, TreeShape, VertexAddress, MAX_DEPTH};
use crate::error::TreeError;

/// The ball of a given radius about the root, enumerated in preorder.
///
/// Preorder makes every subtree `T_v ∩ ball` a contiguous index range, and
/// the index of an address can be computed arithmetically.
#[derive(Clone, Debug)]
pub struct Ball {
    shape: TreeShape,
    radius: u32,
    addresses: Vec<VertexAddress>,
    depths: Vec<u32>,
    parents: Vec<u32>,
    // subtree_sizes[k]: size of the stored subtree below a non-root vertex at depth k
    subtree_sizes: Vec<u64>,
}

impl Ball {
    pub fn new(shape: TreeShape, radius: u32, max_vertices: u64) -> Result<Self, TreeError> {
        if radius as usize > MAX_DEPTH {
            return Err(TreeError::TooDeep(radius as usize));
        }
        let size = shape.check_budget(radius, max_vertices)? as usize;

        let branch = u64::from(shape.degree() - 1);
        let mut subtree_sizes = vec![0u64; radius as usize + 2];
        let mut acc = 0u64;
        for k in (1..=radius as usize).rev() {
            acc = acc * branch + 1;
            subtree_sizes[k] = acc;
        }
        subtree_sizes[0] = size as u64;

        let mut addresses = Vec::with_capacity(size);
        let mut depths = Vec::with_capacity(size);
        let mut parents = Vec::with_capacity(size);
        // (address, parent index) stack; children pushed in reverse for preorder
        let mut stack = vec![(VertexAddress::root(), 0u32)];
        while let Some((v, parent)) = stack.pop() {
            let index = addresses.len() as u32;
            if (v.depth() as u32) < radius {
                for label in (0..shape.child_count(&v)).rev() {
                    stack.push((v.child(label), index));
                }
            }
            depths.push(v.depth() as u32);
            parents.push(parent);
            addresses.push(v);
        }
        debug_assert_eq!(addresses.len(), size);
        Ok(Self {
            shape,
            radius,
            addresses,
            depths,
            parents,
            subtree_sizes,
        })
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    pub fn addresses(&self) -> &[VertexAddress] {
        &self.addresses
    }

    pub fn address(&self, index: usize) -> &VertexAddress {
        &self.addresses[index]
    }

    pub fn depth(&self, index: usize) -> u32 {
        self.depths[index]
    }

    /// Parent index; the root is its own parent.
    pub fn parent(&self, index: usize) -> usize {
        self.parents[index] as usize
    }

    /// Indices of the stored descendants of `index`, itself included.
    pub fn subtree(&self, index: usize) -> Range<usize> {
        let size = self.subtree_sizes[self.depths[index] as usize] as usize;
        index..index + size
    }

    /// Preorder index of `v`, if it lies in the ball and is valid for the
    /// shape.
    pub fn index_of(&self, v: &VertexAddress) -> Option<usize> {
        if v.depth() > self.radius as usize || !self.shape.is_valid(v) {
            return None;
        }
        let mut index = 0u64;
        for (k, &label) in v.labels().iter().enumerate() {
            index += 1 + u64::from(label) * self.subtree_sizes[k + 1];
        }
        Some(index as usize)
    }

    /// Indices of all vertices at exactly `depth`, ascending.
    pub fn level(&self, depth: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.depths[i] == depth)
    }

    pub fn distance(&self, i: usize, j: usize) -> u32 {
        label_distance(self.addresses[i].labels(), self.addresses[j].labels())
    }

    /// Depth of the lowest common ancestor of two stored vertices.
    pub fn lca_depth(&self, i: usize, j: usize) -> u32 {
        self.addresses[i].common_prefix_len(&self.addresses[j]) as u32
    }

    /// Geodesic between two stored vertices as preorder indices, from `i` to
    /// `j`.
    pub fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let meet = self.lca_depth(i, j);
        let mut up = Vec::new();
        let mut x = i;
        while self.depths[x] > meet {
            up.push(x);
            x = self.parent(x);
        }
        up.push(x);
        let mut down = Vec::new();
        let mut y = j;
        while self.depths[y] > meet {
            down.push(y);
            y = self.parent(y);
        }
        up.extend(down.into_iter().rev());
        up
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::DEFAULT_MAX_VERTICES;

    #[test]
    fn preorder_matches_sorted_addresses() {
        for degree in 3..=5 {
            let shape = TreeShape::new(degree).unwrap();
            let ball = Ball::new(shape, 4, DEFAULT_MAX_VERTICES).unwrap();
            let mut sorted = ball.addresses().to_vec();
            sorted.sort();
            assert_eq!(sorted, ball.addresses());
            for (i, v) in ball.addresses().iter().enumerate() {
                assert_eq!(ball.index_of(v), Some(i));
                let range = ball.subtree(i);
                let expected: Vec<_> = (0..ball.len())
                    .filter(|&j| ball.address(j).is_descendant_of(v))
                    .collect();
                assert_eq!(range.collect::<Vec<_>>(), expected);
                assert_eq!(ball.address(ball.parent(i)), &v.parent());
            }
        }
    }

    #[test]
    fn paths_agree_with_address_geodesics() {
        let shape = TreeShape::new(3).unwrap();
        let ball = Ball::new(shape, 3, DEFAULT_MAX_VERTICES).unwrap();
        for i in 0..ball.len() {
            for j in 0..ball.len() {
                let path: Vec<_> = ball.path(i, j).into_iter().map(|k| ball.address(k).clone()).collect();
                assert_eq!(path, ball.address(i).geodesic(ball.address(j)));
            }
        }
    }

    #[test]
    fn out_of_ball_lookup() {
        let shape = TreeShape::new(3).unwrap();
        let ball = Ball::new(shape, 2, DEFAULT_MAX_VERTICES).unwrap();
        assert_eq!(ball.index_of(&"0.0.0".parse().unwrap()), None);
        assert_eq!(ball.index_of(&"3".parse().unwrap()), None);
    }

    #[test]
    fn budget_is_enforced() {
        let shape = TreeShape::new(3).unwrap();
        assert!(matches!(
            Ball::new(shape, 8, 100),
            Err(TreeError::BudgetExceeded { size: Some(766), .. })
        ));
    }
}
