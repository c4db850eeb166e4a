//! Seeded generators of test maps.
//!
//! Every generator is a pure function of its arguments: the same seed gives
//! the same map on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::MapError;
use crate::mixed::class_seed;
use crate::qi::FiniteTreeMap;
use crate::tree::{TreeShape, VertexAddress, MAX_DEPTH};

/// Root-fixing automorphism permuting child labels by one permutation per
/// depth.
pub fn levelwise_automorphism(shape: TreeShape, radius: u32, seed: u64) -> Result<FiniteTreeMap, MapError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Vec<u32>> = (0..radius)
        .map(|depth| {
            let count = if depth == 0 { shape.degree() } else { shape.degree() - 1 };
            let mut p: Vec<u32> = (0..count).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    FiniteTreeMap::from_fn(shape, radius, |v| {
        VertexAddress::from_labels(
            v.labels()
                .iter()
                .enumerate()
                .map(|(k, &l)| perms[k][l as usize])
                .collect(),
        )
    })
}

/// Root-fixing automorphism with an independent permutation of the children
/// of every vertex.
pub fn random_automorphism(shape: TreeShape, radius: u32, seed: u64) -> Result<FiniteTreeMap, MapError> {
    let identity = FiniteTreeMap::identity(shape, radius)?;
    let ball = identity.ball();
    let mut images: Vec<VertexAddress> = Vec::with_capacity(ball.len());
    let mut perms: Vec<Option<Vec<u32>>> = vec![None; ball.len()];
    for i in 0..ball.len() {
        if i == 0 {
            images.push(VertexAddress::root());
            continue;
        }
        let p = ball.parent(i);
        let perm = perms[p].get_or_insert_with(|| {
            let parent = ball.address(p);
            let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, 0, parent));
            let mut perm: Vec<u32> = (0..shape.child_count(parent)).collect();
            perm.shuffle(&mut rng);
            perm
        });
        let label = *ball.address(i).labels().last().expect("non-root");
        let image = images[p].child(perm[label as usize]);
        images.push(image);
    }
    FiniteTreeMap::from_images(shape, radius, images)
}

/// Moves every non-root image to a random descendant at most `max_step`
/// levels below it.
pub fn perturb_in_subtree(f: &FiniteTreeMap, max_step: u32, seed: u64) -> Result<FiniteTreeMap, MapError> {
    let shape = f.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = f
        .images()
        .iter()
        .enumerate()
        .map(|(i, image)| {
            if i == 0 {
                return image.clone();
            }
            let room = MAX_DEPTH.saturating_sub(image.depth()) as u32;
            let steps = rng.gen_range(0..=max_step).min(room);
            let mut y = image.clone();
            for _ in 0..steps {
                let label = rng.gen_range(0..shape.child_count(&y));
                y = y.child(label);
            }
            y
        })
        .collect();
    FiniteTreeMap::from_images(shape, f.radius(), images)
}

/// How far the retraction of [`perturb_order_preserving`] moves `y` up:
/// at most 2, zero at the root, and growing by at most one per step down.
fn retraction_shift(y: &VertexAddress, seed: u64) -> usize {
    let mut shift = 0usize;
    for depth in 1..=y.depth() {
        let prefix = y.truncated(depth);
        let wanted = (class_seed(seed, 1, &prefix) % 3) as usize;
        shift = wanted.min(shift + 1);
    }
    shift
}

/// `P ∘ f` for a seeded order-preserving retraction `P` that moves each
/// vertex at most two steps toward the root. Order-preserving inputs stay
/// order-preserving.
pub fn perturb_order_preserving(f: &FiniteTreeMap, seed: u64) -> Result<FiniteTreeMap, MapError> {
    let images = f
        .images()
        .iter()
        .map(|y| y.truncated(y.depth() - retraction_shift(y, seed)))
        .collect();
    FiniteTreeMap::from_images(f.shape(), f.radius(), images)
}
