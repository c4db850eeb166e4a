use proptest::prelude::*;
use treeqi_core::tree::{self, boundary, Ball, FiniteSubtree, TreeShape, VertexAddress};

fn shape_strategy() -> impl Strategy<Value = TreeShape> {
    (3u32..=5).prop_map(|d| TreeShape::new(d).unwrap())
}

/// A valid address of depth at most `max_depth` on a tree of degree `d`.
fn address_in(d: u32, max_depth: usize) -> impl Strategy<Value = VertexAddress> {
    prop::collection::vec(0u32..d - 1, 0..=max_depth).prop_flat_map(move |rest| {
        (0u32..d).prop_map(move |first| {
            if rest.is_empty() {
                VertexAddress::root()
            } else {
                let mut labels = rest.clone();
                labels[0] = first;
                VertexAddress::from_labels(labels)
            }
        })
    })
}

fn with_addresses(n: usize) -> impl Strategy<Value = (TreeShape, Vec<VertexAddress>)> {
    shape_strategy().prop_flat_map(move |s| {
        (Just(s), prop::collection::vec(address_in(s.degree(), 8), n))
    })
}

/// Distance by walking both vertices up until they meet.
fn walking_distance(u: &VertexAddress, v: &VertexAddress) -> u32 {
    let (mut a, mut b) = (u.clone(), v.clone());
    let mut steps = 0;
    while a != b {
        if a.depth() >= b.depth() {
            a = a.parent();
        } else {
            b = b.parent();
        }
        steps += 1;
    }
    steps
}

proptest! {
    #[test]
    fn distance_matches_walking((_, vs) in with_addresses(2)) {
        prop_assert_eq!(tree::distance(&vs[0], &vs[1]), walking_distance(&vs[0], &vs[1]));
    }

    #[test]
    fn four_point_condition((_, vs) in with_addresses(4)) {
        let d = |i: usize, j: usize| u64::from(tree::distance(&vs[i], &vs[j]));
        let mut sums = [d(0, 1) + d(2, 3), d(0, 2) + d(1, 3), d(0, 3) + d(1, 2)];
        sums.sort_unstable();
        // the two largest pair sums agree in a tree
        prop_assert_eq!(sums[1], sums[2]);
    }

    #[test]
    fn geodesic_is_a_shortest_path((_, vs) in with_addresses(2)) {
        let path = tree::geodesic(&vs[0], &vs[1]);
        prop_assert_eq!(path.len() as u32, tree::distance(&vs[0], &vs[1]) + 1);
        prop_assert_eq!(&path[0], &vs[0]);
        prop_assert_eq!(path.last().unwrap(), &vs[1]);
        for pair in path.windows(2) {
            prop_assert_eq!(tree::distance(&pair[0], &pair[1]), 1);
        }
    }

    #[test]
    fn lca_is_the_deepest_common_ancestor((_, vs) in with_addresses(4)) {
        let l = tree::lca(vs.iter()).unwrap();
        for v in &vs {
            prop_assert!(tree::is_descendant(v, &l));
        }
        // no child of l is a common ancestor
        let deeper_common = vs.iter().all(|v| v.depth() > l.depth())
            && vs.iter().all(|v| v.truncated(l.depth() + 1) == vs[0].truncated(l.depth() + 1));
        prop_assert!(!deeper_common);
        // folding pairwise gives the same answer
        let folded = vs[1..].iter().fold(vs[0].clone(), |acc, v| acc.lca(v));
        prop_assert_eq!(folded, l);
    }

    #[test]
    fn address_text_round_trips((_, vs) in with_addresses(1)) {
        let text = vs[0].to_string();
        prop_assert_eq!(text.parse::<VertexAddress>().unwrap(), vs[0].clone());
    }

    #[test]
    fn subtree_boundary_size(
        s in shape_strategy(),
        root_labels in prop::collection::vec(0u32..2, 0..3),
        steps in 0usize..12,
        seed in any::<u64>(),
    ) {
        let root = VertexAddress::from_labels(root_labels);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let sub = FiniteSubtree::random(s, root.clone(), steps + 1, &mut rng);
        let d = s.degree() as usize;
        // |∂S| = |S|(d − 2) + 2, one less when S avoids the tree root
        let expected = sub.len() * (d - 2) + if root.is_root() { 2 } else { 1 };
        prop_assert_eq!(sub.boundary(s).len(), expected);
        prop_assert_eq!(sub.expected_boundary_len(s), expected);
    }
}

#[test]
fn boundary_agrees_with_a_neighbour_scan() {
    // ∂S is every vertex outside S adjacent to S, except the parent of the
    // local root
    let s = TreeShape::new(3).unwrap();
    let ball = Ball::new(s, 4, 1 << 20).unwrap();
    let sets: Vec<Vec<&str>> = vec![
        vec!["."],
        vec![".", "0", "1"],
        vec!["0", "0.0", "0.0.1"],
        vec!["2", "2.0", "2.1", "2.1.0"],
    ];
    for set in sets {
        let members: Vec<VertexAddress> = set.iter().map(|t| t.parse().unwrap()).collect();
        let sub = FiniteSubtree::new(members.clone()).unwrap();
        let local = sub.local_root().clone();
        let mut scanned: Vec<VertexAddress> = ball
            .addresses()
            .iter()
            .filter(|w| !sub.contains(w))
            .filter(|w| !local.is_root() && **w != local.parent() || local.is_root())
            .filter(|w| members.iter().any(|m| tree::distance(m, w) == 1))
            .cloned()
            .collect();
        scanned.sort();
        assert_eq!(boundary(members.iter().cloned(), s).unwrap(), scanned, "{set:?}");
    }
}

#[test]
fn ball_sizes_by_counting() {
    for d in 3..=5u32 {
        let s = TreeShape::new(d).unwrap();
        for r in 0..=5u32 {
            let ball = Ball::new(s, r, 1 << 22).unwrap();
            let counted = 1 + (1..=r).map(|k| u64::from(d) * u64::from(d - 1).pow(k - 1)).sum::<u64>();
            assert_eq!(ball.len() as u64, counted);
            assert_eq!(s.ball_size(r), Some(counted));
        }
    }
}
