//! Maximum-cardinality bipartite matching (augmenting paths).

use alloc::vec;
use alloc::vec::Vec;

/// Returns `pairing[l] = Some(r)` for a maximum one-to-one matching between
/// `n_left` and `n_right` vertices, where `edge(l, r)` tells whether the two may
/// be paired.
pub fn max_bipartite_matching<F>(n_left: usize, n_right: usize, mut edge: F) -> Vec<Option<usize>>
where
    F: FnMut(usize, usize) -> bool,
{
    let adj: Vec<Vec<usize>> = (0..n_left)
        .map(|l| (0..n_right).filter(|&r| edge(l, r)).collect())
        .collect();
    let mut match_right: Vec<Option<usize>> = vec![None; n_right];
    let mut seen = vec![0usize; n_right];
    for l in 0..n_left {
        // stamp l+1 marks the vertices visited in this search
        augment(l, l + 1, &adj, &mut match_right, &mut seen);
    }
    let mut match_left: Vec<Option<usize>> = vec![None; n_left];
    for (r, m) in match_right.iter().enumerate() {
        if let Some(l) = m {
            match_left[*l] = Some(r);
        }
    }
    match_left
}

fn augment(l: usize, stamp: usize, adj: &[Vec<usize>], match_right: &mut [Option<usize>], seen: &mut [usize]) -> bool {
    // iterative DFS over alternating paths
    let mut stack: Vec<(usize, usize)> = vec![(l, 0)];
    let mut path: Vec<usize> = Vec::new();
    while let Some(&mut (u, ref mut next)) = stack.last_mut() {
        if *next >= adj[u].len() {
            stack.pop();
            path.pop();
            continue;
        }
        let r = adj[u][*next];
        *next += 1;
        if seen[r] == stamp {
            continue;
        }
        seen[r] = stamp;
        path.push(r);
        match match_right[r] {
            None => {
                // flip the alternating path
                for (depth, &rr) in path.iter().enumerate() {
                    match_right[rr] = Some(stack[depth].0);
                }
                return true;
            }
            Some(owner) => stack.push((owner, 0)),
        }
    }
    false
}

/// Size of a maximum matching.
pub fn matching_size<F>(n_left: usize, n_right: usize, edge: F) -> usize
where
    F: FnMut(usize, usize) -> bool,
{
    max_bipartite_matching(n_left, n_right, edge)
        .iter()
        .filter(|m| m.is_some())
        .count()
}
