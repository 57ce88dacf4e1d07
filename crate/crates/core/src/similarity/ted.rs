//! Ordered tree edit distance (Zhang–Shasha) with unit costs.

use crate::analysis::{Postorder, QueryAst};

/// Unit-cost ordered tree edit distance: insert, delete and relabel each
/// cost 1. Relabel is free only when both kind and payload match.
pub fn tree_edit_distance(a: &QueryAst, b: &QueryAst) -> usize {
    postorder_distance(a.postorder(), b.postorder())
}

pub fn postorder_distance(a: &Postorder, b: &Postorder) -> usize {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return n.max(m);
    }
    let mut tree_dist = vec![0u32; n * m];
    // Forest-distance scratch, sized for the largest possible subproblem.
    let mut forest = vec![0u32; (n + 1) * (m + 1)];
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            keyroot_distance(a, b, i, j, &mut tree_dist, &mut forest);
        }
    }
    tree_dist[(n - 1) * m + (m - 1)] as usize
}

/// Size of the multiset intersection of the two label sets. Every mapped
/// pair with equal labels uses one shared label, so the distance is at least
/// `max(n, m) - common_labels`.
pub fn common_labels(a: &Postorder, b: &Postorder) -> usize {
    let (x, y) = (&a.sorted_ids, &b.sorted_ids);
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Forest distances for the key-root pair `(i, j)`, one row per node of
/// `a`'s subtree. Rows are slices so the inner loop stays free of index
/// arithmetic.
fn keyroot_distance(a: &Postorder, b: &Postorder, i: usize, j: usize, tree_dist: &mut [u32], forest: &mut [u32]) {
    let m = b.len();
    let (li, lj) = (a.leftmost[i], b.leftmost[j]);
    let cols = j - lj + 2;
    let rows = i - li + 2;
    let b_left = &b.leftmost[lj..=j];
    let b_ids = &b.ids[lj..=j];
    for (c, v) in forest[..cols].iter_mut().enumerate() {
        *v = c as u32;
    }
    for r in 1..rows {
        let x = li + r - 1;
        let (done, rest) = forest.split_at_mut(r * cols);
        let prev = &done[(r - 1) * cols..];
        let cur = &mut rest[..cols];
        cur[0] = r as u32;
        let td = &mut tree_dist[x * m + lj..x * m + j + 1];
        // Row of the forest that remains once the subtree at x is removed.
        let pr = a.leftmost[x] - li;
        let before = &done[pr * cols..pr * cols + cols];
        if pr == 0 {
            let ax = a.ids[x];
            for c in 1..cols {
                let edit = (prev[c] + 1).min(cur[c - 1] + 1);
                let pc = b_left[c - 1] - lj;
                cur[c] = if pc == 0 {
                    let d = edit.min(prev[c - 1] + u32::from(ax != b_ids[c - 1]));
                    td[c - 1] = d;
                    d
                } else {
                    edit.min(before[pc] + td[c - 1])
                };
            }
        } else {
            for c in 1..cols {
                let pc = b_left[c - 1] - lj;
                cur[c] = (prev[c] + 1).min(cur[c - 1] + 1).min(before[pc] + td[c - 1]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::AstNode;

    fn n(kind: &str, children: Vec<AstNode>) -> AstNode {
        AstNode::with_children(kind, children)
    }

    fn l(kind: &str) -> AstNode {
        AstNode::leaf(kind, None)
    }

    #[test]
    fn identical_trees_have_zero_distance() {
        let t = QueryAst::from_root(n("a", vec![l("b"), n("c", vec![l("d")])]));
        assert_eq!(tree_edit_distance(&t, &t), 0);
    }

    #[test]
    fn single_relabel() {
        let a = QueryAst::from_root(l("a"));
        let b = QueryAst::from_root(l("b"));
        assert_eq!(tree_edit_distance(&a, &b), 1);
    }

    #[test]
    fn payload_difference_is_a_relabel() {
        let a = QueryAst::from_root(AstNode::leaf("Ident", Some("x".into())));
        let b = QueryAst::from_root(AstNode::leaf("Ident", Some("y".into())));
        assert_eq!(tree_edit_distance(&a, &b), 1);
    }

    #[test]
    fn textbook_example() {
        // Zhang & Shasha running example: f(d(a c(b)) e) vs f(c(d(a b)) e), distance 2.
        let t1 = QueryAst::from_root(n("f", vec![n("d", vec![l("a"), n("c", vec![l("b")])]), l("e")]));
        let t2 = QueryAst::from_root(n("f", vec![n("c", vec![n("d", vec![l("a"), l("b")])]), l("e")]));
        assert_eq!(tree_edit_distance(&t1, &t2), 2);
    }

    #[test]
    fn insert_whole_subtree() {
        let a = QueryAst::from_root(n("r", vec![l("x")]));
        let b = QueryAst::from_root(n("r", vec![l("x"), n("y", vec![l("z"), l("w")])]));
        assert_eq!(tree_edit_distance(&a, &b), 3);
        assert_eq!(tree_edit_distance(&b, &a), 3);
    }
}
