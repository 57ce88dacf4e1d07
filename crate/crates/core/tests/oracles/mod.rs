//! Independent reference implementations shared by the property tests and
//! the acceptance run.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqlforge::analysis::{AstNode, QueryAst};

/// Plain labelled tree for the forest-distance recursion.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct T {
    pub label: String,
    pub kids: Vec<T>,
}

fn size(f: &[T]) -> usize {
    f.iter().map(|t| 1 + size(&t.kids)).sum()
}

fn print(f: &[T]) -> String {
    f.iter().map(|t| format!("{}({})", t.label, print(&t.kids))).collect::<Vec<_>>().join(",")
}

/// Edit distance by the textbook forest recursion on right-most roots,
/// memoized on the printed forests. Exponential in principle, fine at 12 nodes.
pub fn forest_dist(f: &[T], g: &[T], memo: &mut HashMap<(String, String), usize>) -> usize {
    if f.is_empty() {
        return size(g);
    }
    if g.is_empty() {
        return size(f);
    }
    let key = (print(f), print(g));
    if let Some(&d) = memo.get(&key) {
        return d;
    }
    let (v, w) = (f.last().unwrap(), g.last().unwrap());
    // Deleting a node splices its children in its place.
    let f_minus_v: Vec<T> = f[..f.len() - 1].iter().cloned().chain(v.kids.iter().cloned()).collect();
    let g_minus_w: Vec<T> = g[..g.len() - 1].iter().cloned().chain(w.kids.iter().cloned()).collect();
    let delete = forest_dist(&f_minus_v, g, memo) + 1;
    let insert = forest_dist(f, &g_minus_w, memo) + 1;
    let matched = forest_dist(&v.kids, &w.kids, memo)
        + forest_dist(&f[..f.len() - 1], &g[..g.len() - 1], memo)
        + usize::from(v.label != w.label);
    let d = delete.min(insert).min(matched);
    memo.insert(key, d);
    d
}

pub fn tree_distance(a: &T, b: &T) -> usize {
    forest_dist(std::slice::from_ref(a), std::slice::from_ref(b), &mut HashMap::new())
}

/// The oracle's value for `sim_ast`: one minus distance over the larger
/// size, floored at zero.
pub fn sim_ast_oracle(a: &T, b: &T) -> f64 {
    let max = size(std::slice::from_ref(a)).max(size(std::slice::from_ref(b)));
    max.saturating_sub(tree_distance(a, b)) as f64 / max as f64
}

/// Builds the same tree twice. Node k ≥ 1 hangs under `parents[k-1] % k`;
/// labels are one of three kinds, with or without a payload.
pub fn build(labels: &[(u8, bool)], parents: &[usize]) -> (T, QueryAst) {
    let n = labels.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for k in 1..n {
        children[parents[k - 1] % k].push(k);
    }
    fn make(k: usize, labels: &[(u8, bool)], ch: &[Vec<usize>]) -> (T, AstNode) {
        let (kind, payload) = labels[k];
        let kind = ["a", "b", "c"][kind as usize % 3];
        let payload = payload.then(|| "p".to_string());
        let (ts, ns): (Vec<T>, Vec<AstNode>) = ch[k].iter().map(|&c| make(c, labels, ch)).unzip();
        let label = format!("{kind}{}", if payload.is_some() { "/p" } else { "" });
        let mut node = AstNode::leaf(kind, payload);
        node.children = ns;
        (T { label, kids: ts }, node)
    }
    let (t, node) = make(0, labels, &children);
    (t, QueryAst::from_root(node))
}

pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> (T, QueryAst) {
    let n = rng.random_range(1..=max_nodes);
    let labels: Vec<(u8, bool)> = (0..n).map(|_| (rng.random_range(0..3), rng.random_bool(0.5))).collect();
    let parents: Vec<usize> = (1..n).map(|_| rng.random_range(0..usize::MAX / 2)).collect();
    build(&labels, &parents)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// exp of the Shannon entropy of the eigenvalues of K/n.
pub fn vendi_oracle(k: &[Vec<f64>]) -> f64 {
    let n = k.len() as f64;
    let scaled = k.iter().map(|r| r.iter().map(|v| v / n).collect()).collect();
    let h: f64 = jacobi_eigenvalues(scaled).into_iter().filter(|&l| l > 1e-15).map(|l| -l * l.ln()).sum();
    h.exp()
}

/// Cosine Gram matrix of random unit vectors: PSD with unit diagonal.
pub fn random_gram(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum() }).collect())
        .collect()
}

pub fn matrix(k: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(k.len(), k.len(), |i, j| k[i][j])
}
