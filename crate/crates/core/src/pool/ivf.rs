//! Inverted-file approximate index: spherical k-means lists probed by
//! centroid cosine.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const ITERATIONS: usize = 12;

#[derive(Clone, Debug)]
pub struct IvfIndex {
    centroids: Vec<Vec<f64>>,
    lists: Vec<Vec<usize>>,
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let s = dot(c, v);
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

impl IvfIndex {
    /// Clusters `rows` into at most `nlist` lists. Deterministic for a seed.
    pub fn build(rows: &[&[f64]], nlist: usize, seed: u64) -> Self {
        let unit: Vec<Vec<f64>> = rows.par_iter().map(|r| normalized(r)).collect();
        let k = nlist.clamp(1, unit.len().max(1));
        if unit.is_empty() {
            return IvfIndex { centroids: Vec::new(), lists: Vec::new() };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids: Vec<Vec<f64>> = sample(&mut rng, unit.len(), k).into_iter().map(|i| unit[i].clone()).collect();
        let dim = unit[0].len();
        let mut assign = vec![0usize; unit.len()];
        for _ in 0..ITERATIONS {
            assign = unit.par_iter().map(|v| nearest(&centroids, v)).collect();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (v, &a) in unit.iter().zip(&assign) {
                counts[a] += 1;
                for (s, x) in sums[a].iter_mut().zip(v) {
                    *s += x;
                }
            }
            for (c, (s, n)) in centroids.iter_mut().zip(sums.into_iter().zip(counts)) {
                // Empty clusters keep their previous centroid.
                if n > 0 {
                    *c = normalized(&s);
                }
            }
        }
        let mut lists = vec![Vec::new(); k];
        for (i, &a) in assign.iter().enumerate() {
            lists[a].push(i);
        }
        IvfIndex { centroids, lists }
    }

    pub fn nlist(&self) -> usize {
        self.centroids.len()
    }

    /// Row indices stored in the `nprobe` lists whose centroids are closest.
    pub fn probe(&self, query: &[f64], nprobe: usize) -> Vec<usize> {
        let q = normalized(query);
        let mut order: Vec<(usize, f64)> = self.centroids.iter().enumerate().map(|(i, c)| (i, dot(c, &q))).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        order.iter().take(nprobe.max(1)).flat_map(|(i, _)| self.lists[*i].iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_row_lands_in_one_list() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64).cos(), 0.5]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let idx = IvfIndex::build(&refs, 6, 1);
        let mut all = idx.probe(&[1.0, 0.0, 0.0], idx.nlist());
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }
}
