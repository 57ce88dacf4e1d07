//! Vendi diversity score: exponential of the Shannon entropy of the
//! eigenvalues of a normalized similarity matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use super::SimilarityError;

/// Tolerance for symmetry, unit diagonal and tiny negative eigenvalues.
pub const MATRIX_TOLERANCE: f64 = 1e-8;

/// Computes the Vendi score of an `n × n` similarity matrix with unit
/// diagonal. The result lies in `[1, n]`.
pub fn vendi_score(k: &DMatrix<f64>) -> Result<f64, SimilarityError> {
    let eig = normalized_eigenvalues(k)?;
    let entropy: f64 = eig.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum();
    Ok(entropy.exp())
}

/// Row-major convenience wrapper.
pub fn vendi_score_rows(rows: &[Vec<f64>]) -> Result<f64, SimilarityError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(SimilarityError::InvalidMatrix(format!("matrix is not square ({n} rows)")));
    }
    let k = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    vendi_score(&k)
}

/// Eigenvalues of `K / n` after symmetrization, with tiny negative values
/// floored at zero.
pub fn normalized_eigenvalues(k: &DMatrix<f64>) -> Result<Vec<f64>, SimilarityError> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(SimilarityError::InvalidMatrix(format!(
            "expected a non-empty square matrix, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    for i in 0..n {
        if !k[(i, i)].is_finite() || (k[(i, i)] - 1.0).abs() > MATRIX_TOLERANCE {
            return Err(SimilarityError::InvalidMatrix(format!("diagonal entry {i} is {}", k[(i, i)])));
        }
        for j in (i + 1)..n {
            let (a, b) = (k[(i, j)], k[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return Err(SimilarityError::InvalidMatrix(format!("non-finite entry at ({i}, {j})")));
            }
            if (a - b).abs() > MATRIX_TOLERANCE {
                return Err(SimilarityError::InvalidMatrix(format!(
                    "asymmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    let sym = (k + k.transpose()) * (0.5 / n as f64);
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let mut out = Vec::with_capacity(n);
    for &l in eig.iter() {
        if l < -MATRIX_TOLERANCE {
            return Err(SimilarityError::NotPositiveSemidefinite(l));
        }
        out.push(l.max(0.0));
    }
    Ok(out)
}

/// Vendi score of the cosine Gram matrix `X Xᵀ` of unit-norm embedding
/// rows. With more rows than dimensions the `d × d` matrix `Xᵀ X` is used
/// instead; it has the same nonzero eigenvalues, so the score is unchanged.
pub fn vendi_score_embeddings(rows: &[Vec<f64>]) -> Result<f64, SimilarityError> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(SimilarityError::InvalidMatrix(format!("need non-empty rows of one width, got {n} rows")));
    }
    for (i, r) in rows.iter().enumerate() {
        let norm2: f64 = r.iter().map(|v| v * v).sum();
        if !norm2.is_finite() || (norm2 - 1.0).abs() > MATRIX_TOLERANCE {
            return Err(SimilarityError::InvalidMatrix(format!("row {i} has squared norm {norm2}")));
        }
    }
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    if n <= d {
        return vendi_score(&(&x * x.transpose()));
    }
    let cov = (x.transpose() * &x) / n as f64;
    let eig = SymmetricEigen::new(cov).eigenvalues;
    let entropy: f64 = eig.iter().map(|&l| l.max(0.0)).filter(|&l| l > 0.0).map(|l| -l * l.ln()).sum();
    Ok(entropy.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_is_one() {
        let k = DMatrix::from_element(7, 7, 1.0);
        assert!((vendi_score(&k).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_is_n() {
        let k = DMatrix::<f64>::identity(12, 12);
        assert!((vendi_score(&k).unwrap() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn two_identical_pairs() {
        let k = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
        );
        assert!((vendi_score(&k).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dual_form_matches_gram() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let v: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let gram = DMatrix::from_fn(40, 40, |i, j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum());
        let want = vendi_score(&gram).unwrap();
        assert!((vendi_score_embeddings(&rows).unwrap() - want).abs() < 1e-9);
        assert!((vendi_score_embeddings(&rows[..5]).unwrap() - vendi_score(&gram.view((0, 0), (5, 5)).into_owned()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(vendi_score_rows(&[vec![1.0, 0.0]]).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(vendi_score(&asym), Err(SimilarityError::InvalidMatrix(_))));
    }

    #[test]
    fn rejects_indefinite() {
        // eigenvalues 1 + sqrt(2), 1, 1 - sqrt(2)
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(vendi_score(&bad), Err(SimilarityError::NotPositiveSemidefinite(_))));
    }
}
