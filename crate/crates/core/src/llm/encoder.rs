//! Deterministic offline text encoder: hashed character trigrams.

use crate::util::fnv1a64;

pub const FALLBACK_DIM: usize = 384;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("cannot encode empty text")]
    Empty,
}

/// Text to dense vector. The fallback encoder is built in; a pretrained
/// encoder can be plugged in behind the same trait.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;

    fn encode(&self, text: &str) -> Result<Vec<f64>, EncodeError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FallbackEncoder;

impl TextEncoder for FallbackEncoder {
    fn dim(&self) -> usize {
        FALLBACK_DIM
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EncodeError> {
        fallback_encode(text)
    }
}

/// Lowercases, collapses whitespace, counts character trigrams into
/// `FALLBACK_DIM` buckets by FNV-1a hash, and L2-normalizes. Counting is
/// integer-only, so the output does not depend on summation order.
pub fn fallback_encode(text: &str) -> Result<Vec<f64>, EncodeError> {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if words.is_empty() {
        return Err(EncodeError::Empty);
    }
    let padded: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
    let mut counts = [0u64; FALLBACK_DIM];
    let mut buf = [0u8; 12];
    for w in padded.windows(3) {
        let mut len = 0;
        for c in w {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        counts[(fnv1a64(&buf[..len]) % FALLBACK_DIM as u64) as usize] += 1;
    }
    let norm2: u64 = counts.iter().map(|c| c * c).sum();
    let norm = (norm2 as f64).sqrt();
    Ok(counts.iter().map(|&c| c as f64 / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn deterministic_unit_vectors() {
        let a = fallback_encode("SELECT a FROM t").unwrap();
        assert_eq!(a, fallback_encode("SELECT a FROM t").unwrap());
        assert_eq!(a.len(), FALLBACK_DIM);
        let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
        assert_eq!(a, fallback_encode("  select A\n from T ").unwrap());
    }

    #[test]
    fn empty_text_is_rejected() {
        assert_eq!(fallback_encode("   "), Err(EncodeError::Empty));
    }

    #[test]
    fn literal_change_stays_close() {
        let pairs = [
            ("SELECT name FROM customers WHERE age > 30", "SELECT name FROM customers WHERE age > 45"),
            (
                "SELECT o.id, SUM(oi.qty) FROM orders o JOIN order_items oi ON o.id = oi.order_id WHERE o.status = 'paid' GROUP BY o.id",
                "SELECT o.id, SUM(oi.qty) FROM orders o JOIN order_items oi ON o.id = oi.order_id WHERE o.status = 'shipped' GROUP BY o.id",
            ),
        ];
        for (a, b) in pairs {
            let s = cos(&fallback_encode(a).unwrap(), &fallback_encode(b).unwrap());
            assert!(s > 0.9, "{s} for {a}");
        }
    }
}
