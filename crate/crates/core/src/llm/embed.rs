use super::{Embedder, EmbeddingVector, LlmError};

pub const HASH_EMBED_DIM: usize = 256;

/// Offline embedder: feature hashing of word unigrams, word bigrams and
/// boundary-marked character trigrams, L2-normalized.
///
/// Each feature string is hashed with 64-bit FNV-1a; the bucket is
/// `hash % dim` and the top bit of the hash picks the sign.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: HASH_EMBED_DIM }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let lowered = text.to_lowercase();
        let tokens: Vec<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();

        let mut values = vec![0.0f64; self.dim];
        let mut add = |feature: &str| {
            let h = fnv1a(feature.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            values[(h % self.dim as u64) as usize] += sign;
        };
        for t in &tokens {
            add(&format!("w:{t}"));
            let padded: Vec<char> = format!("<{t}>").chars().collect();
            for tri in padded.windows(3) {
                add(&format!("c:{}", tri.iter().collect::<String>()));
            }
        }
        for pair in tokens.windows(2) {
            add(&format!("b:{} {}", pair[0], pair[1]));
        }

        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector { values }
    }
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("hash-ngram-fnv1a-{}", self.dim)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError> {
        texts
            .iter()
            .map(|t| {
                if t.is_empty() {
                    Err(LlmError::EmptyText)
                } else {
                    Ok(self.embed_one(t))
                }
            })
            .collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Cosine similarity; zero vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        let e = HashEmbedder::default();
        let a = e.embed_one("loan duration");
        let b = e.embed_one("loan duration");
        assert_eq!(a, b);
        let norm: f64 = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(a.dimension(), HASH_EMBED_DIM);
    }

    #[test]
    fn morphology_shares_geometry() {
        let e = HashEmbedder::default();
        let s = cosine(&e.embed_one("account").values, &e.embed_one("accounts").values);
        let unrelated = cosine(&e.embed_one("account").values, &e.embed_one("zebra").values);
        assert!(s > 0.5, "similarity {s}");
        assert!(s > unrelated);
    }

    #[test]
    fn punctuation_only_is_zero_vector() {
        let v = HashEmbedder::default().embed_one("?!");
        assert!(v.values.iter().all(|x| *x == 0.0));
        assert_eq!(cosine(&v.values, &v.values), 0.0);
    }
}
