//! Hashed bag-of-tokens text embedding.
//!
//! Deterministic across runs and platforms: tokens are hashed with FNV-1a
//! into `dim` signed buckets and the sum is L2-normalized. The empty string
//! maps to the zero vector.

/// 64-bit FNV-1a; stable, unlike the std hasher.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| c.is_whitespace() || (c.is_ascii_punctuation() && c != '-'))
        .filter(|t| !t.is_empty())
}

/// Signed-bucket bag-of-tokens embedding of `text` into `dim` floats.
pub fn embed_text(text: &str, dim: usize) -> Vec<f32> {
    let mut v = vec![0f32; dim];
    let mut any = false;
    for token in tokens(&text.to_lowercase()) {
        any = true;
        let h = fnv1a(token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    if !any {
        return v;
    }
    let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}
