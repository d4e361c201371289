use crate::patch_grid::FeatureVector;
use crate::Scalar;

use super::GraphError;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Hashed bag of character trigrams of `lowercase(text + "§" + label)`.
///
/// Each trigram's UTF-8 bytes are hashed with FNV-1a and counted in bucket
/// `hash % dim`; the counts are then L2-normalized. Inputs shorter than three
/// characters map to the first unit vector.
pub fn entity_embedding<T: Scalar>(text: &str, label: &str, dim: usize) -> Result<FeatureVector<T>, GraphError> {
    if dim < 8 {
        return Err(GraphError::EmbeddingDim(dim));
    }
    let joined: Vec<char> = format!("{text}§{label}").to_lowercase().chars().collect();
    let mut counts = vec![0.0f64; dim];
    let mut buf = [0u8; 12];
    for tri in joined.windows(3) {
        let mut len = 0;
        for c in tri {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        counts[(fnv1a64(&buf[..len]) % dim as u64) as usize] += 1.0;
    }
    let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 {
        counts[0] = 1.0;
    } else {
        counts.iter_mut().for_each(|c| *c /= norm);
    }
    Ok(FeatureVector::new(counts.into_iter().map(T::of).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn fnv_reference() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let a = entity_embedding::<f64>("Right lower lobe", "anatomy", 64).unwrap();
        let b = entity_embedding::<f64>("Right lower lobe", "anatomy", 64).unwrap();
        assert_eq!(a, b);
        let n: f64 = a.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn case_insensitive() {
        let a = entity_embedding::<f64>("Opacity", "OBS", 32).unwrap();
        let b = entity_embedding::<f64>("opacity", "obs", 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_input_maps_to_e0() {
        let e = entity_embedding::<f64>("", "", 16).unwrap();
        assert_eq!(e.values()[0], 1.0);
        assert_eq!(e.values()[1..].iter().sum::<f64>(), 0.0);
        let e = entity_embedding::<f64>("a", "", 16).unwrap();
        assert_eq!(e.values()[0], 1.0);
    }

    #[test]
    fn distinct_findings_are_dissimilar() {
        let a = entity_embedding::<f64>("opacity", "", 64).unwrap();
        let b = entity_embedding::<f64>("effusion", "", 64).unwrap();
        let cos = cosine(a.values(), b.values());
        assert!(cos < 0.9);
        // value from an independent re-implementation of the trigram hashing
        assert!((cos - 0.1543033499620919).abs() < 1e-12, "{cos}");
    }

    #[test]
    fn rejects_tiny_dim() {
        assert_eq!(entity_embedding::<f64>("x", "y", 7).unwrap_err(), GraphError::EmbeddingDim(7));
    }
}
