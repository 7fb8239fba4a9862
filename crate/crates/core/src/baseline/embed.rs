use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingProvider};
use crate::text::normalize;

pub const STUB_DIMENSION: usize = 256;

/// Hashed character-trigram embedder. Deterministic for a given seed and
/// needs no model, so every similarity it produces can be recomputed by hand.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    seed: u64,
    dimension: usize,
}

impl StubEmbedder {
    pub fn new(seed: u64) -> Self {
        Self::with_dimension(seed, STUB_DIMENSION)
    }

    pub fn with_dimension(seed: u64, dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { seed, dimension }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for StubEmbedder {
    fn name(&self) -> &str {
        "stub"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let padded: Vec<char> = format!("  {}  ", normalize(text)).chars().collect();
        let mut v = vec![0.0; self.dimension];
        let mut buf = [0u8; 12];
        for gram in padded.windows(3) {
            let mut len = 0;
            for c in gram {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let h = fnv1a(self.seed, &buf[..len]);
            let slot = (h % self.dimension as u64) as usize;
            v[slot] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Lowercase hex SHA-256 of the text; the key used in embedding cache files.
pub fn text_key(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// Vectors stored in a JSON file keyed by [`text_key`]. With an inner provider
/// misses are computed and remembered; without one a miss is an error.
pub struct CachedEmbedder {
    path: PathBuf,
    inner: Option<Box<dyn EmbeddingProvider>>,
    dimension: usize,
    vectors: Mutex<BTreeMap<String, Vec<f64>>>,
    dirty: Mutex<bool>,
}

impl CachedEmbedder {
    /// A missing file starts an empty cache when an inner provider exists.
    pub fn open(path: &Path, inner: Option<Box<dyn EmbeddingProvider>>) -> Result<Self, EmbedError> {
        let vectors: BTreeMap<String, Vec<f64>> = match std::fs::read_to_string(path) {
            Ok(text) => {
                serde_json::from_str(&text).map_err(|e| EmbedError::Cache(format!("{}: {e}", path.display())))?
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && inner.is_some() => BTreeMap::new(),
            Err(e) => return Err(EmbedError::Cache(format!("{}: {e}", path.display()))),
        };
        let dimension = match (&inner, vectors.values().next()) {
            (Some(p), _) => p.dimension(),
            (None, Some(v)) => v.len(),
            (None, None) => return Err(EmbedError::Cache(format!("{} holds no vectors", path.display()))),
        };
        if let Some((k, v)) = vectors.iter().find(|(_, v)| v.len() != dimension) {
            return Err(EmbedError::Cache(format!(
                "vector {k} has dimension {}, expected {dimension}",
                v.len()
            )));
        }
        Ok(Self {
            path: path.to_path_buf(),
            inner,
            dimension,
            vectors: Mutex::new(vectors),
            dirty: Mutex::new(false),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the cache back if anything was added.
    pub fn save(&self) -> Result<(), EmbedError> {
        let mut dirty = self.dirty.lock().expect("cache lock");
        if !*dirty {
            return Ok(());
        }
        let vectors = self.vectors.lock().expect("cache lock");
        let text = serde_json::to_string(&*vectors).expect("vectors serialize");
        std::fs::write(&self.path, text).map_err(|e| EmbedError::Cache(format!("{}: {e}", self.path.display())))?;
        *dirty = false;
        Ok(())
    }
}

impl EmbeddingProvider for CachedEmbedder {
    fn name(&self) -> &str {
        "file"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let key = text_key(text);
        if let Some(v) = self.vectors.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let Some(inner) = &self.inner else {
            return Err(EmbedError::Cache(format!("no cached vector for text {key}")));
        };
        let v = inner.embed(text)?;
        self.vectors.lock().expect("cache lock").insert(key, v.clone());
        *self.dirty.lock().expect("cache lock") = true;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_is_unit_length_and_deterministic() {
        let e = StubEmbedder::new(7);
        let a = e.embed("The octopus means no gems touch").unwrap();
        assert_eq!(a.len(), STUB_DIMENSION);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a, e.embed("The octopus means no gems touch").unwrap());
        assert_ne!(
            a,
            StubEmbedder::new(8).embed("The octopus means no gems touch").unwrap()
        );
        assert!(e.embed("").unwrap().iter().any(|x| *x != 0.0));
    }

    #[test]
    fn sha256_key_matches_known_digest() {
        assert_eq!(
            text_key("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn cache_fills_through_and_reloads() {
        let dir = std::env::temp_dir().join(format!("embed-cache-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cache.json");
        let _ = std::fs::remove_file(&path);

        let cache = CachedEmbedder::open(&path, Some(Box::new(StubEmbedder::new(1)))).unwrap();
        let v = cache.embed("hex means no red gems").unwrap();
        cache.save().unwrap();

        let offline = CachedEmbedder::open(&path, None).unwrap();
        assert_eq!(offline.dimension(), STUB_DIMENSION);
        assert_eq!(offline.embed("hex means no red gems").unwrap(), v);
        assert!(matches!(offline.embed("unseen"), Err(EmbedError::Cache(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_cache_without_inner_is_an_error() {
        assert!(CachedEmbedder::open(Path::new("/nonexistent/cache.json"), None).is_err());
    }
}
