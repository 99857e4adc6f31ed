//! Content-addressed store of scattering operators.
//!
//! The key hashes the obstacle, the bit pattern of `k`, the node and grid
//! counts and the provenance; the file is the checksummed container from
//! the scattering module.

use std::fs;
use std::path::{Path, PathBuf};

use phaseshift_core::scattering::container;
use phaseshift_core::{Error, Provenance, ScatteringOperator};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const CACHE_ENV: &str = "PHASESHIFT_CACHE_DIR";
const EXTENSION: &str = "psop";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub obstacle: [u8; 32],
    pub k_bits: u64,
    pub nodes: usize,
    pub grid: usize,
    pub provenance: Provenance,
}

impl CacheKey {
    pub fn new(obstacle: [u8; 32], k: f64, nodes: usize, grid: usize, provenance: Provenance) -> Self {
        Self {
            obstacle,
            k_bits: k.to_bits(),
            nodes,
            grid,
            provenance,
        }
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.obstacle);
        h.update(self.k_bits.to_le_bytes());
        h.update((self.nodes as u64).to_le_bytes());
        h.update((self.grid as u64).to_le_bytes());
        h.update([self.provenance.tag()]);
        hex::encode(h.finalize())
    }

    fn matches(&self, op: &ScatteringOperator) -> bool {
        op.obstacle_hash == self.obstacle
            && op.k.to_bits() == self.k_bits
            && op.nodes == self.nodes
            && op.grid_size() == self.grid
            && op.provenance == self.provenance
    }
}

#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheEntry {
    pub digest: String,
    pub bytes: u64,
    pub provenance: String,
    pub k: f64,
    pub grid: usize,
    pub nodes: usize,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$PHASESHIFT_CACHE_DIR`, or `.phaseshift-cache` in the working
    /// directory.
    pub fn from_env() -> Self {
        Self::new(
            std::env::var_os(CACHE_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(".phaseshift-cache")),
        )
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.{EXTENSION}", key.digest()))
    }

    pub fn store(&self, key: &CacheKey, op: &ScatteringOperator) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let path = self.path(key);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, container::encode(op)).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))
    }

    /// `Ok(None)` on a miss; a corrupted or mislabelled file is an error.
    pub fn load(&self, key: &CacheKey) -> Result<Option<ScatteringOperator>, CliError> {
        let path = self.path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(CliError::io(&path, e)),
        };
        let op = container::decode(&bytes).map_err(CliError::Core)?;
        if !key.matches(&op) {
            return Err(CliError::Core(Error::Corrupt(format!(
                "{} does not hold the operator its name promises",
                path.display()
            ))));
        }
        Ok(Some(op))
    }

    /// Cached operator for `key`, computing and storing it on a miss.
    pub fn get_or_compute<F>(&self, key: &CacheKey, compute: F) -> Result<ScatteringOperator, CliError>
    where
        F: FnOnce() -> phaseshift_core::Result<ScatteringOperator>,
    {
        if let Some(op) = self.load(key)? {
            log::debug!("cache hit {}", key.digest());
            return Ok(op);
        }
        let op = compute().map_err(CliError::Core)?;
        self.store(key, &op)?;
        Ok(op)
    }

    pub fn list(&self) -> Result<Vec<CacheEntry>, CliError> {
        let mut out = Vec::new();
        let rd = match fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(CliError::io(&self.dir, e)),
        };
        for entry in rd {
            let entry = entry.map_err(|e| CliError::io(&self.dir, e))?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            let digest = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let (provenance, k, grid, nodes) = match container::decode(&bytes) {
                Ok(op) => (op.provenance.name().to_string(), op.k, op.grid_size(), op.nodes),
                Err(_) => ("corrupt".to_string(), f64::NAN, 0, 0),
            };
            out.push(CacheEntry {
                digest,
                bytes: bytes.len() as u64,
                provenance,
                k,
                grid,
                nodes,
            });
        }
        out.sort_by(|a, b| a.digest.cmp(&b.digest));
        Ok(out)
    }

    /// Removes every cached operator; returns how many were deleted.
    pub fn clear(&self) -> Result<usize, CliError> {
        let entries = self.list()?;
        for e in &entries {
            let path = self.dir.join(format!("{}.{EXTENSION}", e.digest));
            fs::remove_file(&path).map_err(|err| CliError::io(&path, err))?;
        }
        Ok(entries.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use phaseshift_core::scattering::{default_grid_size, nystrom_smatrix};
    use phaseshift_core::ConvexObstacle;

    fn operator(nodes: usize) -> (CacheKey, ScatteringOperator) {
        let ob = ConvexObstacle::ellipse(1.5, 1.0).unwrap();
        let k = 6.0;
        let m = default_grid_size(k, ob.max_radius());
        let op = nystrom_smatrix(&ob, k, nodes, m).unwrap();
        (CacheKey::new(op.obstacle_hash, k, nodes, m, Provenance::Nystrom), op)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let (key, op) = operator(80);
        assert!(cache.load(&key).unwrap().is_none());
        cache.store(&key, &op).unwrap();
        let back = cache.load(&key).unwrap().unwrap();
        for (a, b) in op.matrix.as_slice().iter().zip(back.matrix.as_slice()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert_eq!(cache.list().unwrap().len(), 1);
        assert_eq!(cache.clear().unwrap(), 1);
        assert!(cache.list().unwrap().is_empty());
    }

    #[test]
    fn node_count_changes_the_key() {
        let (a, _) = operator(80);
        let (b, _) = operator(82);
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let (key, op) = operator(80);
        cache.store(&key, &op).unwrap();
        let path = dir.path().join(format!("{}.psop", key.digest()));
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(cache.load(&key), Err(CliError::Core(Error::Corrupt(_)))));
        // a valid container under the wrong name is rejected too
        let (other, op2) = operator(82);
        fs::write(
            dir.path().join(format!("{}.psop", key.digest())),
            container::encode(&op2),
        )
        .unwrap();
        assert!(cache.load(&key).is_err());
        let _ = other;
    }
}
