//! On-disk cache of assembled Nyström operators.
//!
//! File layout (little endian): magic `CAVSHOP\0`, format version `u32`,
//! node count `u64`, then the payload (`omega`, `k`, `sqrt_w`, both area
//! potential vectors, the `n x n` matrix column-major), then the SHA-256 of
//! the payload. A file that fails any check is reassembled and rewritten.

use anyhow::{bail, Result};
use cavishift::cavity_spectrum::{assemble_k, CavityConfig, DiscreteOperator};
use cavishift::geometry::{shape_hash, VolumeQuadrature};
use cavishift::linalg::CMat;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

const MAGIC: &[u8; 8] = b"CAVSHOP\0";
pub const FORMAT_VERSION: u32 = 1;

/// Environment variable that overrides the cache directory.
pub const CACHE_ENV: &str = "CAVISHIFT_CACHE_DIR";

#[derive(Debug, Default)]
pub struct CacheStats {
    pub hits: AtomicUsize,
    pub misses: AtomicUsize,
    pub rejected: AtomicUsize,
}

pub struct OperatorCache {
    dir: PathBuf,
    pub stats: CacheStats,
}

fn read_f64s(bytes: &[u8], count: usize, pos: &mut usize) -> Option<Vec<f64>> {
    let end = *pos + 8 * count;
    let slice = bytes.get(*pos..end)?;
    *pos = end;
    Some(
        slice
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    )
}

fn push_c(buf: &mut Vec<u8>, v: Complex64) {
    buf.extend_from_slice(&v.re.to_le_bytes());
    buf.extend_from_slice(&v.im.to_le_bytes());
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Key over everything the operator depends on.
pub fn cache_key(cavity: &CavityConfig, quad: &VolumeQuadrature, omega: Complex64) -> String {
    let bits = |v: f64| format!("{:016x}", v.to_bits());
    let text = format!(
        "v{FORMAT_VERSION};{};r{}x{};eps_m={};mu_m={};omega={},{}",
        shape_hash(&cavity.shape, quad.radial),
        quad.radial,
        quad.angular,
        bits(cavity.eps_m),
        bits(cavity.mu_m),
        bits(omega.re),
        bits(omega.im)
    );
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode(op: &DiscreteOperator) -> Vec<u8> {
    let n = op.n();
    let mut payload = Vec::with_capacity(16 * n * n + 48 * n + 32);
    push_c(&mut payload, op.omega);
    push_c(&mut payload, op.k);
    for v in &op.sqrt_w {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    for v in op.area_potential.iter().chain(&op.area_potential_dk) {
        push_c(&mut payload, *v);
    }
    for j in 0..n {
        for i in 0..n {
            push_c(&mut payload, op.matrix[(i, j)]);
        }
    }
    let mut out = Vec::with_capacity(payload.len() + 52);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    out
}

pub fn decode(bytes: &[u8]) -> Result<DiscreteOperator> {
    if bytes.len() < 20 + 32 || &bytes[..8] != MAGIC {
        bail!("not an operator cache file");
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into()?);
    if version != FORMAT_VERSION {
        bail!("cache format version {version}, expected {FORMAT_VERSION}");
    }
    let n = u64::from_le_bytes(bytes[12..20].try_into()?) as usize;
    let payload_len = 8 * (4 + n + 4 * n + 2 * n * n);
    if bytes.len() != 20 + payload_len + 32 {
        bail!("cache file has the wrong length");
    }
    let payload = &bytes[20..20 + payload_len];
    if Sha256::digest(payload).as_slice() != &bytes[20 + payload_len..] {
        bail!("cache checksum mismatch");
    }
    let mut pos = 0;
    let head = to_complex(&read_f64s(payload, 4, &mut pos).expect("length checked"));
    let sqrt_w = read_f64s(payload, n, &mut pos).expect("length checked");
    let pots = to_complex(&read_f64s(payload, 4 * n, &mut pos).expect("length checked"));
    let m = to_complex(&read_f64s(payload, 2 * n * n, &mut pos).expect("length checked"));
    Ok(DiscreteOperator {
        matrix: CMat::from_fn(n, n, |i, j| m[j * n + i]),
        sqrt_w,
        omega: head[0],
        k: head[1],
        area_potential: pots[..n].to_vec(),
        area_potential_dk: pots[n..].to_vec(),
    })
}

impl OperatorCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(OperatorCache {
            dir,
            stats: CacheStats::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.op"))
    }

    /// Cached operator, or a fresh assembly that is then stored. Corrupt,
    /// truncated or mismatched files are never used.
    pub fn operator(
        &self,
        cavity: &CavityConfig,
        quad: &VolumeQuadrature,
        omega: Complex64,
    ) -> cavishift::cavity_spectrum::Result<DiscreteOperator> {
        let path = self.path(&cache_key(cavity, quad, omega));
        if let Ok(bytes) = std::fs::read(&path) {
            match decode(&bytes) {
                Ok(op) if op.n() == quad.len() && op.omega == omega => {
                    self.stats.hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(op);
                }
                _ => {
                    self.stats.rejected.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
        self.stats.misses.fetch_add(1, Ordering::Relaxed);
        let op = assemble_k(cavity, quad, omega)?;
        // write to a temporary name first so readers never see partial files
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        if std::fs::write(&tmp, encode(&op)).is_ok() {
            let _ = std::fs::rename(&tmp, &path);
        }
        Ok(op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cavishift::geometry::{build_volume_quadrature, Shape2D};

    fn setup() -> (CavityConfig, VolumeQuadrature, Complex64) {
        let cav = CavityConfig::new(Shape2D::disk(1.0), 1.0, 1.0, 1.0, 10.0);
        let q = build_volume_quadrature(&cav.shape, 8).unwrap();
        (cav, q, Complex64::new(0.6, -0.05))
    }

    #[test]
    fn round_trip_is_exact() {
        let (cav, q, w) = setup();
        let op = assemble_k(&cav, &q, w).unwrap();
        let back = decode(&encode(&op)).unwrap();
        assert_eq!(back.matrix, op.matrix);
        assert_eq!(back.sqrt_w, op.sqrt_w);
        assert_eq!(back.area_potential_dk, op.area_potential_dk);
        assert_eq!((back.omega, back.k), (op.omega, op.k));
    }

    #[test]
    fn corruption_triggers_reassembly() {
        let dir = tempfile::tempdir().unwrap();
        let cache = OperatorCache::new(dir.path()).unwrap();
        let (cav, q, w) = setup();
        let a = cache.operator(&cav, &q, w).unwrap();
        let b = cache.operator(&cav, &q, w).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(cache.stats.hits.load(Ordering::Relaxed), 1);
        let path = cache.path(&cache_key(&cav, &q, w));
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        assert!(decode(&bytes).is_err());
        let c = cache.operator(&cav, &q, w).unwrap();
        assert_eq!(c.matrix, a.matrix);
        assert_eq!(cache.stats.rejected.load(Ordering::Relaxed), 1);
        // the rewritten file is valid again
        assert!(decode(&std::fs::read(&path).unwrap()).is_ok());
    }

    #[test]
    fn key_separates_inputs() {
        let (cav, q, w) = setup();
        let q2 = build_volume_quadrature(&cav.shape, 10).unwrap();
        assert_ne!(cache_key(&cav, &q, w), cache_key(&cav, &q2, w));
        assert_ne!(cache_key(&cav, &q, w), cache_key(&cav, &q, w + 1e-15));
        assert_eq!(cache_key(&cav, &q, w), cache_key(&cav, &q, w));
    }
}
