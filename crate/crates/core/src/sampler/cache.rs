//! Sidecar cache for pre-sampled probabilities.
//!
//! Layout (little endian): magic `DFCO`, u32 version, 32-byte key, u64
//! rounds, then for the news and user layers: u64 node count, u64 arc count,
//! node probabilities (f64), arc probabilities (f64), one byte per arc for
//! the co-sampled flag.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{estimate_probabilities, LayerProbabilities, SamplerConfig, SamplingProbabilities};
use crate::error::{Error, Result};
use crate::graph::DualLayerGraph;

const MAGIC: [u8; 4] = *b"DFCO";
const VERSION: u32 = 1;

/// Identifies a pre-sampling run: graph structure plus every sampler setting
/// that changes the estimate.
pub fn cache_key(graph: &DualLayerGraph, config: &SamplerConfig) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(graph.structure_digest());
    for v in [
        config.roots as u64,
        config.depth as u64,
        config.presample_rounds as u64,
        config.seed,
    ] {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

fn put_layer(out: &mut Vec<u8>, p: &LayerProbabilities) {
    out.extend_from_slice(&(p.node.len() as u64).to_le_bytes());
    out.extend_from_slice(&(p.arc.len() as u64).to_le_bytes());
    for x in p.node.iter().chain(&p.arc) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend(p.arc_seen.iter().map(|&s| s as u8));
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.bytes.len() < n {
            return None;
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Some(head)
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        let raw = self.take(n.checked_mul(8)?)?;
        Some(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn layer(&mut self, rounds: usize) -> Option<LayerProbabilities> {
        let n = usize::try_from(self.u64()?).ok()?;
        let arcs = usize::try_from(self.u64()?).ok()?;
        let node = self.f64s(n)?;
        let arc = self.f64s(arcs)?;
        let arc_seen = self.take(arcs)?.iter().map(|&b| b != 0).collect();
        Some(LayerProbabilities {
            node,
            arc,
            arc_seen,
            rounds,
        })
    }
}

pub fn write_cache(path: &Path, key: &[u8; 32], probs: &SamplingProbabilities) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(key);
    out.extend_from_slice(&(probs.rounds as u64).to_le_bytes());
    put_layer(&mut out, &probs.news);
    put_layer(&mut out, &probs.users);
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a cache file. Returns `Ok(None)` when the file was written for a
/// different key, and an error when it is not a cache file at all.
pub fn read_cache(path: &Path, key: &[u8; 32]) -> Result<Option<SamplingProbabilities>> {
    let bytes = std::fs::read(path)?;
    let bad = |message: &str| Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let mut r = Reader { bytes: &bytes };
    if r.take(4) != Some(&MAGIC[..]) {
        return Err(bad("not a probability cache"));
    }
    let version = r.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()));
    if version != Some(VERSION) {
        return Err(bad("unsupported cache version"));
    }
    if r.take(32) != Some(&key[..]) {
        return Ok(None);
    }
    let parsed = (|| {
        let rounds = usize::try_from(r.u64()?).ok()?;
        let news = r.layer(rounds)?;
        let users = r.layer(rounds)?;
        r.bytes.is_empty().then_some(SamplingProbabilities { news, users, rounds })
    })();
    parsed.map(Some).ok_or_else(|| bad("truncated or oversized cache"))
}

/// Uses the cache at `path` when its key matches, otherwise estimates and
/// (re)writes it.
pub fn load_or_estimate(graph: &DualLayerGraph, config: &SamplerConfig, path: &Path) -> Result<SamplingProbabilities> {
    let key = cache_key(graph, config);
    if path.exists() {
        if let Some(p) = read_cache(path, &key)? {
            log::info!("reusing pre-sampled probabilities from {}", path.display());
            return Ok(p);
        }
        log::info!("probability cache {} is stale; re-estimating", path.display());
    }
    let probs = estimate_probabilities(graph, config)?;
    write_cache(path, &key, &probs)?;
    Ok(probs)
}
