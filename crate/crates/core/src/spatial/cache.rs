//! On-disk cache of precomputed pool options.
//!
//! Pool options depend on the network, the OD pairs of the requests, `K` and
//! the delay threshold, but not on the request rates, so demand sweeps share
//! one cache entry.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{precompute_pool_options, PoolOptions, PrecomputeConfig};
use crate::demand::Request;
use crate::network::{RoadNetwork, ShortestPathTable};
use crate::{Error, Result};

/// Overrides the cache directory given in configuration.
pub const CACHE_DIR_ENV: &str = "RIDEPOOL_CACHE_DIR";

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    key: String,
    pool_options: PoolOptions,
}

/// Hex SHA-256 over the network, the request OD pairs, `K` and the delay
/// threshold.
pub fn cache_key(net: &RoadNetwork, requests: &[Request], k_max: usize, delta_bar: f64) -> String {
    let mut h = Sha256::new();
    h.update(FORMAT_VERSION.to_le_bytes());
    h.update(net.to_edge_list().as_bytes());
    h.update((requests.len() as u64).to_le_bytes());
    for r in requests {
        h.update((r.origin as u64).to_le_bytes());
        h.update((r.destination as u64).to_le_bytes());
    }
    h.update((k_max as u64).to_le_bytes());
    h.update(delta_bar.to_bits().to_le_bytes());
    hex::encode(h.finalize())
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("pool_options_{}.json", &key[..16]))
}

/// Returns cached options when a matching entry exists in `cache_dir`,
/// otherwise computes them and writes the entry. The flag reports a cache hit.
pub fn load_or_compute(
    cache_dir: Option<&Path>,
    net: &RoadNetwork,
    table: &ShortestPathTable,
    requests: &[Request],
    config: &PrecomputeConfig,
) -> Result<(PoolOptions, bool)> {
    let Some(dir) = cache_dir else {
        return Ok((precompute_pool_options(requests, table, config)?, false));
    };
    let key = cache_key(net, requests, config.k_max, config.delta_bar);
    let path = cache_path(dir, &key);
    if let Ok(text) = fs::read_to_string(&path) {
        match serde_json::from_str::<CacheFile>(&text) {
            Ok(file) if file.version == FORMAT_VERSION && file.key == key => {
                log::info!("loaded pool options from {}", path.display());
                return Ok((file.pool_options, true));
            }
            Ok(_) => log::warn!("ignoring stale cache entry {}", path.display()),
            Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", path.display()),
        }
    }
    let options = precompute_pool_options(requests, table, config)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = CacheFile {
        version: FORMAT_VERSION,
        key,
        pool_options: options,
    };
    let text = serde_json::to_string(&file)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok((file.pool_options, false))
}
