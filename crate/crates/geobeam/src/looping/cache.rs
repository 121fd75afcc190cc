//! Optional content-addressed cache of center-trajectory crossing scans,
//! keyed by manifold, seed, window, and tolerances. Enabled by setting the
//! GEOBEAM_CACHE_DIR environment variable.

use sha2::{Digest, Sha256};

use crate::flow::{CrossingEvent, FlowOpts};
use crate::manifold::PhasePoint;

pub const CACHE_ENV: &str = "GEOBEAM_CACHE_DIR";

pub fn cache_dir() -> Option<std::path::PathBuf> {
    std::env::var_os(CACHE_ENV).map(std::path::PathBuf::from)
}

pub fn crossing_key(
    fingerprint: &str,
    rho: &PhasePoint,
    window: (f64, f64),
    direction: i8,
    dt_scan: f64,
    opts: &FlowOpts,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(fingerprint.as_bytes());
    for v in rho.x.iter().chain(rho.xi.iter()) {
        hasher.update(v.to_le_bytes());
    }
    hasher.update(window.0.to_le_bytes());
    hasher.update(window.1.to_le_bytes());
    hasher.update([direction as u8]);
    hasher.update(dt_scan.to_le_bytes());
    hasher.update(opts.abs_tol.to_le_bytes());
    hasher.update(opts.rel_tol.to_le_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load(key: &str) -> Option<Vec<CrossingEvent>> {
    let dir = cache_dir()?;
    let path = dir.join(format!("{key}.json"));
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn store(key: &str, events: &[CrossingEvent]) {
    let Some(dir) = cache_dir() else { return };
    if std::fs::create_dir_all(&dir).is_err() {
        return;
    }
    let path = dir.join(format!("{key}.json"));
    if let Ok(text) = serde_json::to_string(events) {
        let _ = std::fs::write(path, text);
    }
}
