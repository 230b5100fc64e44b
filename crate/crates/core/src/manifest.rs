//! Reproducibility record attached to every CLI artifact.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: u64,
    pub wall_seconds: f64,
}

/// Started when created; [`ManifestClock::finish`] stamps the elapsed time.
pub struct ManifestClock {
    start: Instant,
    manifest: RunManifest,
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value, seed: Option<u64>) -> ManifestClock {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        ManifestClock {
            start: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                config,
                seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                started_unix,
                wall_seconds: 0.0,
            },
        }
    }
}

impl ManifestClock {
    pub fn finish(mut self) -> RunManifest {
        self.manifest.wall_seconds = self.start.elapsed().as_secs_f64();
        self.manifest
    }
}
