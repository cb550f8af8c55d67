//! Machine-readable run manifest: key=value lines written next to the CSV
//! artifacts of every invocation.

use std::fmt::Write as _;
use std::path::Path;

pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: u64, seed: u64, threads: usize) -> Self {
        let mut m = Manifest {
            entries: Vec::new(),
        };
        m.put("command", command);
        m.put("version", env!("CARGO_PKG_VERSION"));
        m.put("config_hash", format!("{config_hash:016x}"));
        m.put("seed", seed.to_string());
        m.put("threads", threads.to_string());
        m
    }

    pub fn put(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn write(&self, dir: &Path, wall_ms: u128) -> std::io::Result<()> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(text, "{k}={v}");
        }
        let _ = writeln!(text, "wall_ms={wall_ms}");
        std::fs::write(dir.join("run.manifest"), text)
    }
}

/// FNV-1a hash of the raw config bytes; stable across runs and platforms.
pub fn config_hash(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
