//! Run configuration files, run manifests and level-set resolution.

use super::{bundled_suite, random_rooms, HarnessError, ROOMS_SEED};
use crate::net::DrcConfig;
use crate::planner::{MechanismGains, RunOptions};
use crate::sokoban::{generate_case_level, load_boxoban_dir, parse_boxoban_text, CaseKind, Level};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Everything a run depends on besides its levels.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub run: RunOptions,
    pub drc: DrcConfig,
    pub gains: MechanismGains,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            run: RunOptions::default(),
            drc: DrcConfig::default(),
            gains: MechanismGains::default(),
        }
    }
}

impl Config {
    /// Apply one `key=value` setting. Gains use their field names, the net uses `drc.*`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let bad = |e: String| HarnessError::Config(format!("{key}={value}: {e}"));
        let int = || {
            value
                .trim()
                .parse::<usize>()
                .map_err(|e| bad(e.to_string()))
        };
        match key {
            "seed" => {
                self.seed = value
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
            }
            "ticks_per_step" => self.run.ticks_per_step = int()?,
            "max_steps" => self.run.max_steps = int()?,
            "thinking_steps" => self.run.thinking_steps = int()?,
            "drc.layers" => self.drc.layers = int()?,
            "drc.ticks" => self.drc.ticks = int()?,
            "drc.channels" => self.drc.channels = int()?,
            "drc.height" => self.drc.height = int()?,
            "drc.width" => self.drc.width = int()?,
            _ => {
                let k = key.strip_prefix("gains.").unwrap_or(key);
                if !self.gains.set(k, value).map_err(bad)? {
                    return Err(HarnessError::Config(format!("unknown key {key:?}")));
                }
            }
        }
        Ok(())
    }

    /// `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Config, HarnessError> {
        let mut c = Config::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key=value", k + 1))
            })?;
            c.set(key.trim(), value.trim())?;
        }
        c.gains
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    /// Canonical text: every key in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "seed={}\nticks_per_step={}\nmax_steps={}\nthinking_steps={}\n",
            self.seed, self.run.ticks_per_step, self.run.max_steps, self.run.thinking_steps
        );
        let d = &self.drc;
        s.push_str(&format!(
            "drc.layers={}\ndrc.ticks={}\ndrc.channels={}\ndrc.height={}\ndrc.width={}\n",
            d.layers, d.ticks, d.channels, d.height, d.width
        ));
        for (k, v) in self.gains.to_pairs() {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    pub fn hash(&self) -> String {
        short_hash(self.to_text().as_bytes())
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Named levels with a content-derived identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet {
    pub name: String,
    pub levels: Vec<Level>,
}

impl LevelSet {
    pub fn new(name: &str, levels: Vec<Level>) -> LevelSet {
        LevelSet {
            name: name.to_string(),
            levels,
        }
    }

    /// `name@hash` of the level texts.
    pub fn id(&self) -> String {
        let text: String = self.levels.iter().map(|l| format!("{l}\n")).collect();
        format!("{}@{}", self.name, short_hash(text.as_bytes()))
    }
}

/// Levels named by `spec`: `suite` for the bundled suite (ahead of any path of that name),
/// `rooms:N[:SEED]` for random rooms, a case family with an optional size (`zigzag:16`), a level file, or a directory of
/// level files.
pub fn load_level_set(spec: &str) -> Result<LevelSet, HarnessError> {
    let name = spec.trim_end_matches('/');
    if name == "suite" {
        return Ok(LevelSet::new(
            "suite",
            bundled_suite().into_iter().map(|e| e.level).collect(),
        ));
    }
    if let Some(rest) = name.strip_prefix("rooms:") {
        let bad =
            || HarnessError::Config(format!("expected rooms:N or rooms:N:SEED, got {spec:?}"));
        let (n, seed) = rest
            .split_once(':')
            .map_or((rest, None), |(n, s)| (n, Some(s)));
        let n: usize = n.parse().map_err(|_| bad())?;
        let seed = seed.map_or(Ok(ROOMS_SEED), |s| s.parse().map_err(|_| bad()))?;
        if n == 0 {
            return Err(HarnessError::EmptyLevels);
        }
        return Ok(LevelSet::new(name, random_rooms(n, seed)));
    }
    let path = Path::new(spec);
    if path.is_dir() {
        return Ok(LevelSet::new(spec, load_boxoban_dir(path)?));
    }
    if path.is_file() {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{spec}: {e}")))?;
        return Ok(LevelSet::new(spec, parse_boxoban_text(&text, path)?));
    }
    let (family, size) = name
        .split_once(':')
        .map_or((name, None), |(f, s)| (f, Some(s)));
    let kind = CaseKind::from_name(family).ok_or_else(|| {
        HarnessError::Io(format!("{spec}: no such file, directory or level family"))
    })?;
    let size = match size {
        Some(s) => s
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad size in {spec:?}")))?,
        None => kind.default_size(),
    };
    let level = generate_case_level(kind, size).map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(LevelSet::new(name, vec![level]))
}

/// What produced a set of artifacts: equal manifests give byte-identical outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub level_set: String,
    pub versions: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(config: &Config, levels: &LevelSet) -> RunManifest {
        let v = env!("CARGO_PKG_VERSION").to_string();
        let versions = ["sokoban", "net", "planner", "interp", "harness"]
            .into_iter()
            .map(|m| (m.to_string(), v.clone()))
            .chain([(
                "weights_format".to_string(),
                crate::net::WEIGHTS_VERSION.to_string(),
            )])
            .collect();
        RunManifest {
            config_hash: config.hash(),
            seed: config.seed,
            level_set: levels.id(),
            versions,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "config_hash={}\nseed={}\nlevel_set={}\n",
            self.config_hash, self.seed, self.level_set
        );
        for (m, v) in &self.versions {
            s.push_str(&format!("version.{m}={v}\n"));
        }
        s
    }
}
