//! `key = value` service configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use lakefuse_core::align::AlignConfig;
use lakefuse_core::discovery::IndexParams;
use lakefuse_core::integrate::DEFAULT_ROW_LIMIT;

use crate::error::{Result, ServiceError};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProviderConfig {
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub key_env: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub lake_root: PathBuf,
    pub state_root: PathBuf,
    pub listen: String,
    pub seed: u64,
    pub index: IndexParams,
    pub align: AlignConfig,
    pub row_limit: usize,
    pub provider: ProviderConfig,
}

impl ServiceConfig {
    pub fn new(lake_root: impl Into<PathBuf>, state_root: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            lake_root: lake_root.into(),
            state_root: state_root.into(),
            listen: DEFAULT_LISTEN.to_string(),
            seed: DEFAULT_SEED,
            index: IndexParams {
                seed: DEFAULT_SEED,
                ..IndexParams::default()
            },
            align: AlignConfig::default(),
            row_limit: DEFAULT_ROW_LIMIT,
            provider: ProviderConfig::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::BadRequest(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = ServiceConfig::new(PathBuf::new(), PathBuf::new());
        let mut index_seed = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: String| ServiceError::Config { line, message };
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{trimmed}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |what: &str| err(format!("`{key}` expects {what}, found `{value}`"));
            let path = || {
                let p = PathBuf::from(value);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            match key {
                "lake_root" => cfg.lake_root = path(),
                "state_root" => cfg.state_root = path(),
                "listen" => cfg.listen = value.to_string(),
                "seed" => cfg.seed = value.parse().map_err(|_| num("an integer"))?,
                "index.k" | "index.num_perm" => cfg.index.num_perm = value.parse().map_err(|_| num("an integer"))?,
                "index.partitions" => cfg.index.partitions = value.parse().map_err(|_| num("an integer"))?,
                "index.threshold" => cfg.index.threshold = value.parse().map_err(|_| num("a number"))?,
                "index.seed" => index_seed = Some(value.parse().map_err(|_| num("an integer"))?),
                "index.max_rows" => cfg.index.max_rows = value.parse().map_err(|_| num("an integer"))?,
                "index.min_recall" => cfg.index.min_recall = value.parse().map_err(|_| num("a number"))?,
                "align.tau" => cfg.align.tau = value.parse().map_err(|_| num("a number"))?,
                "align.value_weight" => cfg.align.weights.value = value.parse().map_err(|_| num("a number"))?,
                "align.name_weight" => cfg.align.weights.name = value.parse().map_err(|_| num("a number"))?,
                "integrate.row_limit" => cfg.row_limit = value.parse().map_err(|_| num("an integer"))?,
                "provider.endpoint" => cfg.provider.endpoint = Some(value.to_string()),
                "provider.key_env" => cfg.provider.key_env = Some(value.to_string()),
                "provider.model" => cfg.provider.model = Some(value.to_string()),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.index.seed = index_seed.unwrap_or(cfg.seed);
        if cfg.lake_root.as_os_str().is_empty() {
            return Err(ServiceError::Config {
                line: 0,
                message: "`lake_root` is required".into(),
            });
        }
        if cfg.state_root.as_os_str().is_empty() {
            cfg.state_root = base.join("state");
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_resolves_paths() {
        let text = "# demo\nlake_root = lake\nstate_root=/tmp/s\nseed = 9\nindex.k = 64\nindex.threshold = 0.3\n\nprovider.key_env = GEN_KEY\n";
        let cfg = ServiceConfig::parse(text, Path::new("/etc/lf")).unwrap();
        assert_eq!(cfg.lake_root, PathBuf::from("/etc/lf/lake"));
        assert_eq!(cfg.state_root, PathBuf::from("/tmp/s"));
        assert_eq!(cfg.index.num_perm, 64);
        assert_eq!(cfg.index.seed, 9);
        assert_eq!(cfg.index.threshold, 0.3);
        assert_eq!(cfg.provider.key_env.as_deref(), Some("GEN_KEY"));
        assert!(cfg.provider.endpoint.is_none());
    }

    #[test]
    fn explicit_index_seed_wins() {
        let cfg = ServiceConfig::parse("lake_root=/l\nindex.seed=3\nseed=7", Path::new("/")).unwrap();
        assert_eq!((cfg.seed, cfg.index.seed), (7, 3));
    }

    #[test]
    fn rejects_bad_lines() {
        for (text, line) in [("lake_root=/l\nbogus", 2), ("lake_root=/l\nwho = 1", 2), ("index.k = x", 1)] {
            match ServiceConfig::parse(text, Path::new("/")) {
                Err(ServiceError::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(ServiceConfig::parse("seed = 1", Path::new("/")).is_err());
    }
}
