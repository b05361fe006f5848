//! Flat `key=value` config files with dotted sections (`model.K=4`).
//!
//! Blank lines and lines starting with `#` are ignored. Keys must come from
//! [`KNOWN_KEYS`]; anything else is a usage error, as is a repeated key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Error caused by the invocation rather than by the computation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "kernel.K",
    "kernel.dim",
    "kernel.lr",
    "kernel.max_iters",
    "kernel.grad_tol",
    "kernel.init_scale",
    "kernel.curvature",
    "invariants.suite",
    "invariants.trials",
    "invariants.radius",
    "invariants.transport",
    "appendix.K",
    "appendix.radii",
    "appendix.curvature",
    "data.source",
    "data.graphs",
    "data.nodes",
    "data.seed",
    "model.task",
    "model.K",
    "model.layers",
    "model.hidden_dim",
    "model.curvature",
    "model.kernel",
    "model.pooling",
    "model.mode",
    "model.activation",
    "train.lr",
    "train.dropout",
    "train.weight_decay",
    "train.epochs",
    "train.patience",
    "train.batch_size",
    "sweep.K",
    "sweep.seeds",
    "eval.checkpoint",
    "eval.split",
];

#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
            let key = key.trim();
            let value = unquote(value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("line {}: unknown key `{key}`", n + 1));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(format!("line {}: duplicate key `{key}`", n + 1));
            }
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| usage(format!("config key `{key}`: invalid value `{v}`: {e}")))
            })
            .transpose()
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

/// Flag value, else config value, else default.
pub fn resolve<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str, default: T) -> anyhow::Result<T>
where
    T::Err: fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

/// Flag value, else config value.
pub fn resolve_opt<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> anyhow::Result<Option<T>>
where
    T::Err: fmt::Display,
{
    Ok(match flag {
        Some(v) => Some(v),
        None => file.get(key)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_quotes() {
        let cfg = ConfigFile::parse("# run\nmodel.K = 4\n\ntrain.lr=0.01\ndata.source=\"synth\"\n").unwrap();
        assert_eq!(cfg.get::<usize>("model.K").unwrap(), Some(4));
        assert_eq!(cfg.get::<f64>("train.lr").unwrap(), Some(0.01));
        assert_eq!(cfg.get::<String>("data.source").unwrap().as_deref(), Some("synth"));
        assert_eq!(cfg.get::<usize>("model.layers").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(ConfigFile::parse("model.k=4")
            .unwrap_err()
            .contains("unknown key `model.k`"));
        assert!(ConfigFile::parse("seed=1\nseed=2").unwrap_err().contains("duplicate"));
        assert!(ConfigFile::parse("seed").unwrap_err().contains("key=value"));
    }

    #[test]
    fn flags_override_file_values() {
        let cfg = ConfigFile::parse("model.K=4").unwrap();
        assert_eq!(resolve(Some(6), &cfg, "model.K", 2).unwrap(), 6);
        assert_eq!(resolve(None, &cfg, "model.K", 2).unwrap(), 4);
        assert_eq!(resolve(None, &cfg, "model.layers", 2).unwrap(), 2);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let cfg = ConfigFile::parse("model.K=four").unwrap();
        let err = cfg.get::<usize>("model.K").unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
