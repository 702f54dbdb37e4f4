//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the long
//! flag names with `-` or `_` as separator; `samples` may also be written
//! `n_samples`. Unknown keys and repeated keys are rejected. Flags given on
//! the command line override the file.

use std::path::PathBuf;
use std::str::FromStr;

use crate::tasks::Mode;

/// Every setting a subcommand may read. `None` means "use the default".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub task: Option<String>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub tau: Option<f64>,
    pub mode: Option<Mode>,
    pub k: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub noise: Option<f64>,
    pub hidden: Option<usize>,
    pub batch_size: Option<usize>,
    pub momentum: Option<f64>,
    pub train_size: Option<usize>,
    pub valid_size: Option<usize>,
    pub test_size: Option<usize>,
    pub taus: Option<Vec<f64>>,
}

pub const KEYS: [&str; 19] = [
    "task",
    "n",
    "d",
    "tau",
    "mode",
    "k",
    "epochs",
    "lr",
    "samples",
    "seed",
    "out",
    "noise",
    "hidden",
    "batch_size",
    "momentum",
    "train_size",
    "valid_size",
    "test_size",
    "taus",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("invalid value {value:?} for {key}: {e}"))
}

/// Comma- or space-separated list of reals.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    let items: Vec<f64> = value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse(key, t))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("{key} needs at least one value"));
    }
    Ok(items)
}

impl RunConfig {
    /// Parses the text of a config file.
    pub fn parse_str(text: &str) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                format!("line {}: expected key = value, got {line:?}", lineno + 1)
            })?;
            let key = key.trim().replace('-', "_");
            let key = if key == "n_samples" {
                "samples".to_string()
            } else {
                key
            };
            let value = value.trim();
            if seen.contains(&key) {
                return Err(format!("line {}: duplicate key {key}", lineno + 1));
            }
            cfg.set(&key, value)
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
            seen.push(key);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse_str(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "task" => self.task = Some(value.to_string()),
            "n" => self.n = Some(parse(key, value)?),
            "d" => self.d = Some(parse(key, value)?),
            "tau" => self.tau = Some(parse(key, value)?),
            "mode" => self.mode = Some(value.parse().map_err(|e: crate::Error| e.to_string())?),
            "k" => self.k = Some(parse(key, value)?),
            "epochs" => self.epochs = Some(parse(key, value)?),
            "lr" => self.lr = Some(parse(key, value)?),
            "samples" => self.samples = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "noise" => self.noise = Some(parse(key, value)?),
            "hidden" => self.hidden = Some(parse(key, value)?),
            "batch_size" => self.batch_size = Some(parse(key, value)?),
            "momentum" => self.momentum = Some(parse(key, value)?),
            "train_size" => self.train_size = Some(parse(key, value)?),
            "valid_size" => self.valid_size = Some(parse(key, value)?),
            "test_size" => self.test_size = Some(parse(key, value)?),
            "taus" => self.taus = Some(parse_list(key, value)?),
            other => {
                return Err(format!(
                    "unknown key {other:?}; known keys: {}",
                    KEYS.join(", ")
                ))
            }
        }
        Ok(())
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overridden_by(self, over: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            task, n, d, tau, mode, k, epochs, lr, samples, seed, out, noise, hidden, batch_size,
            momentum, train_size, valid_size, test_size, taus
        )
    }

    /// Range checks that do not depend on the subcommand.
    pub fn check(&self) -> Result<(), String> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                Err(format!("{name} must be finite and > 0, got {x}"))
            }
            _ => Ok(()),
        };
        positive("tau", self.tau)?;
        positive("lr", self.lr)?;
        if let Some(taus) = &self.taus {
            taus.iter().try_for_each(|&t| positive("taus", Some(t)))?;
        }
        if let Some(m) = self.momentum {
            if !(0.0..1.0).contains(&m) {
                return Err(format!("momentum must lie in [0, 1), got {m}"));
            }
        }
        if let Some(x) = self.noise {
            if !(x.is_finite() && x >= 0.0) {
                return Err(format!("noise must be finite and ≥ 0, got {x}"));
            }
        }
        for (name, v) in [
            ("samples", self.samples),
            ("batch_size", self.batch_size),
            ("hidden", self.hidden),
        ] {
            if v == Some(0) {
                return Err(format!("{name} must be ≥ 1"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys_and_comments() {
        let cfg = RunConfig::parse_str(
            "# run\n\ntau = 0.5\nmode=stoch\nn-samples = 3\ntaus = 1, 2,4\nout = a.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.tau, Some(0.5));
        assert_eq!(cfg.mode, Some(Mode::Stochastic));
        assert_eq!(cfg.samples, Some(3));
        assert_eq!(cfg.taus, Some(vec![1.0, 2.0, 4.0]));
        assert_eq!(cfg.out, Some(PathBuf::from("a.csv")));
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(RunConfig::parse_str("colour = red")
            .unwrap_err()
            .contains("unknown key"));
        assert!(RunConfig::parse_str("n = 3\nn = 4")
            .unwrap_err()
            .contains("duplicate"));
        assert!(RunConfig::parse_str("n 3").is_err());
        assert!(RunConfig::parse_str("n = three").is_err());
        assert!(RunConfig::parse_str("mode = sinkhorn").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            tau: Some(1.0),
            n: Some(5),
            ..Default::default()
        };
        let flags = RunConfig {
            tau: Some(2.0),
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!((merged.tau, merged.n), (Some(2.0), Some(5)));
    }

    #[test]
    fn range_checks() {
        assert!(RunConfig {
            tau: Some(-1.0),
            ..Default::default()
        }
        .check()
        .is_err());
        assert!(RunConfig {
            momentum: Some(1.0),
            ..Default::default()
        }
        .check()
        .is_err());
        assert!(RunConfig {
            samples: Some(0),
            ..Default::default()
        }
        .check()
        .is_err());
        assert!(RunConfig::default().check().is_ok());
    }
}
