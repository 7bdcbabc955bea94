//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use kcmlab_core::{Family, Geometry, KcmError, ModelSpec, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Keys accepted in config files and as flags.
pub const KEYS: &[&str] = &[
    "task",
    "variant",
    "model",
    "range",
    "couplings",
    "sites",
    "particles",
    "seed_state",
    "sector",
    "rng_seed",
    "seeds",
    "out",
    "tolerance_kernel",
    "times",
    "epsilon",
    "g",
    "observe",
    "initial",
    "q_max",
    "samples",
    "max_dim",
    "cut",
    "delta",
    "heavy",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                KcmError::Parse(format!("line {}: expected key = value", n + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(KcmError::Parse(format!("unknown config key `{key}`")));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| KcmError::Parse(format!("bad value `{v}` for `{key}`")))
            })
            .transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn usize_req(&self, key: &str) -> Result<usize> {
        self.parsed(key)?
            .ok_or_else(|| KcmError::Domain(format!("missing required `{key}`")))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|_| KcmError::Parse(format!("bad entry `{s}` in `{key}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or("."))
    }

    /// Sorted `key=value` lines; the `out` directory is excluded so a run
    /// reproduces its hash wherever it writes.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .filter(|(k, _)| k.as_str() != "out")
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `L` for chains, `LXxLY` for rectangles.
    /// Falls back to the shape of `seed_state` when `sites` is absent.
    pub fn geometry(&self) -> Result<Geometry> {
        let inferred;
        let sites = match (self.get("sites"), self.get("seed_state")) {
            (Some(s), _) => s,
            (None, Some(seed)) => {
                let rows: Vec<&str> = seed.trim().split('/').collect();
                inferred = if rows.len() > 1 {
                    format!("{}x{}", rows[0].len(), rows.len())
                } else {
                    rows[0].len().to_string()
                };
                &inferred
            }
            (None, None) => return Err(KcmError::Domain("missing required `sites`".into())),
        };
        match sites.split_once('x') {
            Some((a, b)) => {
                let lx = a.trim().parse().map_err(|_| KcmError::Parse(format!("bad sites `{sites}`")))?;
                let ly = b.trim().parse().map_err(|_| KcmError::Parse(format!("bad sites `{sites}`")))?;
                Geometry::rectangle(lx, ly)
            }
            None => Geometry::chain(
                sites.trim().parse().map_err(|_| KcmError::Parse(format!("bad sites `{sites}`")))?,
            ),
        }
    }

    pub fn family(&self) -> Result<Family> {
        self.get("model").unwrap_or("east").parse()
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let family = self.family()?;
        let geometry = self.geometry()?;
        let range = self.usize_or("range", if family == Family::NorthEast { 1 } else { 2 })?;
        let mut spec = match (family, geometry) {
            (Family::NorthEast, Geometry::Rectangle { lx, ly }) => ModelSpec::north_east(lx, ly)?,
            (Family::NorthEast, _) => {
                return Err(KcmError::GeometryMismatch("north-east needs sites = LXxLY".into()))
            }
            (_, Geometry::Chain { sites }) => ModelSpec::chain(family, range, sites)?,
            (f, g) => {
                return Err(KcmError::GeometryMismatch(format!("{} is defined on chains, not {g}", f.name())))
            }
        };
        if let Some(c) = self.list::<f64>("couplings")? {
            spec = spec.with_couplings(c)?;
        }
        Ok(spec)
    }

    /// `t_max:dt`, default `40:0.05`.
    pub fn times(&self) -> Result<Vec<f64>> {
        let (t_max, dt) = match self.get("times") {
            None => (40.0, 0.05),
            Some(v) => {
                let (a, b) = v
                    .split_once(':')
                    .ok_or_else(|| KcmError::Parse(format!("times must be t_max:dt, got `{v}`")))?;
                let p = |s: &str| {
                    s.trim().parse::<f64>().map_err(|_| KcmError::Parse(format!("bad times `{v}`")))
                };
                (p(a)?, p(b)?)
            }
        };
        kcmlab_core::dynamics::time_grid(t_max, dt)
    }
}
