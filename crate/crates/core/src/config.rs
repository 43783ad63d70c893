//! Flat `key = value` configuration files.
//!
//! Lines starting with `#` and blank lines are ignored; a `#` after a value
//! starts a trailing comment. Keys are unique.

use crate::error::{Error, Result};
use crate::frontend::{CorpusSpec, EnhanceMode, FrontendConfig};
use crate::training::TrainConfig;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

pub const CORPUS_KEYS: &[&str] = &[
    "n_utterances",
    "duration_s",
    "snr_low_db",
    "snr_high_db",
    "sample_rate",
    "seed",
];

pub const FRONTEND_KEYS: &[&str] = &["frame_len", "hop", "dim", "window"];

pub const ENHANCE_KEYS: &[&str] = &["enhance_mode", "enhance_strength"];

pub const TRAIN_KEYS: &[&str] = &[
    "stages",
    "codebook_size",
    "beta",
    "ema_decay",
    "p_enh",
    "delay_steps",
    "kmeans_iters",
    "reseed_threshold",
    "reseed_interval",
    "dropout_levels",
    "steps",
    "batch_frames",
    "init_max_frames",
    "zero_augment",
    "seed",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", no + 1)))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: bad key '{key}'", no + 1)));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    no + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key} = {v}: {e}")))
            })
            .transpose()
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Fails on the first key not present in any of `allowed`.
    pub fn check_keys(&self, allowed: &[&[&str]]) -> Result<()> {
        match self
            .entries
            .keys()
            .find(|k| !allowed.iter().any(|set| set.contains(&k.as_str())))
        {
            Some(k) => Err(Error::Config(format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }

    /// Sorted `key = value` lines.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn read<T: FromStr>(kv: &KvConfig, key: &str, slot: &mut T) -> Result<()>
where
    T::Err: Display,
{
    if let Some(v) = kv.get(key)? {
        *slot = v;
    }
    Ok(())
}

impl CorpusSpec {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let mut spec = Self::default();
        read(kv, "n_utterances", &mut spec.n_utterances)?;
        read(kv, "duration_s", &mut spec.duration_s)?;
        read(kv, "snr_low_db", &mut spec.snr_low_db)?;
        read(kv, "snr_high_db", &mut spec.snr_high_db)?;
        read(kv, "sample_rate", &mut spec.sample_rate)?;
        read(kv, "seed", &mut spec.seed)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn write_kv(&self, kv: &mut KvConfig) {
        kv.set("n_utterances", self.n_utterances);
        kv.set("duration_s", self.duration_s);
        kv.set("snr_low_db", self.snr_low_db);
        kv.set("snr_high_db", self.snr_high_db);
        kv.set("sample_rate", self.sample_rate);
        kv.set("seed", self.seed);
    }
}

impl FrontendConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let mut cfg = Self::default();
        read(kv, "frame_len", &mut cfg.frame_len)?;
        read(kv, "hop", &mut cfg.hop)?;
        read(kv, "dim", &mut cfg.dim)?;
        read(kv, "window", &mut cfg.window)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write_kv(&self, kv: &mut KvConfig) {
        kv.set("frame_len", self.frame_len);
        kv.set("hop", self.hop);
        kv.set("dim", self.dim);
        kv.set("window", self.window);
    }
}

/// Simulated enhancer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceConfig {
    pub mode: EnhanceMode,
    pub strength: f64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            mode: EnhanceMode::OracleWiener,
            strength: 1.0,
        }
    }
}

impl EnhanceConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let mut cfg = Self::default();
        read(kv, "enhance_mode", &mut cfg.mode)?;
        read(kv, "enhance_strength", &mut cfg.strength)?;
        Ok(cfg)
    }

    pub fn write_kv(&self, kv: &mut KvConfig) {
        kv.set("enhance_mode", self.mode);
        kv.set("enhance_strength", self.strength);
    }
}

impl TrainConfig {
    /// Starts from the desk-scale defaults for the configured geometry.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let defaults = Self::default();
        let stages = kv.get("stages")?.unwrap_or(defaults.stages);
        let size = kv.get("codebook_size")?.unwrap_or(defaults.codebook_size);
        let mut cfg = Self::with_geometry(stages, size);
        read(kv, "beta", &mut cfg.beta)?;
        read(kv, "ema_decay", &mut cfg.ema_decay)?;
        read(kv, "p_enh", &mut cfg.p_enh)?;
        read(kv, "delay_steps", &mut cfg.delay_steps)?;
        read(kv, "kmeans_iters", &mut cfg.kmeans_iters)?;
        read(kv, "reseed_threshold", &mut cfg.reseed_threshold)?;
        read(kv, "reseed_interval", &mut cfg.reseed_interval)?;
        if let Some(levels) = kv.get_str("dropout_levels") {
            cfg.dropout_levels = levels
                .split(',')
                .map(|l| {
                    l.trim()
                        .parse()
                        .map_err(|e| Error::Config(format!("dropout_levels = {levels}: {e}")))
                })
                .collect::<Result<_>>()?;
        }
        read(kv, "steps", &mut cfg.steps)?;
        read(kv, "batch_frames", &mut cfg.batch_frames)?;
        read(kv, "init_max_frames", &mut cfg.init_max_frames)?;
        read(kv, "zero_augment", &mut cfg.zero_augment)?;
        read(kv, "seed", &mut cfg.seed)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write_kv(&self, kv: &mut KvConfig) {
        kv.set("stages", self.stages);
        kv.set("codebook_size", self.codebook_size);
        kv.set("beta", self.beta);
        kv.set("ema_decay", self.ema_decay);
        kv.set("p_enh", self.p_enh);
        kv.set("delay_steps", self.delay_steps);
        kv.set("kmeans_iters", self.kmeans_iters);
        kv.set("reseed_threshold", self.reseed_threshold);
        kv.set("reseed_interval", self.reseed_interval);
        let levels: Vec<String> = self.dropout_levels.iter().map(usize::to_string).collect();
        kv.set("dropout_levels", levels.join(","));
        kv.set("steps", self.steps);
        kv.set("batch_frames", self.batch_frames);
        kv.set("init_max_frames", self.init_max_frames);
        kv.set("zero_augment", self.zero_augment);
        kv.set("seed", self.seed);
    }
}
