//! Line-based `key = value` run configuration with `[section]` headers.
//! Command-line flags are merged on top of file values.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Parsed config text: section -> key -> value. BTreeMap keeps header
/// emission deterministic.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::from("general");
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(Error::Config(format!(
                        "line {lineno}: malformed section header `{line}`"
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {lineno}: expected `key = value`, got `{line}`"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {lineno}: empty key")));
            }
            cfg.set(&section, key, value);
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| {
                Error::Config(format!("[{section}] {key}: `{s}` is not a number"))
            }),
        }
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| {
                Error::Config(format!("[{section}] {key}: `{s}` is not an integer"))
            }),
        }
    }

    /// Flattened `section.key = value` lines for the CSV header comment.
    pub fn header_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (section, entries) in &self.sections {
            for (key, value) in entries {
                // output paths are environment specific and would break
                // byte-identical output across runs
                if section == "output" && (key == "csv" || key == "svg") {
                    continue;
                }
                out.push(format!("{section}.{key} = {value}"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone)]
pub struct GridBlock {
    pub tmin: f64,
    pub tmax: f64,
    pub points: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone)]
pub struct DensityBlock {
    pub kind: String,
    pub e0: f64,
    pub gamma0: f64,
    pub emin: f64,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct ModelBlock {
    pub file: Option<PathBuf>,
    pub eta: Option<f64>,
    pub group_tol: Option<f64>,
    pub state: usize,
}

#[derive(Debug, Clone)]
pub struct OutputBlock {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub precision: usize,
}

/// Fully resolved run configuration: file values with defaults filled in
/// and flag overrides already applied via `RawConfig::set`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub density: DensityBlock,
    pub grid: Option<GridBlock>,
    pub model: ModelBlock,
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn resolve(raw: RawConfig) -> Result<Self> {
        let density = DensityBlock {
            kind: raw
                .get("density", "kind")
                .unwrap_or("breit-wigner")
                .to_string(),
            e0: raw.get_f64("density", "e0")?.unwrap_or(25.0),
            gamma0: raw.get_f64("density", "gamma0")?.unwrap_or(1.0),
            emin: raw.get_f64("density", "emin")?.unwrap_or(0.0),
            scale: raw.get_f64("density", "scale")?.unwrap_or(1.0),
        };
        if !matches!(density.kind.as_str(), "breit-wigner" | "linear-onset") {
            return Err(Error::Config(format!(
                "[density] kind: unknown density `{}`",
                density.kind
            )));
        }
        let grid = match (
            raw.get_f64("grid", "tmin")?,
            raw.get_f64("grid", "tmax")?,
        ) {
            (Some(tmin), Some(tmax)) => {
                let points = raw.get_usize("grid", "points")?.unwrap_or(200);
                let spacing = match raw.get("grid", "spacing").unwrap_or("linear") {
                    "linear" => Spacing::Linear,
                    "log" => Spacing::Log,
                    other => {
                        return Err(Error::Config(format!(
                            "[grid] spacing: `{other}` is not linear|log"
                        )))
                    }
                };
                if !(tmin < tmax) || points < 2 {
                    return Err(Error::Config(
                        "[grid] needs tmin < tmax and points >= 2".into(),
                    ));
                }
                if spacing == Spacing::Log && tmin <= 0.0 {
                    return Err(Error::Config("[grid] log spacing needs tmin > 0".into()));
                }
                Some(GridBlock { tmin, tmax, points, spacing })
            }
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "[grid] tmin and tmax must be given together".into(),
                ))
            }
        };
        let model = ModelBlock {
            file: raw.get("model", "file").map(PathBuf::from),
            eta: raw.get_f64("model", "eta")?,
            group_tol: raw.get_f64("model", "group_tol")?,
            state: raw.get_usize("model", "state")?.unwrap_or(0),
        };
        let precision = raw.get_usize("output", "precision")?.unwrap_or(12);
        if !(6..=17).contains(&precision) {
            return Err(Error::Config(format!(
                "[output] precision: {precision} outside [6, 17]"
            )));
        }
        let output = OutputBlock {
            csv: raw.get("output", "csv").map(PathBuf::from),
            svg: raw.get("output", "svg").map(PathBuf::from),
            precision,
        };
        Ok(Self { raw, density, grid, model, output })
    }
}
