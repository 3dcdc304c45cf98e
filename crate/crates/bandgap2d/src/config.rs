//! Line-oriented `key = value` run configuration with dotted keys.
//!
//! Omitted keys fall back to documented defaults (32x32 grid, TM, band 1,
//! ε ∈ [1, 11.4], 12 path points, r_l = r_u = 0.1, tolerance 1e-4). Unknown
//! keys, type errors, and constraint violations report the key and line.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::optimizer::{InitKind, RunConfig, DEFAULT_ROD_RADIUS, DEFAULT_VEIN_THICKNESS};

/// Partially applied configuration; build with [`ConfigDraft::build`].
#[derive(Debug, Clone)]
pub struct ConfigDraft {
    cfg: RunConfig,
    init_kind: String,
    init_radius: f64,
    init_thickness: f64,
    init_file: Option<PathBuf>,
}

impl Default for ConfigDraft {
    fn default() -> Self {
        Self {
            cfg: RunConfig::default(),
            init_kind: "uniform-random".to_string(),
            init_radius: DEFAULT_ROD_RADIUS,
            init_thickness: DEFAULT_VEIN_THICKNESS,
            init_file: None,
        }
    }
}

fn config_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

impl ConfigDraft {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut draft = ConfigDraft::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(
                    line_no,
                    line,
                    "expected `key = value`".to_string(),
                ));
            };
            draft.set(key.trim(), value.trim(), line_no)?;
        }
        Ok(draft)
    }

    /// Apply one assignment; `line` is reported in errors (0 for overrides).
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| config_err(line, key, format!("`{v}` is not a nonnegative integer")))
        };
        let parse_u64 = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| config_err(line, key, format!("`{v}` is not a nonnegative integer")))
        };
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| config_err(line, key, format!("`{v}` is not a number")))
        };
        let parse_bool = |v: &str| -> Result<bool> {
            match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(config_err(line, key, format!("`{v}` is not a boolean"))),
            }
        };
        match key {
            "lattice.n" => {
                let n = parse_usize(value)?;
                if n < 2 || n % 2 != 0 {
                    return Err(config_err(line, key, "must be an even integer >= 2"));
                }
                self.cfg.n = n;
            }
            "polarization" => {
                self.cfg.polarization = value
                    .parse()
                    .map_err(|e: Error| config_err(line, key, e.to_string()))?;
            }
            "band.m" => {
                let m = parse_usize(value)?;
                if m < 1 {
                    return Err(config_err(line, key, "band index must be >= 1"));
                }
                self.cfg.band_index = m;
            }
            "material.eps_min" => {
                let v = parse_f64(value)?;
                if v <= 0.0 {
                    return Err(config_err(line, key, "must be positive"));
                }
                self.cfg.eps_min = v;
            }
            "material.eps_max" => {
                let v = parse_f64(value)?;
                if v <= 0.0 {
                    return Err(config_err(line, key, "must be positive"));
                }
                self.cfg.eps_max = v;
            }
            "kpath.n_k" => {
                let v = parse_usize(value)?;
                if v < 3 {
                    return Err(config_err(line, key, "need at least 3 path points"));
                }
                self.cfg.n_k = v;
            }
            "subspace.r_l" => {
                let v = parse_f64(value)?;
                if v <= 0.0 {
                    return Err(config_err(line, key, "window must be positive"));
                }
                self.cfg.r_l = v;
            }
            "subspace.r_u" => {
                let v = parse_f64(value)?;
                if v <= 0.0 {
                    return Err(config_err(line, key, "window must be positive"));
                }
                self.cfg.r_u = v;
            }
            "outer.tol" => {
                let v = parse_f64(value)?;
                if v <= 0.0 {
                    return Err(config_err(line, key, "tolerance must be positive"));
                }
                self.cfg.eps_tol = v;
            }
            "outer.move_limit" => {
                let v = parse_f64(value)?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(config_err(line, key, "move limit must lie in (0, 1]"));
                }
                self.cfg.move_limit = Some(v);
            }
            "outer.max_iter" => {
                let v = parse_usize(value)?;
                if v < 1 {
                    return Err(config_err(line, key, "need at least one iteration"));
                }
                self.cfg.max_outer = v;
            }
            "init.kind" => {
                match value {
                    "uniform-random" | "rods" | "veins" | "file" => {
                        self.init_kind = value.to_string();
                    }
                    other => {
                        return Err(config_err(
                            line,
                            key,
                            format!("`{other}` is not one of uniform-random | rods | veins | file"),
                        ))
                    }
                };
            }
            "init.seed" => self.cfg.seed = parse_u64(value)?,
            "init.radius" => {
                let v = parse_f64(value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(config_err(line, key, "radius must lie in [0, 1]"));
                }
                self.init_radius = v;
            }
            "init.thickness" => {
                let v = parse_f64(value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(config_err(line, key, "thickness must lie in [0, 1]"));
                }
                self.init_thickness = v;
            }
            "init.file" => self.init_file = Some(PathBuf::from(value)),
            "restarts" => {
                let v = parse_usize(value)?;
                if v < 1 {
                    return Err(config_err(line, key, "need at least one restart"));
                }
                self.cfg.restarts = v;
            }
            "solver.tol" => {
                let v = parse_f64(value)?;
                if v <= 0.0 {
                    return Err(config_err(line, key, "tolerance must be positive"));
                }
                self.cfg.solver_tol = v;
            }
            "output.dir" => self.cfg.output_dir = Some(PathBuf::from(value)),
            "output.snapshots" => self.cfg.snapshots = parse_bool(value)?,
            other => {
                return Err(config_err(line, other, "unknown key"));
            }
        }
        Ok(())
    }

    pub fn output_dir(&mut self, dir: PathBuf) {
        self.cfg.output_dir = Some(dir);
    }

    pub fn build(self) -> Result<RunConfig> {
        let mut cfg = self.cfg;
        cfg.init = match self.init_kind.as_str() {
            "uniform-random" => InitKind::UniformRandom,
            "rods" => InitKind::Rods {
                radius: self.init_radius,
            },
            "veins" => InitKind::Veins {
                thickness: self.init_thickness,
            },
            "file" => {
                let path = self
                    .init_file
                    .ok_or_else(|| config_err(0, "init.file", "required when init.kind = file"))?;
                InitKind::File(path)
            }
            _ => unreachable!("validated in set()"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse a full configuration text into a validated run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    ConfigDraft::from_text(text)?.build()
}
