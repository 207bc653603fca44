//! Run configuration: one TOML file with sections `group`, `cover`, `budgets`, `samples`,
//! `tolerances`, `mollifier` and `output`.
//!
//! Every section except `samples.seed` has defaults. Unknown keys are rejected. Errors name the
//! line of the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::census::{MAX_CENSUS_COVER, MAX_CENSUS_WORD_LEN};
use crate::error::{LabError, Result};
use crate::flow::mollifier::check_resolution;
use crate::group::MAX_ENUMERATION_LEN;

/// The only environment override: the output directory.
pub const OUT_DIR_ENV: &str = "ANOSOV_LAB_OUT";

/// Upper limit for any single sample count.
pub const MAX_SAMPLES: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupSection {
    pub preset: String,
}

impl Default for GroupSection {
    fn default() -> Self {
        Self {
            preset: "genus2-octagon".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverSection {
    pub k: u32,
}

impl Default for CoverSection {
    fn default() -> Self {
        Self { k: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub census_word_len: usize,
    pub periodic_word_len: usize,
    pub rn_word_len: usize,
    /// Segments of the holonomy sweep have `t ∈ [holonomy_t_min, 0)`.
    pub holonomy_t_min: f64,
    pub separation_epsilon: f64,
    /// Initial gaps `ε/2, ε/4, ...`, this many.
    pub separation_levels: usize,
    pub separation_dt: f64,
    pub separation_t_limit: f64,
    pub first_return_radius: f64,
    pub first_return_iterates: usize,
    pub quasigeodesic_time: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            census_word_len: 4,
            periodic_word_len: 3,
            rn_word_len: 4,
            holonomy_t_min: -20.0,
            separation_epsilon: 0.25,
            separation_levels: 4,
            separation_dt: 0.05,
            separation_t_limit: 30.0,
            first_return_radius: 0.05,
            first_return_iterates: 6,
            quasigeodesic_time: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Samples {
    pub seed: Option<u64>,
    pub busemann: usize,
    pub rn: usize,
    pub holonomy_segments: usize,
    pub asymptotic_pairs: usize,
    /// Pairs per separation level.
    pub separation_pairs: usize,
    pub cone_fit: usize,
    pub cone_points: usize,
    pub quasigeodesic_leaves: usize,
    pub quasigeodesic_batches: usize,
    pub c1_points: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Self {
            seed: None,
            busemann: 10_000,
            rn: 1_000,
            holonomy_segments: 1_000,
            asymptotic_pairs: 100,
            separation_pairs: 250,
            cone_fit: 48,
            cone_points: 1_000,
            quasigeodesic_leaves: 100,
            quasigeodesic_batches: 2,
            c1_points: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub busemann: f64,
    pub rn_relative: f64,
    pub periodic_relative: f64,
    pub holonomy_bound: f64,
    pub holonomy_slope: f64,
    pub asymptotic_exponent: f64,
    pub mollifier_exact: f64,
    pub mollifier_ratio: f64,
    pub cone_growth: f64,
    /// Largest relative spread of the fellow-traveling constant across leaf batches.
    pub quasigeodesic_spread: f64,
    /// Largest ratio of the leafwise C¹ distance to the hyperbolicity margin.
    pub c1_fraction: f64,
    pub census: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            busemann: 1e-9,
            rn_relative: 1e-5,
            periodic_relative: 1e-6,
            holonomy_bound: 1e-6,
            holonomy_slope: 0.05,
            asymptotic_exponent: 0.9,
            mollifier_exact: 1e-12,
            mollifier_ratio: 0.2,
            cone_growth: 0.5,
            quasigeodesic_spread: 0.1,
            c1_fraction: 0.1,
            census: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MollifierSection {
    pub scale: u32,
    pub nr: usize,
    pub ny: usize,
    pub r_out: f64,
    pub step: f64,
}

impl Default for MollifierSection {
    fn default() -> Self {
        Self {
            scale: 128,
            nr: 128,
            ny: 2048,
            r_out: 1.6,
            step: crate::flow::psi::DEFAULT_STEP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub group: GroupSection,
    pub cover: CoverSection,
    pub budgets: Budgets,
    pub samples: Samples,
    pub tolerances: Tolerances,
    pub mollifier: MollifierSection,
    pub output: OutputSection,
}

/// 1-based line of `key = ...` inside `[section]`, if present in `src`.
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Validator<'a> {
    src: Option<&'a str>,
}

impl Validator<'_> {
    fn fail(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> LabError {
        match self.src.and_then(|s| locate(s, section, key)) {
            Some(line) => LabError::Config(format!("line {line}: {section}.{key}: {msg}")),
            None => LabError::Config(format!("{section}.{key}: {msg}")),
        }
    }

    fn range<T: PartialOrd + std::fmt::Display>(
        &self,
        section: &str,
        key: &str,
        v: T,
        lo: T,
        hi: T,
    ) -> Result<()> {
        if v < lo || v > hi {
            return Err(self.fail(section, key, format!("{v} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn nonnegative(&self, section: &str, key: &str, v: f64) -> Result<()> {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(self.fail(
                section,
                key,
                format!("{v} is not a finite nonnegative number"),
            ));
        }
        Ok(())
    }
}

impl RunConfig {
    /// Parses and validates a config file.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.check(Some(src), true)?;
        Ok(cfg)
    }

    /// Parses `src` (all defaults when absent), applies `overrides`, then validates. The seed
    /// is only required when `require_seed` is set.
    pub fn from_parts(
        src: Option<&str>,
        require_seed: bool,
        overrides: impl FnOnce(&mut RunConfig),
    ) -> Result<Self> {
        let mut cfg: RunConfig = match src {
            Some(src) => toml::from_str(src).map_err(|e| LabError::Config(e.to_string()))?,
            None => RunConfig::default(),
        };
        overrides(&mut cfg);
        cfg.check(src, require_seed)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::from_toml_str(&src).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> Result<u64> {
        self.samples
            .seed
            .ok_or_else(|| LabError::Config("samples.seed is required".into()))
    }

    /// Output directory, honoring the environment override.
    pub fn out_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output.dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check(None, true)
    }

    fn check(&self, src: Option<&str>, require_seed: bool) -> Result<()> {
        let v = Validator { src };
        crate::group::SurfaceGroup::from_preset(&self.group.preset)
            .map_err(|e| v.fail("group", "preset", e))?;
        v.range("cover", "k", self.cover.k, 1, MAX_CENSUS_COVER)?;
        if require_seed && self.samples.seed.is_none() {
            return Err(match src {
                Some(_) => LabError::Config(
                    "samples.seed is required (add `seed = <integer>` under [samples])".into(),
                ),
                None => LabError::Config("samples.seed is required".into()),
            });
        }
        let b = &self.budgets;
        v.range(
            "budgets",
            "census_word_len",
            b.census_word_len,
            0,
            MAX_CENSUS_WORD_LEN,
        )?;
        v.range(
            "budgets",
            "periodic_word_len",
            b.periodic_word_len,
            0,
            MAX_CENSUS_WORD_LEN,
        )?;
        v.range(
            "budgets",
            "rn_word_len",
            b.rn_word_len,
            0,
            MAX_ENUMERATION_LEN,
        )?;
        v.range(
            "budgets",
            "holonomy_t_min",
            b.holonomy_t_min,
            -crate::flow::MAX_FLOW_TIME,
            -1e-3,
        )?;
        v.range(
            "budgets",
            "separation_epsilon",
            b.separation_epsilon,
            1e-3,
            0.49,
        )?;
        v.range("budgets", "separation_levels", b.separation_levels, 1, 12)?;
        v.range("budgets", "separation_dt", b.separation_dt, 1e-3, 1.0)?;
        v.range(
            "budgets",
            "separation_t_limit",
            b.separation_t_limit,
            1.0,
            crate::flow::MAX_FLOW_TIME,
        )?;
        v.range(
            "budgets",
            "first_return_radius",
            b.first_return_radius,
            1e-4,
            0.5,
        )?;
        v.range(
            "budgets",
            "first_return_iterates",
            b.first_return_iterates,
            1,
            50,
        )?;
        v.range(
            "budgets",
            "quasigeodesic_time",
            b.quasigeodesic_time,
            0.5,
            crate::flow::MAX_FLOW_TIME,
        )?;
        let s = &self.samples;
        for (key, n) in [
            ("busemann", s.busemann),
            ("rn", s.rn),
            ("holonomy_segments", s.holonomy_segments),
            ("asymptotic_pairs", s.asymptotic_pairs),
            ("separation_pairs", s.separation_pairs),
            ("cone_fit", s.cone_fit),
            ("cone_points", s.cone_points),
            ("quasigeodesic_leaves", s.quasigeodesic_leaves),
            ("quasigeodesic_batches", s.quasigeodesic_batches),
            ("c1_points", s.c1_points),
        ] {
            v.range("samples", key, n, 0, MAX_SAMPLES)?;
        }
        let t = &self.tolerances;
        for (key, x) in [
            ("busemann", t.busemann),
            ("rn_relative", t.rn_relative),
            ("periodic_relative", t.periodic_relative),
            ("holonomy_bound", t.holonomy_bound),
            ("holonomy_slope", t.holonomy_slope),
            ("asymptotic_exponent", t.asymptotic_exponent),
            ("mollifier_exact", t.mollifier_exact),
            ("mollifier_ratio", t.mollifier_ratio),
            ("cone_growth", t.cone_growth),
            ("quasigeodesic_spread", t.quasigeodesic_spread),
            ("c1_fraction", t.c1_fraction),
            ("census", t.census),
        ] {
            v.nonnegative("tolerances", key, x)?;
        }
        let m = &self.mollifier;
        v.range("mollifier", "scale", m.scale, 1, 4096)?;
        v.range("mollifier", "nr", m.nr, 8, 4096)?;
        v.range("mollifier", "ny", m.ny, 64, 1 << 16)?;
        v.range("mollifier", "r_out", m.r_out, 1.3, 3.0)?;
        v.range("mollifier", "step", m.step, 1e-4, 0.1)?;
        check_resolution(m.scale, 1.0 / m.ny as f64).map_err(|e| v.fail("mollifier", "ny", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_toml_str("[samples]\nseed = 7\n").unwrap();
        assert_eq!(c.seed().unwrap(), 7);
        assert_eq!(c.cover.k, 1);
        assert_eq!(c.tolerances.busemann, 1e-9);
    }

    #[test]
    fn missing_seed_is_an_error() {
        let e = RunConfig::from_toml_str("[cover]\nk = 2\n").unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn errors_carry_lines() {
        let e = RunConfig::from_toml_str("[samples]\nseed = 1\n\n[cover]\nk = 12\n").unwrap_err();
        assert!(e.to_string().contains("line 5"), "{e}");
        let e = RunConfig::from_toml_str("[samples]\nseed = 1\nbogus = 3\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = RunConfig::from_toml_str("[samples]\nseed = \n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn coarse_mollifier_grid_is_rejected() {
        let e =
            RunConfig::from_toml_str("[samples]\nseed = 1\n[mollifier]\nny = 512\n").unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.samples.seed = Some(3);
        c.cover.k = 3;
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }
}
