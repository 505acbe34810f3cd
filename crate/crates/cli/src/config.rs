use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use coarse_kernels::io::BoxSpaceFile;
use serde::{Deserialize, Serialize};

/// Where the coarse disjoint union comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    /// Cycles `C_n` (the box space of `Z` with quotients `Z/n`).
    Cycles { lengths: Vec<usize> },
    /// A box space from group quotients.
    Box(BoxSpaceFile),
    /// A space file (relative paths resolve against the config file).
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    /// Cycle charts for `cycles`, large-girth charts otherwise.
    #[default]
    Auto,
    Cycles,
    LargeGirth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub r: u64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub space: SpaceSpec,
    pub generator: GeneratorChoice,
    /// Terms of the proper-function series.
    pub n_max: usize,
    /// `(R, eps)` pairs for the glued kernels.
    pub schedules: Vec<ScheduleSpec>,
    pub tol: f64,
    pub seed: u64,
    /// Tuples sampled for the negative-type test of the truncated function.
    pub tuples: usize,
    pub sigmas_per_tuple: usize,
    /// Charts whose squared-distance kernels get an eigenvalue test.
    pub chart_samples: usize,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            space: SpaceSpec::Cycles {
                lengths: vec![8, 16, 32, 64, 128, 256, 512, 1024],
            },
            generator: GeneratorChoice::Auto,
            n_max: coarse_kernels::gluing::DEFAULT_NMAX,
            schedules: vec![ScheduleSpec { r: 2, eps: 0.5 }, ScheduleSpec { r: 4, eps: 0.25 }],
            tol: 1e-8,
            seed: 0,
            tuples: 500,
            sigmas_per_tuple: 20,
            chart_samples: 16,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let SpaceSpec::File { path: p } = &mut cfg.space {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Structural checks that run before any construction.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_max >= 1, "n_max must be at least 1");
        ensure!(self.tol.is_finite() && self.tol > 0.0, "tol must be positive, got {}", self.tol);
        for s in &self.schedules {
            ensure!(s.eps > 0.0 && s.eps <= 1.0, "eps must lie in (0, 1], got {}", s.eps);
            ensure!(s.r >= 1, "schedule radius must be at least 1");
        }
        match &self.space {
            SpaceSpec::Cycles { lengths } => {
                ensure!(!lengths.is_empty(), "no cycle lengths given");
                ensure!(lengths.iter().all(|&n| n >= 4), "cycle charts need length at least 4");
                ensure!(lengths.windows(2).all(|w| w[0] < w[1]), "cycle lengths must increase strictly");
            }
            SpaceSpec::Box(b) => ensure!(!b.quotients.is_empty(), "no quotients given"),
            SpaceSpec::File { path } => {
                ensure!(path.is_file(), "space file {} does not exist", path.display())
            }
        }
        if self.generator == GeneratorChoice::Cycles && !matches!(self.space, SpaceSpec::Cycles { .. }) {
            bail!("the cycle generator needs a `cycles` space");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = PipelineConfig::default();
        c.schedules[0].eps = 0.0;
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            n_max: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            space: SpaceSpec::File {
                path: "/nonexistent/space.json".into(),
            },
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_partial_json() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"space":{"kind":"cycles","lengths":[8,16]},"n_max":2}"#).unwrap();
        assert_eq!(c.n_max, 2);
        assert_eq!(c.tol, 1e-8);
        let b: PipelineConfig = serde_json::from_str(
            r#"{"space":{"kind":"box","quotients":[{"kind":"cyclic","n":4}],"generators":["1"]}}"#,
        )
        .unwrap();
        assert!(matches!(b.space, SpaceSpec::Box(_)));
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"nmax":2}"#).is_err());
    }
}
