use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{steps_for, CaseSpec};
use crate::error::{config, Result};
use crate::operator::{BasisKind, SpdOperator};
use crate::problems::{operator_for, ExamplePreset, SampleRule, SineSeriesSolution, TimeStepRule};
use crate::residual::DEFAULT_QUAD_POINTS;
use crate::scheme::Formulation;

/// The problem of a study: a preset or an inline sine series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Preset { preset: u8 },
    Inline { solution: SineSeriesSolution },
}

impl ProblemSpec {
    pub fn preset(&self) -> Result<Option<ExamplePreset>> {
        match self {
            Self::Preset { preset } => ExamplePreset::get(*preset).map(Some),
            Self::Inline { .. } => Ok(None),
        }
    }

    pub fn solution(&self) -> Result<SineSeriesSolution> {
        match self {
            Self::Preset { preset } => Ok(ExamplePreset::get(*preset)?.solution),
            Self::Inline { solution } => Ok(solution.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    /// Diagonal operator on the solution's own modes (or `modes`).
    Spectral,
    Fd1d,
    Fd2d,
}

impl OperatorChoice {
    fn basis(self) -> BasisKind {
        match self {
            Self::Spectral => BasisKind::SpectralModes,
            Self::Fd1d => BasisKind::Grid1d,
            Self::Fd2d => BasisKind::Grid2d,
        }
    }
}

fn default_final_time() -> f64 {
    1.0
}
fn default_quad_points() -> usize {
    DEFAULT_QUAD_POINTS
}
fn default_true() -> bool {
    true
}

/// A convergence study. Missing `h` and `time_step` fall back to the preset's
/// defaults; with an explicit step list and no `h`, levels are indexed by `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub name: String,
    pub problem: ProblemSpec,
    pub operator: OperatorChoice,
    /// Spectral mode list; defaults to the solution's modes.
    #[serde(default)]
    pub modes: Option<Vec<(u32, u32)>>,
    #[serde(default)]
    pub h: Option<Vec<f64>>,
    #[serde(default)]
    pub time_step: Option<TimeStepRule>,
    pub formulation: Formulation,
    #[serde(default = "default_final_time")]
    pub final_time: f64,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    #[serde(default)]
    pub samples: SampleRule,
    /// When `false`, `wall_ms` is written as 0 so reports are byte-identical.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config(format!("invalid study config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `(h, k)` per level, before rounding `k` to divide `T`.
    pub fn levels(&self) -> Result<Vec<(Option<f64>, f64)>> {
        let preset = self.problem.preset()?;
        let rule = match (&self.time_step, &preset) {
            (Some(r), _) => r.clone(),
            (None, Some(p)) => p.time_step.clone(),
            (None, None) => return Err(config("an inline problem needs a time_step rule")),
        };
        rule.validate()?;
        let h = match (&self.h, &rule, &preset) {
            (Some(h), _, _) => Some(h.clone()),
            (None, TimeStepRule::Explicit { .. }, _) => None,
            (None, _, Some(p)) => Some(p.h.clone()),
            (None, _, None) => return Err(config("a scaled time-step rule needs an h list")),
        };
        let levels = match (&h, &rule) {
            (Some(h), _) => h
                .iter()
                .enumerate()
                .map(|(i, &h)| Ok((Some(h), rule.step(h, i)?)))
                .collect::<Result<Vec<_>>>()?,
            (None, TimeStepRule::Explicit { k }) => k.iter().map(|&k| (None, k)).collect(),
            (None, TimeStepRule::Scaled { .. }) => unreachable!("handled above"),
        };
        if levels.len() < 2 {
            return Err(config("a study needs at least 2 refinement levels"));
        }
        if let Some(h) = &h {
            if h.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                return Err(config("mesh sizes must be positive"));
            }
        }
        Ok(levels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config(format!("study name {:?} is not a valid file stem", self.name)));
        }
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return Err(config(format!("final time must be positive, got {}", self.final_time)));
        }
        if self.quad_points == 0 {
            return Err(config("quad_points must be at least 1"));
        }
        self.formulation.validate()?;
        self.levels()?;
        Ok(())
    }

    pub fn build_operator(&self, h: Option<f64>) -> Result<SpdOperator> {
        let solution = self.problem.solution()?;
        let modes = self.modes.clone().unwrap_or_else(|| solution.modes());
        match (self.operator, h) {
            (OperatorChoice::Spectral, _) => operator_for(BasisKind::SpectralModes, solution.c(), &modes, 0.5),
            (choice, Some(h)) => operator_for(choice.basis(), solution.c(), &modes, h),
            (_, None) => Err(config("grid operators need an h list")),
        }
    }

    /// Operator and case description per level.
    pub fn plan(&self) -> Result<Vec<(SpdOperator, CaseSpec)>> {
        self.validate()?;
        self.levels()?
            .into_iter()
            .enumerate()
            .map(|(level, (h, k))| {
                let op = self.build_operator(h)?;
                let (n_steps, k) = steps_for(self.final_time, k)?;
                Ok((
                    op,
                    CaseSpec {
                        level,
                        h,
                        k,
                        n_steps,
                        formulation: self.formulation,
                        quad_points: self.quad_points,
                        samples: self.samples,
                        record_wall_time: self.record_wall_time,
                    },
                ))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_defaults_fill_the_levels() {
        let cfg = StudyConfig::from_json(
            r#"{"name": "p1", "problem": {"preset": 1}, "operator": "spectral",
                "formulation": {"formulation": "leap_frog"}}"#,
        )
        .unwrap();
        let levels = cfg.levels().unwrap();
        assert_eq!(levels.len(), 5);
        assert_eq!(levels[0], (Some(0.5), 0.5 * 0.4 / 9.0));
        assert_eq!(cfg.quad_points, 3);
        assert_eq!(cfg.samples.interior_points, 4);
    }

    #[test]
    fn explicit_steps_without_h() {
        let cfg = StudyConfig::from_json(
            r#"{"name": "k", "problem": {"preset": 1}, "operator": "spectral",
                "time_step": {"rule": "explicit", "k": [0.05, 0.025]},
                "formulation": {"formulation": "cosine2", "q1": 0.5}}"#,
        )
        .unwrap();
        let plan = cfg.plan().unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[1].1.n_steps, 40);
        assert_eq!(plan[1].1.h, None);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            r#"{"name": "x", "problem": {"preset": 4}, "operator": "spectral", "formulation": {"formulation": "leap_frog"}}"#,
            r#"{"name": "x", "problem": {"preset": 1}, "operator": "spectral", "h": [0.5], "formulation": {"formulation": "leap_frog"}}"#,
            r#"{"name": "x", "problem": {"preset": 1}, "operator": "spectral", "formulation": {"formulation": "leap_frog"}, "extra": 1}"#,
            r#"{"name": "x", "problem": {"preset": 1}, "operator": "fd2d", "time_step": {"rule": "explicit", "k": [0.1, 0.05]}, "formulation": {"formulation": "leap_frog"}}"#,
            r#"{"name": "x", "problem": {"preset": 1}, "operator": "spectral", "time_step": {"rule": "scaled", "c": 0.1, "r": 3}, "formulation": {"formulation": "leap_frog"}}"#,
        ];
        for text in bad {
            let parsed = StudyConfig::from_json(text);
            assert!(parsed.is_err() || parsed.unwrap().plan().is_err(), "{text}");
        }
    }
}
