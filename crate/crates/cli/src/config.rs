//! Run configuration, read from TOML (or JSON when the file ends in `.json`).
//!
//! Every section and key is optional; omitted values fall back to the
//! reference configuration `A=1, B=2, p=q=1, R=1, N=2, g=1`.

use std::path::{Path, PathBuf};

use ccpb::diagnostics::{Tolerances, ValidationOptions};
use ccpb::solver::{geometric_ladder, validate_ladder, LinearSolver};
use ccpb::{
    validate_params, DielectricProfile, MeshPolicy, ModelParams, NewtonOptions, RawParams, Seed,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub dim: f64,
    /// Robin coefficient; when set, `solve` and `sweep` emit the Robin profile.
    pub eta: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let r = RawParams::reference(2f64.powi(-6));
        ModelSection {
            a: r.a,
            b: r.b,
            p: r.p,
            q: r.q,
            epsilon: r.epsilon,
            radius: r.radius,
            dim: r.dim,
            eta: None,
        }
    }
}

/// Either an explicit list or `start * factor^k` for `k < count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LadderSpec {
    List(Vec<f64>),
    Geometric {
        start: f64,
        factor: f64,
        count: usize,
    },
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec::Geometric {
            start: 2f64.powi(-4),
            factor: 0.5f64.sqrt(),
            count: 17,
        }
    }
}

impl LadderSpec {
    /// Parses `START:FACTOR:COUNT`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected START:FACTOR:COUNT, got `{text}`"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
        Ok(LadderSpec::Geometric {
            start: num(parts[0])?,
            factor: num(parts[1])?,
            count: parts[2]
                .trim()
                .parse()
                .map_err(|e| format!("`{}`: {e}", parts[2]))?,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            LadderSpec::List(v) => v.clone(),
            LadderSpec::Geometric {
                start,
                factor,
                count,
            } => geometric_ladder(*start, *factor, *count),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub min_step: f64,
    pub linear: LinearSolver,
    pub seed: Seed,
    pub ladder: LadderSpec,
}

impl Default for SolverSection {
    fn default() -> Self {
        let n = NewtonOptions::default();
        SolverSection {
            tol: n.tol,
            max_iter: n.max_iter,
            min_step: n.min_step,
            linear: n.linear,
            seed: Seed::default(),
            ladder: LadderSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub kappa: f64,
    pub thetas: Vec<f64>,
    /// Layer offset used by the pointwise and capacitance rows of `validate`.
    pub gamma: f64,
    /// Grid for `capacitance` and the capacitance-vs-gamma plot.
    pub gammas: Vec<f64>,
    pub fit_max_eps: f64,
    pub tolerances: Tolerances,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let v = ValidationOptions::default();
        DiagnosticsSection {
            kappa: v.kappa,
            thetas: v.thetas,
            gamma: v.gamma,
            gammas: vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            fit_max_eps: v.fit_max_eps,
            tolerances: v.tolerances,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub dielectric: Option<DielectricProfile>,
    pub mesh: MeshPolicy,
    pub solver: SolverSection,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        } else {
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
    }

    pub fn raw_params(&self) -> RawParams {
        let m = &self.model;
        RawParams {
            a: m.a,
            b: m.b,
            p: m.p,
            q: m.q,
            epsilon: m.epsilon,
            radius: m.radius,
            dim: m.dim,
            dielectric: self
                .dielectric
                .clone()
                .unwrap_or(DielectricProfile::constant(1.0)),
            eta: m.eta,
        }
    }

    pub fn params(&self) -> Result<ModelParams, String> {
        validate_params(&self.raw_params()).map_err(|e| e.to_string())
    }

    pub fn ladder(&self) -> Result<Vec<f64>, String> {
        let l = self.solver.ladder.values();
        validate_ladder(&l).map_err(|e| e.to_string())?;
        Ok(l)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            min_step: self.solver.min_step,
            linear: self.solver.linear,
        }
    }

    pub fn validation(&self) -> ValidationOptions {
        let d = &self.diagnostics;
        ValidationOptions {
            newton: self.newton(),
            mesh: self.mesh.clone(),
            seed: self.solver.seed,
            kappa: d.kappa,
            thetas: d.thetas.clone(),
            gamma: d.gamma,
            fit_max_eps: d.fit_max_eps,
            tolerances: d.tolerances.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_reference() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        let p = cfg.params().unwrap();
        assert_eq!((p.a, p.b, p.p, p.q, p.dim), (1.0, 2.0, 1.0, 1.0, 2));
        let l = cfg.ladder().unwrap();
        assert_eq!(l.len(), 17);
        assert!((l[16] - 2f64.powi(-12)).abs() < 1e-15);
    }

    #[test]
    fn sections_parse() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [model]
            a = 0.5
            dim = 3

            [dielectric]
            kind = "polynomial"
            coefficients = [1.0, 0.25]

            [mesh]
            kind = "fixed"
            spec = { kind = "uniform", cells = 64 }

            [solver]
            ladder = [0.5, 0.25, 0.125]
            linear = "dense"

            [diagnostics]
            kappa = 0.25
            tolerances = { pohozaev = 1e-2 }

            [output]
            format = "json"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.params().unwrap().dim, 3);
        assert_eq!(cfg.ladder().unwrap(), vec![0.5, 0.25, 0.125]);
        assert_eq!(cfg.newton().linear, LinearSolver::Dense);
        assert_eq!(cfg.validation().tolerances.pohozaev, 1e-2);
        assert_eq!(cfg.validation().tolerances.slope, 0.15);
        assert_eq!(cfg.output.format, Format::Json);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[model]\nalpha = 1.0\n").is_err());
    }

    #[test]
    fn ladder_flag() {
        let l = LadderSpec::parse("0.5:0.5:4").unwrap().values();
        assert_eq!(l, vec![0.5, 0.25, 0.125, 0.0625]);
        assert!(LadderSpec::parse("0.5:0.5").is_err());
        assert!(LadderSpec::parse("a:0.5:3").is_err());
    }
}
