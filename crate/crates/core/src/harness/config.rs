use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ar::{NoiseFamily, NoiseModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    DriftCertify,
    RateTable,
    ContinuityProfile,
    HolderCheck,
    LipschitzCheck,
    Counterexample,
    TaylorExpansion,
    KartashovCompare,
    McOracle,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::DriftCertify,
        Experiment::RateTable,
        Experiment::ContinuityProfile,
        Experiment::HolderCheck,
        Experiment::LipschitzCheck,
        Experiment::Counterexample,
        Experiment::TaylorExpansion,
        Experiment::KartashovCompare,
        Experiment::McOracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::DriftCertify => "drift-certify",
            Experiment::RateTable => "rate-table",
            Experiment::ContinuityProfile => "continuity-profile",
            Experiment::HolderCheck => "holder-check",
            Experiment::LipschitzCheck => "lipschitz-check",
            Experiment::Counterexample => "counterexample",
            Experiment::TaylorExpansion => "taylor-expansion",
            Experiment::KartashovCompare => "kartashov-compare",
            Experiment::McOracle => "mc-oracle",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment '{s}'")))
    }
}

/// Flat experiment configuration. Every key has a default; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must agree with the experiment named on the command line.
    pub experiment: Option<Experiment>,
    /// Grid nodes on `[-x_max, x_max]`.
    pub n: usize,
    pub x_max: f64,
    /// Moment order of `V = (1+|x|)^r`.
    pub r: f64,
    /// Weight exponent for rates, `beta_gap` and the Lipschitz check.
    pub beta: f64,
    /// `"student-t"` or `"gaussian"`.
    pub noise: String,
    pub dof: f64,
    pub loc: f64,
    /// Student-t scale or Gaussian standard deviation.
    pub scale: f64,
    pub alpha0: f64,
    /// Alphas for drift-certify, rate-table and counterexample.
    pub alphas: Vec<f64>,
    /// Explicit perturbation ladder; when empty, `eps_start * 2^-k` for `k < eps_rungs`.
    pub eps: Vec<f64>,
    pub eps_start: f64,
    pub eps_rungs: usize,
    pub n_steps: usize,
    /// Cap on the drift constant; `null` uses `10 (1 + E|noise|^r)`.
    pub l_cap: Option<f64>,
    pub tau_trunc: f64,
    pub max_row_defect: f64,
    /// Taylor order or Neumann order.
    pub order: usize,
    pub beta_r: f64,
    /// Step sizes of the finite-difference study.
    pub h: Vec<f64>,
    /// Contour points for the resolvent constant; 0 skips it.
    pub contour_points: usize,
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            n: 501,
            x_max: 100.0,
            r: 1.0,
            beta: 1.0,
            noise: "student-t".into(),
            dof: 3.0,
            loc: 0.0,
            scale: 1.0,
            alpha0: 0.5,
            alphas: Vec::new(),
            eps: Vec::new(),
            eps_start: 0.2,
            eps_rungs: 7,
            n_steps: 1,
            l_cap: None,
            tau_trunc: 1e-4,
            max_row_defect: 0.5,
            order: 1,
            beta_r: 0.2,
            h: vec![1e-2, 5e-3, 2.5e-3],
            contour_points: 0,
            n_samples: 1_000_000,
            burn_in: 1000,
            seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        if !v.is_object() {
            return Err(Error::Parse("config must be a JSON object".into()));
        }
        if let Some((k, _)) = v.as_object().unwrap().iter().find(|(_, val)| val.is_object()) {
            return Err(Error::Parse(format!("config must be flat; key '{k}' holds an object")));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn noise_family(&self) -> Result<NoiseFamily> {
        match self.noise.as_str() {
            "student-t" => Ok(NoiseFamily::StudentT {
                dof: self.dof,
                loc: self.loc,
                scale: self.scale,
            }),
            "gaussian" => Ok(NoiseFamily::Gaussian {
                mean: self.loc,
                sd: self.scale,
            }),
            other => Err(Error::Parse(format!("unknown noise '{other}'"))),
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.noise_family()?, self.r)
    }

    /// The perturbation ladder, without the base point.
    pub fn eps_values(&self) -> Vec<f64> {
        if self.eps.is_empty() {
            crate::perturbation::eps_ladder(self.eps_start, self.eps_rungs)
        } else {
            self.eps.clone()
        }
    }

    /// One message per violated constraint.
    pub fn validate(&self, exp: Experiment) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(e) = self.experiment {
            if e != exp {
                v.push(format!("config names experiment '{e}' but '{exp}' was requested"));
            }
        }
        if self.n < 3 || self.n > 4000 {
            v.push(format!("n must lie in [3, 4000], got {}", self.n));
        }
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            v.push(format!("x_max must be positive, got {}", self.x_max));
        }
        if !(self.r >= 1.0 && self.r.is_finite()) {
            v.push(format!("r must be >= 1, got {}", self.r));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            v.push(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        match self.noise_family() {
            Err(e) => v.push(e.to_string()),
            Ok(fam) => {
                if let Err(e) = NoiseModel::new(fam, self.r) {
                    v.push(e.to_string());
                }
            }
        }
        if !(self.tau_trunc > 0.0 && self.tau_trunc < 1.0) {
            v.push(format!("tau_trunc must lie in (0, 1), got {}", self.tau_trunc));
        }
        if !(self.max_row_defect > 0.0 && self.max_row_defect < 1.0) {
            v.push(format!("max_row_defect must lie in (0, 1), got {}", self.max_row_defect));
        }
        if let Some(c) = self.l_cap {
            if !(c > 0.0) {
                v.push(format!("l_cap must be positive, got {c}"));
            }
        }
        let alpha_ok = |a: f64| a.abs() < 1.0;
        let needs_alphas = matches!(
            exp,
            Experiment::DriftCertify | Experiment::RateTable | Experiment::Counterexample
        );
        if needs_alphas {
            if self.alphas.is_empty() {
                v.push(format!("{exp} needs a non-empty alphas list"));
            }
            for &a in &self.alphas {
                if !alpha_ok(a) {
                    v.push(format!("alpha {a} must satisfy |alpha| < 1"));
                }
            }
        }
        if !alpha_ok(self.alpha0) {
            v.push(format!("alpha0 must satisfy |alpha0| < 1, got {}", self.alpha0));
        }
        let uses_eps = matches!(
            exp,
            Experiment::ContinuityProfile
                | Experiment::HolderCheck
                | Experiment::LipschitzCheck
                | Experiment::TaylorExpansion
                | Experiment::KartashovCompare
        );
        if uses_eps {
            let eps = self.eps_values();
            if eps.is_empty() {
                v.push("eps ladder is empty".into());
            }
            for e in eps {
                if e == 0.0 || !e.is_finite() {
                    v.push(format!("eps values must be finite and nonzero, got {e}"));
                } else if !alpha_ok(self.alpha0 + e) || !alpha_ok(self.alpha0 - e) {
                    v.push(format!("alpha0 +- {e} leaves (-1, 1)"));
                }
            }
        }
        if exp == Experiment::HolderCheck && self.eps_values().len() < 4 {
            v.push("holder-check needs at least 4 eps values".into());
        }
        if self.n_steps == 0 {
            v.push("n_steps must be >= 1".into());
        }
        match exp {
            Experiment::Counterexample => {
                if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
                    v.push(format!("counterexample needs alpha0 in (0, 1), got {}", self.alpha0));
                }
                if self.alphas.windows(2).any(|w| !(w[1] < w[0])) {
                    v.push("counterexample alphas must be strictly decreasing".into());
                }
                if self.alphas.iter().any(|&a| a <= self.alpha0) {
                    v.push("counterexample alphas must exceed alpha0".into());
                }
            }
            Experiment::TaylorExpansion => {
                let fl = self.r.floor();
                if self.r.fract() == 0.0 {
                    v.push(format!("taylor-expansion needs non-integer r, got {}", self.r));
                }
                if self.order == 0 || self.order as f64 > fl {
                    v.push(format!("order must lie in [1, floor(r)] = [1, {fl}], got {}", self.order));
                }
                let upper = 1.0 - fl / self.r;
                if !(self.beta_r > 0.0 && self.beta_r < upper) {
                    v.push(format!("beta_r must lie in (0, {upper:.4}), got {}", self.beta_r));
                }
                if self.noise != "student-t" {
                    v.push("taylor-expansion needs noise with bounded derivative ratios (student-t)".into());
                }
                if self.h.is_empty() || self.h.iter().any(|&h| !(h > 0.0) || !alpha_ok(self.alpha0 + h) || !alpha_ok(self.alpha0 - h)) {
                    v.push("h must be a non-empty list of positive steps keeping alpha0 +- h in (-1, 1)".into());
                }
            }
            Experiment::McOracle if self.n_samples == 0 || self.n_samples < 10 * self.burn_in => {
                v.push(format!(
                    "n_samples must be >= 10 * burn_in = {}, got {}",
                    10 * self.burn_in,
                    self.n_samples
                ));
            }
            _ => {}
        }
        v
    }
}
