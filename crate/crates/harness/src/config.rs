//! Experiment configuration: suite defaults, JSON overrides and validity
//! checks on every exponent a suite feeds into a cited inequality.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identity,
    Counterexample,
    Resolvent,
    Caccioppoli,
    Weights,
    Domains,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Identity,
        Suite::Counterexample,
        Suite::Resolvent,
        Suite::Caccioppoli,
        Suite::Weights,
        Suite::Domains,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Identity => "identity",
            Suite::Counterexample => "counterexample",
            Suite::Resolvent => "resolvent",
            Suite::Caccioppoli => "caccioppoli",
            Suite::Weights => "weights",
            Suite::Domains => "domains",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .with_context(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub n: usize,
    /// Window side `L`.
    pub side: f64,
    /// Grid sizes of refinement studies and fine-grid oracles.
    pub refinement: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    /// Sup bound of the fixed-`k` resolvent family and of random dilatations.
    pub k: f64,
    /// Target `||mu||_{W^{1,2}}` values of the bump family.
    pub sizes: Vec<f64>,
    /// Shape parameter `A` of the amplitude `0.95 tanh(A)`.
    pub amplitude: f64,
    /// Chirp frequency used when the amplitude alone cannot reach a size.
    pub frequency: f64,
    /// Support radius of the bump.
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub solver: f64,
    pub identity: f64,
    pub analytic_residual: f64,
    pub spectral_residual: f64,
    pub oracle: f64,
    pub drift: f64,
    pub variation: f64,
    pub change_of_variables: f64,
    pub symmetry: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Suite,
    pub grid: GridParams,
    pub family: FamilyParams,
    pub exponents: Exponents,
    pub tolerances: Tolerances,
    pub seed: u64,
    /// Independent random trials (fields, pairs or probes per member).
    pub samples: usize,
    /// Random probes for operator-norm lower bounds.
    pub probes: usize,
    /// Power-iteration refinements of the best probe.
    pub power_steps: usize,
    /// Radius of the Caccioppoli cutoff.
    pub cutoff_radius: f64,
    pub parallel: bool,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(suite: Suite) -> Self {
        let mut c = Self {
            experiment: suite,
            grid: GridParams {
                n: 256,
                side: 4.0,
                refinement: vec![],
            },
            family: FamilyParams {
                k: 0.5,
                sizes: vec![0.5, 1.0, 2.0],
                amplitude: 1.0,
                frequency: 0.0,
                radius: 1.0,
            },
            exponents: Exponents {
                p: vec![],
                r: vec![],
                q: vec![],
            },
            tolerances: Tolerances {
                solver: 1e-10,
                identity: 1e-10,
                analytic_residual: 1e-12,
                spectral_residual: 1e-4,
                oracle: 1e-3,
                drift: 0.1,
                variation: 2.0,
                change_of_variables: 0.02,
                symmetry: 0.05,
            },
            seed: 0x5eed,
            samples: 10,
            probes: 32,
            power_steps: 8,
            cutoff_radius: 0.8,
            parallel: false,
            output: None,
        };
        match suite {
            Suite::Identity => {
                c.grid = GridParams {
                    n: 256,
                    side: 16.0,
                    refinement: vec![128, 256, 512],
                };
            }
            Suite::Counterexample => {
                c.grid = GridParams {
                    n: 512,
                    side: 2.4,
                    refinement: vec![],
                };
                c.exponents.r = vec![1.5, 2.0];
            }
            Suite::Resolvent => {
                c.grid = GridParams {
                    n: 128,
                    side: 4.0,
                    refinement: vec![512],
                };
                c.family.sizes = vec![2.0, 3.0, 4.0, 6.0];
                c.exponents = Exponents {
                    p: vec![4.0],
                    r: vec![1.5],
                    q: vec![],
                };
                c.probes = 12;
                c.power_steps = 4;
            }
            Suite::Caccioppoli => {
                c.grid = GridParams {
                    n: 256,
                    side: 4.0,
                    refinement: vec![256, 512],
                };
                c.exponents = Exponents {
                    p: vec![],
                    r: vec![1.5],
                    q: vec![4.0],
                };
            }
            Suite::Weights => {
                c.grid = GridParams {
                    n: 256,
                    side: 4.0,
                    refinement: vec![],
                };
                c.family.sizes = vec![0.5, 1.0, 2.0];
                c.exponents.p = vec![3.0];
            }
            Suite::Domains => {
                c.grid = GridParams {
                    n: 256,
                    side: 4.0,
                    refinement: vec![512],
                };
                c.family.sizes = vec![0.25, 0.5, 1.0];
                c.family.radius = 0.75;
                c.exponents = Exponents {
                    p: vec![3.0],
                    r: vec![],
                    q: vec![3.0],
                };
                c.probes = 8;
                c.power_steps = 4;
            }
        }
        c
    }

    /// Suite defaults overridden by the keys present in `overrides`.
    pub fn with_overrides(suite: Suite, overrides: &Value) -> Result<Self> {
        let mut base = serde_json::to_value(Self::defaults(suite))?;
        merge(&mut base, overrides);
        let config: Self =
            serde_json::from_value(base).context("configuration does not match the schema")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(suite: Suite, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let mut config = Self::with_overrides(suite, &value)?;
        config.experiment = suite;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n;
        for &m in std::iter::once(&n).chain(&self.grid.refinement) {
            if m < 16 || !m.is_power_of_two() {
                bail!("grid size {m} must be a power of two >= 16");
            }
        }
        if !(self.grid.side > 0.0 && self.grid.side.is_finite()) {
            bail!("window side {} must be positive", self.grid.side);
        }
        if !(0.0..0.95).contains(&self.family.k) {
            bail!("k = {} outside [0, 0.95): ellipticity needs ||mu||_inf = k < 1 and the bump family certifies k < 0.95", self.family.k);
        }
        if self
            .family
            .sizes
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            bail!("family sizes must be positive W^(1,2) norms");
        }
        let uses_family = !matches!(self.experiment, Suite::Identity | Suite::Counterexample);
        if uses_family && !(self.family.radius > 0.0 && self.family.radius <= self.grid.side / 4.0)
        {
            bail!(
                "bump radius {} must lie in (0, L/4] so the support stays in the central half",
                self.family.radius
            );
        }
        if !(self.tolerances.solver > 0.0) {
            bail!("solver tolerance must be positive");
        }
        if self.samples == 0 || self.probes == 0 {
            bail!("samples and probes must be positive");
        }
        let e = &self.exponents;
        match self.experiment {
            Suite::Identity | Suite::Counterexample => {
                for &r in &e.r {
                    require(
                        r > 1.0 && r <= 2.0,
                        "r",
                        r,
                        "second-derivative integrability of z(1 - log|z|) is probed for 1 < r <= 2",
                    )?;
                }
            }
            Suite::Resolvent => {
                for &r in &e.r {
                    require(
                        r > 1.0 && r < 2.0,
                        "r",
                        r,
                        "critical resolvent bound on W^(1,r) holds for 1 < r < 2",
                    )?;
                }
                for &p in &e.p {
                    require(
                        p > 2.0,
                        "p",
                        p,
                        "supercritical resolvent bound 1 + ||mu||^2_(W^(1,p)) needs p > 2",
                    )?;
                }
            }
            Suite::Caccioppoli => {
                for &q in &e.q {
                    require(
                        q > 2.0 && q.is_finite(),
                        "q",
                        q,
                        "first-order Caccioppoli inequality holds for 2 < q < inf",
                    )?;
                }
                for &r in &e.r {
                    require(
                        r > 1.0 && r < 2.0,
                        "r",
                        r,
                        "second-order Caccioppoli inequality holds for 1 < r < 2",
                    )?;
                }
            }
            Suite::Weights => {
                for &p in &e.p {
                    require(
                        p > 1.0 && p.is_finite(),
                        "p",
                        p,
                        "Muckenhoupt class A_p is defined for 1 < p < inf",
                    )?;
                }
            }
            Suite::Domains => {
                for &p in &e.p {
                    require(
                        p > 2.0 && p.is_finite(),
                        "p",
                        p,
                        "global compressed-resolvent bound on B_p domains needs p >= r > 2",
                    )?;
                }
                for &q in &e.q {
                    require(
                        q > 2.0,
                        "q",
                        q,
                        "boundary Besov norm B_q of a domain needs q > 2",
                    )?;
                }
            }
        }
        if e.p.is_empty() && matches!(self.experiment, Suite::Weights | Suite::Domains) {
            bail!("suite {} needs at least one exponent p", self.experiment);
        }
        Ok(())
    }
}

fn require(ok: bool, name: &str, value: f64, citation: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        bail!("{name} = {value} is outside the valid range: {citation}")
    }
}

fn merge(base: &mut Value, overrides: &Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (key, value) in o {
                match b.get_mut(key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        b.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        (slot, value) => *slot = value.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn every_default_validates() {
        for suite in Suite::ALL {
            ExperimentConfig::defaults(suite).validate().unwrap();
        }
    }

    #[test]
    fn overrides_merge_into_defaults() {
        let c = ExperimentConfig::with_overrides(
            Suite::Resolvent,
            &json!({"grid": {"n": 64}, "seed": 9}),
        )
        .unwrap();
        assert_eq!(c.grid.n, 64);
        assert_eq!(c.grid.side, 4.0);
        assert_eq!(c.seed, 9);
        assert_eq!(c.exponents.r, vec![1.5]);
    }

    #[test]
    fn out_of_range_exponents_cite_the_statement() {
        let err =
            ExperimentConfig::with_overrides(Suite::Resolvent, &json!({"exponents": {"r": [2.5]}}))
                .unwrap_err();
        assert!(err.to_string().contains("1 < r < 2"), "{err}");
        let err = ExperimentConfig::with_overrides(
            Suite::Caccioppoli,
            &json!({"exponents": {"q": [1.5]}}),
        )
        .unwrap_err();
        assert!(err.to_string().contains("2 < q"), "{err}");
        let err =
            ExperimentConfig::with_overrides(Suite::Domains, &json!({"exponents": {"p": [2.0]}}))
                .unwrap_err();
        assert!(err.to_string().contains("p >= r > 2"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_grids_are_rejected() {
        assert!(ExperimentConfig::with_overrides(Suite::Identity, &json!({"gird": {}})).is_err());
        assert!(
            ExperimentConfig::with_overrides(Suite::Identity, &json!({"grid": {"n": 100}}))
                .is_err()
        );
        assert!(
            ExperimentConfig::with_overrides(Suite::Weights, &json!({"family": {"k": 0.97}}))
                .is_err()
        );
    }

    #[test]
    fn suite_names_roundtrip() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("everything".parse::<Suite>().is_err());
    }
}
