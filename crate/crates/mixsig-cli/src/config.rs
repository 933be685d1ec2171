//! TOML run configuration.
//!
//! Every file starts with `schema_version = "1.x"`; the major version must match
//! [`CONFIG_MAJOR`]. Covariate points are written as flat arrays of n*D values,
//! bidder-major (Z_1 first).

use serde::{Deserialize, Serialize};

use mixsig::field::SmootherConfig;
use mixsig::identify::IdentifyOptions;
use mixsig::model::{
    examples, Combiner, CombinerKind, CopulaKind, Covariates, MixedSignalModel, SignalCopula, SlopeFunction,
    ValueQuantile, WilsonSpec,
};
use mixsig::sieve::SieveSpec;
use mixsig::strategy::{BaseSpec, SolveOptions, StrategyProfile, Warp, ZSampler};

use crate::error::CliError;

pub const CONFIG_MAJOR: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: Option<ModelSection>,
    pub profile: Option<ProfileSection>,
    pub covariates: Option<CovariateSection>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub smoother: SmootherConfig,
    #[serde(default)]
    pub identify: IdentifySection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub counterfactual: CounterfactualSection,
}

fn default_seed() -> u64 {
    1
}

/// Model primitives. `family` picks how they are given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSection {
    /// One combiner per bidder and a slope for every (i, j).
    General {
        n: usize,
        dim: usize,
        #[serde(default)]
        normalize: bool,
        combiners: Vec<CombinerKind>,
        /// slopes[i][j][d] = Bernstein coefficients of component d of gamma_ij.
        slopes: Vec<Vec<Vec<Vec<f64>>>>,
        copula: CopulaKind,
    },
    /// Bidder 1's combiner and slopes; the other bidders mirror bidder 1.
    Mirrored {
        n: usize,
        dim: usize,
        #[serde(default)]
        normalize: bool,
        phi: CombinerKind,
        /// slopes[j][d] = Bernstein coefficients of component d of gamma_1j.
        slopes: Vec<Vec<Vec<f64>>>,
        copula: CopulaKind,
    },
    /// V_i = A_i with independent uniform signals.
    UniformIpv { n: usize },
    /// Common value with Gaussian noise; Z_i is the signal precision covariate (D = 1).
    Wilson { n: usize, gamma0: ValueQuantile },
}

pub enum Primitives {
    Model(MixedSignalModel),
    Wilson(WilsonSpec),
}

impl Primitives {
    pub fn n(&self) -> usize {
        match self {
            Primitives::Model(m) => m.n(),
            Primitives::Wilson(w) => w.n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Primitives::Model(m) => m.dim(),
            Primitives::Wilson(_) => 1,
        }
    }

    pub fn model(&self) -> Option<&MixedSignalModel> {
        match self {
            Primitives::Model(m) => Some(m),
            Primitives::Wilson(_) => None,
        }
    }
}

fn slope(coefs: &[Vec<f64>], dim: usize, what: &str) -> Result<SlopeFunction, CliError> {
    if coefs.len() != dim {
        return Err(CliError::config(format!("{what}: expected {dim} components, got {}", coefs.len())));
    }
    Ok(SlopeFunction::bernstein(coefs.to_vec())?)
}

impl ModelSection {
    pub fn build(&self) -> Result<Primitives, CliError> {
        match self {
            ModelSection::General { n, dim, normalize, combiners, slopes, copula } => {
                if combiners.len() != *n || slopes.len() != *n || slopes.iter().any(|r| r.len() != *n) {
                    return Err(CliError::config(format!("model: need {n} combiners and an {n} x {n} slope array")));
                }
                let combiners = combiners.iter().map(|k| Combiner::new(k.clone())).collect::<Result<Vec<_>, _>>()?;
                let mut rows = Vec::with_capacity(*n);
                for (i, row) in slopes.iter().enumerate() {
                    let r = row
                        .iter()
                        .enumerate()
                        .map(|(j, c)| slope(c, *dim, &format!("slope ({}, {})", i + 1, j + 1)))
                        .collect::<Result<Vec<_>, _>>()?;
                    rows.push(r);
                }
                let m = MixedSignalModel::new(rows, combiners, SignalCopula::new(*n, copula.clone())?)?;
                Ok(Primitives::Model(if *normalize { m.normalized() } else { m }))
            }
            ModelSection::Mirrored { n, dim, normalize, phi, slopes, copula } => {
                if slopes.len() != *n {
                    return Err(CliError::config(format!("model: need {n} slopes for bidder 1")));
                }
                let s = slopes
                    .iter()
                    .enumerate()
                    .map(|(j, c)| slope(c, *dim, &format!("slope (1, {})", j + 1)))
                    .collect::<Result<Vec<_>, _>>()?;
                let m = examples::from_first_bidder(Combiner::new(phi.clone())?, s, SignalCopula::new(*n, copula.clone())?)?;
                Ok(Primitives::Model(if *normalize { m.normalized() } else { m }))
            }
            ModelSection::UniformIpv { n } => {
                if *n < 2 {
                    return Err(CliError::config("model: n must be at least 2"));
                }
                Ok(Primitives::Model(examples::uniform_ipv(*n)))
            }
            ModelSection::Wilson { n, gamma0 } => Ok(Primitives::Wilson(WilsonSpec::new(gamma0.clone(), *n)?)),
        }
    }
}

/// Strategy profile used to generate bids or the oracle field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSection {
    /// Symmetric first-price equilibrium, solved at every covariate support point.
    Equilibrium,
    /// Common base composed with per-bidder warps; `warps[0]` must be the identity.
    Synthetic {
        base: BaseSpec,
        warps: Vec<Warp>,
        /// Per-bidder (shift, stretch); identity when absent.
        affine: Option<Vec<(f64, f64)>>,
    },
    /// Quadratic warps delta_k(Z) = tanh(Z_k - Z_1) / 2 on a common base (D = 1).
    Canonical { base: BaseSpec },
}

impl ProfileSection {
    /// Build the profile; equilibrium profiles are solved at `support`.
    pub fn build(
        &self,
        prims: &Primitives,
        support: Option<&[Covariates]>,
        opts: &SolveOptions,
    ) -> Result<StrategyProfile, CliError> {
        let n = prims.n();
        match self {
            ProfileSection::Equilibrium => {
                let model = prims
                    .model()
                    .ok_or_else(|| CliError::config("equilibrium profiles need a copula model, not the Wilson family"))?;
                let support = support.ok_or_else(|| {
                    CliError::config("equilibrium profiles need a fixed or discrete covariate support")
                })?;
                let mut points = Vec::with_capacity(support.len());
                for z in support {
                    let (p, _) = mixsig::strategy::solve_symmetric_fpa(model, z, opts)?;
                    let slice = p.slice(z)?;
                    let curves = slice
                        .curves
                        .iter()
                        .map(|c| match c {
                            mixsig::strategy::BidCurve::Table(t) => Ok(t.clone()),
                            _ => Err(CliError::numerical("equilibrium solver returned a non-tabulated curve")),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    points.push((z.clone(), curves));
                }
                Ok(StrategyProfile::tables(points)?)
            }
            ProfileSection::Synthetic { base, warps, affine } => {
                if warps.len() != n {
                    return Err(CliError::config(format!("profile: need {n} warps")));
                }
                let affine = affine.clone().unwrap_or_else(|| vec![(0.0, 1.0); n]);
                Ok(StrategyProfile::synthetic_affine(base.clone(), warps.clone(), affine, prims.dim())?)
            }
            ProfileSection::Canonical { base } => {
                if prims.dim() != 1 {
                    return Err(CliError::config("canonical profile needs D = 1"));
                }
                Ok(StrategyProfile::canonical(n, base.clone())?)
            }
        }
    }
}

/// How covariates are drawn in simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateSection {
    Fixed { point: Vec<f64> },
    Discrete { points: Vec<Vec<f64>> },
    Box { lo: f64, hi: f64 },
}

pub fn point(n: usize, dim: usize, v: &[f64]) -> Result<Covariates, CliError> {
    if v.len() != n * dim {
        return Err(CliError::config(format!("covariate point needs {} values, got {}", n * dim, v.len())));
    }
    Ok(Covariates::new(n, dim, v.to_vec())?)
}

pub fn points(n: usize, dim: usize, vs: &[Vec<f64>]) -> Result<Vec<Covariates>, CliError> {
    vs.iter().map(|v| point(n, dim, v)).collect()
}

impl CovariateSection {
    pub fn sampler(&self, n: usize, dim: usize) -> Result<ZSampler, CliError> {
        Ok(match self {
            CovariateSection::Fixed { point: p } => ZSampler::Fixed { z: point(n, dim, p)? },
            CovariateSection::Discrete { points: ps } => {
                if ps.is_empty() {
                    return Err(CliError::config("discrete covariate support is empty"));
                }
                ZSampler::Discrete { support: points(n, dim, ps)? }
            }
            CovariateSection::Box { lo, hi } => ZSampler::Box { n, dim, lo: *lo, hi: *hi },
        })
    }

    /// Finite support points, or a tensor grid with `per_axis` points for a box.
    pub fn grid(&self, n: usize, dim: usize, per_axis: usize) -> Result<Vec<Covariates>, CliError> {
        Ok(match self {
            CovariateSection::Fixed { point: p } => vec![point(n, dim, p)?],
            CovariateSection::Discrete { points: ps } => points(n, dim, ps)?,
            CovariateSection::Box { lo, hi } => mixsig::sieve::design_grid(n, dim, *lo, *hi, per_axis)?,
        })
    }

    pub fn finite_support(&self, n: usize, dim: usize) -> Result<Option<Vec<Covariates>>, CliError> {
        Ok(match self {
            CovariateSection::Box { .. } => None,
            _ => Some(self.grid(n, dim, 1)?),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub auctions: usize,
    /// Also write the generating signals (ground truth) next to the bids.
    pub write_signals: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { auctions: 1000, write_signals: false }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    /// 1-based bidder the field is built for.
    pub bidder: Option<usize>,
    /// Covariate points; the covariate section's grid when absent.
    pub points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifySection {
    /// 1-based bidder whose primitives are recovered.
    pub bidder: usize,
    /// Solve points as flat covariate arrays.
    pub points: Option<Vec<Vec<f64>>>,
    /// Overidentification points as flat covariate arrays; empty disables the check.
    pub overid_points: Option<Vec<Vec<f64>>>,
    /// Tolerance of the strategy-condition tests on bid-support endpoints.
    pub support_tolerance: f64,
    pub options: IdentifyOptions,
}

impl Default for IdentifySection {
    fn default() -> Self {
        Self {
            bidder: 1,
            points: None,
            overid_points: None,
            support_tolerance: 1e-3,
            options: IdentifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    pub bidder: usize,
    /// Interior quantile levels of the first stage.
    pub alpha_points: usize,
    /// Covariate design box and points per coordinate.
    pub design_lo: f64,
    pub design_hi: f64,
    pub design_per_axis: usize,
    pub sieve: SieveSpec,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self { bidder: 1, alpha_points: 40, design_lo: 1.0, design_hi: 2.0, design_per_axis: 4, sieve: SieveSpec::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueSource {
    /// The configured model (must be exchangeable).
    Model,
    /// Primitives recovered from the configured oracle field (two bidders).
    Identified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualSection {
    pub draws: usize,
    /// Covariate points; the covariate section's grid when absent.
    pub points: Option<Vec<Vec<f64>>>,
    /// Grid for the pseudo-private-value interpolant.
    pub value_grid: usize,
    pub source: RevenueSource,
}

impl Default for CounterfactualSection {
    fn default() -> Self {
        Self { draws: 100_000, points: None, value_grid: 1025, source: RevenueSource::Model }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        let major = cfg
            .schema_version
            .split('.')
            .next()
            .and_then(|m| m.parse::<u64>().ok())
            .ok_or_else(|| CliError::config(format!("config: bad schema_version {:?}", cfg.schema_version)))?;
        if major != CONFIG_MAJOR {
            return Err(CliError::config(format!(
                "config: schema major {major} is not supported (expected {CONFIG_MAJOR})"
            )));
        }
        Ok(cfg)
    }

    pub fn primitives(&self) -> Result<Primitives, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::config("config has no [model] section"))?.build()
    }

    pub fn profile_section(&self) -> Result<&ProfileSection, CliError> {
        self.profile.as_ref().ok_or_else(|| CliError::config("config has no [profile] section"))
    }

    pub fn covariate_section(&self) -> Result<&CovariateSection, CliError> {
        self.covariates.as_ref().ok_or_else(|| CliError::config("config has no [covariates] section"))
    }
}
