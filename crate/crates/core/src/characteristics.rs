//! The characteristics triple `(γ, Σ, ν)` and its text-config form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{DensityMeasure, SpatialDensity};
use crate::error::{domain, Error, Result};
use crate::kernel::{JumpKernel, JumpLaw, KernelKind};
use crate::region::Region;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristics {
    pub dim: usize,
    pub gamma: DensityMeasure,
    pub sigma: DensityMeasure,
    pub nu: Option<JumpKernel>,
    /// The set `𝒪` the measure lives on; `None` is all of `ℝ^d`.
    pub domain: Option<Region>,
}

impl Characteristics {
    pub fn new(dim: usize, gamma: DensityMeasure, sigma: DensityMeasure, nu: Option<JumpKernel>) -> Result<Self> {
        let c = Characteristics { dim, gamma, sigma, nu, domain: None };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return domain("dimension must be >= 1");
        }
        self.gamma.validate(self.dim, false)?;
        self.sigma.validate(self.dim, true)?;
        if let Some(k) = &self.nu {
            k.validate(self.dim)?;
        }
        if let Some(d) = &self.domain {
            if d.dim != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: d.dim });
            }
            d.validate()?;
        }
        Ok(())
    }

    pub fn is_atomless(&self) -> bool {
        self.gamma.atoms.is_empty() && self.sigma.atoms.is_empty()
    }

    pub fn is_finite_activity(&self) -> bool {
        self.nu.as_ref().is_none_or(JumpKernel::is_finite_activity)
    }

    /// Lebesgue density of the control measure at `x`.
    pub fn lambda_density(&self, x: &[f64]) -> f64 {
        let jump = self.nu.as_ref().map_or(0.0, |k| k.modulation.value(x) * k.truncated_second_moment());
        self.gamma.density.value(x).abs() + self.sigma.density.value(x) + jump
    }

    pub fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found });
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let g = describe_measure(&self.gamma);
        let s = describe_measure(&self.sigma);
        let n = self.nu.as_ref().map_or("0".to_string(), |k| format!("leb ⊗ {}", k.describe()));
        format!("d = {}; γ = {g}; Σ = {s}; ν = {n}", self.dim)
    }
}

fn describe_measure(m: &DensityMeasure) -> String {
    if m.is_zero() {
        return "0".into();
    }
    let mut out = match m.density.is_constant() {
        Some(c) if c == 1.0 => "leb".to_string(),
        Some(c) => format!("{c}·leb"),
        None => format!("({})·leb", m.density.describe()),
    };
    if !m.atoms.is_empty() {
        out.push_str(&format!(" + {} atom(s)", m.atoms.len()));
    }
    out
}

/// Named characteristics with the parameters that pin them down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Preset {
    GaussianWhiteNoise,
    BalanStable {
        alpha: f64,
        p: f64,
        q: f64,
    },
    MytnikPositive {
        alpha: f64,
    },
    Impulsive {
        zeta: SpatialDensity,
        mu: KernelKind,
    },
    CompoundPoisson {
        rate: f64,
        jumps: JumpLaw,
    },
}

impl Preset {
    /// Parses `name` or `name(arg, ...)`, e.g. `balan-stable(1.5,0.5,0.5)`.
    pub fn parse(s: &str) -> Result<Preset> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) => {
                let inner = s[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unbalanced parentheses in preset '{s}'")))?;
                let args = inner
                    .split(',')
                    .filter(|a| !a.trim().is_empty())
                    .map(|a| parse_number(a.trim()))
                    .collect::<Result<Vec<f64>>>()?;
                (&s[..i], args)
            }
            None => (s, Vec::new()),
        };
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!("preset '{name}' takes {n} argument(s), got {}", args.len())))
            }
        };
        match name {
            "gaussian-white-noise" => {
                want(0)?;
                Ok(Preset::GaussianWhiteNoise)
            }
            "balan-stable" => {
                want(3)?;
                Ok(Preset::BalanStable { alpha: args[0], p: args[1], q: args[2] })
            }
            "mytnik-positive" => {
                want(1)?;
                Ok(Preset::MytnikPositive { alpha: args[0] })
            }
            "impulsive" => {
                // impulsive(ζ-scale, rate, jump) with a constant ζ density and constant jumps
                want(3)?;
                Ok(Preset::Impulsive {
                    zeta: SpatialDensity::constant(args[0]),
                    mu: KernelKind::CompoundPoisson { rate: args[1], jumps: JumpLaw::Constant { value: args[2] } },
                })
            }
            "compound-poisson" => {
                want(2)?;
                Ok(Preset::CompoundPoisson { rate: args[0], jumps: JumpLaw::Constant { value: args[1] } })
            }
            _ => Err(Error::Config(format!("unknown preset '{name}'"))),
        }
    }

    pub fn build(&self, dim: usize) -> Result<Characteristics> {
        let c = match self {
            Preset::GaussianWhiteNoise => Characteristics {
                dim,
                gamma: DensityMeasure::zero(),
                sigma: DensityMeasure::lebesgue(1.0),
                nu: None,
                domain: None,
            },
            Preset::BalanStable { alpha, p, q } => {
                let kernel = JumpKernel::stable(*alpha, *p, *q);
                kernel.validate(dim)?;
                Characteristics {
                    dim,
                    gamma: DensityMeasure::lebesgue(balan_drift(*alpha, p - q)),
                    sigma: DensityMeasure::zero(),
                    nu: Some(kernel),
                    domain: None,
                }
            }
            Preset::MytnikPositive { alpha } => {
                if !(*alpha > 1.0 && *alpha < 2.0) {
                    return domain(format!("mytnik-positive needs α in (1, 2), got {alpha}"));
                }
                let m = mytnik_modulation(*alpha);
                Characteristics {
                    dim,
                    gamma: DensityMeasure::lebesgue(m * alpha / (1.0 - alpha)),
                    sigma: DensityMeasure::zero(),
                    nu: Some(JumpKernel::stable(*alpha, 1.0, 0.0).with_modulation(SpatialDensity::constant(m))),
                    domain: None,
                }
            }
            Preset::Impulsive { zeta, mu } => {
                let kernel = JumpKernel::new(mu.clone()).with_modulation(zeta.clone());
                kernel.validate(dim)?;
                let big = kernel.band_first_moment(1.0, f64::INFINITY);
                if !big.is_finite() {
                    return domain("impulsive preset needs ∫_{|y|>1} |y| μ(dy) < ∞");
                }
                let gamma = if big == 0.0 {
                    DensityMeasure::zero()
                } else {
                    DensityMeasure::from_density(scale_density(zeta, -big))
                };
                Characteristics { dim, gamma, sigma: DensityMeasure::zero(), nu: Some(kernel), domain: None }
            }
            Preset::CompoundPoisson { rate, jumps } => {
                let kernel = JumpKernel::compound_poisson(*rate, jumps.clone());
                kernel.validate(dim)?;
                // γ cancels the built-in compensator so M(t, A) is the raw jump sum
                let small = kernel.band_first_moment(0.0, 1.0);
                Characteristics {
                    dim,
                    gamma: DensityMeasure::lebesgue(small),
                    sigma: DensityMeasure::zero(),
                    nu: Some(kernel),
                    domain: None,
                }
            }
        };
        c.validate()?;
        Ok(c)
    }

    pub fn label(&self) -> String {
        match self {
            Preset::GaussianWhiteNoise => "gaussian-white-noise".into(),
            Preset::BalanStable { alpha, p, q } => format!("balan-stable({alpha},{p},{q})"),
            Preset::MytnikPositive { alpha } => format!("mytnik-positive({alpha})"),
            Preset::Impulsive { .. } => "impulsive".into(),
            Preset::CompoundPoisson { rate, .. } => format!("compound-poisson({rate})"),
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| Error::Config(format!("bad number '{s}'")))?;
        let b: f64 = b.trim().parse().map_err(|_| Error::Config(format!("bad number '{s}'")))?;
        return Ok(a / b);
    }
    s.parse().map_err(|_| Error::Config(format!("bad number '{s}'")))
}

fn scale_density(d: &SpatialDensity, c: f64) -> SpatialDensity {
    match d.clone() {
        SpatialDensity::Constant { value } => SpatialDensity::Constant { value: c * value },
        SpatialDensity::Quadratic { c0, c2 } => SpatialDensity::Quadratic { c0: c * c0, c2: c * c2 },
        SpatialDensity::Exponential { scale, rate } => SpatialDensity::Exponential { scale: c * scale, rate },
        SpatialDensity::PowerDecay { scale, r } => SpatialDensity::PowerDecay { scale: c * scale, r },
        SpatialDensity::RadialPower { scale, exponent } => SpatialDensity::RadialPower { scale: c * scale, exponent },
        SpatialDensity::Indicator { region, value } => SpatialDensity::Indicator { region, value: c * value },
    }
}

/// Drift density `βα/(1−α)` of the Balan stable noise; dropped at `α = 1`.
pub fn balan_drift(alpha: f64, beta: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-15 || beta == 0.0 {
        0.0
    } else {
        beta * alpha / (1.0 - alpha)
    }
}

/// Intensity factor making the one-sided stable kernel's Laplace exponent
/// exactly `u^α`: `1/(αΓ(−α))`.
pub fn mytnik_modulation(alpha: f64) -> f64 {
    1.0 / (alpha * libm::tgamma(-alpha))
}

/// Scale `σ` (Samorodnitsky–Taqqu) of `M(t, A)` under balan-stable(α, p, q):
/// `σ^α = t·leb(A)·C_α`, where `C_α` is the symmetric stable constant.
pub fn balan_scale(alpha: f64, t_leb: f64) -> f64 {
    (t_leb * crate::kernel::stable_constant(alpha)).powf(1.0 / alpha)
}

/// Scale of `M(t, A)` under mytnik-positive(α) in the same parametrisation, β = 1.
pub fn mytnik_scale(alpha: f64, t_leb: f64) -> f64 {
    (t_leb * (PI * alpha / 2.0).cos().abs()).powf(1.0 / alpha)
}

/// Text-config form: either a preset or explicit `(gamma, sigma, nu)` blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicsConfig {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<DensityMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<DensityMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<JumpKernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Region>,
}

impl CharacteristicsConfig {
    pub fn build(&self) -> Result<Characteristics> {
        let explicit = self.gamma.is_some() || self.sigma.is_some() || self.nu.is_some();
        let mut c = match (&self.preset, explicit) {
            (Some(_), true) => {
                return Err(Error::Config("give either a preset or explicit gamma/sigma/nu blocks, not both".into()))
            }
            (Some(p), false) => p.build(self.dim)?,
            (None, _) => Characteristics {
                dim: self.dim,
                gamma: self.gamma.clone().unwrap_or_default(),
                sigma: self.sigma.clone().unwrap_or_default(),
                nu: self.nu.clone(),
                domain: None,
            },
        };
        c.domain = self.domain.clone();
        c.validate()?;
        Ok(c)
    }

    pub fn from_characteristics(c: &Characteristics) -> Self {
        CharacteristicsConfig {
            dim: c.dim,
            preset: None,
            gamma: Some(c.gamma.clone()),
            sigma: Some(c.sigma.clone()),
            nu: c.nu.clone(),
            domain: c.domain.clone(),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balan_presets() {
        let c = Preset::parse("balan-stable(1.5, 0.5, 0.5)").unwrap().build(1).unwrap();
        assert!(c.gamma.is_zero() && c.sigma.is_zero());
        let c = Preset::parse("balan-stable(0.5,1,0)").unwrap().build(1).unwrap();
        assert_eq!(c.gamma.density.is_constant(), Some(1.0));
        assert!(Preset::parse("balan-stable(1,0.7,0.3)").unwrap().build(1).is_err());
        assert!(Preset::parse("nope").is_err());
    }

    #[test]
    fn mytnik_constants() {
        // Γ(−1.5) = 4√π/3
        let g = 4.0 * PI.sqrt() / 3.0;
        assert!((mytnik_modulation(1.5) - 1.0 / (1.5 * g)).abs() < 1e-14);
        assert!((mytnik_modulation(1.5) - 0.282_094_791_773_878).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = CharacteristicsConfig {
            dim: 2,
            preset: None,
            gamma: Some(DensityMeasure::lebesgue(0.5)),
            sigma: Some(DensityMeasure::from_density(SpatialDensity::Quadratic { c0: 1.0, c2: 1.0 })),
            nu: Some(JumpKernel::stable(1.2, 0.3, 0.7)),
            domain: None,
        };
        let s = cfg.to_toml().unwrap();
        assert_eq!(CharacteristicsConfig::from_toml(&s).unwrap(), cfg);
        let preset = "dim = 1\n[preset]\nname = \"balan-stable\"\nalpha = 1.5\np = 0.5\nq = 0.5\n";
        let c = CharacteristicsConfig::from_toml(preset).unwrap().build().unwrap();
        assert!(c.nu.is_some());
        assert!(CharacteristicsConfig::from_toml("dim = 1\nbogus = 3\n").is_err());
    }
}
