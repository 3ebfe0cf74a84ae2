//! Spatial densities with respect to Lebesgue measure, plus point atoms.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{self, Quad};
use crate::region::{AxisBox, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpatialDensity {
    Constant { value: f64 },
    /// `c0 + c2·|x|²`
    Quadratic { c0: f64, c2: f64 },
    /// `scale·exp(rate·|x|)`
    Exponential { scale: f64, rate: f64 },
    /// `scale·(1 + |x|²)^(-r)`
    PowerDecay { scale: f64, r: f64 },
    /// `scale·|x|^exponent`; singular at the origin for negative exponents.
    RadialPower { scale: f64, exponent: f64 },
    /// `value` on `region`, zero elsewhere.
    Indicator { region: Region, value: f64 },
}

impl Default for SpatialDensity {
    fn default() -> Self {
        SpatialDensity::Constant { value: 0.0 }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl SpatialDensity {
    pub fn zero() -> Self {
        SpatialDensity::Constant { value: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        SpatialDensity::Constant { value }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                domain(format!("{what} must be finite"))
            }
        };
        match self {
            SpatialDensity::Constant { value } => finite(*value, "constant density"),
            SpatialDensity::Quadratic { c0, c2 } => {
                finite(*c0, "c0")?;
                finite(*c2, "c2")
            }
            SpatialDensity::Exponential { scale, rate } => {
                finite(*scale, "scale")?;
                finite(*rate, "rate")
            }
            SpatialDensity::PowerDecay { scale, r } => {
                finite(*scale, "scale")?;
                finite(*r, "r")
            }
            SpatialDensity::RadialPower { scale, exponent } => {
                finite(*scale, "scale")?;
                finite(*exponent, "exponent")
            }
            SpatialDensity::Indicator { region, value } => {
                finite(*value, "indicator value")?;
                if region.dim != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: region.dim });
                }
                region.validate()
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SpatialDensity::Constant { value } => *value,
            SpatialDensity::Quadratic { c0, c2 } => c0 + c2 * norm2(x),
            SpatialDensity::Exponential { scale, rate } => scale * (rate * norm2(x).sqrt()).exp(),
            SpatialDensity::PowerDecay { scale, r } => scale * (1.0 + norm2(x)).powf(-r),
            SpatialDensity::RadialPower { scale, exponent } => {
                let n = norm2(x).sqrt();
                if n == 0.0 && *exponent < 0.0 {
                    f64::INFINITY
                } else {
                    scale * n.powf(*exponent)
                }
            }
            SpatialDensity::Indicator { region, value } => {
                if region.contains(x) {
                    *value
                } else {
                    0.0
                }
            }
        }
    }

    /// `ln |density(x)|`, computed without overflow for the growing kinds.
    pub fn ln_abs(&self, x: &[f64]) -> f64 {
        let n2 = norm2(x);
        match self {
            SpatialDensity::Constant { value } => value.abs().ln(),
            SpatialDensity::Quadratic { c0, c2 } => (c0 + c2 * n2).abs().ln(),
            SpatialDensity::Exponential { scale, rate } => scale.abs().ln() + rate * n2.sqrt(),
            SpatialDensity::PowerDecay { scale, r } => scale.abs().ln() - r * n2.ln_1p(),
            SpatialDensity::RadialPower { scale, exponent } => scale.abs().ln() + exponent * 0.5 * n2.ln(),
            SpatialDensity::Indicator { .. } => self.value(x).abs().ln(),
        }
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self {
            SpatialDensity::Constant { value } => Some(*value),
            SpatialDensity::Quadratic { c0, c2 } if *c2 == 0.0 => Some(*c0),
            SpatialDensity::Exponential { scale, rate } if *rate == 0.0 || *scale == 0.0 => Some(*scale),
            SpatialDensity::PowerDecay { scale, r } if *r == 0.0 || *scale == 0.0 => Some(*scale),
            SpatialDensity::RadialPower { scale, exponent } if *exponent == 0.0 || *scale == 0.0 => Some(*scale),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.is_constant() == Some(0.0)
            || matches!(self, SpatialDensity::Indicator { value, region } if *value == 0.0 || region.is_empty())
    }

    /// Radial profile `r ↦ density` when the density depends on `|x|` only.
    pub fn radial(&self, r: f64) -> Option<f64> {
        match self {
            SpatialDensity::Indicator { .. } => None,
            _ => Some(self.value(&[r])),
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, SpatialDensity::Indicator { .. })
    }

    /// True when the density cannot take both signs.
    fn sign_definite(&self) -> bool {
        match self {
            SpatialDensity::Quadratic { c0, c2 } => c0 * c2 >= 0.0,
            _ => true,
        }
    }

    /// Upper bound of `|density|` over a closed box.
    pub fn sup_abs_on_box(&self, b: &AxisBox) -> f64 {
        let (near, far) = b.radial_range();
        match self {
            SpatialDensity::Constant { value } => value.abs(),
            SpatialDensity::Quadratic { c0, c2 } => (c0 + c2 * near * near).abs().max((c0 + c2 * far * far).abs()),
            SpatialDensity::Exponential { scale, rate } => {
                scale.abs() * (rate * near).exp().max((rate * far).exp())
            }
            SpatialDensity::PowerDecay { scale, r } => {
                scale.abs() * (1.0 + near * near).powf(-r).max((1.0 + far * far).powf(-r))
            }
            SpatialDensity::RadialPower { scale, exponent } => {
                if *exponent < 0.0 && near == 0.0 {
                    f64::INFINITY
                } else {
                    scale.abs() * near.powf(*exponent).max(far.powf(*exponent))
                }
            }
            SpatialDensity::Indicator { region, value } => {
                if region.intersect_box(b).is_empty() {
                    0.0
                } else {
                    value.abs()
                }
            }
        }
    }

    /// Signed integral over a box.
    pub fn integrate_box(&self, b: &AxisBox) -> Result<Quad> {
        self.integrate_box_mapped(b, false)
    }

    /// Integral of `|density|` over a box.
    pub fn integrate_abs_box(&self, b: &AxisBox) -> Result<Quad> {
        self.integrate_box_mapped(b, true)
    }

    fn integrate_box_mapped(&self, b: &AxisBox, abs: bool) -> Result<Quad> {
        let sgn = |q: Quad| if abs { Quad { value: q.value.abs(), ..q } } else { q };
        let exact = |v: f64| Ok(Quad { value: v, error: 0.0, converged: true });
        match self {
            SpatialDensity::Constant { value } => exact(if abs { value.abs() } else { *value } * b.volume()),
            SpatialDensity::Quadratic { c0, c2 } if !abs || self.sign_definite() => {
                let vol = b.volume();
                let mut s = c0 * vol;
                for j in 0..b.dim() {
                    let (lo, hi) = (b.lo[j], b.hi[j]);
                    s += c2 * (hi.powi(3) - lo.powi(3)) / 3.0 * vol / (hi - lo);
                }
                exact(if abs { s.abs() } else { s })
            }
            SpatialDensity::Indicator { region, value } => {
                let v = region.intersect_box(b).volume() * value;
                exact(if abs { v.abs() } else { v })
            }
            SpatialDensity::RadialPower { scale, exponent } => {
                let (near, _) = b.radial_range();
                let d = b.dim() as f64;
                if near == 0.0 && *exponent <= -d && *scale != 0.0 {
                    return Err(Error::DivergentControlMeasure(format!(
                        "|x|^{exponent} is not integrable at the origin in dimension {}",
                        b.dim()
                    )));
                }
                if b.dim() == 1 {
                    // closed form on each side of the origin
                    let prim = |x: f64| x.powf(exponent + 1.0) / (exponent + 1.0);
                    let (lo, hi) = (b.lo[0], b.hi[0]);
                    let mut v = 0.0;
                    if hi > 0.0 {
                        v += prim(hi) - prim(lo.max(0.0));
                    }
                    if lo < 0.0 {
                        v += prim(-lo) - prim((-hi).max(0.0));
                    }
                    let v = scale * v;
                    return exact(if abs { v.abs() } else { v });
                }
                Ok(sgn(self.cubature(b, abs)))
            }
            _ => Ok(sgn(self.cubature(b, abs))),
        }
    }

    fn cubature(&self, b: &AxisBox, abs: bool) -> Quad {
        quadrature::cubature_box_adaptive(
            |x| {
                let v = self.value(x);
                if abs {
                    v.abs()
                } else {
                    v
                }
            },
            b,
            1e-12,
            1e-11,
        )
    }

    pub fn integrate_region(&self, r: &Region) -> Result<Quad> {
        r.parts.iter().try_fold(Quad::zero(), |acc, b| Ok(acc.add(self.integrate_box(b)?)))
    }

    pub fn integrate_abs_region(&self, r: &Region) -> Result<Quad> {
        r.parts.iter().try_fold(Quad::zero(), |acc, b| Ok(acc.add(self.integrate_abs_box(b)?)))
    }

    pub fn describe(&self) -> String {
        match self {
            SpatialDensity::Constant { value } => format!("{value}"),
            SpatialDensity::Quadratic { c0, c2 } => format!("{c0} + {c2}|x|^2"),
            SpatialDensity::Exponential { scale, rate } => format!("{scale}·exp({rate}|x|)"),
            SpatialDensity::PowerDecay { scale, r } => format!("{scale}·(1+|x|^2)^(-{r})"),
            SpatialDensity::RadialPower { scale, exponent } => format!("{scale}·|x|^{exponent}"),
            SpatialDensity::Indicator { value, .. } => format!("{value} on a region"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: f64,
}

/// A measure given as a Lebesgue density plus finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DensityMeasure {
    #[serde(default)]
    pub density: SpatialDensity,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

impl DensityMeasure {
    pub fn zero() -> Self {
        DensityMeasure::default()
    }

    pub fn lebesgue(scale: f64) -> Self {
        DensityMeasure { density: SpatialDensity::constant(scale), atoms: Vec::new() }
    }

    pub fn from_density(density: SpatialDensity) -> Self {
        DensityMeasure { density, atoms: Vec::new() }
    }

    pub fn validate(&self, dim: usize, nonnegative: bool) -> Result<()> {
        self.density.validate(dim)?;
        for a in &self.atoms {
            if a.location.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: a.location.len() });
            }
            if !a.mass.is_finite() {
                return domain("atom mass must be finite");
            }
            if nonnegative && a.mass < 0.0 {
                return domain("atoms of a nonnegative measure must have nonnegative mass");
            }
        }
        if nonnegative {
            let negative = match &self.density {
                SpatialDensity::Constant { value } => *value < 0.0,
                SpatialDensity::Quadratic { c0, c2 } => *c0 < 0.0 || *c2 < 0.0,
                SpatialDensity::Exponential { scale, .. }
                | SpatialDensity::PowerDecay { scale, .. }
                | SpatialDensity::RadialPower { scale, .. } => *scale < 0.0,
                SpatialDensity::Indicator { value, .. } => *value < 0.0,
            };
            if negative {
                return domain("density of a nonnegative measure must be >= 0");
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.density.is_zero() && self.atoms.iter().all(|a| a.mass == 0.0)
    }

    pub fn atoms_in<'a>(&'a self, r: &'a Region) -> impl Iterator<Item = &'a Atom> + 'a {
        self.atoms.iter().filter(move |a| r.contains(&a.location))
    }

    pub fn measure(&self, r: &Region) -> Result<Quad> {
        let atoms: f64 = self.atoms_in(r).map(|a| a.mass).sum();
        Ok(self.density.integrate_region(r)?.add(Quad { value: atoms, error: 0.0, converged: true }))
    }

    pub fn total_variation(&self, r: &Region) -> Result<Quad> {
        let atoms: f64 = self.atoms_in(r).map(|a| a.mass.abs()).sum();
        Ok(self.density.integrate_abs_region(r)?.add(Quad { value: atoms, error: 0.0, converged: true }))
    }
}
