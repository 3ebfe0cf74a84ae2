//! Test functions on `ℝ^d` with closed-form mixed partials `∂^d f / ∂x₁⋯∂x_d`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::region::{AxisBox, Region};

/// One-dimensional factor of a product test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Factor {
    /// `(1 − (x−c)²/R²)^k` on `|x − c| < R`; exponential bump when `power` is absent.
    Bump { center: f64, radius: f64, power: Option<u32> },
    Gaussian { center: f64, scale: f64 },
    Indicator { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    /// Radial bump `φ(|x−c|²)`: polynomial `(1 − s/R²)^k_+` or, without
    /// `power`, the smooth `exp(1 − 1/(1 − s/R²))`.
    Bump { center: Vec<f64>, radius: f64, power: Option<u32> },
    Gaussian { center: Vec<f64>, scale: f64 },
    /// `(1 + |x|²)^{-r}`
    PolyDecay { dim: usize, r: f64 },
    Indicator { region: Region },
    Product { factors: Vec<Factor> },
    /// Finite linear combination.
    Combination { terms: Vec<(f64, TestFunction)> },
    Zero { dim: usize },
}

/// Radial profile `φ(s)`, `s = |x − c|²`, and its derivatives.
#[derive(Debug, Clone, Copy)]
enum Profile {
    PolyBump { r2: f64, k: u32 },
    ExpBump { r2: f64 },
    Gauss { s2: f64 },
    Decay { r: f64 },
}

impl Profile {
    fn ln_value(&self, s: f64) -> f64 {
        match *self {
            Profile::PolyBump { r2, k } => k as f64 * (1.0 - s / r2).max(0.0).ln(),
            Profile::ExpBump { r2 } => {
                let w = s / r2;
                if w >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    1.0 - 1.0 / (1.0 - w)
                }
            }
            Profile::Gauss { s2 } => -s / (2.0 * s2),
            Profile::Decay { r } => -r * s.ln_1p(),
        }
    }

    fn deriv(&self, s: f64, n: u32) -> f64 {
        match *self {
            Profile::PolyBump { r2, k } => {
                let w = 1.0 - s / r2;
                if w <= 0.0 || n > k {
                    return 0.0;
                }
                let mut c = 1.0;
                for j in 0..n {
                    c *= (k - j) as f64;
                }
                c * (-1.0 / r2).powi(n as i32) * w.powi((k - n) as i32)
            }
            Profile::ExpBump { r2 } => {
                let w = s / r2;
                if w >= 1.0 {
                    return 0.0;
                }
                let v = 1.0 / (1.0 - w);
                let g = (1.0 - v).exp();
                // g^{(n)}(w) = g · P_n(v) with P_{n+1} = v²(P_n' − P_n)
                let mut p = vec![1.0];
                for _ in 0..n {
                    let mut next = vec![0.0; p.len() + 2];
                    for (i, c) in p.iter().enumerate() {
                        if i > 0 {
                            next[i - 1 + 2] += i as f64 * c;
                        }
                        next[i + 2] -= c;
                    }
                    p = next;
                }
                let poly: f64 = p.iter().rev().fold(0.0, |acc, c| acc * v + c);
                g * poly / r2.powi(n as i32)
            }
            Profile::Gauss { s2 } => {
                let c = -1.0 / (2.0 * s2);
                c.powi(n as i32) * (c * s).exp()
            }
            Profile::Decay { r } => {
                let mut c = 1.0;
                for j in 0..n {
                    c *= -r - j as f64;
                }
                c * (1.0 + s).powf(-r - n as f64)
            }
        }
    }
}

impl Factor {
    fn eval(&self, x: f64) -> f64 {
        self.deriv(x, 0)
    }

    fn deriv(&self, x: f64, n: u32) -> f64 {
        match *self {
            Factor::Bump { center, radius, power } => {
                let t = x - center;
                let prof = match power {
                    Some(k) => Profile::PolyBump { r2: radius * radius, k },
                    None => Profile::ExpBump { r2: radius * radius },
                };
                radial_1d(prof, t, n)
            }
            Factor::Gaussian { center, scale } => radial_1d(Profile::Gauss { s2: scale * scale }, x - center, n),
            Factor::Indicator { lo, hi } => {
                if n == 0 && x > lo && x <= hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Factor::Bump { center, radius, .. } => Some((center - radius, center + radius)),
            Factor::Indicator { lo, hi } => Some((lo, hi)),
            Factor::Gaussian { .. } => None,
        }
    }
}

/// n-th derivative of `t ↦ φ(t²)` via Faà di Bruno for the square map.
fn radial_1d(p: Profile, t: f64, n: u32) -> f64 {
    // d^n/dt^n φ(t²) = Σ_k n!/(k!(n−2k)!) (2t)^{n−2k} φ^{(n−k)}(t²)
    let mut s = 0.0;
    let mut k = 0;
    while 2 * k <= n {
        let c = factorial(n) / (factorial(k) * factorial(n - 2 * k));
        s += c * (2.0 * t).powi((n - 2 * k) as i32) * p.deriv(t * t, n - k);
        k += 1;
    }
    s
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Bump { center, .. } | TestFunction::Gaussian { center, .. } => center.len(),
            TestFunction::PolyDecay { dim, .. } | TestFunction::Zero { dim } => *dim,
            TestFunction::Indicator { region } => region.dim,
            TestFunction::Product { factors } => factors.len(),
            TestFunction::Combination { terms } => terms.first().map_or(1, |t| t.1.dim()),
        }
    }

    pub fn indicator(region: Region) -> Self {
        TestFunction::Indicator { region }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::Bump { center, radius, .. } => {
                if center.is_empty() || !(*radius > 0.0 && radius.is_finite()) {
                    return domain("bump needs a center and a positive radius");
                }
            }
            TestFunction::Gaussian { center, scale } => {
                if center.is_empty() || !(*scale > 0.0 && scale.is_finite()) {
                    return domain("gaussian needs a center and a positive scale");
                }
            }
            TestFunction::PolyDecay { dim, r } => {
                if *dim == 0 || !(*r >= 0.0 && r.is_finite()) {
                    return domain("poly-decay needs dim >= 1 and r >= 0");
                }
            }
            TestFunction::Indicator { region } => region.validate()?,
            TestFunction::Product { factors } => {
                if factors.is_empty() {
                    return domain("product needs at least one factor");
                }
            }
            TestFunction::Combination { terms } => {
                let d = self.dim();
                for (_, t) in terms {
                    t.validate()?;
                    if t.dim() != d {
                        return Err(Error::DimensionMismatch { expected: d, found: t.dim() });
                    }
                }
            }
            TestFunction::Zero { dim } => {
                if *dim == 0 {
                    return domain("dimension must be >= 1");
                }
            }
        }
        Ok(())
    }

    fn profile(&self) -> Option<(Profile, Vec<f64>)> {
        match self {
            TestFunction::Bump { center, radius, power } => {
                let r2 = radius * radius;
                let p = match power {
                    Some(k) => Profile::PolyBump { r2, k: *k },
                    None => Profile::ExpBump { r2 },
                };
                Some((p, center.clone()))
            }
            TestFunction::Gaussian { center, scale } => Some((Profile::Gauss { s2: scale * scale }, center.clone())),
            TestFunction::PolyDecay { dim, r } => Some((Profile::Decay { r: *r }, vec![0.0; *dim])),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if let Some((p, c)) = self.profile() {
            let s: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            return p.deriv(s, 0);
        }
        match self {
            TestFunction::Indicator { region } => {
                if region.contains(x) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Product { factors } => factors.iter().zip(x).map(|(f, v)| f.eval(*v)).product(),
            TestFunction::Combination { terms } => terms.iter().map(|(c, t)| c * t.eval(x)).sum(),
            _ => 0.0,
        }
    }

    /// `ln |f(x)|`, exact far into the tails where `f` underflows.
    pub fn ln_abs_eval(&self, x: &[f64]) -> f64 {
        if let Some((p, c)) = self.profile() {
            let s: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            return p.ln_value(s);
        }
        self.eval(x).abs().ln()
    }

    /// `∂^d f/∂x₁⋯∂x_d` at `x`.
    pub fn mixed_partial(&self, x: &[f64]) -> Result<f64> {
        let d = x.len() as u32;
        if let Some((p, c)) = self.profile() {
            let s: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            let prod: f64 = x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).product();
            return Ok(p.deriv(s, d) * prod);
        }
        match self {
            TestFunction::Indicator { .. } => {
                Err(Error::Unsupported("indicator functions have no classical mixed partial".into()))
            }
            TestFunction::Product { factors } => {
                if factors.iter().any(|f| matches!(f, Factor::Indicator { .. })) {
                    return Err(Error::Unsupported("indicator factors have no classical derivative".into()));
                }
                Ok(factors.iter().zip(x).map(|(f, v)| f.deriv(*v, 1)).product())
            }
            TestFunction::Combination { terms } => {
                terms.iter().try_fold(0.0, |acc, (c, t)| Ok(acc + c * t.mixed_partial(x)?))
            }
            _ => Ok(0.0),
        }
    }

    /// Closed box outside which `f` vanishes, if any.
    pub fn support(&self) -> Option<AxisBox> {
        match self {
            TestFunction::Bump { center, radius, .. } => Some(AxisBox {
                lo: center.iter().map(|c| c - radius).collect(),
                hi: center.iter().map(|c| c + radius).collect(),
                closure: None,
            }),
            TestFunction::Indicator { region } => region.bounding_box(),
            TestFunction::Product { factors } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for f in factors {
                    let (a, b) = f.support()?;
                    lo.push(a);
                    hi.push(b);
                }
                Some(AxisBox { lo, hi, closure: None })
            }
            TestFunction::Combination { terms } => {
                let boxes: Option<Vec<AxisBox>> = terms.iter().map(|t| t.1.support()).collect();
                let boxes = boxes?;
                let first = boxes.first()?.clone();
                Some(boxes.iter().skip(1).fold(first, |acc, b| AxisBox {
                    lo: acc.lo.iter().zip(&b.lo).map(|(x, y)| x.min(*y)).collect(),
                    hi: acc.hi.iter().zip(&b.hi).map(|(x, y)| x.max(*y)).collect(),
                    closure: None,
                }))
            }
            TestFunction::Zero { dim } => Some(AxisBox::cube(*dim, -1.0, 1.0)),
            _ => None,
        }
    }

    /// Upper bound on `sup |f|`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            TestFunction::Combination { terms } => terms.iter().map(|(c, t)| c.abs() * t.sup_abs()).sum(),
            TestFunction::Zero { .. } => 0.0,
            TestFunction::Indicator { region } if region.is_empty() => 0.0,
            // every profile and factor peaks at 1
            _ => 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TestFunction::Zero { .. } => true,
            TestFunction::Combination { terms } => terms.iter().all(|(c, t)| *c == 0.0 || t.is_zero()),
            TestFunction::Indicator { region } => region.is_empty(),
            _ => false,
        }
    }

    /// `f(x) = φ(|x|)` about the origin: lets integrals over `ℝ^d` reduce to radial ones.
    pub fn is_radial_about_origin(&self) -> bool {
        match self.profile() {
            Some((_, c)) => c.iter().all(|v| *v == 0.0),
            None => matches!(self, TestFunction::Zero { .. }),
        }
    }

    /// Sub-boxes on which `f` is smooth, covering its support; used to place
    /// quadrature breakpoints.
    pub fn pieces(&self) -> Option<Vec<AxisBox>> {
        match self {
            TestFunction::Indicator { region } => Some(region.parts.clone()),
            _ => self.support().map(|b| vec![b]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_mixed(f: &TestFunction, x: &[f64], h: f64) -> f64 {
        let d = x.len();
        let mut s = 0.0;
        for mask in 0..(1u32 << d) {
            let mut y = x.to_vec();
            let mut sign = 1.0;
            for (j, yj) in y.iter_mut().enumerate() {
                if mask & (1 << j) != 0 {
                    *yj += h;
                } else {
                    *yj -= h;
                    sign = -sign;
                }
            }
            s += sign * f.eval(&y);
        }
        s / (2.0 * h).powi(d as i32)
    }

    #[test]
    fn mixed_partials_match_finite_differences() {
        let fns = [
            TestFunction::Bump { center: vec![0.1, -0.2], radius: 1.3, power: Some(6) },
            TestFunction::Bump { center: vec![0.0, 0.0, 0.1], radius: 1.0, power: None },
            TestFunction::Gaussian { center: vec![0.3], scale: 0.7 },
            TestFunction::PolyDecay { dim: 2, r: 1.5 },
            TestFunction::Product {
                factors: vec![
                    Factor::Bump { center: 0.0, radius: 1.0, power: None },
                    Factor::Gaussian { center: 0.2, scale: 0.5 },
                ],
            },
        ];
        for f in &fns {
            let d = f.dim();
            let x: Vec<f64> = (0..d).map(|j| 0.21 + 0.13 * j as f64).collect();
            let exact = f.mixed_partial(&x).unwrap();
            let e1 = (fd_mixed(f, &x, 1e-2) - exact).abs();
            let e2 = (fd_mixed(f, &x, 5e-3) - exact).abs();
            // central differences: error shrinks ≈ 4× per halving
            assert!(e2 < 1e-5 || e1 / e2 > 3.0, "{f:?}: {e1} {e2}");
            assert!(e2 < 1e-3 * exact.abs().max(1.0), "{f:?}: {exact} err {e2}");
        }
    }

    #[test]
    fn bump_vanishes_outside_ball() {
        let f = TestFunction::Bump { center: vec![0.5, 0.5], radius: 0.2, power: None };
        assert_eq!(f.eval(&[0.5, 0.71]), 0.0);
        assert_eq!(f.mixed_partial(&[0.5, 0.71]).unwrap(), 0.0);
        assert!((f.eval(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indicator_has_no_classical_derivative() {
        let f = TestFunction::indicator(Region::unit(1));
        assert!(f.mixed_partial(&[0.5]).is_err());
    }
}
