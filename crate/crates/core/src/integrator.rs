//! Pathwise integrals `∫ f dM(t, ·)` over a realization, the cylindrical
//! action `L(t)f`, and the cylindrical characteristics `(a, Q, μ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::characteristics::Characteristics;
use crate::error::{domain, Error, Result};
use crate::kernel::{JumpKernel, KernelKind};
use crate::measure::{self, integrate_spatial, Verdict};
use crate::quadrature::{self, compensated_sum, Quad};
use crate::region::Region;
use crate::sampler::{FieldRealization, SmallJumpMode};
use crate::testfn::TestFunction;

/// `Σ α_k 𝟙_{A_k}` with pairwise disjoint `A_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleFunction {
    terms: Vec<(f64, Region)>,
}

impl SimpleFunction {
    pub fn new(terms: Vec<(f64, Region)>) -> Result<Self> {
        if let Some((_, first)) = terms.first() {
            for (_, r) in &terms {
                if r.dim != first.dim {
                    return Err(Error::DimensionMismatch { expected: first.dim, found: r.dim });
                }
                r.validate()?;
            }
        }
        for (i, (_, a)) in terms.iter().enumerate() {
            for (_, b) in &terms[i + 1..] {
                if !a.disjoint_from(b) {
                    return domain("simple function sets must be pairwise disjoint");
                }
            }
        }
        Ok(SimpleFunction { terms })
    }

    pub fn indicator(a: Region) -> Self {
        SimpleFunction { terms: vec![(1.0, a)] }
    }

    pub fn terms(&self) -> &[(f64, Region)] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().find(|(_, r)| r.contains(x)).map_or(0.0, |(c, _)| *c)
    }
}

/// `Σ α_k M(t, A ∩ A_k)`
pub fn integrate_simple(real: &FieldRealization, f: &SimpleFunction, t: f64, a: &Region) -> Result<f64> {
    real.check_query(t, a)?;
    let mut parts = Vec::with_capacity(f.terms.len());
    for (c, r) in &f.terms {
        if *c != 0.0 {
            parts.push(c * real.evaluate(t, &a.intersect(r))?);
        }
    }
    Ok(compensated_sum(parts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralValue {
    pub value: f64,
    /// `t∫_A f dγ − t∫_A∫_{ε<|y|≤1} f(x)y ν(x,dy)dx`
    pub net_drift: f64,
    pub gaussian: f64,
    pub jumps: f64,
    /// Quadrature error of the drift term plus the last Gaussian refinement step.
    pub error: f64,
}

/// The parts of `∫_A f dM(t, ·)` that do not depend on the random inputs.
#[derive(Debug, Clone)]
pub struct IntegralPlan {
    f: TestFunction,
    t: f64,
    region: Region,
    net_drift: Quad,
    eps: f64,
    /// `A ∩ B` when `f = 𝟙_B`; the drift and Gaussian parts are then exact.
    indicator: Option<Region>,
}

/// Gaussian pairings are refined until successive levels agree to this,
/// or until the leaf budget is spent.
const GAUSS_TOL: f64 = 1e-5;
const MAX_PAIRING_LEVEL: usize = 18;

impl IntegralPlan {
    pub fn new(real: &FieldRealization, f: &TestFunction, t: f64, a: &Region) -> Result<Self> {
        real.check_query(t, a)?;
        let chars = real.characteristics();
        chars.check_dim(f.dim())?;
        f.validate()?;
        if !measure::integrability_certified(chars, f, a)? {
            let m = measure::lm_membership(chars, f, Some(a))?;
            if m.verdict == Verdict::NonMember {
                return Err(Error::NotIntegrable(m.evidence));
            }
        }
        let indicator = match f {
            TestFunction::Indicator { region } => Some(a.intersect(region)),
            _ => None,
        };
        let net_drift = match &indicator {
            Some(r) => Quad { value: real.net_drift(t, r)?, error: 0.0, converged: true },
            None => net_drift_integral(chars, f, a, real.compensator_rate())?.scale(t),
        };
        Ok(IntegralPlan { f: f.clone(), t, region: a.clone(), net_drift, eps: real.config().eps, indicator })
    }

    pub fn evaluate(&self, real: &FieldRealization) -> Result<IntegralValue> {
        if real.config().eps != self.eps {
            return Err(Error::Precondition("realization was sampled with a different truncation".into()));
        }
        let (t, a, f) = (self.t, &self.region, &self.f);
        real.check_query(t, a)?;
        let end = real.jumps().partition_point(|j| j.time <= t);
        let jumps = compensated_sum(
            real.jumps()[..end].iter().filter(|j| a.contains(&j.location)).map(|j| f.eval(&j.location) * j.size),
        );
        let (gaussian, gerr) = if let (true, Some(r)) = (real.has_gaussian(), &self.indicator) {
            (real.gaussian(t, r)?, 0.0)
        } else if real.has_gaussian() {
            let step = real.dim() + 1;
            let eval = |x: &[f64]| f.eval(x);
            let mut level = step;
            let mut prev = real.gaussian_pairing(t, a, level, &eval)?;
            loop {
                let next_level = level + step;
                let next = real.gaussian_pairing(t, a, next_level, &eval)?;
                let diff = (next - prev).abs();
                level = next_level;
                prev = next;
                if diff <= GAUSS_TOL * (1.0 + next.abs()) || level + step > MAX_PAIRING_LEVEL.min(real.refine_depth()) {
                    break (next, diff);
                }
            }
        } else {
            (0.0, 0.0)
        };
        let value = compensated_sum([self.net_drift.value, gaussian, jumps]);
        Ok(IntegralValue { value, net_drift: self.net_drift.value, gaussian, jumps, error: self.net_drift.error + gerr })
    }
}

/// `∫_A f(x)(γ(dx) − κ·m(x)dx)` with the jump intensity `m` and compensator rate `κ`.
fn net_drift_integral(chars: &Characteristics, f: &TestFunction, a: &Region, kappa: f64) -> Result<Quad> {
    let gd = &chars.gamma.density;
    let md = chars.nu.as_ref().map(|k| &k.modulation);
    let atoms: f64 = chars.gamma.atoms_in(a).map(|x| f.eval(&x.location) * x.mass).sum();
    let atoms = Quad { value: atoms, error: 0.0, converged: true };
    // equal constant rates cancel exactly, as for a raw compound-Poisson sum
    if let (Some(g), Some(m)) = (gd.is_constant(), md.and_then(|m| m.is_constant())) {
        if g - kappa * m == 0.0 {
            return Ok(atoms);
        }
    }
    if gd.is_zero() && (kappa == 0.0 || md.is_none()) {
        return Ok(atoms);
    }
    let h = |x: &[f64]| {
        let v = f.eval(x);
        if v == 0.0 {
            return 0.0;
        }
        let c = md.map_or(0.0, |m| kappa * m.value(x));
        v * (gd.value(x) - c)
    };
    Ok(integrate_spatial(chars, f, Some(a), &h)?.add(atoms))
}

/// Pathwise `∫_A f dM(t, ·)`.
pub fn integrate(real: &FieldRealization, f: &TestFunction, t: f64, a: &Region) -> Result<IntegralValue> {
    if f.is_zero() {
        real.check_query(t, a)?;
        return Ok(IntegralValue { value: 0.0, net_drift: 0.0, gaussian: 0.0, jumps: 0.0, error: 0.0 });
    }
    IntegralPlan::new(real, f, t, a)?.evaluate(real)
}

/// `L(t)f = ∫ f(x) M(t, dx)` over the sampled window.
pub fn cylindrical_action(real: &FieldRealization, f: &TestFunction, t: f64) -> Result<IntegralValue> {
    let w = real.window().clone();
    integrate(real, f, t, &w)
}

/// Image of `ν(x, dy)dx` under `(x, y) ↦ f(x)y`, as a one-dimensional Lévy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Pushforward {
    Zero,
    /// `μ(s > r) = pos·r^{−α}`, `μ(s < −r) = neg·r^{−α}`.
    Stable { alpha: f64, pos: f64, neg: f64 },
    /// Tail masses on a log-spaced grid of radii.
    Tabulated { radii: Vec<f64>, tail_pos: Vec<f64>, tail_neg: Vec<f64> },
}

impl Pushforward {
    /// `(μ(s > r), μ(s < −r))`
    pub fn tails(&self, r: f64) -> (f64, f64) {
        match self {
            Pushforward::Zero => (0.0, 0.0),
            Pushforward::Stable { alpha, pos, neg } => {
                let t = r.powf(-alpha);
                (pos * t, neg * t)
            }
            Pushforward::Tabulated { radii, tail_pos, tail_neg } => {
                if r <= radii[0] {
                    return (tail_pos[0], tail_neg[0]);
                }
                if r >= radii[radii.len() - 1] {
                    return (0.0, 0.0);
                }
                let i = radii.partition_point(|x| *x <= r);
                let w = (r.ln() - radii[i - 1].ln()) / (radii[i].ln() - radii[i - 1].ln());
                let lerp = |v: &[f64]| v[i - 1] + (v[i] - v[i - 1]) * w;
                (lerp(tail_pos), lerp(tail_neg))
            }
        }
    }

    /// `∫(s² ∧ 1) μ(ds) = ∫₀¹ 2r μ(|s| > r) dr`
    pub fn truncated_second_moment(&self) -> f64 {
        match self {
            Pushforward::Zero => 0.0,
            Pushforward::Stable { alpha, pos, neg } => (pos + neg) * 2.0 / (2.0 - alpha),
            Pushforward::Tabulated { radii, .. } => {
                let tail = |r: f64| {
                    let (p, n) = self.tails(r);
                    p + n
                };
                // below the grid the tail is flat, so that piece is exact
                let r0 = radii[0];
                let head = r0 * r0 * tail(r0);
                let mut breaks: Vec<f64> = radii.iter().map(|r| r.ln()).filter(|l| *l < 0.0).collect();
                breaks.push(0.0);
                let body = quadrature::integrate_pieces(
                    |l| {
                        let r = l.exp();
                        2.0 * r * r * tail(r)
                    },
                    &breaks,
                    1e-15,
                    1e-10,
                );
                head + body.value
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylindricalCharacteristics {
    pub a: f64,
    pub qf: f64,
    pub pushforward: Pushforward,
    pub error_bound: f64,
}

const GRID_LO: f64 = 1e-8;
const GRID_HI: f64 = 1e8;
const PER_DECADE: usize = 10;

/// `(a(f), ⟨Qf, f⟩, μ∘⟨f,·⟩⁻¹)` for the cylindrical process `L(t)f = ∫ f dM(t, ·)`.
pub fn cylindrical_characteristics(chars: &Characteristics, f: &TestFunction) -> Result<CylindricalCharacteristics> {
    chars.check_dim(f.dim())?;
    f.validate()?;
    let mut err = 0.0;
    let restrict = chars.domain.as_ref();
    let gd = &chars.gamma.density;
    let fg = if gd.is_zero() { Quad::zero() } else { integrate_spatial(chars, f, restrict, &|x| f.eval(x) * gd.value(x))? };
    let fg_atoms: f64 = chars.gamma.atoms.iter().map(|a| f.eval(&a.location) * a.mass).sum();
    err += fg.error;
    let sd = &chars.sigma.density;
    let qf = if sd.is_zero() {
        Quad::zero()
    } else {
        integrate_spatial(chars, f, restrict, &|x| f.eval(x).powi(2) * sd.value(x))?
    };
    let q_atoms: f64 = chars.sigma.atoms.iter().map(|a| f.eval(&a.location).powi(2) * a.mass).sum();
    err += qf.error;
    let (correction, pushforward) = match &chars.nu {
        None => (0.0, Pushforward::Zero),
        Some(k) => {
            let corr = if k.is_symmetric() {
                Quad::zero()
            } else {
                integrate_spatial(chars, f, restrict, &|x| {
                    let v = f.eval(x);
                    if v == 0.0 {
                        0.0
                    } else {
                        v * k.modulation.value(x) * k.u_correction(v)
                    }
                })?
            };
            if !corr.value.is_finite() {
                return Err(Error::SymbolDivergent("drift correction integral diverges".into()));
            }
            err += corr.error;
            (corr.value, pushforward_of(chars, k, f)?)
        }
    };
    let a = fg.value + fg_atoms + correction;
    let qf = qf.value + q_atoms;
    if !(a.is_finite() && qf.is_finite()) {
        return Err(Error::SymbolDivergent("cylindrical characteristics are not finite".into()));
    }
    Ok(CylindricalCharacteristics { a, qf: qf.max(0.0), pushforward, error_bound: err })
}

fn pushforward_of(chars: &Characteristics, k: &JumpKernel, f: &TestFunction) -> Result<Pushforward> {
    let restrict = chars.domain.as_ref();
    let side = |sign: f64, h: &dyn Fn(f64) -> f64| -> Result<f64> {
        Ok(integrate_spatial(chars, f, restrict, &|x| {
            let v = f.eval(x) * sign;
            if v <= 0.0 {
                0.0
            } else {
                k.modulation.value(x) * h(v)
            }
        })?
        .value)
    };
    if let KernelKind::Stable { alpha, p, q } = k.kind {
        // y ↦ cy maps ν_α to |c|^α ν_α, with the two sides swapped when c < 0
        let plus = side(1.0, &|v| v.powf(alpha))?;
        let minus = side(-1.0, &|v| v.powf(alpha))?;
        return Ok(Pushforward::Stable { alpha, pos: p * plus + q * minus, neg: q * plus + p * minus });
    }
    // weighted nodes (m(x)·w, f(x)) of the spatial image measure
    let mut nodes = Vec::new();
    for b in pushforward_boxes(chars, f)? {
        for (x, w) in quadrature::cubature_nodes(&b, 8, if b.dim() == 1 { 64 } else { 16 }) {
            let v = f.eval(&x);
            let m = k.modulation.value(&x);
            if v != 0.0 && m > 0.0 {
                nodes.push((w * m, v));
            }
        }
    }
    let base = BaseTails::new(k);
    let decades = (GRID_HI / GRID_LO).log10().round() as usize;
    let n = decades * PER_DECADE + 1;
    let radii: Vec<f64> = (0..n).map(|i| GRID_LO * 10f64.powf(i as f64 / PER_DECADE as f64)).collect();
    let mut tail_pos = Vec::with_capacity(n);
    let mut tail_neg = Vec::with_capacity(n);
    for &r in &radii {
        let mut up = Vec::with_capacity(nodes.len());
        let mut down = Vec::with_capacity(nodes.len());
        for &(w, v) in &nodes {
            let (p, q) = base.tails(r / v.abs());
            let (p, q) = if v > 0.0 { (p, q) } else { (q, p) };
            up.push(w * p);
            down.push(w * q);
        }
        tail_pos.push(compensated_sum(up));
        tail_neg.push(compensated_sum(down));
    }
    Ok(Pushforward::Tabulated { radii, tail_pos, tail_neg })
}

/// Bounded boxes carrying the spatial part of the pushforward.
fn pushforward_boxes(chars: &Characteristics, f: &TestFunction) -> Result<Vec<crate::region::AxisBox>> {
    let mut boxes = f.pieces();
    if let Some(d) = &chars.domain {
        boxes = Some(match boxes {
            Some(bs) => bs.iter().flat_map(|b| d.intersect_box(b).parts).collect(),
            None => d.parts.clone(),
        });
    }
    if let Some(bs) = boxes {
        return Ok(bs);
    }
    // unbounded support: cut where |f| along the first axis drops below 1e-16 of its peak
    let dim = f.dim();
    let peak = f.eval(&vec![0.0; dim]).abs().max(f64::MIN_POSITIVE);
    let mut r = 1.0;
    while r < 1e6 {
        let mut x = vec![0.0; dim];
        x[0] = r;
        if f.eval(&x).abs() < 1e-16 * peak {
            return Ok(vec![crate::region::AxisBox::cube(dim, -r, r)]);
        }
        r *= 2.0;
    }
    Err(Error::Unsupported("tabulated pushforward needs a test function with bounded or fast-decaying support".into()))
}

/// `ν₀(y > s)` and `ν₀(y < −s)` tabulated on a log grid, log-linear in between.
struct BaseTails {
    ln_s: Vec<f64>,
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl BaseTails {
    fn new(k: &JumpKernel) -> Self {
        let n = 24 * 40 + 1;
        let ln_s: Vec<f64> = (0..n).map(|i| (1e-12f64).ln() + i as f64 * 10f64.ln() / 40.0).collect();
        let (pos, neg) = ln_s.iter().map(|l| k.side_tails(l.exp())).unzip();
        BaseTails { ln_s, pos, neg }
    }

    fn tails(&self, s: f64) -> (f64, f64) {
        let l = s.ln();
        let n = self.ln_s.len();
        if l <= self.ln_s[0] {
            return (self.pos[0], self.neg[0]);
        }
        if l >= self.ln_s[n - 1] {
            return (0.0, 0.0);
        }
        let step = self.ln_s[1] - self.ln_s[0];
        let i = (((l - self.ln_s[0]) / step) as usize).min(n - 2);
        let w = (l - self.ln_s[i]) / step;
        let lerp = |v: &[f64]| v[i] + (v[i + 1] - v[i]) * w;
        (lerp(&self.pos), lerp(&self.neg))
    }
}

/// `∫ m(x)·∫(1 ∧ f(x)²y²) ν₀(dy) dx`, the double integral the pushforward's
/// truncated second moment must reproduce.
pub fn pushforward_mass_direct(chars: &Characteristics, f: &TestFunction) -> Result<f64> {
    let Some(k) = &chars.nu else { return Ok(0.0) };
    Ok(integrate_spatial(chars, f, chars.domain.as_ref(), &|x| {
        let v = f.eval(x);
        if v == 0.0 {
            0.0
        } else {
            k.modulation.value(x) * k.k2(v)
        }
    })?
    .value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCf {
    pub u: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `2/√n`, applied to real and imaginary parts separately.
    pub radius: f64,
}

/// `(1/n)Σ e^{iuX_j}` on a grid of `u`.
pub fn empirical_cf(samples: &[f64], us: &[f64]) -> Result<EmpiricalCf> {
    if samples.is_empty() {
        return Err(Error::Precondition("empirical characteristic function of an empty sample".into()));
    }
    if samples.len() < 2 {
        return Err(Error::Precondition("empirical characteristic function needs n >= 2".into()));
    }
    let n = samples.len() as f64;
    let values = us
        .iter()
        .map(|&u| {
            let re = compensated_sum(samples.iter().map(|x| (u * x).cos())) / n;
            let im = compensated_sum(samples.iter().map(|x| (u * x).sin())) / n;
            Complex64::new(re, im)
        })
        .collect();
    Ok(EmpiricalCf { u: us.to_vec(), values, radius: 2.0 / n.sqrt() })
}

/// Lévy symbol of `∫ f dM(t, ·)` as simulated with truncation `ε`: the jumps
/// with `|y| ≤ ε` are dropped, or replaced by their Gaussian surrogate.
pub fn truncated_symbol(
    chars: &Characteristics,
    f: &TestFunction,
    u: f64,
    t: f64,
    eps: f64,
    mode: SmallJumpMode,
) -> Result<Complex64> {
    let full = measure::levy_symbol_of_integral(chars, f, u, t)?.value;
    let Some(k) = &chars.nu else { return Ok(full) };
    if eps == 0.0 || u == 0.0 {
        return Ok(full);
    }
    let restrict = chars.domain.as_ref();
    let part = |im: bool| -> Result<f64> {
        Ok(integrate_spatial(chars, f, restrict, &|x| {
            let v = f.eval(x);
            if v == 0.0 {
                return 0.0;
            }
            let s = k.symbol_small(u * v, eps);
            k.modulation.value(x) * if im { s.im } else { s.re }
        })?
        .value)
    };
    let dropped = Complex64::new(part(false)?, if k.is_symmetric() { 0.0 } else { part(true)? });
    let mut out = full - dropped * t;
    if mode == SmallJumpMode::GaussianSubstitute {
        let s2 = k.small_second_moment(eps);
        let f2m = integrate_spatial(chars, f, restrict, &|x| f.eval(x).powi(2) * k.modulation.value(x))?.value;
        out -= Complex64::new(0.5 * u * u * t * s2 * f2m, 0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::Preset;
    use crate::kernel::JumpLaw;
    use crate::region::AxisBox;
    use crate::sampler::{sample_field, JumpRecord, SamplerConfig};

    fn cp_realization(jumps: Vec<JumpRecord>) -> FieldRealization {
        let chars = Preset::CompoundPoisson { rate: 1.0, jumps: JumpLaw::Constant { value: 5.0 } }.build(1).unwrap();
        let cfg = SamplerConfig::new(1, Region::unit(1)).with_eps(0.0);
        sample_field(&chars, &cfg).unwrap().with_jumps(jumps)
    }

    #[test]
    fn single_jump_simple_integral() {
        let r = cp_realization(vec![JumpRecord { time: 0.4, location: vec![0.3], size: 5.0, compensated: false }]);
        let f = SimpleFunction::new(vec![(7.0, Region::unit(1))]).unwrap();
        assert_eq!(integrate_simple(&r, &f, 1.0, &Region::unit(1)).unwrap(), 35.0);
        assert_eq!(integrate_simple(&r, &f, 0.3, &Region::unit(1)).unwrap(), 0.0);
    }

    #[test]
    fn simple_sets_must_be_disjoint() {
        let a = Region::interval(0.0, 0.6).unwrap();
        let b = Region::interval(0.5, 1.0).unwrap();
        assert!(SimpleFunction::new(vec![(1.0, a), (2.0, b)]).is_err());
    }

    #[test]
    fn outside_window_is_rejected() {
        let r = cp_realization(vec![]);
        let f = SimpleFunction::indicator(Region::unit(1));
        let err = integrate_simple(&r, &f, 1.0, &Region::interval(0.5, 1.5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::OutOfWindow(_)));
    }

    #[test]
    fn smooth_integral_is_jump_sum() {
        let jumps = vec![
            JumpRecord { time: 0.2, location: vec![0.25], size: 5.0, compensated: false },
            JumpRecord { time: 0.7, location: vec![0.8], size: 5.0, compensated: false },
        ];
        let r = cp_realization(jumps);
        let f = TestFunction::Gaussian { center: vec![0.0], scale: 1.0 };
        let v = integrate(&r, &f, 1.0, &Region::unit(1)).unwrap();
        let direct = 5.0 * f.eval(&[0.25]) + 5.0 * f.eval(&[0.8]);
        assert!((v.value - direct).abs() <= 1e-14 * direct);
        assert_eq!(integrate(&r, &TestFunction::Zero { dim: 1 }, 1.0, &Region::unit(1)).unwrap().value, 0.0);
    }

    #[test]
    fn gaussian_pairing_converges() {
        let chars = Preset::GaussianWhiteNoise.build(1).unwrap();
        let r = sample_field(&chars, &SamplerConfig::new(4, Region::unit(1))).unwrap();
        let ind = TestFunction::indicator(Region::unit(1));
        let v = integrate(&r, &ind, 1.0, &Region::unit(1)).unwrap();
        assert!((v.value - r.evaluate(1.0, &Region::unit(1)).unwrap()).abs() < 1e-12);
        let g = TestFunction::Gaussian { center: vec![0.5], scale: 0.3 };
        let v = integrate(&r, &g, 1.0, &Region::unit(1)).unwrap();
        assert!(v.error < 1e-2, "{v:?}");
    }

    #[test]
    fn cylindrical_drift_and_quadratic_form() {
        let chars = Preset::BalanStable { alpha: 1.5, p: 0.5, q: 0.5 }.build(1).unwrap();
        let cc = cylindrical_characteristics(&chars, &TestFunction::indicator(Region::unit(1))).unwrap();
        assert_eq!(cc.a, 0.0);
        let g = Preset::GaussianWhiteNoise.build(1).unwrap();
        let f = TestFunction::indicator(Region::interval(0.0, 0.5).unwrap());
        let f = TestFunction::Combination { terms: vec![(2.0, f)] };
        assert!((cylindrical_characteristics(&g, &f).unwrap().qf - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stable_pushforward_scales_by_c_alpha() {
        let chars = Preset::BalanStable { alpha: 1.2, p: 0.7, q: 0.3 }.build(1).unwrap();
        let a = Region::from_box(AxisBox::new(vec![0.0], vec![0.5]).unwrap());
        let f = TestFunction::Combination { terms: vec![(-3.0, TestFunction::indicator(a))] };
        let cc = cylindrical_characteristics(&chars, &f).unwrap();
        let Pushforward::Stable { alpha, pos, neg } = cc.pushforward else { panic!() };
        let scale = 0.5 * 3f64.powf(1.2);
        assert_eq!(alpha, 1.2);
        assert!((pos - 0.3 * scale).abs() < 1e-10 && (neg - 0.7 * scale).abs() < 1e-10);
    }

    #[test]
    fn tabulated_pushforward_mass_matches_double_integral() {
        let chars = Preset::CompoundPoisson { rate: 2.0, jumps: JumpLaw::Normal { mean: 0.3, sd: 1.0 } }.build(1).unwrap();
        let f = TestFunction::Bump { center: vec![0.0], radius: 1.0, power: Some(3) };
        let cc = cylindrical_characteristics(&chars, &f).unwrap();
        let direct = pushforward_mass_direct(&chars, &f).unwrap();
        let tab = cc.pushforward.truncated_second_moment();
        assert!((tab - direct).abs() < 1e-3 * direct, "{tab} vs {direct}");
    }

    #[test]
    fn empirical_cf_basics() {
        let e = empirical_cf(&[0.0, 0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert!(e.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        assert!(empirical_cf(&[1.0], &[1.0]).is_err());
        assert!(empirical_cf(&[], &[1.0]).is_err());
    }
}
