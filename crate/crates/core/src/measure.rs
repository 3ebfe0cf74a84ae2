//! Analytic quantities of a characteristics triple: control measure, Lévy symbol
//! of `∫f dM`, the modular `Φ_M`, integrability and temperedness tests, and the
//! stationarity and Besov classifiers.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::characteristics::Characteristics;
use crate::error::{domain, Error, Result};
use crate::kernel::JumpKernel;
use crate::quadrature::{self, Quad};
use crate::region::{AxisBox, Region};
use crate::testfn::TestFunction;

/// Comparison tolerances for analytic values: absolute `1e-9` or relative `1e-7`,
/// whichever is looser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-9, rel: 1e-7 }
    }
}

impl Tolerance {
    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.abs.max(self.rel * a.abs().max(b.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlMeasureValue {
    pub value: f64,
    pub tv_gamma: f64,
    pub sigma_mass: f64,
    pub jump_mass: f64,
    pub error_bound: f64,
}

/// `λ(A) = ‖γ‖_TV(A) + Σ(A) + ∫_A∫(|y|²∧1) ν`.
pub fn control_measure(chars: &Characteristics, a: &Region) -> Result<ControlMeasureValue> {
    chars.check_dim(a.dim)?;
    a.validate()?;
    let tv = chars.gamma.total_variation(a)?;
    let sig = chars.sigma.measure(a)?;
    let jump = match &chars.nu {
        Some(k) => k.modulation.integrate_region(a)?.scale(k.truncated_second_moment()),
        None => Quad::zero(),
    };
    let parts = [tv, sig, jump];
    if parts.iter().any(|q| !q.value.is_finite()) {
        return Err(Error::DivergentControlMeasure("a density is not integrable on the region".into()));
    }
    let total = tv.add(sig).add(jump);
    Ok(ControlMeasureValue {
        value: tv.value + sig.value + jump.value,
        tv_gamma: tv.value,
        sigma_mass: sig.value,
        jump_mass: jump.value,
        error_bound: total.error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevySymbolValue {
    pub value: Complex64,
    /// `iu·t∫f dγ`
    pub drift: Complex64,
    /// `−½u²·t∫f² dΣ`
    pub gaussian: f64,
    pub jump: Complex64,
    pub error_bound: f64,
}

/// Lévy symbol of `∫ f dM(t, ·)` at `u`.
pub fn levy_symbol_of_integral(chars: &Characteristics, f: &TestFunction, u: f64, t: f64) -> Result<LevySymbolValue> {
    chars.check_dim(f.dim())?;
    if !(t >= 0.0) {
        return domain("time must be >= 0");
    }
    let zero = Complex64::new(0.0, 0.0);
    if u == 0.0 || t == 0.0 || f.is_zero() {
        return Ok(LevySymbolValue { value: zero, drift: zero, gaussian: 0.0, jump: zero, error_bound: 0.0 });
    }
    let plan = SpatialPlan::new(chars, f, None)?;
    let gd = &chars.gamma.density;
    let sd = &chars.sigma.density;
    let mut err = 0.0;
    let mut fgamma = if gd.is_zero() { Quad::zero() } else { plan.integrate(&|x| f.eval(x) * gd.value(x))? };
    let atoms_g: f64 = chars.gamma.atoms.iter().map(|a| f.eval(&a.location) * a.mass).sum();
    fgamma.value += atoms_g;
    err += fgamma.error;
    let mut f2sigma = if sd.is_zero() {
        Quad::zero()
    } else {
        plan.integrate(&|x| {
            let v = f.eval(x);
            v * v * sd.value(x)
        })?
    };
    f2sigma.value += chars.sigma.atoms.iter().map(|a| f.eval(&a.location).powi(2) * a.mass).sum::<f64>();
    err += f2sigma.error;
    let jump = match &chars.nu {
        Some(k) => {
            let re = plan.integrate(&|x| {
                let v = f.eval(x);
                if v == 0.0 {
                    0.0
                } else {
                    k.modulation.value(x) * k.symbol(u * v).re
                }
            })?;
            let im = if k.is_symmetric() {
                Quad::zero()
            } else {
                plan.integrate(&|x| {
                    let v = f.eval(x);
                    if v == 0.0 {
                        0.0
                    } else {
                        k.modulation.value(x) * k.symbol(u * v).im
                    }
                })?
            };
            err += re.error + im.error;
            if !(re.value.is_finite() && im.value.is_finite()) {
                return Err(Error::SymbolDivergent("jump integral is not finite".into()));
            }
            Complex64::new(re.value, im.value)
        }
        None => zero,
    };
    let drift = Complex64::new(0.0, t * u * fgamma.value);
    let gaussian = -0.5 * u * u * t * f2sigma.value;
    let jump = jump * t;
    if !(drift.im.is_finite() && gaussian.is_finite()) {
        return Err(Error::SymbolDivergent("drift or Gaussian integral is not finite".into()));
    }
    Ok(LevySymbolValue { value: drift + gaussian + jump, drift, gaussian, jump, error_bound: t * err })
}

/// `sup_{c∈[0,1]} |U(cu, x)|` times the control density, with `U(v,x)·ℓ(x) = v(a₀(x) + m(x)·κ_U(v))`.
fn u_sup(a0: f64, m: f64, kernel: Option<&JumpKernel>, u: f64) -> f64 {
    let k = match kernel {
        Some(k) if m != 0.0 && !k.is_symmetric() => k,
        _ => return u * a0.abs(),
    };
    let h = |c: f64| {
        let v = c * u;
        (v * (a0 + m * k.u_correction(v))).abs()
    };
    let max_level = if matches!(k.kind, crate::kernel::KernelKind::Stable { .. }) { 16 } else { 10 };
    let mut best = h(1.0).max(h(0.5));
    for level in 2..=max_level {
        let n = 1u32 << level;
        let mut m_level = best;
        for i in (1..n).step_by(2) {
            m_level = m_level.max(h(i as f64 / n as f64));
        }
        let done = level >= 4 && (m_level - best).abs() < 1e-9;
        best = m_level;
        if done {
            break;
        }
    }
    best
}

/// `Φ_M(u, x)·ℓ(x)` where `ℓ` is the Lebesgue density of `λ`; zero where `ℓ` is.
pub fn phi_m_density(chars: &Characteristics, u: f64, x: &[f64]) -> f64 {
    let u = u.abs();
    if u == 0.0 {
        return 0.0;
    }
    let a0 = chars.gamma.density.value(x);
    let g0 = chars.sigma.density.value(x);
    let (m, kernel) = match &chars.nu {
        Some(k) => (k.modulation.value(x), Some(k)),
        None => (0.0, None),
    };
    let jump = if m == 0.0 { 0.0 } else { m * kernel.unwrap().k2(u) };
    u_sup(a0, m, kernel, u) + u * u * g0 + jump
}

/// `Φ_M(u, x) = sup_{|c|≤1}|U(cu,x)| + u²g(x) + ∫(1∧|uy|²)ρ(x,dy)`, with the
/// derivatives `a, g, ρ` taken with respect to `λ`.
pub fn phi_m(chars: &Characteristics, u: f64, x: &[f64]) -> Result<f64> {
    chars.check_dim(x.len())?;
    // atoms of γ or Σ carry their own λ-mass
    let at = |m: &crate::density::DensityMeasure| -> f64 {
        m.atoms.iter().filter(|a| a.location == x).map(|a| a.mass).sum()
    };
    let (ga, sa) = (at(&chars.gamma), at(&chars.sigma));
    if ga != 0.0 || sa != 0.0 {
        let lam = ga.abs() + sa;
        return Ok((u.abs() * ga.abs() + u * u * sa) / lam);
    }
    let ell = chars.lambda_density(x);
    if ell == 0.0 || !ell.is_finite() {
        return Err(Error::UndefinedDensity { point: x.to_vec() });
    }
    Ok(phi_m_density(chars, u, x) / ell)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Member,
    NonMember,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub verdict: Verdict,
    /// `∫Φ_M(|f|, x) λ(dx)` when finite (partial sum otherwise).
    pub value: f64,
    /// Bound on the neglected tail beyond the last shell.
    pub tail_bound: f64,
    pub shells: usize,
    pub evidence: String,
}

/// Shell-based divergence detection settings.
#[derive(Debug, Clone, Copy)]
pub struct ShellPolicy {
    pub k_min: usize,
    pub k_max: usize,
    pub window: usize,
    pub ratio_margin: f64,
}

impl Default for ShellPolicy {
    fn default() -> Self {
        ShellPolicy { k_min: 16, k_max: 200, window: 4, ratio_margin: 1e-3 }
    }
}

/// How an integral of a function over the domain of `f` is computed.
struct SpatialPlan {
    boxes: Option<Vec<AxisBox>>,
    radial: bool,
    dim: usize,
}

impl SpatialPlan {
    fn new(chars: &Characteristics, f: &TestFunction, restrict: Option<&Region>) -> Result<Self> {
        let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); chars.dim];
        for d in density_regions(chars) {
            for b in &d.parts {
                for j in 0..chars.dim {
                    cuts[j].push(b.lo[j]);
                    cuts[j].push(b.hi[j]);
                }
            }
        }
        let mut bounded: Option<Vec<AxisBox>> = f.pieces();
        for r in [restrict, chars.domain.as_ref()].into_iter().flatten() {
            bounded = Some(match bounded {
                Some(bs) => bs.iter().flat_map(|b| r.intersect_box(b).parts).collect(),
                None => r.parts.clone(),
            });
        }
        let boxes = bounded.map(|bs| bs.iter().flat_map(|b| split_box(b, &cuts)).collect());
        let radial = f.is_radial_about_origin() && densities_radial(chars);
        Ok(SpatialPlan { boxes, radial, dim: chars.dim })
    }

    fn integrate(&self, h: &dyn Fn(&[f64]) -> f64) -> Result<Quad> {
        self.integrate_tol(h, 1e-12, 1e-10)
    }

    fn integrate_tol(&self, h: &dyn Fn(&[f64]) -> f64, abs_tol: f64, rel_tol: f64) -> Result<Quad> {
        match &self.boxes {
            Some(bs) => Ok(bs.iter().fold(Quad::zero(), |acc, b| {
                acc.add(quadrature::cubature_box_adaptive(h, b, abs_tol, rel_tol))
            })),
            None => {
                let (q, verdict, _) = shell_integral(h, self.dim, self.radial, &ShellPolicy::default());
                match verdict {
                    Verdict::NonMember => Err(Error::SymbolDivergent("integral over ℝ^d diverges".into())),
                    _ => Ok(q),
                }
            }
        }
    }
}

/// `∫ h dx` over the part of `ℝ^d` (or of `restrict`) where `f` and the
/// characteristics can be nonzero, split at the densities' indicator cuts.
pub(crate) fn integrate_spatial(
    chars: &Characteristics,
    f: &TestFunction,
    restrict: Option<&Region>,
    h: &dyn Fn(&[f64]) -> f64,
) -> Result<Quad> {
    SpatialPlan::new(chars, f, restrict)?.integrate(h)
}

/// [`integrate_spatial`] at a looser tolerance, for integrands that carry
/// inner quadrature noise.
pub(crate) fn integrate_spatial_tol(
    chars: &Characteristics,
    f: &TestFunction,
    restrict: Option<&Region>,
    h: &dyn Fn(&[f64]) -> f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad> {
    SpatialPlan::new(chars, f, restrict)?.integrate_tol(h, abs_tol, rel_tol)
}

fn density_regions(chars: &Characteristics) -> Vec<&Region> {
    use crate::density::SpatialDensity::Indicator;
    let mut out = Vec::new();
    for d in [&chars.gamma.density, &chars.sigma.density] {
        if let Indicator { region, .. } = d {
            out.push(region);
        }
    }
    if let Some(Indicator { region, .. }) = chars.nu.as_ref().map(|k| &k.modulation) {
        out.push(region);
    }
    out
}

fn densities_radial(chars: &Characteristics) -> bool {
    chars.gamma.density.is_radial()
        && chars.sigma.density.is_radial()
        && chars.nu.as_ref().is_none_or(|k| k.modulation.is_radial())
}

/// Split a box along the given per-axis cut coordinates.
fn split_box(b: &AxisBox, cuts: &[Vec<f64>]) -> Vec<AxisBox> {
    let mut out = vec![b.clone()];
    for (j, cs) in cuts.iter().enumerate() {
        let mut next = Vec::new();
        for piece in out {
            let mut edges: Vec<f64> = cs.iter().copied().filter(|c| *c > piece.lo[j] && *c < piece.hi[j]).collect();
            edges.push(piece.lo[j]);
            edges.push(piece.hi[j]);
            edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
            edges.dedup();
            for w in edges.windows(2) {
                let mut p = piece.clone();
                p.lo[j] = w[0];
                p.hi[j] = w[1];
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0)
}

/// `ln Φ_M(e^{ln_u}, x)` (unnormalized), usable when `Φ_M` itself underflows.
pub fn ln_phi_m_density(chars: &Characteristics, ln_u: f64, x: &[f64]) -> f64 {
    if ln_u == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let asymmetric = chars.nu.as_ref().is_some_and(|k| !k.is_symmetric() && k.modulation.value(x) != 0.0);
    if asymmetric {
        // U has no log-space form; extrapolate the log-slope below the floor
        const FLOOR: f64 = -300.0;
        if ln_u > FLOOR {
            return phi_m_density(chars, ln_u.exp(), x).ln();
        }
        let a = phi_m_density(chars, FLOOR.exp(), x).ln();
        let b = phi_m_density(chars, (FLOOR + 1.0).exp(), x).ln();
        return a + (b - a) * (ln_u - FLOOR);
    }
    let mut terms = vec![ln_u + chars.gamma.density.ln_abs(x), 2.0 * ln_u + chars.sigma.density.ln_abs(x)];
    if let Some(k) = &chars.nu {
        terms.push(k.modulation.ln_abs(x) + k.ln_k2(ln_u));
    }
    log_sum_exp(&terms)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// One dyadic shell: `ln|contribution|` and the contribution itself.
type Shell<'a> = dyn Fn(usize) -> (f64, Quad) + 'a;

/// Integral of `h` over `ℝ^d` as a sum over dyadic shells, with a ratio test on
/// successive shell contributions deciding convergence.
fn shell_integral(h: &dyn Fn(&[f64]) -> f64, d: usize, radial: bool, policy: &ShellPolicy) -> (Quad, Verdict, String) {
    let shell = |k: usize| -> (f64, Quad) {
        let q = if radial {
            let area = sphere_area(d);
            let g = |r: f64| {
                let mut x = vec![0.0; d];
                x[0] = r;
                area * r.powi(d as i32 - 1) * h(&x)
            };
            if k == 0 {
                quadrature::integrate(g, 0.0, 1.0, 1e-300, 1e-10)
            } else {
                let lo = ((k - 1) as f64) * LN_2;
                let gs = |s: f64| {
                    let r = s.exp();
                    g(r) * r
                };
                quadrature::integrate(gs, lo, lo + LN_2, 1e-300, 1e-10)
            }
        } else if k == 0 {
            quadrature::cubature_box_adaptive(h, &AxisBox::cube(d, -1.0, 1.0), 1e-300, 1e-9)
        } else {
            let inner = 2f64.powi(k as i32 - 1);
            let outer = 2.0 * inner;
            let edges = [-outer, -inner, inner, outer];
            let mut total = Quad::zero();
            for idx in 0..3usize.pow(d as u32) {
                let mut r = idx;
                let mut lo = vec![0.0; d];
                let mut hi = vec![0.0; d];
                let mut centre = true;
                for j in 0..d {
                    let c = r % 3;
                    r /= 3;
                    lo[j] = edges[c];
                    hi[j] = edges[c + 1];
                    centre &= c == 1;
                }
                if !centre {
                    let b = AxisBox { lo, hi, closure: None };
                    total = total.add(quadrature::cubature_box_adaptive(h, &b, 1e-300, 1e-9));
                }
            }
            total
        };
        (q.value.abs().ln(), q)
    };
    shell_driver(&shell, policy)
}

/// Radial shell integral of `exp(ln_h(r))` over `ℝ^d`, done in log space so
/// that integrands far below the floating range still order correctly.
fn ln_radial_shell_integral(ln_h: &dyn Fn(f64) -> f64, d: usize, policy: &ShellPolicy) -> (Quad, Verdict, String) {
    let ln_area = sphere_area(d).ln();
    let shell = |k: usize| -> (f64, Quad) {
        // ln of the integrand in the integration variable of this shell
        let (lo, hi, ln_g): (f64, f64, Box<dyn Fn(f64) -> f64>) = if k == 0 {
            let f = move |r: f64| {
                let jac = if d == 1 { 0.0 } else { (d as f64 - 1.0) * r.ln() };
                ln_area + jac + ln_h(r)
            };
            (0.0, 1.0, Box::new(f))
        } else {
            let lo = ((k - 1) as f64) * LN_2;
            (lo, lo + LN_2, Box::new(move |s: f64| ln_area + d as f64 * s + ln_h(s.exp())))
        };
        let reference = (1..=8)
            .map(|i| ln_g(lo + (hi - lo) * i as f64 / 8.0))
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        if reference == f64::INFINITY {
            return (f64::INFINITY, Quad { value: f64::INFINITY, error: 0.0, converged: true });
        }
        if reference == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, Quad::zero());
        }
        let q = quadrature::integrate(|s| (ln_g(s) - reference).exp(), lo, hi, 1e-300, 1e-10);
        let ln_c = reference + q.value.ln();
        let scale = reference.exp();
        (ln_c, Quad { value: q.value * scale, error: q.error * scale, converged: q.converged })
    };
    shell_driver(&shell, policy)
}

fn shell_driver(shell: &Shell<'_>, policy: &ShellPolicy) -> (Quad, Verdict, String) {
    let mut sum = Quad::zero();
    let mut contributions: Vec<f64> = Vec::new();
    let mut all_converged = true;
    let ln_margin = (1.0 - policy.ratio_margin).ln();
    for k in 0..=policy.k_max {
        let (ln_c, q) = shell(k);
        all_converged &= q.converged;
        if ln_c.is_nan() || ln_c > f64::MAX.ln() {
            return (sum, Verdict::NonMember, format!("shell {k} contribution is not finite"));
        }
        sum = sum.add(q);
        contributions.push(ln_c);
        if k < policy.k_min || contributions.len() <= policy.window {
            continue;
        }
        let last = &contributions[contributions.len() - policy.window - 1..];
        if last.iter().all(|c| *c == f64::NEG_INFINITY) {
            let v = if all_converged { Verdict::Member } else { Verdict::Indeterminate };
            return (sum, v, format!("integrand vanishes beyond radius 2^{}", k - policy.window));
        }
        let ratios: Vec<f64> = last.windows(2).map(|w| w[1] - w[0]).collect();
        if ratios.iter().all(|r| *r < ln_margin) {
            let rho = ratios.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)).exp();
            let tail = last[last.len() - 1].exp() * rho / (1.0 - rho);
            sum.error += tail;
            let v = if all_converged { Verdict::Member } else { Verdict::Indeterminate };
            return (sum, v, format!("shell ratios ≤ {rho:.4} over radii up to 2^{k}; geometric tail ≤ {tail:.3e}"));
        }
        if ratios.iter().all(|r| *r >= ln_margin) {
            let rho = ratios.iter().fold(f64::INFINITY, |a, b| a.min(*b)).exp();
            return (sum, Verdict::NonMember, format!("shell ratios ≥ {rho:.4} up to radius 2^{k}"));
        }
    }
    (sum, Verdict::Indeterminate, format!("no decision after {} shells", policy.k_max + 1))
}

/// `∫_B Φ_M(sup|f|, x) dx < ∞` over the boxes; `Φ_M(·, x)` is nondecreasing,
/// so this certifies membership without resolving `f` itself.
fn dominated_on_boxes(chars: &Characteristics, f: &TestFunction, boxes: &[AxisBox]) -> bool {
    let cap = f.sup_abs();
    if !cap.is_finite() {
        return false;
    }
    let h = |x: &[f64]| phi_m_density(chars, cap, x);
    let q = boxes.iter().fold(Quad::zero(), |acc, b| acc.add(quadrature::cubature_box_adaptive(&h, b, 1e-12, 1e-6)));
    q.converged && q.value.is_finite()
}

/// Cheap sufficient test for `f ∈ L_M` on a bounded `domain`.
pub(crate) fn integrability_certified(chars: &Characteristics, f: &TestFunction, domain: &Region) -> Result<bool> {
    let plan = SpatialPlan::new(chars, f, Some(domain))?;
    let Some(boxes) = &plan.boxes else { return Ok(false) };
    for b in boxes {
        for piece in [&chars.gamma.density, &chars.sigma.density] {
            if piece.integrate_abs_box(b).is_err() {
                return Ok(false);
            }
        }
    }
    Ok(dominated_on_boxes(chars, f, boxes))
}

/// Decides whether `∫Φ_M(|f(x)|, x) λ(dx) < ∞` on `domain` (all of `ℝ^d` when `None`).
pub fn lm_membership(chars: &Characteristics, f: &TestFunction, domain: Option<&Region>) -> Result<Membership> {
    lm_membership_with(chars, f, domain, &ShellPolicy::default())
}

pub fn lm_membership_with(
    chars: &Characteristics,
    f: &TestFunction,
    domain: Option<&Region>,
    policy: &ShellPolicy,
) -> Result<Membership> {
    chars.check_dim(f.dim())?;
    if f.is_zero() {
        return Ok(Membership {
            verdict: Verdict::Member,
            value: 0.0,
            tail_bound: 0.0,
            shells: 0,
            evidence: "f ≡ 0".into(),
        });
    }
    let restrict = domain.or(chars.domain.as_ref());
    let atoms: f64 = chars
        .gamma
        .atoms
        .iter()
        .chain(&chars.sigma.atoms)
        .filter(|a| restrict.is_none_or(|r| r.contains(&a.location)))
        .map(|a| {
            let v = f.eval(&a.location).abs();
            // sum of the two atom parts; phi_m handles coinciding atoms
            let lam = a.mass.abs();
            if lam == 0.0 {
                0.0
            } else {
                phi_m(chars, v, &a.location).unwrap_or(0.0) * lam
            }
        })
        .sum();
    let h = |x: &[f64]| phi_m_density(chars, f.eval(x), x);
    let plan = SpatialPlan::new(chars, f, restrict)?;
    if let Some(boxes) = &plan.boxes {
        let mut q = Quad::zero();
        for b in boxes {
            // singular control densities show up as an infinite box mass
            for piece in [&chars.gamma.density, &chars.sigma.density] {
                if let Err(Error::DivergentControlMeasure(msg)) = piece.integrate_abs_box(b) {
                    return Ok(Membership {
                        verdict: Verdict::NonMember,
                        value: f64::INFINITY,
                        tail_bound: 0.0,
                        shells: 0,
                        evidence: msg,
                    });
                }
            }
            q = q.add(quadrature::cubature_box_adaptive(h, b, 1e-12, 1e-9));
        }
        let value = q.value + atoms;
        let verdict = if !value.is_finite() {
            Verdict::NonMember
        } else if q.converged || dominated_on_boxes(chars, f, boxes) {
            Verdict::Member
        } else {
            Verdict::Indeterminate
        };
        return Ok(Membership {
            verdict,
            value,
            tail_bound: q.error,
            shells: 0,
            evidence: format!("bounded domain, {} box(es)", boxes.len()),
        });
    }
    let (q, verdict, evidence) = if plan.radial {
        let ln_h = |r: f64| {
            let mut x = vec![0.0; chars.dim];
            x[0] = r;
            ln_phi_m_density(chars, f.ln_abs_eval(&x), &x)
        };
        ln_radial_shell_integral(&ln_h, chars.dim, policy)
    } else {
        shell_integral(&h, chars.dim, false, policy)
    };
    Ok(Membership { verdict, value: q.value + atoms, tail_bound: q.error, shells: 0, evidence })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Temperedness {
    Tempered { r: f64 },
    /// No `r` in the search grid worked; this is not a proof of non-temperedness.
    NotTemperedUpTo { r_max: f64 },
    Indeterminate { r: f64, evidence: String },
}

/// Searches `r ∈ {½, 1, 2, …, r_max}` for `(1+|x|²)^{-r} ∈ L_M`.
pub fn tempered_test(chars: &Characteristics, r_max: f64) -> Result<Temperedness> {
    if chars.domain.is_some() {
        return Err(Error::Precondition("temperedness is defined for characteristics on all of ℝ^d".into()));
    }
    let mut r = 0.5;
    let mut pending: Option<(f64, String)> = None;
    while r <= r_max {
        let f = TestFunction::PolyDecay { dim: chars.dim, r };
        let m = lm_membership(chars, &f, None)?;
        match m.verdict {
            Verdict::Member => return Ok(Temperedness::Tempered { r }),
            Verdict::Indeterminate if pending.is_none() => pending = Some((r, m.evidence)),
            _ => {}
        }
        r *= 2.0;
    }
    Ok(match pending {
        Some((r, evidence)) => Temperedness::Indeterminate { r, evidence },
        None => Temperedness::NotTemperedUpTo { r_max },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub component: String,
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub values: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Stationarity {
    /// `γ = p·leb`, `Σ = σ²·leb`, `ν = leb ⊗ ν₀`.
    Stationary { p: f64, sigma2: f64, nu0: Option<JumpKernel> },
    NonStationary { witness: Witness },
}

fn density_witness(d: &crate::density::SpatialDensity, dim: usize, name: &str) -> Option<Witness> {
    use crate::density::SpatialDensity::Indicator;
    if d.is_constant().is_some() {
        return None;
    }
    let mut probes: Vec<Vec<f64>> = Vec::new();
    if let Indicator { region, .. } = d {
        if let Some(b) = region.parts.first() {
            probes.push(b.center());
        }
        if let Some(bb) = region.bounding_box() {
            probes.push(bb.hi.iter().map(|v| v + 1.0).collect());
        }
    }
    let unit = |s: f64| {
        let mut x = vec![0.0; dim];
        x[0] = s;
        x
    };
    probes.extend([unit(0.0), unit(1.0), unit(2.0), unit(-1.0), unit(10.0)]);
    let tol = crate::measure::Tolerance::default();
    for (i, x) in probes.iter().enumerate() {
        for y in &probes[i + 1..] {
            let (a, b) = (d.value(x), d.value(y));
            if !tol.close(a, b) {
                return Some(Witness { component: name.into(), x: x.clone(), y: Some(y.clone()), values: (a, b) });
            }
        }
    }
    None
}

pub fn stationarity_check(chars: &Characteristics) -> Stationarity {
    for (m, name) in [(&chars.gamma, "gamma atom"), (&chars.sigma, "sigma atom")] {
        if let Some(a) = m.atoms.iter().find(|a| a.mass != 0.0) {
            return Stationarity::NonStationary {
                witness: Witness { component: name.into(), x: a.location.clone(), y: None, values: (a.mass, 0.0) },
            };
        }
    }
    let mut checks = vec![(&chars.gamma.density, "gamma density"), (&chars.sigma.density, "sigma density")];
    if let Some(k) = &chars.nu {
        checks.push((&k.modulation, "jump modulation"));
    }
    for (d, name) in checks {
        if let Some(w) = density_witness(d, chars.dim, name) {
            return Stationarity::NonStationary { witness: w };
        }
    }
    Stationarity::Stationary {
        p: chars.gamma.density.is_constant().unwrap_or(0.0),
        sigma2: chars.sigma.density.is_constant().unwrap_or(0.0),
        nu0: chars.nu.clone(),
    }
}

/// Integrability index of a Besov space: `p ∈ (0,2) ∪ 2ℕ ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BesovP {
    Finite(f64),
    Infinity,
}

impl BesovP {
    fn validate(&self) -> Result<()> {
        match *self {
            BesovP::Infinity => Ok(()),
            BesovP::Finite(p) => {
                let even = p >= 2.0 && p.fract() == 0.0 && (p as u64) % 2 == 0;
                if (p > 0.0 && p < 2.0) || even {
                    Ok(())
                } else {
                    domain(format!("p = {p} is not in (0,2) ∪ 2ℕ ∪ {{∞}}"))
                }
            }
        }
    }

    fn min_with(&self, alpha: f64) -> f64 {
        match *self {
            BesovP::Infinity => alpha,
            BesovP::Finite(p) => p.min(alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BesovClass {
    Inside,
    Outside,
    BoundaryIndeterminate,
}

/// Classifies the weighted Besov space `B_p^τ(ℝ^d, ρ)` for stationary symmetric
/// α-stable noise: inside iff `τ < d(1/α − 1)` and `ρ < −d/(p∧α)`.
pub fn besov_classify(alpha: f64, d: usize, p: BesovP, tau: f64, rho: f64) -> Result<BesovClass> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("α = {alpha} must lie in (0, 2)"));
    }
    if d == 0 {
        return domain("dimension must be >= 1");
    }
    if !(tau.is_finite() && rho.is_finite()) {
        return domain("τ and ρ must be finite");
    }
    p.validate()?;
    let tau_max = d as f64 * (1.0 / alpha - 1.0);
    let rho_max = -(d as f64) / p.min_with(alpha);
    Ok(if tau < tau_max && rho < rho_max {
        BesovClass::Inside
    } else if tau > tau_max || rho > rho_max {
        BesovClass::Outside
    } else {
        BesovClass::BoundaryIndeterminate
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::Preset;
    use crate::density::{DensityMeasure, SpatialDensity};

    fn stable(alpha: f64, dim: usize) -> Characteristics {
        Preset::BalanStable { alpha, p: 0.5, q: 0.5 }.build(dim).unwrap()
    }

    #[test]
    fn control_measure_examples() {
        let c = stable(1.5, 1);
        let v = control_measure(&c, &Region::unit(1)).unwrap();
        assert!((v.value - 4.0).abs() < 1e-12);
        assert_eq!(control_measure(&c, &Region::empty(1)).unwrap().value, 0.0);
        let drift = Characteristics::new(1, DensityMeasure::lebesgue(1.0), DensityMeasure::zero(), None).unwrap();
        let v = control_measure(&drift, &Region::interval(0.0, 2.0).unwrap()).unwrap();
        assert!((v.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn symbol_examples() {
        let c = stable(1.5, 1);
        let f = TestFunction::indicator(Region::unit(1));
        let s = levy_symbol_of_integral(&c, &f, 1.0, 1.0).unwrap();
        assert!((s.value.re + (2.0 * PI).sqrt()).abs() < 1e-9 && s.value.im.abs() < 1e-12);
        assert_eq!(levy_symbol_of_integral(&c, &f, 0.0, 1.0).unwrap().value, Complex64::new(0.0, 0.0));
        let g = Preset::GaussianWhiteNoise.build(1).unwrap();
        let s = levy_symbol_of_integral(&g, &f, 2.0, 3.0).unwrap();
        assert!((s.value.re + 6.0).abs() < 1e-12);
    }

    #[test]
    fn phi_m_is_power_for_symmetric_stable() {
        let c = stable(1.2, 1);
        let kappa = 2.0 / (2.0 - 1.2);
        for u in [0.1, 1.0, 7.0] {
            let v = phi_m(&c, u, &[0.3]).unwrap();
            assert!((v - u.powf(1.2)).abs() < 1e-12 * v.max(1.0), "{u}: {v}");
            assert!((phi_m_density(&c, u, &[0.3]) - kappa * u.powf(1.2)).abs() < 1e-10);
        }
        assert_eq!(phi_m(&c, 0.0, &[0.0]).unwrap(), 0.0);
        let empty = Characteristics::new(1, DensityMeasure::zero(), DensityMeasure::zero(), None).unwrap();
        assert!(matches!(phi_m(&empty, 1.0, &[0.0]), Err(Error::UndefinedDensity { .. })));
    }

    #[test]
    fn membership_follows_power_rule() {
        for (alpha, r, d, member) in [(1.5, 0.5, 1, true), (1.5, 0.3, 1, false), (0.8, 1.0, 2, false), (0.8, 2.0, 2, true)] {
            let c = stable(alpha, d);
            let m = lm_membership(&c, &TestFunction::PolyDecay { dim: d, r }, None).unwrap();
            let want = if member { Verdict::Member } else { Verdict::NonMember };
            assert_eq!(m.verdict, want, "α={alpha} r={r} d={d}: {}", m.evidence);
        }
    }

    #[test]
    fn temperedness_examples() {
        assert_eq!(tempered_test(&stable(1.5, 1), 64.0).unwrap(), Temperedness::Tempered { r: 0.5 });
        let g = Preset::GaussianWhiteNoise.build(1).unwrap();
        assert_eq!(tempered_test(&g, 64.0).unwrap(), Temperedness::Tempered { r: 0.5 });
        let exp = Characteristics::new(
            1,
            DensityMeasure::zero(),
            DensityMeasure::from_density(SpatialDensity::Exponential { scale: 1.0, rate: 1.0 }),
            None,
        )
        .unwrap();
        assert_eq!(tempered_test(&exp, 64.0).unwrap(), Temperedness::NotTemperedUpTo { r_max: 64.0 });
    }

    #[test]
    fn stationarity_examples() {
        assert!(matches!(stationarity_check(&stable(1.5, 1)), Stationarity::Stationary { p, sigma2, .. } if p == 0.0 && sigma2 == 0.0));
        let mut c = stable(1.5, 1);
        c.gamma.atoms.push(crate::density::Atom { location: vec![0.0], mass: 1.0 });
        match stationarity_check(&c) {
            Stationarity::NonStationary { witness } => assert_eq!(witness.x, vec![0.0]),
            s => panic!("{s:?}"),
        }
        let c = Characteristics::new(
            1,
            DensityMeasure::zero(),
            DensityMeasure::from_density(SpatialDensity::Quadratic { c0: 1.0, c2: 1.0 }),
            None,
        )
        .unwrap();
        match stationarity_check(&c) {
            Stationarity::NonStationary { witness } => {
                assert_eq!(witness.x, vec![0.0]);
                assert_eq!(witness.y, Some(vec![1.0]));
            }
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn besov_examples() {
        assert_eq!(besov_classify(0.5, 1, BesovP::Finite(2.0), 0.5, -3.0).unwrap(), BesovClass::Inside);
        assert_eq!(besov_classify(0.5, 1, BesovP::Finite(2.0), 1.0, -3.0).unwrap(), BesovClass::BoundaryIndeterminate);
        assert_eq!(besov_classify(1.5, 2, BesovP::Finite(2.0), 0.0, -5.0).unwrap(), BesovClass::Outside);
        assert!(besov_classify(1.5, 2, BesovP::Finite(3.0), 0.0, -5.0).is_err());
        assert!(besov_classify(2.0, 2, BesovP::Infinity, 0.0, -5.0).is_err());
    }
}
