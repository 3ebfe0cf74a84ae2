//! Statistical and numerical checks of simulated fields against their
//! analytic laws.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristics::Characteristics;
use crate::error::{domain, Error, Result};
use crate::integrator::{empirical_cf, truncated_symbol, IntegralPlan};
use crate::kernel::JumpLaw;
use crate::measure::{integrate_spatial_tol, levy_symbol_of_integral, phi_m_density};
use crate::quadrature::compensated_sum;
use crate::region::Region;
use crate::sampler::{map_replicates, replicate_rng, sample_field, sample_marginal, FieldRealization, SamplerConfig};
use crate::testfn::TestFunction;
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub sample_size: usize,
    pub seed: Option<u64>,
    /// What the statistic is compared against.
    pub target: String,
    /// Planted-alternative arms are expected to fail and do not fail a suite.
    #[serde(default)]
    pub control: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.decision == Decision::Pass
    }

    pub fn as_control(mut self) -> Self {
        self.control = true;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// One report per line, sorted by test name.
pub fn reports_jsonl(reports: &[VerificationReport]) -> String {
    let mut sorted: Vec<&VerificationReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.test.cmp(&b.test));
    sorted.iter().map(|r| r.to_json() + "\n").collect()
}

pub fn summary_table(reports: &[VerificationReport]) -> String {
    let width = reports.iter().map(|r| r.test.len()).max().unwrap_or(4).max(4);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>14}  {:>14}  {:>8}  decision", "test", "statistic", "threshold", "n");
    for r in reports {
        let d = match r.decision {
            Decision::Pass => "pass",
            Decision::Fail => "fail",
            Decision::Indeterminate => "indeterminate",
        };
        let tag = if r.control { " (control)" } else { "" };
        let _ = writeln!(
            s,
            "{:<width$}  {:>14.6e}  {:>14.6e}  {:>8}  {d}{tag}",
            r.test, r.statistic, r.threshold, r.sample_size
        );
    }
    s
}

/// True iff some non-control report failed.
pub fn suite_failed(reports: &[VerificationReport]) -> bool {
    reports.iter().any(|r| !r.control && r.decision == Decision::Fail)
}

/// Quadrature error bounds above this make an analytic target unusable.
const QUAD_TRUST: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfRow {
    pub u: f64,
    pub re_emp: f64,
    pub im_emp: f64,
    pub re_analytic: f64,
    pub im_analytic: f64,
    /// Monte Carlo radius plus the truncation-bias bound at this `u`.
    pub radius: f64,
    pub pass: bool,
}

pub fn cf_rows_csv(rows: &[CfRow]) -> String {
    let mut s = String::from("u,re_emp,im_emp,re_analytic,im_analytic,radius,pass\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{}",
            r.u, r.re_emp, r.im_emp, r.re_analytic, r.im_analytic, r.radius, r.pass
        );
    }
    s
}

/// `N = cfg.replicates` draws of `∫_A f dM(t, ·)` over the sampling window.
pub fn sample_integrals(chars: &Characteristics, f: &TestFunction, t: f64, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    let window = cfg.window.clone();
    if let TestFunction::Indicator { region } = f {
        let constant = chars.nu.as_ref().is_none_or(|k| k.modulation.is_constant().is_some());
        if constant && window.contains_region(region) {
            return sample_marginal(chars, cfg, t, region);
        }
    }
    let probe = sample_field(chars, cfg)?;
    let plan = IntegralPlan::new(&probe, f, t, &window)?;
    map_replicates(chars, cfg, |r| Ok(plan.evaluate(r)?.value))
}

/// Empirical characteristic function of `∫ f dM(t, ·)` against `exp(Ψ)`.
///
/// At every `u` the real and imaginary deviations must each stay within
/// `2/√N + |exp(Ψ_ε) − exp(Ψ)|`, where `Ψ_ε` is the symbol of the truncated
/// model actually simulated.
pub fn cf_match_test(
    chars: &Characteristics,
    f: &TestFunction,
    t: f64,
    us: &[f64],
    cfg: &SamplerConfig,
) -> Result<(VerificationReport, Vec<CfRow>)> {
    if cfg.replicates < 1000 {
        return Err(Error::Precondition("characteristic function test needs N >= 1000".into()));
    }
    let samples = sample_integrals(chars, f, t, cfg)?;
    cf_match_samples(chars, f, t, us, cfg, &samples)
}

/// [`cf_match_test`] on samples already drawn under `cfg`.
pub fn cf_match_samples(
    chars: &Characteristics,
    f: &TestFunction,
    t: f64,
    us: &[f64],
    cfg: &SamplerConfig,
    samples: &[f64],
) -> Result<(VerificationReport, Vec<CfRow>)> {
    let emp = empirical_cf(samples, us)?;
    let mut rows = Vec::with_capacity(us.len());
    let mut worst = f64::NEG_INFINITY;
    let mut quad_ok = true;
    for (&u, e) in us.iter().zip(&emp.values) {
        let full = levy_symbol_of_integral(chars, f, u, t)?;
        quad_ok &= full.error_bound.is_finite() && full.error_bound <= QUAD_TRUST;
        let target = full.value.exp();
        let truncated = truncated_symbol(chars, f, u, t, cfg.eps, cfg.small_jump_mode)?.exp();
        let bias = (truncated - target).norm();
        let dev = (e.re - target.re).abs().max((e.im - target.im).abs());
        worst = worst.max(dev - bias);
        let radius = emp.radius + bias;
        rows.push(CfRow {
            u,
            re_emp: e.re,
            im_emp: e.im,
            re_analytic: target.re,
            im_analytic: target.im,
            radius,
            pass: dev <= radius,
        });
    }
    let decision = if !quad_ok {
        Decision::Indeterminate
    } else if rows.iter().all(|r| r.pass) {
        Decision::Pass
    } else {
        Decision::Fail
    };
    let report = VerificationReport {
        test: "cf-match".into(),
        statistic: worst,
        threshold: emp.radius,
        decision,
        sample_size: samples.len(),
        seed: Some(cfg.seed),
        target: "exp of the Lévy symbol of the integral".into(),
        control: false,
    };
    Ok((report, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRow {
    pub u: f64,
    pub empirical: f64,
    pub target: f64,
    pub std_error: f64,
    pub pass: bool,
}

/// `(1/N)Σ e^{−uX_j}` against `target(u)` within `k` Monte Carlo standard errors.
pub fn laplace_match_test(
    name: &str,
    samples: &[f64],
    us: &[f64],
    target: &dyn Fn(f64) -> f64,
    k: f64,
    seed: Option<u64>,
) -> Result<(VerificationReport, Vec<LaplaceRow>)> {
    if samples.len() < 2 {
        return Err(Error::Precondition("Laplace test needs at least two samples".into()));
    }
    let n = samples.len() as f64;
    let mut rows = Vec::with_capacity(us.len());
    let mut worst: f64 = 0.0;
    for &u in us {
        let vals: Vec<f64> = samples.iter().map(|x| (-u * x).exp()).collect();
        let mean = compensated_sum(vals.iter().copied()) / n;
        let var = compensated_sum(vals.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
        let se = (var / n).sqrt();
        let tgt = target(u);
        let z = (mean - tgt).abs() / se;
        worst = worst.max(z);
        rows.push(LaplaceRow { u, empirical: mean, target: tgt, std_error: se, pass: z <= k });
    }
    let decision = if worst.is_finite() && rows.iter().all(|r| r.pass) { Decision::Pass } else { Decision::Fail };
    let report = VerificationReport {
        test: name.into(),
        statistic: worst,
        threshold: k,
        decision,
        sample_size: samples.len(),
        seed,
        target: "Laplace transform in standard errors".into(),
        control: false,
    };
    Ok((report, rows))
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() || ys.is_empty() || xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::Precondition("KS test needs non-empty samples without NaN".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    Ok((d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)))
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn ks_test(name: &str, xs: &[f64], ys: &[f64], level: f64, seed: Option<u64>) -> Result<VerificationReport> {
    let (d, p) = ks_two_sample(xs, ys)?;
    Ok(VerificationReport {
        test: name.into(),
        statistic: p,
        threshold: level,
        decision: if p > level { Decision::Pass } else { Decision::Fail },
        sample_size: xs.len().min(ys.len()),
        seed,
        target: format!("two-sample KS p-value (D = {d:.6})"),
        control: false,
    })
}

/// Fenwick tree of four running sums indexed by rank.
struct Fenwick {
    t: Vec<[f64; 4]>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { t: vec![[0.0; 4]; n + 1] }
    }

    fn add(&mut self, i: usize, v: [f64; 4]) {
        let mut i = i + 1;
        while i < self.t.len() {
            for k in 0..4 {
                self.t[i][k] += v[k];
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Sums over ranks `0..=i`.
    fn prefix(&self, i: usize) -> [f64; 4] {
        let mut s = [0.0; 4];
        let mut i = i + 1;
        while i > 0 {
            for k in 0..4 {
                s[k] += self.t[i][k];
            }
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// `Σ_j |v_i − v_j|` for every `i`.
fn distance_row_sums(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let total: f64 = v.iter().sum();
    let mut out = vec![0.0; n];
    let mut below = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        let x = v[i];
        let above = total - below - x;
        out[i] = x * k as f64 - below + above - x * (n - k - 1) as f64;
        below += x;
    }
    out
}

/// Univariate distance covariance in `O(n log n)`.
struct Dcov {
    n: usize,
    /// indices sorted by `x`
    order: Vec<usize>,
    x: Vec<f64>,
    a_rows: Vec<f64>,
    a_total: f64,
}

impl Dcov {
    fn new(x: &[f64]) -> Self {
        let n = x.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let a_rows = distance_row_sums(x);
        let a_total = a_rows.iter().sum();
        Dcov { n, order, x: x.to_vec(), a_rows, a_total }
    }

    /// `V²_n(x, y)` with `y` given by values, ranks and row sums.
    fn statistic(&self, y: &[f64], rank: &[usize], b_rows: &[f64], b_total: f64) -> f64 {
        let n = self.n as f64;
        let mut tree = Fenwick::new(self.n);
        let mut all = [0.0; 4];
        let mut cross = 0.0;
        for &i in &self.order {
            let (xi, yi) = (self.x[i], y[i]);
            let lo = tree.prefix(rank[i]);
            let hi: [f64; 4] = std::array::from_fn(|k| all[k] - lo[k]);
            // Σ (x_i − x_j)|y_i − y_j| over earlier j, split by the sign of y_i − y_j
            let part = |s: [f64; 4]| xi * yi * s[0] - xi * s[1] - yi * s[2] + s[3];
            cross += part(lo) - part(hi);
            let v = [1.0, yi, xi, xi * yi];
            tree.add(rank[i], v);
            for k in 0..4 {
                all[k] += v[k];
            }
        }
        let ab: f64 = self.a_rows.iter().zip(b_rows).map(|(a, b)| a * b).sum();
        2.0 * cross / (n * n) - 2.0 * ab / (n * n * n) + self.a_total * b_total / (n * n * n * n)
    }
}

fn ranks(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0; v.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = k;
    }
    r
}

/// Distance covariance and its permutation p-value `(1 + #{V*_b ≥ V}) / (B + 1)`.
pub fn dcov_permutation(x: &[f64], y: &[f64], permutations: usize, seed: u64) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("independence test needs finite samples".into()));
    }
    // centre to keep the expanded products well conditioned
    let centre = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let med = s[s.len() / 2];
        v.iter().map(|a| a - med).collect::<Vec<_>>()
    };
    let (x, y) = (centre(x), centre(y));
    let d = Dcov::new(&x);
    let b_rows = distance_row_sums(&y);
    let b_total: f64 = b_rows.iter().sum();
    let rank = ranks(&y);
    let observed = d.statistic(&y, &rank, &b_rows, b_total);
    let mut perm: Vec<usize> = (0..y.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffles = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        perm.shuffle(&mut rng);
        shuffles.push(perm.clone());
    }
    let exceed = shuffles
        .par_iter()
        .filter(|p| {
            let yp: Vec<f64> = p.iter().map(|&k| y[k]).collect();
            let rp: Vec<usize> = p.iter().map(|&k| rank[k]).collect();
            let bp: Vec<f64> = p.iter().map(|&k| b_rows[k]).collect();
            d.statistic(&yp, &rp, &bp, b_total) >= observed * (1.0 - 1e-12)
        })
        .count();
    Ok((observed, (1 + exceed) as f64 / (permutations + 1) as f64))
}

pub const DEFAULT_PERMUTATIONS: usize = 200;

/// Pass (independent) iff the permutation p-value exceeds `level`.
pub fn independence_test(
    name: &str,
    pairs: &[(f64, f64)],
    permutations: usize,
    level: f64,
    seed: u64,
) -> Result<VerificationReport> {
    if pairs.len() < 100 {
        return Err(Error::Precondition("independence test needs n >= 100".into()));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    let mut report = VerificationReport {
        test: name.into(),
        statistic: f64::NAN,
        threshold: level,
        decision: Decision::Indeterminate,
        sample_size: pairs.len(),
        seed: Some(seed),
        target: "distance covariance permutation p-value".into(),
        control: false,
    };
    if constant(&x) || constant(&y) {
        return Ok(report);
    }
    let (_, p) = dcov_permutation(&x, &y, permutations, seed)?;
    report.statistic = p;
    report.decision = if p > level { Decision::Pass } else { Decision::Fail };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// `1, √2 cos 2πx, √2 sin 2πx, √2 cos 4πx, …`
    Trigonometric,
    /// `√(2k+1) P_k(2x − 1)`
    Legendre,
}

impl Basis {
    /// `⟨𝟙_{(a,b)}, e_k⟩` for `k = 1, 2, …`
    pub fn indicator_coefficient(self, k: usize, a: f64, b: f64) -> f64 {
        match self {
            Basis::Trigonometric => {
                if k == 1 {
                    return b - a;
                }
                let m = (k / 2) as f64;
                let w = 2.0 * PI * m;
                let s2 = 2f64.sqrt();
                if k % 2 == 0 {
                    s2 * ((w * b).sin() - (w * a).sin()) / w
                } else {
                    s2 * ((w * a).cos() - (w * b).cos()) / w
                }
            }
            Basis::Legendre => {
                let n = k - 1;
                // ∫P_n(s)ds = (P_{n+1} − P_{n−1})/(2n+1), with s = 2x − 1
                let anti = |x: f64| {
                    let s = 2.0 * x - 1.0;
                    if n == 0 {
                        s
                    } else {
                        (legendre(n + 1, s) - legendre(n - 1, s)) / (2 * n + 1) as f64
                    }
                };
                ((2 * n + 1) as f64).sqrt() * (anti(b) - anti(a)) / 2.0
            }
        }
    }
}

fn legendre(n: usize, s: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, s);
    if n == 0 {
        return p0;
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * s * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// A cylindrical process built from an orthonormal basis with `e₁ ≡ 1` on
/// `(0, 1)` and i.i.d. compound-Poisson Lévy processes `ℓ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnbCounterexampleSpec {
    pub rate: f64,
    pub jumps: JumpLaw,
    pub basis: Basis,
    pub k: usize,
    pub a: (f64, f64),
    pub b: (f64, f64),
    /// Draw separate `ℓ_k` for `A` and `B`; the independent control arm.
    #[serde(default)]
    pub independent_arms: bool,
}

impl Default for OnbCounterexampleSpec {
    fn default() -> Self {
        OnbCounterexampleSpec {
            rate: 1.0,
            jumps: JumpLaw::Discrete { values: vec![-1.0, 1.0], probs: vec![0.5, 0.5] },
            basis: Basis::Trigonometric,
            k: 8,
            a: (0.0, 0.5),
            b: (0.5, 1.0),
            independent_arms: false,
        }
    }
}

impl OnbCounterexampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Precondition("basis truncation must be >= 2".into()));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return domain("the base Lévy measure must be non-zero");
        }
        self.jumps.validate()?;
        if self.jumps.mean() != 0.0 {
            return domain("the base Lévy law must be symmetric");
        }
        for (lo, hi) in [self.a, self.b] {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::Precondition("sets must be intervals of positive length in (0, 1)".into()));
            }
        }
        if self.a.0 < self.b.1 && self.b.0 < self.a.1 {
            return Err(Error::Precondition("sets A and B must be disjoint".into()));
        }
        Ok(())
    }

    /// `L(t)𝟙_A` and `L(t)𝟙_B` at `t = 1` for one replicate.
    fn draw(&self, ca: &[f64], cb: &[f64], rng: &mut ChaCha8Rng) -> (f64, f64) {
        let pois = Poisson::new(self.rate).expect("validated rate");
        let mut ell = || -> f64 {
            let n = pois.sample(rng) as u64;
            (0..n).map(|_| self.jumps.sample(rng)).sum()
        };
        let mut la = 0.0;
        let mut lb = 0.0;
        for k in 0..self.k {
            let shared = ell();
            la += ca[k] * shared;
            lb += cb[k] * if self.independent_arms { ell() } else { shared };
        }
        (la, lb)
    }
}

/// Simulates `(L(1)𝟙_A, L(1)𝟙_B)` and tests them for independence.
pub fn onb_counterexample(spec: &OnbCounterexampleSpec, n: usize, seed: u64) -> Result<VerificationReport> {
    spec.validate()?;
    let ca: Vec<f64> = (1..=spec.k).map(|k| spec.basis.indicator_coefficient(k, spec.a.0, spec.a.1)).collect();
    let cb: Vec<f64> = (1..=spec.k).map(|k| spec.basis.indicator_coefficient(k, spec.b.0, spec.b.1)).collect();
    let pairs: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|r| spec.draw(&ca, &cb, &mut replicate_rng(seed, r)))
        .collect();
    let name = if spec.independent_arms { "onb-counterexample-control" } else { "onb-counterexample" };
    independence_test(name, &pairs, DEFAULT_PERMUTATIONS, 0.01, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTerms {
    pub lhs: f64,
    pub l1: f64,
    pub l2_sq: f64,
    pub k2: f64,
    pub tail: f64,
    pub rhs: f64,
    pub error: f64,
}

/// Both sides of
/// `∫Φ_M(|f|) dλ ≤ ‖f‖_{L¹(λ)} + 11‖f‖²_{L²(λ)} + 9∫(1∧|fy|²)ν + ∫_{|y|>1}|fy|𝟙_{|fy|≤1}ν`
/// over the bounded set `o`.
pub fn embedding_terms(chars: &Characteristics, f: &TestFunction, o: &Region) -> Result<EmbeddingTerms> {
    chars.check_dim(f.dim())?;
    if o.bounding_box().is_none() || o.is_empty() {
        return Err(Error::Precondition("the set must be bounded and non-empty".into()));
    }
    let lam = crate::measure::control_measure(chars, o)?;
    if !lam.value.is_finite() {
        return Err(Error::Precondition("control measure of the set is infinite".into()));
    }
    let k = chars.nu.as_ref();
    let int = |h: &dyn Fn(&[f64]) -> f64| integrate_spatial_tol(chars, f, Some(o), h, 1e-8, 1e-6);
    let lhs = int(&|x| phi_m_density(chars, f.eval(x), x))?;
    let l1 = int(&|x| f.eval(x).abs() * chars.lambda_density(x))?;
    let l2 = int(&|x| f.eval(x).powi(2) * chars.lambda_density(x))?;
    let k2 = match k {
        Some(k) => int(&|x| k.modulation.value(x) * k.k2(f.eval(x)))?,
        None => crate::quadrature::Quad::zero(),
    };
    let tail = match k {
        Some(k) => int(&|x| {
            let v = f.eval(x).abs();
            if v == 0.0 || v >= 1.0 {
                0.0
            } else {
                k.modulation.value(x) * v * k.band_abs_first_moment(1.0, 1.0 / v)
            }
        })?,
        None => crate::quadrature::Quad::zero(),
    };
    // atoms of γ and Σ carry λ-mass of their own
    let mut atom_lhs = 0.0;
    let mut atom_l1 = 0.0;
    let mut atom_l2 = 0.0;
    for a in chars.gamma.atoms_in(o) {
        let v = f.eval(&a.location).abs();
        atom_lhs += v * a.mass.abs();
        atom_l1 += v * a.mass.abs();
        atom_l2 += v * v * a.mass.abs();
    }
    for a in chars.sigma.atoms_in(o) {
        let v = f.eval(&a.location).abs();
        atom_lhs += v * v * a.mass;
        atom_l1 += v * a.mass;
        atom_l2 += v * v * a.mass;
    }
    let lhs_v = lhs.value + atom_lhs;
    let (l1v, l2v) = (l1.value + atom_l1, l2.value + atom_l2);
    let rhs = l1v + 11.0 * l2v + 9.0 * k2.value + tail.value;
    let error = lhs.error + l1.error + 11.0 * l2.error + 9.0 * k2.error + tail.error;
    Ok(EmbeddingTerms { lhs: lhs_v, l1: l1v, l2_sq: l2v, k2: k2.value, tail: tail.value, rhs, error })
}

pub fn embedding_inequality_check(chars: &Characteristics, f: &TestFunction, o: &Region) -> Result<VerificationReport> {
    Ok(embedding_report(&embedding_terms(chars, f, o)?))
}

/// Decision for terms already computed by [`embedding_terms`].
pub fn embedding_report(e: &EmbeddingTerms) -> VerificationReport {
    let tol = 1e-9 * (1.0 + e.rhs.abs()) + e.error;
    let decision = if !e.error.is_finite() || e.error > QUAD_TRUST * (1.0 + e.rhs.abs()) {
        Decision::Indeterminate
    } else if e.lhs <= e.rhs + tol {
        Decision::Pass
    } else {
        Decision::Fail
    };
    VerificationReport {
        test: "embedding-inequality".into(),
        statistic: e.lhs - e.rhs,
        threshold: tol,
        decision,
        sample_size: 0,
        seed: None,
        target: "L1 + 11 L2 + 9 K2 + tail bound".into(),
        control: false,
    }
}

/// Samples for the stationary-increment test: `M(t,A) − M(s,A)` paired with
/// `M(s,A)`, and independent draws of `M(t − s, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSamples {
    pub early: Vec<f64>,
    pub increment: Vec<f64>,
    pub fresh: Vec<f64>,
}

pub fn increment_samples(
    chars: &Characteristics,
    a: &Region,
    s: f64,
    t: f64,
    cfg: &SamplerConfig,
    mutate: Option<&(dyn Fn(FieldRealization) -> FieldRealization + Sync)>,
) -> Result<IncrementSamples> {
    if !(0.0 < s && s < t) {
        return domain("need 0 < s < t");
    }
    if cfg.horizon < t {
        return Err(Error::Precondition("sampling horizon must cover t".into()));
    }
    let apply = |r: &FieldRealization| match mutate {
        Some(m) => m(r.clone()),
        None => r.clone(),
    };
    let pairs = map_replicates(chars, cfg, |r| {
        let r = apply(r);
        let ms = r.evaluate(s, a)?;
        Ok((ms, r.evaluate(t, a)? - ms))
    })?;
    let mut fresh_cfg = cfg.clone();
    fresh_cfg.seed = cfg.seed ^ 0x5EED_F00D_CAFE_D00D;
    let fresh = map_replicates(chars, &fresh_cfg, |r| apply(r).evaluate(t - s, a))?;
    let (early, increment) = pairs.into_iter().unzip();
    Ok(IncrementSamples { early, increment, fresh })
}

/// KS of `M(t,A) − M(s,A)` against `M(t − s, A)` and independence of
/// `(M(s,A), M(t,A) − M(s,A))`, each at `level`.
pub fn stationary_increment_test(samples: &IncrementSamples, level: f64, seed: u64) -> Result<VerificationReport> {
    let ks = ks_test("stationary-increments", &samples.increment, &samples.fresh, level, Some(seed))?;
    let pairs: Vec<(f64, f64)> = samples.early.iter().copied().zip(samples.increment.iter().copied()).collect();
    let ind = independence_test("independent-increments", &pairs, DEFAULT_PERMUTATIONS, level, seed)?;
    let decision = match (ks.decision, ind.decision) {
        (Decision::Fail, _) | (_, Decision::Fail) => Decision::Fail,
        (Decision::Pass, Decision::Pass) => Decision::Pass,
        _ => Decision::Indeterminate,
    };
    Ok(VerificationReport {
        test: "stationary-increments".into(),
        statistic: ks.statistic.min(if ind.statistic.is_nan() { 1.0 } else { ind.statistic }),
        threshold: level,
        decision,
        sample_size: samples.increment.len(),
        seed: Some(seed),
        target: "min of KS and independence p-values".into(),
        control: false,
    })
}

/// Characteristic function deviation `max_u |φ_emp(u) − φ(u)|` for a sample
/// against a given analytic CF.
pub fn cf_deviation(samples: &[f64], us: &[f64], cf: &dyn Fn(f64) -> Complex64) -> Result<f64> {
    let emp = empirical_cf(samples, us)?;
    Ok(us.iter().zip(&emp.values).map(|(u, e)| (e - cf(*u)).norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::Preset;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn dcov_naive(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let a = |i: usize, j: usize| (x[i] - x[j]).abs();
        let b = |i: usize, j: usize| (y[i] - y[j]).abs();
        let mut s1 = 0.0;
        let mut ar = vec![0.0; x.len()];
        let mut br = vec![0.0; x.len()];
        for i in 0..x.len() {
            for j in 0..x.len() {
                s1 += a(i, j) * b(i, j);
                ar[i] += a(i, j);
                br[i] += b(i, j);
            }
        }
        let s2: f64 = ar.iter().zip(&br).map(|(p, q)| p * q).sum();
        let (at, bt): (f64, f64) = (ar.iter().sum(), br.iter().sum());
        s1 / (n * n) - 2.0 * s2 / (n * n * n) + at * bt / (n * n * n * n)
    }

    #[test]
    fn fast_dcov_matches_quadratic_formula() {
        let x = normals(300, 1);
        let mut y = normals(300, 2);
        y[3] = y[7];
        for (i, v) in y.iter_mut().enumerate() {
            *v += 0.3 * x[i] * x[i];
        }
        let d = Dcov::new(&x);
        let br = distance_row_sums(&y);
        let fast = d.statistic(&y, &ranks(&y), &br, br.iter().sum());
        let slow = dcov_naive(&x, &y);
        assert!((fast - slow).abs() < 1e-12 * slow.abs().max(1.0), "{fast} {slow}");
    }

    #[test]
    fn independence_null_and_alternative() {
        let x = normals(500, 3);
        let y = normals(500, 4);
        let ind: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
        assert!(independence_test("null", &ind, 200, 0.01, 5).unwrap().passed());
        let same: Vec<(f64, f64)> = x.iter().map(|v| (*v, *v)).collect();
        let r = independence_test("same", &same, 200, 0.01, 5).unwrap();
        assert_eq!(r.decision, Decision::Fail);
        let constant: Vec<(f64, f64)> = x.iter().map(|v| (*v, 1.0)).collect();
        assert_eq!(independence_test("c", &constant, 200, 0.01, 5).unwrap().decision, Decision::Indeterminate);
        assert!(independence_test("small", &ind[..50], 200, 0.01, 5).is_err());
    }

    #[test]
    fn ks_p_values() {
        let x = normals(2000, 8);
        let y = normals(2000, 9);
        assert!(ks_two_sample(&x, &y).unwrap().1 > 0.01);
        let shifted: Vec<f64> = y.iter().map(|v| v + 0.5).collect();
        assert!(ks_two_sample(&x, &shifted).unwrap().1 < 1e-6);
        // D for fully separated samples is 1
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]).unwrap().0, 1.0);
        // Kolmogorov tail at 1.36 is about 0.049
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn basis_coefficients_satisfy_parseval() {
        for basis in [Basis::Trigonometric, Basis::Legendre] {
            let s: f64 = (1..=400).map(|k| basis.indicator_coefficient(k, 0.2, 0.7).powi(2)).sum();
            assert!((s - 0.5).abs() < 2e-3, "{basis:?} {s}");
            assert!((basis.indicator_coefficient(1, 0.2, 0.7) - 0.5).abs() < 1e-15);
        }
        // Legendre e_2 = √3(2x − 1): ∫_0^½ = −√3/4
        assert!((Basis::Legendre.indicator_coefficient(2, 0.0, 0.5) + 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn onb_spec_preconditions() {
        let same = OnbCounterexampleSpec { b: (0.0, 0.5), ..Default::default() };
        assert!(onb_counterexample(&same, 200, 1).is_err());
        let short = OnbCounterexampleSpec { k: 1, ..Default::default() };
        assert!(onb_counterexample(&short, 200, 1).is_err());
    }

    #[test]
    fn onb_counterexample_and_control() {
        let spec = OnbCounterexampleSpec::default();
        let r = onb_counterexample(&spec, 4000, 11).unwrap();
        assert_eq!(r.decision, Decision::Fail, "{r:?}");
        let control = OnbCounterexampleSpec { independent_arms: true, ..spec };
        assert!(onb_counterexample(&control, 4000, 11).unwrap().passed());
    }

    #[test]
    fn embedding_inequality_simple_cases() {
        let chars = Preset::CompoundPoisson { rate: 2.0, jumps: JumpLaw::Normal { mean: 0.5, sd: 2.0 } }
            .build(1)
            .unwrap();
        let o = Region::unit(1);
        let zero = TestFunction::Zero { dim: 1 };
        let e = embedding_terms(&chars, &zero, &o).unwrap();
        assert_eq!((e.lhs, e.rhs), (0.0, 0.0));
        let bump = TestFunction::Gaussian { center: vec![0.5], scale: 0.2 };
        assert!(embedding_inequality_check(&chars, &bump, &o).unwrap().passed());
        let stable = Preset::BalanStable { alpha: 1.5, p: 0.5, q: 0.5 }.build(1).unwrap();
        let one = TestFunction::indicator(o.clone());
        let e = embedding_terms(&stable, &one, &o).unwrap();
        assert!(e.lhs < e.rhs, "{e:?}");
    }

    #[test]
    fn gaussian_cf_and_report_formats() {
        let chars = Preset::GaussianWhiteNoise.build(1).unwrap();
        let cfg = SamplerConfig::new(3, Region::unit(1)).with_replicates(2000);
        let f = TestFunction::indicator(Region::unit(1));
        let (r, rows) = cf_match_test(&chars, &f, 1.0, &[0.5, 1.0, 2.0], &cfg).unwrap();
        assert!(r.passed(), "{rows:?}");
        assert!((rows[1].re_analytic - (-0.5f64).exp()).abs() < 1e-12);
        let csv = cf_rows_csv(&rows);
        assert!(csv.starts_with("u,re_emp,im_emp,re_analytic,im_analytic,radius,pass\n"));
        assert_eq!(csv.lines().count(), 4);
        let line = reports_jsonl(&[r.clone()]);
        let back: VerificationReport = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back, r);
        assert!(!suite_failed(&[r.clone(), VerificationReport { decision: Decision::Fail, ..r }.as_control()]));
        let small = cfg.with_replicates(10);
        assert!(cf_match_test(&chars, &f, 1.0, &[1.0], &small).is_err());
    }
}
