//! Lévy–Itô sampling of a Lévy-valued random measure on `(0, T] × window`.
//!
//! A realization keeps the jumps with `|y| > ε`, a Gaussian white-noise mesh
//! and the exact drift and compensator, so that `M(t, A)` is evaluated from
//! one fixed set of random inputs for every query `(t, A)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristics::{mytnik_scale, Characteristics, Preset};
use crate::density::{DensityMeasure, SpatialDensity};
use crate::error::{domain, Error, Result};
use crate::kernel::{JumpKernel, TailSampler};
use crate::quadrature::compensated_sum;
use crate::region::{AxisBox, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SmallJumpMode {
    /// Drop `|y| ≤ ε` and report the L² error bound.
    #[default]
    DropWithBound,
    /// Replace `|y| ≤ ε` by white noise of matching variance.
    GaussianSubstitute,
}

/// Resolution of the stored Gaussian mesh and of its on-demand refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "one")]
    pub time_steps: usize,
    /// Cells per axis over the bounding box of each window part.
    #[serde(default = "one")]
    pub space_cells: usize,
    /// Maximum number of bisections below a stored cell.
    #[serde(default = "default_depth")]
    pub refine_depth: usize,
}

fn one() -> usize {
    1
}

fn default_depth() -> usize {
    24
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { time_steps: 1, space_cells: 1, refine_depth: default_depth() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub small_jump_mode: SmallJumpMode,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub window: Region,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub mesh: MeshConfig,
}

fn default_eps() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    1.0
}

impl SamplerConfig {
    pub fn new(seed: u64, window: Region) -> Self {
        SamplerConfig {
            seed,
            eps: default_eps(),
            small_jump_mode: SmallJumpMode::default(),
            horizon: 1.0,
            window,
            replicates: 1,
            mesh: MeshConfig::default(),
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_replicates(mut self, n: usize) -> Self {
        self.replicates = n;
        self
    }

    pub fn with_mode(mut self, mode: SmallJumpMode) -> Self {
        self.small_jump_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps) {
            return domain(format!("truncation ε must lie in [0, 1], got {}", self.eps));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return domain(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if self.replicates == 0 {
            return domain("replicate count must be >= 1");
        }
        if self.window.is_empty() {
            return domain("window must be a non-empty bounded region");
        }
        self.window.validate()?;
        if self.mesh.time_steps == 0 || self.mesh.space_cells == 0 {
            return domain("mesh needs at least one cell per axis");
        }
        Ok(())
    }
}

/// RNG for one replicate; replicates use disjoint ChaCha streams of one key.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal attached to a refinement node: a counter-based draw keyed
/// by `(seed, replicate, node)`, so any query order yields the same value.
fn node_normal(seed: u64, replicate: u64, key: u64) -> f64 {
    let h1 = splitmix64(seed ^ splitmix64(key ^ 0xA076_1D64_78BD_642F) ^ splitmix64(replicate ^ 0xE703_7ED1_A0B4_28DB));
    let h2 = splitmix64(h1);
    let u1 = ((h1 >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (h2 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Integrability data of the Lévy–Itô representation over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyItoSpec {
    pub drift: DensityMeasure,
    pub gaussian: DensityMeasure,
    pub jump_intensity: Option<SpatialDensity>,
    pub kernel: Option<JumpKernel>,
    /// `∫ b² dζ` over the window.
    pub gaussian_mass: f64,
    /// `∫∫_{|y|≤1} |y|² ∧ |y|` over the window.
    pub small_jump_integral: f64,
    /// `∫∫_{|y|>1} |y| ∧ 1` over the window.
    pub large_jump_integral: f64,
}

impl LevyItoSpec {
    pub fn new(chars: &Characteristics, window: &Region) -> Result<Self> {
        chars.validate()?;
        let gaussian_mass = chars.sigma.measure(window)?.value;
        let (small, large) = match &chars.nu {
            Some(k) => {
                let m = k.modulation.integrate_abs_region(window)?.value;
                (m * k.small_second_moment(1.0), m * k.tail_mass(1.0))
            }
            None => (0.0, 0.0),
        };
        for (name, v) in [("Gaussian coefficient", gaussian_mass), ("small-jump", small), ("large-jump", large)] {
            if !v.is_finite() {
                return Err(Error::DivergentControlMeasure(format!("{name} integrability fails on the window")));
            }
        }
        Ok(LevyItoSpec {
            drift: chars.gamma.clone(),
            gaussian: chars.sigma.clone(),
            jump_intensity: chars.nu.as_ref().map(|k| k.modulation.clone()),
            kernel: chars.nu.clone(),
            gaussian_mass,
            small_jump_integral: small,
            large_jump_integral: large,
        })
    }
}

/// Characteristics of a named preset together with its Lévy–Itô data over the unit cube.
pub fn preset(name: &str, dim: usize) -> Result<(Characteristics, LevyItoSpec)> {
    let chars = Preset::parse(name)?.build(dim)?;
    let spec = LevyItoSpec::new(&chars, &Region::unit(dim))?;
    Ok((chars, spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub location: Vec<f64>,
    pub size: f64,
    pub compensated: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum CellSpace {
    Box(AxisBox),
    Atom(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    t0: f64,
    t1: f64,
    space: CellSpace,
}

#[derive(Debug, Clone, PartialEq)]
struct RootCell {
    cell: Cell,
    value: f64,
}

/// White noise with intensity `ℓ ⊗ G`, stored on a mesh and refined by
/// conditional splitting: a cell of mass `m = m₁ + m₂` carrying `W` passes
/// `W₁ = (m₁/m)W + √(m₁m₂/m)·Z` to one half and `W − W₁` to the other.
#[derive(Debug, Clone, PartialEq)]
struct GaussianField {
    density: SpatialDensity,
    /// `(location, mass)` of Gaussian point masses inside the window.
    atoms: Vec<(Vec<f64>, f64)>,
    roots: Vec<RootCell>,
    dim: usize,
    depth: usize,
    seed: u64,
    replicate: u64,
}

impl GaussianField {
    fn space_mass(&self, space: &CellSpace) -> f64 {
        match space {
            CellSpace::Box(b) => self.density.integrate_box(b).map(|q| q.value).unwrap_or(f64::NAN),
            CellSpace::Atom(i) => self.atoms[*i].1,
        }
    }

    fn mass(&self, c: &Cell) -> f64 {
        (c.t1 - c.t0) * self.space_mass(&c.space)
    }

    /// Split axis at a given depth: space axes in turn, then time.
    fn split(&self, c: &Cell, depth: usize) -> [Cell; 2] {
        let axis = match c.space {
            CellSpace::Atom(_) => self.dim,
            CellSpace::Box(_) => depth % (self.dim + 1),
        };
        if axis == self.dim {
            let mid = 0.5 * (c.t0 + c.t1);
            return [
                Cell { t0: c.t0, t1: mid, space: c.space.clone() },
                Cell { t0: mid, t1: c.t1, space: c.space.clone() },
            ];
        }
        let CellSpace::Box(b) = &c.space else { unreachable!() };
        let mid = 0.5 * (b.lo[axis] + b.hi[axis]);
        let mut left = b.clone();
        let mut right = b.clone();
        left.hi[axis] = mid;
        right.lo[axis] = mid;
        [
            Cell { t0: c.t0, t1: c.t1, space: CellSpace::Box(left) },
            Cell { t0: c.t0, t1: c.t1, space: CellSpace::Box(right) },
        ]
    }

    fn children(&self, c: &Cell, value: f64, key: u64, depth: usize) -> [(Cell, f64, u64); 2] {
        let [a, b] = self.split(c, depth);
        let (ma, mb) = (self.mass(&a), self.mass(&b));
        let m = ma + mb;
        let va = if m > 0.0 {
            let z = node_normal(self.seed, self.replicate, key);
            (ma / m) * value + (ma * mb / m).sqrt() * z
        } else {
            0.0
        };
        let ka = splitmix64(key.wrapping_mul(2));
        let kb = splitmix64(key.wrapping_mul(2).wrapping_add(1));
        [(a, va, ka), (b, value - va, kb)]
    }

    /// Fraction of the cell's time span inside `(0, t]` and of its spatial
    /// mass inside `A`.
    fn overlap(&self, c: &Cell, t: f64, a: &Region) -> (f64, f64) {
        let tf = ((t - c.t0) / (c.t1 - c.t0)).clamp(0.0, 1.0);
        let sf = match &c.space {
            CellSpace::Atom(i) => {
                if a.contains(&self.atoms[*i].0) {
                    1.0
                } else {
                    0.0
                }
            }
            CellSpace::Box(b) => {
                let vol = b.volume();
                let inside: f64 = a.parts.iter().filter_map(|p| p.intersect(b)).map(|p| p.volume()).sum();
                if inside <= 0.0 {
                    0.0
                } else if (inside - vol).abs() <= 1e-12 * vol {
                    1.0
                } else {
                    let total = self.space_mass(&c.space);
                    let part: f64 = a
                        .parts
                        .iter()
                        .filter_map(|p| p.intersect(b))
                        .map(|p| self.density.integrate_box(&p).map(|q| q.value).unwrap_or(0.0))
                        .sum();
                    if total > 0.0 {
                        part / total
                    } else {
                        0.0
                    }
                }
            }
        };
        (tf, sf)
    }

    fn evaluate(&self, t: f64, a: &Region) -> f64 {
        let mut parts = Vec::new();
        for (i, r) in self.roots.iter().enumerate() {
            self.descend(&r.cell, r.value, splitmix64(i as u64 + 1), 0, t, a, &mut parts);
        }
        compensated_sum(parts)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(&self, c: &Cell, value: f64, key: u64, depth: usize, t: f64, a: &Region, out: &mut Vec<f64>) {
        let (tf, sf) = self.overlap(c, t, a);
        if tf == 0.0 || sf == 0.0 || value == 0.0 {
            return;
        }
        if tf == 1.0 && sf == 1.0 {
            out.push(value);
            return;
        }
        if depth >= self.depth {
            out.push(value * tf * sf);
            return;
        }
        for (child, v, k) in self.children(c, value, key, depth) {
            self.descend(&child, v, k, depth + 1, t, a, out);
        }
    }

    /// `Σ f(centre)·W(cell)` over the cells `level` bisections below the stored mesh.
    fn pairing(&self, t: f64, a: &Region, level: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let mut parts = Vec::new();
        for (i, r) in self.roots.iter().enumerate() {
            self.pair_descend(&r.cell, r.value, splitmix64(i as u64 + 1), 0, level, t, a, f, &mut parts);
        }
        compensated_sum(parts)
    }

    #[allow(clippy::too_many_arguments)]
    fn pair_descend(
        &self,
        c: &Cell,
        value: f64,
        key: u64,
        depth: usize,
        level: usize,
        t: f64,
        a: &Region,
        f: &dyn Fn(&[f64]) -> f64,
        out: &mut Vec<f64>,
    ) {
        let (tf, sf) = self.overlap(c, t, a);
        if tf == 0.0 || sf == 0.0 || value == 0.0 {
            return;
        }
        if depth >= level.min(self.depth) {
            let x = match &c.space {
                CellSpace::Box(b) => b.center(),
                CellSpace::Atom(i) => self.atoms[*i].0.clone(),
            };
            out.push(f(&x) * value * tf * sf);
            return;
        }
        for (child, v, k) in self.children(c, value, key, depth) {
            self.pair_descend(&child, v, k, depth + 1, level, t, a, f, out);
        }
    }
}

/// One sampled path of `M` on `(0, T] × window`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    chars: Characteristics,
    cfg: SamplerConfig,
    replicate: u64,
    jumps: Vec<JumpRecord>,
    gaussian: Option<GaussianField>,
    /// `∫_{ε<|y|≤1} y ν₀(dy)`, the compensator rate per unit of jump intensity.
    compensator_rate: f64,
    /// `∫_{|y|≤ε} y² ν₀(dy)`
    small_variance: f64,
}

/// Sample replicate `0` of the configured experiment.
pub fn sample_field(chars: &Characteristics, cfg: &SamplerConfig) -> Result<FieldRealization> {
    sample_replicate(chars, cfg, 0)
}

pub fn sample_replicate(chars: &Characteristics, cfg: &SamplerConfig, replicate: u64) -> Result<FieldRealization> {
    let plan = Plan::new(chars, cfg)?;
    Ok(plan.realize(replicate))
}

/// Run `f` on every replicate in parallel; results come back in replicate order.
pub fn map_replicates<T, F>(chars: &Characteristics, cfg: &SamplerConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&FieldRealization) -> Result<T> + Sync,
{
    let plan = Plan::new(chars, cfg)?;
    (0..cfg.replicates as u64).into_par_iter().map(|r| f(&plan.realize(r))).collect()
}

/// Everything about a realization that does not depend on the random draws.
struct Plan<'a> {
    chars: &'a Characteristics,
    cfg: &'a SamplerConfig,
    gaussian_density: SpatialDensity,
    gaussian_atoms: Vec<(Vec<f64>, f64)>,
    root_cells: Vec<Cell>,
    jump_parts: Vec<(AxisBox, f64, f64)>,
    jump_rate: f64,
    compensator_rate: f64,
    small_variance: f64,
    tail: Option<TailSampler<'a>>,
}

impl<'a> Plan<'a> {
    fn new(chars: &'a Characteristics, cfg: &'a SamplerConfig) -> Result<Self> {
        chars.validate()?;
        cfg.validate()?;
        chars.check_dim(cfg.window.dim)?;
        if let Some(d) = &chars.domain {
            if !d.contains_region(&cfg.window) {
                return Err(Error::OutOfWindow("sampling window leaves the domain of the characteristics".into()));
            }
        }
        let eps = cfg.eps;
        let (compensator_rate, small_variance, tail) = match &chars.nu {
            Some(k) => {
                let tail = k.tail_mass(eps);
                if !tail.is_finite() {
                    return Err(Error::InfiniteActivity {
                        eps,
                        guidance: "the kernel has infinite activity; choose ε > 0 (ε = 1e-3 is a common start) \
                                   and read the reported small-jump bound"
                            .into(),
                    });
                }
                (k.band_first_moment(eps, 1.0), k.small_second_moment(eps), tail)
            }
            None => (0.0, 0.0, 0.0),
        };
        let mut jump_parts = Vec::new();
        let mut jump_rate = 0.0;
        if let Some(k) = &chars.nu {
            for b in &cfg.window.parts {
                let mass = k.modulation.integrate_box(b)?.value;
                if mass < 0.0 {
                    return domain("jump intensity must be nonnegative");
                }
                let sup = k.modulation.sup_abs_on_box(b);
                if mass > 0.0 && !sup.is_finite() {
                    return Err(Error::Unsupported("unbounded jump intensity on a window part".into()));
                }
                jump_rate += mass;
                jump_parts.push((b.clone(), mass, sup));
            }
            jump_rate *= tail;
        }
        let substitute = cfg.small_jump_mode == SmallJumpMode::GaussianSubstitute && small_variance > 0.0;
        let gaussian_density = match (&chars.nu, substitute) {
            (Some(k), true) => add_densities(&chars.sigma.density, &k.modulation, small_variance),
            _ => chars.sigma.density.clone(),
        };
        let gaussian_atoms: Vec<(Vec<f64>, f64)> = chars
            .sigma
            .atoms_in(&cfg.window)
            .filter(|a| a.mass > 0.0)
            .map(|a| (a.location.clone(), a.mass))
            .collect();
        let mut root_cells = Vec::new();
        if !gaussian_density.is_zero() || !gaussian_atoms.is_empty() {
            let dt = cfg.horizon / cfg.mesh.time_steps as f64;
            for i in 0..cfg.mesh.time_steps {
                let t0 = i as f64 * dt;
                let t1 = if i + 1 == cfg.mesh.time_steps { cfg.horizon } else { t0 + dt };
                if !gaussian_density.is_zero() {
                    for part in &cfg.window.parts {
                        for b in grid_boxes(part, cfg.mesh.space_cells) {
                            root_cells.push(Cell { t0, t1, space: CellSpace::Box(b) });
                        }
                    }
                }
                for j in 0..gaussian_atoms.len() {
                    root_cells.push(Cell { t0, t1, space: CellSpace::Atom(j) });
                }
            }
        }
        Ok(Plan {
            chars,
            cfg,
            gaussian_density,
            gaussian_atoms,
            root_cells,
            jump_parts,
            jump_rate: cfg.horizon * jump_rate,
            compensator_rate,
            small_variance,
            tail: chars.nu.as_ref().map(|k| k.tail_sampler(eps)),
        })
    }

    fn realize(&self, replicate: u64) -> FieldRealization {
        let cfg = self.cfg;
        let mut rng = replicate_rng(cfg.seed, replicate);
        let gaussian = if self.root_cells.is_empty() {
            None
        } else {
            let mut field = GaussianField {
                density: self.gaussian_density.clone(),
                atoms: self.gaussian_atoms.clone(),
                roots: Vec::with_capacity(self.root_cells.len()),
                dim: self.chars.dim,
                depth: cfg.mesh.refine_depth,
                seed: cfg.seed,
                replicate,
            };
            for c in &self.root_cells {
                let m = field.mass(c);
                let z: f64 = StandardNormal.sample(&mut rng);
                field.roots.push(RootCell { cell: c.clone(), value: m.max(0.0).sqrt() * z });
            }
            Some(field)
        };
        let mut jumps = Vec::new();
        if let (Some(k), Some(tail)) = (&self.chars.nu, &self.tail) {
            let n = poisson(self.jump_rate, &mut rng);
            jumps.reserve(n as usize);
            let total: f64 = self.jump_parts.iter().map(|p| p.1).sum();
            for _ in 0..n {
                let time = cfg.horizon * (1.0 - rng.random::<f64>());
                let location = self.sample_location(k, total, &mut rng);
                let size = tail.sample(&mut rng);
                jumps.push(JumpRecord { time, location, size, compensated: size.abs() <= 1.0 });
            }
            jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        }
        FieldRealization {
            chars: self.chars.clone(),
            cfg: cfg.clone(),
            replicate,
            jumps,
            gaussian,
            compensator_rate: self.compensator_rate,
            small_variance: self.small_variance,
        }
    }

    fn sample_location(&self, k: &JumpKernel, total: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut u = rng.random::<f64>() * total;
        let mut idx = self.jump_parts.len() - 1;
        for (i, p) in self.jump_parts.iter().enumerate() {
            if u < p.1 {
                idx = i;
                break;
            }
            u -= p.1;
        }
        let (b, _, sup) = &self.jump_parts[idx];
        let constant = k.modulation.is_constant().is_some();
        loop {
            let x: Vec<f64> = b.lo.iter().zip(&b.hi).map(|(lo, hi)| hi - (hi - lo) * rng.random::<f64>()).collect();
            if constant || rng.random::<f64>() * sup < k.modulation.value(&x) {
                return x;
            }
        }
    }
}

fn poisson(rate: f64, rng: &mut ChaCha8Rng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let d = Poisson::new(rate).expect("finite positive Poisson rate");
    d.sample(rng) as u64
}

fn grid_boxes(b: &AxisBox, cells: usize) -> Vec<AxisBox> {
    let d = b.dim();
    let mut out = Vec::with_capacity(cells.pow(d as u32));
    for idx in 0..cells.pow(d as u32) {
        let mut r = idx;
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        for j in 0..d {
            let i = r % cells;
            r /= cells;
            let w = (b.hi[j] - b.lo[j]) / cells as f64;
            lo[j] = b.lo[j] + i as f64 * w;
            hi[j] = if i + 1 == cells { b.hi[j] } else { lo[j] + w };
        }
        out.push(AxisBox { lo, hi, closure: b.closure.clone() });
    }
    out
}

fn add_densities(a: &SpatialDensity, b: &SpatialDensity, c: f64) -> SpatialDensity {
    match (a.is_constant(), b.is_constant()) {
        (Some(x), Some(y)) => SpatialDensity::constant(x + c * y),
        _ if a.is_zero() => scaled(b, c),
        _ => a.clone(),
    }
}

fn scaled(d: &SpatialDensity, c: f64) -> SpatialDensity {
    match d.clone() {
        SpatialDensity::Constant { value } => SpatialDensity::Constant { value: c * value },
        SpatialDensity::Quadratic { c0, c2 } => SpatialDensity::Quadratic { c0: c * c0, c2: c * c2 },
        SpatialDensity::Exponential { scale, rate } => SpatialDensity::Exponential { scale: c * scale, rate },
        SpatialDensity::PowerDecay { scale, r } => SpatialDensity::PowerDecay { scale: c * scale, r },
        SpatialDensity::RadialPower { scale, exponent } => SpatialDensity::RadialPower { scale: c * scale, exponent },
        SpatialDensity::Indicator { region, value } => SpatialDensity::Indicator { region, value: c * value },
    }
}

impl FieldRealization {
    pub fn characteristics(&self) -> &Characteristics {
        &self.chars
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn dim(&self) -> usize {
        self.chars.dim
    }

    pub fn horizon(&self) -> f64 {
        self.cfg.horizon
    }

    pub fn window(&self) -> &Region {
        &self.cfg.window
    }

    /// Retained jumps in time order.
    pub fn jumps(&self) -> &[JumpRecord] {
        &self.jumps
    }

    pub fn has_gaussian(&self) -> bool {
        self.gaussian.is_some()
    }

    pub fn check_query(&self, t: f64, a: &Region) -> Result<()> {
        self.chars.check_dim(a.dim)?;
        if !(0.0..=self.cfg.horizon).contains(&t) {
            return Err(Error::OutOfWindow(format!("time {t} outside (0, {}]", self.cfg.horizon)));
        }
        if !self.cfg.window.contains_region(a) {
            return Err(Error::OutOfWindow("query region is not inside the sampled window".into()));
        }
        Ok(())
    }

    /// `t·γ(A)`
    pub fn drift(&self, t: f64, a: &Region) -> Result<f64> {
        self.check_query(t, a)?;
        Ok(t * self.chars.gamma.measure(a)?.value)
    }

    /// Mean `t·∫_A∫_{ε<|y|≤1} y ν(x,dy)dx` subtracted from the retained small jumps.
    pub fn compensator(&self, t: f64, a: &Region) -> Result<f64> {
        self.check_query(t, a)?;
        Ok(match &self.chars.nu {
            Some(k) if self.compensator_rate != 0.0 => t * self.compensator_rate * k.modulation.integrate_region(a)?.value,
            _ => 0.0,
        })
    }

    /// Drift minus compensator, computed box by box so that equal rates cancel exactly.
    pub fn net_drift(&self, t: f64, a: &Region) -> Result<f64> {
        self.check_query(t, a)?;
        let mut parts = Vec::with_capacity(a.parts.len() + 1);
        for b in &a.parts {
            let g = self.chars.gamma.density.integrate_box(b)?.value;
            let c = match &self.chars.nu {
                Some(k) if self.compensator_rate != 0.0 => self.compensator_rate * k.modulation.integrate_box(b)?.value,
                _ => 0.0,
            };
            parts.push(g - c);
        }
        parts.push(self.chars.gamma.atoms_in(a).map(|x| x.mass).sum());
        Ok(t * compensated_sum(parts))
    }

    pub fn gaussian(&self, t: f64, a: &Region) -> Result<f64> {
        self.check_query(t, a)?;
        Ok(self.gaussian.as_ref().map_or(0.0, |g| g.evaluate(t, a)))
    }

    /// Sum of retained jump sizes in `(0, t] × A`, split into `|y| > 1` and `|y| ≤ 1`.
    pub fn jump_sums(&self, t: f64, a: &Region) -> Result<(f64, f64)> {
        self.check_query(t, a)?;
        let end = self.jumps.partition_point(|j| j.time <= t);
        let mut big = Vec::new();
        let mut small = Vec::new();
        for j in &self.jumps[..end] {
            if a.contains(&j.location) {
                if j.compensated {
                    small.push(j.size);
                } else {
                    big.push(j.size);
                }
            }
        }
        Ok((compensated_sum(big), compensated_sum(small)))
    }

    /// `M(t, A)` from the Lévy–Itô decomposition over the retained inputs.
    pub fn evaluate(&self, t: f64, a: &Region) -> Result<f64> {
        let (big, small) = self.jump_sums(t, a)?;
        let parts = [self.net_drift(t, a)?, self.gaussian(t, a)?, big, small];
        Ok(compensated_sum(parts))
    }

    /// `t·∫_A∫_{|y|≤ε} y² ν(x,dy)dx`, the variance of what truncation removed.
    pub fn small_jump_bound(&self, t: f64, a: &Region) -> Result<f64> {
        self.check_query(t, a)?;
        Ok(match &self.chars.nu {
            Some(k) if self.small_variance > 0.0 => t * self.small_variance * k.modulation.integrate_abs_region(a)?.value,
            _ => 0.0,
        })
    }

    /// Gaussian pairing `Σ f(centre)·W(cell)` at `level` bisections below the mesh.
    pub fn gaussian_pairing(&self, t: f64, a: &Region, level: usize, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        self.check_query(t, a)?;
        Ok(self.gaussian.as_ref().map_or(0.0, |g| g.pairing(t, a, level, f)))
    }

    pub fn refine_depth(&self) -> usize {
        self.cfg.mesh.refine_depth
    }

    pub fn compensator_rate(&self) -> f64 {
        self.compensator_rate
    }

    /// Replace the jump list; used to build hand-made fixtures.
    pub fn with_jumps(mut self, mut jumps: Vec<JumpRecord>) -> Self {
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        self.jumps = jumps;
        self
    }
}

/// `N` draws of `M(t, A)` from the Lévy–Itô construction restricted to
/// `(0, t] × A`, without materialising jump times or locations.
pub fn sample_marginal(chars: &Characteristics, cfg: &SamplerConfig, t: f64, a: &Region) -> Result<Vec<f64>> {
    let plan = Plan::new(chars, cfg)?;
    let probe = plan.realize(0);
    probe.check_query(t, a)?;
    if chars.nu.as_ref().is_some_and(|k| k.modulation.is_constant().is_none()) {
        return Err(Error::Unsupported("marginal fast path needs a constant jump intensity".into()));
    }
    let net = probe.net_drift(t, a)?;
    let mut gauss_var = t * plan.gaussian_density.integrate_region(a)?.value;
    gauss_var += t * plan.gaussian_atoms.iter().filter(|(x, _)| a.contains(x)).map(|(_, m)| m).sum::<f64>();
    let rate = match &chars.nu {
        Some(k) => t * k.tail_mass(cfg.eps) * k.modulation.integrate_region(a)?.value,
        None => 0.0,
    };
    let tail = plan.tail.as_ref();
    let gsd = gauss_var.max(0.0).sqrt();
    Ok((0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            let z: f64 = StandardNormal.sample(&mut rng);
            let (small, big) = match tail {
                Some(k) => k.sum_jumps(poisson(rate, &mut rng), &mut rng),
                None => (0.0, 0.0),
            };
            net + gsd * z + big + small
        })
        .collect())
}

/// Chambers–Mallows–Stuck draws from `S_α(σ, β, 0)`, whose characteristic
/// function is `exp(−σ^α|u|^α(1 − iβ sgn(u) tan(πα/2)))` for `α ≠ 1` and
/// `exp(−σ|u|)` for the symmetric Cauchy case.
pub fn sample_stable_marginal_oracle(alpha: f64, beta: f64, scale: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return domain(format!("stable index must lie in (0, 2], got {alpha}"));
    }
    if !(-1.0..=1.0).contains(&beta) {
        return domain(format!("skewness must lie in [-1, 1], got {beta}"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return domain(format!("scale must be positive, got {scale}"));
    }
    if alpha == 1.0 && beta != 0.0 {
        return Err(Error::Unsupported("α = 1 with β ≠ 0 is outside the symmetric parametrisation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| scale * cms_standard(alpha, beta, &mut rng)).collect())
}

fn cms_standard(alpha: f64, beta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        return v.tan();
    }
    let zeta = beta * (PI * alpha / 2.0).tan();
    let b = zeta.atan() / alpha;
    let s = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));
    s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
        * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Draws of `M(t, A)` under mytnik-positive(α): totally skewed stable with
/// `σ^α = t·leb(A)·|cos(πα/2)|`, the law the preset's characteristics produce.
pub fn sample_spectrally_positive(alpha: f64, t: f64, a: &Region, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return domain(format!("spectrally positive sampler needs α in (1, 2), got {alpha}"));
    }
    if !(t > 0.0) || a.is_empty() {
        return domain("need t > 0 and a non-empty region");
    }
    sample_stable_marginal_oracle(alpha, 1.0, mytnik_scale(alpha, t * a.volume()), n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::JumpLaw;

    fn unit_cfg(seed: u64) -> SamplerConfig {
        SamplerConfig::new(seed, Region::unit(1))
    }

    #[test]
    fn gaussian_noise_has_unit_variance_on_unit_interval() {
        let chars = Preset::GaussianWhiteNoise.build(1).unwrap();
        let cfg = unit_cfg(7).with_replicates(4000);
        let xs = map_replicates(&chars, &cfg, |r| r.evaluate(1.0, &Region::unit(1))).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn compound_poisson_value_is_jump_count() {
        let chars = Preset::CompoundPoisson { rate: 2.0, jumps: JumpLaw::Constant { value: 1.0 } }.build(1).unwrap();
        let cfg = unit_cfg(3).with_horizon(3.0).with_eps(0.0).with_replicates(2000);
        let xs = map_replicates(&chars, &cfg, |r| {
            let v = r.evaluate(3.0, &Region::unit(1))?;
            assert_eq!(v, r.jumps().len() as f64);
            Ok(v)
        })
        .unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 6.0).abs() < 3.0 * (6.0f64 / 2000.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn infinite_activity_needs_positive_eps() {
        let chars = Preset::BalanStable { alpha: 1.5, p: 0.5, q: 0.5 }.build(1).unwrap();
        let err = sample_field(&chars, &unit_cfg(1).with_eps(0.0)).unwrap_err();
        assert!(matches!(err, Error::InfiniteActivity { .. }));
    }

    #[test]
    fn same_seed_same_realization() {
        let chars = Preset::BalanStable { alpha: 1.2, p: 0.7, q: 0.3 }.build(1).unwrap();
        let cfg = unit_cfg(11).with_eps(0.05);
        let a = sample_replicate(&chars, &cfg, 5).unwrap();
        let b = sample_replicate(&chars, &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.jumps(), sample_replicate(&chars, &cfg, 6).unwrap().jumps());
    }

    #[test]
    fn jump_records_respect_truncation() {
        let chars = Preset::BalanStable { alpha: 0.8, p: 0.5, q: 0.5 }.build(2).unwrap();
        let cfg = SamplerConfig::new(2, Region::unit(2)).with_eps(0.1).with_horizon(2.0);
        let r = sample_field(&chars, &cfg).unwrap();
        assert!(!r.jumps().is_empty());
        for j in r.jumps() {
            assert!(j.size.abs() > 0.1);
            assert_eq!(j.compensated, j.size.abs() <= 1.0);
            assert!(j.time > 0.0 && j.time <= 2.0);
            assert!(Region::unit(2).contains(&j.location));
        }
    }

    #[test]
    fn gaussian_refinement_is_additive() {
        let chars = Preset::GaussianWhiteNoise.build(2).unwrap();
        let cfg = SamplerConfig::new(9, Region::unit(2));
        let r = sample_field(&chars, &cfg).unwrap();
        let whole = Region::unit(2);
        let left = Region::from_box(AxisBox::new(vec![0.0, 0.0], vec![0.3, 1.0]).unwrap());
        let right = Region::from_box(AxisBox::new(vec![0.3, 0.0], vec![1.0, 1.0]).unwrap());
        let w = r.evaluate(1.0, &whole).unwrap();
        let s = r.evaluate(1.0, &left).unwrap() + r.evaluate(1.0, &right).unwrap();
        assert!((w - s).abs() < 1e-12, "{w} vs {s}");
        let early = r.evaluate(0.37, &left).unwrap();
        let late = r.evaluate(1.0, &left).unwrap();
        assert!(early != late);
    }

    #[test]
    fn split_cells_have_conditional_variance() {
        // W(½) given W(1) over many replicates: Var = ¼
        let chars = Preset::GaussianWhiteNoise.build(1).unwrap();
        let cfg = unit_cfg(21).with_replicates(4000);
        let half = Region::interval(0.0, 0.5).unwrap();
        let pairs = map_replicates(&chars, &cfg, |r| Ok((r.evaluate(1.0, &half)?, r.evaluate(1.0, &Region::unit(1))?))).unwrap();
        let resid: Vec<f64> = pairs.iter().map(|(h, w)| h - 0.5 * w).collect();
        let var = resid.iter().map(|x| x * x).sum::<f64>() / resid.len() as f64;
        assert!((var - 0.25).abs() < 0.03, "{var}");
    }

    #[test]
    fn cms_gaussian_limit_and_cauchy_median() {
        let xs = sample_stable_marginal_oracle(2.0, 0.0, 1.5, 20000, 4).unwrap();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - 4.5).abs() < 3.0 * 4.5 * (2.0f64 / 20000.0).sqrt(), "{var}");
        let mut c = sample_stable_marginal_oracle(1.0, 0.0, 1.0, 20001, 5).unwrap();
        c.sort_by(f64::total_cmp);
        assert!(c[10000].abs() < 0.05);
        assert!(matches!(sample_stable_marginal_oracle(1.0, 0.5, 1.0, 1, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn spectrally_positive_rejects_bad_index() {
        assert!(sample_spectrally_positive(0.8, 1.0, &Region::unit(1), 1, 1).is_err());
        assert_eq!(sample_spectrally_positive(1.5, 1.0, &Region::unit(1), 3, 1).unwrap().len(), 3);
    }

    #[test]
    fn presets_carry_expected_characteristics() {
        let (c, spec) = preset("balan-stable(0.5,1,0)", 1).unwrap();
        assert_eq!(c.gamma.density.is_constant(), Some(1.0));
        assert!(spec.large_jump_integral.is_finite());
        let (g, _) = preset("gaussian-white-noise", 2).unwrap();
        assert!(g.nu.is_none() && g.gamma.is_zero());
    }
}
