//! Additive sheets `X(t, x) = M(t, (0, x])`, box increments and the
//! weak-derivative duality between `X` and the integral of `M`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::integrator::integrate;
use crate::quadrature::compensated_sum;
use crate::region::{AxisBox, Closure, Region};
use crate::sampler::FieldRealization;
use crate::testfn::TestFunction;

/// Sheet view of a realization.
///
/// For `x_i < 0` the `i`-th factor of `(0, x]` is `[x_i, 0)` and carries a
/// minus sign, so that box increments telescope across orthants.
#[derive(Debug, Clone)]
pub struct SheetRealization {
    source: FieldRealization,
}

pub fn sheet_from_field(real: FieldRealization) -> SheetRealization {
    SheetRealization { source: real }
}

/// `(0, x]` with the signed-orthant convention, or `None` when some `x_i = 0`.
pub fn orthant_box(x: &[f64]) -> Option<(AxisBox, f64)> {
    let mut lo = Vec::with_capacity(x.len());
    let mut hi = Vec::with_capacity(x.len());
    let mut closure = Vec::with_capacity(x.len());
    let mut sign = 1.0;
    for &xi in x {
        if xi > 0.0 {
            lo.push(0.0);
            hi.push(xi);
            closure.push(Closure::LeftOpen);
        } else if xi < 0.0 {
            lo.push(xi);
            hi.push(0.0);
            closure.push(Closure::RightOpen);
            sign = -sign;
        } else {
            return None;
        }
    }
    Some((AxisBox { lo, hi, closure: Some(closure) }, sign))
}

impl SheetRealization {
    pub fn source(&self) -> &FieldRealization {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// `X(t, x)`
    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.source.characteristics().check_dim(x.len())?;
        match orthant_box(x) {
            None => Ok(0.0),
            Some((b, sign)) => Ok(sign * self.source.evaluate(t, &Region::from_box(b))?),
        }
    }

    /// Values on the tensor grid `grid[0] × … × grid[d−1]`, first axis fastest.
    pub fn grid_values(&self, t: f64, grid: &[Vec<f64>]) -> Result<Vec<(Vec<f64>, f64)>> {
        if grid.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: grid.len() });
        }
        let total: usize = grid.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let mut r = idx;
            let x: Vec<f64> = grid
                .iter()
                .map(|g| {
                    let v = g[r % g.len()];
                    r /= g.len();
                    v
                })
                .collect();
            let v = self.value(t, &x)?;
            out.push((x, v));
        }
        Ok(out)
    }

    /// CSV with columns `x1, …, xd, value`.
    pub fn grid_csv(&self, t: f64, grid: &[Vec<f64>]) -> Result<String> {
        let mut s = String::new();
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        let _ = writeln!(s, "{},value", header.join(","));
        for (x, v) in self.grid_values(t, grid)? {
            let cols: Vec<String> = x.iter().map(|c| format!("{c:?}")).collect();
            let _ = writeln!(s, "{},{v:?}", cols.join(","));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxIncrement {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub value: f64,
}

/// `Δ_a^b X(t, ·)`: the alternating sum over the `2^d` corners, with sign
/// `(−1)^{number of a-coordinates}`.
pub fn box_increment(sheet: &SheetRealization, t: f64, a: &[f64], b: &[f64]) -> Result<BoxIncrement> {
    let d = sheet.dim();
    if a.len() != d || b.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: a.len().min(b.len()) });
    }
    if a.iter().zip(b).any(|(x, y)| x > y) {
        return domain("box increment needs a <= b componentwise");
    }
    if a.iter().zip(b).any(|(x, y)| x == y) {
        return Ok(BoxIncrement { a: a.to_vec(), b: b.to_vec(), value: 0.0 });
    }
    let mut terms = Vec::with_capacity(1 << d);
    for mask in 0..(1usize << d) {
        let corner: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { a[j] } else { b[j] }).collect();
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(sign * sheet.value(t, &corner)?);
    }
    Ok(BoxIncrement { a: a.to_vec(), b: b.to_vec(), value: compensated_sum(terms) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityResult {
    /// `(−1)^d ∫ ḟ(x) X(t, x) dx`
    pub lhs: f64,
    /// `∫ f dM(t, ·)`
    pub rhs: f64,
    pub error: f64,
    /// Largest cell width used along any axis.
    pub h: f64,
    pub cells: usize,
}

/// Compares `(−1)^d ∫ ḟ X(t, ·) dx`, by the tensor midpoint rule on a mesh of
/// width at most `h` aligned with the jump coordinates, to `∫ f dM(t, ·)`.
pub fn duality_check(real: &FieldRealization, f: &TestFunction, t: f64, h: f64) -> Result<DualityResult> {
    let d = real.dim();
    real.characteristics().check_dim(f.dim())?;
    if !(h > 0.0) {
        return domain("mesh width must be positive");
    }
    let support = f.support().ok_or_else(|| Error::Precondition("duality check needs compact support".into()))?;
    let window = real.window().bounding_box().expect("validated window");
    for j in 0..d {
        if !(support.lo[j] > window.lo[j] && support.hi[j] < window.hi[j]) {
            return Err(Error::Precondition("support of f must lie strictly inside the window".into()));
        }
    }
    // every (0, x] with x in the support must be inside the window
    let hull = hull_box(&support);
    if hull.volume() > 0.0 && !real.window().contains_region(&Region::from_box(hull)) {
        return Err(Error::OutOfWindow("the sheet over the support reaches outside the window".into()));
    }
    let rhs = integrate(real, f, t, real.window())?.value;

    let end = real.jumps().partition_point(|j| j.time <= t);
    let jumps = &real.jumps()[..end];
    // per-axis midpoints and widths on a mesh through every jump coordinate
    let mut mids: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut widths: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut hmax: f64 = 0.0;
    for j in 0..d {
        let mut breaks = vec![support.lo[j], support.hi[j]];
        if support.lo[j] < 0.0 && support.hi[j] > 0.0 {
            breaks.push(0.0);
        }
        breaks.extend(jumps.iter().map(|r| r.location[j]).filter(|x| *x > support.lo[j] && *x < support.hi[j]));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut m = Vec::new();
        let mut w = Vec::new();
        for pair in breaks.windows(2) {
            let n = ((pair[1] - pair[0]) / h).ceil().max(1.0) as usize;
            let step = (pair[1] - pair[0]) / n as f64;
            hmax = hmax.max(step);
            for k in 0..n {
                let lo = pair[0] + k as f64 * step;
                let hi = if k + 1 == n { pair[1] } else { lo + step };
                m.push(0.5 * (lo + hi));
                w.push(hi - lo);
            }
        }
        mids.push(m);
        widths.push(w);
    }
    let shape: Vec<usize> = mids.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let mut acc = vec![0.0; total];
    for r in jumps {
        let mut ranges = Vec::with_capacity(d);
        for j in 0..d {
            let x = r.location[j];
            let m = &mids[j];
            let range = if x > 0.0 {
                (m.partition_point(|p| *p < x), m.len())
            } else if x < 0.0 {
                (0, m.partition_point(|p| *p <= x))
            } else {
                (0, 0)
            };
            ranges.push(range);
        }
        if ranges.iter().any(|(a, b)| a >= b) {
            continue;
        }
        add_block(&mut acc, &shape, &ranges, r.size);
    }
    let smooth = real.has_gaussian()
        || !real.characteristics().gamma.atoms.is_empty()
        || real.net_drift(t, &Region::from_box(hull_box(&support)))? != 0.0;
    let sgn_d = if d % 2 == 0 { 1.0 } else { -1.0 };
    let mut terms = Vec::with_capacity(total);
    let mut x = vec![0.0; d];
    for (idx, a) in acc.iter().enumerate() {
        let mut r = idx;
        let mut vol = 1.0;
        for j in 0..d {
            let k = r % shape[j];
            r /= shape[j];
            x[j] = mids[j][k];
            vol *= widths[j][k];
        }
        let sign = x.iter().filter(|v| **v < 0.0).count() % 2;
        let sign = if sign == 0 { 1.0 } else { -1.0 };
        let mut xv = sign * a;
        if smooth {
            if let Some((b, s)) = orthant_box(&x) {
                let region = Region::from_box(b);
                xv += s * (real.net_drift(t, &region)? + real.gaussian(t, &region)?);
            }
        }
        if xv != 0.0 {
            terms.push(vol * f.mixed_partial(&x)? * xv);
        }
    }
    let lhs = sgn_d * compensated_sum(terms);
    Ok(DualityResult { lhs, rhs, error: (lhs - rhs).abs(), h: hmax, cells: total })
}

/// Smallest box holding the origin and `b`.
fn hull_box(b: &AxisBox) -> AxisBox {
    AxisBox {
        lo: b.lo.iter().map(|x| x.min(0.0)).collect(),
        hi: b.hi.iter().map(|x| x.max(0.0)).collect(),
        closure: None,
    }
}

/// Add `v` to every cell of the product of index ranges (first axis fastest).
fn add_block(acc: &mut [f64], shape: &[usize], ranges: &[(usize, usize)], v: f64) {
    let d = shape.len();
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    loop {
        let mut flat = 0;
        let mut stride = 1;
        for j in 0..d {
            flat += idx[j] * stride;
            stride *= shape[j];
        }
        acc[flat] += v;
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < ranges[j].1 {
                break;
            }
            idx[j] = ranges[j].0;
            j += 1;
            if j == d {
                return;
            }
        }
    }
}

/// Errors of [`duality_check`] over successive halvings of `h` and the
/// observed orders `log₂(e_k / e_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityStudy {
    pub results: Vec<DualityResult>,
    pub orders: Vec<f64>,
}

pub fn duality_study(real: &FieldRealization, f: &TestFunction, t: f64, h0: f64, halvings: usize) -> Result<DualityStudy> {
    let mut results = Vec::with_capacity(halvings + 1);
    for k in 0..=halvings {
        results.push(duality_check(real, f, t, h0 / 2f64.powi(k as i32))?);
    }
    let orders = results.windows(2).map(|w| (w[0].error / w[1].error).log2()).collect();
    Ok(DualityStudy { results, orders })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LampReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl LampReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const LAMP_STEPS: i32 = 30;
const LAMP_TOL: f64 = 1e-6;

/// Grid-resolution check of the lamp property: at every jump inside the grid's
/// hull and at the interior grid points, the limit from the upper-right orthant
/// equals the value, and the limit from strictly lower coordinates equals the
/// value minus the jumps sitting on the lower boundary of `(0, x]`.
pub fn lamp_grid_check(sheet: &SheetRealization, t: f64, grid: &[Vec<f64>]) -> Result<LampReport> {
    let d = sheet.dim();
    if grid.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: grid.len() });
    }
    let lo: Vec<f64> = grid.iter().map(|g| g.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = grid.iter().map(|g| g.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    if (0..d).any(|j| !(lo[j] < hi[j])) {
        return Ok(LampReport { checked: 0, violations: Vec::new() });
    }
    let spacing = grid
        .iter()
        .flat_map(|g| {
            let mut s = g.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).map(|w| w[1] - w[0]).filter(|x| *x > 0.0).collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min);
    let real = sheet.source();
    let end = real.jumps().partition_point(|j| j.time <= t);
    let jumps = &real.jumps()[..end];
    let inside = |x: &[f64]| (0..d).all(|j| x[j] > lo[j] && x[j] < hi[j]);
    let mut points: Vec<(Vec<f64>, bool)> =
        jumps.iter().filter(|r| inside(&r.location)).map(|r| (r.location.clone(), true)).collect();
    for (x, _) in sheet.grid_values(t, grid).unwrap_or_default() {
        if inside(&x) {
            points.push((x, false));
        }
    }
    let delta = spacing * 2f64.powi(-LAMP_STEPS);
    let mut violations = Vec::new();
    for (x, is_jump) in &points {
        if x.iter().any(|v| *v <= 0.0) {
            continue;
        }
        let here = sheet.value(t, x)?;
        let up: Vec<f64> = x.iter().map(|v| v + delta).collect();
        let above = sheet.value(t, &up)?;
        if (above - here).abs() > LAMP_TOL {
            violations.push(format!("upper-right limit at {x:?}: {above} vs value {here}"));
        }
        if *is_jump {
            let down: Vec<f64> = x.iter().map(|v| v - delta).collect();
            let below = sheet.value(t, &down)?;
            let on_edge: f64 = jumps
                .iter()
                .filter(|r| {
                    (0..d).all(|j| r.location[j] <= x[j] && r.location[j] > 0.0)
                        && (0..d).any(|j| r.location[j] == x[j])
                })
                .map(|r| r.size)
                .sum();
            if (below - (here - on_edge)).abs() > LAMP_TOL {
                violations.push(format!("lower limit at {x:?}: {below} vs pre-jump value {}", here - on_edge));
            }
        }
    }
    Ok(LampReport { checked: points.len(), violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::Preset;
    use crate::kernel::JumpLaw;
    use crate::sampler::{sample_field, JumpRecord, SamplerConfig};

    fn jump_sheet(d: usize, window: Region, jumps: Vec<JumpRecord>) -> SheetRealization {
        let chars = Preset::CompoundPoisson { rate: 1.0, jumps: JumpLaw::Constant { value: 1.0 } }.build(d).unwrap();
        let cfg = SamplerConfig::new(1, window).with_eps(0.0);
        sheet_from_field(sample_field(&chars, &cfg).unwrap().with_jumps(jumps))
    }

    fn jump(time: f64, location: Vec<f64>, size: f64) -> JumpRecord {
        JumpRecord { time, location, size, compensated: size.abs() <= 1.0 }
    }

    #[test]
    fn zero_on_axes_and_single_jump() {
        let s = jump_sheet(1, Region::unit(1), vec![jump(0.2, vec![0.5], 3.0)]);
        assert_eq!(s.value(1.0, &[0.0]).unwrap(), 0.0);
        assert_eq!(s.value(1.0, &[0.7]).unwrap(), 3.0);
        assert_eq!(s.value(1.0, &[0.4]).unwrap(), 0.0);
        assert_eq!(s.value(0.1, &[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn increments_in_two_dimensions() {
        let s = jump_sheet(2, Region::unit(2), vec![jump(0.5, vec![0.5, 0.5], 2.0)]);
        let inc = box_increment(&s, 1.0, &[0.4, 0.4], &[0.6, 0.6]).unwrap();
        assert_eq!(inc.value, 2.0);
        assert_eq!(box_increment(&s, 1.0, &[0.6, 0.4], &[0.8, 0.6]).unwrap().value, 0.0);
        assert_eq!(box_increment(&s, 1.0, &[0.6, 0.4], &[0.6, 0.6]).unwrap().value, 0.0);
        assert!(box_increment(&s, 1.0, &[0.7, 0.4], &[0.6, 0.6]).is_err());
    }

    #[test]
    fn increments_match_measure_in_every_orthant() {
        let w = Region::from_box(AxisBox::cube(2, -1.0, 1.0));
        let locs = [[0.3, 0.4], [-0.3, 0.4], [-0.3, -0.4], [0.3, -0.4]];
        for loc in locs {
            let s = jump_sheet(2, w.clone(), vec![jump(0.5, loc.to_vec(), 1.5)]);
            // a box straddling the origin and one inside the jump's own orthant
            let wide = box_increment(&s, 1.0, &[-0.8, -0.8], &[0.8, 0.8]).unwrap().value;
            assert_eq!(wide, 1.5, "orthant of {loc:?}");
            let a = [loc[0] - 0.1, loc[1] - 0.1];
            let b = [loc[0] + 0.1, loc[1] + 0.1];
            assert_eq!(box_increment(&s, 1.0, &a, &b).unwrap().value, 1.5, "orthant of {loc:?}");
            let off = box_increment(&s, 1.0, &[b[0], a[1]], &[b[0] + 0.05, b[1]]).unwrap().value;
            assert_eq!(off, 0.0);
        }
    }

    #[test]
    fn one_dimensional_duality_by_hand() {
        let s = jump_sheet(1, Region::unit(1), vec![jump(0.5, vec![0.5], 1.0)]);
        let f = TestFunction::Bump { center: vec![0.5], radius: 0.3, power: Some(4) };
        let study = duality_study(s.source(), &f, 1.0, 0.01, 3).unwrap();
        let last = study.results.last().unwrap();
        assert!((last.rhs - f.eval(&[0.5])).abs() < 1e-15);
        assert!(last.error < 1e-5, "{last:?}");
        assert!(study.orders.iter().all(|p| (p - 2.0).abs() < 0.1), "{:?}", study.orders);
    }

    #[test]
    fn duality_of_empty_realization_is_zero() {
        let s = jump_sheet(2, Region::unit(2), vec![]);
        let f = TestFunction::Bump { center: vec![0.5, 0.5], radius: 0.3, power: Some(4) };
        let r = duality_check(s.source(), &f, 1.0, 0.05).unwrap();
        assert_eq!((r.lhs, r.rhs, r.error), (0.0, 0.0, 0.0));
    }

    #[test]
    fn support_touching_the_boundary_is_rejected() {
        let s = jump_sheet(1, Region::unit(1), vec![]);
        let f = TestFunction::Bump { center: vec![0.8], radius: 0.2, power: Some(4) };
        assert!(duality_check(s.source(), &f, 1.0, 0.01).is_err());
    }

    #[test]
    fn lamp_checks() {
        let s = jump_sheet(2, Region::unit(2), vec![jump(0.5, vec![0.5, 0.5], 2.0)]);
        let grid = vec![vec![0.25, 0.5, 0.75], vec![0.25, 0.5, 0.75]];
        let rep = lamp_grid_check(&s, 1.0, &grid).unwrap();
        assert!(rep.passed() && rep.checked > 0, "{rep:?}");
        let single = lamp_grid_check(&s, 1.0, &[vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(single.checked, 0);
        let g = Preset::GaussianWhiteNoise.build(1).unwrap();
        let gs = sheet_from_field(sample_field(&g, &SamplerConfig::new(2, Region::unit(1))).unwrap());
        assert!(lamp_grid_check(&gs, 1.0, &[vec![0.2, 0.5, 0.8]]).unwrap().passed());
    }
}
