//! Adaptive Gauss–Kronrod quadrature in one dimension and tensor Gauss rules on boxes.

use crate::region::AxisBox;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

impl Quad {
    pub fn zero() -> Self {
        Quad { value: 0.0, error: 0.0, converged: true }
    }

    pub fn add(self, other: Quad) -> Quad {
        Quad {
            value: self.value + other.value,
            error: self.error + other.error,
            converged: self.converged && other.converged,
        }
    }

    pub fn scale(self, c: f64) -> Quad {
        Quad { value: c * self.value, error: c.abs() * self.error, converged: self.converged }
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    let vk = rk * h;
    let vg = rg * h;
    (vk, (vk - vg).abs())
}

/// Adaptive bisection on `[a, b]` until the summed error is below
/// `max(abs_tol, rel_tol * |value|)` or `max_panels` is hit.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quad {
    integrate_with_limit(&mut f, a, b, abs_tol, rel_tol, 4000)
}

pub fn integrate_with_limit<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Quad {
    if a == b {
        return Quad::zero();
    }
    if a > b {
        let q = integrate_with_limit(f, b, a, abs_tol, rel_tol, max_panels);
        return q.scale(-1.0);
    }
    let (v, e) = gk15(f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if !total.is_finite() || panels.len() >= max_panels {
            return Quad { value: total, error: err, converged: false };
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (pa, pb, pv, pe) = panels.swap_remove(idx);
        let m = 0.5 * (pa + pb);
        if m <= pa || m >= pb {
            // panel cannot be split further in floating point
            return Quad { value: total, error: err, converged: false };
        }
        let (v1, e1) = gk15(f, pa, m);
        let (v2, e2) = gk15(f, m, pb);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
    // re-sum to shed the drift of the running update
    let value = panels.iter().map(|p| p.2).sum();
    let error = panels.iter().map(|p| p.3).sum();
    Quad { value, error, converged: true }
}

/// Integral over a list of consecutive breakpoints.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Quad {
    let n = breaks.len().saturating_sub(1).max(1) as f64;
    breaks.windows(2).fold(Quad::zero(), |acc, w| {
        acc.add(integrate_with_limit(&mut f, w[0], w[1], abs_tol / n, rel_tol, 4000))
    })
}

/// `∫_a^∞ f` through `y = a + s/(1-s)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Quad {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - s;
        let v = f(a + s / w) / (w * w);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut g = g;
    integrate_with_limit(&mut g, 0.0, 1.0, abs_tol, rel_tol, 4000)
}

/// `∫_0^b y^{-k} h(y) dy`-type integrals with an integrable power singularity at 0.
/// With `y = w^{1/(1-k)} · b`-style substitution the integrand becomes bounded;
/// here `power` is the exponent `q` in `y = b · w^q`.
pub fn integrate_near_zero<F: FnMut(f64) -> f64>(mut f: F, b: f64, power: f64, abs_tol: f64, rel_tol: f64) -> Quad {
    let mut g = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let y = b * w.powf(power);
        let v = f(y) * b * power * w.powf(power - 1.0);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_with_limit(&mut g, 0.0, 1.0, abs_tol, rel_tol, 4000)
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Tensor Gauss–Legendre rule with `n` nodes per axis on `cells^d` sub-boxes.
pub fn cubature_box<F: FnMut(&[f64]) -> f64>(mut f: F, b: &AxisBox, n: usize, cells: usize) -> f64 {
    let d = b.dim();
    let (gx, gw) = gauss_legendre(n);
    let per_axis = n * cells;
    let mut nodes = vec![Vec::with_capacity(per_axis); d];
    let mut weights = vec![Vec::with_capacity(per_axis); d];
    for j in 0..d {
        let h = (b.hi[j] - b.lo[j]) / cells as f64;
        for c in 0..cells {
            let lo = b.lo[j] + c as f64 * h;
            for k in 0..n {
                nodes[j].push(lo + 0.5 * h * (gx[k] + 1.0));
                weights[j].push(0.5 * h * gw[k]);
            }
        }
    }
    let total = per_axis.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut sum = 0.0;
    let mut comp = 0.0;
    for idx in 0..total {
        let mut r = idx;
        let mut w = 1.0;
        for j in 0..d {
            let k = r % per_axis;
            r /= per_axis;
            x[j] = nodes[j][k];
            w *= weights[j][k];
        }
        // Kahan summation keeps the order-dependent rounding small
        let y = w * f(&x) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Nodes and weights of [`cubature_box`], for reusing one rule across many integrands.
pub fn cubature_nodes(b: &AxisBox, n: usize, cells: usize) -> Vec<(Vec<f64>, f64)> {
    let d = b.dim();
    let (gx, gw) = gauss_legendre(n);
    let per_axis = n * cells;
    let mut axis = vec![Vec::with_capacity(per_axis); d];
    for (j, ax) in axis.iter_mut().enumerate() {
        let h = (b.hi[j] - b.lo[j]) / cells as f64;
        for c in 0..cells {
            let lo = b.lo[j] + c as f64 * h;
            for k in 0..n {
                ax.push((lo + 0.5 * h * (gx[k] + 1.0), 0.5 * h * gw[k]));
            }
        }
    }
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|idx| {
            let mut r = idx;
            let mut x = vec![0.0; d];
            let mut w = 1.0;
            for j in 0..d {
                let (xj, wj) = axis[j][r % per_axis];
                r /= per_axis;
                x[j] = xj;
                w *= wj;
            }
            (x, w)
        })
        .collect()
}

/// Box cubature refined by doubling the cell count until two successive
/// estimates agree.
pub fn cubature_box_adaptive<F: FnMut(&[f64]) -> f64>(mut f: F, b: &AxisBox, abs_tol: f64, rel_tol: f64) -> Quad {
    let d = b.dim();
    let max_cells = match d {
        1 => 4096,
        2 => 64,
        3 => 16,
        _ => 4,
    };
    let mut cells = 1;
    let mut prev = cubature_box(&mut f, b, 8, cells);
    loop {
        cells *= 2;
        let next = cubature_box(&mut f, b, 8, cells);
        let err = (next - prev).abs();
        if err <= abs_tol.max(rel_tol * next.abs()) {
            return Quad { value: next, error: err, converged: true };
        }
        if cells >= max_cells {
            return Quad { value: next, error: err, converged: false };
        }
        prev = next;
    }
}

/// Neumaier-compensated sum of a slice.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_oscillatory() {
        let q = integrate(|x| x * x, 0.0, 3.0, 1e-13, 1e-13);
        assert!((q.value - 9.0).abs() < 1e-12 && q.converged);
        let q = integrate(|x| (10.0 * x).sin(), 0.0, std::f64::consts::PI, 1e-12, 1e-12);
        assert!(q.value.abs() < 1e-11);
    }

    #[test]
    fn tail_and_singular() {
        let q = integrate_to_infinity(|y| y.powf(-2.5), 1.0, 1e-12, 1e-12);
        assert!((q.value - 1.0 / 1.5).abs() < 1e-9, "{q:?}");
        // ∫_0^1 y^{-1/2} = 2
        let q = integrate_near_zero(|y| y.powf(-0.5), 1.0, 2.0, 1e-13, 1e-13);
        assert!((q.value - 2.0).abs() < 1e-11, "{q:?}");
    }

    #[test]
    fn gauss_nodes_integrate_degree_15() {
        let b = AxisBox::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        let v = cubature_box(|x| x[0].powi(7) * x[1].powi(6), &b, 8, 1);
        let exact = 2f64.powi(8) / 8.0 * 2.0 / 7.0;
        assert!((v - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}
