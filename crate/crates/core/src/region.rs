//! Axis-aligned boxes and finite disjoint unions of them.
//!
//! Boxes are half-open. The default orientation is `(lo, hi]` on every axis;
//! the signed-orthant convention used by additive sheets needs `[lo, hi)` on
//! negative axes, so each axis carries its own [`Closure`].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Closure {
    /// `(lo, hi]`
    #[default]
    LeftOpen,
    /// `[lo, hi)`
    RightOpen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<Vec<Closure>>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = AxisBox { lo, hi, closure: None };
        b.validate()?;
        Ok(b)
    }

    pub fn unit(dim: usize) -> Self {
        AxisBox { lo: vec![0.0; dim], hi: vec![1.0; dim], closure: None }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        AxisBox { lo: vec![lo; dim], hi: vec![hi; dim], closure: None }
    }

    pub fn with_closure(mut self, closure: Vec<Closure>) -> Self {
        self.closure = Some(closure);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_empty() {
            return domain("box must have dimension >= 1");
        }
        if self.lo.len() != self.hi.len() {
            return Err(Error::DimensionMismatch { expected: self.lo.len(), found: self.hi.len() });
        }
        if let Some(c) = &self.closure {
            if c.len() != self.lo.len() {
                return Err(Error::DimensionMismatch { expected: self.lo.len(), found: c.len() });
            }
        }
        for (a, b) in self.lo.iter().zip(&self.hi) {
            if !(a.is_finite() && b.is_finite()) {
                return domain("box endpoints must be finite");
            }
            if a >= b {
                return domain(format!("empty box: lo {a} >= hi {b}"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    fn closure_at(&self, j: usize) -> Closure {
        self.closure.as_ref().map(|c| c[j]).unwrap_or_default()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|j| match self.closure_at(j) {
            Closure::LeftOpen => x[j] > self.lo[j] && x[j] <= self.hi[j],
            Closure::RightOpen => x[j] >= self.lo[j] && x[j] < self.hi[j],
        })
    }

    /// Closed-box containment, used for support and window checks.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|j| x[j] >= self.lo[j] && x[j] <= self.hi[j])
    }

    pub fn contains_box(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|j| other.lo[j] >= self.lo[j] && other.hi[j] <= self.hi[j])
    }

    /// Intersection as a set of positive volume; the closure of `self` wins on
    /// axes where the result keeps one of its endpoints.
    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        let d = self.dim();
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for j in 0..d {
            let a = self.lo[j].max(other.lo[j]);
            let b = self.hi[j].min(other.hi[j]);
            if a >= b {
                return None;
            }
            lo.push(a);
            hi.push(b);
        }
        Some(AxisBox { lo, hi, closure: self.closure.clone() })
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn overlaps(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|j| self.lo[j].max(other.lo[j]) < self.hi[j].min(other.hi[j]))
    }

    /// Closest and farthest Euclidean distance from the origin over the box.
    pub fn radial_range(&self) -> (f64, f64) {
        let mut near = 0.0;
        let mut far = 0.0;
        for j in 0..self.dim() {
            let (a, b) = (self.lo[j], self.hi[j]);
            let n = if a > 0.0 {
                a
            } else if b < 0.0 {
                -b
            } else {
                0.0
            };
            let f = a.abs().max(b.abs());
            near += n * n;
            far += f * f;
        }
        (near.sqrt(), far.sqrt())
    }
}

/// A finite union of pairwise disjoint boxes of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub dim: usize,
    pub parts: Vec<AxisBox>,
}

impl Region {
    pub fn new(dim: usize, parts: Vec<AxisBox>) -> Result<Self> {
        let r = Region { dim, parts };
        r.validate()?;
        Ok(r)
    }

    pub fn empty(dim: usize) -> Self {
        Region { dim, parts: Vec::new() }
    }

    pub fn from_box(b: AxisBox) -> Self {
        Region { dim: b.dim(), parts: vec![b] }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Ok(Region::from_box(AxisBox::new(vec![lo], vec![hi])?))
    }

    pub fn unit(dim: usize) -> Self {
        Region::from_box(AxisBox::unit(dim))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return domain("region dimension must be >= 1");
        }
        for b in &self.parts {
            if b.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: b.dim() });
            }
            b.validate()?;
        }
        for (i, a) in self.parts.iter().enumerate() {
            for b in &self.parts[i + 1..] {
                if a.overlaps(b) {
                    return domain(format!("region parts overlap: {a:?} and {b:?}"));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.parts.iter().map(AxisBox::volume).sum()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.parts.iter().any(|b| b.contains(x))
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let mut parts = Vec::new();
        for a in &self.parts {
            for b in &other.parts {
                if let Some(c) = a.intersect(b) {
                    parts.push(c);
                }
            }
        }
        Region { dim: self.dim, parts }
    }

    pub fn intersect_box(&self, b: &AxisBox) -> Region {
        Region {
            dim: self.dim,
            parts: self.parts.iter().filter_map(|a| a.intersect(b)).collect(),
        }
    }

    pub fn disjoint_from(&self, other: &Region) -> bool {
        self.parts.iter().all(|a| other.parts.iter().all(|b| !a.overlaps(b)))
    }

    /// Union of two disjoint regions.
    pub fn union_disjoint(&self, other: &Region) -> Result<Region> {
        if !self.disjoint_from(other) {
            return domain("union of overlapping regions");
        }
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        Ok(Region { dim: self.dim, parts })
    }

    pub fn bounding_box(&self) -> Option<AxisBox> {
        let first = self.parts.first()?;
        let mut lo = first.lo.clone();
        let mut hi = first.hi.clone();
        for b in &self.parts[1..] {
            for j in 0..self.dim {
                lo[j] = lo[j].min(b.lo[j]);
                hi[j] = hi[j].max(b.hi[j]);
            }
        }
        Some(AxisBox { lo, hi, closure: None })
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        let covered: f64 = other.parts.iter().map(|b| self.intersect_box(b).volume()).sum();
        let total = other.volume();
        (covered - total).abs() <= 1e-12 * total.max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_overlapping_boxes() {
        assert!(AxisBox::new(vec![1.0], vec![1.0]).is_err());
        let a = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let b = AxisBox::new(vec![0.5], vec![2.0]).unwrap();
        assert!(Region::new(1, vec![a.clone(), b]).is_err());
        let c = AxisBox::new(vec![1.0], vec![2.0]).unwrap();
        assert!(Region::new(1, vec![a, c]).is_ok());
    }

    #[test]
    fn half_open_membership() {
        let b = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(b.contains(&[1.0, 1.0]));
        assert!(!b.contains(&[0.0, 0.5]));
        let r = b.clone().with_closure(vec![Closure::RightOpen, Closure::LeftOpen]);
        assert!(r.contains(&[0.0, 0.5]));
        assert!(!r.contains(&[1.0, 0.5]));
    }

    #[test]
    fn intersection_volume() {
        let a = Region::new(2, vec![AxisBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap()]).unwrap();
        let b = AxisBox::new(vec![1.0, 0.5], vec![3.0, 3.0]).unwrap();
        assert!((a.intersect_box(&b).volume() - 0.5).abs() < 1e-15);
        assert_eq!(a.bounding_box().unwrap().hi, vec![2.0, 1.0]);
    }

    #[test]
    fn radial_range_of_box_straddling_axis() {
        let b = AxisBox::new(vec![-1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let (n, f) = b.radial_range();
        assert!((n - 2.0).abs() < 1e-15);
        assert!((f - 5.0).abs() < 1e-15);
    }
}
