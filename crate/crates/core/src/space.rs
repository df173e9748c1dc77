//! Points and axis-aligned bounding boxes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub type Point = Vec<f64>;

/// Axis-aligned box `[lo₀,hi₀] × … × [loₙ,hiₙ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BBoxError {
    #[error("bounding box needs an even number of values (lo,hi per axis), got {0}")]
    OddCount(usize),
    #[error("degenerate bounding box on axis {axis}: [{lo}, {hi}]")]
    Degenerate { axis: usize, lo: f64, hi: f64 },
    #[error("malformed number '{0}' in bounding box")]
    Number(String),
}

impl BBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, BBoxError> {
        if lo.len() != hi.len() {
            return Err(BBoxError::OddCount(lo.len() + hi.len()));
        }
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(BBoxError::Degenerate { axis, lo: l, hi: h });
            }
        }
        Ok(BBox { lo, hi })
    }

    /// `[x0,x1] × [y0,y1]`.
    pub fn planar(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        BBox::new(vec![x0, y0], vec![x1, y1]).expect("valid planar box")
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diag(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Distance from `x` to the nearest face, negative outside.
    pub fn inset(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (l, h))| (v - l).min(h - v)).fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Point {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}

impl FromStr for BBox {
    type Err = BBoxError;

    /// Parses `x0,x1,y0,y1[,z0,z1…]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vals: Vec<f64> =
            s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| BBoxError::Number(t.trim().to_string()))).collect::<Result<_, _>>()?;
        if !vals.len().is_multiple_of(2) || vals.is_empty() {
            return Err(BBoxError::OddCount(vals.len()));
        }
        let lo = vals.iter().step_by(2).copied().collect();
        let hi = vals.iter().skip(1).step_by(2).copied().collect();
        BBox::new(lo, hi)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.lo.iter().zip(&self.hi).map(|(l, h)| format!("{l},{h}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_measure() {
        let b: BBox = "-1,1,-2,2".parse().unwrap();
        assert_eq!(b.lo, vec![-1.0, -2.0]);
        assert_eq!(b.hi, vec![1.0, 2.0]);
        assert!((b.diag() - 20f64.sqrt()).abs() < 1e-15);
        assert!(b.contains(&[0.5, -1.9]));
        assert!(!b.contains(&[1.5, 0.0]));
        assert_eq!(b.to_string().parse::<BBox>().unwrap(), b);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(matches!("1,0,0,1".parse::<BBox>(), Err(BBoxError::Degenerate { axis: 0, .. })));
        assert!(matches!("0,1,0".parse::<BBox>(), Err(BBoxError::OddCount(3))));
        assert!(matches!("0,a".parse::<BBox>(), Err(BBoxError::Number(_))));
    }
}
