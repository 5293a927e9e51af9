use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Closed axis-aligned box `[lo_1, hi_1] × … × [lo_M, hi_M]` in chart
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct ChartDomain {
    bounds: Vec<(f64, f64)>,
}

impl ChartDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return domain("chart domain needs at least one axis");
        }
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return domain(format!("axis {} has invalid interval [{lo}, {hi}]", k + 1));
            }
        }
        Ok(ChartDomain { bounds })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return domain(format!("point has {} coordinates, domain dimension is {}", x.len(), self.dim()));
        }
        if !self.contains(x) {
            return domain(format!("point {x:?} outside chart box {:?}", self.bounds));
        }
        Ok(())
    }

    /// True if `other` lies inside `self`.
    pub fn contains_box(&self, other: &ChartDomain) -> bool {
        other.dim() == self.dim()
            && other.bounds.iter().zip(&self.bounds).all(|((a, b), (lo, hi))| lo <= a && b <= hi)
    }

    /// True if the closed ball lies inside the box.
    pub fn contains_ball(&self, center: &[f64], r: f64) -> bool {
        center.len() == self.dim()
            && center.iter().zip(&self.bounds).all(|(c, (lo, hi))| lo <= &(c - r) && &(c + r) <= hi)
    }

    pub fn diameter(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| (hi - lo).powi(2)).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Box circumscribing the ball `B_r(center)`.
    pub fn ball_box(center: &[f64], r: f64) -> Result<Self> {
        Self::new(center.iter().map(|c| (c - r, c + r)).collect())
    }
}

impl TryFrom<Vec<[f64; 2]>> for ChartDomain {
    type Error = crate::Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        ChartDomain::new(v.into_iter().map(|[lo, hi]| (lo, hi)).collect())
    }
}

impl From<ChartDomain> for Vec<[f64; 2]> {
    fn from(d: ChartDomain) -> Self {
        d.bounds.into_iter().map(|(lo, hi)| [lo, hi]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_axes() {
        assert!(ChartDomain::new(vec![]).is_err());
        assert!(ChartDomain::new(vec![(0.0, 0.0)]).is_err());
        assert!(ChartDomain::new(vec![(1.0, 0.0)]).is_err());
        assert!(ChartDomain::new(vec![(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn membership_is_closed() {
        let d = ChartDomain::cube(2, -1.0, 1.0).unwrap();
        assert!(d.contains(&[1.0, -1.0]));
        assert!(!d.contains(&[1.0 + 1e-15, 0.0]));
        assert!(d.check_point(&[0.0]).is_err());
        assert!(d.contains_ball(&[0.0, 0.0], 1.0));
        assert!(!d.contains_ball(&[0.5, 0.0], 0.6));
    }

    #[test]
    fn interval_list_conversion() {
        let d = ChartDomain::try_from(vec![[-1.0, 1.0], [0.0, 2.0]]).unwrap();
        assert_eq!(d.bounds(), &[(-1.0, 1.0), (0.0, 2.0)]);
        assert!(ChartDomain::try_from(vec![[1.0, -1.0]]).is_err());
        assert_eq!(d.diameter(), 8.0f64.sqrt());
    }
}
