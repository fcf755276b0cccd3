//! The state-space abstraction shared by the control law and the integrators.
//!
//! Tangent vectors are always passed as coefficient vectors on a fixed basis: the
//! coordinate basis `∂/∂x_i` on a chart, or the body-frame basis `∂/∂g_i` on a
//! matrix group (the tangent vector at `g` is then `g·Σ c_i ∂/∂g_i`).

use crate::error::{Error, Result};
use crate::lie::{self, GroupElement, GroupTag};
use crate::manifold::{AmplitudeReport, ChartPoint, ManifoldDescriptor};

pub trait Space: Send + Sync {
    type Point: Clone + std::fmt::Debug + Send + Sync;

    fn dim(&self) -> usize;

    fn label(&self) -> String;

    /// Geodesic (chart) or group exponential (group) from `x` with coefficients `v`.
    fn exp(&self, x: &Self::Point, v: &[f64]) -> Result<Self::Point>;

    /// The update used by the integrators: coordinate translation on a chart,
    /// `x · exp(v)` on a group.
    fn advance(&self, x: &Self::Point, v: &[f64]) -> Result<Self::Point>;

    /// Lie bracket of two coefficient vectors; zero on charts.
    fn bracket(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    fn distance(&self, x: &Self::Point, y: &Self::Point) -> Result<f64>;

    fn tangent_norm(&self, x: &Self::Point, v: &[f64]) -> Result<f64>;

    /// Restores state invariants after a step (wrap periodic coordinates, project to the group).
    fn normalize(&self, x: Self::Point) -> Result<Self::Point>;

    /// Invariant defect of `x`; zero on charts.
    fn defect(&self, x: &Self::Point) -> f64;

    /// Entries written to trajectory output.
    fn flatten(&self, x: &Self::Point) -> Vec<f64>;

    /// Column names matching [`Space::flatten`].
    fn column_names(&self) -> Vec<String>;

    fn validate_amplitudes(&self, amplitudes: &[f64]) -> AmplitudeReport;

    /// Whether the space is a chart (coordinate RK4 applies).
    fn is_chart(&self) -> bool;

    /// The group identity; `None` on charts.
    fn identity(&self) -> Option<Self::Point> {
        None
    }
}

impl Space for ManifoldDescriptor {
    type Point = ChartPoint;

    fn dim(&self) -> usize {
        ManifoldDescriptor::dim(self)
    }

    fn label(&self) -> String {
        self.name().to_string()
    }

    fn exp(&self, x: &ChartPoint, v: &[f64]) -> Result<ChartPoint> {
        self.exp_coords(&x.coords, v, 1.0).map(ChartPoint::new)
    }

    fn advance(&self, x: &ChartPoint, v: &[f64]) -> Result<ChartPoint> {
        if v.len() != x.coords.len() {
            return Err(Error::Argument("tangent dimension mismatch".into()));
        }
        let y: Vec<f64> = x.coords.iter().zip(v).map(|(a, b)| a + b).collect();
        if !self.contains(&y) {
            return Err(Error::ChartExit { last_valid: x.coords.clone() });
        }
        Ok(ChartPoint::new(y))
    }

    fn bracket(&self, u: &[f64], _v: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; u.len()])
    }

    fn distance(&self, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        self.distance_coords(&x.coords, &y.coords)
    }

    fn tangent_norm(&self, x: &ChartPoint, v: &[f64]) -> Result<f64> {
        self.norm(&x.coords, v)
    }

    fn normalize(&self, x: ChartPoint) -> Result<ChartPoint> {
        Ok(ChartPoint::new(ManifoldDescriptor::normalize(self, &x.coords)))
    }

    fn defect(&self, _x: &ChartPoint) -> f64 {
        0.0
    }

    fn flatten(&self, x: &ChartPoint) -> Vec<f64> {
        x.coords.clone()
    }

    fn column_names(&self) -> Vec<String> {
        if self.name() == "S1" {
            vec!["theta".to_string()]
        } else {
            (1..=ManifoldDescriptor::dim(self)).map(|i| format!("x{i}")).collect()
        }
    }

    fn validate_amplitudes(&self, amplitudes: &[f64]) -> AmplitudeReport {
        self.validate_dither_amplitude(amplitudes)
    }

    fn is_chart(&self) -> bool {
        true
    }
}

/// SO(3) or SE(3) as a state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixGroup {
    pub tag: GroupTag,
}

impl MatrixGroup {
    pub fn new(tag: GroupTag) -> Self {
        Self { tag }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if g.tag() != self.tag {
            return Err(Error::Argument(format!(
                "expected a {} element, got {}",
                self.tag,
                g.tag()
            )));
        }
        Ok(())
    }
}

impl Space for MatrixGroup {
    type Point = GroupElement;

    fn dim(&self) -> usize {
        self.tag.algebra_dim()
    }

    fn label(&self) -> String {
        self.tag.to_string()
    }

    fn exp(&self, g: &GroupElement, v: &[f64]) -> Result<GroupElement> {
        self.check(g)?;
        g.compose(&lie::exp_coords(v, self.tag)?)
    }

    fn advance(&self, g: &GroupElement, v: &[f64]) -> Result<GroupElement> {
        self.exp(g, v)
    }

    fn bracket(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        lie::bracket(u, v, self.tag)
    }

    fn distance(&self, x: &GroupElement, y: &GroupElement) -> Result<f64> {
        lie::group_distance(x, y)
    }

    fn tangent_norm(&self, _g: &GroupElement, v: &[f64]) -> Result<f64> {
        // the basis is orthonormal for the chosen left-invariant metric
        Ok(v.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    fn normalize(&self, g: GroupElement) -> Result<GroupElement> {
        lie::project_to_group(g.mat(), self.tag)
    }

    fn defect(&self, g: &GroupElement) -> f64 {
        lie::check_group_membership(g).max()
    }

    fn flatten(&self, g: &GroupElement) -> Vec<f64> {
        g.flatten()
    }

    fn column_names(&self) -> Vec<String> {
        let cols = self.tag.mat_dim();
        (1..=3)
            .flat_map(|i| (1..=cols).map(move |j| format!("g{i}{j}")))
            .collect()
    }

    /// Rotation amplitudes must stay below the SO(3) injectivity radius `π`; translations
    /// are unconstrained.
    fn validate_amplitudes(&self, amplitudes: &[f64]) -> AmplitudeReport {
        let rot: f64 = amplitudes.iter().take(3).map(|a| a * a).sum::<f64>().sqrt();
        let radius = std::f64::consts::PI;
        AmplitudeReport {
            bound: rot,
            injectivity_radius: radius,
            passed: amplitudes.len() == self.dim() && rot < radius,
        }
    }

    fn is_chart(&self) -> bool {
        false
    }

    fn identity(&self) -> Option<GroupElement> {
        Some(GroupElement::identity(self.tag))
    }
}
