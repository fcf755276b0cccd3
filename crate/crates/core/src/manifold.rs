//! Chart-based Riemannian manifolds.
//!
//! A [`ManifoldDescriptor`] carries a metric evaluator over one chart. Everything
//! else (Christoffel symbols, geodesics, the exponential map) is derived from that
//! evaluator numerically, so a new manifold only has to supply `g_ij(x)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative step of the central differences used for metric partials.
pub const METRIC_FD_STEP: f64 = 1e-5;
/// Geodesic RK4 step, as a fraction of the integration parameter `eta`.
pub const GEODESIC_STEP_FRACTION: f64 = 1e-3;

type MetricFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Closed-form distance registered for a manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Euclidean,
    /// Angular distance on a `2π`-periodic coordinate.
    Angular,
    None,
}

/// A point given by its chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartPoint {
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// Tangent vector at `base`, expressed on the coordinate basis `∂/∂x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentCoords {
    pub base: ChartPoint,
    pub components: Vec<f64>,
}

impl TangentCoords {
    pub fn new(base: ChartPoint, components: Vec<f64>) -> Self {
        Self { base, components }
    }
}

/// `Γ^i_{jk}` at a chart point, stored as `gamma[i][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTensor {
    pub gamma: Vec<Vec<Vec<f64>>>,
}

impl ChristoffelTensor {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[i][j][k]
    }

    /// `-Γ^i_{jk} v_j v_k`, the geodesic acceleration for velocity `v`.
    pub fn acceleration(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        acc += self.gamma[i][j][k] * v[j] * v[k];
                    }
                }
                -acc
            })
            .collect()
    }
}

/// Outcome of the dither-amplitude safety check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeReport {
    pub bound: f64,
    pub injectivity_radius: f64,
    pub passed: bool,
}

/// A built-in or user-supplied manifold on a single chart.
#[derive(Clone)]
pub struct ManifoldDescriptor {
    name: String,
    dim: usize,
    metric: Arc<MetricFn>,
    injectivity_radius: f64,
    domain: Vec<(f64, f64)>,
    distance: DistanceKind,
    constant_metric: bool,
    /// Coordinates wrapped modulo this period after each integrator step.
    period: Option<f64>,
}

impl fmt::Debug for ManifoldDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldDescriptor")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("injectivity_radius", &self.injectivity_radius)
            .field("domain", &self.domain)
            .field("distance", &self.distance)
            .finish()
    }
}

impl ManifoldDescriptor {
    /// Flat `ℝⁿ` with the identity metric.
    pub fn euclidean(n: usize) -> Self {
        assert!(n > 0, "dimension must be positive");
        Self {
            name: format!("R{n}"),
            dim: n,
            metric: Arc::new(move |_| DMatrix::identity(n, n)),
            injectivity_radius: f64::INFINITY,
            domain: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            distance: DistanceKind::Euclidean,
            constant_metric: true,
            period: None,
        }
    }

    /// The circle with angle chart and unit metric. The coordinate is unbounded
    /// (covering chart) and wrapped into `[0, 2π)` by [`ManifoldDescriptor::normalize`].
    pub fn circle() -> Self {
        Self {
            name: "S1".to_string(),
            dim: 1,
            metric: Arc::new(|_| DMatrix::identity(1, 1)),
            injectivity_radius: PI,
            domain: vec![(f64::NEG_INFINITY, f64::INFINITY)],
            distance: DistanceKind::Angular,
            constant_metric: true,
            period: Some(2.0 * PI),
        }
    }

    /// A manifold given only by a metric evaluator on a box-shaped chart.
    pub fn from_metric<F>(
        name: impl Into<String>,
        domain: Vec<(f64, f64)>,
        injectivity_radius: f64,
        metric: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        if domain.is_empty() {
            return Err(Error::Argument("chart domain must be non-empty".into()));
        }
        if !(injectivity_radius > 0.0) {
            return Err(Error::Argument(format!(
                "injectivity radius must be positive, got {injectivity_radius}"
            )));
        }
        if domain.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Argument("chart domain bounds must satisfy lo < hi".into()));
        }
        Ok(Self {
            name: name.into(),
            dim: domain.len(),
            metric: Arc::new(metric),
            injectivity_radius,
            domain,
            distance: DistanceKind::None,
            constant_metric: false,
            period: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn injectivity_radius(&self) -> f64 {
        self.injectivity_radius
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.distance
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x
                .iter()
                .zip(&self.domain)
                .all(|(v, (lo, hi))| v.is_finite() && *v >= *lo && *v <= *hi)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "expected {} coordinates, got {}",
                self.dim,
                x.len()
            )));
        }
        if !self.contains(x) {
            return Err(Error::Domain { coords: x.to_vec() });
        }
        Ok(())
    }

    /// The metric matrix `[g_ij]` at `x`.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        Ok((self.metric)(x))
    }

    /// `Σ g_ij u_i v_j`.
    pub fn metric_eval(&self, u: &TangentCoords, v: &TangentCoords) -> Result<f64> {
        if u.base != v.base {
            return Err(Error::Argument("tangent vectors live at different points".into()));
        }
        self.inner(&u.base.coords, &u.components, &v.components)
    }

    pub(crate) fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != self.dim || v.len() != self.dim {
            return Err(Error::Argument("tangent dimension mismatch".into()));
        }
        let g = self.metric_at(x)?;
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += g[(i, j)] * u[i] * v[j];
            }
        }
        Ok(acc)
    }

    /// Riemannian norm `‖v‖_g` at `x`.
    pub fn norm(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        Ok(self.inner(x, v, v)?.max(0.0).sqrt())
    }

    /// Christoffel symbols of the second kind, metric partials by central differences.
    pub fn christoffel(&self, x: &ChartPoint) -> Result<ChristoffelTensor> {
        let n = self.dim;
        let g = self.metric_at(&x.coords)?;
        if self.constant_metric {
            return Ok(ChristoffelTensor {
                gamma: vec![vec![vec![0.0; n]; n]; n],
            });
        }
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::LinearAlgebra(format!("singular metric at {:?}", x.coords)))?;

        // dg[k] = ∂g/∂x_k
        let mut dg = Vec::with_capacity(n);
        for k in 0..n {
            let h = METRIC_FD_STEP * x.coords[k].abs().max(1.0);
            let mut plus = x.coords.clone();
            let mut minus = x.coords.clone();
            plus[k] += h;
            minus[k] -= h;
            let gp = (self.metric)(&plus);
            let gm = (self.metric)(&minus);
            dg.push((gp - gm) / (2.0 * h));
        }

        let mut gamma = vec![vec![vec![0.0; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += g_inv[(i, l)] * (dg[k][(j, l)] + dg[j][(k, l)] - dg[l][(j, k)]);
                    }
                    gamma[i][j][k] = 0.5 * acc;
                    gamma[i][k][j] = 0.5 * acc;
                }
            }
        }
        Ok(ChristoffelTensor { gamma })
    }

    /// `γ(eta)` for the geodesic with `γ(0) = x`, `γ̇(0) = v`.
    ///
    /// Integrates the geodesic equation with classical RK4 on `(γ, γ̇)` using
    /// `1/GEODESIC_STEP_FRACTION` steps. Constant metrics have vanishing Christoffel
    /// symbols, so their geodesics are evaluated in closed form.
    pub fn exp_map(&self, x: &ChartPoint, v: &TangentCoords, eta: f64) -> Result<ChartPoint> {
        if v.base != *x {
            return Err(Error::Argument("tangent vector is not based at x".into()));
        }
        self.exp_coords(&x.coords, &v.components, eta)
            .map(ChartPoint::new)
    }

    pub(crate) fn exp_coords(&self, x: &[f64], v: &[f64], eta: f64) -> Result<Vec<f64>> {
        self.check(x)?;
        if v.len() != self.dim {
            return Err(Error::Argument("tangent dimension mismatch".into()));
        }
        if !(eta >= 0.0) {
            return Err(Error::Argument(format!("eta must be nonnegative, got {eta}")));
        }
        if eta == 0.0 {
            return Ok(x.to_vec());
        }
        let speed = self.norm(x, v)?;
        if speed * eta >= self.injectivity_radius {
            warn!(
                "exp_map on {}: |v|·eta = {} exceeds injectivity radius {}",
                self.name,
                speed * eta,
                self.injectivity_radius
            );
        }

        if self.constant_metric {
            let y: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| xi + eta * vi).collect();
            if !self.contains(&y) {
                return Err(Error::ChartExit { last_valid: x.to_vec() });
            }
            return Ok(y);
        }

        let steps = (1.0 / GEODESIC_STEP_FRACTION).round() as usize;
        let h = eta / steps as f64;
        let n = self.dim;
        let mut pos = x.to_vec();
        let mut vel = v.to_vec();

        let accel = |p: &[f64], w: &[f64]| -> Result<Vec<f64>> {
            if !self.contains(p) {
                return Err(Error::Domain { coords: p.to_vec() });
            }
            Ok(self.christoffel(&ChartPoint::new(p.to_vec()))?.acceleration(w))
        };
        let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(ai, bi)| ai + s * bi).collect()
        };

        for _ in 0..steps {
            let stage = || -> Result<(Vec<f64>, Vec<f64>)> {
                let k1x = vel.clone();
                let k1v = accel(&pos, &vel)?;
                let p2 = axpy(&pos, 0.5 * h, &k1x);
                let v2 = axpy(&vel, 0.5 * h, &k1v);
                let k2v = accel(&p2, &v2)?;
                let p3 = axpy(&pos, 0.5 * h, &v2);
                let v3 = axpy(&vel, 0.5 * h, &k2v);
                let k3v = accel(&p3, &v3)?;
                let p4 = axpy(&pos, h, &v3);
                let v4 = axpy(&vel, h, &k3v);
                let k4v = accel(&p4, &v4)?;
                let mut np = vec![0.0; n];
                let mut nv = vec![0.0; n];
                for i in 0..n {
                    np[i] = pos[i] + h / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
                    nv[i] = vel[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
                }
                Ok((np, nv))
            };
            match stage() {
                Ok((np, nv)) if self.contains(&np) => {
                    pos = np;
                    vel = nv;
                }
                Ok(_) | Err(Error::Domain { .. }) => {
                    return Err(Error::ChartExit { last_valid: pos });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(pos)
    }

    /// Closed-form Riemannian distance, where one is registered.
    pub fn riemannian_distance(&self, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        self.distance_coords(&x.coords, &y.coords)
    }

    pub(crate) fn distance_coords(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        match self.distance {
            DistanceKind::Euclidean => Ok(x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()),
            DistanceKind::Angular => {
                let d = (x[0] - y[0]).abs().rem_euclid(2.0 * PI);
                Ok(d.min(2.0 * PI - d))
            }
            DistanceKind::None => Err(Error::Unsupported(format!(
                "no closed-form distance registered for {}",
                self.name
            ))),
        }
    }

    /// Wraps periodic coordinates into their fundamental interval.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        match self.period {
            Some(p) => x.iter().map(|v| v.rem_euclid(p)).collect(),
            None => x.to_vec(),
        }
    }

    /// Checks that `sup_t ‖Σ a_i sin(ω_i t) ∂/∂x_i‖_g` stays below the injectivity radius,
    /// using `sqrt(Σ a_i a_j max|g_ij|)` with the maximum over sampled chart points.
    pub fn validate_dither_amplitude(&self, amplitudes: &[f64]) -> AmplitudeReport {
        let n = self.dim;
        let mut gmax = DMatrix::<f64>::zeros(n, n);
        for p in self.sample_points() {
            let g = (self.metric)(&p);
            for i in 0..n {
                for j in 0..n {
                    gmax[(i, j)] = gmax[(i, j)].max(g[(i, j)].abs());
                }
            }
        }
        let mut sq = 0.0;
        for i in 0..n.min(amplitudes.len()) {
            for j in 0..n.min(amplitudes.len()) {
                sq += amplitudes[i] * amplitudes[j] * gmax[(i, j)];
            }
        }
        let bound = sq.sqrt();
        AmplitudeReport {
            bound,
            injectivity_radius: self.injectivity_radius,
            passed: amplitudes.len() == n && bound < self.injectivity_radius,
        }
    }

    /// Grid of chart points used for metric suprema. Unbounded sides are clipped to ±2π.
    fn sample_points(&self) -> Vec<Vec<f64>> {
        if self.constant_metric {
            return vec![self
                .domain
                .iter()
                .map(|&(lo, hi)| clip_mid(lo, hi))
                .collect()];
        }
        let per_axis = match self.dim {
            1 => 65,
            2 => 17,
            3 => 9,
            _ => 3,
        };
        let axes: Vec<Vec<f64>> = self
            .domain
            .iter()
            .map(|&(lo, hi)| {
                let lo = if lo.is_finite() { lo } else { -2.0 * PI };
                let hi = if hi.is_finite() { hi } else { 2.0 * PI };
                (0..per_axis)
                    .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / per_axis as f64)
                    .collect()
            })
            .collect();
        let mut pts = vec![Vec::new()];
        for axis in &axes {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        pts
    }

    /// Smallest eigenvalue of the metric at `x`; positive for a valid descriptor.
    pub fn min_metric_eigenvalue(&self, x: &[f64]) -> Result<f64> {
        let g = self.metric_at(x)?;
        let sym = (&g + g.transpose()) * 0.5;
        Ok(sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

fn clip_mid(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}
