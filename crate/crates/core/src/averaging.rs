//! Numerical checks of the averaging analysis: averaged vs. scaled-gradient fields,
//! Taylor remainders along geodesics, descent of the cost, the corrector flow and
//! trajectory closeness.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::es::{scaled_gradient, CostOracle, EsField};
use crate::flow::{integrate, integrate_averaged, integrate_es, integrate_gradient, IntegratorConfig, Method, Monitor, Trajectory};
use crate::space::Space;

/// Default number of Simpson subintervals per period.
pub const DEFAULT_QUADRATURE: usize = 512;

/// Finite-difference steps for the first and second directional derivatives.
pub const TAYLOR_FD_STEP_1: f64 = 1e-5;
pub const TAYLOR_FD_STEP_2: f64 = 1e-4;

/// Composite Simpson rule for `∫_a^b f` with `n` (even) subintervals, vector valued.
pub fn simpson<F>(a: f64, b: f64, n: usize, dim: usize, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Argument(format!("Simpson needs an even number of subintervals, got {n}")));
    }
    let h = (b - a) / n as f64;
    let mut acc = vec![0.0; dim];
    for k in 0..=n {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let v = f(a + k as f64 * h)?;
        for (s, x) in acc.iter_mut().zip(&v) {
            *s += w * x;
        }
    }
    Ok(acc.into_iter().map(|s| s * h / 3.0).collect())
}

fn check_quadrature(n: usize) -> Result<()> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::Argument(format!("quadrature needs an even N >= 8, got {n}")));
    }
    Ok(())
}

/// `f̂(x) = (1/T) ∫_s^{s+T} f(x, t) dt` over one common period starting at `start`.
pub fn averaged_field_from<S: Space, C: CostOracle<S::Point> + ?Sized>(
    es: &EsField<'_, S, C>,
    x: &S::Point,
    n: usize,
    start: f64,
) -> Result<Vec<f64>> {
    check_quadrature(n)?;
    let period = es.spec().period();
    let dim = es.space().dim();
    let integral = simpson(start, start + period, n, dim, |t| es.eval(x, t))?;
    Ok(integral.into_iter().map(|v| v / period).collect())
}

/// Averaged field over `[0, T]`.
pub fn averaged_field<S: Space, C: CostOracle<S::Point> + ?Sized>(
    es: &EsField<'_, S, C>,
    x: &S::Point,
    n: usize,
) -> Result<Vec<f64>> {
    averaged_field_from(es, x, n, 0.0)
}

/// Scaled gradient `−(a_i²/2) D_iJ(x)`.
pub fn gradient_field<S: Space, C: CostOracle<S::Point> + ?Sized>(
    space: &S,
    cost: &C,
    x: &S::Point,
    amplitudes: &[f64],
) -> Result<Vec<f64>> {
    scaled_gradient(space, cost, x, amplitudes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Largest dither amplitude.
    pub scale: f64,
    /// Largest residual over the probes.
    pub residual: f64,
    pub per_point: Vec<f64>,
}

/// `‖f̂(x) − f_grad(x)‖` at each probe. Both fields are compared in the original time
/// scale, where neither carries a `1/ω` factor.
pub fn averaging_residual<S: Space, C: CostOracle<S::Point> + ?Sized>(
    es: &EsField<'_, S, C>,
    probes: &[S::Point],
    n: usize,
) -> Result<ResidualReport> {
    let amplitudes = es.spec().amplitudes();
    let per_point = probes
        .iter()
        .map(|x| {
            let avg = averaged_field(es, x, n)?;
            let grad = gradient_field(es.space(), es.cost(), x, amplitudes)?;
            let diff: Vec<f64> = avg.iter().zip(&grad).map(|(a, b)| a - b).collect();
            es.space().tangent_norm(x, &diff)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualReport {
        scale: amplitudes.iter().cloned().fold(0.0, f64::max),
        residual: per_point.iter().cloned().fold(0.0, f64::max),
        per_point,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two matched points".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if !slope.is_finite() {
        return Err(Error::DegenerateFit("non-finite slope".into()));
    }
    Ok(slope)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
}

/// Residual at each amplitude scale (amplitudes rescaled so their maximum equals the
/// scale) and the fitted log-log slope.
pub fn residual_slope<S: Space, C: CostOracle<S::Point> + ?Sized>(
    template: &EsField<'_, S, C>,
    probe: &S::Point,
    scales: &[f64],
    n: usize,
) -> Result<SlopeReport> {
    if scales.len() < 3 {
        return Err(Error::Argument(format!("residual slope needs at least 3 scales, got {}", scales.len())));
    }
    let mut values = Vec::with_capacity(scales.len());
    for &s in scales {
        let spec = template.spec().with_max_amplitude(s)?;
        let es = EsField::new(template.space(), template.cost(), spec)?;
        let r = averaging_residual(&es, std::slice::from_ref(probe), n)?.residual;
        if r < 1e-12 {
            return Err(Error::DegenerateFit(format!(
                "residual {r:e} at scale {s} is at the rounding floor; choose a less symmetric cost or probe"
            )));
        }
        values.push(r);
    }
    let slope = loglog_slope(scales, &values)?;
    Ok(SlopeReport { scales: scales.to_vec(), values, slope })
}

/// Remainder of the order-`m` Taylor expansion of `η ↦ J(exp_x(η X))` with
/// finite-difference derivatives, and its fitted log-log slope (≈ m + 1).
pub fn taylor_remainder<S: Space, C: CostOracle<S::Point> + ?Sized>(
    space: &S,
    cost: &C,
    x: &S::Point,
    direction: &[f64],
    etas: &[f64],
    order: usize,
) -> Result<SlopeReport> {
    if !(order == 1 || order == 2) {
        return Err(Error::Argument(format!("Taylor order must be 1 or 2, got {order}")));
    }
    let along = |eta: f64| -> Result<f64> {
        let v: Vec<f64> = direction.iter().map(|d| eta * d).collect();
        Ok(cost.eval(&space.exp(x, &v)?))
    };
    let j0 = cost.eval(x);
    let h1 = TAYLOR_FD_STEP_1;
    let d1 = (along(h1)? - along(-h1)?) / (2.0 * h1);
    let h2 = TAYLOR_FD_STEP_2;
    let d2 = (along(h2)? - 2.0 * j0 + along(-h2)?) / (h2 * h2);
    let mut values = Vec::with_capacity(etas.len());
    for &eta in etas {
        let mut r = along(eta)? - j0 - eta * d1;
        if order == 2 {
            r -= 0.5 * eta * eta * d2;
        }
        let r = r.abs();
        if r < 1e-13 {
            return Err(Error::DegenerateFit(format!(
                "Taylor remainder {r:e} at eta = {eta} vanishes; the expansion is exact"
            )));
        }
        values.push(r);
    }
    let slope = loglog_slope(etas, &values)?;
    Ok(SlopeReport { scales: etas.to_vec(), values, slope })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentReport {
    /// Largest increase of the cost between consecutive samples (0 if none).
    pub max_jump: f64,
    pub tolerance: f64,
    pub descending: bool,
}

/// Checks that the sampled cost never increases by more than `1e-8 (1 + J₀)`.
pub fn lyapunov_monitor<P>(traj: &Trajectory<P>) -> DescentReport {
    let j0 = traj.samples.first().map_or(0.0, |s| s.cost);
    let max_jump = traj
        .samples
        .windows(2)
        .map(|w| w[1].cost - w[0].cost)
        .fold(0.0, f64::max);
    let tolerance = 1e-8 * (1.0 + j0);
    DescentReport { max_jump, tolerance, descending: max_jump <= tolerance }
}

/// `Z(t, x) = ∫₀ᵗ (f̂(x) − f(x, s)) ds` for a fixed `t`.
pub struct CorrectorField<'e, 'a, S: Space, C: ?Sized> {
    es: &'e EsField<'a, S, C>,
    t: f64,
    quad_n: usize,
}

impl<'e, 'a, S: Space, C: CostOracle<S::Point> + ?Sized> CorrectorField<'e, 'a, S, C> {
    pub fn new(es: &'e EsField<'a, S, C>, t: f64, quad_n: usize) -> Result<Self> {
        check_quadrature(quad_n)?;
        if !(t >= 0.0) {
            return Err(Error::Argument(format!("corrector time {t} is negative")));
        }
        Ok(Self { es, t, quad_n })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Whole periods contribute `k (T f̂ − ∫₀ᵀ f)`; the leftover `[kT, t]` is integrated
    /// directly.
    pub fn eval(&self, x: &S::Point) -> Result<Vec<f64>> {
        let dim = self.es.space().dim();
        if self.t == 0.0 {
            return Ok(vec![0.0; dim]);
        }
        let period = self.es.spec().period();
        let whole = (self.t / period).floor();
        let rest_start = whole * period;
        let rest = self.t - rest_start;
        let f = |s: f64| self.es.eval(x, s);
        let one_period = simpson(0.0, period, self.quad_n, dim, f)?;
        let avg: Vec<f64> = one_period.iter().map(|v| v / period).collect();
        let mut z: Vec<f64> = (0..dim).map(|i| whole * (period * avg[i] - one_period[i])).collect();
        if rest > 0.0 {
            let tail = simpson(rest_start, self.t, self.quad_n, dim, f)?;
            for i in 0..dim {
                z[i] += rest * avg[i] - tail[i];
            }
        }
        Ok(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectorPoint {
    pub t: f64,
    pub distance: f64,
}

/// Pseudo-time steps used to integrate the frozen corrector field over `[0, 1]`.
pub const CORRECTOR_STEPS: usize = 4;

/// Flows `x` for unit pseudo-time along `Z(t, ·)`.
pub fn corrector_endpoint<S: Space, C: CostOracle<S::Point> + ?Sized>(
    es: &EsField<'_, S, C>,
    t: f64,
    x: &S::Point,
    quad_n: usize,
) -> Result<S::Point> {
    let space = es.space();
    if !space.is_chart() {
        return Err(Error::Unsupported("the corrector flow is implemented on charts only".into()));
    }
    let z = CorrectorField::new(es, t, quad_n)?;
    let field = |y: &S::Point, _s: f64| z.eval(y);
    let cfg = IntegratorConfig::new(1.0 / CORRECTOR_STEPS as f64, Method::ChartRk4, 1.0).with_stride(CORRECTOR_STEPS);
    let zero = |_: &S::Point| 0.0;
    let traj = integrate(space, &field, x, &cfg, Monitor { cost: &zero, target: x }, "corrector")
        .map_err(|f| f.error)?;
    Ok(traj.last().state.clone())
}

/// Integrates the extremum-seeking loop to `t_eval`, then the corrector; returns the ES
/// state, the corrected state and their distance.
pub fn corrector_flow<S: Space, C: CostOracle<S::Point>>(
    es: &EsField<'_, S, C>,
    x0: &S::Point,
    t_eval: f64,
    cfg: &IntegratorConfig,
    quad_n: usize,
) -> Result<(S::Point, S::Point, f64)> {
    let x_es = if t_eval == cfg.t0 {
        x0.clone()
    } else {
        let run_cfg = IntegratorConfig { horizon: t_eval, sample_stride: usize::MAX, ..cfg.clone() };
        integrate_es(es, x0, &run_cfg, x0).map_err(|f| f.error)?.last().state.clone()
    };
    let z = corrector_endpoint(es, t_eval - cfg.t0, &x_es, quad_n)?;
    let d = es.space().distance(&x_es, &z)?;
    Ok((x_es, z, d))
}

/// Distance between the ES trajectory and its corrected counterpart at every sample of
/// one ES run configured by `cfg`.
pub fn corrector_profile<S: Space, C: CostOracle<S::Point>>(
    es: &EsField<'_, S, C>,
    x0: &S::Point,
    cfg: &IntegratorConfig,
    quad_n: usize,
) -> Result<Vec<CorrectorPoint>> {
    let traj = integrate_es(es, x0, cfg, x0).map_err(|f| f.error)?;
    traj.samples
        .iter()
        .map(|s| {
            let z = corrector_endpoint(es, s.t - cfg.t0, &s.state, quad_n)?;
            Ok(CorrectorPoint { t: s.t, distance: es.space().distance(&s.state, &z)? })
        })
        .collect()
}

pub fn sup_distance(profile: &[CorrectorPoint]) -> f64 {
    profile.iter().map(|p| p.distance).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessLegs {
    pub t: f64,
    /// `d(Φ_f, Φ_f̂)`
    pub es_to_averaged: f64,
    /// `d(Φ_f, x*)`
    pub es_to_target: f64,
    /// `d(Φ_f̂, x*)`
    pub averaged_to_target: f64,
    /// `d(Φ_grad, x*)`
    pub gradient_to_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessReport {
    pub legs: Vec<ClosenessLegs>,
    pub sup_es_to_averaged: f64,
    /// Sup of `d(Φ_f, x*)` from `t_enter` on (`NaN` if the radius is never entered for good).
    pub sup_es_to_target_after_enter: f64,
    pub sup_averaged_to_target: f64,
    pub radius: f64,
    /// First sample time after which `d(Φ_f, x*) < radius` holds at every later sample.
    pub t_enter: Option<f64>,
    pub triangle_holds: bool,
}

/// First sample time from which every later distance stays below `radius`.
pub fn enter_and_remain(times: &[f64], distances: &[f64], radius: f64) -> Option<f64> {
    let mut enter = None;
    for (t, d) in times.iter().zip(distances).rev() {
        if *d < radius {
            enter = Some(*t);
        } else {
            break;
        }
    }
    enter
}

/// Runs the ES, averaged and gradient flows from `x0` and compares them sample by
/// sample. The two smooth flows are integrated at the ES sampling interval.
pub fn closeness_report<S: Space, C: CostOracle<S::Point>>(
    es: &EsField<'_, S, C>,
    x0: &S::Point,
    target: &S::Point,
    cfg: &IntegratorConfig,
    radius: f64,
    quad_n: usize,
) -> Result<ClosenessReport> {
    let space = es.space();
    let f = integrate_es(es, x0, cfg, target).map_err(|e| e.error)?;
    let coarse = cfg.coarsened();
    let avg = integrate_averaged(es, x0, &coarse, quad_n, target).map_err(|e| e.error)?;
    let grad = integrate_gradient(space, es.cost(), x0, es.spec().amplitudes(), &coarse, target)
        .map_err(|e| e.error)?;
    if f.samples.len() != avg.samples.len() || f.samples.len() != grad.samples.len() {
        return Err(Error::Numerical("flows produced misaligned samples".into()));
    }
    let mut legs = Vec::with_capacity(f.samples.len());
    let mut triangle_holds = true;
    for ((a, b), c) in f.samples.iter().zip(&avg.samples).zip(&grad.samples) {
        let l = ClosenessLegs {
            t: a.t,
            es_to_averaged: space.distance(&a.state, &b.state)?,
            es_to_target: a.dist_to_target,
            averaged_to_target: b.dist_to_target,
            gradient_to_target: c.dist_to_target,
        };
        if l.es_to_target > l.es_to_averaged + l.averaged_to_target + 1e-12 {
            triangle_holds = false;
        }
        legs.push(l);
    }
    let times: Vec<f64> = legs.iter().map(|l| l.t).collect();
    let es_target: Vec<f64> = legs.iter().map(|l| l.es_to_target).collect();
    let t_enter = enter_and_remain(&times, &es_target, radius);
    let sup_after = match t_enter {
        Some(te) => legs.iter().filter(|l| l.t >= te).map(|l| l.es_to_target).fold(0.0, f64::max),
        None => f64::NAN,
    };
    Ok(ClosenessReport {
        sup_es_to_averaged: legs.iter().map(|l| l.es_to_averaged).fold(0.0, f64::max),
        sup_es_to_target_after_enter: sup_after,
        sup_averaged_to_target: legs.iter().map(|l| l.averaged_to_target).fold(0.0, f64::max),
        radius,
        t_enter,
        triangle_holds,
        legs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::es::DitherSpec;
    use crate::flow::integrate_gradient;
    use crate::lie::{GroupElement, GroupTag};
    use crate::manifold::{ChartPoint, ManifoldDescriptor};
    use crate::space::MatrixGroup;
    use approx::assert_abs_diff_eq;

    fn pt(x: f64) -> ChartPoint {
        ChartPoint::new(vec![x])
    }

    fn quad(x: &ChartPoint) -> f64 {
        x.coords[0] * x.coords[0]
    }

    fn cos_cost(x: &ChartPoint) -> f64 {
        1.0 - x.coords[0].cos()
    }

    /// `f̂(θ) = −a J₁(a) sin θ` for `J = 1 − cos θ` with one dither; Bessel series.
    fn bessel_j1(a: f64) -> f64 {
        let mut term = a / 2.0;
        let mut sum = term;
        for k in 1..30 {
            term *= -(a * a / 4.0) / (k as f64 * (k + 1) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let v = simpson(0.0, 2.0, 8, 1, |t| Ok(vec![t * t * t - t])).unwrap();
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-14);
        assert!(simpson(0.0, 1.0, 7, 1, |_| Ok(vec![0.0])).is_err());
    }

    #[test]
    fn averaged_field_examples() {
        let r1 = ManifoldDescriptor::euclidean(1);
        let spec = DitherSpec::from_text(vec![0.1], &["1"], 10.0).unwrap();
        let es = EsField::new(&r1, &quad, spec).unwrap();
        let f = averaged_field(&es, &pt(1.0), 512).unwrap();
        assert_abs_diff_eq!(f[0], -0.01, epsilon = 1e-4);
        let f2 = averaged_field(&es, &pt(1.0), 1024).unwrap();
        assert_abs_diff_eq!(f[0], f2[0], epsilon = 1e-10);
        assert!(averaged_field(&es, &pt(1.0), 6).is_err());

        let flat = |_: &ChartPoint| 3.0;
        let spec = DitherSpec::from_text(vec![0.2, 0.1], &["1", "3"], 2.0).unwrap();
        let r2 = ManifoldDescriptor::euclidean(2);
        let es = EsField::new(&r2, &flat, spec).unwrap();
        let f = averaged_field(&es, &ChartPoint::new(vec![0.3, 0.4]), 512).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn averaged_field_matches_bessel_oracle() {
        let s1 = ManifoldDescriptor::circle();
        for a in [0.05, 0.1, 0.3] {
            let spec = DitherSpec::from_text(vec![a], &["1"], 7.0).unwrap();
            let es = EsField::new(&s1, &cos_cost, spec).unwrap();
            for th in [0.2, 1.3, 2.9] {
                let f = averaged_field(&es, &pt(th), 512).unwrap();
                assert_abs_diff_eq!(f[0], -a * bessel_j1(a) * th.sin(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn averaging_window_shift() {
        let s1 = ManifoldDescriptor::circle();
        let spec = DitherSpec::from_text(vec![0.1], &["1"], 50.0).unwrap();
        let es = EsField::new(&s1, &cos_cost, spec).unwrap();
        let a = averaged_field(&es, &pt(0.7), 512).unwrap();
        let b = averaged_field_from(&es, &pt(0.7), 512, 0.3781).unwrap();
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-10);
    }

    #[test]
    fn gradient_field_examples() {
        let r1 = ManifoldDescriptor::euclidean(1);
        assert_abs_diff_eq!(gradient_field(&r1, &quad, &pt(1.0), &[0.1]).unwrap()[0], -0.01, epsilon = 1e-10);
        assert_abs_diff_eq!(gradient_field(&r1, &quad, &pt(0.0), &[0.1]).unwrap()[0], 0.0, epsilon = 1e-7);
        let s1 = ManifoldDescriptor::circle();
        let g = gradient_field(&s1, &cos_cost, &pt(std::f64::consts::FRAC_PI_2), &[0.1]).unwrap();
        assert_abs_diff_eq!(g[0], -0.005, epsilon = 1e-10);
    }

    #[test]
    fn residual_examples() {
        let r1 = ManifoldDescriptor::euclidean(1);
        let spec = DitherSpec::from_text(vec![0.1], &["1"], 10.0).unwrap();
        let es = EsField::new(&r1, &quad, spec).unwrap();
        let rep = averaging_residual(&es, &[pt(1.0), pt(-0.4), pt(2.0)], 512).unwrap();
        assert!(rep.residual <= 1e-8, "{}", rep.residual);

        let s1 = ManifoldDescriptor::circle();
        let spec = DitherSpec::from_text(vec![0.1], &["1"], 10.0).unwrap();
        let es = EsField::new(&s1, &cos_cost, spec).unwrap();
        let probes = [pt(0.7), pt(2.0), pt(4.0)];
        let rep = averaging_residual(&es, &probes, 512).unwrap();
        assert!(rep.residual > 0.0 && rep.residual < 1e-4);
        // the leading term a⁴/16 |sin θ| of the Bessel expansion
        assert_abs_diff_eq!(rep.per_point[0], 1e-4 / 16.0 * 0.7f64.sin(), epsilon = 1e-8);
        let rev: Vec<ChartPoint> = probes.iter().rev().cloned().collect();
        let rep2 = averaging_residual(&es, &rev, 512).unwrap();
        assert_eq!(rep.residual, rep2.residual);
    }

    #[test]
    fn residual_slope_examples() {
        let s1 = ManifoldDescriptor::circle();
        let spec = DitherSpec::from_text(vec![0.1], &["1"], 10.0).unwrap();
        let es = EsField::new(&s1, &cos_cost, spec).unwrap();
        let scales = [0.2, 0.1, 0.05, 0.025];
        let rep = residual_slope(&es, &pt(0.7), &scales, 512).unwrap();
        assert!((3.5..=4.5).contains(&rep.slope), "{}", rep.slope);
        let rep2 = residual_slope(&es, &pt(0.7), &scales, 1024).unwrap();
        assert!((rep.slope - rep2.slope).abs() <= 0.1);

        let r1 = ManifoldDescriptor::euclidean(1);
        let es = EsField::new(&r1, &quad, DitherSpec::from_text(vec![0.1], &["1"], 10.0).unwrap()).unwrap();
        assert!(matches!(residual_slope(&es, &pt(1.0), &scales, 512), Err(Error::DegenerateFit(_))));
        assert!(matches!(residual_slope(&es, &pt(1.0), &scales[..2], 512), Err(Error::Argument(_))));
    }

    #[test]
    fn taylor_examples() {
        let s1 = ManifoldDescriptor::circle();
        let etas = [0.1, 0.05, 0.025];
        let r1 = taylor_remainder(&s1, &cos_cost, &pt(0.3), &[1.0], &etas, 1).unwrap();
        assert!((1.8..=2.2).contains(&r1.slope), "{}", r1.slope);
        let r2 = taylor_remainder(&s1, &cos_cost, &pt(0.3), &[1.0], &etas, 2).unwrap();
        assert!((2.7..=3.3).contains(&r2.slope), "{}", r2.slope);

        let line = ManifoldDescriptor::euclidean(1);
        let lin = |x: &ChartPoint| 2.0 * x.coords[0];
        assert!(matches!(
            taylor_remainder(&line, &lin, &pt(0.0), &[1.0], &etas, 1),
            Err(Error::DegenerateFit(_))
        ));
        assert!(taylor_remainder(&line, &lin, &pt(0.0), &[1.0], &etas, 3).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let so3 = MatrixGroup::new(GroupTag::SO3);
        let cost = |g: &GroupElement| 3.0 - g.mat().trace();
        let id = GroupElement::identity(GroupTag::SO3);
        let cfg = IntegratorConfig::new(0.01, Method::LieEuler, 30.0).with_stride(10);
        let traj = integrate_gradient(&so3, &cost, &GroupElement::rz(0.785), &[0.1; 3], &cfg, &id).unwrap();
        let rep = lyapunov_monitor(&traj);
        assert!(rep.descending && rep.max_jump == 0.0);

        let s1 = ManifoldDescriptor::circle();
        let traj = integrate_gradient(&s1, &cos_cost, &pt(0.0), &[0.1], &cfg_chart(), &pt(0.0)).unwrap();
        assert_eq!(lyapunov_monitor(&traj).max_jump, 0.0);

        let spec = DitherSpec::from_text(vec![0.1], &["1"], 5.0).unwrap();
        let es = EsField::new(&s1, &cos_cost, spec).unwrap();
        let traj = integrate_es(&es, &pt(0.5), &cfg_chart(), &pt(0.0)).unwrap();
        let rep = lyapunov_monitor(&traj);
        assert!(rep.max_jump > 0.0 && !rep.descending);
    }

    fn cfg_chart() -> IntegratorConfig {
        IntegratorConfig::new(0.01, Method::ChartRk4, 10.0).with_stride(5)
    }

    #[test]
    fn corrector_vanishes_at_zero_and_whole_periods() {
        let s1 = ManifoldDescriptor::circle();
        let spec = DitherSpec::from_text(vec![0.1], &["1"], 50.0).unwrap();
        let period = spec.period();
        let es = EsField::new(&s1, &cos_cost, spec).unwrap();
        let z0 = CorrectorField::new(&es, 0.0, 512).unwrap();
        assert_eq!(z0.eval(&pt(1.2)).unwrap(), vec![0.0]);
        for k in [1.0, 3.0, 40.0] {
            let z = CorrectorField::new(&es, k * period, 512).unwrap();
            for x in [0.1, 1.2, 3.0] {
                assert!(z.eval(&pt(x)).unwrap()[0].abs() < 1e-9);
            }
        }
        let cfg = IntegratorConfig::new(period / 64.0, Method::ChartRk4, 4.0 * period);
        let (_, _, d) = corrector_flow(&es, &pt(1.5), 0.0, &cfg, 512).unwrap();
        assert_eq!(d, 0.0);
        let (_, _, d) = corrector_flow(&es, &pt(1.5), 4.0 * period, &cfg, 512).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn corrector_matches_direct_quadrature() {
        // Z(t, x) = ∫₀ᵗ (f̂ − f) ds with f = −a sin(ωs)(1 − cos(x + a sin(ωs)))
        let s1 = ManifoldDescriptor::circle();
        let (a, w) = (0.1, 50.0);
        let spec = DitherSpec::from_text(vec![a], &["1"], w).unwrap();
        let es = EsField::new(&s1, &cos_cost, spec).unwrap();
        let x = 0.9f64;
        let t = 0.3;
        let fbar = -a * bessel_j1(a) * x.sin();
        let n = 200_000;
        let h = t / n as f64;
        let direct: f64 = (0..n)
            .map(|k| {
                let s = (k as f64 + 0.5) * h;
                let d = a * (w * s).sin();
                fbar + d * (1.0 - (x + d).cos())
            })
            .sum::<f64>()
            * h;
        let z = CorrectorField::new(&es, t, 512).unwrap().eval(&pt(x)).unwrap();
        assert_abs_diff_eq!(z[0], direct, epsilon = 1e-10);
    }

    #[test]
    fn corrector_rejects_groups() {
        let so3 = MatrixGroup::new(GroupTag::SO3);
        let cost = |g: &GroupElement| 3.0 - g.mat().trace();
        let spec = DitherSpec::from_text(vec![0.1; 3], &["2", "4.1", "6.2"], 1.0).unwrap();
        let es = EsField::new(&so3, &cost, spec).unwrap();
        let g = GroupElement::identity(GroupTag::SO3);
        assert!(matches!(corrector_endpoint(&es, 1.0, &g, 64), Err(Error::Unsupported(_))));
    }

    #[test]
    fn enter_and_remain_semantics() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(enter_and_remain(&t, &[0.5, 0.05, 0.2, 0.05, 0.01], 0.1), Some(3.0));
        assert_eq!(enter_and_remain(&t, &[0.5, 0.05, 0.2, 0.05, 0.3], 0.1), None);
        assert_eq!(enter_and_remain(&t, &[0.0; 5], 0.1), Some(0.0));
    }

    #[test]
    fn closeness_at_target_is_small() {
        let s1 = ManifoldDescriptor::circle();
        let spec = DitherSpec::from_text(vec![0.1], &["1"], 50.0).unwrap();
        let es = EsField::new(&s1, &cos_cost, spec).unwrap();
        let cfg = IntegratorConfig::new(1e-3, Method::ChartRk4, 5.0).with_stride(100);
        let rep = closeness_report(&es, &pt(0.0), &pt(0.0), &cfg, 0.1, 64).unwrap();
        assert!(rep.triangle_holds);
        assert_eq!(rep.t_enter, Some(0.0));
        assert!(rep.sup_es_to_averaged < 1e-3);
        assert!(rep.sup_averaged_to_target < 1e-12);
        assert_eq!(rep.legs.len(), 51);
    }
}
