//! Fixed-step integration of time-varying vector fields on a [`Space`].

use serde::{Deserialize, Serialize};

use crate::averaging::averaged_field;
use crate::error::{Error, Result};
use crate::es::{scaled_gradient, CostOracle, EsField};
use crate::space::Space;

/// Invariant defect above which a run is declared diverged.
pub const DIVERGENCE_DEFECT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `x · exp(h ξ)` on a group, forward Euler on a chart.
    LieEuler,
    /// Four-stage Munthe-Kaas update in the algebra; classical RK4 on a chart.
    Rkmk4,
    /// Classical RK4 on chart coordinates.
    ChartRk4,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lie_euler" => Ok(Method::LieEuler),
            "rkmk4" => Ok(Method::Rkmk4),
            "chart_rk4" => Ok(Method::ChartRk4),
            _ => Err(Error::Argument(format!("unknown integration method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub step: f64,
    pub method: Method,
    /// Final time.
    pub horizon: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub sample_stride: usize,
    #[serde(default = "yes")]
    pub project_each_step: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl IntegratorConfig {
    pub fn new(step: f64, method: Method, horizon: f64) -> Self {
        Self { step, method, horizon, t0: 0.0, sample_stride: 1, project_each_step: true }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Number of steps from `t0` to `horizon`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::Argument(format!("step {} is not positive", self.step)));
        }
        if self.sample_stride == 0 {
            return Err(Error::Argument("sample stride must be at least 1".into()));
        }
        let span = self.horizon - self.t0;
        if !(span > self.step) {
            return Err(Error::Argument(format!(
                "step {} must be smaller than the integration span {span}",
                self.step
            )));
        }
        let n = (span / self.step).round();
        if ((n * self.step) - span).abs() > 1e-9 * span {
            return Err(Error::Argument(format!(
                "span {span} is not a whole number of steps of {}",
                self.step
            )));
        }
        Ok(n as usize)
    }

    /// Same sampling grid integrated at the sampling interval.
    pub fn coarsened(&self) -> Self {
        Self {
            step: self.step * self.sample_stride as f64,
            sample_stride: 1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<P> {
    pub t: f64,
    pub state: P,
    pub cost: f64,
    pub dist_to_target: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory<P> {
    pub samples: Vec<Sample<P>>,
    pub config: IntegratorConfig,
    pub description: String,
    /// Largest invariant defect seen after any step (not only at samples).
    pub max_defect: f64,
}

impl<P> Trajectory<P> {
    pub fn last(&self) -> &Sample<P> {
        self.samples.last().expect("trajectories hold at least the initial sample")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// An integration error together with everything computed before it.
#[derive(Debug, Clone)]
pub struct IntegrationFailure<P> {
    pub error: Error,
    pub partial: Trajectory<P>,
}

impl<P> std::fmt::Display for IntegrationFailure<P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} samples kept)", self.error, self.partial.samples.len())
    }
}

pub type FlowResult<P> = std::result::Result<Trajectory<P>, IntegrationFailure<P>>;

/// Cost and target evaluated at every sample.
pub struct Monitor<'a, S: Space> {
    pub cost: &'a dyn CostOracle<S::Point>,
    pub target: &'a S::Point,
}

impl<S: Space> Clone for Monitor<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S: Space> Copy for Monitor<'_, S> {}

/// A time-varying field returning basis coefficients.
pub type Field<'a, P> = dyn Fn(&P, f64) -> Result<Vec<f64>> + 'a;

fn scale(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

/// `dexp⁻¹` truncated after the second bracket, enough for a fourth-order method.
fn dexpinv<S: Space>(space: &S, u: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
    let b1 = space.bracket(u, xi)?;
    let b2 = space.bracket(u, &b1)?;
    Ok(xi.iter().zip(&b1).zip(&b2).map(|((x, a), b)| x + 0.5 * a + b / 12.0).collect())
}

fn rk4_step<S: Space>(
    space: &S,
    field: &Field<'_, S::Point>,
    x: &S::Point,
    t: f64,
    h: f64,
    munthe_kaas: bool,
) -> Result<S::Point> {
    let stage = |u: &[f64], time: f64| -> Result<Vec<f64>> {
        let y = space.advance(x, u)?;
        let k = field(&y, time)?;
        if munthe_kaas {
            dexpinv(space, u, &k)
        } else {
            Ok(k)
        }
    };
    let k1 = field(x, t)?;
    let k2 = stage(&scale(0.5 * h, &k1), t + 0.5 * h)?;
    let k3 = stage(&scale(0.5 * h, &k2), t + 0.5 * h)?;
    let k4 = stage(&scale(h, &k3), t + h)?;
    let incr: Vec<f64> = (0..k1.len())
        .map(|i| h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    space.advance(x, &incr)
}

fn step<S: Space>(
    space: &S,
    field: &Field<'_, S::Point>,
    x: &S::Point,
    t: f64,
    h: f64,
    method: Method,
) -> Result<S::Point> {
    match method {
        Method::LieEuler => space.advance(x, &scale(h, &field(x, t)?)),
        Method::Rkmk4 => rk4_step(space, field, x, t, h, !space.is_chart()),
        Method::ChartRk4 => rk4_step(space, field, x, t, h, false),
    }
}

fn sample<S: Space>(space: &S, monitor: Monitor<'_, S>, t: f64, x: &S::Point) -> Result<Sample<S::Point>> {
    Ok(Sample {
        t,
        state: x.clone(),
        cost: monitor.cost.eval(x),
        // charts without a closed-form distance still integrate; the column is left NaN
        dist_to_target: match space.distance(x, monitor.target) {
            Err(Error::Unsupported(_)) => f64::NAN,
            d => d?,
        },
    })
}

/// Integrates `ẋ = field(x, t)` from `x0` over `[cfg.t0, cfg.horizon]`.
pub fn integrate<S: Space>(
    space: &S,
    field: &Field<'_, S::Point>,
    x0: &S::Point,
    cfg: &IntegratorConfig,
    monitor: Monitor<'_, S>,
    description: &str,
) -> FlowResult<S::Point> {
    let mut traj = Trajectory {
        samples: Vec::new(),
        config: cfg.clone(),
        description: description.to_string(),
        max_defect: space.defect(x0),
    };
    macro_rules! bail {
        ($e:expr) => {
            return Err(IntegrationFailure { error: $e, partial: traj })
        };
    }
    if cfg.method == Method::ChartRk4 && !space.is_chart() {
        bail!(Error::Argument(format!("chart_rk4 does not apply to {}", space.label())));
    }
    let n = match cfg.steps() {
        Ok(n) => n,
        Err(e) => bail!(e),
    };
    match sample(space, monitor, cfg.t0, x0) {
        Ok(s) => traj.samples.push(s),
        Err(e) => bail!(e),
    }
    let h = cfg.step;
    let mut x = x0.clone();
    for k in 0..n {
        let t = cfg.t0 + k as f64 * h;
        let next = step(space, field, &x, t, h, cfg.method).and_then(|y| {
            if cfg.project_each_step || space.is_chart() {
                space.normalize(y)
            } else {
                Ok(y)
            }
        });
        x = match next {
            Ok(y) => y,
            Err(e) => bail!(e),
        };
        let t_next = cfg.t0 + (k + 1) as f64 * h;
        let defect = space.defect(&x);
        traj.max_defect = traj.max_defect.max(defect);
        if !(defect <= DIVERGENCE_DEFECT) {
            bail!(Error::Diverged { t: t_next, defect });
        }
        if (k + 1) % cfg.sample_stride == 0 || k + 1 == n {
            match sample(space, monitor, t_next, &x) {
                Ok(s) => traj.samples.push(s),
                Err(e) => bail!(e),
            }
        }
    }
    Ok(traj)
}

/// Integrates the extremum-seeking closed loop.
pub fn integrate_es<S: Space, C: CostOracle<S::Point>>(
    es: &EsField<'_, S, C>,
    x0: &S::Point,
    cfg: &IntegratorConfig,
    target: &S::Point,
) -> FlowResult<S::Point> {
    let field = |x: &S::Point, t: f64| es.eval(x, t);
    let monitor = Monitor { cost: es.cost(), target };
    integrate(es.space(), &field, x0, cfg, monitor, "extremum seeking")
}

/// Integrates the scaled gradient system `ẋ = −Σ (a_i²/2) D_iJ(x) ∂/∂x_i`.
pub fn integrate_gradient<S: Space, C: CostOracle<S::Point>>(
    space: &S,
    cost: &C,
    x0: &S::Point,
    amplitudes: &[f64],
    cfg: &IntegratorConfig,
    target: &S::Point,
) -> FlowResult<S::Point> {
    let field = |x: &S::Point, _t: f64| scaled_gradient(space, cost, x, amplitudes);
    let monitor = Monitor { cost, target };
    integrate(space, &field, x0, cfg, monitor, "scaled gradient")
}

/// Integrates the averaged system `ẋ = f̂(x)` with `quad_n` Simpson subintervals per evaluation.
pub fn integrate_averaged<S: Space, C: CostOracle<S::Point>>(
    es: &EsField<'_, S, C>,
    x0: &S::Point,
    cfg: &IntegratorConfig,
    quad_n: usize,
    target: &S::Point,
) -> FlowResult<S::Point> {
    let field = |x: &S::Point, _t: f64| averaged_field(es, x, quad_n);
    let monitor = Monitor { cost: es.cost(), target };
    integrate(es.space(), &field, x0, cfg, monitor, "averaged")
}
