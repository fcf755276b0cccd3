//! Turns a configuration into a concrete space, cost, initial state and target.

use geoseek_core::lie::{check_group_membership, GroupElement};
use geoseek_core::{ChartPoint, CostOracle, GroupTag, ManifoldDescriptor, MatrixGroup, Space};
use nalgebra::DMatrix;

use crate::config::{CostSpec, ExperimentConfig, SpaceKind, StateSpec};
use crate::error::CliError;

pub type ChartCost = Box<dyn Fn(&ChartPoint) -> f64 + Send + Sync>;
pub type GroupCost = Box<dyn Fn(&GroupElement) -> f64 + Send + Sync>;

pub enum Problem {
    Chart {
        space: ManifoldDescriptor,
        cost: ChartCost,
        x0: ChartPoint,
        target: ChartPoint,
    },
    Group {
        space: MatrixGroup,
        cost: GroupCost,
        x0: GroupElement,
        target: GroupElement,
    },
}

/// Code that runs the same way on every space.
pub trait Visitor {
    type Out;

    fn visit<S: Space, C: CostOracle<S::Point> + Sync>(self, space: &S, cost: &C, x0: &S::Point, target: &S::Point) -> Self::Out;
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn chart_state(spec: &StateSpec) -> Result<ChartPoint, CliError> {
    match spec {
        StateSpec::Coords(c) if c.len() == 1 => Ok(ChartPoint::new(c.clone())),
        _ => Err(config_err(format!("expected a one-coordinate state, got {spec:?}"))),
    }
}

fn group_state(spec: &StateSpec, tag: GroupTag) -> Result<GroupElement, CliError> {
    let g = match spec {
        StateSpec::Identity => GroupElement::identity(tag),
        StateSpec::Rz { angle, translation } => {
            let r = GroupElement::rz(*angle);
            match (tag, translation) {
                (GroupTag::SO3, None) => r,
                (GroupTag::SE3, t) => GroupElement::se3(&r, t.unwrap_or([0.0; 3])).map_err(|e| config_err(e.to_string()))?,
                (GroupTag::SO3, Some(_)) => return Err(config_err("SO3 states have no translation")),
            }
        }
        StateSpec::Matrix(rows) => {
            let k = tag.mat_dim();
            if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                return Err(config_err(format!("{tag} matrix must be {k}x{k}")));
            }
            let m = DMatrix::from_fn(k, k, |i, j| rows[i][j]);
            let g = GroupElement::from_matrix_unchecked(m, tag).map_err(|e| config_err(e.to_string()))?;
            let defect = check_group_membership(&g).max();
            if defect > 1e-9 {
                return Err(config_err(format!("matrix is not in {tag} (defect {defect:e})")));
            }
            g
        }
        StateSpec::Coords(_) => return Err(config_err(format!("{tag} states are given as rz, matrix or identity"))),
    };
    Ok(g)
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Problem, CliError> {
        match (cfg.space, &cfg.cost) {
            (SpaceKind::R1, CostSpec::Quadratic { center }) => {
                let c = *center;
                Ok(Problem::Chart {
                    space: ManifoldDescriptor::euclidean(1),
                    cost: Box::new(move |x: &ChartPoint| (x.coords[0] - c).powi(2)),
                    x0: chart_state(&cfg.initial)?,
                    target: match &cfg.target {
                        Some(t) => chart_state(t)?,
                        None => ChartPoint::new(vec![c]),
                    },
                })
            }
            (SpaceKind::S1, CostSpec::Cosine { theta_star }) => {
                let ts = *theta_star;
                let space = ManifoldDescriptor::circle();
                let x0 = Space::normalize(&space, chart_state(&cfg.initial)?).map_err(|e| config_err(e.to_string()))?;
                let target = match &cfg.target {
                    Some(t) => chart_state(t)?,
                    None => ChartPoint::new(vec![ts]),
                };
                Ok(Problem::Chart {
                    space,
                    cost: Box::new(move |x: &ChartPoint| 1.0 - (x.coords[0] - ts).cos()),
                    x0,
                    target,
                })
            }
            (SpaceKind::SO3, CostSpec::Trace) => Ok(Problem::Group {
                space: MatrixGroup::new(GroupTag::SO3),
                cost: Box::new(|g: &GroupElement| 3.0 - g.mat().trace()),
                x0: group_state(&cfg.initial, GroupTag::SO3)?,
                target: group_state(cfg.target.as_ref().unwrap_or(&StateSpec::Identity), GroupTag::SO3)?,
            }),
            (SpaceKind::SE3, CostSpec::Se3Pose) => Ok(Problem::Group {
                space: MatrixGroup::new(GroupTag::SE3),
                cost: Box::new(|g: &GroupElement| 3.0 - g.rotation().trace() + 0.5 * g.translation().norm_squared()),
                x0: group_state(&cfg.initial, GroupTag::SE3)?,
                target: group_state(cfg.target.as_ref().unwrap_or(&StateSpec::Identity), GroupTag::SE3)?,
            }),
            (space, cost) => Err(config_err(format!("cost {cost:?} is not defined on {space:?}"))),
        }
    }

    pub fn accept<V: Visitor>(&self, v: V) -> V::Out {
        match self {
            Problem::Chart { space, cost, x0, target } => {
                let c: &(dyn Fn(&ChartPoint) -> f64 + Send + Sync) = cost.as_ref();
                v.visit(space, &c, x0, target)
            }
            Problem::Group { space, cost, x0, target } => {
                let c: &(dyn Fn(&GroupElement) -> f64 + Send + Sync) = cost.as_ref();
                v.visit(space, &c, x0, target)
            }
        }
    }

    pub fn check_amplitudes(&self, amplitudes: &[f64]) -> Result<(), CliError> {
        let report = match self {
            Problem::Chart { space, .. } => space.validate_dither_amplitude(amplitudes),
            Problem::Group { space, .. } => space.validate_amplitudes(amplitudes),
        };
        if report.passed {
            Ok(())
        } else {
            Err(config_err(format!(
                "dither amplitude bound {} is not below the injectivity radius {}",
                report.bound, report.injectivity_radius
            )))
        }
    }
}
