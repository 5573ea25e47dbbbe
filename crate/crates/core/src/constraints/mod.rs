//! Collision-avoidance residuals.
//!
//! Every residual follows the sign convention `feasible ⇔ residual ≥ 0`.
//! The public functions evaluate the exact geometry; [`CollisionModel`] holds
//! the smoothed variants with position gradients that the planner consumes.

mod ellipse;
mod erf;

use serde::{Deserialize, Serialize};

pub use ellipse::{eigendecompose_2x2, EllipseDecomposition, Mat2};
pub use erf::{erf, erf_inv, erfc};

use crate::dynamics::RobotState;
use crate::predictor::GaussianStep;
use crate::{Error, Result};

/// Smoothing length for distances inside the NLP, metres.
pub const DISTANCE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyGeometry {
    /// Pedestrian radius a₀.
    pub ped_radius: f64,
    /// Robot radius r_o.
    pub robot_radius: f64,
    /// Extra setback added to every collision radius.
    pub safety_margin: f64,
}

impl Default for SafetyGeometry {
    fn default() -> Self {
        Self {
            ped_radius: 0.15,
            robot_radius: 0.3,
            safety_margin: 0.0,
        }
    }
}

impl SafetyGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.ped_radius >= 0.0 && self.robot_radius >= 0.0 && self.safety_margin >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "safety geometry must be non-negative: {self:?}"
            )))
        }
    }

    /// Centre distance below which robot and pedestrian discs overlap.
    pub fn contact_distance(&self) -> f64 {
        self.robot_radius + self.ped_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConstraintMode {
    Hard,
    Chance { delta: f64 },
    Cbf { gamma: f64 },
}

impl ConstraintMode {
    pub const DEFAULT_DELTA: f64 = 0.1;
    pub const DEFAULT_GAMMA: f64 = 0.4;

    pub fn chance() -> Self {
        ConstraintMode::Chance {
            delta: Self::DEFAULT_DELTA,
        }
    }

    pub fn cbf() -> Self {
        ConstraintMode::Cbf {
            gamma: Self::DEFAULT_GAMMA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintMode::Hard => "hard",
            ConstraintMode::Chance { .. } => "chance",
            ConstraintMode::Cbf { .. } => "cbf",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ConstraintMode::Hard => Ok(()),
            ConstraintMode::Chance { delta } if delta > 0.0 && delta <= 0.5 => Ok(()),
            ConstraintMode::Cbf { gamma } if gamma > 0.0 && gamma <= 1.0 => Ok(()),
            ConstraintMode::Chance { delta } => Err(Error::InvalidInput(format!(
                "chance threshold must lie in (0, 0.5], got {delta}"
            ))),
            ConstraintMode::Cbf { gamma } => Err(Error::InvalidInput(format!(
                "CBF decay rate must lie in (0, 1], got {gamma}"
            ))),
        }
    }
}

/// Circular over-approximation of the inflated pedestrian ellipse: a₀ + √Λ₁.
pub fn bounding_radius(sigma: &Mat2, geometry: &SafetyGeometry) -> Result<f64> {
    let e = eigendecompose_2x2(sigma)?;
    Ok(geometry.ped_radius + e.semi_axes()[0])
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// ‖p − μ‖ − (r_o + r_th).
pub fn hard_residual(p: [f64; 2], step: &GaussianStep, geometry: &SafetyGeometry) -> Result<f64> {
    let r_th = bounding_radius(&step.covariance, geometry)?;
    Ok(distance(p, step.mean) - (geometry.robot_radius + r_th + geometry.safety_margin))
}

/// Barrier value h(x) for the robot state against one forecast step.
pub fn cbf_h(x: &RobotState, step: &GaussianStep, geometry: &SafetyGeometry) -> Result<f64> {
    hard_residual(x.position(), step, geometry)
}

/// h(x_{t+1}) − (1 − γ)·h(x_t).
pub fn cbf_residual(h_now: f64, h_next: f64, gamma: f64) -> f64 {
    h_next - (1.0 - gamma) * h_now
}

/// Quantile multiplier erf⁻¹(1 − 2δ) of the chance reformulation.
pub fn chance_quantile(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Domain(format!(
            "chance threshold must lie in (0, 0.5], got {delta}"
        )));
    }
    erf_inv(1.0 - 2.0 * delta)
}

/// Linearised chance constraint with the projection point at the predicted
/// mean: κᵀ(p − μ) − (r_o + a₀) − √(2κᵀΣκ)·erf⁻¹(1 − 2δ).
pub fn chance_residual(
    p: [f64; 2],
    step: &GaussianStep,
    delta: f64,
    geometry: &SafetyGeometry,
) -> Result<f64> {
    let c = chance_quantile(delta)?;
    step.validate()?;
    let d = [p[0] - step.mean[0], p[1] - step.mean[1]];
    let norm = d[0].hypot(d[1]);
    if norm < 1e-9 {
        return Err(Error::DegenerateGeometry { distance: norm });
    }
    let kappa = [d[0] / norm, d[1] / norm];
    let s = quad(&step.covariance, kappa);
    let along = kappa[0] * d[0] + kappa[1] * d[1];
    Ok(along
        - (geometry.robot_radius + geometry.ped_radius + geometry.safety_margin)
        - (2.0 * s.max(0.0)).sqrt() * c)
}

fn quad(m: &Mat2, v: [f64; 2]) -> f64 {
    v[0] * (m[0][0] * v[0] + m[0][1] * v[1]) + v[1] * (m[1][0] * v[0] + m[1][1] * v[1])
}

/// Precomputed per-step collision data for the NLP: everything that does not
/// depend on the robot position.
#[derive(Debug, Clone, Copy)]
pub(crate) enum CollisionModel {
    /// value = ‖p − μ‖_ε − radius
    Disc { mean: [f64; 2], radius: f64 },
    /// value = ‖p − μ‖_ε − radius − quantile·√(2κᵀΣκ)
    Chance {
        mean: [f64; 2],
        radius: f64,
        covariance: Mat2,
        quantile: f64,
    },
}

impl CollisionModel {
    pub(crate) fn disc(step: &GaussianStep, geometry: &SafetyGeometry) -> Result<Self> {
        Ok(CollisionModel::Disc {
            mean: step.mean,
            radius: geometry.robot_radius
                + bounding_radius(&step.covariance, geometry)?
                + geometry.safety_margin,
        })
    }

    pub(crate) fn chance(
        step: &GaussianStep,
        geometry: &SafetyGeometry,
        quantile: f64,
    ) -> Result<Self> {
        step.validate()?;
        Ok(CollisionModel::Chance {
            mean: step.mean,
            radius: geometry.robot_radius + geometry.ped_radius + geometry.safety_margin,
            covariance: step.covariance,
            quantile,
        })
    }

    /// Smoothed residual and its gradient with respect to the robot position.
    pub(crate) fn eval(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        match *self {
            CollisionModel::Disc { mean, radius } => {
                let d = [p[0] - mean[0], p[1] - mean[1]];
                let n = (d[0] * d[0] + d[1] * d[1] + DISTANCE_EPS * DISTANCE_EPS).sqrt();
                (n - radius, [d[0] / n, d[1] / n])
            }
            CollisionModel::Chance {
                mean,
                radius,
                covariance,
                quantile,
            } => {
                let d = [p[0] - mean[0], p[1] - mean[1]];
                let n2 = d[0] * d[0] + d[1] * d[1] + DISTANCE_EPS * DISTANCE_EPS;
                let n = n2.sqrt();
                let sd = [
                    covariance[0][0] * d[0] + covariance[0][1] * d[1],
                    covariance[1][0] * d[0] + covariance[1][1] * d[1],
                ];
                let dsd = d[0] * sd[0] + d[1] * sd[1];
                let s = (dsd / n2).max(0.0);
                // tiny floor keeps the square root differentiable at Σ = 0
                let root = (2.0 * s + 1e-14).sqrt();
                let value = n - radius - quantile * root;
                let mut grad = [d[0] / n, d[1] / n];
                if quantile != 0.0 {
                    let k = quantile / root;
                    for i in 0..2 {
                        // ∂s/∂d = (Σ + Σᵀ)d / n² − 2 dᵀΣd · d / n⁴, Σ symmetric
                        let ds = 2.0 * sd[i] / n2 - 2.0 * dsd * d[i] / (n2 * n2);
                        grad[i] -= k * ds;
                    }
                }
                (value, grad)
            }
        }
    }
}
