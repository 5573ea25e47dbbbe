//! Box-constrained augmented-Lagrangian solver for `min f(z)` subject to
//! `c(z) ≥ 0` and `lo ≤ z ≤ hi`.
//!
//! Inequalities enter the merit through the standard shifted-penalty term
//! `ψ(c; λ, ρ) = −λc + ρc²/2` for `c < λ/ρ` and `−λ²/(2ρ)` otherwise. The
//! inner problem is minimised by a projected BFGS method (two-metric
//! projection with an Armijo search along the projection arc). Multipliers
//! follow `λ ← max(0, λ − ρc)`; the penalty grows ×10 when the violation
//! fails to shrink by a factor four.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::SolverSettings;

pub struct Evaluation {
    pub objective: f64,
    pub constraints: Vec<f64>,
    /// ∇f + Σ w_j ∇c_j for the weights requested by the caller.
    pub gradient: Option<Vec<f64>>,
}

/// Maps constraint values to multiplier-like weights.
pub type WeightFn<'a> = &'a dyn Fn(&[f64]) -> Vec<f64>;

pub trait Nlp {
    fn dim(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    /// Objective, constraint values and, when `weights` is given, the
    /// gradient of `f + Σ w_j c_j` with `w = weights(c)`.
    fn evaluate(&self, z: &[f64], weights: Option<WeightFn<'_>>) -> Evaluation;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIter,
    InfeasibleRelaxed { max_violation: f64 },
}

impl SolverStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIter => "max_iter",
            SolverStatus::InfeasibleRelaxed { .. } => "infeasible_relaxed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub max_violation: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    /// Objective after each outer iteration.
    pub outer_objectives: Vec<f64>,
}

fn project(z: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..z.len() {
        z[i] = z[i].clamp(lo[i], hi[i]);
    }
}

fn max_violation(c: &[f64]) -> f64 {
    c.iter().fold(0.0f64, |m, v| m.max(-v))
}

/// ‖P(z − g) − z‖∞
fn projected_gradient_norm(z: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    (0..z.len())
        .map(|i| ((z[i] - g[i]).clamp(lo[i], hi[i]) - z[i]).abs())
        .fold(0.0, f64::max)
}

struct Merit<'a, P: Nlp + ?Sized> {
    problem: &'a P,
    lambda: &'a [f64],
    rho: f64,
}

impl<P: Nlp + ?Sized> Merit<'_, P> {
    fn value_and_grad(&self, z: &[f64]) -> (f64, Vec<f64>, Evaluation) {
        let (lambda, rho) = (self.lambda, self.rho);
        let weights = |c: &[f64]| -> Vec<f64> {
            c.iter()
                .zip(lambda)
                .map(|(&cj, &lj)| if cj < lj / rho { -(lj - rho * cj) } else { 0.0 })
                .collect()
        };
        let eval = self.problem.evaluate(z, Some(&weights));
        let value = eval.objective + self.penalty(&eval.constraints);
        let grad = eval.gradient.clone().expect("gradient requested");
        (value, grad, eval)
    }

    fn value(&self, z: &[f64]) -> (f64, Evaluation) {
        let eval = self.problem.evaluate(z, None);
        (eval.objective + self.penalty(&eval.constraints), eval)
    }

    fn penalty(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(self.lambda)
            .map(|(&cj, &lj)| {
                if cj < lj / self.rho {
                    -lj * cj + 0.5 * self.rho * cj * cj
                } else {
                    -lj * lj / (2.0 * self.rho)
                }
            })
            .sum()
    }
}

struct InnerResult {
    z: Vec<f64>,
    eval: Evaluation,
    iterations: usize,
    stationarity: f64,
}

fn minimize_inner<P: Nlp + ?Sized>(
    merit: &Merit<'_, P>,
    z0: Vec<f64>,
    max_iter: usize,
    tol: f64,
) -> InnerResult {
    let lo = merit.problem.lower();
    let hi = merit.problem.upper();
    let n = z0.len();
    let mut z = z0;
    let (mut f, mut g, mut eval) = merit.value_and_grad(&z);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut iterations = 0;
    let mut stationarity = projected_gradient_norm(&z, &g, lo, hi);

    while iterations < max_iter && stationarity > tol {
        iterations += 1;
        let bound_eps = 1e-10;
        let active: Vec<bool> = (0..n)
            .map(|i| {
                (z[i] <= lo[i] + bound_eps && g[i] > 0.0)
                    || (z[i] >= hi[i] - bound_eps && g[i] < 0.0)
            })
            .collect();
        let g_free = DVector::from_iterator(n, (0..n).map(|i| if active[i] { 0.0 } else { g[i] }));
        let mut d = -(&h_inv * &g_free);
        for i in 0..n {
            if active[i] {
                d[i] = 0.0;
            }
        }
        if d.dot(&g_free) >= 0.0 {
            h_inv.fill_with_identity();
            scaled = false;
            d = -g_free.clone();
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = (0..n).map(|i| z[i] + alpha * d[i]).collect();
            project(&mut trial, lo, hi);
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - z[i])).sum();
            let (f_trial, _) = merit.value(&trial);
            if f_trial.is_finite() && f_trial <= f + 1e-4 * decrease && decrease < 0.0 {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(z_new) = accepted else {
            if scaled || h_inv != DMatrix::identity(n, n) {
                // retry from steepest descent before giving up
                h_inv.fill_with_identity();
                scaled = false;
                continue;
            }
            break;
        };

        let (f_new, g_new, eval_new) = merit.value_and_grad(&z_new);
        let s = DVector::from_iterator(n, (0..n).map(|i| z_new[i] - z[i]));
        let y = DVector::from_iterator(n, (0..n).map(|i| g_new[i] - g[i]));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if !scaled {
                let gamma = sy / y.dot(&y);
                h_inv = DMatrix::identity(n, n) * gamma;
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h_inv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        let progress = (f - f_new).abs();
        z = z_new;
        f = f_new;
        g = g_new;
        eval = eval_new;
        stationarity = projected_gradient_norm(&z, &g, lo, hi);
        if progress <= 1e-15 * f.abs().max(1.0) {
            break;
        }
    }
    InnerResult {
        z,
        eval,
        iterations,
        stationarity,
    }
}

/// Solves the problem from `z0` (projected onto the box first).
pub fn solve<P: Nlp + ?Sized>(problem: &P, z0: &[f64], settings: &SolverSettings) -> NlpSolution {
    let lo = problem.lower();
    let hi = problem.upper();
    let mut z = z0.to_vec();
    project(&mut z, lo, hi);
    let first = problem.evaluate(&z, None);
    let m = first.constraints.len();
    let mut lambda = vec![0.0; m];
    let mut rho = settings.initial_penalty;
    let mut last_violation = max_violation(&first.constraints);
    let mut last_objective = first.objective;
    let mut iterations = 0;
    let mut outer_objectives = Vec::new();
    let mut status = None;
    let mut eval = first;

    for _ in 0..settings.max_outer_iterations {
        let merit = Merit {
            problem,
            lambda: &lambda,
            rho,
        };
        let scale = eval.objective.abs().max(1.0);
        let inner = minimize_inner(
            &merit,
            z,
            settings.max_inner_iterations,
            settings.kkt_tolerance * scale,
        );
        iterations += inner.iterations;
        z = inner.z;
        eval = inner.eval;
        let c = &eval.constraints;
        let violation = max_violation(c);

        // multiplier update; the merit gradient already equals the
        // Lagrangian gradient at the updated multipliers
        let mut complementarity = 0.0f64;
        for j in 0..m {
            lambda[j] = (lambda[j] - rho * c[j]).max(0.0);
            complementarity = complementarity.max((lambda[j] * c[j]).abs());
        }
        outer_objectives.push(eval.objective);

        let scale = eval.objective.abs().max(1.0);
        let feasible = violation <= settings.kkt_tolerance;
        let stationary = inner.stationarity <= settings.kkt_tolerance * scale
            && complementarity <= settings.kkt_tolerance * scale;
        let stalled = (eval.objective - last_objective).abs() <= settings.stall_tolerance * scale
            && violation <= last_violation;
        if feasible && (stationary || stalled) {
            status = Some(SolverStatus::Converged);
            break;
        }
        if violation > 0.25 * last_violation && violation > settings.kkt_tolerance {
            rho = (rho * 10.0).min(settings.max_penalty);
        }
        last_violation = violation;
        last_objective = eval.objective;
    }

    let violation = max_violation(&eval.constraints);
    let status = status.unwrap_or(if violation <= settings.kkt_tolerance {
        SolverStatus::MaxIter
    } else {
        SolverStatus::InfeasibleRelaxed {
            max_violation: violation,
        }
    });
    NlpSolution {
        objective: eval.objective,
        constraints: eval.constraints,
        max_violation: violation,
        z,
        status,
        iterations,
        outer_objectives,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min (x−3)² + (y−2)²  s.t.  1 − x − y ≥ 0,  x, y ∈ [−5, 5]
    struct Toy {
        lo: Vec<f64>,
        hi: Vec<f64>,
    }

    impl Nlp for Toy {
        fn dim(&self) -> usize {
            2
        }
        fn lower(&self) -> &[f64] {
            &self.lo
        }
        fn upper(&self) -> &[f64] {
            &self.hi
        }
        fn evaluate(&self, z: &[f64], weights: Option<WeightFn<'_>>) -> Evaluation {
            let f = (z[0] - 3.0).powi(2) + (z[1] - 2.0).powi(2);
            let c = vec![1.0 - z[0] - z[1]];
            let gradient = weights.map(|w| {
                let w = w(&c);
                vec![2.0 * (z[0] - 3.0) - w[0], 2.0 * (z[1] - 2.0) - w[0]]
            });
            Evaluation {
                objective: f,
                constraints: c,
                gradient,
            }
        }
    }

    fn toy() -> Toy {
        Toy {
            lo: vec![-5.0; 2],
            hi: vec![5.0; 2],
        }
    }

    #[test]
    fn solves_linearly_constrained_quadratic() {
        let sol = solve(&toy(), &[0.0, 0.0], &SolverSettings::default());
        // projection of (3, 2) onto x + y = 1 is (1, 0)
        assert_eq!(sol.status, SolverStatus::Converged);
        assert!((sol.z[0] - 1.0).abs() < 1e-4, "{:?}", sol.z);
        assert!((sol.z[1] - 0.0).abs() < 1e-4);
        assert!(sol.max_violation <= 1e-4);
    }

    #[test]
    fn respects_active_box() {
        let p = Toy {
            lo: vec![-5.0, 0.5],
            hi: vec![5.0, 5.0],
        };
        let sol = solve(&p, &[4.0, 4.0], &SolverSettings::default());
        assert!((sol.z[1] - 0.5).abs() < 1e-9);
        assert!((sol.z[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn reports_infeasibility() {
        // x + y ≤ 1 with both x, y ≥ 2 is infeasible
        let p = Toy {
            lo: vec![2.0, 2.0],
            hi: vec![5.0, 5.0],
        };
        let sol = solve(&p, &[3.0, 3.0], &SolverSettings::default());
        match sol.status {
            SolverStatus::InfeasibleRelaxed { max_violation } => {
                assert!((max_violation - 3.0).abs() < 1e-6)
            }
            other => panic!("unexpected status {other:?}"),
        }
        assert_eq!(sol.z, vec![2.0, 2.0]);
    }
}
