use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

/// Σ = Q · diag(Λ₁, Λ₂) · Qᵀ with Λ₁ ≥ Λ₂ ≥ 0. Columns of `rotation` are the
/// eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseDecomposition {
    pub rotation: Mat2,
    pub eigenvalues: [f64; 2],
}

impl EllipseDecomposition {
    /// Semi-axis lengths (major, minor) of the 1σ ellipse.
    pub fn semi_axes(&self) -> [f64; 2] {
        [self.eigenvalues[0].sqrt(), self.eigenvalues[1].sqrt()]
    }

    pub fn reconstruct(&self) -> Mat2 {
        let q = &self.rotation;
        let [l1, l2] = self.eigenvalues;
        let mut m = [[0.0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = q[i][0] * l1 * q[j][0] + q[i][1] * l2 * q[j][1];
            }
        }
        m
    }
}

const SYMMETRY_TOL: f64 = 1e-9;
const NEGATIVE_TOL: f64 = 1e-12;

/// Closed-form eigendecomposition of a symmetric PSD 2×2 matrix.
pub fn eigendecompose_2x2(sigma: &Mat2) -> Result<EllipseDecomposition> {
    let [[a, b], [c, d]] = *sigma;
    if ![a, b, c, d].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("covariance has non-finite entries".into()));
    }
    if (b - c).abs() > SYMMETRY_TOL {
        return Err(Error::Domain(format!(
            "covariance is not symmetric: off-diagonals {b} and {c}"
        )));
    }
    let b = 0.5 * (b + c);
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let radius = half_diff.hypot(b);
    let mut l1 = mean + radius;
    let mut l2 = mean - radius;
    if l2 < -NEGATIVE_TOL {
        return Err(Error::Domain(format!(
            "covariance is indefinite: eigenvalue {l2}"
        )));
    }
    l1 = l1.max(0.0);
    l2 = l2.max(0.0);

    let rotation = if b == 0.0 {
        if a >= d {
            [[1.0, 0.0], [0.0, 1.0]]
        } else {
            [[0.0, -1.0], [1.0, 0.0]]
        }
    } else {
        // Major eigenvector angle θ with tan 2θ = 2b / (a − d).
        let theta = 0.5 * (2.0 * b).atan2(a - d);
        let (s, c) = theta.sin_cos();
        [[c, -s], [s, c]]
    };
    Ok(EllipseDecomposition {
        rotation,
        eigenvalues: [l1, l2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn diagonal_matrix() {
        let e = eigendecompose_2x2(&[[4.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(e.eigenvalues, [4.0, 1.0]);
        assert_eq!(e.rotation, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(e.semi_axes(), [2.0, 1.0]);
    }

    #[test]
    fn correlated_matrix() {
        let e = eigendecompose_2x2(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert!(close(e.eigenvalues[0], 3.0, 1e-14));
        assert!(close(e.eigenvalues[1], 1.0, 1e-14));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // major axis along (1, 1)/√2, minor along ±(1, −1)/√2
        assert!(close(e.rotation[0][0], h, 1e-14) && close(e.rotation[1][0], h, 1e-14));
        assert!(close(e.rotation[0][1].abs(), h, 1e-14));
        assert!(close(e.rotation[0][1], -e.rotation[1][1], 1e-14));
    }

    #[test]
    fn zero_matrix() {
        let e = eigendecompose_2x2(&[[0.0; 2]; 2]).unwrap();
        assert_eq!(e.eigenvalues, [0.0, 0.0]);
        assert_eq!(e.rotation, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn minor_first_diagonal_is_sorted() {
        let e = eigendecompose_2x2(&[[1.0, 0.0], [0.0, 9.0]]).unwrap();
        assert_eq!(e.eigenvalues, [9.0, 1.0]);
        let m = e.reconstruct();
        assert_eq!(m, [[1.0, 0.0], [0.0, 9.0]]);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        assert!(eigendecompose_2x2(&[[1.0, 0.5], [0.2, 1.0]]).is_err());
        assert!(eigendecompose_2x2(&[[1.0, 0.0], [0.0, -0.1]]).is_err());
        // tiny negative rounding noise is clamped
        let e = eigendecompose_2x2(&[[1.0, 0.0], [0.0, -1e-13]]).unwrap();
        assert_eq!(e.eigenvalues[1], 0.0);
    }
}
