//! Per-radar trust-region subproblem (TRS):
//!
//! ```text
//! minimize  ½ yᵀA y + pᵀy    subject to  ‖y‖ ≤ d,
//! ```
//!
//! where `A = η I + γ v vᵀ` is positive definite by construction (η > 0,
//! γ ≥ 0). Two independent routes are implemented:
//!
//! * [`solve_trs_eigen`] — the dual multiplier λ* is the largest real
//!   eigenvalue of the 6×6 block matrix `[[−A, I], [p pᵀ/d², −A]]`; if it is
//!   positive the solution lies on the boundary, otherwise the problem is
//!   solved unconstrained.
//! * [`solve_trs_secular`] — an oracle exploiting the rank-one structure:
//!   the spectral split of `p` along/across `v` reduces `‖(A+λI)⁻¹p‖ = d`
//!   to a two-pole secular equation solved by safeguarded Newton.
//!
//! Both must agree; [`check_kkt`] verifies primal/dual feasibility,
//! stationarity and complementary slackness of any candidate solution.

pub mod eigen;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use thiserror::Error;

pub use eigen::{largest_real_eigenvalue, LargestRealEigenvalue};

#[derive(Debug, Error)]
pub enum TrsError {
    #[error("invalid trust-region subproblem: {0}")]
    InvalidProblem(String),
    #[error("eigenvalue iteration failed to converge (matrix scale {matrix_scale:.3e})")]
    EigenIterationFailed { matrix_scale: f64 },
}

/// One structured trust-region subproblem. The quadratic matrix
/// `A = eta·I + gamma·direction·directionᵀ` is stored in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct TrsProblem {
    pub eta: f64,
    pub gamma: f64,
    pub direction: Vector3<f64>,
    pub p: Vector3<f64>,
    pub radius: f64,
}

impl TrsProblem {
    pub fn new(
        eta: f64,
        gamma: f64,
        direction: Vector3<f64>,
        p: Vector3<f64>,
        radius: f64,
    ) -> Result<Self, TrsError> {
        let problem = Self {
            eta,
            gamma,
            direction,
            p,
            radius,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<(), TrsError> {
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(TrsError::InvalidProblem(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(TrsError::InvalidProblem(format!(
                "gamma must be nonnegative and finite, got {}",
                self.gamma
            )));
        }
        if !self.radius.is_finite() || self.radius <= 0.0 {
            return Err(TrsError::InvalidProblem(format!(
                "radius must be positive and finite, got {}",
                self.radius
            )));
        }
        if !self.direction.iter().all(|x| x.is_finite()) || !self.p.iter().all(|x| x.is_finite()) {
            return Err(TrsError::InvalidProblem(
                "direction and p must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Dense `A = η I + γ v vᵀ`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::identity() * self.eta + self.direction * self.direction.transpose() * self.gamma
    }

    /// `det(A + λI)` by the matrix determinant lemma:
    /// `(1 + γ‖v‖²/(η+λ))·(η+λ)³`.
    pub fn shifted_determinant(&self, lambda: f64) -> f64 {
        let shifted_eta = self.eta + lambda;
        (1.0 + self.gamma * self.direction.norm_squared() / shifted_eta) * shifted_eta.powi(3)
    }

    /// `(A + λI)⁻¹ rhs` in closed form via the Sherman-Morrison identity.
    pub fn solve_shifted(&self, lambda: f64, rhs: &Vector3<f64>) -> Vector3<f64> {
        let shifted_eta = self.eta + lambda;
        let dir_norm2 = self.direction.norm_squared();
        if self.gamma * dir_norm2 == 0.0 {
            return rhs / shifted_eta;
        }
        let coupling = self.gamma * self.direction.dot(rhs)
            / (shifted_eta * (shifted_eta + self.gamma * dir_norm2));
        rhs / shifted_eta - self.direction * coupling
    }

    /// Objective value `½ yᵀA y + pᵀy`.
    pub fn objective(&self, y: &Vector3<f64>) -> f64 {
        let vy = self.direction.dot(y);
        0.5 * (self.eta * y.norm_squared() + self.gamma * vy * vy) + self.p.dot(y)
    }

    /// Squared norm of `(A + λI)⁻¹ p` from the two-pole spectral split of
    /// `p` along and across `direction`.
    fn shifted_solution_norm2(&self, lambda: f64) -> f64 {
        let (across2, along2, pole_low, pole_high) = self.secular_split();
        across2 / ((pole_low + lambda) * (pole_low + lambda))
            + along2 / ((pole_high + lambda) * (pole_high + lambda))
    }

    /// (‖p across v‖², ‖p along v‖², η, η + γ‖v‖²).
    fn secular_split(&self) -> (f64, f64, f64, f64) {
        let dir_norm2 = self.direction.norm_squared();
        if self.gamma * dir_norm2 == 0.0 {
            return (self.p.norm_squared(), 0.0, self.eta, self.eta);
        }
        let along = self.direction.dot(&self.p).powi(2) / dir_norm2;
        let across = (self.p.norm_squared() - along).max(0.0);
        (across, along, self.eta, self.eta + self.gamma * dir_norm2)
    }

    /// Random structured instance with O(1) scales; used by the solver
    /// cross-check command and the property suites.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> TrsProblem {
        let log_uniform = |rng: &mut R, lo: f64, hi: f64| 10f64.powf(rng.gen_range(lo..hi));
        let eta = log_uniform(rng, -1.0, 1.0);
        let gamma = if rng.gen::<f64>() < 0.2 {
            0.0
        } else {
            log_uniform(rng, -3.0, 1.0)
        };
        let scale_v = log_uniform(rng, -1.0, 0.5);
        let scale_p = log_uniform(rng, -1.0, 1.0);
        let direction = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ) * scale_v;
        let p = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ) * scale_p;
        let radius = log_uniform(rng, -1.0, 1.0);
        TrsProblem {
            eta,
            gamma,
            direction,
            p,
            radius,
        }
    }
}

/// Primal-dual answer to a [`TrsProblem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrsSolution {
    pub y: Vector3<f64>,
    pub lambda: f64,
    pub on_boundary: bool,
}

/// Solve by the structured secular equation (oracle route).
///
/// If the unconstrained minimizer `−A⁻¹p` is feasible it is returned with
/// λ = 0; otherwise safeguarded Newton finds the unique λ > 0 with
/// `‖(A+λI)⁻¹p‖ = d` on the strictly decreasing secular function.
pub fn solve_trs_secular(problem: &TrsProblem) -> Result<TrsSolution, TrsError> {
    problem.validate()?;
    let d = problem.radius;
    if problem.p == Vector3::zeros() {
        return Ok(TrsSolution {
            y: Vector3::zeros(),
            lambda: 0.0,
            on_boundary: false,
        });
    }
    if problem.shifted_solution_norm2(0.0) <= d * d {
        return Ok(TrsSolution {
            y: -problem.solve_shifted(0.0, &problem.p),
            lambda: 0.0,
            on_boundary: false,
        });
    }

    // Bracket: ‖y(λ)‖ < ‖p‖/λ, so λ = ‖p‖/d is always an upper bound.
    let mut lo = 0.0f64;
    let mut hi = problem.p.norm() / d;
    debug_assert!(problem.shifted_solution_norm2(hi) <= d * d);

    // Newton on ψ(λ) = 1/‖y(λ)‖ − 1/d, which is nearly linear in λ.
    let mut lambda = 0.5 * hi;
    for _ in 0..200 {
        let norm2 = problem.shifted_solution_norm2(lambda);
        let norm = norm2.sqrt();
        let psi = 1.0 / norm - 1.0 / d;
        if psi < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if (norm - d).abs() <= 1e-13 * d {
            break;
        }
        let (across2, along2, pole_low, pole_high) = problem.secular_split();
        let norm2_derivative = -2.0
            * (across2 / (pole_low + lambda).powi(3) + along2 / (pole_high + lambda).powi(3));
        let psi_derivative = -norm2_derivative / (2.0 * norm2 * norm);
        let mut next = lambda - psi / psi_derivative;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - lambda).abs() <= f64::EPSILON * lambda.max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }

    Ok(TrsSolution {
        y: -problem.solve_shifted(lambda, &problem.p),
        lambda,
        on_boundary: true,
    })
}

/// Assemble the 6×6 block matrix `[[−A, I], [p pᵀ/d², −A]]` whose largest
/// real eigenvalue is the boundary dual multiplier.
fn dual_eigen_matrix(problem: &TrsProblem) -> DMatrix<f64> {
    let a = problem.matrix();
    let d2 = problem.radius * problem.radius;
    let mut m = DMatrix::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = -a[(i, j)];
            m[(i + 3, j + 3)] = -a[(i, j)];
            m[(i + 3, j)] = problem.p[i] * problem.p[j] / d2;
        }
        m[(i, i + 3)] = 1.0;
    }
    m
}

/// Solve via the nonsymmetric eigenvalue formulation (the primary route).
pub fn solve_trs_eigen(problem: &TrsProblem) -> Result<TrsSolution, TrsError> {
    problem.validate()?;
    if problem.p == Vector3::zeros() {
        // The eigenvalue formulation degenerates for p = 0; the minimizer is
        // the origin.
        return Ok(TrsSolution {
            y: Vector3::zeros(),
            lambda: 0.0,
            on_boundary: false,
        });
    }
    let m = dual_eigen_matrix(problem);
    let outcome = largest_real_eigenvalue(&m);
    if !outcome.converged {
        return Err(TrsError::EigenIterationFailed {
            matrix_scale: m.iter().map(|x| x.abs()).fold(0.0, f64::max),
        });
    }
    match outcome.value {
        Some(lambda) if lambda > 0.0 => Ok(TrsSolution {
            y: -problem.solve_shifted(lambda, &problem.p),
            lambda,
            on_boundary: true,
        }),
        // A non-positive (or absent) largest real eigenvalue means the
        // constraint is inactive.
        _ => Ok(TrsSolution {
            y: -problem.solve_shifted(0.0, &problem.p),
            lambda: 0.0,
            on_boundary: false,
        }),
    }
}

/// Eigenvalue route with the secular oracle as fallback when the QR
/// iteration fails to converge.
pub fn solve(problem: &TrsProblem) -> Result<TrsSolution, TrsError> {
    match solve_trs_eigen(problem) {
        Ok(solution) => Ok(solution),
        Err(TrsError::EigenIterationFailed { .. }) => solve_trs_secular(problem),
        Err(other) => Err(other),
    }
}

/// Residuals of the five optimality conditions for a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// max(0, ‖y‖ − d): primal feasibility violation (m).
    pub primal_feasibility: f64,
    /// ‖(A + λI)y + p‖: stationarity residual.
    pub stationarity: f64,
    /// max(0, −λ_min(A + λI)): positive-semidefiniteness violation.
    pub psd_margin: f64,
    /// max(0, −λ): dual feasibility violation.
    pub dual_feasibility: f64,
    /// |λ·(‖y‖² − d²)|: complementary slackness residual.
    pub complementary_slackness: f64,
}

impl KktResiduals {
    /// Largest residual after dividing each by its natural problem scale,
    /// so a uniform `1e-8` threshold is meaningful across instances.
    pub fn max_scaled(&self, problem: &TrsProblem) -> f64 {
        let d = problem.radius;
        let curvature =
            problem.eta + problem.gamma * problem.direction.norm_squared();
        let stationarity_scale = problem.p.norm() + curvature * d;
        [
            self.primal_feasibility / d,
            self.stationarity / (1.0 + stationarity_scale),
            self.psd_margin / (1.0 + problem.eta),
            self.dual_feasibility,
            self.complementary_slackness / ((1.0 + curvature) * d * d),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluate all five optimality-condition residuals.
pub fn check_kkt(problem: &TrsProblem, solution: &TrsSolution) -> KktResiduals {
    let y_norm = solution.y.norm();
    let stationarity = (problem.matrix() * solution.y
        + solution.y * solution.lambda
        + problem.p)
        .norm();
    // Eigenvalues of A + λI are {η + λ (twice), η + γ‖v‖² + λ}; γ ≥ 0 makes
    // η + λ the smallest.
    let min_eigenvalue = problem.eta + solution.lambda;
    KktResiduals {
        primal_feasibility: (y_norm - problem.radius).max(0.0),
        stationarity,
        psd_margin: (-min_eigenvalue).max(0.0),
        dual_feasibility: (-solution.lambda).max(0.0),
        complementary_slackness: (solution.lambda
            * (y_norm * y_norm - problem.radius * problem.radius))
            .abs(),
    }
}
