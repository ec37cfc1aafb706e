//! Dense box-constrained convex QP:
//!
//! ```text
//! minimise  1/2 x' H x + g' x   subject to  lower <= x <= upper
//! ```
//!
//! Solved by a projected Newton method: each iteration fixes the variables
//! sitting on a bound with the gradient pushing outwards, takes a Newton
//! step on the remaining free block and backtracks along the projected
//! path (Armijo). The objective never increases between iterates, and once
//! the optimal active set is identified a single full step lands on the
//! exact minimiser.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub max_iter: usize,
    /// Relative KKT tolerance.
    pub tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Converged,
    /// Iteration limit hit; the best iterate is returned.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Scaled KKT residual of `x`.
    pub residual: f64,
    pub status: QpStatus,
    /// Objective value at the start point and after every iteration.
    pub objectives: Vec<f64>,
}

/// A box QP whose Hessian is fixed, so repeated solves (one per control
/// step) reuse the full factorisation.
#[derive(Debug, Clone)]
pub struct BoxQp {
    hessian: DMatrix<f64>,
    full: Cholesky<f64, Dyn>,
    settings: QpSettings,
}

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;

impl BoxQp {
    pub fn new(hessian: DMatrix<f64>, settings: QpSettings) -> Result<Self> {
        if !hessian.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hessian is {}x{}",
                hessian.nrows(),
                hessian.ncols()
            )));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-9 * hessian.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveDefinite);
        }
        let full = Cholesky::new(hessian.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            hessian,
            full,
            settings,
        })
    }

    pub fn dim(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn objective(&self, gradient: &DVector<f64>, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + gradient.dot(x)
    }

    fn residual(&self, x: &DVector<f64>, grad: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> f64 {
        let mut r = 0.0f64;
        for i in 0..x.len() {
            let step = (x[i] - grad[i] / self.hessian[(i, i)]).clamp(lower[i], upper[i]);
            r = r.max((x[i] - step).abs());
        }
        r / (1.0 + x.amax())
    }

    pub fn solve(
        &self,
        gradient: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
        warm_start: Option<&DVector<f64>>,
    ) -> Result<QpSolution> {
        let n = self.dim();
        for (name, v) in [("gradient", gradient), ("lower", lower), ("upper", upper)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!("{name} has length {}, expected {n}", v.len())));
            }
        }
        if let Some(w) = warm_start {
            if w.len() != n {
                return Err(Error::DimensionMismatch(format!("warm start has length {}, expected {n}", w.len())));
            }
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::invalid("bounds", "lower must not exceed upper"));
        }
        let project = |v: &DVector<f64>| DVector::from_iterator(n, (0..n).map(|i| v[i].clamp(lower[i], upper[i])));

        let mut x = match warm_start {
            Some(w) => project(w),
            None => project(&DVector::zeros(n)),
        };
        let mut f = self.objective(gradient, &x);
        let mut objectives = vec![f];
        let mut cached: Option<(Vec<usize>, Cholesky<f64, Dyn>)> = None;

        for iter in 0..self.settings.max_iter {
            let grad = &self.hessian * &x + gradient;
            let residual = self.residual(&x, &grad, lower, upper);
            if residual <= self.settings.tol {
                return Ok(QpSolution {
                    x,
                    iterations: iter,
                    residual,
                    status: QpStatus::Converged,
                    objectives,
                });
            }

            let free: Vec<usize> = (0..n)
                .filter(|&i| !((x[i] <= lower[i] && grad[i] > 0.0) || (x[i] >= upper[i] && grad[i] < 0.0)))
                .collect();

            let mut dir = DVector::zeros(n);
            if !free.is_empty() {
                let g_free = DVector::from_iterator(free.len(), free.iter().map(|&i| grad[i]));
                let step = if free.len() == n {
                    self.full.solve(&g_free)
                } else {
                    let reuse = matches!(&cached, Some((idx, _)) if *idx == free);
                    if !reuse {
                        let sub = self.hessian.select_rows(free.iter()).select_columns(free.iter());
                        let chol = Cholesky::new(sub).ok_or(Error::NotPositiveDefinite)?;
                        cached = Some((free.clone(), chol));
                    }
                    cached.as_ref().map(|(_, c)| c.solve(&g_free)).expect("factorisation cached above")
                };
                for (k, &i) in free.iter().enumerate() {
                    dir[i] = -step[k];
                }
            }

            let (mut x_new, mut f_new) = match self.line_search(&x, f, &grad, &dir, &project, gradient) {
                Some(v) => v,
                None => {
                    // Newton path failed to decrease: fall back to a
                    // diagonally scaled projected gradient step.
                    let scaled = DVector::from_iterator(n, (0..n).map(|i| -grad[i] / self.hessian[(i, i)]));
                    match self.line_search(&x, f, &grad, &scaled, &project, gradient) {
                        Some(v) => v,
                        None => (x.clone(), f),
                    }
                }
            };
            if f_new > f {
                x_new = x.clone();
                f_new = f;
            }
            let stalled = x_new == x;
            x = x_new;
            f = f_new;
            objectives.push(f);
            if stalled {
                let grad = &self.hessian * &x + gradient;
                let residual = self.residual(&x, &grad, lower, upper);
                return Ok(QpSolution {
                    x,
                    iterations: iter + 1,
                    residual,
                    status: if residual <= self.settings.tol {
                        QpStatus::Converged
                    } else {
                        QpStatus::MaxIterations
                    },
                    objectives,
                });
            }
        }

        let grad = &self.hessian * &x + gradient;
        let residual = self.residual(&x, &grad, lower, upper);
        let status = if residual <= self.settings.tol {
            QpStatus::Converged
        } else {
            QpStatus::MaxIterations
        };
        Ok(QpSolution {
            x,
            iterations: self.settings.max_iter,
            residual,
            status,
            objectives,
        })
    }

    fn line_search(
        &self,
        x: &DVector<f64>,
        f: f64,
        grad: &DVector<f64>,
        dir: &DVector<f64>,
        project: &impl Fn(&DVector<f64>) -> DVector<f64>,
        gradient: &DVector<f64>,
    ) -> Option<(DVector<f64>, f64)> {
        let mut alpha = 1.0;
        while alpha >= MIN_STEP {
            let cand = project(&(x + dir * alpha));
            let f_cand = self.objective(gradient, &cand);
            let decrease = grad.dot(&(&cand - x));
            if f_cand <= f + ARMIJO * decrease && f_cand <= f {
                return Some((cand, f_cand));
            }
            alpha *= BACKTRACK;
        }
        None
    }
}

/// One-off solve of a box QP.
pub fn solve_qp(
    hessian: &DMatrix<f64>,
    gradient: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    settings: QpSettings,
) -> Result<QpSolution> {
    BoxQp::new(hessian.clone(), settings)?.solve(gradient, lower, upper, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tight() -> QpSettings {
        QpSettings {
            max_iter: 200,
            tol: 1e-13,
        }
    }

    #[test]
    fn identity_unconstrained() {
        let v = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let inf = DVector::from_element(3, f64::INFINITY);
        let sol = solve_qp(&DMatrix::identity(3, 3), &(-&v), &(-&inf), &inf, tight()).unwrap();
        assert_eq!(sol.status, QpStatus::Converged);
        assert!((sol.x - v).amax() < 1e-14);
    }

    #[test]
    fn identity_all_clamped() {
        let n = 4;
        let g = DVector::from_element(n, -2.0);
        let sol = solve_qp(
            &DMatrix::identity(n, n),
            &g,
            &DVector::from_element(n, -5.0),
            &DVector::from_element(n, 1.0),
            tight(),
        )
        .unwrap();
        assert_eq!(sol.x, DVector::from_element(n, 1.0));
    }

    #[test]
    fn dimension_mismatch() {
        let h = DMatrix::identity(3, 3);
        let g = DVector::zeros(2);
        let b = DVector::zeros(3);
        assert!(matches!(solve_qp(&h, &g, &b, &b, tight()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn indefinite_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(BoxQp::new(h, tight()), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn iteration_limit_reports_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let h = &m * m.transpose() + DMatrix::identity(n, n) * 1e-3;
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-10.0..10.0));
        let lo = DVector::from_element(n, -0.1);
        let hi = DVector::from_element(n, 0.1);
        let qp = BoxQp::new(
            h,
            QpSettings {
                max_iter: 1,
                tol: 1e-14,
            },
        )
        .unwrap();
        let sol = qp.solve(&g, &lo, &hi, None).unwrap();
        if sol.status == QpStatus::MaxIterations {
            assert!(sol.residual > 1e-14);
            assert_eq!(sol.iterations, 1);
        }
    }

    #[test]
    fn objective_non_increasing_and_warm_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = 12;
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h = &m * m.transpose() + DMatrix::identity(n, n) * 0.05;
            let g = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let lo = DVector::from_element(n, -0.5);
            let hi = DVector::from_element(n, 0.7);
            let qp = BoxQp::new(h, tight()).unwrap();
            let cold = qp.solve(&g, &lo, &hi, None).unwrap();
            assert_eq!(cold.status, QpStatus::Converged);
            for w in cold.objectives.windows(2) {
                assert!(w[1] <= w[0]);
            }
            let warm = qp.solve(&g, &lo, &hi, Some(&cold.x)).unwrap();
            assert_eq!(warm.iterations, 0);
            assert!((warm.x - &cold.x).amax() < 1e-12);
        }
    }
}
