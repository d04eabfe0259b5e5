//! Primal-dual interior-point method for smooth convex objectives under
//! linear equality and inequality constraints:
//!
//! ```text
//! minimize f(z)  subject to  A z = b,  G z <= h
//! ```
//!
//! Infeasible start for the equalities; the initial point must satisfy the
//! inequalities strictly. Newton steps solve the reduced KKT system with a
//! dense LU factorization.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait ConvexObjective {
    fn value(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    /// Relative tolerance on primal residual, dual residual and duality gap.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tolerance: 1e-9,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmSolution {
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub nu: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

struct Residuals {
    dual: DVector<f64>,
    cent: DVector<f64>,
    pri: DVector<f64>,
}

impl Residuals {
    fn norm(&self) -> f64 {
        (self.dual.norm_squared() + self.cent.norm_squared() + self.pri.norm_squared()).sqrt()
    }
}

pub struct Problem<'a, F> {
    pub objective: &'a F,
    pub a: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
    pub g: &'a DMatrix<f64>,
    pub h: &'a DVector<f64>,
}

impl<F: ConvexObjective> Problem<'_, F> {
    fn residuals(&self, z: &DVector<f64>, lambda: &DVector<f64>, nu: &DVector<f64>, t: f64) -> Residuals {
        let s = self.h - self.g * z;
        Residuals {
            dual: self.objective.gradient(z) + self.g.transpose() * lambda + self.a.transpose() * nu,
            cent: lambda.component_mul(&s).add_scalar(-1.0 / t),
            pri: self.a * z - self.b,
        }
    }

    fn strictly_inside(&self, z: &DVector<f64>) -> bool {
        (self.h - self.g * z).iter().all(|&s| s > 0.0)
    }

    pub fn solve(&self, z0: DVector<f64>, options: IpmOptions) -> Result<IpmSolution> {
        let n = z0.len();
        let m = self.g.nrows();
        let p = self.a.nrows();
        if !self.strictly_inside(&z0) {
            return Err(Error::Infeasible("initial point violates an inequality".into()));
        }
        let mut z = z0;
        let s0 = self.h - self.g * &z;
        let mut lambda = s0.map(|s| 1.0 / s);
        let mut nu = DVector::zeros(p);
        let tol = options.tolerance;
        let b_scale = 1.0 + self.b.amax();
        let mu = 10.0;

        let mut last = None;
        for iter in 0..options.max_iterations {
            let s = self.h - self.g * &z;
            let gap = s.dot(&lambda);
            let t = if m > 0 { mu * m as f64 / gap } else { 1.0 };
            let grad = self.objective.gradient(&z);
            let r = self.residuals(&z, &lambda, &nu, t);
            let pri = r.pri.amax();
            let dual = r.dual.amax();
            let f_scale = 1.0 + grad.amax();
            let value_scale = 1.0 + self.objective.value(&z).abs();
            last = Some((pri, dual, gap));
            if pri <= tol * b_scale && dual <= tol * f_scale && gap <= tol * value_scale {
                return Ok(IpmSolution {
                    z,
                    lambda,
                    nu,
                    iterations: iter,
                    primal_residual: pri,
                    dual_residual: dual,
                    gap,
                });
            }

            let d = lambda.component_div(&s);
            let mut gd = self.g.clone();
            for (i, mut row) in gd.row_iter_mut().enumerate() {
                row *= d[i];
            }
            let top_left = self.objective.hessian(&z) + self.g.transpose() * gd;
            let mut kkt = DMatrix::zeros(n + p, n + p);
            kkt.view_mut((0, 0), (n, n)).copy_from(&top_left);
            kkt.view_mut((0, n), (n, p)).copy_from(&self.a.transpose());
            kkt.view_mut((n, 0), (p, n)).copy_from(self.a);
            let inv_ts = s.map(|si| 1.0 / (t * si));
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n)
                .copy_from(&(-(&grad + self.a.transpose() * &nu) - self.g.transpose() * &inv_ts));
            rhs.rows_mut(n, p).copy_from(&(-&r.pri));
            let step = kkt.lu().solve(&rhs).ok_or(Error::Singular)?;
            let dz = step.rows(0, n).into_owned();
            let dnu = step.rows(n, p).into_owned();
            let gdz = self.g * &dz;
            let dlambda = DVector::from_iterator(m, (0..m).map(|i| -lambda[i] + inv_ts[i] + d[i] * gdz[i]));

            let mut alpha: f64 = 1.0;
            for i in 0..m {
                if dlambda[i] < 0.0 {
                    alpha = alpha.min(-lambda[i] / dlambda[i]);
                }
            }
            for i in 0..m {
                // slack moves by -(G dz)_i
                if gdz[i] > 0.0 {
                    alpha = alpha.min(s[i] / gdz[i]);
                }
            }
            alpha = (0.99 * alpha).min(1.0);
            let mut halvings = 0;
            while !self.strictly_inside(&(&z + &dz * alpha)) && halvings < 100 {
                alpha *= 0.5;
                halvings += 1;
            }
            // The reduced direction descends the barrier merit on the
            // equality manifold; off it, insist on a smaller residual.
            if pri <= tol * b_scale {
                let merit = |z: &DVector<f64>| {
                    let s = self.h - self.g * z;
                    self.objective.value(z) - s.iter().map(|x| x.ln()).sum::<f64>() / t
                };
                let base = merit(&z);
                let slope = (&grad - self.g.transpose() * &inv_ts).dot(&dz);
                while halvings < 100 && merit(&(&z + &dz * alpha)) > base + 1e-4 * alpha * slope {
                    alpha *= 0.5;
                    halvings += 1;
                }
            } else {
                let base = r.norm();
                while halvings < 100 {
                    let rn = self
                        .residuals(
                            &(&z + &dz * alpha),
                            &(&lambda + &dlambda * alpha),
                            &(&nu + &dnu * alpha),
                            t,
                        )
                        .norm();
                    if rn <= (1.0 - 0.01 * alpha) * base {
                        break;
                    }
                    alpha *= 0.5;
                    halvings += 1;
                }
            }
            if halvings >= 100 {
                break;
            }
            z += &dz * alpha;
            lambda += &dlambda * alpha;
            nu += &dnu * alpha;
        }
        // Accept a stalled iterate that is still accurate to 1e-6.
        if let Some((pri, dual, gap)) = last {
            let grad = self.objective.gradient(&z);
            let loose = 1e-6;
            if pri <= loose * b_scale
                && dual <= loose * (1.0 + grad.amax())
                && gap <= loose * (1.0 + self.objective.value(&z).abs())
            {
                return Ok(IpmSolution {
                    z,
                    lambda,
                    nu,
                    iterations: options.max_iterations,
                    primal_residual: pri,
                    dual_residual: dual,
                    gap,
                });
            }
        }
        Err(Error::IterationLimit(options.max_iterations))
    }
}

/// Inequality rows as `(coefficients, bound)` pairs, densified.
pub fn dense_rows(n: usize, rows: &[(Vec<(usize, f64)>, f64)]) -> (DMatrix<f64>, DVector<f64>) {
    let mut m = DMatrix::zeros(rows.len(), n);
    let mut v = DVector::zeros(rows.len());
    for (i, (coefs, bound)) in rows.iter().enumerate() {
        for &(j, c) in coefs {
            m[(i, j)] += c;
        }
        v[i] = *bound;
    }
    (m, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// -sum ln(z_i + 1)
    struct Logs;

    impl ConvexObjective for Logs {
        fn value(&self, z: &DVector<f64>) -> f64 {
            -z.iter().map(|x| (x + 1.0).ln()).sum::<f64>()
        }
        fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
            z.map(|x| -1.0 / (x + 1.0))
        }
        fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_diagonal(&z.map(|x| 1.0 / ((x + 1.0) * (x + 1.0))))
        }
    }

    #[test]
    fn water_filling_on_a_budget() {
        // maximize ln(1+x) + ln(1+y) with x + y = 2, x, y >= 0 -> (1, 1)
        let (a, b) = dense_rows(2, &[(vec![(0, 1.0), (1, 1.0)], 2.0)]);
        let (g, h) = dense_rows(2, &[(vec![(0, -1.0)], 0.0), (vec![(1, -1.0)], 0.0)]);
        let problem = Problem {
            objective: &Logs,
            a: &a,
            b: &b,
            g: &g,
            h: &h,
        };
        let sol = problem
            .solve(DVector::from_vec(vec![0.1, 0.3]), IpmOptions::default())
            .unwrap();
        assert!(
            (sol.z[0] - 1.0).abs() < 1e-7 && (sol.z[1] - 1.0).abs() < 1e-7,
            "{:?}",
            sol.z
        );
    }

    #[test]
    fn active_upper_bound() {
        // x <= 0.5 binds, y takes the rest
        let (a, b) = dense_rows(2, &[(vec![(0, 1.0), (1, 1.0)], 2.0)]);
        let (g, h) = dense_rows(
            2,
            &[(vec![(0, -1.0)], 0.0), (vec![(1, -1.0)], 0.0), (vec![(0, 1.0)], 0.5)],
        );
        let problem = Problem {
            objective: &Logs,
            a: &a,
            b: &b,
            g: &g,
            h: &h,
        };
        let sol = problem
            .solve(DVector::from_vec(vec![0.1, 0.1]), IpmOptions::default())
            .unwrap();
        assert!((sol.z[0] - 0.5).abs() < 1e-7 && (sol.z[1] - 1.5).abs() < 1e-7);
    }
}
