//! Small dense Levenberg–Marquardt solver shared by the curve fits.
//!
//! Problems here have at most a handful of parameters, so the Jacobian is
//! built by central differences and the damped normal equations are solved
//! by Gaussian elimination with partial pivoting.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub cost_tolerance: f64,
    /// Stop when the relative step length falls below this.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_tolerance: 1e-15,
            step_tolerance: 1e-13,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// Euclidean norm of the residual vector at `params`.
    pub residual_norm: f64,
    pub iterations: usize,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F>(f: &F, p: &[f64], r0_len: usize) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut cols = Vec::with_capacity(p.len());
    let mut work = p.to_vec();
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(1e-3);
        work[j] = p[j] + h;
        let plus = f(&work)?;
        work[j] = p[j] - h;
        let minus = f(&work)?;
        work[j] = p[j];
        if plus.len() != r0_len || minus.len() != r0_len {
            return Err(Error::FitDiverged("residual length changed".into()));
        }
        cols.push(
            plus.iter()
                .zip(&minus)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect(),
        );
    }
    Ok(cols)
}

/// Solves `a x = b` in place for a small dense system.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Minimises `|f(p)|²` starting from `p0`.
///
/// `f` may return an error for parameter vectors outside its domain; such
/// trial steps are rejected and the damping is increased.
pub fn levenberg_marquardt<F>(f: F, p0: &[f64], opts: LmOptions) -> Result<LmSolution>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut p = p0.to_vec();
    let mut r = f(&p)?;
    if r.len() < p.len() {
        return Err(Error::InsufficientData {
            needed: p.len(),
            got: r.len(),
        });
    }
    let mut cost = sum_sq(&r);
    let mut damping = opts.initial_damping;
    let n = p.len();

    for iter in 1..=opts.max_iterations {
        let jac = jacobian(&f, &p, r.len())?;
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for i in 0..n {
            for k in i..n {
                let s: f64 = jac[i].iter().zip(&jac[k]).map(|(a, b)| a * b).sum();
                jtj[i][k] = s;
                jtj[k][i] = s;
            }
            jtr[i] = jac[i].iter().zip(&r).map(|(a, b)| a * b).sum();
        }

        let mut accepted = false;
        for _ in 0..40 {
            let mut lhs = jtj.clone();
            for (i, row) in lhs.iter_mut().enumerate() {
                row[i] += damping * jtj[i][i].max(1e-300);
            }
            let rhs: Vec<f64> = jtr.iter().map(|x| -x).collect();
            let Some(step) = solve_dense(lhs, rhs) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            let trial_r = match f(&trial) {
                Ok(tr) if tr.iter().all(|x| x.is_finite()) => tr,
                _ => {
                    damping *= 10.0;
                    continue;
                }
            };
            let trial_cost = sum_sq(&trial_r);
            if trial_cost <= cost {
                let step_norm = step.iter().map(|x| x * x).sum::<f64>().sqrt();
                let p_norm = p.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                let rel_decrease = (cost - trial_cost) / cost.max(1e-300);
                p = trial;
                r = trial_r;
                cost = trial_cost;
                damping = (damping * 0.3).max(1e-12);
                accepted = true;
                if rel_decrease < opts.cost_tolerance || step_norm / p_norm < opts.step_tolerance {
                    return Ok(LmSolution {
                        params: p,
                        residual_norm: cost.sqrt(),
                        iterations: iter,
                    });
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: we are at a (numerical) minimum.
            return Ok(LmSolution {
                params: p,
                residual_norm: cost.sqrt(),
                iterations: iter,
            });
        }
    }
    Err(Error::FitDiverged(format!(
        "no convergence within {} iterations",
        opts.max_iterations
    )))
}
