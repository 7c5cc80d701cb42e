//! Compressed sparse rows and Jacobi-preconditioned Krylov solvers.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once `‖b − Ax‖ / ‖b‖` falls below this.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Csr {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    pub fn new() -> Self {
        Self {
            row_start: vec![0],
            ..Self::default()
        }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        self.cols.push(col);
        self.vals.push(val);
    }

    pub fn finish_row(&mut self) {
        self.row_start.push(self.cols.len());
    }

    pub fn rows(&self) -> usize {
        self.row_start.len() - 1
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|r| {
                (self.row_start[r]..self.row_start[r + 1])
                    .filter(|&k| self.cols[k] == r)
                    .map(|k| self.vals[k])
                    .sum()
            })
            .collect()
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; b.len()];
        self.mul(x, &mut ax);
        ax.iter().zip(b).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inverse_diagonal(a: &Csr) -> Result<Vec<f64>> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(r, d)| {
            if d.is_finite() && d != 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NonFinite(format!("matrix diagonal at row {r}")))
            }
        })
        .collect()
}

/// BiCGSTAB with a Jacobi preconditioner, restarted from the current iterate
/// on breakdown or when the recursive residual drifts from the true one.
pub(crate) fn bicgstab(a: &Csr, b: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let target = opts.rel_tol * b_norm;
    let dinv = inverse_diagonal(a)?;
    let mut iterations = 0;
    let mut r = b.to_vec();
    while iterations < opts.max_iter {
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut p = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        while iterations < opts.max_iter {
            iterations += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || omega == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
                y[k] = dinv[k] * p[k];
            }
            a.mul(&y, &mut v);
            let denom = dot(&r_hat, &v);
            if denom == 0.0 {
                break;
            }
            alpha = rho / denom;
            for k in 0..n {
                s[k] = r[k] - alpha * v[k];
            }
            if norm(&s) < target {
                for k in 0..n {
                    x[k] += alpha * y[k];
                }
                break;
            }
            for k in 0..n {
                z[k] = dinv[k] * s[k];
            }
            a.mul(&z, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for k in 0..n {
                x[k] += alpha * y[k] + omega * z[k];
                r[k] = s[k] - omega * t[k];
            }
            if norm(&r) < target {
                break;
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::SolverDiverged {
                iterations,
                residual: f64::NAN,
            });
        }
        let mut ax = vec![0.0; n];
        a.mul(&x, &mut ax);
        for k in 0..n {
            r[k] = b[k] - ax[k];
        }
        if norm(&r) < target {
            log::debug!("bicgstab converged in {iterations} iterations");
            return Ok(x);
        }
    }
    Err(Error::SolverDiverged {
        iterations,
        residual: norm(&r) / b_norm,
    })
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// semi-definite system with a consistent right-hand side.
pub(crate) fn pcg(a: &Csr, b: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let target = opts.rel_tol * b_norm;
    let dinv = inverse_diagonal(a)?;
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=opts.max_iter {
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: norm(&r) / b_norm,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if norm(&r) < target && a.residual_norm(&x, b) < target {
            log::debug!("pcg converged in {it} iterations");
            return Ok(x);
        }
        for k in 0..n {
            z[k] = dinv[k] * r[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverDiverged {
        iterations: opts.max_iter,
        residual: a.residual_norm(&x, b) / b_norm,
    })
}
