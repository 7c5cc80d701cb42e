use crate::error::{Error, Result};
use crate::geometry::{Domain, Point2};
use crate::pde::{BoundaryData, ScalarField};

use super::grid::FieldGrid;
use super::sparse::{bicgstab, Csr, SolverOptions};

pub(crate) const MIN_RESOLUTION: usize = 16;

pub(crate) fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

pub(crate) fn positive_sigma(sigma: &dyn ScalarField, p: Point2) -> Result<f64> {
    let s = sigma.value(p)?;
    if s > 0.0 && s.is_finite() {
        Ok(s)
    } else {
        Err(Error::Data(format!(
            "conductivity {s} is not positive at ({}, {})",
            p.x, p.y
        )))
    }
}

/// Distance from `p` (inside the unit disc) along unit direction `e` to the circle.
fn distance_to_circle(p: Point2, e: (f64, f64)) -> f64 {
    let pe = p.x * e.0 + p.y * e.1;
    let c = p.x * p.x + p.y * p.y - 1.0;
    -pe + (pe * pe - c).sqrt()
}

/// One arm of a cell's stencil.
pub(crate) enum Arm {
    Cell { index: usize, sigma: f64 },
    Boundary { length: f64, sigma: f64, value: f64 },
}

/// The discrete system for `∇·(σ∇u) = 0` on the unit disc with Dirichlet
/// data `g`, rows scaled by `h²`.
pub(crate) struct DirichletSystem {
    pub grid: FieldGrid,
    pub cells: Vec<(usize, usize)>,
    pub sigma: Vec<f64>,
    /// East, west, north, south arms per unknown.
    pub arms: Vec<[Arm; 4]>,
}

const DIRS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl DirichletSystem {
    pub fn build(sigma: &dyn ScalarField, g: &BoundaryData, n: usize) -> Result<Self> {
        if n < MIN_RESOLUTION {
            return Err(Error::config_key(
                "resolution",
                format!("reference grids need at least {MIN_RESOLUTION} cells per side, got {n}"),
            ));
        }
        let grid = FieldGrid::layout(&Domain::UnitDisc, n)?;
        let mut unknown = vec![usize::MAX; n * n];
        let mut cells = Vec::new();
        let mut sig = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if grid.inside(i, j) {
                    unknown[grid.index(i, j)] = cells.len();
                    cells.push((i, j));
                    sig.push(positive_sigma(sigma, grid.center(i, j))?);
                }
            }
        }
        let h = grid.dx();
        let mut arms = Vec::with_capacity(cells.len());
        for &(i, j) in &cells {
            let p = grid.center(i, j);
            let mut row: Vec<Arm> = Vec::with_capacity(4);
            for &(di, dj) in &DIRS {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                let neighbour = (ni >= 0 && nj >= 0)
                    .then(|| (ni as usize, nj as usize))
                    .filter(|&(a, b)| grid.inside(a, b));
                row.push(match neighbour {
                    Some((a, b)) => {
                        let index = unknown[grid.index(a, b)];
                        Arm::Cell {
                            index,
                            sigma: sig[index],
                        }
                    }
                    None => {
                        let length = distance_to_circle(p, (di as f64, dj as f64))
                            .clamp(1e-12 * h, h);
                        let b = Point2::new(p.x + di as f64 * length, p.y + dj as f64 * length);
                        Arm::Boundary {
                            length,
                            sigma: positive_sigma(sigma, b)?,
                            value: g.value(b, b.angle())?,
                        }
                    }
                });
            }
            let row: [Arm; 4] = row.try_into().ok().expect("four arms");
            arms.push(row);
        }
        Ok(Self {
            grid,
            cells,
            sigma: sig,
            arms,
        })
    }

    /// Shortley–Weller coefficients of unknown `k`: `(arm coefficients, diagonal)`.
    pub fn coefficients(&self, k: usize) -> ([f64; 4], f64) {
        let h = self.grid.dx();
        let len = |a: &Arm| match a {
            Arm::Cell { .. } => h,
            Arm::Boundary { length, .. } => *length,
        };
        let sig = |a: &Arm| match a {
            Arm::Cell { sigma, .. } | Arm::Boundary { sigma, .. } => *sigma,
        };
        let arms = &self.arms[k];
        let mut c = [0.0; 4];
        for axis in 0..2 {
            let (a, b) = (&arms[2 * axis], &arms[2 * axis + 1]);
            let (la, lb) = (len(a), len(b));
            c[2 * axis] = h * h * 2.0 * harmonic_mean(self.sigma[k], sig(a)) / (la * (la + lb));
            c[2 * axis + 1] = h * h * 2.0 * harmonic_mean(self.sigma[k], sig(b)) / (lb * (la + lb));
        }
        (c, c.iter().sum())
    }

    pub fn assemble(&self) -> (Csr, Vec<f64>) {
        let mut a = Csr::new();
        let mut rhs = vec![0.0; self.cells.len()];
        for k in 0..self.cells.len() {
            let (c, diag) = self.coefficients(k);
            a.push(k, diag);
            for (arm, &ck) in self.arms[k].iter().zip(&c) {
                match arm {
                    Arm::Cell { index, .. } => a.push(*index, -ck),
                    Arm::Boundary { value, .. } => rhs[k] += ck * value,
                }
            }
            a.finish_row();
        }
        (a, rhs)
    }
}

/// Solves `∇·(σ∇u) = 0` in the unit disc with `u = g` on the circle on an
/// `n × n` cell-centred grid over [−1, 1]².
pub fn solve_dirichlet_fd(sigma: &dyn ScalarField, g: &BoundaryData, n: usize) -> Result<FieldGrid> {
    solve_dirichlet_fd_with(sigma, g, n, &SolverOptions::default())
}

pub fn solve_dirichlet_fd_with(
    sigma: &dyn ScalarField,
    g: &BoundaryData,
    n: usize,
    opts: &SolverOptions,
) -> Result<FieldGrid> {
    let system = DirichletSystem::build(sigma, g, n)?;
    let (a, rhs) = system.assemble();
    let u = bicgstab(&a, &rhs, opts)?;
    let grid = &system.grid;
    let mut values = vec![f64::NAN; n * n];
    for (&(i, j), &v) in system.cells.iter().zip(&u) {
        values[grid.index(i, j)] = v;
    }
    FieldGrid::new(n, n, grid.bbox(), values, grid.mask().to_vec())
}
