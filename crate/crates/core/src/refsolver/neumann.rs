use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::pde::{ScalarField, TraceTable};

use super::dirichlet::{harmonic_mean, positive_sigma, MIN_RESOLUTION};
use super::sparse::{pcg, Csr, SolverOptions};

/// Boundary potential produced by injecting the current `ψₙ` into a body of
/// conductivity `σ`, normalised to zero mean.
///
/// Solved by finite volumes on a polar grid of `resolution/2` rings and
/// `2·resolution` sectors, so the boundary is resolved exactly. Returns one
/// table row per sector, at the sector's mid-angle.
pub fn dirichlet_trace_from_neumann(
    sigma: &dyn ScalarField,
    n_mode: i32,
    resolution: usize,
) -> Result<TraceTable> {
    dirichlet_trace_from_neumann_with(sigma, n_mode, resolution, &SolverOptions::default())
}

pub fn dirichlet_trace_from_neumann_with(
    sigma: &dyn ScalarField,
    n_mode: i32,
    resolution: usize,
    opts: &SolverOptions,
) -> Result<TraceTable> {
    if !(1..=3).contains(&n_mode) {
        return Err(Error::config_key("current", format!("mode {n_mode} is not one of 1, 2, 3")));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::config_key(
            "resolution",
            format!("reference grids need at least {MIN_RESOLUTION} cells per side, got {resolution}"),
        ));
    }
    let nr = resolution / 2;
    let np = 2 * resolution;
    let dr = 1.0 / nr as f64;
    let dphi = TAU / np as f64;
    let idx = |i: usize, j: usize| i * np + j;
    let radius = |i: usize| (i as f64 + 0.5) * dr;
    let angle = |j: usize| j as f64 * dphi;
    let polar = |r: f64, phi: f64| Point2::new(r * phi.cos(), r * phi.sin());

    let mut sig = vec![0.0; nr * np];
    for i in 0..nr {
        for j in 0..np {
            sig[idx(i, j)] = positive_sigma(sigma, polar(radius(i), angle(j)))?;
        }
    }

    // Exact current through each sector of the circle.
    let n = n_mode as f64;
    let inflow: Vec<f64> = (0..np)
        .map(|j| {
            let (lo, hi) = (angle(j) - 0.5 * dphi, angle(j) + 0.5 * dphi);
            ((n * hi).sin() - (n * lo).sin()) / (n * (2.0 * PI).sqrt())
        })
        .collect();

    let mut a = Csr::new();
    let mut rhs = vec![0.0; nr * np];
    for i in 0..nr {
        for j in 0..np {
            let k = idx(i, j);
            let mut links: Vec<(usize, f64)> = Vec::with_capacity(4);
            if i + 1 < nr {
                let q = idx(i + 1, j);
                links.push((q, harmonic_mean(sig[k], sig[q]) * (radius(i) + 0.5 * dr) * dphi / dr));
            }
            if i > 0 {
                let q = idx(i - 1, j);
                links.push((q, harmonic_mean(sig[k], sig[q]) * (radius(i) - 0.5 * dr) * dphi / dr));
            }
            for q in [idx(i, (j + 1) % np), idx(i, (j + np - 1) % np)] {
                links.push((q, harmonic_mean(sig[k], sig[q]) * dr / (radius(i) * dphi)));
            }
            a.push(k, links.iter().map(|l| l.1).sum());
            for (q, t) in links {
                a.push(q, -t);
            }
            a.finish_row();
            if i + 1 == nr {
                rhs[k] = inflow[j];
            }
        }
    }
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    rhs.iter_mut().for_each(|v| *v -= mean);
    let u = pcg(&a, &rhs, opts)?;

    let outer = nr - 1;
    let mut trace = Vec::with_capacity(np);
    for j in 0..np {
        let boundary_sigma = positive_sigma(sigma, polar(1.0, angle(j)))?;
        let flux = inflow[j] / dphi;
        trace.push(u[idx(outer, j)] + 0.5 * dr * flux / boundary_sigma);
    }
    let mean = trace.iter().sum::<f64>() / np as f64;
    trace.iter_mut().for_each(|v| *v -= mean);
    TraceTable::new((0..np).map(angle).collect(), trace)
}
