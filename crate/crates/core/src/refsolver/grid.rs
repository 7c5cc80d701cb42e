use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Domain, Point2};

/// Cell-centred samples of a scalar field over a bounding box.
///
/// Cell `(i, j)` has centre `(xmin + (i + ½)·dx, ymin + (j + ½)·dy)`; storage
/// is row-major with `j` (y) as the slow index. Cells outside the mask hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    nx: usize,
    ny: usize,
    bbox: BoundingBox,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl FieldGrid {
    pub fn new(
        nx: usize,
        ny: usize,
        bbox: BoundingBox,
        mut values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || values.len() != nx * ny || mask.len() != nx * ny {
            return Err(Error::Shape(format!(
                "grid {nx}x{ny} with {} values and {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        for (k, (v, &m)) in values.iter_mut().zip(&mask).enumerate() {
            if !m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "grid value at cell ({}, {})",
                    k % nx,
                    k / nx
                )));
            }
        }
        Ok(Self {
            nx,
            ny,
            bbox,
            values,
            mask,
        })
    }

    /// Samples `f` at the centres of an `n × n` grid over the domain's
    /// bounding box; cells whose centre lies outside the domain are masked out.
    pub fn from_fn(
        domain: &Domain,
        n: usize,
        mut f: impl FnMut(Point2) -> Result<f64>,
    ) -> Result<Self> {
        let layout = Self::layout(domain, n)?;
        let mut values = vec![f64::NAN; n * n];
        for k in 0..n * n {
            if layout.mask[k] {
                values[k] = f(layout.center(k % n, k / n))?;
            }
        }
        Self::new(n, n, layout.bbox, values, layout.mask)
    }

    /// An all-NaN grid carrying only the domain mask.
    pub fn layout(domain: &Domain, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config_key("resolution", "must be at least 2"));
        }
        let bbox = domain.bbox();
        let mut grid = Self {
            nx: n,
            ny: n,
            bbox,
            values: vec![f64::NAN; n * n],
            mask: vec![false; n * n],
        };
        for j in 0..n {
            for i in 0..n {
                grid.mask[j * n + i] = domain.contains(grid.center(i, j));
            }
        }
        Ok(grid)
    }

    /// Same geometry and mask, new values from `f` on masked cells.
    pub fn map_cells(&self, mut f: impl FnMut(Point2) -> Result<f64>) -> Result<Self> {
        let mut values = vec![f64::NAN; self.values.len()];
        for (k, v) in values.iter_mut().enumerate() {
            if self.mask[k] {
                *v = f(self.center(k % self.nx, k / self.nx))?;
            }
        }
        Self::new(self.nx, self.ny, self.bbox, values, self.mask.clone())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn dx(&self) -> f64 {
        (self.bbox.xmax - self.bbox.xmin) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.bbox.ymax - self.bbox.ymin) / self.ny as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.bbox.xmin + (i as f64 + 0.5) * self.dx(),
            self.bbox.ymin + (j as f64 + 0.5) * self.dy(),
        )
    }

    pub fn inside(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny && self.mask[self.index(i, j)]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    /// `(centre, value)` of every masked cell in storage order.
    pub fn masked(&self) -> impl Iterator<Item = (Point2, f64)> + '_ {
        (0..self.values.len())
            .filter(|&k| self.mask[k])
            .map(|k| (self.center(k % self.nx, k / self.nx), self.values[k]))
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Equal sizes and masks, and extents equal up to rounding (grids read
    /// back from CSV recover their extent from cell centres).
    pub fn same_layout(&self, other: &FieldGrid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.same_extent(other) && self.mask == other.mask
    }

    fn same_extent(&self, other: &FieldGrid) -> bool {
        let (a, b) = (self.bbox, other.bbox);
        let tol = 1e-9 * (a.xmax - a.xmin).abs().max(a.ymax - a.ymin);
        [
            (a.xmin, b.xmin),
            (a.xmax, b.xmax),
            (a.ymin, b.ymin),
            (a.ymax, b.ymax),
        ]
        .iter()
        .all(|(u, v)| (u - v).abs() <= tol)
    }

    /// Central x-difference; one-sided where a neighbour is masked out. Cells
    /// with neither neighbour drop out of the mask.
    pub fn derivative_x(&self) -> Self {
        let h = self.dx();
        let mut values = vec![f64::NAN; self.values.len()];
        let mut mask = vec![false; self.values.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !self.inside(i, j) {
                    continue;
                }
                let k = self.index(i, j);
                let west = i > 0 && self.inside(i - 1, j);
                let east = self.inside(i + 1, j);
                let d = match (west, east) {
                    (true, true) => (self.value(i + 1, j) - self.value(i - 1, j)) / (2.0 * h),
                    (false, true) => (self.value(i + 1, j) - self.values[k]) / h,
                    (true, false) => (self.values[k] - self.value(i - 1, j)) / h,
                    (false, false) => continue,
                };
                values[k] = d;
                mask[k] = true;
            }
        }
        Self {
            nx: self.nx,
            ny: self.ny,
            bbox: self.bbox,
            values,
            mask,
        }
    }

    /// Restricts the mask to cells also inside `other`'s mask.
    pub fn restrict_to(&self, other: &FieldGrid) -> Result<Self> {
        if self.nx != other.nx || self.ny != other.ny || !self.same_extent(other) {
            return Err(Error::Shape("grids differ in size or extent".into()));
        }
        let mask: Vec<bool> = self.mask.iter().zip(&other.mask).map(|(&a, &b)| a && b).collect();
        Self::new(self.nx, self.ny, self.bbox, self.values.clone(), mask)
    }
}

/// Bilinear value and gradient at `x`. The gradient interpolates central
/// differences taken at the four surrounding cells, so every cell of the
/// 4 × 4 neighbourhood except the corners must be masked in.
pub fn interpolate(grid: &FieldGrid, x: Point2) -> Result<(f64, [f64; 2])> {
    let out = || Error::OutOfSupport { x: x.x, y: x.y };
    if !x.is_finite() {
        return Err(out());
    }
    let (dx, dy) = (grid.dx(), grid.dy());
    let gx = (x.x - grid.bbox.xmin) / dx - 0.5;
    let gy = (x.y - grid.bbox.ymin) / dy - 0.5;
    if gx < 0.0 || gy < 0.0 {
        return Err(out());
    }
    let (i0, j0) = (gx.floor() as usize, gy.floor() as usize);
    let (tx, ty) = (gx - i0 as f64, gy - j0 as f64);
    let corners = [(i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1)];
    let weights = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for (&(i, j), &w) in corners.iter().zip(&weights) {
        let needed = [(i, j), (i + 1, j), (i, j + 1)];
        if i == 0 || j == 0 || needed.iter().any(|&(a, b)| !grid.inside(a, b))
            || !grid.inside(i - 1, j)
            || !grid.inside(i, j - 1)
        {
            return Err(out());
        }
        value += w * grid.value(i, j);
        grad[0] += w * (grid.value(i + 1, j) - grid.value(i - 1, j)) / (2.0 * dx);
        grad[1] += w * (grid.value(i, j + 1) - grid.value(i, j - 1)) / (2.0 * dy);
    }
    Ok((value, grad))
}
