//! CSV grids, trace tables and training histories.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Domain, Point2};
use crate::optim::EpochRecord;
use crate::pde::TraceTable;
use crate::refsolver::FieldGrid;

pub const GRID_HEADER: &str = "x,y,value";
pub const TRACE_HEADER: &str = "phi,value";
pub const HISTORY_HEADER: &str = "epoch,l2,topk,boundary,wd,tv,total,lr";

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Grid rows in storage order (x fastest), masked-out cells as `nan`.
pub fn grid_to_csv(grid: &FieldGrid) -> String {
    let mut s = String::with_capacity(grid.values().len() * 48);
    s.push_str(GRID_HEADER);
    s.push('\n');
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let c = grid.center(i, j);
            let _ = writeln!(s, "{},{},{}", number(c.x), number(c.y), number(grid.value(i, j)));
        }
    }
    s
}

pub fn write_grid(grid: &FieldGrid, path: &Path) -> Result<()> {
    write(path, &grid_to_csv(grid))
}

/// Samples `f` on an `n × n` cell-centred grid over the domain's bounding box
/// and writes it as CSV.
pub fn export_grid(
    f: impl FnMut(Point2) -> Result<f64>,
    domain: &Domain,
    resolution: usize,
    path: &Path,
) -> Result<FieldGrid> {
    let grid = FieldGrid::from_fn(domain, resolution, f)?;
    write_grid(&grid, path)?;
    Ok(grid)
}

/// Parses a grid CSV; the extent is recovered from the cell centres.
pub fn grid_from_csv(text: &str) -> Result<FieldGrid> {
    let bad = |line: usize, msg: &str| Error::Data(format!("grid csv line {line}: {msg}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(GRID_HEADER) {
        return Err(bad(1, "expected header `x,y,value`"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(bad(i + 2, "expected three columns"));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(i + 2, "bad number"));
        rows.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
    }
    let nx = rows
        .iter()
        .position(|r| r.1 != rows[0].1)
        .unwrap_or(rows.len());
    if nx < 2 || rows.len() % nx != 0 || rows.len() / nx < 2 {
        return Err(Error::Shape(format!("{} rows do not form a grid", rows.len())));
    }
    let ny = rows.len() / nx;
    let (x0, x1) = (rows[0].0, rows[nx - 1].0);
    let (y0, y1) = (rows[0].1, rows[rows.len() - 1].1);
    let dx = (x1 - x0) / (nx - 1) as f64;
    let dy = (y1 - y0) / (ny - 1) as f64;
    let bbox = BoundingBox {
        xmin: x0 - 0.5 * dx,
        xmax: x1 + 0.5 * dx,
        ymin: y0 - 0.5 * dy,
        ymax: y1 + 0.5 * dy,
    };
    let values: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let mask = values.iter().map(|v| !v.is_nan()).collect();
    FieldGrid::new(nx, ny, bbox, values, mask)
}

pub fn read_grid(path: &Path) -> Result<FieldGrid> {
    grid_from_csv(&read(path)?)
}

pub fn write_trace(table: &TraceTable, path: &Path) -> Result<()> {
    let mut s = format!("{TRACE_HEADER}\n");
    for (phi, v) in table.phis().iter().zip(table.values()) {
        let _ = writeln!(s, "{phi},{v}");
    }
    write(path, &s)
}

pub fn read_trace(path: &Path) -> Result<TraceTable> {
    let text = read(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TRACE_HEADER) {
        return Err(Error::Data(format!("{}: expected header `{TRACE_HEADER}`", path.display())));
    }
    let (mut phis, mut values) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Data(format!("trace csv line {}: expected two columns", i + 2)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("trace csv line {}: bad number", i + 2)))
        };
        phis.push(parse(a)?);
        values.push(parse(b)?);
    }
    TraceTable::new(phis, values)
}

pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let mut s = format!("{HISTORY_HEADER}\n");
    for rec in history {
        let r = &rec.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            rec.epoch, r.l2_residual, r.topk_residual, r.boundary, r.weight_decay, r.tv, r.total, rec.lr
        );
    }
    s
}

pub fn write_history(history: &[EpochRecord], path: &Path) -> Result<()> {
    write(path, &history_to_csv(history))
}
