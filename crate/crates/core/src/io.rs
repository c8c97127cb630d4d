//! CSV readers and writers for densities, trajectories, scans, traces and
//! tabulated payoffs. Floats are written in shortest round-trip form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analytic::BifurcationDiagram;
use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::games::PayoffKernel;
use crate::grid::{Density, Grid, Quadrature};
use crate::simulate::TraceRow;

#[derive(Serialize, Deserialize)]
struct DensityRow {
    x: f64,
    p: f64,
}

/// `x,p`, one row per node.
pub fn write_density<W: Write>(w: W, d: &Density) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (i, p) in d.values().iter().enumerate() {
        out.serialize(DensityRow { x: d.grid().node(i), p: *p })?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an `x,p` table; nodes must be the equally spaced grid on `[0, 1]`.
pub fn read_density<R: Read>(r: R, rule: Quadrature) -> Result<Density> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: DensityRow = row?;
        rows.push(row);
    }
    let grid = Grid::with_rule(rows.len(), rule)?;
    for (i, row) in rows.iter().enumerate() {
        if (row.x - grid.node(i)).abs() > 1e-9 {
            return Err(Error::Parse(format!(
                "row {} has x = {}, expected grid node {}",
                i + 1,
                row.x,
                grid.node(i)
            )));
        }
    }
    Density::new(grid, rows.into_iter().map(|r| r.p).collect())
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    x: f64,
    p: f64,
}

/// `t,x,p` for one agent's snapshots (`agent` 0 or 1).
pub fn write_trajectory<W: Write>(w: W, rec: &TrajectoryRecord, agent: usize) -> Result<()> {
    let snapshots = match agent {
        0 => &rec.p1,
        1 => &rec.p2,
        _ => return Err(Error::param("agent", format!("must be 0 or 1, got {agent}"))),
    };
    let mut out = csv::Writer::from_writer(w);
    for (t, d) in rec.times.iter().zip(snapshots) {
        for (i, p) in d.values().iter().enumerate() {
            out.serialize(TrajectoryRow { t: *t, x: d.grid().node(i), p: *p })?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow {
    t: f64,
    free_energy_1: f64,
    free_energy_2: f64,
    residual: f64,
}

/// `t,free_energy_1,free_energy_2,residual`, one row per sample.
pub fn write_trajectory_summary<W: Write>(w: W, rec: &TrajectoryRecord) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for ((t, f), r) in rec.times.iter().zip(&rec.free_energy).zip(&rec.residual) {
        out.serialize(SummaryRow {
            t: *t,
            free_energy_1: f[0],
            free_energy_2: f[1],
            residual: *r,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BifurcationRow<'a> {
    beta: f64,
    branch: &'a str,
    value1: f64,
    value2: f64,
    residual: f64,
}

/// `beta,branch,value1,value2,residual`.
pub fn write_bifurcation<W: Write>(w: W, d: &BifurcationDiagram) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &d.points {
        out.serialize(BifurcationRow {
            beta: p.beta,
            branch: p.branch.name(),
            value1: p.value1,
            value2: p.value2,
            residual: p.residual,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// `update,ks1,ks2`.
pub fn write_trace<W: Write>(w: W, trace: &[TraceRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in trace {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PayoffRow {
    i: usize,
    j: usize,
    f1: f64,
    f2: f64,
}

/// `i,j,f1,f2` with node indices, row-major.
pub fn write_payoff<W: Write>(w: W, k: &PayoffKernel) -> Result<()> {
    let m = k.grid().len();
    let mut out = csv::Writer::from_writer(w);
    for i in 0..m {
        for j in 0..m {
            out.serialize(PayoffRow { i, j, f1: k.k1(i, j), f2: k.k2(i, j) })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads an `i,j,f1,f2` table covering every node pair of `grid` exactly once.
pub fn read_payoff<R: Read>(r: R, grid: Grid) -> Result<PayoffKernel> {
    let (k1, k2) = read_payoff_tables(r, grid.len())?;
    PayoffKernel::from_tables(grid, k1, k2)
}

/// Row-major `(k1, k2)` tables of size `m × m` from an `i,j,f1,f2` table.
pub fn read_payoff_tables<R: Read>(r: R, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut k1 = vec![f64::NAN; m * m];
    let mut k2 = vec![f64::NAN; m * m];
    let mut seen = vec![false; m * m];
    for (line, row) in csv::Reader::from_reader(r).deserialize().enumerate() {
        let row: PayoffRow = row?;
        if row.i >= m || row.j >= m {
            return Err(Error::Parse(format!(
                "row {}: index ({}, {}) outside a {m}-node grid",
                line + 1,
                row.i,
                row.j
            )));
        }
        let at = row.i * m + row.j;
        if seen[at] {
            return Err(Error::Parse(format!("row {}: duplicate entry ({}, {})", line + 1, row.i, row.j)));
        }
        seen[at] = true;
        k1[at] = row.f1;
        k2[at] = row.f2;
    }
    if let Some(at) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!("missing entry ({}, {})", at / m, at % m)));
    }
    Ok((k1, k2))
}
