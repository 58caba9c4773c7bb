//! CSV artifacts. Every file has a header row and a fixed column order; floats are written
//! in their shortest round-trip form.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use nemfilm_core::domain::Domain2D;
use nemfilm_core::potential::Potential;
use nemfilm_core::solver::{Defect, Field2D, Grid2D, PhiTable, TraceRow};

pub const FIELD_HEADER: [&str; 12] = ["i", "j", "x", "y", "q1", "q2", "q3", "q4", "q5", "w", "phi1", "phi2"];
pub const TRACE_HEADER: [&str; 3] = ["iteration", "energy", "grad_norm"];
pub const DOMAIN_HEADER: [&str; 6] = ["i", "j", "x", "y", "inside", "d"];
pub const BOUNDARY_HEADER: [&str; 5] = ["s", "x", "y", "nu_x", "nu_y"];
pub const DEFECT_HEADER: [&str; 6] = ["cluster", "center_x", "center_y", "nodes", "degree", "touches_boundary"];
pub const GAMMA_REPORT_HEADER: [&str; 5] = ["trial_id", "perturbation_kind", "l1_distance", "f0_value", "delta_f0"];

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub struct Table {
    inner: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut inner = csv::Writer::from_writer(BufWriter::new(file));
        inner.write_record(header)?;
        Ok(Table { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Inside nodes only. `phi1`, `phi2` are empty when the potential has fewer wells.
pub fn write_field(path: &Path, grid: &Grid2D, f: &Field2D, pot: &Potential, table: &PhiTable) -> Result<()> {
    let dom = &grid.domain;
    let phis = table.phi_field(grid, f)?;
    let mut t = Table::create(path, &FIELD_HEADER)?;
    for k in 0..dom.len() {
        if !dom.mask[k] {
            continue;
        }
        let (i, j) = (k % dom.nx, k / dom.nx);
        let p = dom.position_of(k);
        let q = f.values[k];
        let mut row = vec![i.to_string(), j.to_string(), num(p[0]), num(p[1])];
        row.extend(q.0.iter().map(|v| num(*v)));
        row.push(num(pot.w(&q)));
        for w in 0..2 {
            row.push(phis.get(w).map(|v| num(v[k])).unwrap_or_default());
        }
        t.row(row)?;
    }
    t.finish()
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut t = Table::create(path, &TRACE_HEADER)?;
    for r in trace {
        t.row([r.iteration.to_string(), num(r.energy), num(r.grad_norm)])?;
    }
    t.finish()
}

pub fn write_domain(path: &Path, dom: &Domain2D) -> Result<()> {
    let mut t = Table::create(path, &DOMAIN_HEADER)?;
    for k in 0..dom.len() {
        let p = dom.position_of(k);
        t.row([
            (k % dom.nx).to_string(),
            (k / dom.nx).to_string(),
            num(p[0]),
            num(p[1]),
            u8::from(dom.mask[k]).to_string(),
            num(dom.signed_distance[k]),
        ])?;
    }
    t.finish()
}

pub fn write_boundary(path: &Path, dom: &Domain2D) -> Result<()> {
    let mut t = Table::create(path, &BOUNDARY_HEADER)?;
    for b in &dom.boundary {
        t.row([num(b.s), num(b.x), num(b.y), num(b.nx), num(b.ny)])?;
    }
    t.finish()
}

pub fn write_defects(path: &Path, defects: &[Defect]) -> Result<()> {
    let mut t = Table::create(path, &DEFECT_HEADER)?;
    for (n, d) in defects.iter().enumerate() {
        t.row([
            n.to_string(),
            num(d.center[0]),
            num(d.center[1]),
            d.nodes.len().to_string(),
            d.degree.map(|g| g.as_f64().to_string()).unwrap_or_default(),
            u8::from(d.touches_boundary).to_string(),
        ])?;
    }
    t.finish()
}

/// Reads the named float columns of a CSV file, naming any missing column in the error.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header = r.headers()?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == *n)
                .with_context(|| format!("{}: missing column `{n}`", path.display()))
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (c, &i) in idx.iter().enumerate() {
            let v: f64 = rec.get(i).unwrap_or("").parse().with_context(|| {
                format!(
                    "{}: row {}: column `{}` is not a number",
                    path.display(),
                    line + 1,
                    names[c]
                )
            })?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}
