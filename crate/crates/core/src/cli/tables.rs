//! Plot-ready CSV tables derived from a record set.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    energy_derivative_table, exact_order_parameter, exp_fit, g_derivative, locate_extremum, locate_transition, DerivativeTable,
    EnergyCell, ExtremumMode, OrderKind,
};
use crate::error::{Error, Result};
use crate::exact_oracle::GroundSpace;
use crate::model::{ModelInstance, ModelSpec};
use crate::vqe_engine::RunRecord;

use super::store::FORMAT_VERSION;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Column name of the Hamiltonian parameter.
pub fn g_name(spec: &ModelSpec) -> &'static str {
    match spec {
        ModelSpec::Tfim1d { .. } | ModelSpec::Tfim2d { .. } => "h_x",
        ModelSpec::Bbc { .. } => "phi",
        ModelSpec::Ssh2d { .. } => "r",
    }
}

/// `d<order>_d<g>` with underscores dropped, e.g. `dmz_dhx`.
pub fn derivative_name(kind: OrderKind, spec: &ModelSpec) -> String {
    format!("d{}_d{}", kind.name().replace('_', ""), g_name(spec).replace('_', ""))
}

/// A header plus rows of optional numbers (blank cells for missing values).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Store(e.to_string()))?;
        w.write_record(&self.header).map_err(|e| Error::Store(e.to_string()))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.filter(|x| x.is_finite()).map_or(String::new(), |x| x.to_string())).collect();
            w.write_record(&cells).map_err(|e| Error::Store(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Store(e.to_string()))?;
        let header = r.headers().map_err(|e| Error::Store(e.to_string()))?.iter().map(String::from).collect();
        let mut t = Table::new(header);
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Store(e.to_string()))?;
            let row = rec
                .iter()
                .map(|c| if c.is_empty() { Ok(None) } else { c.parse::<f64>().map(Some).map_err(|e| Error::Store(format!("{c}: {e}"))) })
                .collect::<Result<_>>()?;
            t.rows.push(row);
        }
        Ok(t)
    }

    /// Fixed-width text rendering for the terminal.
    pub fn to_text(&self) -> String {
        let mut s = self.header.iter().map(|h| format!("{h:>18}")).collect::<String>();
        s.push('\n');
        for row in &self.rows {
            for v in row {
                match v {
                    Some(x) if x.is_finite() => s.push_str(&format!("{:>18}", format!("{x:.6}"))),
                    _ => s.push_str(&format!("{:>18}", "-")),
                }
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: String,
    tables: Vec<String>,
}

/// Write a table and register it in the directory's manifest.
fn emit(dir: &Path, name: &str, table: &Table) -> Result<String> {
    fs::create_dir_all(dir)?;
    table.write_csv(&dir.join(name))?;
    let mpath = dir.join(MANIFEST_FILE);
    let mut m: Manifest = match fs::read_to_string(&mpath) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => Manifest::default(),
    };
    m.format = "phasesketch-tables".into();
    m.version = FORMAT_VERSION.into();
    if !m.tables.iter().any(|t| t == name) {
        m.tables.push(name.into());
        m.tables.sort();
    }
    fs::write(&mpath, serde_json::to_string_pretty(&m)?)?;
    Ok(dir.join(name).display().to_string())
}

fn best_records(records: &[RunRecord]) -> Vec<&RunRecord> {
    records.iter().filter(|r| r.best).collect()
}

fn grids(records: &[RunRecord]) -> (Vec<f64>, Vec<usize>) {
    let mut g: Vec<f64> = records.iter().map(|r| r.g.value()).collect();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    let mut p: Vec<usize> = records.iter().map(|r| r.p).collect();
    p.sort_unstable();
    p.dedup();
    (g, p)
}

/// Best record per `(g bits, p)`.
fn best_map(records: &[RunRecord]) -> BTreeMap<(u64, usize), &RunRecord> {
    best_records(records).into_iter().map(|r| ((r.g.value().to_bits(), r.p), r)).collect()
}

fn order_kinds(records: &[RunRecord]) -> Vec<OrderKind> {
    let mut kinds: Vec<OrderKind> = records.iter().flat_map(|r| r.order_params.keys().copied()).collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

fn cells(records: &[RunRecord]) -> Vec<EnergyCell> {
    best_records(records).iter().map(|r| EnergyCell { g: r.g.value(), p: r.p, energy: r.energy }).collect()
}

/// `d order / d g` at depth `p` over the grid points that have a value.
fn order_derivative(g: &[f64], values: &[Option<f64>]) -> Vec<Option<f64>> {
    let idx: Vec<usize> = (0..g.len()).filter(|&i| values[i].is_some()).collect();
    let mut out = vec![None; g.len()];
    let gs: Vec<f64> = idx.iter().map(|&i| g[i]).collect();
    let vs: Vec<f64> = idx.iter().map(|&i| values[i].unwrap()).collect();
    if let Ok(d) = g_derivative(&gs, &vs) {
        for (k, &i) in idx.iter().enumerate() {
            out[i] = Some(d[k]);
        }
    }
    out
}

/// Combined `(p, g)` table: ΔE/Δp (raw and normalized), order parameters and
/// their g-derivatives. Missing cells are reported as holes.
pub fn analysis_table(records: &[RunRecord]) -> Result<(Table, Vec<(f64, usize)>)> {
    let spec = records.first().ok_or_else(|| Error::Analysis("no records".into()))?.model;
    let (g, ps) = grids(records);
    let best = best_map(records);
    let (raw, holes) = DerivativeTable::from_cells_lenient(&cells(records), false);
    let norm = raw.normalize();
    let kinds = order_kinds(records);
    let mut header = vec!["p".to_string(), g_name(&spec).to_string(), "dE_dp".into(), "dE_dp_norm".into()];
    for &k in &kinds {
        header.push(k.name().into());
        header.push(derivative_name(k, &spec));
    }
    let mut t = Table::new(header);
    for &p in &ps {
        let values: Vec<Vec<Option<f64>>> = kinds
            .iter()
            .map(|k| g.iter().map(|gv| best.get(&(gv.to_bits(), p)).and_then(|r| r.order_params.get(k).copied())).collect())
            .collect();
        let derivs: Vec<Vec<Option<f64>>> = values.iter().map(|v| order_derivative(&g, v)).collect();
        for (gi, &gv) in g.iter().enumerate() {
            let mut row = vec![Some(p as f64), Some(gv), raw.row(p).map(|r| r[gi]), norm.row(p).map(|r| r[gi])];
            for (v, d) in values.iter().zip(&derivs) {
                row.push(v[gi]);
                row.push(d[gi]);
            }
            t.rows.push(row);
        }
    }
    Ok((t, holes))
}

/// Energy, exact reference and fidelity over the `(p, g)` grid.
pub fn surface_table(records: &[RunRecord]) -> Table {
    let mut t = Table::new(["p", "g", "energy", "E0", "energy_error", "fidelity"].map(String::from).to_vec());
    for r in best_records(records) {
        let ex = r.exact_ref;
        t.rows.push(vec![
            Some(r.p as f64),
            Some(r.g.value()),
            Some(r.energy),
            ex.map(|e| e.e0),
            ex.map(|e| r.energy - e.e0),
            ex.map(|e| e.fidelity),
        ]);
    }
    t
}

pub fn write_analysis(dir: &Path, records: &[RunRecord]) -> Result<Vec<String>> {
    let (t, holes) = analysis_table(records)?;
    if !holes.is_empty() {
        log::warn!("partial grid: {} missing (g, p) cells: {holes:?}", holes.len());
        eprintln!("warning: {} missing (g, p) cells: {holes:?}", holes.len());
    }
    Ok(vec![emit(dir, "analysis.csv", &t)?, emit(dir, "surface.csv", &surface_table(records))?])
}

/// Per-depth argmin of ΔE/Δp.
pub fn energy_estimates(records: &[RunRecord], normalize: bool, smooth: bool) -> Result<Vec<(usize, Option<f64>)>> {
    let (t, _) = DerivativeTable::from_cells_lenient(&cells(records), normalize);
    Ok(locate_transition(&t, ExtremumMode::Argmin, smooth))
}

/// Exponential fit of the best energy against depth for every g.
pub fn fit_table(records: &[RunRecord]) -> Table {
    let (g, _) = grids(records);
    let best = best_records(records);
    let mut t = Table::new(["g", "a", "gamma", "e0_fit", "residual", "n_points"].map(String::from).to_vec());
    for gv in g {
        let mut pts: Vec<(f64, f64)> = best.iter().filter(|r| r.g.value() == gv).map(|r| (r.p as f64, r.energy)).collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (ps, es): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        match exp_fit(&ps, &es) {
            Ok(f) => t.rows.push(vec![Some(gv), Some(f.a), Some(f.gamma), Some(f.e0_fit), Some(f.residual), Some(ps.len() as f64)]),
            Err(e) => {
                log::warn!("g = {gv}: {e}");
                t.rows.push(vec![Some(gv), None, None, None, None, Some(ps.len() as f64)]);
            }
        }
    }
    t
}

pub fn write_fit(dir: &Path, records: &[RunRecord]) -> Result<String> {
    emit(dir, "fit.csv", &fit_table(records))
}

/// Per-depth transition estimates: argmin of normalized ΔE/Δp and argmax of
/// |d order / d g| for every recorded order parameter.
pub fn report_table(records: &[RunRecord], smooth: bool) -> Result<Table> {
    let spec = records.first().ok_or_else(|| Error::Analysis("no records".into()))?.model;
    let (analysis, _) = analysis_table(records)?;
    let (g, ps) = grids(records);
    let kinds = order_kinds(records);
    let mut header = vec!["p".to_string(), "argmin_dE_dp".into()];
    header.extend(kinds.iter().map(|&k| format!("argmax_abs_{}", derivative_name(k, &spec))));
    let mut t = Table::new(header);
    let norm = analysis.column("dE_dp_norm").expect("column");
    for (pi, &p) in ps.iter().enumerate() {
        let slice = |col: &[Option<f64>]| -> Vec<f64> { col[pi * g.len()..(pi + 1) * g.len()].iter().map(|v| v.unwrap_or(f64::NAN)).collect() };
        let mut row = vec![Some(p as f64), locate_extremum(&g, &slice(&norm), ExtremumMode::Argmin, smooth)];
        for &k in &kinds {
            let col = analysis.column(&derivative_name(k, &spec)).expect("column");
            row.push(locate_extremum(&g, &slice(&col), ExtremumMode::ArgmaxAbs, smooth));
        }
        t.rows.push(row);
    }
    Ok(t)
}

pub fn write_report(dir: &Path, records: &[RunRecord], smooth: bool) -> Result<(String, Table)> {
    let t = report_table(records, smooth)?;
    Ok((emit(dir, "report.csv", &t)?, t))
}

/// Exact ground-state energy, degeneracy, gap and order parameters per g.
pub fn exact_table(model: &ModelInstance, g_values: &[f64], spaces: &[GroundSpace]) -> Result<Table> {
    let kinds = OrderKind::defaults_for(&model.spec);
    let mut header = vec![g_name(&model.spec).to_string(), "E0".into(), "degeneracy".into(), "gap".into()];
    header.extend(kinds.iter().map(|k| k.name().to_string()));
    let mut t = Table::new(header);
    for (&g, gs) in g_values.iter().zip(spaces) {
        let mut row = vec![Some(g), Some(gs.energy), Some(gs.degeneracy as f64), Some(gs.gap)];
        for &k in &kinds {
            row.push(Some(exact_order_parameter(gs, k, model)?));
        }
        t.rows.push(row);
    }
    Ok(t)
}

pub fn write_exact(dir: &Path, model: &ModelInstance, g_values: &[f64], spaces: &[GroundSpace]) -> Result<String> {
    emit(dir, "exact.csv", &exact_table(model, g_values, spaces)?)
}

/// Strict derivative table over the best records (errors on holes).
pub fn strict_derivatives(records: &[RunRecord], normalize: bool) -> Result<DerivativeTable> {
    energy_derivative_table(&cells(records), normalize)
}
