//! CSV and JSON writers. Numbers use Rust's shortest round-trip formatting,
//! so identical runs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use crossdiff::diagnostics::CheckResult;
use crossdiff::measures::{DensityVector, Grid1D, JointDensity};
use crossdiff::skt::MarginalPair;

pub struct Writer {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn table(
        &mut self,
        name: &str,
        header: &[String],
        rows: impl Iterator<Item = Vec<f64>>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let mut w =
            csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// Columns `x, u1, …, uN`.
    pub fn densities(&mut self, name: &str, u: &DensityVector) -> Result<()> {
        let mut header = vec!["x".to_string()];
        header.extend((1..=u.n_species()).map(|i| format!("u{i}")));
        let g = *u.grid();
        self.table(
            name,
            &header,
            (0..g.n_cells()).map(|c| {
                let mut row = vec![g.center(c)];
                row.extend(u.iter().map(|d| d.values()[c]));
                row
            }),
        )
    }

    /// Columns `x1, x2, p`.
    pub fn joint(&mut self, name: &str, p: &JointDensity) -> Result<()> {
        let g = *p.grid();
        let header = ["x1", "x2", "p"].map(String::from);
        self.table(
            name,
            &header,
            (0..g.n1()).flat_map(|c1| {
                (0..g.n2())
                    .map(move |c2| vec![g.axis1().center(c1), g.axis2().center(c2), p.at(c1, c2)])
            }),
        )
    }

    /// Columns `x, u1, u2`; both axes must coincide.
    pub fn marginals(&mut self, name: &str, m: &MarginalPair) -> Result<()> {
        let g: Grid1D = *m.u1.grid();
        let header = ["x", "u1", "u2"].map(String::from);
        self.table(
            name,
            &header,
            (0..g.n_cells()).map(|c| vec![g.center(c), m.u1.values()[c], m.u2.values()[c]]),
        )
    }

    /// One column per named series, all of the same length.
    pub fn series(&mut self, name: &str, columns: &[(&str, &[f64])]) -> Result<()> {
        let header: Vec<String> = columns.iter().map(|(n, _)| n.to_string()).collect();
        let len = columns.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
        self.table(
            name,
            &header,
            (0..len).map(|k| columns.iter().map(|(_, v)| v[k]).collect()),
        )
    }

    pub fn report(
        &mut self,
        scenario: &str,
        params: &serde_json::Value,
        checks: &[CheckResult],
    ) -> Result<()> {
        let path = self.dir.join("report.json");
        let body = json!({ "scenario": scenario, "params": params, "checks": checks });
        fs::write(&path, serde_json::to_string_pretty(&body)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }
}

/// `1` for 1.0, `0.25` for 0.25.
pub fn time_label(t: f64) -> String {
    format!("{t}")
}
