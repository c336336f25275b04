//! Reproduction studies.
//!
//! Every study is a pure function of its config (seed included) and
//! produces a CSV table, one row per grid cell, plus a JSON metadata
//! document. Cells run in parallel; each owns an RNG stream derived from
//! `(seed, cell)` so output bytes do not depend on the thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::Result;

pub mod convergence;
pub mod corruption;
pub mod polytest;

pub use convergence::{convergence_study, convergence_study_with, loglog_slope, ConvergenceConfig, ConvergenceRow};
pub use corruption::{
    amplification_db, corrupt_inputs, eigen_amplification, eigen_study, stability_study, AmplificationCurve, Corruption,
    CorruptionMode, CorruptionSpec, EigenConfig, StabilityConfig, StabilityRow,
};
pub use polytest::{polytest_study, CvScheme, PolyTarget, PolytestConfig, PolytestRow, WeightVariance};

/// A rendered study: CSV body plus metadata.
#[derive(Clone, Debug)]
pub struct StudyOutput {
    pub name: String,
    pub csv: String,
    pub meta: serde_json::Value,
}

impl StudyOutput {
    pub fn new<C: Serialize>(name: &str, csv: String, config: &C, summary: serde_json::Value) -> Result<Self> {
        Ok(StudyOutput {
            name: name.to_string(),
            csv,
            meta: json!({
                "study": name,
                "version": env!("CARGO_PKG_VERSION"),
                "config": serde_json::to_value(config)?,
                "summary": summary,
            }),
        })
    }

    /// Write `<name>.csv` and `<name>.meta.json` into `dir`, returning both paths.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        let meta_path = dir.join(format!("{}.meta.json", self.name));
        std::fs::write(&csv_path, &self.csv)?;
        std::fs::write(&meta_path, serde_json::to_string_pretty(&self.meta)? + "\n")?;
        Ok((csv_path, meta_path))
    }
}

/// Minimal CSV builder; floats use the shortest representation that round-trips.
pub(crate) struct CsvTable {
    out: String,
}

impl CsvTable {
    pub(crate) fn new(header: &[&str]) -> Self {
        CsvTable {
            out: header.join(",") + "\n",
        }
    }

    pub(crate) fn row(&mut self, fields: &[&dyn std::fmt::Display]) {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.out.push(',');
            }
            write!(self.out, "{f}").expect("writing to a String");
        }
        self.out.push('\n');
    }

    pub(crate) fn finish(self) -> String {
        self.out
    }
}
