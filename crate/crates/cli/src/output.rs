//! CSV and manifest writers. Floats are written with 17 significant digits
//! so that parsing a file gives back the in-memory values exactly.

use std::path::{Path, PathBuf};

use cfglab::{Histogram, SummaryStats, TrajectoryEnsemble};
use serde::Serialize;

use crate::error::CliError;

pub const ENSEMBLE_HEADER: [&str; 4] = ["t", "traj_id", "q", "score_diff_norm"];
pub const STATS_HEADER: [&str; 5] = ["t", "mean", "variance", "sem", "n"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["bin_left", "bin_right", "count"];

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan_fingerprint: Option<String>,
}

/// Output directory of one run, tracking every file written to it.
pub struct OutDir {
    root: PathBuf,
    pub files: Vec<FileEntry>,
}

impl OutDir {
    /// Creates the directory and checks that it accepts writes.
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let probe = root.join(".cfglab-write-check");
        std::fs::write(&probe, b"").map_err(|e| CliError::io(root, e))?;
        std::fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn table<I>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: I,
        fingerprint: Option<&str>,
    ) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let err = |e: csv::Error| CliError::io(&path, e);
        let mut w = csv::Writer::from_path(&path).map_err(err)?;
        w.write_record(header).map_err(err)?;
        let mut n = 0;
        for row in rows {
            w.write_record(&row).map_err(err)?;
            n += 1;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            rows: n,
            plan_fingerprint: fingerprint.map(str::to_string),
        });
        Ok(())
    }

    pub fn stats(&mut self, name: &str, s: &SummaryStats, fingerprint: Option<&str>) -> Result<(), CliError> {
        let rows = (0..s.times.len()).map(|i| {
            vec![
                fmt_f(s.times[i]),
                fmt_f(s.mean[i]),
                fmt_f(s.variance[i]),
                fmt_f(s.sem[i]),
                s.n.to_string(),
            ]
        });
        self.table(name, &STATS_HEADER, rows, fingerprint)
    }

    pub fn histogram(&mut self, name: &str, h: &Histogram, fingerprint: Option<&str>) -> Result<(), CliError> {
        let rows = h
            .counts
            .iter()
            .enumerate()
            .map(|(i, c)| vec![fmt_f(h.edges[i]), fmt_f(h.edges[i + 1]), c.to_string()]);
        self.table(name, &HISTOGRAM_HEADER, rows, fingerprint)
    }

    /// One row per (recorded time, trajectory). The score-difference column
    /// is empty when the ensemble did not record it.
    pub fn ensemble(&mut self, name: &str, e: &TrajectoryEnsemble) -> Result<(), CliError> {
        let nt = e.n_times();
        let rows = (0..nt).flat_map(|i| {
            (0..e.n_traj).map(move |j| {
                let sd = e.score_diff.as_ref().map(|sd| sd[j * nt + i]);
                vec![fmt_f(e.times[i]), j.to_string(), fmt_f(e.q_at(j, i)), fmt_opt(sd)]
            })
        });
        self.table(name, &ENSEMBLE_HEADER, rows, Some(&e.fingerprint))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
