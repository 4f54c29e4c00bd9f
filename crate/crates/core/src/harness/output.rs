use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::BoundReport;
use crate::error::Result;
use crate::measure::io::{read_measure, write_measure};
use crate::measure::Measure;
use crate::schemes::{SchemeConfig, SchemeKind, Trajectory};

/// Files written by one command, relative to its output directory.
#[derive(Debug, Clone, Default)]
pub struct FileLog {
    root: PathBuf,
    files: Vec<String>,
}

impl FileLog {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Full path of `name`, recorded as produced.
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Writes `rows` with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    for r in rows {
        w.serialize(r).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of `trajectory.csv`. Corners list coordinates separated by `;`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub frame: usize,
    pub time: f64,
    pub mass: f64,
    pub bbox_lo: String,
    pub bbox_hi: String,
    pub file: String,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";")
}

fn frame_name(prefix: &str, k: usize) -> String {
    format!("{prefix}frame_{k:04}.measure")
}

pub fn trajectory_rows(traj: &Trajectory, prefix: &str) -> Vec<TrajectoryRow> {
    traj.frames()
        .iter()
        .enumerate()
        .map(|(k, (t, m))| {
            let (lo, hi) = m.support_bbox().map_or((String::new(), String::new()), |b| (join(&b.lo), join(&b.hi)));
            TrajectoryRow {
                frame: k,
                time: *t,
                mass: m.total_mass(),
                bbox_lo: lo,
                bbox_hi: hi,
                file: frame_name(prefix, k),
            }
        })
        .collect()
}

/// One measure file per frame.
pub fn write_frames<'a, I>(log: &mut FileLog, prefix: &str, frames: I) -> Result<()>
where
    I: IntoIterator<Item = &'a Measure>,
{
    for (k, m) in frames.into_iter().enumerate() {
        let path = log.path(&frame_name(prefix, k));
        write_measure(&path, m)?;
    }
    Ok(())
}

/// Frames plus `{prefix}trajectory.csv`.
pub fn write_trajectory(log: &mut FileLog, prefix: &str, traj: &Trajectory) -> Result<()> {
    write_frames(log, prefix, traj.frames().iter().map(|(_, m)| m))?;
    let path = log.path(&format!("{prefix}trajectory.csv"));
    write_csv(&path, &trajectory_rows(traj, prefix))
}

#[derive(serde::Deserialize)]
struct RowIn {
    time: f64,
    file: String,
}

/// Reads a trajectory written by [`write_trajectory`] from `dir`.
pub fn read_trajectory(dir: &Path, prefix: &str, scheme: SchemeKind, config: SchemeConfig) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(dir.join(format!("{prefix}trajectory.csv"))).map_err(std::io::Error::from)?;
    let mut traj = Trajectory::new(scheme, config);
    for row in r.deserialize::<RowIn>() {
        let row = row.map_err(std::io::Error::from)?;
        traj.push(row.time, read_measure(&dir.join(&row.file))?);
    }
    Ok(traj)
}

/// Run summary written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: "wasserflow",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            inputs: Vec::new(),
            seed: None,
            threads: rayon::current_num_threads(),
            files: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    /// Writes the manifest listing every file in `log`.
    pub fn write(mut self, log: &mut FileLog) -> Result<PathBuf> {
        let path = log.path("manifest.json");
        self.files = log.files().to_vec();
        let text = serde_json::to_string_pretty(&self).map_err(std::io::Error::other)?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// Flat CSV form of a [`BoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub name: String,
    pub l: f64,
    pub m: f64,
    pub k: f64,
    pub p: f64,
    pub t: f64,
    pub dt: f64,
    pub dx: f64,
    pub n: usize,
    pub mass: f64,
    pub bound: f64,
    pub measured: Option<f64>,
    pub slack: f64,
    pub hypothesis_ok: bool,
    pub pass: bool,
}

pub fn bound_rows(reports: &[BoundReport]) -> Vec<BoundRow> {
    reports
        .iter()
        .map(|r| BoundRow {
            name: r.name.clone(),
            l: r.inputs.l,
            m: r.inputs.m,
            k: r.inputs.k,
            p: r.inputs.p,
            t: r.inputs.t,
            dt: r.inputs.dt,
            dx: r.inputs.dx,
            n: r.inputs.n,
            mass: r.inputs.mass,
            bound: r.bound,
            measured: r.measured,
            slack: r.slack,
            hypothesis_ok: r.hypothesis_ok,
            pass: r.passes(),
        })
        .collect()
}
