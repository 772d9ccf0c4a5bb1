use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::levelset::{smoothed_chi, LevelSetField, SmoothingParams};
use crate::mesh::TriMesh;
use crate::optimizer::{HistoryRow, Sink};

pub const HISTORY_HEADER: &str = "step,objective,constraint,lambda,linf_update,wall_ms";

/// 17 significant digits: enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn history_line(row: &HistoryRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        row.step,
        num(row.objective),
        num(row.constraint),
        num(row.lambda),
        num(row.linf_update),
        num(row.wall_ms)
    )
}

pub fn write_history(rows: &[HistoryRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{HISTORY_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", history_line(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != HISTORY_HEADER {
        return Err(Error::Parse(format!(
            "{}: unexpected header `{header}`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let bad = |what: &str| Error::Parse(format!("{}:{}: {what}", path.display(), i + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad("expected 6 columns"));
        }
        let f = |k: usize| cols[k].parse::<f64>().map_err(|_| bad("invalid number"));
        rows.push(HistoryRow {
            step: cols[0].parse().map_err(|_| bad("invalid step"))?,
            objective: f(1)?,
            constraint: f(2)?,
            lambda: f(3)?,
            linf_update: f(4)?,
            wall_ms: f(5)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    /// Legacy ASCII unstructured grid with the field as point scalars.
    VtkLegacyAscii,
    /// Binary graymap of the smoothed characteristic function on the node
    /// lattice, top row first; 255 is material.
    Pgm,
}

impl FieldFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            FieldFormat::VtkLegacyAscii => "vtk",
            FieldFormat::Pgm => "pgm",
        }
    }
}

pub fn write_field(
    mesh: &TriMesh,
    field: &[f64],
    path: &Path,
    format: FieldFormat,
    smoothing: &SmoothingParams,
) -> Result<()> {
    if field.len() != mesh.num_nodes() {
        return Err(Error::Config(format!(
            "field has {} values, mesh has {} nodes",
            field.len(),
            mesh.num_nodes()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        FieldFormat::VtkLegacyAscii => {
            writeln!(w, "# vtk DataFile Version 3.0")?;
            writeln!(w, "level set")?;
            writeln!(w, "ASCII")?;
            writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
            writeln!(w, "POINTS {} double", mesh.num_nodes())?;
            for p in &mesh.nodes {
                writeln!(w, "{} {} 0", num(p[0]), num(p[1]))?;
            }
            let ne = mesh.num_elements();
            writeln!(w, "CELLS {ne} {}", 4 * ne)?;
            for e in &mesh.elements {
                writeln!(w, "3 {} {} {}", e[0], e[1], e[2])?;
            }
            writeln!(w, "CELL_TYPES {ne}")?;
            for _ in 0..ne {
                writeln!(w, "5")?;
            }
            writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
            writeln!(w, "SCALARS phi double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in field {
                writeln!(w, "{}", num(*v))?;
            }
        }
        FieldFormat::Pgm => {
            let chi = smoothed_chi(field, smoothing);
            let (cols, rows) = (mesh.nx + 1, mesh.ny + 1);
            write!(w, "P5\n{cols} {rows}\n255\n")?;
            let mut raster = Vec::with_capacity(cols * rows);
            for j in (0..rows).rev() {
                for i in 0..cols {
                    raster.push(
                        (255.0 * chi[mesh.node_index(i, j)])
                            .round()
                            .clamp(0.0, 255.0) as u8,
                    );
                }
            }
            w.write_all(&raster)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `history.csv` (flushed per row) and periodic field snapshots
/// `snap_NNNNN.{vtk,pgm}` into one directory.
pub struct DirectorySink<'a> {
    dir: PathBuf,
    mesh: &'a TriMesh,
    smoothing: SmoothingParams,
    snapshot_every: usize,
    history: BufWriter<File>,
}

impl<'a> DirectorySink<'a> {
    pub fn create(
        dir: &Path,
        mesh: &'a TriMesh,
        smoothing: SmoothingParams,
        snapshot_every: usize,
    ) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut history = BufWriter::new(File::create(dir.join("history.csv"))?);
        writeln!(history, "{HISTORY_HEADER}")?;
        history.flush()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            mesh,
            smoothing,
            snapshot_every,
            history,
        })
    }

    pub fn history_path(&self) -> PathBuf {
        self.dir.join("history.csv")
    }

    fn snapshot(&self, step: usize, phi: &LevelSetField) -> Result<()> {
        for format in [FieldFormat::VtkLegacyAscii, FieldFormat::Pgm] {
            let path = self
                .dir
                .join(format!("snap_{step:05}.{}", format.extension()));
            write_field(self.mesh, phi.values(), &path, format, &self.smoothing)?;
        }
        Ok(())
    }
}

impl Sink for DirectorySink<'_> {
    fn record(&mut self, row: &HistoryRow) -> Result<()> {
        writeln!(self.history, "{}", history_line(row))?;
        self.history.flush()?;
        Ok(())
    }

    fn field(&mut self, step: usize, phi: &LevelSetField, last: bool) -> Result<()> {
        let due = self.snapshot_every > 0 && step.is_multiple_of(self.snapshot_every);
        if last || due {
            self.snapshot(step, phi)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<HistoryRow> {
        (0..n)
            .map(|i| HistoryRow {
                step: i,
                objective: 1.0 / (i as f64 + 3.0),
                constraint: -0.1 * i as f64 + 1e-300,
                lambda: std::f64::consts::PI * i as f64,
                linf_update: 2f64.powi(-(i as i32) * 7),
                wall_ms: 0.0,
            })
            .collect()
    }

    #[test]
    fn history_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        write_history(&[], &p).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            format!("{HISTORY_HEADER}\n")
        );
        write_history(&rows(3), &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 4);
        assert_eq!(read_history(&p).unwrap(), rows(3));
    }

    #[test]
    fn pgm_extremes() {
        let mesh = TriMesh::generate_rect(4, 2, 2.0, 1.0, &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.pgm");
        let sm = SmoothingParams::default();
        for (v, byte) in [(1.0, 255u8), (-1.0, 0u8)] {
            write_field(&mesh, &vec![v; mesh.num_nodes()], &p, FieldFormat::Pgm, &sm).unwrap();
            let bytes = fs::read(&p).unwrap();
            let header = b"P5\n5 3\n255\n";
            assert_eq!(&bytes[..header.len()], header);
            assert_eq!(bytes.len(), header.len() + 15);
            assert!(bytes[header.len()..].iter().all(|&b| b == byte));
        }
    }

    #[test]
    fn vtk_header_counts() {
        let mesh = TriMesh::generate_rect(3, 2, 1.5, 1.0, &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.vtk");
        let phi: Vec<f64> = (0..mesh.num_nodes())
            .map(|i| i as f64 / 12.0 - 0.5)
            .collect();
        write_field(
            &mesh,
            &phi,
            &p,
            FieldFormat::VtkLegacyAscii,
            &SmoothingParams::default(),
        )
        .unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("POINTS 12 double"));
        assert!(text.contains("CELLS 12 48"));
        assert!(text.contains("POINT_DATA 12"));
        let values: Vec<f64> = text
            .lines()
            .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
            .skip(1)
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(values, phi);
        assert!(write_field(
            &mesh,
            &phi[1..],
            &p,
            FieldFormat::Pgm,
            &SmoothingParams::default()
        )
        .is_err());
    }
}
