//! Output writers: legacy-VTK ASCII snapshots of polygonal meshes and small
//! CSV helpers. Floats are printed with 17 significant digits so reruns are
//! byte-identical and round-trip exactly.

use crate::error::Result;
use crate::mesh::PolyMesh;
use crate::vec2::Vec2;
use std::io::Write;
use std::path::Path;

/// `{:.16e}` carries 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One snapshot of a polygonal mesh with cell and point data, in legacy VTK
/// ASCII (version 2.0, unstructured grid).
pub struct VtkSnapshot<'a> {
    pub mesh: &'a PolyMesh,
    pub cell_scalars: Vec<(&'a str, Vec<f64>)>,
    pub point_vectors: Vec<(&'a str, Vec<Vec2>)>,
}

impl<'a> VtkSnapshot<'a> {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let nv = self.mesh.n_vertices();
        let nc = self.mesh.n_cells();
        writeln!(w, "# vtk DataFile Version 2.0")?;
        writeln!(w, "snapshot")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {nv} double")?;
        for v in &self.mesh.vertices {
            writeln!(w, "{} {} 0", fmt_f64(v.x), fmt_f64(v.y))?;
        }
        let list_len: usize = self.mesh.cells.iter().map(|c| c.len() + 1).sum();
        writeln!(w, "CELLS {nc} {list_len}")?;
        for cell in &self.mesh.cells {
            write!(w, "{}", cell.len())?;
            for &v in cell {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        writeln!(w, "CELL_TYPES {nc}")?;
        for _ in 0..nc {
            writeln!(w, "7")?; // VTK_POLYGON
        }
        if !self.cell_scalars.is_empty() {
            writeln!(w, "CELL_DATA {nc}")?;
            for (name, values) in &self.cell_scalars {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for x in values {
                    writeln!(w, "{}", fmt_f64(*x))?;
                }
            }
        }
        if !self.point_vectors.is_empty() {
            writeln!(w, "POINT_DATA {nv}")?;
            for (name, values) in &self.point_vectors {
                writeln!(w, "VECTORS {name} double")?;
                for v in values {
                    writeln!(w, "{} {} 0", fmt_f64(v.x), fmt_f64(v.y))?;
                }
            }
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }
}

/// Comma-separated table with a header row; values printed via [`fmt_f64`].
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter { out })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let cells: Vec<String> = values.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn row_mixed(&mut self, label: usize, values: &[f64]) -> Result<()> {
        let cells: Vec<String> = values.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(self.out, "{},{}", label, cells.join(","))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
