//! Plain-text mesh reader.
//!
//! Format: first non-comment line `NV NT` (triangles) or `NV NC` (polygons),
//! then `NV` lines `x y`, then connectivity: three 0-based indices per
//! triangle, or a vertex count followed by that many indices per polygon.
//! `#` starts a comment; tokens are whitespace separated.

use super::{PolyMesh, TriMesh};
use crate::error::{Error, Result};
use crate::vec2::Vec2;
use std::path::Path;

fn tokens(text: &str) -> Vec<&str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .collect()
}

struct Cursor<'a> {
    toks: Vec<&'a str>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next_usize(&mut self, what: &str) -> Result<usize> {
        let t = self.next_tok(what)?;
        t.parse()
            .map_err(|_| Error::MeshFormat(format!("expected integer {what}, got '{t}'")))
    }

    fn next_f64(&mut self, what: &str) -> Result<f64> {
        let t = self.next_tok(what)?;
        t.parse()
            .map_err(|_| Error::MeshFormat(format!("expected number {what}, got '{t}'")))
    }

    fn next_tok(&mut self, what: &str) -> Result<&'a str> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| Error::MeshFormat(format!("unexpected end of file reading {what}")))?;
        self.pos += 1;
        Ok(t)
    }
}

fn read_header(cur: &mut Cursor) -> Result<(usize, usize, Vec<Vec2>)> {
    let nv = cur.next_usize("vertex count")?;
    let ne = cur.next_usize("element count")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let x = cur.next_f64(&format!("x of vertex {i}"))?;
        let y = cur.next_f64(&format!("y of vertex {i}"))?;
        vertices.push(Vec2::new(x, y));
    }
    Ok((nv, ne, vertices))
}

pub fn parse_tri_mesh(text: &str) -> Result<TriMesh> {
    let mut cur = Cursor { toks: tokens(text), pos: 0 };
    let (_, nt, vertices) = read_header(&mut cur)?;
    let mut triangles = Vec::with_capacity(nt);
    for t in 0..nt {
        let mut tri = [0usize; 3];
        for v in tri.iter_mut() {
            *v = cur.next_usize(&format!("vertex of triangle {t}"))?;
        }
        triangles.push(tri);
    }
    TriMesh::new(vertices, triangles)
}

pub fn parse_poly_mesh(text: &str) -> Result<PolyMesh> {
    let mut cur = Cursor { toks: tokens(text), pos: 0 };
    let (_, nc, vertices) = read_header(&mut cur)?;
    let mut cells = Vec::with_capacity(nc);
    for c in 0..nc {
        let count = cur.next_usize(&format!("vertex count of cell {c}"))?;
        if count < 3 {
            return Err(Error::MeshFormat(format!("cell {c} has {count} vertices")));
        }
        let mut cell = Vec::with_capacity(count);
        for _ in 0..count {
            cell.push(cur.next_usize(&format!("vertex of cell {c}"))?);
        }
        cells.push(cell);
    }
    PolyMesh::new(vertices, cells)
}

pub fn read_tri_mesh(path: &Path) -> Result<TriMesh> {
    parse_tri_mesh(&std::fs::read_to_string(path)?)
}

pub fn read_poly_mesh(path: &Path) -> Result<PolyMesh> {
    parse_poly_mesh(&std::fs::read_to_string(path)?)
}
