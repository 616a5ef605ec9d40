//! Geometry and connectivity: 1D grids, conforming triangulations, polygonal
//! meshes with corner and subface normals, and the oriented element graphs
//! used by the flux-recovery machinery.
//!
//! All meshes are immutable after construction (the Lagrangian solver clones
//! and rebuilds derived geometry as the vertices move). Indices in mesh files
//! are 0-based.

mod graph;
mod io;

pub use graph::{element_graph, ElementGraphKind, OrientedGraph};
pub use io::{read_poly_mesh, read_tri_mesh};

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use std::collections::BTreeMap;

// ---------------------------------------------------------------------------
// 1D grid
// ---------------------------------------------------------------------------

/// Ordered cell interfaces `x_{i+1/2}`; cells are the intervals between them.
#[derive(Debug, Clone)]
pub struct Grid1D {
    interfaces: Vec<f64>,
}

impl Grid1D {
    pub fn new(interfaces: Vec<f64>) -> Result<Self> {
        if interfaces.len() < 2 {
            return Err(Error::Geometry("a 1D grid needs at least two interfaces".into()));
        }
        for w in interfaces.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Geometry(format!(
                    "interfaces must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Grid1D { interfaces })
    }

    pub fn uniform(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        if n_cells == 0 || !(b > a) {
            return Err(Error::Geometry(format!("bad uniform grid [{a}, {b}] with {n_cells} cells")));
        }
        let dx = (b - a) / n_cells as f64;
        Grid1D::new((0..=n_cells).map(|i| a + i as f64 * dx).collect())
    }

    pub fn n_cells(&self) -> usize {
        self.interfaces.len() - 1
    }

    pub fn cell_width(&self, i: usize) -> f64 {
        self.interfaces[i + 1] - self.interfaces[i]
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.interfaces[i] + self.interfaces[i + 1])
    }

    pub fn min_width(&self) -> f64 {
        (0..self.n_cells()).map(|i| self.cell_width(i)).fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Triangulations
// ---------------------------------------------------------------------------

/// Conforming triangulation with counterclockwise triangles.
///
/// `vertex_class` maps every vertex to its representative: identity for plain
/// meshes, and the canonical (wrapped) vertex for periodic meshes built by
/// [`TriMesh::periodic_unit_square`]. Nodal quantities always accumulate on
/// representatives.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    vertex_class: Vec<usize>,
    areas: Vec<f64>,
    inward_normals: Vec<[Vec2; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        let class = (0..n).collect();
        Self::with_classes(vertices, triangles, class)
    }

    fn with_classes(
        vertices: Vec<Vec2>,
        mut triangles: Vec<[usize; 3]>,
        vertex_class: Vec<usize>,
    ) -> Result<Self> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri.iter() {
                if v >= n {
                    return Err(Error::MeshFormat(format!(
                        "triangle {t} references vertex {v} out of {n}"
                    )));
                }
            }
        }
        // conformity: no edge may be shared by more than two triangles
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = vertex_class[tri[k]];
                let b = vertex_class[tri[(k + 1) % 3]];
                let c = edge_count.entry((a.min(b), a.max(b))).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(Error::Geometry(format!(
                        "triangle {t}: edge ({a}, {b}) is shared by more than two triangles"
                    )));
                }
            }
        }
        let mut areas = Vec::with_capacity(triangles.len());
        let mut inward_normals = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            let [a, b, c] = *tri;
            let signed =
                0.5 * (vertices[b] - vertices[a]).cross_z(vertices[c] - vertices[a]);
            if signed == 0.0 {
                return Err(Error::Geometry(format!("triangle {t} is degenerate")));
            }
            if signed < 0.0 {
                tri.swap(1, 2);
            }
            let [a, b, c] = *tri;
            let area = 0.5 * (vertices[b] - vertices[a]).cross_z(vertices[c] - vertices[a]);
            areas.push(area);
            // Scaled inward normal opposite each vertex: for vertex a the
            // opposite edge is b -> c, and rotating it by +90 degrees points
            // into a CCW triangle.
            let inward = |p: Vec2, q: Vec2| -> Vec2 { -(q - p).cross_ez() };
            inward_normals.push([
                inward(vertices[b], vertices[c]),
                inward(vertices[c], vertices[a]),
                inward(vertices[a], vertices[b]),
            ]);
        }
        Ok(TriMesh {
            vertices,
            triangles,
            vertex_class,
            areas,
            inward_normals,
        })
    }

    /// Uniform triangulation of the unit square (no identification).
    pub fn unit_square(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Argument("unit square needs n >= 1".into()));
        }
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push(Vec2::new(i as f64 * h, j as f64 * h));
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * np + i;
                let v10 = j * np + i + 1;
                let v01 = (j + 1) * np + i;
                let v11 = (j + 1) * np + i + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        TriMesh::new(vertices, triangles)
    }

    /// Uniform triangulation of the unit square with periodic identification
    /// of the seam vertices; each grid square is split into two triangles.
    pub fn periodic_unit_square(n: usize) -> Result<Self> {
        // n >= 3 keeps wrapped edges distinct under the identification
        if n < 3 {
            return Err(Error::Argument("periodic square needs n >= 3".into()));
        }
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        let mut class = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push(Vec2::new(i as f64 * h, j as f64 * h));
                class.push((j % n) * np + (i % n));
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * np + i;
                let v10 = j * np + i + 1;
                let v01 = (j + 1) * np + i;
                let v11 = (j + 1) * np + i + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::with_classes(vertices, triangles, class)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    /// Scaled inward normals `n_sigma` (edge opposite the local vertex,
    /// scaled by its length) for triangle `t`.
    pub fn inward_normals(&self, t: usize) -> [Vec2; 3] {
        self.inward_normals[t]
    }

    /// Representative vertex for nodal accumulation.
    pub fn class_of(&self, v: usize) -> usize {
        self.vertex_class[v]
    }

    pub fn is_periodic(&self) -> bool {
        self.vertex_class.iter().enumerate().any(|(i, &c)| i != c)
    }

    /// Median-dual decomposition: dual areas and the per-triangle interface
    /// normals between adjacent dual cells.
    pub fn dual_cells(&self) -> Result<DualCells> {
        for (t, _) in self.triangles.iter().enumerate() {
            if !(self.areas[t] > 0.0) {
                return Err(Error::Geometry(format!("triangle {t} has nonpositive area")));
            }
        }
        let mut areas = vec![0.0; self.n_vertices()];
        let mut interface_normals = Vec::with_capacity(self.n_triangles());
        for (t, tri) in self.triangles.iter().enumerate() {
            let third = self.areas[t] / 3.0;
            for &v in tri.iter() {
                areas[self.vertex_class[v]] += third;
            }
            let n = self.inward_normals[t];
            // Median-dual interface between the dual cells of local vertices
            // i and j inside this triangle.
            interface_normals.push([
                (n[0] - n[1]) / 6.0,
                (n[1] - n[2]) / 6.0,
                (n[2] - n[0]) / 6.0,
            ]);
        }
        Ok(DualCells {
            areas,
            interface_normals,
        })
    }

    /// Vertex -> adjacent triangles, on representative vertices.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri.iter() {
                adj[self.vertex_class[v]].push(t);
            }
        }
        adj
    }

    /// Interior edges as (triangle, triangle) pairs keyed by their
    /// representative endpoints; used by jump stabilization.
    pub fn edge_triangles(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let a = self.vertex_class[tri[k]];
                let b = self.vertex_class[tri[(k + 1) % 3]];
                let key = (a.min(b), a.max(b));
                map.entry(key).or_default().push(t);
            }
        }
        map
    }
}

/// Result of the median-dual construction.
#[derive(Debug, Clone)]
pub struct DualCells {
    /// `|C_sigma|` per representative vertex.
    pub areas: Vec<f64>,
    /// Per triangle, the dual interface normals between local vertex pairs
    /// (0,1), (1,2), (2,0), oriented from the first vertex to the second.
    pub interface_normals: Vec<[Vec2; 3]>,
}

// ---------------------------------------------------------------------------
// Polygonal meshes
// ---------------------------------------------------------------------------

/// General polygonal mesh with counterclockwise cells.
#[derive(Debug, Clone)]
pub struct PolyMesh {
    pub vertices: Vec<Vec2>,
    pub cells: Vec<Vec<usize>>,
    vertex_class: Vec<usize>,
}

impl PolyMesh {
    pub fn new(vertices: Vec<Vec2>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let n = vertices.len();
        Self::with_classes(vertices, cells, (0..n).collect())
    }

    fn with_classes(
        vertices: Vec<Vec2>,
        mut cells: Vec<Vec<usize>>,
        vertex_class: Vec<usize>,
    ) -> Result<Self> {
        for (c, cell) in cells.iter_mut().enumerate() {
            if cell.len() < 3 {
                return Err(Error::MeshFormat(format!("cell {c} has fewer than 3 vertices")));
            }
            for &v in cell.iter() {
                if v >= vertices.len() {
                    return Err(Error::MeshFormat(format!(
                        "cell {c} references vertex {v} out of {}",
                        vertices.len()
                    )));
                }
            }
            let signed = shoelace(&vertices, cell);
            if signed == 0.0 {
                return Err(Error::Geometry(format!("cell {c} has zero area")));
            }
            if signed < 0.0 {
                cell.reverse();
            }
        }
        Ok(PolyMesh {
            vertices,
            cells,
            vertex_class,
        })
    }

    /// Cartesian mesh of `nx x ny` quadrilaterals over `[0,lx] x [0,ly]`.
    pub fn cartesian(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(lx > 0.0 && ly > 0.0) {
            return Err(Error::Argument("bad Cartesian mesh parameters".into()));
        }
        let (vertices, cells) = cartesian_arrays(nx, ny, lx, ly);
        let n = vertices.len();
        Self::with_classes(vertices, cells, (0..n).collect())
    }

    /// Cartesian mesh periodic in both directions (seam vertices identified).
    pub fn periodic_cartesian(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Argument("periodic Cartesian mesh needs nx, ny >= 3".into()));
        }
        let (vertices, cells) = cartesian_arrays(nx, ny, lx, ly);
        let npx = nx + 1;
        let mut class = Vec::with_capacity(vertices.len());
        for j in 0..=ny {
            for i in 0..=nx {
                class.push((j % ny) * npx + (i % nx));
            }
        }
        Self::with_classes(vertices, cells, class)
    }

    /// Cartesian mesh periodic in x only (a tube with free top and bottom).
    pub fn x_periodic_cartesian(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 {
            return Err(Error::Argument("x-periodic mesh needs nx >= 3".into()));
        }
        let (vertices, cells) = cartesian_arrays(nx, ny, lx, ly);
        let npx = nx + 1;
        let mut class = Vec::with_capacity(vertices.len());
        for j in 0..=ny {
            for i in 0..=nx {
                class.push(j * npx + (i % nx));
            }
        }
        Self::with_classes(vertices, cells, class)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn class_of(&self, v: usize) -> usize {
        self.vertex_class[v]
    }

    pub fn is_periodic(&self) -> bool {
        self.vertex_class.iter().enumerate().any(|(i, &c)| i != c)
    }

    /// Move every vertex by `dt * velocity(class)`, keeping seam copies in
    /// lockstep with their representatives.
    pub fn displace(&mut self, node_velocity: &[Vec2], dt: f64) {
        for v in 0..self.vertices.len() {
            let rep = self.vertex_class[v];
            self.vertices[v] += node_velocity[rep] * dt;
        }
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        shoelace(&self.vertices, &self.cells[c])
    }

    /// Full corner/subface geometry at the current vertex positions.
    pub fn corner_geometry(&self) -> Result<CornerGeometry> {
        CornerGeometry::build(self)
    }
}

fn cartesian_arrays(nx: usize, ny: usize, lx: f64, ly: f64) -> (Vec<Vec2>, Vec<Vec<usize>>) {
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;
    let npx = nx + 1;
    let mut vertices = Vec::with_capacity(npx * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec2::new(i as f64 * hx, j as f64 * hy));
        }
    }
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![
                j * npx + i,
                j * npx + i + 1,
                (j + 1) * npx + i + 1,
                (j + 1) * npx + i,
            ]);
        }
    }
    (vertices, cells)
}

fn shoelace(vertices: &[Vec2], cell: &[usize]) -> f64 {
    let mut a = 0.0;
    for k in 0..cell.len() {
        let p = vertices[cell[k]];
        let q = vertices[cell[(k + 1) % cell.len()]];
        a += 0.5 * p.cross_z(q);
    }
    a
}

/// One half-face: the segment between a vertex and an adjacent face midpoint.
#[derive(Debug, Clone, Copy)]
pub struct Subface {
    pub length: f64,
    /// Unit normal, outward with respect to the owning cell.
    pub normal: Vec2,
    /// The mesh face this half-face belongs to, keyed by representative
    /// endpoints (min, max).
    pub face: (usize, usize),
}

/// One corner `(p, c)`: a vertex of a cell together with its two half-faces
/// and the scaled corner normal `l_pc n_pc`.
#[derive(Debug, Clone, Copy)]
pub struct Corner {
    /// Representative vertex id.
    pub node: usize,
    /// Scaled corner normal, the gradient of the cell volume with respect to
    /// the vertex position.
    pub normal: Vec2,
    /// Half-faces toward the previous and next vertex of the cell.
    pub subfaces: [Subface; 2],
}

/// Face adjacency: owner traverses the face in CCW order, the neighbour (if
/// any) traverses it the other way.
#[derive(Debug, Clone, Copy)]
pub struct FaceInfo {
    pub owner: usize,
    pub neighbor: Option<usize>,
    /// Unit normal pointing out of the owner.
    pub normal: Vec2,
    pub length: f64,
    /// Geometric endpoints (owner's local orientation p -> q).
    pub p: usize,
    pub q: usize,
}

/// Derived geometry of a [`PolyMesh`]: volumes, corners, faces and node fans.
#[derive(Debug, Clone)]
pub struct CornerGeometry {
    pub volumes: Vec<f64>,
    /// Per cell, one entry per vertex in CCW order.
    pub corners: Vec<Vec<Corner>>,
    /// Faces keyed by representative endpoints.
    pub faces: BTreeMap<(usize, usize), FaceInfo>,
    /// Per representative node: list of (cell, local corner index).
    pub node_corners: Vec<Vec<(usize, usize)>>,
}

impl CornerGeometry {
    fn build(mesh: &PolyMesh) -> Result<Self> {
        let mut volumes = Vec::with_capacity(mesh.n_cells());
        let mut corners = Vec::with_capacity(mesh.n_cells());
        let mut faces: BTreeMap<(usize, usize), FaceInfo> = BTreeMap::new();
        let mut node_corners = vec![Vec::new(); mesh.n_vertices()];

        for (c, cell) in mesh.cells.iter().enumerate() {
            let vol = shoelace(&mesh.vertices, cell);
            if !(vol > 0.0) {
                return Err(Error::Geometry(format!("cell {c} has nonpositive volume {vol}")));
            }
            volumes.push(vol);
            let m = cell.len();
            let mut cell_corners = Vec::with_capacity(m);
            for k in 0..m {
                let prev = cell[(k + m - 1) % m];
                let cur = cell[k];
                let next = cell[(k + 1) % m];
                let xp = mesh.vertices[prev];
                let xc = mesh.vertices[cur];
                let xn = mesh.vertices[next];

                let half = |a: Vec2, b: Vec2, o: (usize, usize)| -> Result<Subface> {
                    let edge = b - a;
                    let len = edge.norm();
                    if len == 0.0 {
                        return Err(Error::Geometry(format!(
                            "cell {c} has a zero-length edge at vertex {cur}"
                        )));
                    }
                    Ok(Subface {
                        length: 0.5 * len,
                        // outward of a CCW cell: edge direction turned clockwise
                        normal: edge.cross_ez() / len,
                        face: (
                            mesh.class_of(o.0).min(mesh.class_of(o.1)),
                            mesh.class_of(o.0).max(mesh.class_of(o.1)),
                        ),
                    })
                };
                let sf_prev = half(xp, xc, (prev, cur))?;
                let sf_next = half(xc, xn, (cur, next))?;
                let normal = (xn - xp).cross_ez() * 0.5;
                cell_corners.push(Corner {
                    node: mesh.class_of(cur),
                    normal,
                    subfaces: [sf_prev, sf_next],
                });
                node_corners[mesh.class_of(cur)].push((c, k));
            }
            // register faces, owner first
            for k in 0..m {
                let a = cell[k];
                let b = cell[(k + 1) % m];
                let ra = mesh.class_of(a);
                let rb = mesh.class_of(b);
                let key = (ra.min(rb), ra.max(rb));
                let edge = mesh.vertices[b] - mesh.vertices[a];
                let len = edge.norm();
                match faces.get_mut(&key) {
                    None => {
                        faces.insert(
                            key,
                            FaceInfo {
                                owner: c,
                                neighbor: None,
                                normal: edge.cross_ez() / len,
                                length: len,
                                p: ra,
                                q: rb,
                            },
                        );
                    }
                    Some(f) => {
                        if f.neighbor.is_some() {
                            return Err(Error::MeshFormat(format!(
                                "face ({ra}, {rb}) is shared by more than two cells"
                            )));
                        }
                        f.neighbor = Some(c);
                    }
                }
            }
            corners.push(cell_corners);
        }

        Ok(CornerGeometry {
            volumes,
            corners,
            faces,
            node_corners,
        })
    }

    /// Representative nodes that belong to at least one boundary face.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut flags = vec![false; self.node_corners.len()];
        for f in self.faces.values() {
            if f.neighbor.is_none() {
                flags[f.p] = true;
                flags[f.q] = true;
            }
        }
        flags
            .iter()
            .enumerate()
            .filter_map(|(v, &b)| b.then_some(v))
            .collect()
    }

    /// Cells around `node`, sorted counterclockwise by centroid direction.
    pub fn fan(&self, mesh: &PolyMesh, node: usize) -> Vec<(usize, usize)> {
        let mut fan = self.node_corners[node].clone();
        // Any coordinate copy of the node works as the angle origin; seam
        // copies only differ by a lattice translation shared with their cells.
        let mut items: Vec<(f64, (usize, usize))> = fan
            .drain(..)
            .map(|(c, k)| {
                let cell = &mesh.cells[c];
                let xp = mesh.vertices[cell[k]];
                let centroid = cell
                    .iter()
                    .fold(Vec2::ZERO, |s, &v| s + mesh.vertices[v])
                    / cell.len() as f64;
                let d = centroid - xp;
                (d.y.atan2(d.x), (c, k))
            })
            .collect();
        items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        items.into_iter().map(|(_, ck)| ck).collect()
    }
}
