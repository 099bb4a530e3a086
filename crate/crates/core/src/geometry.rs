//! Computational domains, triangular meshes and the measures |Ω| and |∂Ω|.
//!
//! Built-in domains carry closed-form measures. Two-dimensional domains can be
//! triangulated; disks and annuli use concentric node rings joined by
//! triangulated bands, rectangles a structured grid. Boundary edges are
//! directed so that the outward normal is the right-hand normal of each edge:
//! outer loops run counterclockwise, inner (hole) loops clockwise.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible resolution: h = {h} for a domain of diameter {diameter}")]
    InfeasibleResolution { h: f64, diameter: f64 },
    #[error("unsupported domain: {0}")]
    Unsupported(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh invariant violated: {0}")]
    InvariantViolation(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// Surface measure of the unit sphere S^{n-1}, equal to n ω_n.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    Ball { radius: f64 },
    Rectangle { width: f64, height: f64 },
    Annulus { inner: f64, outer: f64 },
    ExternalMesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub dim: usize,
    pub volume: Option<f64>,
    pub boundary_measure: Option<f64>,
}

impl Domain {
    pub fn ball(dim: usize, radius: f64) -> Result<Self, GeometryError> {
        make_domain(DomainKind::Ball { radius }, dim)
    }

    pub fn disk(radius: f64) -> Result<Self, GeometryError> {
        Self::ball(2, radius)
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self, GeometryError> {
        make_domain(DomainKind::Rectangle { width, height }, 2)
    }

    pub fn annulus(inner: f64, outer: f64) -> Result<Self, GeometryError> {
        make_domain(DomainKind::Annulus { inner, outer }, 2)
    }

    /// A domain whose measures are those of a given triangulation.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        Domain {
            kind: DomainKind::ExternalMesh,
            dim: 2,
            volume: Some(mesh.volume()),
            boundary_measure: Some(mesh.boundary_measure()),
        }
    }

    pub fn diameter(&self) -> Option<f64> {
        match self.kind {
            DomainKind::Ball { radius } => Some(2.0 * radius),
            DomainKind::Rectangle { width, height } => Some(width.hypot(height)),
            DomainKind::Annulus { outer, .. } => Some(2.0 * outer),
            DomainKind::ExternalMesh => None,
        }
    }

    /// |Ω| / |∂Ω| when both measures are known.
    pub fn volume_to_boundary(&self) -> Option<f64> {
        Some(self.volume? / self.boundary_measure?)
    }
}

fn positive(name: &str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Builds a domain and fills in the closed-form measures of the built-in kinds.
pub fn make_domain(kind: DomainKind, dim: usize) -> Result<Domain, GeometryError> {
    if dim < 2 {
        return Err(GeometryError::InvalidParameter(format!(
            "dimension must be at least 2, got {dim}"
        )));
    }
    let (volume, boundary) = match kind {
        DomainKind::Ball { radius } => {
            positive("radius", radius)?;
            let omega = unit_ball_volume(dim);
            (
                omega * radius.powi(dim as i32),
                dim as f64 * omega * radius.powi(dim as i32 - 1),
            )
        }
        DomainKind::Rectangle { width, height } => {
            positive("width", width)?;
            positive("height", height)?;
            if dim != 2 {
                return Err(GeometryError::Unsupported(
                    "rectangles are two-dimensional".into(),
                ));
            }
            (width * height, 2.0 * (width + height))
        }
        DomainKind::Annulus { inner, outer } => {
            positive("inner radius", inner)?;
            positive("outer radius", outer)?;
            if inner >= outer {
                return Err(GeometryError::InvalidParameter(format!(
                    "annulus needs inner < outer, got {inner} >= {outer}"
                )));
            }
            if dim != 2 {
                return Err(GeometryError::Unsupported(
                    "annuli are two-dimensional".into(),
                ));
            }
            (
                PI * (outer * outer - inner * inner),
                2.0 * PI * (outer + inner),
            )
        }
        DomainKind::ExternalMesh => {
            return Err(GeometryError::Unsupported(
                "external meshes are built with Domain::from_mesh".into(),
            ))
        }
    };
    Ok(Domain {
        kind,
        dim,
        volume: Some(volume),
        boundary_measure: Some(boundary),
    })
}

/// A conforming triangulation of a planar domain.
///
/// Triangles are stored counterclockwise. Boundary edges are directed and
/// agree with the orientation of the unique triangle that owns them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    areas: Vec<f64>,
    edge_lengths: Vec<f64>,
    loops: usize,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn undirected(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Mesh {
    /// Validates and normalizes a triangulation.
    ///
    /// Clockwise triangles are flipped, boundary edges are re-directed to
    /// match their owning triangle. Zero-area triangles, boundary edges not
    /// owned by exactly one triangle, and unclosed boundary loops are errors.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        mut boundary_edges: Vec<[usize; 2]>,
    ) -> Result<Self, GeometryError> {
        let n = nodes.len();
        if nodes.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(GeometryError::InvariantViolation(
                "non-finite node coordinate".into(),
            ));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(GeometryError::InvariantViolation(format!(
                    "triangle {t} references a node outside 0..{n}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(GeometryError::InvariantViolation(format!(
                    "triangle {t} repeats a node"
                )));
            }
        }
        for (e, edge) in boundary_edges.iter().enumerate() {
            if edge.iter().any(|&v| v >= n) || edge[0] == edge[1] {
                return Err(GeometryError::InvariantViolation(format!(
                    "boundary edge {e} is not a valid node pair"
                )));
            }
        }

        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            let mut area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area < 0.0 {
                tri.swap(1, 2);
                area = -area;
            }
            if area <= 0.0 {
                return Err(GeometryError::InvariantViolation(format!(
                    "triangle {t} has zero area"
                )));
            }
            areas.push(area);
        }

        // undirected edge -> (owning triangle count, direction in the last owner)
        let mut owners: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                let entry = owners.entry(undirected(i, j)).or_insert((0, [i, j]));
                entry.0 += 1;
                entry.1 = [i, j];
            }
        }
        let mut listed = HashMap::new();
        for (e, edge) in boundary_edges.iter_mut().enumerate() {
            let key = undirected(edge[0], edge[1]);
            match owners.get(&key) {
                Some(&(1, dir)) => *edge = dir,
                Some(&(count, _)) => {
                    return Err(GeometryError::InvariantViolation(format!(
                        "boundary edge {e} ({}, {}) belongs to {count} triangles",
                        edge[0], edge[1]
                    )))
                }
                None => {
                    return Err(GeometryError::InvariantViolation(format!(
                        "boundary edge {e} ({}, {}) is dangling",
                        edge[0], edge[1]
                    )))
                }
            }
            if listed.insert(key, e).is_some() {
                return Err(GeometryError::InvariantViolation(format!(
                    "boundary edge {e} is listed twice"
                )));
            }
        }
        if let Some((key, _)) = owners
            .iter()
            .find(|(key, (count, _))| *count == 1 && !listed.contains_key(*key))
        {
            return Err(GeometryError::InvariantViolation(format!(
                "edge ({}, {}) lies on the boundary but is not listed",
                key.0, key.1
            )));
        }

        let loops = count_loops(n, &boundary_edges)?;
        let edge_lengths: Vec<f64> = boundary_edges
            .iter()
            .map(|&[i, j]| {
                let (a, b) = (nodes[i], nodes[j]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .collect();
        let volume: f64 = areas.iter().sum();
        let boundary: f64 = edge_lengths.iter().sum();
        if !(volume > 0.0) || !(boundary > 0.0) {
            return Err(GeometryError::InvariantViolation(
                "mesh needs positive area and positive boundary length".into(),
            ));
        }
        Ok(Mesh {
            nodes,
            triangles,
            boundary_edges,
            areas,
            edge_lengths,
            loops,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn boundary_loops(&self) -> usize {
        self.loops
    }

    pub fn volume(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.edge_lengths.iter().sum()
    }

    /// Marks the nodes that lie on a boundary edge.
    pub fn boundary_nodes(&self) -> Vec<bool> {
        let mut on = vec![false; self.nodes.len()];
        for &[i, j] in &self.boundary_edges {
            on[i] = true;
            on[j] = true;
        }
        on
    }

    /// Area of the axis-aligned bounding box.
    pub fn bounding_box_area(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi[0] - lo[0]) * (hi[1] - lo[1])
    }

    /// Canonical text form: header, nodes, triangles, directed boundary edges.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            self.nodes.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for p in &self.nodes {
            let _ = writeln!(out, "{} {}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(out, "{} {}", e[0], e[1]);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut last_line = 0;
        let mut next = |what: &str| -> Result<(usize, Vec<&str>), GeometryError> {
            match lines.next() {
                Some((k, l)) => {
                    last_line = k;
                    Ok((k, l.split_whitespace().collect()))
                }
                None => Err(GeometryError::Parse {
                    line: last_line + 1,
                    message: format!("unexpected end of file, expected {what}"),
                }),
            }
        };

        let (line, header) = next("header")?;
        let counts = parse_fields::<usize>(line, &header, 3, "header")?;
        let (n_nodes, n_tri, n_edges) = (counts[0], counts[1], counts[2]);

        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (line, fields) = next("node")?;
            let xy = parse_fields::<f64>(line, &fields, 2, "node")?;
            nodes.push([xy[0], xy[1]]);
        }
        let mut triangles = Vec::with_capacity(n_tri);
        for _ in 0..n_tri {
            let (line, fields) = next("triangle")?;
            let t = parse_fields::<usize>(line, &fields, 3, "triangle")?;
            check_indices(line, &t, n_nodes)?;
            triangles.push([t[0], t[1], t[2]]);
        }
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let (line, fields) = next("boundary edge")?;
            let e = parse_fields::<usize>(line, &fields, 2, "boundary edge")?;
            check_indices(line, &e, n_nodes)?;
            edges.push([e[0], e[1]]);
        }
        if let Ok((line, _)) = next("") {
            return Err(GeometryError::Parse {
                line,
                message: "trailing content after the declared records".into(),
            });
        }
        Mesh::new(nodes, triangles, edges)
    }
}

fn parse_fields<T: std::str::FromStr>(
    line: usize,
    fields: &[&str],
    expected: usize,
    what: &str,
) -> Result<Vec<T>, GeometryError> {
    if fields.len() != expected {
        return Err(GeometryError::Parse {
            line,
            message: format!("{what} needs {expected} fields, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<T>().map_err(|_| GeometryError::Parse {
                line,
                message: format!("cannot parse {what} field {f:?}"),
            })
        })
        .collect()
}

fn check_indices(line: usize, idx: &[usize], n: usize) -> Result<(), GeometryError> {
    match idx.iter().find(|&&i| i >= n) {
        Some(i) => Err(GeometryError::Parse {
            line,
            message: format!("node index {i} out of range (mesh has {n} nodes)"),
        }),
        None => Ok(()),
    }
}

fn count_loops(n: usize, edges: &[[usize; 2]]) -> Result<usize, GeometryError> {
    let mut next = vec![usize::MAX; n];
    let mut incoming = vec![0usize; n];
    for &[i, j] in edges {
        if next[i] != usize::MAX {
            return Err(GeometryError::InvariantViolation(format!(
                "boundary node {i} has two outgoing boundary edges"
            )));
        }
        next[i] = j;
        incoming[j] += 1;
    }
    for &[i, _] in edges {
        if incoming[i] != 1 {
            return Err(GeometryError::InvariantViolation(format!(
                "boundary node {i} does not close a loop"
            )));
        }
    }
    let mut seen = vec![false; n];
    let mut loops = 0;
    for &[start, _] in edges {
        if seen[start] {
            continue;
        }
        loops += 1;
        let mut v = start;
        while !seen[v] {
            seen[v] = true;
            v = next[v];
        }
    }
    Ok(loops)
}

/// Returns (|Ω|, |∂Ω|) of a mesh: summed triangle areas and edge lengths.
pub fn mesh_measures(mesh: &Mesh) -> (f64, f64) {
    (mesh.volume(), mesh.boundary_measure())
}

pub fn load_mesh(path: &Path) -> Result<Mesh, GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Mesh::parse(&text)
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), GeometryError> {
    std::fs::write(path, mesh.to_text()).map_err(|source| GeometryError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Triangulates a built-in planar domain with target edge length `h`.
pub fn triangulate(domain: &Domain, h: f64) -> Result<Mesh, GeometryError> {
    let diameter = match domain.diameter() {
        Some(d) => d,
        None => {
            return Err(GeometryError::Unsupported(
                "external meshes are already triangulated".into(),
            ))
        }
    };
    if !(h > 0.0) || !h.is_finite() || h >= diameter {
        return Err(GeometryError::InfeasibleResolution { h, diameter });
    }
    match domain.kind {
        DomainKind::Ball { radius } if domain.dim == 2 => Ok(ring_mesh(0.0, radius, h)),
        DomainKind::Ball { .. } => Err(GeometryError::Unsupported(format!(
            "only disks can be meshed, got a ball in dimension {}",
            domain.dim
        ))),
        DomainKind::Annulus { inner, outer } => Ok(ring_mesh(inner, outer, h)),
        DomainKind::Rectangle { width, height } => Ok(grid_mesh(width, height, h)),
        DomainKind::ExternalMesh => unreachable!("no diameter for external meshes"),
    }
}

fn ring_count(radius: f64, h: f64) -> usize {
    ((2.0 * PI * radius / h).ceil() as usize).max(6)
}

/// Disk (inner = 0) or annulus built from concentric rings, ring-major and
/// angle-minor node order.
fn ring_mesh(inner: f64, outer: f64, h: f64) -> Mesh {
    let bands = ((outer - inner) / h).ceil().max(1.0) as usize;
    let mut nodes = Vec::new();
    let mut rings: Vec<(usize, usize)> = Vec::with_capacity(bands + 1);
    for k in 0..=bands {
        let r = inner + (outer - inner) * k as f64 / bands as f64;
        if k == 0 && inner == 0.0 {
            rings.push((nodes.len(), 1));
            nodes.push([0.0, 0.0]);
            continue;
        }
        let count = ring_count(r, h);
        rings.push((nodes.len(), count));
        for j in 0..count {
            let theta = 2.0 * PI * j as f64 / count as f64;
            nodes.push([r * theta.cos(), r * theta.sin()]);
        }
    }

    let mut triangles = Vec::new();
    for k in 1..=bands {
        let (a0, na) = rings[k - 1];
        let (b0, nb) = rings[k];
        if na == 1 {
            for j in 0..nb {
                triangles.push([a0, b0 + j, b0 + (j + 1) % nb]);
            }
            continue;
        }
        // merge the two rings by angle
        let (mut i, mut j) = (0, 0);
        while i < na || j < nb {
            let next_a = (i + 1) as f64 / na as f64;
            let next_b = (j + 1) as f64 / nb as f64;
            if j == nb || (i < na && next_a <= next_b) {
                triangles.push([a0 + i, b0 + j % nb, a0 + (i + 1) % na]);
                i += 1;
            } else {
                triangles.push([a0 + i % na, b0 + j, b0 + (j + 1) % nb]);
                j += 1;
            }
        }
    }

    let mut edges = Vec::new();
    let (o0, no) = rings[bands];
    for j in 0..no {
        edges.push([o0 + j, o0 + (j + 1) % no]);
    }
    if inner > 0.0 {
        let (i0, ni) = rings[0];
        for j in 0..ni {
            edges.push([i0 + (j + 1) % ni, i0 + j]);
        }
    }
    Mesh::new(nodes, triangles, edges).expect("ring mesh is valid by construction")
}

/// Structured mesh of [0, width] x [0, height], each cell split along its diagonal.
fn grid_mesh(width: f64, height: f64, h: f64) -> Mesh {
    let nx = (width / h).ceil().max(1.0) as usize;
    let ny = (height / h).ceil().max(1.0) as usize;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny {
            height
        } else {
            height * j as f64 / ny as f64
        };
        for i in 0..=nx {
            let x = if i == nx {
                width
            } else {
                width * i as f64 / nx as f64
            };
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut edges = Vec::with_capacity(2 * (nx + ny));
    edges.extend((0..nx).map(|i| [id(i, 0), id(i + 1, 0)]));
    edges.extend((0..ny).map(|j| [id(nx, j), id(nx, j + 1)]));
    edges.extend((0..nx).rev().map(|i| [id(i + 1, ny), id(i, ny)]));
    edges.extend((0..ny).rev().map(|j| [id(0, j + 1), id(0, j)]));
    Mesh::new(nodes, triangles, edges).expect("grid mesh is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ball_measures() {
        let d = Domain::ball(2, 1.0).unwrap();
        assert!(close(d.volume.unwrap(), PI, 1e-15));
        assert!(close(d.boundary_measure.unwrap(), 2.0 * PI, 1e-15));
        assert!(close(d.volume_to_boundary().unwrap(), 0.5, 1e-15));

        let d = Domain::ball(3, 1.0).unwrap();
        assert!(close(d.volume.unwrap(), 4.0 * PI / 3.0, 1e-14));
        assert!(close(d.boundary_measure.unwrap(), 4.0 * PI, 1e-14));
        assert!(close(d.volume_to_boundary().unwrap(), 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn degenerate_parameters_are_rejected() {
        assert!(matches!(
            Domain::ball(2, 0.0),
            Err(GeometryError::InvalidParameter(_))
        ));
        assert!(matches!(
            Domain::annulus(1.0, 1.0),
            Err(GeometryError::InvalidParameter(_))
        ));
        assert!(matches!(
            Domain::annulus(1.5, 1.0),
            Err(GeometryError::InvalidParameter(_))
        ));
        assert!(matches!(
            Domain::rectangle(1.0, -2.0),
            Err(GeometryError::InvalidParameter(_))
        ));
        assert!(Domain::ball(1, 1.0).is_err());
    }

    #[test]
    fn single_triangle_measures() {
        let mesh = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![[0, 1], [1, 2], [2, 0]],
        )
        .unwrap();
        let (v, b) = mesh_measures(&mesh);
        assert!(close(v, 0.5, 1e-15));
        assert!(close(b, 2.0 + 2f64.sqrt(), 1e-15));
        assert_eq!(mesh.boundary_loops(), 1);
    }

    #[test]
    fn clockwise_input_is_normalized() {
        let mesh = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            vec![[1, 0], [2, 1], [0, 2]],
        )
        .unwrap();
        assert_eq!(mesh.triangles()[0], [0, 1, 2]);
        assert!(mesh.boundary_edges().contains(&[0, 1]));
    }

    #[test]
    fn invariant_violations() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        // missing boundary edge
        let err = Mesh::new(nodes.clone(), vec![[0, 1, 2]], vec![[0, 1], [1, 2]]).unwrap_err();
        assert!(matches!(err, GeometryError::InvariantViolation(_)));
        // interior edge listed as boundary
        let err = Mesh::new(
            nodes.clone(),
            vec![[0, 1, 3], [0, 3, 2]],
            vec![[0, 1], [1, 3], [3, 2], [2, 0], [0, 3]],
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::InvariantViolation(_)));
        // zero area
        let err = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            vec![[0, 1], [1, 2], [2, 0]],
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::InvariantViolation(_)));
    }

    #[test]
    fn unit_square_is_exact() {
        let mesh = triangulate(&Domain::rectangle(1.0, 1.0).unwrap(), 0.1).unwrap();
        let (v, b) = mesh_measures(&mesh);
        assert!(close(v, 1.0, 1e-12));
        assert!(close(b, 4.0, 1e-12));
        assert_eq!(mesh.boundary_loops(), 1);
    }

    #[test]
    fn disk_area_close_to_pi() {
        let mesh = triangulate(&Domain::disk(1.0).unwrap(), 0.05).unwrap();
        assert!((mesh.volume() - PI).abs() / PI < 5e-3);
        assert_eq!(mesh.boundary_loops(), 1);
        let mesh = triangulate(&Domain::disk(1.0).unwrap(), 0.02).unwrap();
        assert!((mesh.volume() - PI).abs() / PI < 1e-3);
        assert!((mesh.boundary_measure() - 2.0 * PI).abs() / (2.0 * PI) < 1e-3);
    }

    #[test]
    fn annulus_has_two_loops() {
        let mesh = triangulate(&Domain::annulus(0.5, 1.0).unwrap(), 0.05).unwrap();
        assert_eq!(mesh.boundary_loops(), 2);
        let exact = PI * (1.0 - 0.25);
        assert!((mesh.volume() - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn boundary_nodes_have_two_edges() {
        for domain in [
            Domain::disk(1.0).unwrap(),
            Domain::annulus(0.3, 1.0).unwrap(),
            Domain::rectangle(2.0, 0.5).unwrap(),
        ] {
            let mesh = triangulate(&domain, 0.1).unwrap();
            let mut degree = vec![0; mesh.num_nodes()];
            for &[i, j] in mesh.boundary_edges() {
                degree[i] += 1;
                degree[j] += 1;
            }
            assert!(degree.iter().all(|&d| d == 0 || d == 2));
        }
    }

    #[test]
    fn resolution_checks() {
        let disk = Domain::disk(1.0).unwrap();
        assert!(matches!(
            triangulate(&disk, 2.5),
            Err(GeometryError::InfeasibleResolution { .. })
        ));
        assert!(triangulate(&disk, 0.0).is_err());
        assert!(matches!(
            triangulate(&Domain::ball(3, 1.0).unwrap(), 0.1),
            Err(GeometryError::Unsupported(_))
        ));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "# tiny\n3 1 3\n0 0\n1 0\n0 1\n0 1 7\n0 1\n1 2\n2 0\n";
        match Mesh::parse(text) {
            Err(GeometryError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0 1\n1 2\n";
        assert!(matches!(
            Mesh::parse(text),
            Err(GeometryError::Parse { line: 8, .. })
        ));
        let ok = "3 1 3\n0 0\n1 0\n# comment\n0 1\n0 1 2\n0 1\n1 2\n2 0\n";
        let mesh = Mesh::parse(ok).unwrap();
        assert_eq!(mesh.triangles().len(), 1);
    }
}
