//! Triangulated 2D domains: construction, topology, text IO and the boundary
//! distance field.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    UnitSquare,
    /// Unit disc centred at the origin.
    Disc,
    /// Annulus `0.5 < |x| < 1`; marker 0 on the outer circle, 1 on the inner.
    Annulus,
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-square" | "square" => Ok(Domain::UnitSquare),
            "disc" | "disk" => Ok(Domain::Disc),
            "annulus" => Ok(Domain::Annulus),
            other => Err(Error::Usage(format!("unknown domain '{other}'"))),
        }
    }
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::UnitSquare => "unit-square",
            Domain::Disc => "disc",
            Domain::Annulus => "annulus",
        }
    }
}

/// A boundary edge oriented as in its (counter-clockwise) owning triangle, so
/// that the domain lies to the left of `a -> b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub normal: Point,
    pub marker: u32,
    pub length: f64,
    /// Index into [`Mesh::edges`].
    pub edge: usize,
    pub triangle: usize,
}

impl BoundaryEdge {
    pub fn tangent(&self) -> Point {
        [-self.normal[1], self.normal[0]]
    }
}

/// Per-triangle affine data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriGeom {
    pub area: f64,
    /// Constant gradients of the three barycentric coordinates.
    pub grad_bary: [Point; 3],
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub h_max: f64,
    /// Unique edges as sorted node pairs.
    pub edges: Vec<[usize; 2]>,
    /// Edges of each triangle in local order `(0,1), (1,2), (2,0)`.
    pub tri_edges: Vec<[usize; 3]>,
    pub geom: Vec<TriGeom>,
    on_boundary: Vec<bool>,
    /// For each node on the boundary: (incoming edge, outgoing edge) indices into `boundary`.
    node_edges: Vec<Option<(usize, usize)>>,
    edge_is_boundary: Vec<bool>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds a mesh from raw arrays. Triangles must be counter-clockwise with
    /// positive area. `markers` optionally assigns a component marker to each
    /// boundary edge (keyed by its unordered node pair); missing ones get 0.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        markers: Option<&HashMap<[usize; 2], u32>>,
    ) -> Result<Mesh> {
        let nn = nodes.len();
        if triangles.is_empty() {
            return Err(Error::Structure("mesh has no triangles".into()));
        }
        let mut geom = Vec::with_capacity(triangles.len());
        let mut h_max: f64 = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nn) {
                return Err(Error::Structure(format!("triangle {t} references a missing node")));
            }
            let [a, b, c] = tri.map(|i| nodes[i]);
            let area = signed_area(a, b, c);
            if !(area > 0.0) {
                return Err(Error::Structure(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
            h_max = h_max.max(dist(a, b)).max(dist(b, c)).max(dist(c, a));
            let pts = [a, b, c];
            let mut grad_bary = [[0.0; 2]; 3];
            for i in 0..3 {
                let p = pts[(i + 1) % 3];
                let q = pts[(i + 2) % 3];
                // gradient of λ_i is the inward normal of the opposite side over twice the area
                grad_bary[i] = [(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)];
            }
            geom.push(TriGeom { area, grad_bary });
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut owners: Vec<Vec<(usize, usize, usize)>> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    owners.push(Vec::new());
                    edges.len() - 1
                });
                owners[id].push((t, a, b));
                te[k] = id;
            }
            tri_edges.push(te);
        }

        let mut boundary = Vec::new();
        let mut edge_is_boundary = vec![false; edges.len()];
        for (id, own) in owners.iter().enumerate() {
            match own.len() {
                1 => {
                    let (t, a, b) = own[0];
                    let (pa, pb) = (nodes[a], nodes[b]);
                    let length = dist(pa, pb);
                    let normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
                    let marker = markers.and_then(|m| m.get(&edges[id]).copied()).unwrap_or(0);
                    edge_is_boundary[id] = true;
                    boundary.push(BoundaryEdge { a, b, normal, marker, length, edge: id, triangle: t });
                }
                2 => {
                    let (_, a0, b0) = own[0];
                    let (_, a1, b1) = own[1];
                    if !(a0 == b1 && b0 == a1) {
                        return Err(Error::Structure(format!(
                            "edge {:?} is traversed twice in the same direction",
                            edges[id]
                        )));
                    }
                }
                n => {
                    return Err(Error::Structure(format!(
                        "edge {:?} is shared by {n} triangles",
                        edges[id]
                    )))
                }
            }
        }
        if let Some(m) = markers {
            for key in m.keys() {
                match edge_index.get(key) {
                    Some(&id) if edge_is_boundary[id] => {}
                    _ => {
                        return Err(Error::Structure(format!(
                            "listed boundary edge {key:?} is not a boundary edge of the triangulation"
                        )))
                    }
                }
            }
        }

        let mut on_boundary = vec![false; nn];
        let mut incoming: Vec<Option<usize>> = vec![None; nn];
        let mut outgoing: Vec<Option<usize>> = vec![None; nn];
        for (k, e) in boundary.iter().enumerate() {
            on_boundary[e.a] = true;
            on_boundary[e.b] = true;
            if outgoing[e.a].replace(k).is_some() || incoming[e.b].replace(k).is_some() {
                return Err(Error::Structure(format!(
                    "boundary is not a union of simple closed curves near nodes {} / {}",
                    e.a, e.b
                )));
            }
        }
        let node_edges = (0..nn)
            .map(|i| match (incoming[i], outgoing[i]) {
                (Some(a), Some(b)) => Ok(Some((a, b))),
                (None, None) => Ok(None),
                _ => Err(Error::Structure(format!("boundary node {i} is an open end"))),
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Mesh {
            nodes,
            triangles,
            boundary,
            h_max,
            edges,
            tri_edges,
            geom,
            on_boundary,
            node_edges,
            edge_is_boundary,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of scalar P2 nodes (vertices followed by edge midpoints).
    pub fn n_p2(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.on_boundary[i]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_is_boundary[e]
    }

    /// Incoming and outgoing boundary edges (indices into `boundary`) at a boundary node.
    pub fn boundary_neighbours(&self, i: usize) -> Option<(usize, usize)> {
        self.node_edges[i]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.on_boundary[i]).collect()
    }

    /// Whether scalar P2 node `k` (vertex or edge midpoint) lies on the boundary.
    pub fn is_boundary_p2(&self, k: usize) -> bool {
        let nn = self.nodes.len();
        if k < nn {
            self.on_boundary[k]
        } else {
            self.edge_is_boundary[k - nn]
        }
    }

    pub fn p2_point(&self, k: usize) -> Point {
        let nn = self.nodes.len();
        if k < nn {
            self.nodes[k]
        } else {
            let [a, b] = self.edges[k - nn];
            midpoint(self.nodes[a], self.nodes[b])
        }
    }

    /// Scalar P2 node indices of triangle `t` in local order.
    pub fn p2_dofs(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.triangles[t];
        let nn = self.nodes.len();
        let [e0, e1, e2] = self.tri_edges[t];
        [a, b, c, nn + e0, nn + e1, nn + e2]
    }

    pub fn area(&self) -> f64 {
        self.geom.iter().map(|g| g.area).sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary.iter().map(|e| e.length).sum()
    }

    pub fn markers(&self) -> Vec<u32> {
        let mut m: Vec<u32> = self.boundary.iter().map(|e| e.marker).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// Physical coordinates of a point given in barycentric coordinates of triangle `t`.
    pub fn map_point(&self, t: usize, bary: [f64; 3]) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        [
            bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
            bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
        ]
    }

    pub fn centroid(&self) -> Point {
        let mut c = [0.0, 0.0];
        let mut w = 0.0;
        for (t, g) in self.geom.iter().enumerate() {
            let x = self.map_point(t, [1.0 / 3.0; 3]);
            c[0] += g.area * x[0];
            c[1] += g.area * x[1];
            w += g.area;
        }
        [c[0] / w, c[1] / w]
    }

    /// Writes the text format: `NODES`, `TRIANGLES`, `BOUNDARY` sections, 0-based.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "NODES {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{i} {:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(s, "TRIANGLES {}", self.triangles.len());
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "BOUNDARY {}", self.boundary.len());
        for (i, e) in self.boundary.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {} {}", e.a, e.b, e.marker);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        fn header<'a>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            name: &str,
        ) -> Result<usize> {
            let (ln, l) = lines
                .next()
                .ok_or(Error::Parse { line: 0, msg: format!("missing {name} header") })?;
            let mut it = l.split_whitespace();
            if it.next() != Some(name) {
                return Err(Error::Parse { line: ln, msg: format!("expected '{name} <count>'") });
            }
            it.next()
                .and_then(|c| c.parse().ok())
                .ok_or(Error::Parse { line: ln, msg: format!("bad {name} count") })
        }
        fn record<'a, T: FromStr>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            expect_id: usize,
            fields: usize,
        ) -> Result<(usize, Vec<T>)> {
            let (ln, l) = lines
                .next()
                .ok_or(Error::Parse { line: 0, msg: "unexpected end of file".into() })?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != fields + 1 {
                return Err(Error::Parse { line: ln, msg: format!("expected {} fields", fields + 1) });
            }
            let id: usize =
                tok[0].parse().map_err(|_| Error::Parse { line: ln, msg: "bad record id".into() })?;
            if id != expect_id {
                return Err(Error::Parse { line: ln, msg: format!("expected id {expect_id}, got {id}") });
            }
            let vals = tok[1..]
                .iter()
                .map(|t| t.parse::<T>().map_err(|_| Error::Parse { line: ln, msg: format!("bad value '{t}'") }))
                .collect::<Result<Vec<T>>>()?;
            Ok((ln, vals))
        }

        let nn = header(&mut lines, "NODES")?;
        let mut nodes = Vec::with_capacity(nn);
        for i in 0..nn {
            let (_, v) = record::<f64>(&mut lines, i, 2)?;
            nodes.push([v[0], v[1]]);
        }
        let nt = header(&mut lines, "TRIANGLES")?;
        let mut triangles = Vec::with_capacity(nt);
        for i in 0..nt {
            let (ln, v) = record::<usize>(&mut lines, i, 3)?;
            if v.iter().any(|&k| k >= nn) {
                return Err(Error::Parse { line: ln, msg: "node index out of range".into() });
            }
            triangles.push([v[0], v[1], v[2]]);
        }
        let nb = header(&mut lines, "BOUNDARY")?;
        let mut markers = HashMap::new();
        for i in 0..nb {
            let (_, v) = record::<usize>(&mut lines, i, 3)?;
            markers.insert([v[0].min(v[1]), v[0].max(v[1])], v[2] as u32);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse { line: ln, msg: "trailing content".into() });
        }
        let mesh = Mesh::new(nodes, triangles, Some(&markers))?;
        if mesh.boundary.len() != nb {
            return Err(Error::Structure(format!(
                "file lists {nb} boundary edges, triangulation has {}",
                mesh.boundary.len()
            )));
        }
        Ok(mesh)
    }

    pub fn read(path: &Path) -> Result<Mesh> {
        Mesh::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Builds one of the preset domains. The square uses `resolution` cells per
/// side with each cell's diagonal pointing towards the centre, so the ridges of
/// the boundary distance lie on mesh edges. Curved domains use concentric rings
/// with about `resolution` layers.
pub fn build_mesh(domain: Domain, resolution: usize) -> Result<Mesh> {
    if resolution < 2 {
        return Err(Error::Parameter(format!("resolution {resolution} must be at least 2")));
    }
    match domain {
        Domain::UnitSquare => unit_square(resolution),
        Domain::Disc => {
            let rings: Vec<(f64, usize)> = (1..=resolution)
                .map(|k| (k as f64 / resolution as f64, 6 * k))
                .collect();
            ring_mesh(true, &rings, |_| 0)
        }
        Domain::Annulus => {
            let layers = resolution;
            let rings: Vec<(f64, usize)> = (0..=layers)
                .map(|k| {
                    let r = 0.5 + 0.5 * k as f64 / layers as f64;
                    let count = ((4.0 * PI * layers as f64 * r).round() as usize).max(8);
                    (r, count)
                })
                .collect();
            ring_mesh(false, &rings, |r| if r < 0.75 { 1 } else { 0 })
        }
    }
}

fn unit_square(n: usize) -> Result<Mesh> {
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let cx = (i as f64 + 0.5) * h - 0.5;
            let cy = (j as f64 + 0.5) * h - 0.5;
            if cx * cy >= 0.0 {
                // diagonal a-c
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                // diagonal b-d
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    Mesh::new(nodes, tris, None)
}

/// Triangulates between concentric rings given as (radius, point count).
/// With `centre`, an extra node at the origin is fanned to the first ring.
fn ring_mesh(centre: bool, rings: &[(f64, usize)], marker_of: impl Fn(f64) -> u32) -> Result<Mesh> {
    let mut nodes: Vec<Point> = Vec::new();
    let mut starts = Vec::new();
    if centre {
        nodes.push([0.0, 0.0]);
    }
    for &(r, count) in rings {
        starts.push(nodes.len());
        for k in 0..count {
            let th = 2.0 * PI * k as f64 / count as f64;
            nodes.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut tris = Vec::new();
    if centre {
        let (s, n) = (starts[0], rings[0].1);
        for k in 0..n {
            tris.push([0, s + k, s + (k + 1) % n]);
        }
    }
    for w in 0..rings.len() - 1 {
        let (sa, na) = (starts[w], rings[w].1);
        let (sb, nb) = (starts[w + 1], rings[w + 1].1);
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            // advance along whichever ring has the smaller next angle
            let next_a = (i + 1) as f64 / na as f64;
            let next_b = (j + 1) as f64 / nb as f64;
            if j < nb && (i == na || next_b <= next_a) {
                tris.push([sa + i % na, sb + j % nb, sb + (j + 1) % nb]);
                j += 1;
            } else {
                tris.push([sa + i % na, sb + j % nb, sa + (i + 1) % na]);
                i += 1;
            }
        }
    }
    let mut markers = HashMap::new();
    let mut mark_ring = |w: usize| {
        let (s, n) = (starts[w], rings[w].1);
        for k in 0..n {
            let (a, b) = (s + k, s + (k + 1) % n);
            markers.insert([a.min(b), a.max(b)], marker_of(rings[w].0));
        }
    };
    mark_ring(rings.len() - 1);
    if !centre {
        mark_ring(0);
    }
    Mesh::new(nodes, tris, Some(&markers))
}

/// Euclidean distance from `x` to the segment `[a, b]`.
pub fn segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x[0] - a[0] - t * dx).hypot(x[1] - a[1] - t * dy)
}

/// Distance from `x` to the polygonal boundary of `mesh`.
pub fn boundary_distance(mesh: &Mesh, x: Point) -> f64 {
    mesh.boundary
        .iter()
        .map(|e| segment_distance(x, mesh.nodes[e.a], mesh.nodes[e.b]))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts() {
        let m = build_mesh(Domain::UnitSquare, 2).unwrap();
        assert_eq!((m.n_nodes(), m.triangles.len(), m.boundary.len()), (9, 8, 8));
        assert_eq!(m.area(), 1.0);
        let m = build_mesh(Domain::UnitSquare, 5).unwrap();
        assert!((m.area() - 1.0).abs() < 1e-14);
        assert_eq!(m.n_edges(), 3 * 25 + 2 * 5);
    }

    #[test]
    fn curved_domains() {
        for (d, markers) in [(Domain::Disc, vec![0]), (Domain::Annulus, vec![0, 1])] {
            let m = build_mesh(d, 6).unwrap();
            assert_eq!(m.markers(), markers);
            for e in &m.boundary {
                let mid = midpoint(m.nodes[e.a], m.nodes[e.b]);
                let r = mid[0].hypot(mid[1]);
                let radial = [mid[0] / r, mid[1] / r];
                let s = e.normal[0] * radial[0] + e.normal[1] * radial[1];
                // outer circle points away from the origin, inner circle towards it
                if e.marker == 0 {
                    assert!(s > 0.99);
                } else {
                    assert!(s < -0.99);
                }
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let m = build_mesh(Domain::Annulus, 3).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary, m.boundary);
    }

    #[test]
    fn rejects_bad_meshes() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(Mesh::new(nodes.clone(), vec![[0, 2, 1]], None), Err(Error::Structure(_))));
        assert!(Mesh::new(nodes, vec![[0, 1, 3]], None).is_err());
        assert!(matches!(
            Mesh::from_text("NODES 1\n0 0 0\nTRIANGLES x\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!("ellipse".parse::<Domain>().is_err());
    }
}
