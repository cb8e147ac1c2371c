//! Boundary traces, normal/tangential splitting, the compatibility check, the
//! boundary distance field, and the boundary-data text format.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DiscreteField, Space};
use crate::mesh::{boundary_distance, midpoint, BoundaryEdge, Mesh, Point};

/// Vertices whose adjacent edge normals differ by more than this angle are corners.
pub const CORNER_ANGLE: f64 = std::f64::consts::FRAC_PI_4;

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn axpy(s: f64, a: Point, b: Point) -> Point {
    [s * a[0] + b[0], s * a[1] + b[1]]
}

/// A vector trace stored per boundary edge as its values at the start,
/// midpoint and end (quadratic along the edge). Values at a shared vertex
/// may differ between the two incident edges.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    pub values: Vec<[Point; 3]>,
}

impl BoundaryTrace {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self { values: vec![[[0.0; 2]; 3]; mesh.boundary.len()] }
    }

    /// Samples `f(edge, x)` at the three nodes of every boundary edge.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(&BoundaryEdge, Point) -> Point) -> Self {
        let values = mesh
            .boundary
            .iter()
            .map(|e| {
                let (a, b) = (mesh.nodes[e.a], mesh.nodes[e.b]);
                [f(e, a), f(e, midpoint(a, b)), f(e, b)]
            })
            .collect();
        Self { values }
    }

    /// Trace of a continuous function of position.
    pub fn from_point_fn(mesh: &Mesh, f: impl Fn(Point) -> Point) -> Self {
        Self::from_fn(mesh, |_, x| f(x))
    }

    /// Continuous trace from vertex values (indexed by node) and optional
    /// midpoint values (indexed by boundary edge); midpoints default to the
    /// average of the endpoints.
    pub fn from_nodal(mesh: &Mesh, nodal: &[Point], mid: Option<&[Point]>) -> Result<Self> {
        if nodal.len() != mesh.n_nodes() {
            return Err(Error::Structure("nodal boundary values must be indexed by node".into()));
        }
        if let Some(m) = mid {
            if m.len() != mesh.boundary.len() {
                return Err(Error::Structure("midpoint values must be indexed by boundary edge".into()));
            }
        }
        let values = mesh
            .boundary
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let (a, b) = (nodal[e.a], nodal[e.b]);
                let m = mid.map(|m| m[k]).unwrap_or_else(|| midpoint(a, b));
                [a, m, b]
            })
            .collect();
        Ok(Self { values })
    }

    /// Trace of a vector P1 or P2 field.
    pub fn of_field(f: &DiscreteField) -> Result<Self> {
        if !f.space.is_vector() {
            return Err(Error::Structure("trace requires a vector field".into()));
        }
        let m = &*f.mesh;
        let nn = m.n_nodes();
        let values = m
            .boundary
            .iter()
            .map(|e| [f.p2_value(e.a), f.p2_value(nn + e.edge), f.p2_value(e.b)])
            .collect();
        Ok(Self { values })
    }

    /// Value at parameter `t ∈ [0, 1]` along boundary edge `k`.
    pub fn eval(&self, k: usize, t: f64) -> Point {
        let [a, m, b] = self.values[k];
        let (na, nm, nb) = ((1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0));
        [na * a[0] + nm * m[0] + nb * b[0], na * a[1] + nm * m[1] + nb * b[1]]
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Self {
        Self { values: self.values.iter().map(|v| v.map(&f)).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| [s * v[0], s * v[1]])
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Point, Point) -> Point) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(Error::Structure("traces on different boundaries".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| [f(a[0], b[0]), f(a[1], b[1]), f(a[2], b[2])])
            .collect();
        Ok(Self { values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| [a[0] + b[0], a[1] + b[1]])
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| [a[0] - b[0], a[1] - b[1]])
    }

    /// Largest nodal difference in Euclidean norm.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| (0..3).map(move |i| (a[i][0] - b[i][0]).hypot(a[i][1] - b[i][1])))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }

    /// `∮ g · n` by Simpson's rule per edge (exact for the quadratic trace).
    pub fn flux(&self, mesh: &Mesh) -> f64 {
        self.flux_by_marker(mesh, None)
    }

    pub fn flux_by_marker(&self, mesh: &Mesh, marker: Option<u32>) -> f64 {
        mesh.boundary
            .iter()
            .zip(&self.values)
            .filter(|(e, _)| marker.is_none_or(|m| e.marker == m))
            .map(|(e, [a, m, b])| {
                e.length * (dot(*a, e.normal) + 4.0 * dot(*m, e.normal) + dot(*b, e.normal)) / 6.0
            })
            .sum()
    }
}

/// Divergence datum `g1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarSpec {
    Zero,
    Const { c: f64 },
    /// `a x + b y + c`
    Affine { a: f64, b: f64, c: f64 },
}

impl ScalarSpec {
    pub fn eval(&self, x: Point) -> f64 {
        match *self {
            ScalarSpec::Zero => 0.0,
            ScalarSpec::Const { c } => c,
            ScalarSpec::Affine { a, b, c } => a * x[0] + b * x[1] + c,
        }
    }

    pub fn to_field(&self, mesh: Arc<Mesh>) -> DiscreteField {
        DiscreteField::interpolate_scalar(mesh, Space::ScalarP1, |x| self.eval(x)).expect("scalar P1")
    }

    fn to_line(self) -> String {
        match self {
            ScalarSpec::Zero => "G1 zero".into(),
            ScalarSpec::Const { c } => format!("G1 const {c:.17e}"),
            ScalarSpec::Affine { a, b, c } => format!("G1 affine {a:.17e} {b:.17e} {c:.17e}"),
        }
    }
}

/// Constant-density body force presets for data files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForceSpec {
    Zero,
    Const { fx: f64, fy: f64 },
}

impl ForceSpec {
    pub fn eval(&self, _x: Point) -> Point {
        match *self {
            ForceSpec::Zero => [0.0, 0.0],
            ForceSpec::Const { fx, fy } => [fx, fy],
        }
    }
}

/// Divergence datum `g1` (scalar P1) and boundary datum `g2`.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub g1: DiscreteField,
    pub g2: BoundaryTrace,
}

impl BoundaryData {
    pub fn new(g1: DiscreteField, g2: BoundaryTrace) -> Result<Self> {
        if g1.space != Space::ScalarP1 {
            return Err(Error::Structure("g1 must be a scalar P1 field".into()));
        }
        if g2.values.len() != g1.mesh.boundary.len() {
            return Err(Error::Structure("g2 must have one entry per boundary edge".into()));
        }
        Ok(Self { g1, g2 })
    }

    pub fn zero(mesh: Arc<Mesh>) -> Self {
        let g2 = BoundaryTrace::zeros(&mesh);
        Self { g1: DiscreteField::zeros(mesh, Space::ScalarP1), g2 }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.g1.mesh
    }

    /// Edge-wise `(g_n, g_t)`.
    pub fn decompose(&self) -> (BoundaryTrace, BoundaryTrace) {
        decompose_trace(self.mesh(), &self.g2)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { g1: self.g1.scale(s), g2: self.g2.scale(s) }
    }
}

/// Edge-wise orthogonal split `g_n = (g·n) n`, `g_t = g - g_n`.
pub fn decompose_trace(mesh: &Mesh, g: &BoundaryTrace) -> (BoundaryTrace, BoundaryTrace) {
    let mut gn = g.clone();
    let mut gt = g.clone();
    for (k, e) in mesh.boundary.iter().enumerate() {
        for i in 0..3 {
            let v = g.values[k][i];
            let s = dot(v, e.normal);
            gn.values[k][i] = [s * e.normal[0], s * e.normal[1]];
            gt.values[k][i] = axpy(-s, e.normal, v);
        }
    }
    (gn, gt)
}

pub fn decompose_boundary(data: &BoundaryData, mesh: &Mesh) -> Result<(BoundaryTrace, BoundaryTrace)> {
    if data.g2.values.len() != mesh.boundary.len() {
        return Err(Error::Structure("boundary values missing for some boundary edges".into()));
    }
    Ok(decompose_trace(mesh, &data.g2))
}

/// `|∫_Ω g1 - ∮ g2 · n|`, exact for P1 `g1` and quadratic edge traces.
pub fn check_compatibility(data: &BoundaryData, mesh: &Mesh) -> f64 {
    let vol: f64 = mesh
        .triangles
        .iter()
        .zip(&mesh.geom)
        .map(|(t, g)| g.area * (data.g1.dofs[t[0]] + data.g1.dofs[t[1]] + data.g1.dofs[t[2]]) / 3.0)
        .sum();
    (vol - data.g2.flux(mesh)).abs()
}

/// Vertex-based normal/tangential split used to build continuous lifts.
#[derive(Clone, Debug)]
pub struct NodalSplit {
    /// Per node (zero off the boundary and at corners).
    pub tangential: Vec<Point>,
    /// Per node unit normal (length-weighted average of the two edge normals).
    pub normal: Vec<Point>,
    pub corner: Vec<bool>,
}

impl NodalSplit {
    /// Continuous vertex values of `g` (the average of the incident edge values).
    pub fn vertex_values(mesh: &Mesh, g: &BoundaryTrace) -> Vec<Point> {
        let mut v = vec![[0.0; 2]; mesh.n_nodes()];
        for i in mesh.boundary_nodes() {
            let (inc, out) = mesh.boundary_neighbours(i).expect("boundary node");
            let a = g.values[inc][2];
            let b = g.values[out][0];
            v[i] = midpoint(a, b);
        }
        v
    }

    pub fn new(mesh: &Mesh, g: &BoundaryTrace) -> Self {
        let nn = mesh.n_nodes();
        let vals = Self::vertex_values(mesh, g);
        let mut tangential = vec![[0.0; 2]; nn];
        let mut normal = vec![[0.0; 2]; nn];
        let mut corner = vec![false; nn];
        for i in mesh.boundary_nodes() {
            let (inc, out) = mesh.boundary_neighbours(i).expect("boundary node");
            let (e1, e2) = (&mesh.boundary[inc], &mesh.boundary[out]);
            let w = axpy(e1.length, e1.normal, [e2.length * e2.normal[0], e2.length * e2.normal[1]]);
            let len = w[0].hypot(w[1]);
            normal[i] = [w[0] / len, w[1] / len];
            if dot(e1.normal, e2.normal) < CORNER_ANGLE.cos() {
                corner[i] = true;
            } else {
                tangential[i] = axpy(-dot(vals[i], normal[i]), normal[i], vals[i]);
            }
        }
        Self { tangential, normal, corner }
    }
}

/// Nodal Euclidean distance to the polygonal boundary (exactly zero on it).
pub fn distance_field(mesh: &Arc<Mesh>) -> DiscreteField {
    let dofs = (0..mesh.n_nodes())
        .map(|i| if mesh.is_boundary_node(i) { 0.0 } else { boundary_distance(mesh, mesh.nodes[i]) })
        .collect();
    DiscreteField::new(mesh.clone(), Space::ScalarP1, dofs).expect("P1 dofs")
}

/// Parsed boundary-data file: per-node `id gx gy`, one `G1 ...` line and an
/// optional `F ...` line.
#[derive(Clone, Debug, PartialEq)]
pub struct DataFile {
    pub nodal: Vec<(usize, Point)>,
    pub g1: ScalarSpec,
    pub force: ForceSpec,
}

impl DataFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodal = Vec::new();
        let mut g1 = None;
        let mut force = ForceSpec::Zero;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = l.split_whitespace().collect();
            let num = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("bad number '{s}'") })
            };
            match tok[0] {
                "G1" => {
                    g1 = Some(match (tok.get(1).copied(), tok.len()) {
                        (Some("zero"), 2) => ScalarSpec::Zero,
                        (Some("const"), 3) => ScalarSpec::Const { c: num(tok[2])? },
                        (Some("affine"), 5) => {
                            ScalarSpec::Affine { a: num(tok[2])?, b: num(tok[3])?, c: num(tok[4])? }
                        }
                        _ => return Err(Error::Parse { line, msg: "expected G1 zero|const c|affine a b c".into() }),
                    })
                }
                "F" => {
                    force = match (tok.get(1).copied(), tok.len()) {
                        (Some("zero"), 2) => ForceSpec::Zero,
                        (Some("const"), 4) => ForceSpec::Const { fx: num(tok[2])?, fy: num(tok[3])? },
                        _ => return Err(Error::Parse { line, msg: "expected F zero|const fx fy".into() }),
                    }
                }
                _ => {
                    if tok.len() != 3 {
                        return Err(Error::Parse { line, msg: "expected 'id gx gy'".into() });
                    }
                    let id = tok[0]
                        .parse::<usize>()
                        .map_err(|_| Error::Parse { line, msg: format!("bad node id '{}'", tok[0]) })?;
                    nodal.push((id, [num(tok[1])?, num(tok[2])?]));
                }
            }
        }
        let g1 = g1.ok_or(Error::Parse { line: 0, msg: "missing G1 line".into() })?;
        Ok(Self { nodal, g1, force })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Samples a continuous boundary function at the boundary nodes.
    pub fn from_fn(mesh: &Mesh, g2: impl Fn(Point) -> Point, g1: ScalarSpec, force: ForceSpec) -> Self {
        let nodal = mesh.boundary_nodes().into_iter().map(|i| (i, g2(mesh.nodes[i]))).collect();
        Self { nodal, g1, force }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, v) in &self.nodal {
            let _ = writeln!(s, "{i} {:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(s, "{}", self.g1.to_line());
        match self.force {
            ForceSpec::Zero => s.push_str("F zero\n"),
            ForceSpec::Const { fx, fy } => {
                let _ = writeln!(s, "F const {fx:.17e} {fy:.17e}");
            }
        }
        s
    }

    /// Builds boundary data with linearly interpolated edge midpoints.
    pub fn to_data(&self, mesh: &Arc<Mesh>) -> Result<BoundaryData> {
        let mut nodal = vec![[0.0; 2]; mesh.n_nodes()];
        let mut seen = vec![false; mesh.n_nodes()];
        for &(i, v) in &self.nodal {
            if i >= mesh.n_nodes() || !mesh.is_boundary_node(i) {
                return Err(Error::Structure(format!("node {i} is not a boundary node")));
            }
            nodal[i] = v;
            seen[i] = true;
        }
        if let Some(i) = mesh.boundary_nodes().into_iter().find(|&i| !seen[i]) {
            return Err(Error::Structure(format!("missing boundary value for node {i}")));
        }
        let g2 = BoundaryTrace::from_nodal(mesh, &nodal, None)?;
        BoundaryData::new(self.g1.to_field(mesh.clone()), g2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(Domain::UnitSquare, n).unwrap())
    }

    #[test]
    fn decomposition_examples() {
        let m = square(4);
        let normal = BoundaryTrace::from_fn(&m, |e, _| e.normal);
        let (gn, gt) = decompose_trace(&m, &normal);
        assert!(gn.max_diff(&normal) < 1e-15 && gt.max_abs() < 1e-15);
        let tangent = BoundaryTrace::from_fn(&m, |e, _| e.tangent());
        let (gn, gt) = decompose_trace(&m, &tangent);
        assert!(gn.max_abs() < 1e-15 && gt.max_diff(&tangent) < 1e-15);

        let ex = BoundaryTrace::from_point_fn(&m, |_| [1.0, 0.0]);
        let (gn, gt) = decompose_trace(&m, &ex);
        for (k, e) in m.boundary.iter().enumerate() {
            if e.normal[0].abs() > 0.5 {
                assert_eq!(gn.values[k][1], [1.0, 0.0]);
                assert_eq!(gt.values[k][1], [0.0, 0.0]);
            } else {
                assert_eq!(gt.values[k][1], [1.0, 0.0]);
            }
        }
    }

    #[test]
    fn compatibility_examples() {
        let m = square(4);
        let tangent = BoundaryTrace::from_fn(&m, |e, _| e.tangent());
        let zero = ScalarSpec::Zero.to_field(m.clone());
        let one = ScalarSpec::Const { c: 1.0 }.to_field(m.clone());
        let d = BoundaryData::new(zero, tangent).unwrap();
        assert!(check_compatibility(&d, &m) < 1e-15);
        let quarter = BoundaryTrace::from_fn(&m, |e, _| [0.25 * e.normal[0], 0.25 * e.normal[1]]);
        let d = BoundaryData::new(one.clone(), quarter).unwrap();
        assert!(check_compatibility(&d, &m) < 1e-15);
        let d = BoundaryData::new(one, BoundaryTrace::zeros(&m)).unwrap();
        assert!((check_compatibility(&d, &m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let m = square(4);
        let d = distance_field(&m);
        let centre = m.nodes.iter().position(|p| *p == [0.5, 0.5]).unwrap();
        assert_eq!(d.dofs[centre], 0.5);
        for i in m.boundary_nodes() {
            assert_eq!(d.dofs[i], 0.0);
        }
    }

    #[test]
    fn nodal_split_has_zero_flux() {
        for dom in [Domain::UnitSquare, Domain::Disc, Domain::Annulus] {
            let m = build_mesh(dom, 6).unwrap();
            let g = BoundaryTrace::from_point_fn(&m, |x| [1.0 + x[1], x[0] * x[0]]);
            let split = NodalSplit::new(&m, &g);
            let h = BoundaryTrace::from_nodal(&m, &split.tangential, None).unwrap();
            assert!(h.flux(&m).abs() < 1e-14);
            let corners = split.corner.iter().filter(|c| **c).count();
            assert_eq!(corners, if dom == Domain::UnitSquare { 4 } else { 0 });
        }
    }

    #[test]
    fn data_file_round_trip() {
        let m = square(3);
        let f = DataFile::from_fn(&m, |x| [x[0], -x[1]], ScalarSpec::Affine { a: 1.0, b: 2.0, c: 0.5 }, ForceSpec::Const { fx: 1.0, fy: 0.0 });
        let back = DataFile::parse(&f.to_text()).unwrap();
        assert_eq!(back, f);
        let data = back.to_data(&m).unwrap();
        assert_eq!(data.g1.dofs[5], m.nodes[5][0] + 2.0 * m.nodes[5][1] + 0.5);
        assert!(DataFile::parse("0 1 2\n").is_err());
        assert!(matches!(DataFile::parse("G1 const x\n"), Err(Error::Parse { line: 1, .. })));
    }
}
