//! Finite-element functions on a [`Mesh`].
//!
//! Degree-of-freedom layout:
//! * `ScalarP0`: one value per triangle.
//! * `ScalarP1`: one value per vertex.
//! * `VectorP1`: `2 * vertex + component`.
//! * `VectorP2`: scalar P2 nodes are the vertices followed by the edge
//!   midpoints (in [`Mesh::edges`] order); dof `2 * node + component`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Space {
    ScalarP0,
    ScalarP1,
    VectorP1,
    VectorP2,
}

impl Space {
    pub fn n_dofs(&self, mesh: &Mesh) -> usize {
        match self {
            Space::ScalarP0 => mesh.triangles.len(),
            Space::ScalarP1 => mesh.n_nodes(),
            Space::VectorP1 => 2 * mesh.n_nodes(),
            Space::VectorP2 => 2 * mesh.n_p2(),
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(self, Space::VectorP1 | Space::VectorP2)
    }
}

/// Value and gradient at a point. Scalars use component 0; `grad[c][k] = ∂_k f_c`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sample {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl Sample {
    /// Symmetric part of the gradient (vector fields).
    pub fn sym_grad(&self) -> [[f64; 2]; 2] {
        let g = self.grad;
        let off = 0.5 * (g[0][1] + g[1][0]);
        [[g[0][0], off], [off, g[1][1]]]
    }

    pub fn div(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }
}

/// P2 shape functions and their gradients at barycentric point `l`.
pub fn p2_shape(l: [f64; 3], gl: &[Point; 3]) -> ([f64; 6], [Point; 6]) {
    let mut n = [0.0; 6];
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        n[i] = l[i] * (2.0 * l[i] - 1.0);
        let s = 4.0 * l[i] - 1.0;
        g[i] = [s * gl[i][0], s * gl[i][1]];
    }
    for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        n[3 + k] = 4.0 * l[i] * l[j];
        g[3 + k] = [
            4.0 * (l[i] * gl[j][0] + l[j] * gl[i][0]),
            4.0 * (l[i] * gl[j][1] + l[j] * gl[i][1]),
        ];
    }
    (n, g)
}

#[derive(Clone, Debug)]
pub struct DiscreteField {
    pub space: Space,
    pub dofs: Vec<f64>,
    pub mesh: Arc<Mesh>,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, space: Space, dofs: Vec<f64>) -> Result<Self> {
        let n = space.n_dofs(&mesh);
        if dofs.len() != n {
            return Err(Error::Structure(format!(
                "{space:?} field on this mesh needs {n} dofs, got {}",
                dofs.len()
            )));
        }
        Ok(Self { space, dofs, mesh })
    }

    pub fn zeros(mesh: Arc<Mesh>, space: Space) -> Self {
        let n = space.n_dofs(&mesh);
        Self { space, dofs: vec![0.0; n], mesh }
    }

    /// Nodal interpolation of a scalar function (P0 uses the centroid).
    pub fn interpolate_scalar(mesh: Arc<Mesh>, space: Space, f: impl Fn(Point) -> f64) -> Result<Self> {
        let dofs = match space {
            Space::ScalarP0 => (0..mesh.triangles.len())
                .map(|t| f(mesh.map_point(t, [1.0 / 3.0; 3])))
                .collect(),
            Space::ScalarP1 => mesh.nodes.iter().map(|&x| f(x)).collect(),
            _ => return Err(Error::Structure(format!("{space:?} is not a scalar space"))),
        };
        Ok(Self { space, dofs, mesh })
    }

    pub fn interpolate_vector(mesh: Arc<Mesh>, space: Space, f: impl Fn(Point) -> Point) -> Result<Self> {
        let pts: Vec<Point> = match space {
            Space::VectorP1 => mesh.nodes.clone(),
            Space::VectorP2 => (0..mesh.n_p2()).map(|k| mesh.p2_point(k)).collect(),
            _ => return Err(Error::Structure(format!("{space:?} is not a vector space"))),
        };
        let dofs = pts.iter().flat_map(|&x| f(x)).collect();
        Ok(Self { space, dofs, mesh })
    }

    pub fn same_mesh(&self, other: &DiscreteField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Value and gradient inside triangle `t` at barycentric point `l`.
    pub fn sample(&self, t: usize, l: [f64; 3]) -> Sample {
        let m = &*self.mesh;
        let gl = &m.geom[t].grad_bary;
        let tri = m.triangles[t];
        let mut s = Sample::default();
        match self.space {
            Space::ScalarP0 => s.value[0] = self.dofs[t],
            Space::ScalarP1 => {
                for i in 0..3 {
                    let v = self.dofs[tri[i]];
                    s.value[0] += l[i] * v;
                    s.grad[0][0] += v * gl[i][0];
                    s.grad[0][1] += v * gl[i][1];
                }
            }
            Space::VectorP1 => {
                for i in 0..3 {
                    for c in 0..2 {
                        let v = self.dofs[2 * tri[i] + c];
                        s.value[c] += l[i] * v;
                        s.grad[c][0] += v * gl[i][0];
                        s.grad[c][1] += v * gl[i][1];
                    }
                }
            }
            Space::VectorP2 => {
                let (n, g) = p2_shape(l, gl);
                for (a, node) in m.p2_dofs(t).into_iter().enumerate() {
                    for c in 0..2 {
                        let v = self.dofs[2 * node + c];
                        s.value[c] += n[a] * v;
                        s.grad[c][0] += v * g[a][0];
                        s.grad[c][1] += v * g[a][1];
                    }
                }
            }
        }
        s
    }

    /// Nodal vector value at scalar P2 node `k` (vertex or edge midpoint).
    pub fn p2_value(&self, k: usize) -> Point {
        let m = &*self.mesh;
        let nn = m.n_nodes();
        match self.space {
            Space::VectorP2 => [self.dofs[2 * k], self.dofs[2 * k + 1]],
            Space::VectorP1 => {
                if k < nn {
                    [self.dofs[2 * k], self.dofs[2 * k + 1]]
                } else {
                    let [a, b] = m.edges[k - nn];
                    [
                        0.5 * (self.dofs[2 * a] + self.dofs[2 * b]),
                        0.5 * (self.dofs[2 * a + 1] + self.dofs[2 * b + 1]),
                    ]
                }
            }
            Space::ScalarP1 => {
                let v = if k < nn {
                    self.dofs[k]
                } else {
                    let [a, b] = m.edges[k - nn];
                    0.5 * (self.dofs[a] + self.dofs[b])
                };
                [v, 0.0]
            }
            Space::ScalarP0 => [f64::NAN, f64::NAN],
        }
    }

    /// Exact embedding of a P1 vector field into P2.
    pub fn to_p2(&self) -> Result<DiscreteField> {
        match self.space {
            Space::VectorP2 => Ok(self.clone()),
            Space::VectorP1 => {
                let n = self.mesh.n_p2();
                let dofs = (0..n).flat_map(|k| self.p2_value(k)).collect();
                DiscreteField::new(self.mesh.clone(), Space::VectorP2, dofs)
            }
            s => Err(Error::Structure(format!("cannot embed {s:?} into vector P2"))),
        }
    }

    fn check_compatible(&self, other: &DiscreteField) -> Result<()> {
        if self.space != other.space || !self.same_mesh(other) {
            return Err(Error::Structure("fields live on different spaces".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &DiscreteField) -> Result<DiscreteField> {
        self.check_compatible(other)?;
        let dofs = self.dofs.iter().zip(&other.dofs).map(|(a, b)| a + b).collect();
        Ok(DiscreteField { space: self.space, dofs, mesh: self.mesh.clone() })
    }

    pub fn sub(&self, other: &DiscreteField) -> Result<DiscreteField> {
        self.check_compatible(other)?;
        let dofs = self.dofs.iter().zip(&other.dofs).map(|(a, b)| a - b).collect();
        Ok(DiscreteField { space: self.space, dofs, mesh: self.mesh.clone() })
    }

    pub fn scale(&self, s: f64) -> DiscreteField {
        DiscreteField { space: self.space, dofs: self.dofs.iter().map(|v| s * v).collect(), mesh: self.mesh.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.dofs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫_Ω f` for scalar fields (component 0 otherwise).
    pub fn integral(&self) -> f64 {
        let rule = crate::quadrature::tri_deg4();
        let mut s = 0.0;
        for (t, g) in self.mesh.geom.iter().enumerate() {
            let mut acc = 0.0;
            for (l, w) in rule.bary.iter().zip(&rule.weights) {
                acc += w * self.sample(t, *l).value[0];
            }
            s += g.area * acc;
        }
        s
    }

    /// Nodal dump: `NODES`-style records with one value column per component.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let m = &*self.mesh;
        let mut s = String::new();
        match self.space {
            Space::ScalarP0 => {
                let _ = writeln!(s, "TRIANGLES {}", m.triangles.len());
                for (t, v) in self.dofs.iter().enumerate() {
                    let _ = writeln!(s, "{t} {v:.12e}");
                }
            }
            Space::ScalarP1 => {
                let _ = writeln!(s, "NODES {}", m.n_nodes());
                for (i, p) in m.nodes.iter().enumerate() {
                    let _ = writeln!(s, "{i} {:.12e} {:.12e} {:.12e}", p[0], p[1], self.dofs[i]);
                }
            }
            Space::VectorP1 | Space::VectorP2 => {
                let n = if self.space == Space::VectorP1 { m.n_nodes() } else { m.n_p2() };
                let _ = writeln!(s, "NODES {n}");
                for k in 0..n {
                    let p = m.p2_point(k);
                    let _ = writeln!(
                        s,
                        "{k} {:.12e} {:.12e} {:.12e} {:.12e}",
                        p[0],
                        p[1],
                        self.dofs[2 * k],
                        self.dofs[2 * k + 1]
                    );
                }
            }
        }
        s
    }
}
