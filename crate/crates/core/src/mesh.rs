//! Bezier-triangle surface meshes: container, text format, conformity
//! checks, and the subdivided-cube builder used by the benchmark drivers.
//!
//! Mesh text format ("bezmesh"): whitespace-separated tokens, `#` starts a
//! comment running to end of line.
//!
//! ```text
//! bezmesh 1
//! order 2
//! patches 2
//! patch
//! <x> <y> <z>      # one line per control point, lexicographic order
//! ...
//! patch
//! ...
//! ```
//!
//! Control points follow the crate-wide lexicographic Bernstein index
//! order. Patches must form a closed, consistently oriented, conforming
//! surface for the cutting pipeline; `validate_closed` checks that.

use crate::bezier::{tri_len, BezierTriangle, RefEdge, TriNet};
use crate::error::{Error, Result};
use crate::geom::{Aabb3, Vec3};
use crate::grid::Dir;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub order: usize,
    pub patches: Vec<BezierTriangle>,
}

impl SurfaceMesh {
    pub fn new(order: usize, patches: Vec<BezierTriangle>) -> Result<Self> {
        if order == 0 {
            return Err(Error::MeshFormat("order must be at least 1".into()));
        }
        for (i, p) in patches.iter().enumerate() {
            if p.order != order {
                return Err(Error::MeshFormat(format!(
                    "patch {i} has order {} but the mesh declares {order}",
                    p.order
                )));
            }
        }
        Ok(SurfaceMesh { order, patches })
    }

    pub fn aabb(&self) -> Aabb3 {
        let mut out = Aabb3::empty();
        for p in &self.patches {
            out = out.union(&p.control_aabb());
        }
        out
    }

    /// Corner positions of patch `i` at reference vertices (0,0), (1,0),
    /// (0,1).
    pub fn corners(&self, i: usize) -> [Vec3; 3] {
        let p = &self.patches[i];
        let q = p.order;
        [p.at(q, 0, 0), p.at(0, q, 0), p.at(0, 0, q)]
    }

    pub fn translated(&self, dv: &Vec3) -> SurfaceMesh {
        SurfaceMesh {
            order: self.order,
            patches: self
                .patches
                .iter()
                .map(|p| TriNet::new(p.order, p.coeffs.iter().map(|c| c + dv).collect()))
                .collect(),
        }
    }

    /// Checks that the mesh is a closed, conforming, consistently oriented
    /// manifold: every patch edge is shared with exactly one other patch,
    /// traversed in the opposite direction, with coinciding edge control
    /// points.
    pub fn validate_closed(&self) -> Result<()> {
        let tol = 1e-9 * self.aabb().diagonal().max(1.0);
        let vid = self.vertex_ids(tol);

        // Directed edges keyed by undirected vertex pair.
        use std::collections::HashMap;
        struct DirectedEdge {
            patch: usize,
            forward: bool,
            points: Vec<Vec3>,
        }
        let mut edges: HashMap<(usize, usize), Vec<DirectedEdge>> = HashMap::new();
        for (pi, patch) in self.patches.iter().enumerate() {
            let c = [vid[3 * pi], vid[3 * pi + 1], vid[3 * pi + 2]];
            if c[0] == c[1] || c[1] == c[2] || c[0] == c[2] {
                return Err(Error::NonManifoldInput(format!(
                    "patch {pi} has coincident corners"
                )));
            }
            for (edge, (a, b)) in [
                (RefEdge::Bottom, (c[0], c[1])),
                (RefEdge::Diagonal, (c[1], c[2])),
                (RefEdge::Left, (c[2], c[0])),
            ] {
                let points = patch.edge_curve(edge).points;
                let key = (a.min(b), a.max(b));
                edges.entry(key).or_default().push(DirectedEdge {
                    patch: pi,
                    forward: a < b,
                    points,
                });
            }
        }

        for ((a, b), list) in &edges {
            if list.len() != 2 {
                return Err(Error::NonManifoldInput(format!(
                    "edge between vertices {a} and {b} is used by {} patch(es), expected 2",
                    list.len()
                )));
            }
            let (e0, e1) = (&list[0], &list[1]);
            if e0.forward == e1.forward {
                return Err(Error::NonManifoldInput(format!(
                    "patches {} and {} traverse a shared edge in the same direction",
                    e0.patch, e1.patch
                )));
            }
            let n = e0.points.len();
            for k in 0..n {
                if (e0.points[k] - e1.points[n - 1 - k]).norm() > tol {
                    return Err(Error::NonManifoldInput(format!(
                        "patches {} and {} share an edge with non-matching control points",
                        e0.patch, e1.patch
                    )));
                }
            }
        }
        Ok(())
    }

    /// Vertex id per patch corner (3 per patch), deduplicated within tol.
    fn vertex_ids(&self, tol: f64) -> Vec<usize> {
        let mut corners: Vec<(Vec3, usize)> = Vec::with_capacity(3 * self.patches.len());
        for i in 0..self.patches.len() {
            for (k, c) in self.corners(i).into_iter().enumerate() {
                corners.push((c, 3 * i + k));
            }
        }
        let mut sorted: Vec<usize> = (0..corners.len()).collect();
        sorted.sort_by(|&i, &j| {
            let (a, b) = (&corners[i].0, &corners[j].0);
            (a.x, a.y, a.z)
                .partial_cmp(&(b.x, b.y, b.z))
                .unwrap()
        });
        let mut ids = vec![usize::MAX; corners.len()];
        let mut next_id = 0usize;
        for (si, &ci) in sorted.iter().enumerate() {
            if ids[corners[ci].1] != usize::MAX {
                continue;
            }
            ids[corners[ci].1] = next_id;
            // Points within tol appear adjacently in x up to tol.
            for &cj in sorted[si + 1..].iter() {
                if corners[cj].0.x - corners[ci].0.x > tol {
                    break;
                }
                if ids[corners[cj].1] == usize::MAX
                    && (corners[cj].0 - corners[ci].0).norm() <= tol
                {
                    ids[corners[cj].1] = next_id;
                }
            }
            next_id += 1;
        }
        ids
    }

    // -- text format ------------------------------------------------------

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "bezmesh 1").unwrap();
        writeln!(s, "order {}", self.order).unwrap();
        writeln!(s, "patches {}", self.patches.len()).unwrap();
        for p in &self.patches {
            writeln!(s, "patch").unwrap();
            for c in &p.coeffs {
                writeln!(s, "{} {} {}", c.x, c.y, c.z).unwrap();
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut toks = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace());
        expect_tok(&mut toks, "bezmesh")?;
        let version: u32 = next_num(&mut toks, "format version")?;
        if version != 1 {
            return Err(Error::MeshFormat(format!("unsupported version {version}")));
        }
        expect_tok(&mut toks, "order")?;
        let order: usize = next_num(&mut toks, "order")?;
        if order == 0 {
            return Err(Error::MeshFormat("order must be at least 1".into()));
        }
        expect_tok(&mut toks, "patches")?;
        let count: usize = next_num(&mut toks, "patch count")?;
        let len = tri_len(order);
        let mut patches = Vec::with_capacity(count);
        for pi in 0..count {
            expect_tok(&mut toks, "patch")?;
            let mut coeffs = Vec::with_capacity(len);
            for ci in 0..len {
                let x: f64 = next_num(&mut toks, &format!("patch {pi} point {ci} x"))?;
                let y: f64 = next_num(&mut toks, &format!("patch {pi} point {ci} y"))?;
                let z: f64 = next_num(&mut toks, &format!("patch {pi} point {ci} z"))?;
                coeffs.push(Vec3::new(x, y, z));
            }
            patches.push(TriNet::new(order, coeffs));
        }
        if let Some(t) = toks.next() {
            return Err(Error::MeshFormat(format!("trailing token '{t}'")));
        }
        SurfaceMesh::new(order, patches)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}

fn expect_tok<'a>(toks: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    match toks.next() {
        Some(t) if t == what => Ok(()),
        Some(t) => Err(Error::MeshFormat(format!("expected '{what}', found '{t}'"))),
        None => Err(Error::MeshFormat(format!(
            "expected '{what}', found end of input"
        ))),
    }
}

fn next_num<'a, T: std::str::FromStr>(
    toks: &mut impl Iterator<Item = &'a str>,
    what: &str,
) -> Result<T> {
    let t = toks
        .next()
        .ok_or_else(|| Error::MeshFormat(format!("missing {what}")))?;
    t.parse()
        .map_err(|_| Error::MeshFormat(format!("bad {what}: '{t}'")))
}

/// Boundary of the cube [-1, 1]^3 as a conforming linear mesh elevated to
/// `order`, with `per_side` x `per_side` squares per face, two triangles
/// each, oriented outward.
pub fn cube_mesh(order: usize, per_side: usize) -> SurfaceMesh {
    assert!(order >= 1 && per_side >= 1);
    // Shared line coordinates so adjacent faces get bitwise-equal corners.
    let line = |k: usize| -> f64 {
        if k == per_side {
            1.0
        } else {
            -1.0 + 2.0 * k as f64 / per_side as f64
        }
    };
    let mut patches = Vec::with_capacity(6 * per_side * per_side * 2);
    for dir in Dir::ALL {
        let (ua, va) = dir.tangent_axes();
        let to3 = |u: f64, v: f64| -> Vec3 {
            let mut p = Vec3::zeros();
            p[dir.axis()] = dir.sign();
            p[ua] = u;
            p[va] = v;
            p
        };
        for j in 0..per_side {
            for i in 0..per_side {
                let (u0, u1) = (line(i), line(i + 1));
                let (v0, v1) = (line(j), line(j + 1));
                let a = to3(u0, v0);
                let b = to3(u1, v0);
                let c = to3(u1, v1);
                let d = to3(u0, v1);
                // CCW in (u, v) makes d1 x d2 point along the outward
                // normal (the frame is right-handed by construction).
                for tri in [[a, b, c], [a, c, d]] {
                    patches.push(TriNet::new(1, tri.to_vec()).elevated_to(order));
                }
            }
        }
    }
    SurfaceMesh::new(order, patches).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;

    #[test]
    fn cube_is_closed_and_outward() {
        for (order, per_side) in [(1, 1), (2, 2), (3, 1)] {
            let mesh = cube_mesh(order, per_side);
            assert_eq!(mesh.patches.len(), 6 * per_side * per_side * 2);
            mesh.validate_closed().unwrap();
            for p in &mesh.patches {
                let center = Vec2::new(1.0 / 3.0, 1.0 / 3.0);
                let x = p.eval(&center);
                let n = p.normal(&center);
                assert!(n.dot(&x) > 0.0, "inward-facing patch");
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let mesh = cube_mesh(2, 1);
        let text = mesh.to_text();
        let back = SurfaceMesh::parse(&text).unwrap();
        assert_eq!(back.order, mesh.order);
        assert_eq!(back.patches.len(), mesh.patches.len());
        for (a, b) in mesh.patches.iter().zip(&back.patches) {
            for (ca, cb) in a.coeffs.iter().zip(&b.coeffs) {
                assert_eq!(ca, cb, "coordinates must round-trip exactly");
            }
        }
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(matches!(
            SurfaceMesh::parse("bezmesh 2\norder 1\npatches 0\n"),
            Err(Error::MeshFormat(_))
        ));
        assert!(matches!(
            SurfaceMesh::parse("bezmesh 1\norder 1\npatches 1\npatch\n0 0 0\n1 0 0\n"),
            Err(Error::MeshFormat(_))
        ));
        assert!(matches!(
            SurfaceMesh::parse("bezmesh 1\norder 1\npatches 1\npatch\n0 0 0\n1 0 0\n0 oops 0\n"),
            Err(Error::MeshFormat(_))
        ));
        // Comments and extra whitespace are fine.
        let ok = "# cube corner\nbezmesh 1\norder 1\npatches 2\n\
                  patch\n0 0 0\n1 0 0\n0 1 0 # top\n\
                  patch\n1 0 0\n0 0 1\n0 1 0\n";
        assert!(SurfaceMesh::parse(ok).is_ok());
    }

    #[test]
    fn open_mesh_is_rejected() {
        let mesh = cube_mesh(1, 1);
        let open = SurfaceMesh::new(1, mesh.patches[1..].to_vec()).unwrap();
        assert!(matches!(
            open.validate_closed(),
            Err(Error::NonManifoldInput(_))
        ));
    }

    #[test]
    fn flipped_patch_is_rejected() {
        let mesh = cube_mesh(1, 1);
        let mut patches = mesh.patches.clone();
        let p = &mut patches[0];
        p.coeffs.swap(1, 2);
        let bad = SurfaceMesh::new(1, patches).unwrap();
        assert!(matches!(
            bad.validate_closed(),
            Err(Error::NonManifoldInput(_))
        ));
    }

    #[test]
    fn elevated_cube_edges_still_conform() {
        // Edge control points after elevation depend only on the shared
        // linear edge, so neighbors still match.
        let mesh = cube_mesh(4, 3);
        mesh.validate_closed().unwrap();
    }
}
