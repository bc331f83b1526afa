//! Splitting trimmed polygons into pieces a single map can cover.
//!
//! A trimmed polygon has straight edges from the leaf structure and at
//! most two monotone curve edges. Pieces come in two shapes: triangles
//! with at most one curved edge, obtained by fanning from a kernel
//! point, and a ruled quadrilateral spanned between the two curves when
//! the polygon has no usable kernel.

use crate::error::{Error, Result};
use crate::geom::{dist_point_segment, Vec2};
use crate::trim::{dist_to_polyline, point_in_polyline, TrimEdge, TrimEdgeKind, TrimPolygon};
use nalgebra::{Matrix3, Vector3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PieceKind {
    /// Three edges, at most one of them curved; a curved edge comes
    /// first, so the reference triangle's bottom edge is the curved one.
    Triangle,
    /// Four edges: curve, straight, curve, straight. The ruling pairs
    /// edges[0] with edges[2] reversed; either straight side may have
    /// zero length when the curves share an endpoint.
    QuadQby1,
}

/// One piece of a partitioned trimmed polygon, boundary counterclockwise.
#[derive(Clone, Debug)]
pub struct PartitionPiece {
    pub kind: PieceKind,
    pub edges: Vec<TrimEdge>,
}

impl PartitionPiece {
    /// Shoelace area over the edge endpoints (curves as chords).
    pub fn linearized_area(&self) -> f64 {
        let mut s = 0.0;
        for e in &self.edges {
            s += e.a.x * e.b.y - e.b.x * e.a.y;
        }
        0.5 * s
    }

    /// Polyline boundary using the stored curve samples.
    pub fn sampled_polyline(&self) -> Vec<Vec2> {
        let mut out = Vec::new();
        for e in &self.edges {
            for p in &e.samples[..e.samples.len() - 1] {
                out.push(*p);
            }
        }
        out
    }

    pub fn alpha_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| matches!(e.kind, TrimEdgeKind::Alpha { .. }))
            .count()
    }
}

fn is_alpha(e: &TrimEdge) -> bool {
    matches!(e.kind, TrimEdgeKind::Alpha { .. })
}

/// Most interior point of the polygon's conservative kernel: the set of
/// points that see the whole boundary. Straight edges contribute their
/// exact half-plane; curve edges contribute one half-plane per sample
/// segment, pushed inward by an estimate of how far the curve can stray
/// from its sampled polyline. None when the intersection is empty or has
/// no usable depth.
pub fn kernel_point(poly: &TrimPolygon) -> Option<Vec2> {
    let mut cons: Vec<(Vec2, f64)> = Vec::new();
    let mut scale = 0f64;
    for e in &poly.edges {
        let off = if is_alpha(e) {
            2.0 * polyline_bulge(&e.samples)
        } else {
            0.0
        };
        for w in e.samples.windows(2) {
            let d = w[1] - w[0];
            let len = d.norm();
            if len <= 1e-14 {
                continue;
            }
            // Outward normal of a counterclockwise boundary segment.
            let n = Vec2::new(d.y, -d.x) / len;
            cons.push((n, n.dot(&w[0]) - off));
        }
        for f in &poly.edges {
            scale = scale.max((e.a - f.a).norm());
        }
    }
    chebyshev_center(&cons, scale)
}

/// Largest deviation of a sample from the chord of its neighbours; a
/// proxy bound for how far the curve swings between adjacent samples
/// (the true inter-sample sagitta is about a quarter of it).
fn polyline_bulge(samples: &[Vec2]) -> f64 {
    let mut b = 0f64;
    for w in samples.windows(3) {
        b = b.max(dist_point_segment(&w[1], &w[0], &w[2]));
    }
    b
}

/// Deepest point of {x : n_i . x <= b_i} with unit normals, by brute
/// force over constraint triples: the little LP max r s.t. n_i . x + r
/// <= b_i attains its optimum where three constraints are active, and
/// the constraint counts here are small. Ties resolve to the first
/// triple in index order.
fn chebyshev_center(cons: &[(Vec2, f64)], scale: f64) -> Option<Vec2> {
    let slack = 1e-11 * scale.max(1.0);
    let mut best: Option<(f64, Vec2)> = None;
    for i in 0..cons.len() {
        for j in i + 1..cons.len() {
            for k in j + 1..cons.len() {
                let (ni, bi) = cons[i];
                let (nj, bj) = cons[j];
                let (nk, bk) = cons[k];
                let a = Matrix3::new(
                    ni.x, ni.y, 1.0, //
                    nj.x, nj.y, 1.0, //
                    nk.x, nk.y, 1.0,
                );
                if a.determinant().abs() < 1e-12 {
                    continue;
                }
                let Some(sol) = a.lu().solve(&Vector3::new(bi, bj, bk)) else {
                    continue;
                };
                let (z, r) = (Vec2::new(sol.x, sol.y), sol.z);
                if r <= best.map_or(0.0, |(rb, _)| rb) {
                    continue;
                }
                if cons.iter().all(|(n, b)| n.dot(&z) + r <= b + slack) {
                    best = Some((r, z));
                }
            }
        }
    }
    best.and_then(|(r, z)| (r > 1e-9 * scale.max(1e-12)).then_some(z))
}

/// Partition a trimmed polygon into triangles with at most one curved
/// edge each, plus at most one ruled quad when no kernel point exists.
/// More than two curve edges means the upstream refinement failed its
/// contract and is reported as malformed.
pub fn partition(poly: &TrimPolygon) -> Result<Vec<PartitionPiece>> {
    let n_alpha = poly.alpha_edges().count();
    if n_alpha > 2 {
        return Err(Error::MalformedPolygon(format!(
            "{n_alpha} curve edges after refinement"
        )));
    }
    partition_inner(poly, 6, true)
}

/// Variant for facet-wall polygons, which chain curve edges from many
/// faces: any curve count is accepted, but curve edges are never split,
/// so every piece edge stays bit-identical to the boundary curve held by
/// the adjacent surface piece. A polygon whose decomposition would need
/// a split is reported instead of silently breaking that conformity.
pub fn partition_wall(poly: &TrimPolygon) -> Result<Vec<PartitionPiece>> {
    partition_inner(poly, 6, false)
}

fn partition_inner(
    poly: &TrimPolygon,
    depth: usize,
    allow_curve_split: bool,
) -> Result<Vec<PartitionPiece>> {
    let n_alpha = poly.alpha_edges().count();
    if poly.edges.len() == 3 && n_alpha <= 1 {
        let mut edges = poly.edges.clone();
        if let Some(k) = edges.iter().position(is_alpha) {
            edges.rotate_left(k);
        }
        return Ok(vec![PartitionPiece {
            kind: PieceKind::Triangle,
            edges,
        }]);
    }
    if n_alpha == 0 {
        return vertex_fan(&poly.edges);
    }
    if let Some(z) = kernel_point(poly) {
        return Ok(kernel_fan(&poly.edges, &z));
    }
    if n_alpha == 2 {
        quad_route(poly)
    } else if allow_curve_split {
        sight_split(poly, depth)
    } else {
        Err(Error::MalformedPolygon(format!(
            "no kernel point for a wall polygon with {n_alpha} curve edges"
        )))
    }
}

const AREA_TOL: f64 = 1e-14;

fn chord(a: Vec2, b: Vec2) -> TrimEdge {
    TrimEdge::straight(a, b, TrimEdgeKind::Chord)
}

/// Fan a polygon with straight edges only from one of its vertices.
/// Collinear runs produce zero-area triangles, which are dropped; a
/// pivot that would produce an inverted triangle is skipped.
fn vertex_fan(edges: &[TrimEdge]) -> Result<Vec<PartitionPiece>> {
    let m = edges.len();
    'pivot: for s in 0..m {
        let z = edges[s].a;
        let mut out = Vec::new();
        for step in 1..m - 1 {
            let e = &edges[(s + step) % m];
            let area2 = (e.a.x - z.x) * (e.b.y - z.y) - (e.b.x - z.x) * (e.a.y - z.y);
            if area2 < -AREA_TOL {
                continue 'pivot;
            }
            if area2 <= AREA_TOL {
                continue;
            }
            let lead = if step == 1 {
                edges[s].clone()
            } else {
                chord(z, e.a)
            };
            let trail = if step == m - 2 {
                edges[(s + m - 1) % m].clone()
            } else {
                chord(e.b, z)
            };
            out.push(PartitionPiece {
                kind: PieceKind::Triangle,
                edges: vec![e.clone(), trail, lead],
            });
        }
        return Ok(out);
    }
    Err(Error::MalformedPolygon(
        "no fan pivot in straight-edged polygon".into(),
    ))
}

/// Star fan from an interior kernel point: one triangle per boundary
/// edge, each keeping its boundary edge as the base. The base is the
/// only possibly-curved edge by construction.
fn kernel_fan(edges: &[TrimEdge], z: &Vec2) -> Vec<PartitionPiece> {
    edges
        .iter()
        .map(|e| PartitionPiece {
            kind: PieceKind::Triangle,
            edges: vec![e.clone(), chord(e.b, *z), chord(*z, e.a)],
        })
        .collect()
}

/// Two curve edges and no kernel: span a ruled quad between them along
/// the cyclic boundary order (the only pairing that keeps the pieces
/// simple) and fan the straight caps left beyond the quad's chords.
fn quad_route(poly: &TrimPolygon) -> Result<Vec<PartitionPiece>> {
    let m = poly.edges.len();
    let i1 = poly.edges.iter().position(is_alpha).unwrap();
    let i2 = i1 + 1 + poly.edges[i1 + 1..].iter().position(is_alpha).unwrap();
    let e1 = &poly.edges[i1];
    let e2 = &poly.edges[i2];
    let run12: Vec<usize> = (i1 + 1..i2).collect();
    let run21: Vec<usize> = (i2 + 1..i2 + 1 + (m - i2 + i1 - 1)).map(|t| t % m).collect();
    let mut pieces = Vec::new();
    let c12 = run_cap(poly, &run12, e1.b, e2.a, &mut pieces)?;
    let c21 = run_cap(poly, &run21, e2.b, e1.a, &mut pieces)?;
    pieces.push(PartitionPiece {
        kind: PieceKind::QuadQby1,
        edges: vec![e1.clone(), c12, e2.clone(), c21],
    });
    Ok(pieces)
}

/// Close the straight run `from -> .. -> to` with a chord and fan the
/// enclosed cap. A run of one edge is its own chord; an empty run gives
/// a zero-length chord (the curves meet there).
fn run_cap(
    poly: &TrimPolygon,
    run: &[usize],
    from: Vec2,
    to: Vec2,
    pieces: &mut Vec<PartitionPiece>,
) -> Result<TrimEdge> {
    match run.len() {
        0 => Ok(chord(from, to)),
        1 => Ok(poly.edges[run[0]].clone()),
        _ => {
            let mut cap: Vec<TrimEdge> = run.iter().map(|&t| poly.edges[t].clone()).collect();
            cap.push(chord(to, from));
            pieces.extend(vertex_fan(&cap)?);
            Ok(chord(from, to))
        }
    }
}

/// One curve edge and no kernel point: halve the curve and split the
/// polygon along a sight line from the split point, then partition both
/// halves. The chord refinement keeps curve edges shallow, so this path
/// is a fallback for unusually contorted polygons.
fn sight_split(poly: &TrimPolygon, depth: usize) -> Result<Vec<PartitionPiece>> {
    if depth == 0 {
        return Err(Error::MalformedPolygon(
            "kernel point never recovered under curve splitting".into(),
        ));
    }
    let m = poly.edges.len();
    let ei = poly.edges.iter().position(is_alpha).unwrap();
    let e = &poly.edges[ei];
    if e.samples.len() < 3 {
        return Err(Error::MalformedPolygon("curve edge too coarse".into()));
    }
    let mid = e.samples.len() / 2;
    let mpt = e.samples[mid];
    let line = poly.sampled_polyline();
    // Try the other vertices farthest-first; the curve's own endpoints
    // would make a degenerate half.
    let mut cands: Vec<usize> = (0..m).filter(|&j| j != ei && j != (ei + 1) % m).collect();
    cands.sort_by(|&x, &y| {
        let dx = (poly.edges[x].a - mpt).norm();
        let dy = (poly.edges[y].a - mpt).norm();
        dy.partial_cmp(&dx).unwrap()
    });
    for j in cands {
        let v = poly.edges[j].a;
        if !segment_clear(&line, &mpt, &v) {
            continue;
        }
        let first = TrimEdge {
            a: e.a,
            b: mpt,
            kind: e.kind,
            samples: e.samples[..=mid].to_vec(),
        };
        let second = TrimEdge {
            a: mpt,
            b: e.b,
            kind: e.kind,
            samples: e.samples[mid..].to_vec(),
        };
        let mut pa = vec![second];
        let mut t = (ei + 1) % m;
        while t != j {
            pa.push(poly.edges[t].clone());
            t = (t + 1) % m;
        }
        pa.push(chord(v, mpt));
        let mut pb = vec![chord(mpt, v)];
        let mut t = j;
        while t != ei {
            pb.push(poly.edges[t].clone());
            t = (t + 1) % m;
        }
        pb.push(first);
        let wrap = |edges| TrimPolygon {
            edges,
            signs: poly.signs,
        };
        let mut out = partition_inner(&wrap(pa), depth - 1, true)?;
        out.extend(partition_inner(&wrap(pb), depth - 1, true)?);
        return Ok(out);
    }
    Err(Error::MalformedPolygon(
        "no sight line into curved polygon".into(),
    ))
}

/// Interior of segment p-q stays inside the polygon outlined by `line`.
fn segment_clear(line: &[Vec2], p: &Vec2, q: &Vec2) -> bool {
    for k in 1..16 {
        let t = k as f64 / 16.0;
        let x = p + t * (q - p);
        if !point_in_polyline(line, &x) || dist_to_polyline(line, &x) <= 1e-12 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::poly2_from_monomials;
    use crate::grid::Dir;
    use crate::trim::{trim_by_pullbacks, FacetPull, TrimConfig};

    fn straight(a: (f64, f64), b: (f64, f64), kind: TrimEdgeKind) -> TrimEdge {
        TrimEdge::straight(Vec2::new(a.0, a.1), Vec2::new(b.0, b.1), kind)
    }

    fn alpha_edge(samples: Vec<Vec2>) -> TrimEdge {
        TrimEdge {
            a: samples[0],
            b: *samples.last().unwrap(),
            kind: TrimEdgeKind::Alpha {
                facet: Dir::XPos,
                along_flow: true,
            },
            samples,
        }
    }

    fn poly(edges: Vec<TrimEdge>) -> TrimPolygon {
        TrimPolygon {
            edges,
            signs: [0; 6],
        }
    }

    fn square() -> TrimPolygon {
        poly(vec![
            straight((0.0, 0.0), (1.0, 0.0), TrimEdgeKind::Rect),
            straight((1.0, 0.0), (1.0, 1.0), TrimEdgeKind::Rect),
            straight((1.0, 1.0), (0.0, 1.0), TrimEdgeKind::Rect),
            straight((0.0, 1.0), (0.0, 0.0), TrimEdgeKind::Rect),
        ])
    }

    /// Waisted region under y = 0.05 + 1.8 (x - 1/2)^2, whose two bulbs
    /// cannot both be seen from anywhere.
    fn crescent() -> TrimPolygon {
        let samples: Vec<Vec2> = (0..=20)
            .map(|k| {
                let x = 1.0 - k as f64 / 20.0;
                Vec2::new(x, 0.05 + 1.8 * (x - 0.5) * (x - 0.5))
            })
            .collect();
        poly(vec![
            straight((0.0, 0.0), (1.0, 0.0), TrimEdgeKind::Rect),
            straight((1.0, 0.0), (1.0, 0.5), TrimEdgeKind::Rect),
            alpha_edge(samples),
            straight((0.0, 0.5), (0.0, 0.0), TrimEdgeKind::Rect),
        ])
    }

    /// Sampled-polyline areas are exactly additive for every route: the
    /// pieces reuse the curve samples and interior chords cancel. The
    /// chord (linearized) areas are additive too unless a curve edge was
    /// subdivided, so that check is opt-in.
    fn piece_area_sums(poly: &TrimPolygon, pieces: &[PartitionPiece], linearized: bool) {
        if linearized {
            let lin: f64 = pieces.iter().map(|p| p.linearized_area()).sum();
            assert!(
                (lin - poly.linearized_area()).abs() <= 1e-12,
                "linearized {lin} vs {}",
                poly.linearized_area()
            );
        }
        let samp: f64 = pieces
            .iter()
            .map(|p| crate::trim::polyline_area(&p.sampled_polyline()))
            .sum();
        let want = crate::trim::polyline_area(&poly.sampled_polyline());
        assert!((samp - want).abs() <= 1e-12, "sampled {samp} vs {want}");
    }

    #[test]
    fn kernel_of_square_is_center() {
        let z = kernel_point(&square()).unwrap();
        assert!((z - Vec2::new(0.5, 0.5)).norm() <= 1e-9, "{z:?}");
    }

    #[test]
    fn kernel_of_crescent_is_empty() {
        assert!(kernel_point(&crescent()).is_none());
    }

    #[test]
    fn kernel_sees_all_of_a_mild_bulge() {
        // Unit square whose top edge sags to y = 1 - 0.08 sin(pi x).
        let samples: Vec<Vec2> = (0..=32)
            .map(|k| {
                let x = 1.0 - k as f64 / 32.0;
                Vec2::new(x, 1.0 - 0.08 * (std::f64::consts::PI * x).sin())
            })
            .collect();
        let p = poly(vec![
            straight((0.0, 0.0), (1.0, 0.0), TrimEdgeKind::Rect),
            straight((1.0, 0.0), (1.0, 1.0), TrimEdgeKind::Rect),
            alpha_edge(samples),
            straight((0.0, 1.0), (0.0, 0.0), TrimEdgeKind::Rect),
        ]);
        let z = kernel_point(&p).expect("mild bulge keeps a kernel");
        // Sampling oracle: the segment from z to any of 500 boundary
        // points stays inside the polygon.
        let line = p.sampled_polyline();
        let mut perim = 0.0;
        for i in 0..line.len() {
            perim += (line[(i + 1) % line.len()] - line[i]).norm();
        }
        for s in 0..500 {
            let mut target = perim * s as f64 / 500.0;
            let mut bp = line[0];
            for i in 0..line.len() {
                let seg = line[(i + 1) % line.len()] - line[i];
                let len = seg.norm();
                if target <= len {
                    bp = line[i] + seg * (target / len);
                    break;
                }
                target -= len;
            }
            for k in 1..20 {
                let t = k as f64 / 20.0;
                let x = z + t * (bp - z);
                assert!(
                    point_in_polyline(&line, &x) || dist_to_polyline(&line, &x) <= 1e-9,
                    "segment to {bp:?} exits at {x:?}"
                );
            }
        }
    }

    #[test]
    fn linear_quad_fans_into_two_triangles() {
        let pieces = partition(&square()).unwrap();
        assert_eq!(pieces.len(), 2);
        for p in &pieces {
            assert_eq!(p.kind, PieceKind::Triangle);
            assert_eq!(p.alpha_count(), 0);
        }
        piece_area_sums(&square(), &pieces, true);
    }

    #[test]
    fn curved_triangle_is_identity() {
        let samples: Vec<Vec2> = (0..=16)
            .map(|k| {
                let t = k as f64 / 16.0;
                let bump = 0.05 * (std::f64::consts::PI * t).sin();
                Vec2::new(1.0 - t - bump, t + bump)
            })
            .collect();
        let p = poly(vec![
            straight((0.0, 1.0), (0.0, 0.0), TrimEdgeKind::Rect),
            straight((0.0, 0.0), (1.0, 0.0), TrimEdgeKind::Rect),
            alpha_edge(samples),
        ]);
        let pieces = partition(&p).unwrap();
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].kind, PieceKind::Triangle);
        assert_eq!(pieces[0].edges.len(), 3);
        assert!(is_alpha(&pieces[0].edges[0]));
    }

    #[test]
    fn circle_polygons_fan_and_tile() {
        let gamma = poly2_from_monomials(
            2,
            &[
                (2, 0, 1.0),
                (0, 2, 1.0),
                (1, 0, -0.7),
                (0, 1, -0.7),
                (0, 0, 0.35 * 0.35 * 2.0 - 0.04),
            ],
        );
        let pulls = vec![FacetPull {
            dir: Dir::XPos,
            gamma,
        }];
        let trim = trim_by_pullbacks(&pulls, &TrimConfig::default()).unwrap();
        let mut saw_alpha = false;
        for tp in trim.inside.iter().chain(&trim.outside) {
            let pieces = partition(tp).unwrap();
            piece_area_sums(tp, &pieces, true);
            for p in &pieces {
                assert_eq!(p.kind, PieceKind::Triangle, "star-shaped polygons fan");
                assert_eq!(p.edges.len(), 3);
                assert!(p.alpha_count() <= 1);
                assert!(p.linearized_area() > 0.0);
                saw_alpha |= p.alpha_count() == 1;
            }
        }
        assert!(saw_alpha);
    }

    /// Hourglass pinched by two opposing curve edges, with a peaked roof
    /// so one cap survives: exactly one ruled quad plus one cap triangle.
    #[test]
    fn hourglass_takes_the_quad_route() {
        let right: Vec<Vec2> = (0..=32)
            .map(|k| {
                let y = k as f64 / 32.0;
                Vec2::new(1.0 - 0.45 * (std::f64::consts::PI * y).sin(), y)
            })
            .collect();
        let left: Vec<Vec2> = (0..=32)
            .map(|k| {
                let y = 1.0 - k as f64 / 32.0;
                Vec2::new(0.45 * (std::f64::consts::PI * y).sin(), y)
            })
            .collect();
        let p = poly(vec![
            straight((0.0, 0.0), (1.0, 0.0), TrimEdgeKind::Rect),
            alpha_edge(right),
            straight((1.0, 1.0), (0.5, 1.2), TrimEdgeKind::Rect),
            straight((0.5, 1.2), (0.0, 1.0), TrimEdgeKind::Rect),
            alpha_edge(left),
        ]);
        assert!(kernel_point(&p).is_none(), "waist blocks every sight line");
        let pieces = partition(&p).unwrap();
        let quads: Vec<_> = pieces
            .iter()
            .filter(|p| p.kind == PieceKind::QuadQby1)
            .collect();
        let tris: Vec<_> = pieces
            .iter()
            .filter(|p| p.kind == PieceKind::Triangle)
            .collect();
        assert_eq!(quads.len(), 1);
        assert_eq!(tris.len(), 1);
        piece_area_sums(&p, &pieces, true);
        let q = quads[0];
        assert_eq!(q.edges.len(), 4);
        assert!(is_alpha(&q.edges[0]) && is_alpha(&q.edges[2]));
        assert!(!is_alpha(&q.edges[1]) && !is_alpha(&q.edges[3]));
        // The quad's straight sides touch the curves at endpoints only.
        for side in [&q.edges[1], &q.edges[3]] {
            for curve in [&q.edges[0], &q.edges[2]] {
                for k in 1..8 {
                    let t = k as f64 / 8.0;
                    let x = side.a + t * (side.b - side.a);
                    let mut dmin = f64::INFINITY;
                    for w in curve.samples.windows(2) {
                        dmin = dmin.min(dist_point_segment(&x, &w[0], &w[1]));
                    }
                    assert!(dmin > 1e-6, "chord touches curve away from endpoints");
                }
            }
        }
    }

    #[test]
    fn crescent_splits_until_fannable() {
        let c = crescent();
        let pieces = partition(&c).unwrap();
        assert!(pieces.len() >= 3);
        for p in &pieces {
            assert_eq!(p.kind, PieceKind::Triangle);
            assert!(p.alpha_count() <= 1);
            assert!(p.linearized_area() > 0.0);
        }
        piece_area_sums(&c, &pieces, false);
    }
}
