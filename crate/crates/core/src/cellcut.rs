//! Watertight boundary representations of cut cells.
//!
//! For one background cell the solid boundary contributes trimmed,
//! refitted surface pieces; the cell facets contribute flat wall pieces
//! covering the part of each facet rectangle inside the solid (for the
//! inside fragment) or outside it (for the outside fragment). Wall
//! footprints are recovered per facet by a loop walk: every surface
//! piece boundary curve on the facet becomes a directed chord with the
//! footprint on its left, chords chain head to tail through snapped
//! nodes, and open ends are bridged along the facet rectangle's
//! counterclockwise boundary. A facet that carries no chords at all is
//! decided by probing its center against the nearest linearized surface
//! triangle. Boundary curves are fitted once and handed around by exact
//! handle: the surface piece, the inside wall and the outside wall all
//! use the same control points, so the fragments tile every facet with
//! identical polynomial geometry and the volume identities telescope to
//! roundoff regardless of fit quality.

use std::collections::BTreeMap;

use crate::bezier::{BezierCurve, BezierTriangle};
use crate::error::{Error, Result};
use crate::fitting::{
    closest_point_on_curve, closest_point_on_surface, net_from_boundary, parametrize_curve,
    parametrize_triangle, FitQuality, PieceMap, RuledQuad,
};
use crate::geom::{Rect2, Vec2, Vec3};
use crate::grid::{BackgroundCell, Dir, FacetFrame};
use crate::mesh::SurfaceMesh;
use crate::partition::{partition, partition_wall, PartitionPiece, PieceKind};
use crate::trim::{trim_face, TrimConfig, TrimEdge, TrimEdgeKind, TrimPolygon};

/// Snap distance for chord endpoints on a facet, relative to the facet
/// diagonal. Curve endpoints solved independently on the two faces
/// meeting at a mesh edge agree far tighter than this, while genuinely
/// distinct intersection points sit apart on the cell scale.
const NODE_SNAP_REL: f64 = 1e-9;

/// Wall loops with |area| below this fraction of the facet area are
/// dropped; the policy is symmetric because both fragments walk the same
/// chords.
const LOOP_DROP_REL: f64 = 1e-14;

/// Facet samples stored per chord; odd so the middle sample is the same
/// point in both traversal directions (it disambiguates curve handles
/// whose endpoints coincide, as with the two arcs of a closed footprint).
const CHORD_SAMPLES: usize = 9;

/// A coplanar face must cover its facet to this relative tolerance;
/// partially covered facets would need face-to-face trimming on the
/// facet plane, which the walk does not attempt.
const COVER_SLACK_REL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CutConfig {
    /// Requested order of fitted boundary pieces; raised to the mesh
    /// order when lower so exact restrictions stay representable.
    pub order: usize,
    pub trim: TrimConfig,
    /// Relative misfit stall that stops the iterative piece fits.
    pub fit_eps: f64,
}

impl Default for CutConfig {
    fn default() -> Self {
        CutConfig {
            order: 2,
            trim: TrimConfig::default(),
            fit_eps: crate::fitting::ALG_EPS,
        }
    }
}

/// One trimmed piece of the solid boundary inside the cell, oriented
/// outward of the solid.
#[derive(Debug, Clone)]
pub struct SurfacePiece {
    pub map: PieceMap,
    /// Index of the mesh face the piece was cut from.
    pub face: usize,
    /// Set when the source face lies in this cell facet's plane.
    pub on_facet: Option<Dir>,
    pub fit_err: f64,
    pub converged: bool,
}

/// One flat piece of a cell facet, oriented outward of the cell.
#[derive(Debug, Clone)]
pub struct WallPiece {
    pub map: PieceMap,
    pub facet: Dir,
}

/// Closed oriented boundary of one fragment of a cut cell.
#[derive(Debug, Clone, Default)]
pub struct FragmentBoundary {
    pub surface: Vec<SurfacePiece>,
    pub walls: Vec<WallPiece>,
}

impl FragmentBoundary {
    pub fn is_empty(&self) -> bool {
        self.surface.is_empty() && self.walls.is_empty()
    }

    /// All piece maps, surface first, in deterministic order.
    pub fn maps(&self) -> Vec<PieceMap> {
        self.surface
            .iter()
            .map(|s| s.map.clone())
            .chain(self.walls.iter().map(|w| w.map.clone()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CellCut {
    /// Boundary of cell intersect solid.
    pub inside: FragmentBoundary,
    /// Boundary of cell minus solid.
    pub outside: FragmentBoundary,
    pub worst_fit_err: f64,
    pub unconverged_fits: usize,
}

/// Directed boundary curve of the solid footprint on one facet, in facet
/// frame coordinates, oriented the way the surface pieces traverse it
/// (outside fragment's footprint on the left; the inside walk uses the
/// reversal).
#[derive(Debug, Clone)]
struct ChordRec {
    a: Vec2,
    b: Vec2,
    samples: Vec<Vec2>,
}

impl ChordRec {
    fn reversed(&self) -> ChordRec {
        ChordRec {
            a: self.b,
            b: self.a,
            samples: self.samples.iter().rev().copied().collect(),
        }
    }
}

/// Everything a facet accumulates during the per-face stage.
#[derive(Debug, Default)]
struct FacetPot {
    chords: Vec<ChordRec>,
    /// Fitted 3D curves keyed by exact frame endpoints plus middle
    /// sample, both traversal directions registered.
    curves: BTreeMap<[u64; 6], BezierCurve<Vec3>>,
    coplanar: bool,
    /// Footprint area of coplanar faces on this facet.
    coplanar_area: f64,
}

fn key6(a: &Vec2, b: &Vec2, m: &Vec2) -> [u64; 6] {
    [
        a.x.to_bits(),
        a.y.to_bits(),
        b.x.to_bits(),
        b.y.to_bits(),
        m.x.to_bits(),
        m.y.to_bits(),
    ]
}

struct CellCtx<'a> {
    mesh: &'a SurfaceMesh,
    cell: &'a BackgroundCell,
    cfg: &'a CutConfig,
    p_star: usize,
    frames: [FacetFrame; 6],
}

#[derive(Default)]
struct CutState {
    pots: [FacetPot; 6],
    surface: Vec<SurfacePiece>,
    worst_fit_err: f64,
    unconverged: usize,
}

/// Cut one cell against the faces in `candidates` (mesh face indices,
/// pre-binned by bounding box). `Ok(None)` means no face meets the cell
/// and the cell is uncut; classifying it as fully inside or outside the
/// solid is the caller's job.
pub fn cut_cell(
    mesh: &SurfaceMesh,
    candidates: &[usize],
    cell: &BackgroundCell,
    cfg: &CutConfig,
) -> Result<Option<CellCut>> {
    let ctx = CellCtx {
        mesh,
        cell,
        cfg,
        p_star: cfg.order.max(mesh.order),
        frames: Dir::ALL.map(|d| cell.facet_frame(d)),
    };
    let mut st = CutState::default();
    for &fi in candidates {
        process_face(&ctx, &mut st, fi)?;
    }
    if st.surface.is_empty() {
        return Ok(None);
    }
    let probe = LinearProbe::from_pieces(&st.surface);
    let mut walls_in = Vec::new();
    let mut walls_out = Vec::new();
    for dir in Dir::ALL {
        facet_walls(&ctx, &st, dir, &probe, &mut walls_in, &mut walls_out)?;
    }
    let outside_surface: Vec<SurfacePiece> = st
        .surface
        .iter()
        .filter(|s| s.on_facet.is_none())
        .map(|s| SurfacePiece {
            map: s.map.reversed(),
            face: s.face,
            on_facet: None,
            fit_err: s.fit_err,
            converged: s.converged,
        })
        .collect();
    Ok(Some(CellCut {
        inside: FragmentBoundary {
            surface: st.surface,
            walls: walls_in,
        },
        outside: FragmentBoundary {
            surface: outside_surface,
            walls: walls_out,
        },
        worst_fit_err: st.worst_fit_err,
        unconverged_fits: st.unconverged,
    }))
}

// ---------------------------------------------------------------------------
// Stage 1: trim faces, fit surface pieces, register facet chords
// ---------------------------------------------------------------------------

fn process_face(ctx: &CellCtx, st: &mut CutState, fi: usize) -> Result<()> {
    let face = &ctx.mesh.patches[fi];
    let trim = trim_face(face, ctx.cell, &ctx.cfg.trim)?;
    if trim.inside.is_empty() {
        return Ok(());
    }
    if let Some(d) = trim.coplanar {
        let pot = &mut st.pots[d.index()];
        pot.coplanar = true;
        let frame = &ctx.frames[d.index()];
        for poly in &trim.inside {
            let pts: Vec<Vec2> = poly
                .sampled_polyline()
                .iter()
                .map(|p| frame.to_2d(&face.eval(p)))
                .collect();
            pot.coplanar_area += polyline_area(&pts).abs();
        }
    }
    for poly in &trim.inside {
        for pc in partition(poly)? {
            let piece = surface_piece(ctx, st, face, fi, &pc, trim.coplanar)?;
            st.surface.push(piece);
        }
    }
    Ok(())
}

fn surface_piece(
    ctx: &CellCtx,
    st: &mut CutState,
    face: &BezierTriangle,
    fi: usize,
    pc: &PartitionPiece,
    on_facet: Option<Dir>,
) -> Result<SurfacePiece> {
    let mut curves: Vec<BezierCurve<Vec3>> = Vec::with_capacity(pc.edges.len());
    let mut err = 0.0f64;
    let mut converged = true;
    for e in &pc.edges {
        match e.kind {
            TrimEdgeKind::Alpha { facet, .. } => {
                let frame = &ctx.frames[facet.index()];
                let (c3, q) = fit_alpha_curve(face, e, frame, ctx.p_star, ctx.cfg.fit_eps)?;
                err = err.max(q.err);
                converged &= q.converged;
                register_chord(&mut st.pots[facet.index()], &c3, frame);
                curves.push(c3);
            }
            _ => {
                let c3 = face.restrict_to_segment(&e.a, &e.b).elevated_to(ctx.p_star);
                // Boundary curves that coincide with refinement leaf
                // lines arrive as plain reference edges, not as traced
                // facet curves (an axis-aligned zero set in reference
                // coordinates IS a leaf line). They still bound the
                // facet footprint, so detect them by their image and
                // register the exact restriction as the shared curve.
                if let Some(d) = edge_on_facet(face, e, ctx) {
                    if on_facet != Some(d) {
                        register_chord(&mut st.pots[d.index()], &c3, &ctx.frames[d.index()]);
                    }
                }
                curves.push(c3);
            }
        }
    }
    let map = match pc.kind {
        PieceKind::Triangle => {
            let edges = [curves[0].clone(), curves[1].clone(), curves[2].clone()];
            let (c0, c1, c2) = (pc.edges[0].a, pc.edges[1].a, pc.edges[2].a);
            let mut seeds: Vec<Option<Vec2>> = Vec::new();
            let (net, q) = parametrize_triangle(
                &edges,
                |j, xi, x0| {
                    if seeds.len() <= j {
                        seeds.resize(j + 1, None);
                    }
                    let affine = c0 * (1.0 - xi.x - xi.y) + c1 * xi.x + c2 * xi.y;
                    let seed = seeds[j].unwrap_or(affine);
                    let r = closest_point_on_surface(face, x0, &seed)
                        .or_else(|_| closest_point_on_surface(face, x0, &affine))?;
                    seeds[j] = Some(r);
                    Ok(face.eval(&r))
                },
                ctx.cfg.fit_eps,
            )?;
            err = err.max(q.err);
            converged &= q.converged;
            PieceMap::Triangle(net)
        }
        PieceKind::QuadQby1 => PieceMap::Quad(RuledQuad::new(curves[0].clone(), curves[2].reversed())),
    };
    st.worst_fit_err = st.worst_fit_err.max(err);
    if !converged {
        st.unconverged += 1;
    }
    Ok(SurfacePiece {
        map,
        face: fi,
        on_facet,
        fit_err: err,
        converged,
    })
}

/// Fit one boundary curve in its facet plane. The fit runs in the 2D
/// frame, endpoints frozen to the exact frame projections of the traced
/// arc's ends, and lifts back with the plane coordinate snapped, so the
/// control points are exactly in-plane.
fn fit_alpha_curve(
    face: &BezierTriangle,
    e: &TrimEdge,
    frame: &FacetFrame,
    order: usize,
    eps: f64,
) -> Result<(BezierCurve<Vec3>, FitQuality)> {
    let plane = frame.plane();
    let ends = (
        frame.to_2d(&face.eval(&e.a)),
        frame.to_2d(&face.eval(&e.b)),
    );
    let n = 4 * (order + 1);
    let arc = &e.samples;
    let mut seeds: Vec<Vec2> = (0..n)
        .map(|j| {
            let t = j as f64 / (n - 1) as f64;
            arc[(t * (arc.len() - 1) as f64).round() as usize]
        })
        .collect();
    let (c2, quality) = parametrize_curve(
        ends,
        order,
        |j, _t, x0: &Vec2| {
            let x3 = frame.to_3d(x0);
            let xi = closest_point_on_curve(face, &plane, &x3, &seeds[j]).or_else(|_| {
                let alt = nearest_arc_sample(arc, face, &x3);
                closest_point_on_curve(face, &plane, &x3, &alt)
            })?;
            seeds[j] = xi;
            Ok(frame.to_2d(&face.eval(&xi)))
        },
        eps,
    )?;
    let c3 = BezierCurve::new(c2.points.iter().map(|p| frame.to_3d(p)).collect());
    Ok((c3, quality))
}

/// Facet plane containing the whole image of a reference-straight edge,
/// if any. The facet pullback restricted to the segment is a degree-q
/// polynomial, so q + 1 vanishing samples force it to vanish identically;
/// a couple extra guard against coincidences.
fn edge_on_facet(face: &BezierTriangle, e: &TrimEdge, ctx: &CellCtx) -> Option<Dir> {
    let tol = 1e-9 * ctx.cell.aabb.diagonal();
    let n = face.order + 2;
    'dirs: for dir in Dir::ALL {
        let axis = dir.axis();
        let coord = ctx.frames[dir.index()].plane_coord;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let xi = e.a + (e.b - e.a) * t;
            if (face.eval(&xi)[axis] - coord).abs() > tol {
                continue 'dirs;
            }
        }
        return Some(dir);
    }
    None
}

fn nearest_arc_sample(arc: &[Vec2], face: &BezierTriangle, x3: &Vec3) -> Vec2 {
    let mut best = (f64::INFINITY, arc[0]);
    for p in arc {
        let d = (face.eval(p) - x3).norm_squared();
        if d < best.0 {
            best = (d, *p);
        }
    }
    best.1
}

fn register_chord(pot: &mut FacetPot, c3: &BezierCurve<Vec3>, frame: &FacetFrame) {
    let c2 = BezierCurve::new(c3.points.iter().map(|p| frame.to_2d(p)).collect());
    let a = c2.points[0];
    let b = *c2.points.last().unwrap();
    let samples: Vec<Vec2> = (0..CHORD_SAMPLES)
        .map(|k| c2.eval(k as f64 / (CHORD_SAMPLES - 1) as f64))
        .collect();
    // A curve running along the facet rim separates nothing: the
    // rectangle boundary sweep already covers that path, and coincident
    // mesh faces shed such rim curves onto their side facets.
    let eps = NODE_SNAP_REL * frame.rect.diameter();
    let r = frame.rect;
    let on_rim = |p: &Vec2| {
        (p.x - r.min.x).abs() <= eps
            || (r.max.x - p.x).abs() <= eps
            || (p.y - r.min.y).abs() <= eps
            || (r.max.y - p.y).abs() <= eps
    };
    if samples.iter().all(on_rim) {
        return;
    }
    let m = samples[samples.len() / 2];
    pot.curves.insert(key6(&a, &b, &m), c3.clone());
    pot.curves.insert(key6(&b, &a, &m), c3.reversed());
    pot.chords.push(ChordRec { a, b, samples });
}

// ---------------------------------------------------------------------------
// Stage 2: per-facet wall assembly
// ---------------------------------------------------------------------------

fn facet_walls(
    ctx: &CellCtx,
    st: &CutState,
    dir: Dir,
    probe: &LinearProbe,
    walls_in: &mut Vec<WallPiece>,
    walls_out: &mut Vec<WallPiece>,
) -> Result<()> {
    let pot = &st.pots[dir.index()];
    let frame = &ctx.frames[dir.index()];
    let ext = frame.rect.extent();
    let rect_area = ext.x * ext.y;
    if pot.coplanar {
        if !pot.chords.is_empty() {
            return Err(Error::TrimDegenerate(
                "facet carries both a coplanar face and crossing curves".into(),
            ));
        }
        if pot.coplanar_area >= (1.0 - COVER_SLACK_REL) * rect_area {
            // The solid boundary itself tiles this facet; neither
            // fragment has a wall here.
            return Ok(());
        }
        return Err(Error::TrimDegenerate(
            "coplanar face covers its facet only partially".into(),
        ));
    }
    if pot.chords.is_empty() {
        let center = frame.to_3d(&frame.rect.center());
        if probe.inside(&center) {
            walls_in.push(full_rect_piece(frame));
        } else {
            walls_out.push(full_rect_piece(frame));
        }
        return Ok(());
    }
    let reversed: Vec<ChordRec> = pot.chords.iter().map(ChordRec::reversed).collect();
    side_walls(&reversed, frame, &pot.curves, ctx.p_star, walls_in)?;
    side_walls(&pot.chords, frame, &pot.curves, ctx.p_star, walls_out)?;
    Ok(())
}

/// Walk one side's loops and emit its wall pieces.
fn side_walls(
    chords: &[ChordRec],
    frame: &FacetFrame,
    curves: &BTreeMap<[u64; 6], BezierCurve<Vec3>>,
    p_star: usize,
    out: &mut Vec<WallPiece>,
) -> Result<()> {
    let ext = frame.rect.extent();
    let rect_area = ext.x * ext.y;
    for lp in Walker::new(frame.rect, chords).walk()? {
        let poly = loop_polygon(&lp, chords, frame.dir);
        let area = polyline_area(&poly.sampled_polyline());
        if area.abs() <= LOOP_DROP_REL * rect_area {
            continue;
        }
        if area < 0.0 {
            return Err(Error::TrimDegenerate(
                "facet footprint loop with negative orientation (hole)".into(),
            ));
        }
        wall_pieces(&poly, frame, curves, p_star, out)?;
    }
    Ok(())
}

fn loop_polygon(lp: &[WalkEdge], chords: &[ChordRec], facet: Dir) -> TrimPolygon {
    let mut edges = Vec::with_capacity(lp.len());
    for we in lp {
        match we {
            WalkEdge::Chord(i) => {
                let c = &chords[*i];
                edges.push(TrimEdge {
                    a: c.a,
                    b: c.b,
                    kind: TrimEdgeKind::Alpha {
                        facet,
                        along_flow: true,
                    },
                    samples: c.samples.clone(),
                });
            }
            WalkEdge::Seg(p, q) => edges.push(TrimEdge::straight(*p, *q, TrimEdgeKind::Rect)),
        }
    }
    TrimPolygon {
        edges,
        signs: [0; 6],
    }
}

/// Partition a wall footprint polygon and lift its pieces to 3D. Curved
/// edges are resolved through the facet's handle map so they reuse the
/// exact fitted control points; straight edges are in-plane lines.
fn wall_pieces(
    poly: &TrimPolygon,
    frame: &FacetFrame,
    curves: &BTreeMap<[u64; 6], BezierCurve<Vec3>>,
    p_star: usize,
    out: &mut Vec<WallPiece>,
) -> Result<()> {
    for pc in partition_wall(poly)? {
        let order = if pc.alpha_count() > 0 { p_star } else { 1 };
        let mut cs: Vec<BezierCurve<Vec3>> = Vec::with_capacity(pc.edges.len());
        for e in &pc.edges {
            if matches!(e.kind, TrimEdgeKind::Alpha { .. }) {
                let m = e.samples[e.samples.len() / 2];
                let c = curves.get(&key6(&e.a, &e.b, &m)).ok_or_else(|| {
                    Error::NonManifoldInput("wall curve handle lost in partitioning".into())
                })?;
                cs.push(c.clone());
            } else {
                cs.push(line3(&frame.to_3d(&e.a), &frame.to_3d(&e.b), order));
            }
        }
        let map = match pc.kind {
            PieceKind::Triangle => PieceMap::Triangle(net_from_boundary(&[
                cs[0].clone(),
                cs[1].clone(),
                cs[2].clone(),
            ])),
            PieceKind::QuadQby1 => {
                PieceMap::Quad(RuledQuad::new(cs[0].clone(), cs[2].reversed()))
            }
        };
        out.push(WallPiece {
            map,
            facet: frame.dir,
        });
    }
    Ok(())
}

fn line3(a: &Vec3, b: &Vec3, order: usize) -> BezierCurve<Vec3> {
    BezierCurve::new(
        (0..=order)
            .map(|k| {
                let t = k as f64 / order as f64;
                a * (1.0 - t) + b * t
            })
            .collect(),
    )
}

/// The whole facet rectangle as a single bilinear piece with outward
/// normal.
fn full_rect_piece(frame: &FacetFrame) -> WallPiece {
    let r = frame.rect;
    let c0 = line3(
        &frame.to_3d(&r.min),
        &frame.to_3d(&Vec2::new(r.max.x, r.min.y)),
        1,
    );
    let c1 = line3(
        &frame.to_3d(&Vec2::new(r.min.x, r.max.y)),
        &frame.to_3d(&r.max),
        1,
    );
    WallPiece {
        map: PieceMap::Quad(RuledQuad::new(c0, c1)),
        facet: frame.dir,
    }
}

/// Signed area of a closed polyline.
fn polyline_area(pts: &[Vec2]) -> f64 {
    let mut s = 0.0;
    for k in 0..pts.len() {
        let a = pts[k];
        let b = pts[(k + 1) % pts.len()];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

// ---------------------------------------------------------------------------
// Facet loop walk
// ---------------------------------------------------------------------------

enum WalkEdge {
    Chord(usize),
    Seg(Vec2, Vec2),
}

/// Chains directed chords into closed loops over a facet rectangle.
/// Chord ends meeting within the snap distance share a node; at a node
/// with several outgoing chords the walk takes the sharpest left turn,
/// which keeps the footprint region connected on the left. A chord end
/// on the rectangle boundary continues counterclockwise along the
/// boundary (inserting corners) to the next chord start or back to the
/// loop's starting node.
struct Walker<'a> {
    rect: Rect2,
    eps: f64,
    chords: &'a [ChordRec],
    /// (start node, end node) per chord.
    ends: Vec<(usize, usize)>,
    nodes: Vec<Vec2>,
    used: Vec<bool>,
}

impl<'a> Walker<'a> {
    fn new(rect: Rect2, chords: &'a [ChordRec]) -> Self {
        let eps = NODE_SNAP_REL * rect.diameter();
        let mut nodes: Vec<Vec2> = Vec::new();
        let node_of = |p: &Vec2, nodes: &mut Vec<Vec2>| -> usize {
            if let Some(i) = nodes.iter().position(|q| (q - p).norm() <= eps) {
                return i;
            }
            nodes.push(*p);
            nodes.len() - 1
        };
        let ends = chords
            .iter()
            .map(|c| (node_of(&c.a, &mut nodes), node_of(&c.b, &mut nodes)))
            .collect();
        Walker {
            rect,
            eps,
            chords,
            ends,
            nodes,
            used: vec![false; chords.len()],
        }
    }

    /// Boundary parameter in [0, 4): side + fraction, sides
    /// counterclockwise from the bottom. Corners canonicalize to the
    /// start of the outgoing side.
    fn bparam(&self, p: &Vec2) -> Option<f64> {
        let (lo, hi) = (self.rect.min, self.rect.max);
        let ext = self.rect.extent();
        let d = [
            (p.y - lo.y).abs(),
            (p.x - hi.x).abs(),
            (p.y - hi.y).abs(),
            (p.x - lo.x).abs(),
        ];
        let m = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if m > self.eps {
            return None;
        }
        let s = if d[0] == m {
            ((p.x - lo.x) / ext.x).clamp(0.0, 1.0)
        } else if d[1] == m {
            1.0 + ((p.y - lo.y) / ext.y).clamp(0.0, 1.0)
        } else if d[2] == m {
            2.0 + ((hi.x - p.x) / ext.x).clamp(0.0, 1.0)
        } else {
            3.0 + ((hi.y - p.y) / ext.y).clamp(0.0, 1.0)
        };
        Some(s % 4.0)
    }

    fn bpoint(&self, s: f64) -> Vec2 {
        let (lo, hi) = (self.rect.min, self.rect.max);
        let ext = self.rect.extent();
        let side = (s.floor() as isize).rem_euclid(4) as usize;
        let f = s - s.floor();
        match side {
            0 => Vec2::new(lo.x + f * ext.x, lo.y),
            1 => Vec2::new(hi.x, lo.y + f * ext.y),
            2 => Vec2::new(hi.x - f * ext.x, hi.y),
            _ => Vec2::new(lo.x, hi.y - f * ext.y),
        }
    }

    /// Direction of a chord leaving its start.
    fn out_dir(&self, i: usize) -> Vec2 {
        let s = &self.chords[i].samples;
        for k in 1..s.len() {
            let d = s[k] - s[0];
            if d.norm() > 1e-14 {
                return d;
            }
        }
        self.chords[i].b - self.chords[i].a
    }

    /// Direction of a chord arriving at its end.
    fn in_dir(&self, i: usize) -> Vec2 {
        let s = &self.chords[i].samples;
        let last = s[s.len() - 1];
        for k in (0..s.len() - 1).rev() {
            let d = last - s[k];
            if d.norm() > 1e-14 {
                return d;
            }
        }
        self.chords[i].b - self.chords[i].a
    }

    /// Unused chord leaving `node`, taking the sharpest left turn
    /// relative to the incoming direction (smallest clockwise angle from
    /// the reversed incoming direction); a straight U-turn ranks last.
    fn pick_chord(&self, node: usize, incoming: &Vec2) -> Option<usize> {
        let tau = std::f64::consts::TAU;
        let back = (-incoming.y).atan2(-incoming.x);
        let mut best: Option<(f64, usize)> = None;
        for i in 0..self.chords.len() {
            if self.used[i] || self.ends[i].0 != node {
                continue;
            }
            let w = self.out_dir(i);
            let mut d = (back - w.y.atan2(w.x)).rem_euclid(tau);
            if d < 1e-9 {
                d += tau;
            }
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }

    fn walk(mut self) -> Result<Vec<Vec<WalkEdge>>> {
        let mut loops = Vec::new();
        for start in 0..self.chords.len() {
            if self.used[start] {
                continue;
            }
            let start_node = self.ends[start].0;
            let mut edges: Vec<WalkEdge> = Vec::new();
            let mut cur = start;
            let budget = 4 * self.chords.len() + 32;
            let mut steps = 0;
            loop {
                steps += 1;
                if steps > budget {
                    return Err(Error::NonManifoldInput(
                        "facet loop walk did not close".into(),
                    ));
                }
                self.used[cur] = true;
                edges.push(WalkEdge::Chord(cur));
                let endn = self.ends[cur].1;
                if endn == start_node {
                    break;
                }
                let incoming = self.in_dir(cur);
                if let Some(next) = self.pick_chord(endn, &incoming) {
                    cur = next;
                    continue;
                }
                let p = self.nodes[endn];
                let Some(s0) = self.bparam(&p) else {
                    return Err(Error::NonManifoldInput(
                        "curve chord dead-ends inside a facet".into(),
                    ));
                };
                // Nearest counterclockwise event: an unused chord start
                // on the boundary, or the loop's own starting node.
                let mut best: Option<(f64, Option<usize>)> = None;
                for i in 0..self.chords.len() {
                    if self.used[i] {
                        continue;
                    }
                    if let Some(si) = self.bparam(&self.nodes[self.ends[i].0]) {
                        let mut d = (si - s0).rem_euclid(4.0);
                        if d <= 1e-12 {
                            d += 4.0;
                        }
                        if best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, Some(i)));
                        }
                    }
                }
                if let Some(ss) = self.bparam(&self.nodes[start_node]) {
                    let mut d = (ss - s0).rem_euclid(4.0);
                    if d <= 1e-12 {
                        d += 4.0;
                    }
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, None));
                    }
                }
                let Some((delta, event)) = best else {
                    return Err(Error::NonManifoldInput(
                        "boundary walk found no continuation".into(),
                    ));
                };
                let target = match event {
                    Some(i) => self.nodes[self.ends[i].0],
                    None => self.nodes[start_node],
                };
                let len_tol = 1e-13 * self.rect.diameter();
                let mut scur = s0;
                let mut pcur = p;
                loop {
                    let corner = scur.floor() + 1.0;
                    if corner < s0 + delta - 1e-12 {
                        let q = self.bpoint(corner % 4.0);
                        if (q - pcur).norm() > len_tol {
                            edges.push(WalkEdge::Seg(pcur, q));
                        }
                        pcur = q;
                        scur = corner;
                    } else {
                        if (target - pcur).norm() > len_tol {
                            edges.push(WalkEdge::Seg(pcur, target));
                        }
                        break;
                    }
                }
                match event {
                    Some(i) => cur = i,
                    None => break,
                }
            }
            loops.push(edges);
        }
        Ok(loops)
    }
}

// ---------------------------------------------------------------------------
// Linearized inside/outside probe
// ---------------------------------------------------------------------------

/// Corner-triangle linearization of the cell's surface pieces, for
/// classifying facets the cut boundary does not touch: the probe point's
/// side of the nearest linearized triangle decides, ties resolved toward
/// the triangle whose normal is most aligned with the connecting
/// segment.
struct LinearProbe {
    /// (corner, corner, corner, unnormalized normal)
    tris: Vec<[Vec3; 4]>,
}

impl LinearProbe {
    fn from_pieces(pieces: &[SurfacePiece]) -> Self {
        let mut tris = Vec::new();
        let mut push = |a: Vec3, b: Vec3, c: Vec3| {
            let n = (b - a).cross(&(c - a));
            if n.norm() > 1e-30 {
                tris.push([a, b, c, n]);
            }
        };
        for sp in pieces {
            match &sp.map {
                PieceMap::Triangle(_) => {
                    push(
                        sp.map.eval(0.0, 0.0),
                        sp.map.eval(1.0, 0.0),
                        sp.map.eval(0.0, 1.0),
                    );
                }
                PieceMap::Quad(_) => {
                    let p00 = sp.map.eval(0.0, 0.0);
                    let p10 = sp.map.eval(1.0, 0.0);
                    let p11 = sp.map.eval(1.0, 1.0);
                    let p01 = sp.map.eval(0.0, 1.0);
                    push(p00, p10, p11);
                    push(p00, p11, p01);
                }
            }
        }
        LinearProbe { tris }
    }

    fn inside(&self, x: &Vec3) -> bool {
        let mut best: Option<(f64, f64, f64)> = None; // (dist2, |align|, signed)
        for t in &self.tris {
            let cp = closest_point_triangle(x, &t[0], &t[1], &t[2]);
            let d = x - cp;
            let d2 = d.norm_squared();
            let sg = t[3].dot(&d);
            let align = sg.abs() / (t[3].norm() * d2.sqrt()).max(1e-300);
            let better = match best {
                None => true,
                Some((bd2, bal, _)) => {
                    if d2 < bd2 * (1.0 - 1e-9) {
                        true
                    } else {
                        d2 <= bd2 * (1.0 + 1e-9) && align > bal
                    }
                }
            };
            if better {
                best = Some((d2, align, sg));
            }
        }
        best.is_some_and(|(_, _, sg)| sg < 0.0)
    }
}

fn closest_point_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
