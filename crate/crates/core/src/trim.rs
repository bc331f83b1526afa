//! Trimming one Bezier-triangle face against one background cell.
//!
//! The face is cut by the pullbacks of the six facet planes, each an
//! order-q Bernstein polynomial on the reference triangle. The work is
//! organized as in the cutting pipeline's reference-space stage:
//!
//! 1. Axis-aligned kd refinement of the reference domain so that every
//!    pullback zero set decomposes into strictly monotone arcs with all
//!    structural points (axis-aligned tangencies, curve-curve and
//!    curve-diagonal intersections) on leaf boundaries.
//! 2. Per leaf and per plane, boundary intersections are paired into
//!    oriented alpha arcs; pairings are verified by tracing the implicit
//!    curve, never trusted from sorting alone.
//! 3. Arcs split each leaf into nonlinear polygons; each polygon is
//!    classified inside/outside the cell and tagged with the pullback
//!    signs it is known to have.
//!
//! An extra refinement loop bounds every arc's relative chord deviation,
//! which downstream parametrization relies on.
//!
//! Orientation convention: walking an arc in its flow direction (entry to
//! exit) keeps the pullback's negative side, i.e. the cell interior, on
//! the left. Polygons are counterclockwise.

use crate::bezier::{BernsteinPoly2, BezierTriangle};
use crate::error::{Error, Result};
use crate::geom::{dist_point_segment, lex_cmp_2, Rect2, Vec2};
use crate::grid::{BackgroundCell, Dir};
use crate::intersect::{aa_critical_points, classify_roots_probe, plane_pullback, TANGENCY_PROBE};
use crate::rootfind::{isolate_univariate, solve_bivariate};

#[derive(Debug, Clone, Copy)]
pub struct TrimConfig {
    pub root_tol: f64,
    /// Maximum relative chord deviation of an alpha arc.
    pub chord_max: f64,
    /// Snapping distance for boundary intersection points.
    pub snap_tol: f64,
}

impl Default for TrimConfig {
    fn default() -> Self {
        TrimConfig {
            root_tol: 1e-12,
            chord_max: 0.1,
            snap_tol: 1e-10,
        }
    }
}

/// Number of interior samples traced per arc for verification, chord
/// bounding, and downstream fitting seeds.
const ARC_SAMPLES: usize = 8;

/// Roots whose pullback gradient is this small (relative) are isolated
/// touch points, not crossings.
const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrimEdgeKind {
    /// Axis-aligned piece of the reference rectangle structure.
    Rect,
    /// Piece of the reference triangle's diagonal edge.
    Diagonal,
    /// Straight interior chord introduced by partitioning; lies in the
    /// face interior, never on a cell facet or patch boundary.
    Chord,
    /// Monotone arc of the zero set of facet `facet`'s pullback.
    /// `along_flow` is true when the edge traversal (a to b) matches the
    /// arc's flow direction, which keeps the cell interior on the left.
    Alpha { facet: Dir, along_flow: bool },
}

#[derive(Debug, Clone)]
pub struct TrimEdge {
    pub a: Vec2,
    pub b: Vec2,
    pub kind: TrimEdgeKind,
    /// On-edge samples from a to b inclusive; for straight edges just the
    /// endpoints, for alpha edges traced curve points.
    pub samples: Vec<Vec2>,
}

impl TrimEdge {
    pub fn straight(a: Vec2, b: Vec2, kind: TrimEdgeKind) -> Self {
        TrimEdge {
            a,
            b,
            kind,
            samples: vec![a, b],
        }
    }
}

/// Closed counterclockwise polygon in the reference triangle; edge i runs
/// from its `a` to `b`, with `b` equal to edge i+1's `a`.
#[derive(Debug, Clone)]
pub struct TrimPolygon {
    pub edges: Vec<TrimEdge>,
    /// Known sign of each facet pullback on this polygon, indexed by
    /// `Dir::index`; 0 when not established.
    pub signs: [i8; 6],
}

impl TrimPolygon {
    /// The whole reference triangle.
    pub fn whole_reference() -> Self {
        let v0 = Vec2::new(0.0, 0.0);
        let v1 = Vec2::new(1.0, 0.0);
        let v2 = Vec2::new(0.0, 1.0);
        TrimPolygon {
            edges: vec![
                TrimEdge::straight(v0, v1, TrimEdgeKind::Rect),
                TrimEdge::straight(v1, v2, TrimEdgeKind::Diagonal),
                TrimEdge::straight(v2, v0, TrimEdgeKind::Rect),
            ],
            signs: [0; 6],
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vec2> {
        self.edges.iter().map(|e| &e.a)
    }

    /// Shoelace area of the vertex polygon (alpha edges as chords).
    pub fn linearized_area(&self) -> f64 {
        let mut s = 0.0;
        for e in &self.edges {
            s += e.a.x * e.b.y - e.b.x * e.a.y;
        }
        0.5 * s
    }

    /// Polyline approximation using the stored arc samples.
    pub fn sampled_polyline(&self) -> Vec<Vec2> {
        let mut out = Vec::new();
        for e in &self.edges {
            for p in &e.samples[..e.samples.len() - 1] {
                out.push(*p);
            }
        }
        out
    }

    pub fn alpha_edges(&self) -> impl Iterator<Item = &TrimEdge> {
        self.edges
            .iter()
            .filter(|e| matches!(e.kind, TrimEdgeKind::Alpha { .. }))
    }
}

/// Result of trimming one face against one cell.
#[derive(Debug, Clone)]
pub struct FaceTrim {
    /// Polygons of the face inside the cell.
    pub inside: Vec<TrimPolygon>,
    /// The complement within the face (used by conservation checks).
    pub outside: Vec<TrimPolygon>,
    /// Set when the face lies exactly in one of the cell's facet planes
    /// with its normal leaving the cell through it; the mirror cell on
    /// the other side of the plane sees the same face as all-outside.
    pub coplanar: Option<Dir>,
    /// kd leaves of the refinement, for diagnostics and tests.
    pub leaves: Vec<Rect2>,
}

impl FaceTrim {
    fn all_outside() -> Self {
        FaceTrim {
            inside: Vec::new(),
            outside: vec![TrimPolygon::whole_reference()],
            coplanar: None,
            leaves: Vec::new(),
        }
    }

    fn all_inside(coplanar: Option<Dir>) -> Self {
        FaceTrim {
            inside: vec![TrimPolygon::whole_reference()],
            outside: Vec::new(),
            coplanar,
            leaves: Vec::new(),
        }
    }
}

/// One active facet pullback.
#[derive(Debug, Clone)]
pub struct FacetPull {
    pub dir: Dir,
    pub gamma: BernsteinPoly2,
}

/// Trim `face` against `cell`. The caller is expected to have pre-filtered
/// by bounding boxes; faces with no overlap simply come back all-outside.
pub fn trim_face(
    face: &BezierTriangle,
    cell: &BackgroundCell,
    cfg: &TrimConfig,
) -> Result<FaceTrim> {
    let face_scale = face.diameter().max(1e-30);
    let mut coplanar = None;
    let mut pulls: Vec<FacetPull> = Vec::new();
    for dir in Dir::ALL {
        let gamma = plane_pullback(face, &cell.facet_plane(dir));
        let scale = gamma.coeff_inf_norm();
        if scale <= 1e-13 * face_scale {
            // The face lies in this facet plane. Exactly one of the two
            // cells meeting at the plane claims it: the one the outward
            // surface normal exits through this facet, so the material
            // sits on the cell's side and the face closes its boundary.
            let n = face.normal(&Vec2::new(1.0 / 3.0, 1.0 / 3.0));
            if n.dot(&dir.normal()) > 0.0 {
                coplanar = Some(dir);
                continue;
            }
            return Ok(FaceTrim::all_outside());
        }
        let (lo, hi) = gamma.coeff_range();
        if lo >= 0.0 {
            // Entirely on or beyond this facet.
            return Ok(FaceTrim::all_outside());
        }
        if hi <= 0.0 {
            continue; // inside with respect to this facet everywhere
        }
        pulls.push(FacetPull { dir, gamma });
    }
    if pulls.is_empty() {
        return Ok(FaceTrim::all_inside(coplanar));
    }
    let mut trim = trim_by_pullbacks(&pulls, cfg)?;
    trim.coplanar = coplanar;
    Ok(trim)
}

/// Core reference-space trim against an arbitrary set of pullbacks; the
/// cell interior is where all pullbacks are negative. Exposed so the
/// geometry can be driven with synthetic configurations.
pub fn trim_by_pullbacks(pulls: &[FacetPull], cfg: &TrimConfig) -> Result<FaceTrim> {
    let mut leaves = vec![Rect2::unit()];
    ref1(pulls, cfg, &mut leaves)?;

    // Chord-bounding loop: trace every arc, add cuts through on-curve
    // midpoints until all relative deviations are within bounds. Re-runs
    // connect from scratch after each round of cuts.
    let mut rounds = 0usize;
    let connected: Vec<(Rect2, LeafPoly, Vec<Arc>)> = loop {
        rounds += 1;
        if rounds > 64 {
            return Err(Error::TrimDegenerate(
                "chord refinement did not converge".into(),
            ));
        }
        leaves.sort_by(|a, b| lex_cmp_2(&a.min, &b.min));
        let mut out = Vec::with_capacity(leaves.len());
        let mut cuts: Vec<(Vec2, usize)> = Vec::new();
        for rect in &leaves {
            let Some(poly) = leaf_polygon(rect) else {
                continue;
            };
            let mut arcs = Vec::new();
            for pull in pulls {
                arcs.extend(connect(&poly, pull, cfg)?);
            }
            for arc in &arcs {
                if let Some(cut) = chord_violation(arc, cfg) {
                    cuts.push(cut);
                }
            }
            out.push((*rect, poly, arcs));
        }
        if cuts.is_empty() {
            break out;
        }
        for (p, axis) in cuts {
            apply_cut(&mut leaves, &p, axis);
        }
    };

    // Split each leaf along its arcs and classify the polygons.
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for (_, poly, arcs) in &connected {
        for mut tp in ref2(poly, arcs, cfg)? {
            if classify_polygon(&mut tp, pulls, cfg)? {
                inside.push(tp);
            } else {
                outside.push(tp);
            }
        }
    }
    Ok(FaceTrim {
        inside,
        outside,
        coplanar: None,
        leaves,
    })
}

fn degenerate(e: Error, what: &str) -> Error {
    match e {
        Error::MaxDepth(_) | Error::IllPosed | Error::NoConvergence(_) => {
            Error::TrimDegenerate(what.to_string())
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// ref1: axis-aligned kd refinement
// ---------------------------------------------------------------------------

/// Splits the kd leaf owning `p` at coordinate p[axis]. Points on a leaf
/// boundary along the cut axis are no-ops (the cut line already exists).
fn apply_cut(leaves: &mut Vec<Rect2>, p: &Vec2, axis: usize) {
    const EPS: f64 = 1e-12;
    let mut best: Option<usize> = None;
    for (i, r) in leaves.iter().enumerate() {
        let inside = (0..2).all(|a| {
            let above = p[a] >= r.min[a] - EPS;
            let below = p[a] < r.max[a] - EPS || (r.max[a] >= 1.0 - EPS && p[a] <= r.max[a] + EPS);
            above && below
        });
        if !inside {
            continue;
        }
        if p[axis] <= r.min[axis] + EPS || p[axis] >= r.max[axis] - EPS {
            continue; // the cut line is (already) a boundary here
        }
        let better = match best {
            None => true,
            Some(b) => lex_cmp_2(&r.min, &leaves[b].min) == std::cmp::Ordering::Less,
        };
        if better {
            best = Some(i);
        }
    }
    if let Some(i) = best {
        let (a, b) = leaves[i].split(axis, p[axis]);
        leaves[i] = a;
        leaves.push(b);
    }
}

fn ref1(pulls: &[FacetPull], cfg: &TrimConfig, leaves: &mut Vec<Rect2>) -> Result<()> {
    // Step 1: isolate axis-aligned tangencies. A point where the
    // derivative along `axis` vanishes has its curve tangent parallel to
    // `axis`; cutting perpendicular to the tangent separates the two
    // monotone branches meeting there.
    for pull in pulls {
        for axis in 0..2 {
            let pts = aa_critical_points(&pull.gamma, axis, cfg.root_tol)
                .map_err(|e| degenerate(e, "critical-point solve failed"))?;
            for p in pts {
                apply_cut(leaves, &p, axis);
            }
        }
    }

    // Step 2: make curve-curve and curve-diagonal intersections kd
    // vertices by cutting both axes through them.
    let mut xpts: Vec<Vec2> = Vec::new();
    for i in 0..pulls.len() {
        for j in i + 1..pulls.len() {
            let pts = solve_bivariate(&pulls[i].gamma, &pulls[j].gamma, cfg.root_tol)
                .map_err(|e| degenerate(e, "curve-curve solve failed"))?;
            xpts.extend(pts);
        }
        let seg = pulls[i]
            .gamma
            .restrict_to_segment(&Vec2::new(1.0, 0.0), &Vec2::new(0.0, 1.0));
        if seg.coeff_inf_norm() > 1e-14 * pulls[i].gamma.coeff_inf_norm() {
            let hits = classify_roots_probe(&seg, cfg.root_tol, TANGENCY_PROBE)
                .map_err(|e| degenerate(e, "curve-diagonal solve failed"))?;
            for h in hits {
                xpts.push(Vec2::new(1.0 - h.t, h.t));
            }
        }
    }
    xpts.sort_by(lex_cmp_2);
    xpts.dedup_by(|a, b| (*a - *b).norm() <= 1e-12);
    for p in &xpts {
        apply_cut(leaves, p, 0);
        apply_cut(leaves, p, 1);
    }

    // Step 4 fallback (normally vacuous after step 2): no two distinct
    // intersection points may share a leaf interior. Splits on the midline
    // along the axis of larger separation.
    for _ in 0..64 {
        let mut did = false;
        leaves.sort_by(|a, b| lex_cmp_2(&a.min, &b.min));
        'scan: for i in 0..leaves.len() {
            let r = leaves[i];
            let interior: Vec<&Vec2> = xpts
                .iter()
                .filter(|p| {
                    (0..2).all(|a| p[a] > r.min[a] + 1e-9 && p[a] < r.max[a] - 1e-9)
                })
                .collect();
            if interior.len() >= 2 {
                let (p, q) = (interior[0], interior[1]);
                let d = q - p;
                let axis = if d.x.abs() >= d.y.abs() { 0 } else { 1 };
                let mid = 0.5 * (p + q);
                apply_cut(leaves, &mid, axis);
                did = true;
                break 'scan;
            }
        }
        if !did {
            break;
        }
    }

    // Step 3: each pullback zero set may cross a leaf boundary at most
    // twice; bisect until that holds. With monotone branches this
    // separates distinct components sharing a leaf.
    for pass in 0..64 {
        let mut cuts: Vec<(Vec2, usize)> = Vec::new();
        leaves.sort_by(|a, b| lex_cmp_2(&a.min, &b.min));
        for rect in leaves.iter() {
            let Some(poly) = leaf_polygon(rect) else {
                continue;
            };
            for pull in pulls {
                let pts = boundary_points(&poly, &pull.gamma, cfg)?;
                if pts.len() > 2 {
                    let axis = rect.longest_axis();
                    cuts.push((rect.center(), axis));
                    break;
                }
            }
        }
        if cuts.is_empty() {
            break;
        }
        if pass == 63 {
            return Err(Error::TrimDegenerate(
                "could not separate curve components".into(),
            ));
        }
        for (p, axis) in cuts {
            apply_cut(leaves, &p, axis);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Leaf polygons
// ---------------------------------------------------------------------------

/// Convex leaf region: a kd rectangle clipped against the reference
/// triangle. Vertices counterclockwise; `kinds[i]` types the edge from
/// `verts[i]` to the next vertex.
#[derive(Debug, Clone)]
pub(crate) struct LeafPoly {
    pub verts: Vec<Vec2>,
    pub kinds: Vec<TrimEdgeKind>,
}

impl LeafPoly {
    fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.verts[i], self.verts[(i + 1) % self.verts.len()])
    }

    fn area(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.verts.len() {
            let (a, b) = self.edge(i);
            s += a.x * b.y - b.x * a.y;
        }
        0.5 * s
    }

    fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.verts.len() {
            for j in i + 1..self.verts.len() {
                d = d.max((self.verts[i] - self.verts[j]).norm());
            }
        }
        d
    }

    /// Strict interior test with margin; the polygon is convex.
    fn contains_inside(&self, p: &Vec2, margin: f64) -> bool {
        (0..self.verts.len()).all(|i| {
            let (a, b) = self.edge(i);
            (b - a).perp(&(p - a)) > margin
        })
    }
}

/// Clip a kd rectangle against the reference triangle's diagonal.
/// Returns None when the remainder has no area.
fn leaf_polygon(rect: &Rect2) -> Option<LeafPoly> {
    const TOL: f64 = 1e-13;
    let corners = [
        rect.min,
        Vec2::new(rect.max.x, rect.min.y),
        rect.max,
        Vec2::new(rect.min.x, rect.max.y),
    ];
    let s = |p: &Vec2| 1.0 - p.x - p.y;
    let mut verts: Vec<Vec2> = Vec::new();
    let mut kinds: Vec<TrimEdgeKind> = Vec::new();
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let (sa, sb) = (s(&a), s(&b));
        let a_in = sa >= -TOL;
        let b_in = sb >= -TOL;
        if a_in {
            verts.push(a);
            kinds.push(TrimEdgeKind::Rect);
            if !b_in && sa > TOL {
                let t = sa / (sa - sb);
                verts.push(a + (b - a) * t);
                kinds.push(TrimEdgeKind::Diagonal);
            } else if !b_in {
                // a sits on the diagonal itself; the outgoing edge is the
                // diagonal segment to wherever the polygon re-enters.
                *kinds.last_mut().unwrap() = TrimEdgeKind::Diagonal;
            }
        } else if b_in && sb > TOL {
            let t = sa / (sa - sb);
            verts.push(a + (b - a) * t);
            kinds.push(TrimEdgeKind::Rect);
        }
    }
    // Drop zero-length edges from corners lying exactly on the diagonal;
    // skipping edge i drops its start vertex, which coincides with the
    // next one.
    let n0 = verts.len();
    let mut vclean = Vec::with_capacity(n0);
    let mut kclean = Vec::with_capacity(n0);
    for i in 0..n0 {
        let j = (i + 1) % n0;
        if (verts[i] - verts[j]).norm() <= 1e-14 {
            continue;
        }
        vclean.push(verts[i]);
        kclean.push(kinds[i]);
    }
    let poly = LeafPoly {
        verts: vclean,
        kinds: kclean,
    };
    if poly.verts.len() < 3 || poly.area() < 1e-16 {
        return None;
    }
    Some(poly)
}

// ---------------------------------------------------------------------------
// connect: boundary intersections and arc pairing
// ---------------------------------------------------------------------------

/// A boundary intersection, addressed by its cyclic position, typed as
/// the curve entering or leaving the polygon there.
#[derive(Debug, Clone, Copy)]
struct BoundaryPt {
    pos: Vec2,
    edge: usize,
    t: f64,
    entry: bool,
}

/// Oriented monotone arc of one pullback inside one leaf. Flow runs entry
/// to exit with the negative (inside) region on the left. `samples` are
/// on-curve points from entry to exit inclusive.
#[derive(Debug, Clone)]
pub(crate) struct Arc {
    facet: Dir,
    entry: BoundaryPt,
    exit: BoundaryPt,
    samples: Vec<Vec2>,
}

/// Where the curve goes at a boundary intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Flow {
    Entry,
    Exit,
    /// The curve touches the boundary without entering the polygon (or
    /// dips through a single point); such points take no part in pairing.
    Graze,
}

/// Crossings of `gamma`'s zero set with the leaf boundary, typed and
/// sorted by cyclic position. Roots at vertices are snapped and
/// deduplicated; tangential touches and corner grazes are dropped.
fn boundary_points(
    poly: &LeafPoly,
    gamma: &BernsteinPoly2,
    cfg: &TrimConfig,
) -> Result<Vec<BoundaryPt>> {
    let pts = boundary_points_with_probe(poly, gamma, cfg, TANGENCY_PROBE)?;
    if pts.len() % 2 == 0 {
        return Ok(pts);
    }
    // An odd count means an unfiltered tangency; refilter more loosely.
    let pts = boundary_points_with_probe(poly, gamma, cfg, 1e-6)?;
    if pts.len() % 2 == 0 {
        return Ok(pts);
    }
    Err(Error::TrimDegenerate(format!(
        "odd boundary intersection count ({})",
        pts.len()
    )))
}

fn boundary_points_with_probe(
    poly: &LeafPoly,
    gamma: &BernsteinPoly2,
    cfg: &TrimConfig,
    probe: f64,
) -> Result<Vec<BoundaryPt>> {
    let scale = gamma.coeff_inf_norm();
    let n = poly.verts.len();
    let mut out: Vec<BoundaryPt> = Vec::new();
    for i in 0..n {
        let (a, b) = poly.edge(i);
        let seg = gamma.restrict_to_segment(&a, &b);
        if seg.coeff_inf_norm() <= 1e-14 * scale {
            continue; // the zero set contains this edge
        }
        let elen = (b - a).norm();
        let hits = classify_roots_probe(&seg, cfg.root_tol, probe)
            .map_err(|e| degenerate(e, "boundary root solve failed"))?;
        for h in hits {
            if h.tangential {
                continue;
            }
            let mut pos = a + (b - a) * h.t;
            let mut edge = i;
            let mut t = h.t;
            // Snap to the near vertex; canonical vertex address is t=0 on
            // the outgoing edge.
            if (pos - a).norm() <= cfg.snap_tol.max(1e-12 * elen) {
                pos = a;
                t = 0.0;
            } else if (pos - b).norm() <= cfg.snap_tol.max(1e-12 * elen) {
                pos = b;
                edge = (i + 1) % n;
                t = 0.0;
            }
            if out.iter().any(|q| (q.pos - pos).norm() <= cfg.snap_tol) {
                continue;
            }
            match point_flow(poly, gamma, &pos)? {
                Flow::Graze => continue,
                flow => out.push(BoundaryPt {
                    pos,
                    edge,
                    t,
                    entry: flow == Flow::Entry,
                }),
            }
        }
    }
    out.sort_by(|x, y| (x.edge, x.t).partial_cmp(&(y.edge, y.t)).unwrap());
    Ok(out)
}

/// Classify the curve's behaviour at boundary point `p` by stepping a
/// short distance along the curve to both sides (tangent step followed by
/// Newton projection back onto the zero set) and testing which neighbours
/// lie inside the polygon. Walking the curve itself is what makes corner
/// crossings with boundary-tangent direction come out right; a straight
/// tangent probe would miss the curvature.
fn point_flow(poly: &LeafPoly, gamma: &BernsteinPoly2, p: &Vec2) -> Result<Flow> {
    let scale = gamma.coeff_inf_norm();
    let g = gamma.gradient(p);
    if g.norm() <= GRAD_TOL * scale {
        return Ok(Flow::Graze); // isolated touch point
    }
    let tau = Vec2::new(-g.y, g.x).normalize();
    let diam = poly.diameter();
    for eps in [1e-5 * diam, 1e-6 * diam, 1e-4 * diam] {
        let fwd = on_curve_step(gamma, p, &tau, eps);
        let bwd = on_curve_step(gamma, p, &(-tau), eps);
        let (Some(fwd), Some(bwd)) = (fwd, bwd) else {
            continue;
        };
        let margin = 1e-13 * diam;
        let fin = poly.contains_inside(&fwd, margin);
        let bin = poly.contains_inside(&bwd, margin);
        return Ok(match (fin, bin) {
            // Flow follows the tangent (gradient rotated left), so a
            // forward neighbour inside means the curve enters here.
            (true, false) => Flow::Entry,
            (false, true) => Flow::Exit,
            _ => Flow::Graze,
        });
    }
    Err(Error::TrimDegenerate(
        "could not classify boundary point flow".into(),
    ))
}

/// Step from an on-curve point roughly `eps` along `dir`, then project
/// back onto the zero set by Newton along the gradient.
fn on_curve_step(gamma: &BernsteinPoly2, p: &Vec2, dir: &Vec2, eps: f64) -> Option<Vec2> {
    let scale = gamma.coeff_inf_norm();
    let mut q = p + dir * eps;
    for _ in 0..8 {
        let v = gamma.eval(&q);
        let g = gamma.gradient(&q);
        let g2 = g.norm_squared();
        if g2 <= 1e-28 * scale * scale {
            return None;
        }
        let step = g * (v / g2);
        q -= step;
        if step.norm() <= 1e-16 {
            break;
        }
    }
    if gamma.eval(&q).abs() <= 1e-9 * scale {
        Some(q)
    } else {
        None
    }
}

/// Pair the boundary intersections of one pullback on one leaf into
/// verified oriented arcs.
fn connect(poly: &LeafPoly, pull: &FacetPull, cfg: &TrimConfig) -> Result<Vec<Arc>> {
    let gamma = &pull.gamma;
    let pts = boundary_points(poly, gamma, cfg)?;
    if pts.is_empty() {
        return Ok(Vec::new());
    }
    let n_entry = pts.iter().filter(|p| p.entry).count();
    if 2 * n_entry != pts.len() {
        return Err(Error::TrimDegenerate(
            "unbalanced entry/exit boundary points".into(),
        ));
    }
    if pts.len() == 2 {
        let (e, x) = if pts[0].entry { (0, 1) } else { (1, 0) };
        let arc = make_arc(pull.dir, gamma, &pts[e], &pts[x], cfg)
            .ok_or_else(|| Error::TrimDegenerate("untraceable two-point arc".into()))?;
        return Ok(vec![arc]);
    }

    // Cyclic stack matching, one rotation at a time, each candidate
    // pairing verified by tracing; falls back to exhaustive non-crossing
    // matchings if no rotation verifies.
    let n = pts.len();
    for start in 0..n {
        let mut stack: Vec<usize> = Vec::new();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut ok = true;
        for k in 0..n {
            let i = (start + k) % n;
            if pts[i].entry {
                stack.push(i);
            } else {
                match stack.pop() {
                    Some(e) => pairs.push((e, i)),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if !ok || !stack.is_empty() {
            continue;
        }
        if let Some(arcs) = verify_pairs(pull.dir, gamma, &pts, &pairs, cfg) {
            return Ok(arcs);
        }
    }

    // Exhaustive fallback over non-crossing entry/exit matchings.
    let idx: Vec<usize> = (0..n).collect();
    let mut pairs = Vec::new();
    if match_noncrossing(&idx, &pts, gamma, pull.dir, cfg, &mut pairs) {
        if let Some(arcs) = verify_pairs(pull.dir, gamma, &pts, &pairs, cfg) {
            return Ok(arcs);
        }
    }
    Err(Error::TrimDegenerate(
        "no verifiable boundary pairing".into(),
    ))
}

/// Recursively enumerate non-crossing matchings of the cyclic sequence,
/// verifying each tentative pair as it is placed.
fn match_noncrossing(
    seq: &[usize],
    pts: &[BoundaryPt],
    gamma: &BernsteinPoly2,
    facet: Dir,
    cfg: &TrimConfig,
    pairs: &mut Vec<(usize, usize)>,
) -> bool {
    if seq.is_empty() {
        return true;
    }
    let first = seq[0];
    for k in (1..seq.len()).step_by(2) {
        let cand = seq[k];
        if pts[first].entry == pts[cand].entry {
            continue;
        }
        let (e, x) = if pts[first].entry {
            (first, cand)
        } else {
            (cand, first)
        };
        if make_arc(facet, gamma, &pts[e], &pts[x], cfg).is_none() {
            continue;
        }
        pairs.push((e, x));
        let inner: Vec<usize> = seq[1..k].to_vec();
        let outer: Vec<usize> = seq[k + 1..].to_vec();
        if match_noncrossing(&inner, pts, gamma, facet, cfg, pairs)
            && match_noncrossing(&outer, pts, gamma, facet, cfg, pairs)
        {
            return true;
        }
        pairs.pop();
    }
    false
}

fn verify_pairs(
    facet: Dir,
    gamma: &BernsteinPoly2,
    pts: &[BoundaryPt],
    pairs: &[(usize, usize)],
    cfg: &TrimConfig,
) -> Option<Vec<Arc>> {
    let mut arcs = Vec::with_capacity(pairs.len());
    for &(e, x) in pairs {
        arcs.push(make_arc(facet, gamma, &pts[e], &pts[x], cfg)?);
    }
    arcs.sort_by(|a, b| lex_cmp_2(&a.entry.pos, &b.entry.pos));
    Some(arcs)
}

/// Build and verify an arc from entry to exit: trace the curve between the
/// endpoints and require a monotone, gap-free chain. Returns None when the
/// trace fails, signalling a wrong pairing or a degenerate configuration.
fn make_arc(
    facet: Dir,
    gamma: &BernsteinPoly2,
    entry: &BoundaryPt,
    exit: &BoundaryPt,
    cfg: &TrimConfig,
) -> Option<Arc> {
    let samples = trace_between(gamma, &entry.pos, &exit.pos, ARC_SAMPLES, cfg)?;
    Some(Arc {
        facet,
        entry: *entry,
        exit: *exit,
        samples,
    })
}

/// Trace `n`+1 on-curve points from p to q by sweeping the dominant axis
/// and re-solving the cross-section each step, following the branch
/// nearest the previous point. Enforces monotonicity and bounded jumps;
/// None signals the endpoints are not joined by a single monotone branch.
///
/// Stations are cosine-spaced: arcs routinely start or end where the
/// curve is tangent to the cross-section (axis extremes sit on leaf
/// boundaries by construction), so the cross coordinate moves like
/// sqrt(step) there. Clustering the stations quadratically at both ends
/// keeps the legitimate per-step motion linear (a full quarter circle
/// peaks near pi/sqrt(2) * span/n), while a branch hop still adds the
/// branch separation on top.
fn trace_between(
    gamma: &BernsteinPoly2,
    p: &Vec2,
    q: &Vec2,
    n: usize,
    cfg: &TrimConfig,
) -> Option<Vec<Vec2>> {
    let d = q - p;
    if d.norm() <= cfg.snap_tol {
        return None;
    }
    let a = if d.x.abs() >= d.y.abs() { 0 } else { 1 };
    let o = 1 - a;
    if d[a].abs() <= cfg.snap_tol {
        return None;
    }
    let lo = p[o].min(q[o]);
    let hi = p[o].max(q[o]);
    let margin = 1e-9 + 1e-3 * (hi - lo);
    let step_gap = 2.8 * (hi - lo) / n as f64 + 10.0 * margin;
    let mut out = Vec::with_capacity(n + 1);
    out.push(*p);
    let mut prev_o = p[o];
    for k in 1..n {
        let frac = 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / n as f64).cos());
        let c = p[a] + d[a] * frac;
        let mut s0 = Vec2::zeros();
        let mut s1 = Vec2::zeros();
        s0[a] = c;
        s1[a] = c;
        s0[o] = lo - margin;
        s1[o] = hi + margin;
        let seg = gamma.restrict_to_segment(&s0, &s1);
        let roots = isolate_univariate(&seg, cfg.root_tol).ok()?;
        if roots.is_empty() {
            return None;
        }
        let span = (hi + margin) - (lo - margin);
        let best = roots
            .iter()
            .map(|t| lo - margin + span * t)
            .min_by(|x, y| {
                (x - prev_o)
                    .abs()
                    .partial_cmp(&(y - prev_o).abs())
                    .unwrap()
            })?;
        // Bounded jump: following one branch moves the cross coordinate
        // by about its share of the total span per step.
        if (best - prev_o).abs() > step_gap {
            return None;
        }
        let mut pt = Vec2::zeros();
        pt[a] = c;
        pt[o] = best;
        out.push(pt);
        prev_o = best;
    }
    // Closure: the last interior sample must sit one step from q.
    if (prev_o - q[o]).abs() > step_gap {
        return None;
    }
    out.push(*q);
    // Monotonicity in both coordinates (tolerating stalls for straight
    // axis-parallel arcs).
    for axis in 0..2 {
        let sgn = (q[axis] - p[axis]).signum();
        if (q[axis] - p[axis]).abs() <= 10.0 * margin {
            continue;
        }
        for w in out.windows(2) {
            if sgn * (w[1][axis] - w[0][axis]) < -1e-10 {
                return None;
            }
        }
    }
    Some(out)
}

/// Public tracing helper for downstream sampling of an alpha edge.
pub fn trace_alpha(
    gamma: &BernsteinPoly2,
    p: &Vec2,
    q: &Vec2,
    n: usize,
    cfg: &TrimConfig,
) -> Result<Vec<Vec2>> {
    trace_between(gamma, p, q, n, cfg)
        .ok_or_else(|| Error::TrimDegenerate("alpha curve trace failed".into()))
}

/// Relative chord deviation check; on violation returns the cut through
/// the arc's midpoint sample, perpendicular to the dominant span.
fn chord_violation(arc: &Arc, cfg: &TrimConfig) -> Option<(Vec2, usize)> {
    let p = arc.entry.pos;
    let q = arc.exit.pos;
    let len = (q - p).norm();
    if len <= cfg.snap_tol {
        return None;
    }
    let mut dev: f64 = 0.0;
    for s in &arc.samples {
        dev = dev.max(dist_point_segment(s, &p, &q));
    }
    if dev / len <= cfg.chord_max {
        return None;
    }
    let mid = arc.samples[arc.samples.len() / 2];
    let d = q - p;
    let axis = if d.x.abs() >= d.y.abs() { 0 } else { 1 };
    Some((mid, axis))
}

// ---------------------------------------------------------------------------
// ref2: split leaves along arcs
// ---------------------------------------------------------------------------

/// Edge of a polygon cycle under construction. Node ids index the chain
/// of boundary vertices and arc endpoints; an alpha edge may be traversed
/// against its flow.
#[derive(Debug, Clone, Copy)]
struct CycEdge {
    a: usize,
    b: usize,
    kind: CycKind,
}

#[derive(Debug, Clone, Copy)]
enum CycKind {
    Straight(TrimEdgeKind),
    Alpha { arc: usize, along_flow: bool },
}

fn cyc_slice(cycle: &[CycEdge], i: usize, j: usize) -> Vec<CycEdge> {
    if i < j {
        cycle[i..j].to_vec()
    } else {
        let mut out = cycle[i..].to_vec();
        out.extend_from_slice(&cycle[..j]);
        out
    }
}

/// Split one leaf polygon along its arcs into classified trim polygons.
fn ref2(poly: &LeafPoly, arcs: &[Arc], cfg: &TrimConfig) -> Result<Vec<TrimPolygon>> {
    // Build the node chain: boundary vertices plus arc endpoints, the
    // latter inserted into their edges in parameter order.
    let n = poly.verts.len();
    let mut per_edge: Vec<Vec<(f64, Vec2)>> = vec![Vec::new(); n];
    for arc in arcs {
        for bp in [&arc.entry, &arc.exit] {
            if bp.t > 0.0
                && !per_edge[bp.edge]
                    .iter()
                    .any(|(t, _)| (t - bp.t).abs() <= 1e-14)
            {
                per_edge[bp.edge].push((bp.t, bp.pos));
            }
        }
    }
    let mut pos: Vec<Vec2> = Vec::new();
    let mut cycle: Vec<CycEdge> = Vec::new();
    for (vert, pe) in poly.verts.iter().zip(per_edge.iter_mut()) {
        pe.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pos.push(*vert);
        for (_, p) in pe.iter() {
            pos.push(*p);
        }
    }
    let m = pos.len();
    // One straight edge between consecutive nodes, typed by the leaf edge
    // it came from.
    {
        let mut k = 0;
        for (i, pe) in per_edge.iter().enumerate() {
            let steps = 1 + pe.len();
            for _ in 0..steps {
                cycle.push(CycEdge {
                    a: k,
                    b: (k + 1) % m,
                    kind: CycKind::Straight(poly.kinds[i]),
                });
                k += 1;
            }
        }
    }

    // Resolve arc endpoints to node ids.
    let tol = cfg.snap_tol.max(1e-12);
    let node_of = |p: &Vec2| pos.iter().position(|q| (q - p).norm() <= tol);
    let mut arc_nodes: Vec<(usize, usize)> = Vec::with_capacity(arcs.len());
    for arc in arcs {
        let e = node_of(&arc.entry.pos)
            .ok_or_else(|| Error::TrimDegenerate("arc entry off the boundary chain".into()))?;
        let x = node_of(&arc.exit.pos)
            .ok_or_else(|| Error::TrimDegenerate("arc exit off the boundary chain".into()))?;
        if e == x {
            return Err(Error::TrimDegenerate("arc collapsed to a point".into()));
        }
        arc_nodes.push((e, x));
    }

    // Deterministic split order: by facet, then entry position.
    let mut order: Vec<usize> = (0..arcs.len()).collect();
    order.sort_by(|&p, &q| {
        (arcs[p].facet.index(), arcs[p].entry.edge, arcs[p].entry.t)
            .partial_cmp(&(arcs[q].facet.index(), arcs[q].entry.edge, arcs[q].entry.t))
            .unwrap()
    });

    let mut out = Vec::new();
    split_cycle(&pos, cycle, &order, arcs, &arc_nodes, [0i8; 6], &mut out)?;
    Ok(out)
}

/// Recursive laminar split: peel off the first remaining arc, divide the
/// cycle at its endpoints, distribute the other arcs, recurse.
fn split_cycle(
    pos: &[Vec2],
    cycle: Vec<CycEdge>,
    todo: &[usize],
    arcs: &[Arc],
    arc_nodes: &[(usize, usize)],
    signs: [i8; 6],
    out: &mut Vec<TrimPolygon>,
) -> Result<()> {
    let Some((&ai, rest)) = todo.split_first() else {
        if let Some(tp) = emit_polygon(pos, &cycle, arcs, signs) {
            out.push(tp);
        }
        return Ok(());
    };
    let (en, xn) = arc_nodes[ai];
    let i = cycle
        .iter()
        .position(|e| e.a == en)
        .ok_or_else(|| Error::TrimDegenerate("arc entry missing from cycle".into()))?;
    let j = cycle
        .iter()
        .position(|e| e.a == xn)
        .ok_or_else(|| Error::TrimDegenerate("arc exit missing from cycle".into()))?;
    if i == j {
        return Err(Error::TrimDegenerate("degenerate arc split".into()));
    }
    let facet_idx = arcs[ai].facet.index();

    // Side 1 walks the boundary entry -> exit and returns along the arc
    // against its flow, so the negative region lies on the other side.
    let mut side1 = cyc_slice(&cycle, i, j);
    side1.push(CycEdge {
        a: xn,
        b: en,
        kind: CycKind::Alpha {
            arc: ai,
            along_flow: false,
        },
    });
    let mut side2 = cyc_slice(&cycle, j, i);
    side2.push(CycEdge {
        a: en,
        b: xn,
        kind: CycKind::Alpha {
            arc: ai,
            along_flow: true,
        },
    });
    let mut signs1 = signs;
    let mut signs2 = signs;
    signs1[facet_idx] = 1;
    signs2[facet_idx] = -1;

    let mut todo1 = Vec::new();
    let mut todo2 = Vec::new();
    let on1 = |nd: usize| side1.iter().any(|e| e.a == nd);
    let on2 = |nd: usize| side2.iter().any(|e| e.a == nd);
    for &bi in rest {
        let (be, bx) = arc_nodes[bi];
        let strict1 = |nd: usize| nd != en && nd != xn && on1(nd);
        let strict2 = |nd: usize| nd != en && nd != xn && on2(nd);
        let s1 = strict1(be) || strict1(bx);
        let s2 = strict2(be) || strict2(bx);
        if s1 && s2 {
            return Err(Error::TrimDegenerate("crossing arcs in one leaf".into()));
        }
        if s1 {
            todo1.push(bi);
        } else if s2 {
            todo2.push(bi);
        } else {
            // Both endpoints coincide with the splitting arc's: decide by
            // the arc's midpoint sample.
            let mid = arcs[bi].samples[arcs[bi].samples.len() / 2];
            if point_in_cycle(pos, &side1, arcs, &mid) {
                todo1.push(bi);
            } else {
                todo2.push(bi);
            }
        }
    }
    split_cycle(pos, side1, &todo1, arcs, arc_nodes, signs1, out)?;
    split_cycle(pos, side2, &todo2, arcs, arc_nodes, signs2, out)?;
    Ok(())
}

/// Polyline of a cycle with arcs expanded to their samples, oriented along
/// the traversal; last point of each edge omitted (it starts the next).
fn cycle_polyline(pos: &[Vec2], cycle: &[CycEdge], arcs: &[Arc]) -> Vec<Vec2> {
    let mut line = Vec::new();
    for e in cycle {
        match e.kind {
            CycKind::Straight(_) => line.push(pos[e.a]),
            CycKind::Alpha { arc, along_flow } => {
                let s = &arcs[arc].samples;
                if along_flow {
                    line.extend_from_slice(&s[..s.len() - 1]);
                } else {
                    line.extend(s.iter().rev().take(s.len() - 1).copied());
                }
            }
        }
    }
    line
}

pub(crate) fn point_in_polyline(line: &[Vec2], p: &Vec2) -> bool {
    let mut inside = false;
    let n = line.len();
    for i in 0..n {
        let u = line[i];
        let v = line[(i + 1) % n];
        if (u.y > p.y) != (v.y > p.y) {
            let x = u.x + (p.y - u.y) * (v.x - u.x) / (v.y - u.y);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_in_cycle(pos: &[Vec2], cycle: &[CycEdge], arcs: &[Arc], p: &Vec2) -> bool {
    point_in_polyline(&cycle_polyline(pos, cycle, arcs), p)
}

pub(crate) fn polyline_area(line: &[Vec2]) -> f64 {
    let mut s = 0.0;
    let n = line.len();
    for i in 0..n {
        let a = line[i];
        let b = line[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

fn emit_polygon(
    pos: &[Vec2],
    cycle: &[CycEdge],
    arcs: &[Arc],
    signs: [i8; 6],
) -> Option<TrimPolygon> {
    let line = cycle_polyline(pos, cycle, arcs);
    if line.len() < 3 || polyline_area(&line) <= 1e-15 {
        return None;
    }
    let mut edges = Vec::with_capacity(cycle.len());
    for e in cycle {
        let (a, b) = (pos[e.a], pos[e.b]);
        match e.kind {
            CycKind::Straight(kind) => {
                if (a - b).norm() <= 1e-14 {
                    continue;
                }
                edges.push(TrimEdge::straight(a, b, kind));
            }
            CycKind::Alpha { arc, along_flow } => {
                let mut samples = arcs[arc].samples.clone();
                if !along_flow {
                    samples.reverse();
                }
                edges.push(TrimEdge {
                    a,
                    b,
                    kind: TrimEdgeKind::Alpha {
                        facet: arcs[arc].facet,
                        along_flow,
                    },
                    samples,
                });
            }
        }
    }
    Some(TrimPolygon { edges, signs })
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Candidate interior probes for a polygon given as a closed polyline:
/// the area centroid first, then fan triangle centroids by size.
fn probe_candidates(line: &[Vec2]) -> Vec<Vec2> {
    let n = line.len();
    let mut out = Vec::new();
    let area = polyline_area(line);
    if area.abs() > 1e-300 {
        let mut c = Vec2::zeros();
        for i in 0..n {
            let a = line[i];
            let b = line[(i + 1) % n];
            let w = a.x * b.y - b.x * a.y;
            c += (a + b) * w;
        }
        out.push(c / (6.0 * area));
    }
    let mut fans: Vec<(f64, Vec2)> = Vec::new();
    for k in 1..n - 1 {
        let (a, b, c) = (line[0], line[k], line[k + 1]);
        let w = ((b - a).perp(&(c - a)) * 0.5).abs();
        fans.push((w, (a + b + c) / 3.0));
    }
    fans.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    out.extend(fans.into_iter().take(12).map(|(_, c)| c));
    out
}

pub(crate) fn dist_to_polyline(line: &[Vec2], p: &Vec2) -> f64 {
    let n = line.len();
    let mut d = f64::INFINITY;
    for i in 0..n {
        d = d.min(dist_point_segment(p, &line[i], &line[(i + 1) % n]));
    }
    d
}

/// Sign of `gamma` on the polygon, decided by the first candidate probe
/// that lies clearly inside and clearly off the zero set.
fn probe_sign(line: &[Vec2], gamma: &BernsteinPoly2) -> Result<i8> {
    let scale = gamma.coeff_inf_norm();
    for c in probe_candidates(line) {
        if !point_in_polyline(line, &c) || dist_to_polyline(line, &c) <= 1e-9 {
            continue;
        }
        let v = gamma.eval(&c);
        if v.abs() > 1e-11 * scale {
            return Ok(if v > 0.0 { 1 } else { -1 });
        }
    }
    Err(Error::TrimDegenerate("no decisive interior probe".into()))
}

/// Fill in unknown pullback signs by probing and report whether the
/// polygon lies inside the cell (all pullbacks negative).
fn classify_polygon(tp: &mut TrimPolygon, pulls: &[FacetPull], _cfg: &TrimConfig) -> Result<bool> {
    let line = tp.sampled_polyline();
    let mut inside = true;
    for pull in pulls {
        let k = pull.dir.index();
        if tp.signs[k] == 0 {
            tp.signs[k] = probe_sign(&line, &pull.gamma)?;
        }
        if tp.signs[k] > 0 {
            inside = false;
        }
    }
    Ok(inside)
}
