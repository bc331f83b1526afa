//! Explicit Bezier parametrization of implicitly defined curves and
//! trimmed surface pieces: iterative least squares against closest-point
//! resampling, with lower-dimensional faces frozen first so shared
//! boundaries come out identical on both sides.

use crate::bezier::{binomial, tri_idx, tri_indices, BezierCurve, BezierTriangle, Ctrl, TriNet};
use crate::error::{Error, Result};
use crate::geom::{Plane, Vec2, Vec3};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

pub const ALG_EPS: f64 = 1e-10;
pub const MAX_FIT_ITERS: usize = 20;
const NEWTON_MAX: usize = 50;
/// Misfit ratio between consecutive refits beyond which the plain
/// fixed-parameter iteration counts as stalled and foot-point parameter
/// correction is switched on (and stays on).
const STALL_RATIO: f64 = 0.5;

/// Outcome record of an iterative fit. `converged` is false when the
/// iteration cap was hit or the misfit started growing; the returned
/// geometry is then the best iterate, usable but worth flagging.
#[derive(Debug, Clone)]
pub struct FitQuality {
    pub err: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative misfit per iteration, for diagnostics.
    pub history: Vec<f64>,
}

/// Control values that can be packed into least-squares columns.
pub trait FitPoint: Ctrl {
    const DIM: usize;
    fn component(&self, c: usize) -> f64;
    fn from_components(v: &[f64]) -> Self;
}

impl FitPoint for f64 {
    const DIM: usize = 1;
    fn component(&self, _c: usize) -> f64 {
        *self
    }
    fn from_components(v: &[f64]) -> Self {
        v[0]
    }
}

impl FitPoint for Vec2 {
    const DIM: usize = 2;
    fn component(&self, c: usize) -> f64 {
        self[c]
    }
    fn from_components(v: &[f64]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl FitPoint for Vec3 {
    const DIM: usize = 3;
    fn component(&self, c: usize) -> f64 {
        self[c]
    }
    fn from_components(v: &[f64]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

fn bernstein1(p: usize, k: usize, t: f64) -> f64 {
    binomial(p, k) * t.powi(k as i32) * (1.0 - t).powi((p - k) as i32)
}

fn fdot<T: FitPoint>(a: &T, b: &T) -> f64 {
    (0..T::DIM).map(|c| a.component(c) * b.component(c)).sum()
}

// ---------------------------------------------------------------------------
// Closest-point projections
// ---------------------------------------------------------------------------

fn clamp_to_tri(xi: &Vec2) -> Vec2 {
    let mut x = Vec2::new(xi.x.clamp(0.0, 1.0), xi.y.clamp(0.0, 1.0));
    let excess = x.x + x.y - 1.0;
    if excess > 0.0 {
        x.x -= 0.5 * excess;
        x.y -= 0.5 * excess;
        x.x = x.x.clamp(0.0, 1.0);
        x.y = x.y.clamp(0.0, 1.0);
    }
    x
}

/// Damped Newton on a 2D residual, iterates clamped to the reference
/// triangle, forward-difference Jacobian.
fn newton2(mut f: impl FnMut(&Vec2) -> Vec2, seed: &Vec2, tol: f64) -> Result<Vec2> {
    let mut x = clamp_to_tri(seed);
    let mut r = f(&x);
    for _ in 0..NEWTON_MAX {
        if r.norm() <= tol {
            return Ok(x);
        }
        let h = 1e-7;
        let mut jac = Matrix2::zeros();
        for c in 0..2 {
            let mut xp = x;
            // flip to a backward difference when the forward probe
            // would leave the domain
            let hs = if (c == 0 && x.x + h + x.y > 1.0) || (c == 1 && x.x + x.y + h > 1.0) {
                -h
            } else {
                h
            };
            xp[c] += hs;
            let rp = f(&xp);
            jac.set_column(c, &((rp - r) / hs));
        }
        let Some(inv) = jac.try_inverse() else {
            return Err(Error::IllPosed);
        };
        let step = -(inv * Vector2::new(r.x, r.y));
        let mut lambda = 1.0;
        let mut advanced = false;
        for _ in 0..8 {
            let xn = clamp_to_tri(&(x + lambda * Vec2::new(step.x, step.y)));
            let rn = f(&xn);
            if rn.norm() < r.norm() {
                x = xn;
                r = rn;
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    if r.norm() <= 10.0 * tol {
        return Ok(x);
    }
    Err(Error::NoConvergence(NEWTON_MAX))
}

/// Project `x0` onto the intersection curve of a patch with a plane:
/// solve {(x0 - phi(xi)) . n = 0, (x0 - phi(xi)) . t(xi) = 0} with t the
/// curve tangent direction n x N. The first equation lands on the plane,
/// the second makes the connecting segment orthogonal to the curve.
pub fn closest_point_on_curve(
    patch: &BezierTriangle,
    plane: &Plane,
    x0: &Vec3,
    seed: &Vec2,
) -> Result<Vec2> {
    let scale = patch.diameter().max(1e-30);
    let nhat = plane.normal / plane.normal.norm();
    let g = |xi: &Vec2| -> Vec2 {
        let phi = patch.eval(xi);
        let d = x0 - phi;
        let nrm = patch.normal(xi);
        let mut t = nhat.cross(&nrm);
        let tn = t.norm();
        if tn > 1e-30 {
            t /= tn;
        }
        Vec2::new((plane.point - phi).dot(&nhat), d.dot(&t))
    };
    newton2(g, seed, 1e-13 * scale)
}

/// Project `x0` onto the patch surface: orthogonality of the connecting
/// segment to both tangent directions.
pub fn closest_point_on_surface(patch: &BezierTriangle, x0: &Vec3, seed: &Vec2) -> Result<Vec2> {
    let scale = patch.diameter().max(1e-30);
    let d1 = patch.derivative(0);
    let d2 = patch.derivative(1);
    let f = |xi: &Vec2| -> Vec2 {
        let d = x0 - patch.eval(xi);
        let mut t1 = d1.eval(xi);
        let mut t2 = d2.eval(xi);
        let (n1, n2) = (t1.norm(), t2.norm());
        if n1 > 1e-30 {
            t1 /= n1;
        }
        if n2 > 1e-30 {
            t2 /= n2;
        }
        Vec2::new(d.dot(&t1), d.dot(&t2))
    };
    newton2(f, seed, 1e-13 * scale)
}

// ---------------------------------------------------------------------------
// Least-squares operators
// ---------------------------------------------------------------------------

/// Basis-evaluation matrix over fixed reference parameters together with
/// its pseudo-inverse. With as many samples as control values the fit is
/// interpolation.
pub struct FitOperator {
    pub order: usize,
    pub basis: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
}

impl FitOperator {
    pub fn from_basis(order: usize, basis: DMatrix<f64>) -> Result<Self> {
        let pinv = basis
            .clone()
            .svd(true, true)
            .pseudo_inverse(1e-13)
            .map_err(|_| Error::SingularSystem)?;
        Ok(FitOperator { order, basis, pinv })
    }

    /// Full univariate Bernstein basis of `order` at parameters `ts`.
    pub fn curve(order: usize, ts: &[f64]) -> Result<Self> {
        let basis = DMatrix::from_fn(ts.len(), order + 1, |i, k| bernstein1(order, k, ts[i]));
        Self::from_basis(order, basis)
    }

    /// Interior columns only (both endpoint coefficients frozen).
    pub fn curve_interior(order: usize, ts: &[f64]) -> Result<Self> {
        let basis = DMatrix::from_fn(ts.len(), order - 1, |i, k| bernstein1(order, k + 1, ts[i]));
        Self::from_basis(order, basis)
    }

    /// Least-squares coefficients for one sample vector per row.
    pub fn apply<T: FitPoint>(&self, samples: &[T]) -> Vec<T> {
        let rhs = DMatrix::from_fn(samples.len(), T::DIM, |i, c| samples[i].component(c));
        let sol = &self.pinv * rhs;
        (0..sol.nrows())
            .map(|i| {
                let row: Vec<f64> = (0..T::DIM).map(|c| sol[(i, c)]).collect();
                T::from_components(&row)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Iterative curve fitting
// ---------------------------------------------------------------------------

fn sample_scale<T: FitPoint>(samples: &[T]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for s in samples {
        for c in 0..T::DIM {
            lo[c] = lo[c].min(s.component(c));
            hi[c] = hi[c].max(s.component(c));
        }
    }
    let mut d2 = 0.0;
    for c in 0..T::DIM {
        d2 += (hi[c] - lo[c]).powi(2);
    }
    d2.sqrt().max(1e-30)
}

/// One Gauss-Newton step on the geometric misfit of a curve against
/// frozen samples at their foot parameters: only the residual component
/// normal to the curve drives the interior control points, and the
/// minimal-norm correction leaves the tangential null space alone.
/// Refitting the full residual instead stalls, because its tangential
/// part is a re-parametrization that the foot points absorb right back.
fn normal_refit_curve<T: FitPoint>(
    cur: &BezierCurve<T>,
    ss: &[f64],
    data: &[T],
) -> Result<BezierCurve<T>> {
    let order = cur.order();
    let m = order - 1;
    let dim = T::DIM;
    let dcur = cur.derivative();
    let mut a = DMatrix::zeros(ss.len() * dim, m * dim);
    let mut rhs = DVector::zeros(ss.len() * dim);
    for (j, &s) in ss.iter().enumerate() {
        let d = dcur.eval(s);
        let dn = fdot(&d, &d).sqrt();
        let t: Vec<f64> = (0..dim)
            .map(|c| if dn > 1e-30 { d.component(c) / dn } else { 0.0 })
            .collect();
        let r = cur.eval(s) - data[j];
        for arow in 0..dim {
            let mut pr = 0.0;
            for b in 0..dim {
                // projector I - t t^T; a zero tangent degrades it to the
                // identity, turning the rows into a full-residual fit
                let p = if arow == b { 1.0 } else { 0.0 } - t[arow] * t[b];
                pr += p * r.component(b);
                for k in 0..m {
                    a[(j * dim + arow, k * dim + b)] = bernstein1(order, k + 1, s) * p;
                }
            }
            rhs[j * dim + arow] = -pr;
        }
    }
    let sol = a
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|_| Error::SingularSystem)?;
    let mut pts = cur.points.clone();
    for k in 0..m {
        let delta: Vec<f64> = (0..dim).map(|c| sol[k * dim + c]).collect();
        pts[k + 1] = pts[k + 1] + T::from_components(&delta);
    }
    Ok(BezierCurve::new(pts))
}

/// Iterative least-squares fit of one curve with frozen endpoints:
/// evaluate the current fit at fixed parameters, project every
/// evaluation onto the target, refit the interior control points, and
/// stop when the relative misfit settles (or grows; the best iterate is
/// kept either way). Re-projecting every round ties the correspondence
/// to the iterate's parametrization, and once the remaining misfit is
/// mostly a re-parametrization of the target the contraction ratio
/// degrades towards 1. When that happens the target samples are frozen
/// and the iteration switches to alternating foot-point / refit rounds
/// on them, which is monotone and recovers exactly representable
/// targets to roundoff. `project(j, t, x0)` returns the target point
/// for sample j; implementations carry their own Newton seeds across
/// calls.
pub fn parametrize_curve<T: FitPoint>(
    ends: (T, T),
    order: usize,
    mut project: impl FnMut(usize, f64, &T) -> Result<T>,
    eps: f64,
) -> Result<(BezierCurve<T>, FitQuality)> {
    assert!(order >= 1);
    let n = 4 * (order + 1);
    let ts: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
    // chord seed, exact degree elevation of the linear segment
    let mut cur = BezierCurve::new(
        (0..=order)
            .map(|k| {
                let t = k as f64 / order as f64;
                ends.0 * (1.0 - t) + ends.1 * t
            })
            .collect(),
    );
    if order == 1 {
        // no interior freedom; the chord is the only admissible curve
        return Ok((
            cur,
            FitQuality {
                err: 0.0,
                iterations: 0,
                converged: true,
                history: Vec::new(),
            },
        ));
    }
    let mut best: Option<(f64, BezierCurve<T>)> = None;
    let mut history = Vec::new();
    let mut prev_e = f64::INFINITY;
    let mut scale = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut correct = false;
    let mut data: Vec<T> = Vec::new();
    let mut ss: Vec<f64> = ts.clone();
    while iterations < MAX_FIT_ITERS {
        iterations += 1;
        if !correct {
            // sample the target near the current iterate; the misfit is
            // the geometric distance to the target, insensitive to
            // parameter drift along it
            data.clear();
            for (j, &t) in ts.iter().enumerate() {
                let x0 = cur.eval(t);
                data.push(project(j, t, &x0)?);
            }
            ss.copy_from_slice(&ts);
        } else {
            // frozen samples: slide each parameter to the foot of its
            // sample on the current iterate (Newton on the tangency
            // condition (c(s) - x) . c'(s) = 0), kept only where it
            // actually moves the sample closer
            let dcur = cur.derivative();
            let ddcur = dcur.derivative();
            for (s, x) in ss.iter_mut().zip(&data) {
                let s0 = *s;
                let mut sn = s0;
                for _ in 0..8 {
                    let r = cur.eval(sn) - *x;
                    let d = dcur.eval(sn);
                    let f = fdot(&r, &d);
                    let fp = fdot(&d, &d) + fdot(&r, &ddcur.eval(sn));
                    if fp.abs() <= 1e-300 {
                        break;
                    }
                    let next = (sn - f / fp).clamp(0.0, 1.0);
                    let stalled = (next - sn).abs() <= 1e-15;
                    sn = next;
                    if stalled {
                        break;
                    }
                }
                let r0 = cur.eval(s0) - *x;
                let rn = cur.eval(sn) - *x;
                if fdot(&rn, &rn) <= fdot(&r0, &r0) {
                    *s = sn;
                }
            }
        }
        if iterations == 1 {
            scale = sample_scale(&data);
        }
        let mut e2 = 0.0;
        for (x, &s) in data.iter().zip(&ss) {
            let d = *x - cur.eval(s);
            for c in 0..T::DIM {
                e2 += d.component(c).powi(2);
            }
        }
        let e = (e2 / n as f64).sqrt() / scale;
        history.push(e);
        if best.as_ref().is_none_or(|(be, _)| e < *be) {
            best = Some((e, cur.clone()));
        }
        if (prev_e - e).abs() <= eps {
            converged = true;
            break;
        }
        if e > prev_e {
            break;
        }
        correct = correct || (T::DIM >= 2 && e > STALL_RATIO * prev_e);
        prev_e = e;
        if correct {
            cur = normal_refit_curve(&cur, &ss, &data)?;
        } else {
            // refit the interior against the fresh samples, with the
            // frozen endpoint contribution subtracted
            let op = FitOperator::curve_interior(order, &ss)?;
            let rhs: Vec<T> = data
                .iter()
                .zip(&ss)
                .map(|(x, &s)| {
                    *x - (ends.0 * bernstein1(order, 0, s) + ends.1 * bernstein1(order, order, s))
                })
                .collect();
            let interior = op.apply(&rhs);
            let mut pts = Vec::with_capacity(order + 1);
            pts.push(ends.0);
            pts.extend(interior);
            pts.push(ends.1);
            cur = BezierCurve::new(pts);
        }
    }
    let (err, curve) = best.expect("at least one iteration ran");
    Ok((
        curve,
        FitQuality {
            err,
            iterations,
            converged,
            history,
        },
    ))
}

// ---------------------------------------------------------------------------
// Triangle patch fitting with frozen boundary
// ---------------------------------------------------------------------------

/// Bernstein basis value of multi-index (i, j, k) at a reference point.
fn bernstein2(q: usize, i: usize, j: usize, k: usize, xi: &Vec2) -> f64 {
    let l = [1.0 - xi.x - xi.y, xi.x, xi.y];
    let mut coef = 1.0;
    // trinomial coefficient q! / (i! j! k!)
    coef *= binomial(q, i);
    coef *= binomial(q - i, j);
    coef * l[0].powi(i as i32) * l[1].powi(j as i32) * l[2].powi(k as i32)
}

/// Assemble an order-q net whose boundary rows come from three edge
/// curves (counterclockwise: bottom, diagonal, left) and whose interior
/// starts as the elevation of the corner triangle.
pub fn net_from_boundary<T: Ctrl>(edges: &[BezierCurve<T>; 3]) -> TriNet<T> {
    let q = edges[0].order();
    assert!(edges.iter().all(|e| e.order() == q));
    let v0 = edges[0].points[0];
    let v1 = edges[1].points[0];
    let v2 = edges[2].points[0];
    let mut coeffs = vec![T::zero(); crate::bezier::tri_len(q)];
    for (i, j, k) in tri_indices(q) {
        coeffs[tri_idx(q, i, j)] =
            (v0 * i as f64 + v1 * j as f64 + v2 * k as f64) * (1.0 / q as f64);
    }
    let mut net = TriNet { order: q, coeffs };
    for t in 0..=q {
        net.coeffs[tri_idx(q, q - t, t)] = edges[0].points[t];
        net.coeffs[tri_idx(q, 0, q - t)] = edges[1].points[t];
        net.coeffs[tri_idx(q, t, 0)] = edges[2].points[t];
    }
    net
}

/// Interior multi-indices (all barycentric entries positive).
fn interior_indices(q: usize) -> Vec<(usize, usize, usize)> {
    tri_indices(q)
        .filter(|&(i, j, k)| i >= 1 && j >= 1 && k >= 1)
        .collect()
}

/// Strictly interior lattice nodes of a triangle grid of resolution l.
fn interior_nodes(l: usize) -> Vec<Vec2> {
    let mut out = Vec::new();
    for i in 1..l {
        for j in 1..l {
            if i + j < l {
                out.push(Vec2::new(i as f64 / l as f64, j as f64 / l as f64));
            }
        }
    }
    out
}

/// Gauss-Newton step on the geometric misfit of a patch against frozen
/// samples at their foot points; the surface analogue of
/// `normal_refit_curve`, with one scalar normal-residual row per sample.
fn normal_refit_tri(
    net: &TriNet<Vec3>,
    interior: &[(usize, usize, usize)],
    xs: &[Vec2],
    data: &[Vec3],
) -> Result<TriNet<Vec3>> {
    let q = net.order;
    let mut a = DMatrix::zeros(xs.len(), 3 * interior.len());
    let mut rhs = DVector::zeros(xs.len());
    for (row, (xi, x)) in xs.iter().zip(data).enumerate() {
        let mut nrm = net.normal(xi);
        let nn = nrm.norm();
        if nn > 1e-30 {
            nrm /= nn;
        }
        for (c, &(i, j, k)) in interior.iter().enumerate() {
            let b = bernstein2(q, i, j, k, xi);
            for comp in 0..3 {
                a[(row, 3 * c + comp)] = b * nrm[comp];
            }
        }
        rhs[row] = -(net.eval(xi) - x).dot(&nrm);
    }
    let sol = a
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|_| Error::SingularSystem)?;
    let mut out = net.clone();
    for (c, &(i, j, _)) in interior.iter().enumerate() {
        out.coeffs[tri_idx(q, i, j)] += Vec3::new(sol[3 * c], sol[3 * c + 1], sol[3 * c + 2]);
    }
    Ok(out)
}

/// Iterative least-squares fit of a surface piece: the three boundary
/// curves are frozen (same orders), only interior control points move.
/// `project(j, xi, x0)` pulls the current evaluation onto the target
/// surface. As with curves, a stalled iteration freezes its samples and
/// switches to alternating foot-point / refit rounds on them. Orders
/// <= 2 have no interior freedom and return directly.
pub fn parametrize_triangle(
    edges: &[BezierCurve<Vec3>; 3],
    mut project: impl FnMut(usize, &Vec2, &Vec3) -> Result<Vec3>,
    eps: f64,
) -> Result<(BezierTriangle, FitQuality)> {
    let q = edges[0].order();
    let mut net = net_from_boundary(edges);
    let interior = interior_indices(q);
    if interior.is_empty() {
        return Ok((
            net,
            FitQuality {
                err: 0.0,
                iterations: 0,
                converged: true,
                history: Vec::new(),
            },
        ));
    }
    let mut l = 4;
    while interior_nodes(l).len() < 4 * interior.len() {
        l += 1;
    }
    let nodes = interior_nodes(l);
    // frozen boundary contribution of the (immutable) boundary rows
    let boundary_at = |net: &TriNet<Vec3>, xi: &Vec2| -> Vec3 {
        let mut s = Vec3::zeros();
        for (i, j, k) in tri_indices(q) {
            if i >= 1 && j >= 1 && k >= 1 {
                continue;
            }
            s += net.coeffs[tri_idx(q, i, j)] * bernstein2(q, i, j, k, xi);
        }
        s
    };
    let mut best: Option<(f64, TriNet<Vec3>)> = None;
    let mut history = Vec::new();
    let mut prev_e = f64::INFINITY;
    let mut scale = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut correct = false;
    let mut data: Vec<Vec3> = Vec::new();
    let mut xs: Vec<Vec2> = nodes.clone();
    while iterations < MAX_FIT_ITERS {
        iterations += 1;
        if !correct {
            data.clear();
            for (j, xi) in nodes.iter().enumerate() {
                let x0 = net.eval(xi);
                data.push(project(j, xi, &x0)?);
            }
            xs.copy_from_slice(&nodes);
        } else {
            // frozen samples: foot-point correction against the current
            // net, kept only where it moves the sample closer
            for (xi, x) in xs.iter_mut().zip(&data) {
                let xin = closest_point_on_surface(&net, x, xi).unwrap_or(*xi);
                if (net.eval(&xin) - x).norm_squared() <= (net.eval(xi) - x).norm_squared() {
                    *xi = xin;
                }
            }
        }
        if iterations == 1 {
            scale = sample_scale(&data);
        }
        let mut e2 = 0.0;
        for (x, xi) in data.iter().zip(&xs) {
            e2 += (x - net.eval(xi)).norm_squared();
        }
        let e = (e2 / nodes.len() as f64).sqrt() / scale;
        history.push(e);
        if best.as_ref().is_none_or(|(be, _)| e < *be) {
            best = Some((e, net.clone()));
        }
        if (prev_e - e).abs() <= eps {
            converged = true;
            break;
        }
        if e > prev_e {
            break;
        }
        correct = correct || e > STALL_RATIO * prev_e;
        prev_e = e;
        if correct {
            net = normal_refit_tri(&net, &interior, &xs, &data)?;
        } else {
            let basis = DMatrix::from_fn(nodes.len(), interior.len(), |r, c| {
                let (i, j, k) = interior[c];
                bernstein2(q, i, j, k, &xs[r])
            });
            let op = FitOperator::from_basis(q, basis)?;
            let rhs: Vec<Vec3> = data
                .iter()
                .zip(&xs)
                .map(|(x, xi)| x - boundary_at(&net, xi))
                .collect();
            let sol = op.apply(&rhs);
            for (c, &(i, j, _)) in interior.iter().enumerate() {
                net.coeffs[tri_idx(q, i, j)] = sol[c];
            }
        }
    }
    let (err, net) = best.expect("at least one iteration ran");
    Ok((
        net,
        FitQuality {
            err,
            iterations,
            converged,
            history,
        },
    ))
}

// ---------------------------------------------------------------------------
// Ruled quads
// ---------------------------------------------------------------------------

/// Anisotropic tensor patch ruled between two order-matched curves:
/// X(t, s) = (1 - s) c0(t) + s c1(t).
#[derive(Debug, Clone)]
pub struct RuledQuad<T> {
    pub c0: BezierCurve<T>,
    pub c1: BezierCurve<T>,
}

impl<T: Ctrl> RuledQuad<T> {
    pub fn new(c0: BezierCurve<T>, c1: BezierCurve<T>) -> Self {
        let (c0, c1) = if c0.order() >= c1.order() {
            let q = c0.order();
            (c0, c1.elevated_to(q))
        } else {
            let q = c1.order();
            (c0.elevated_to(q), c1)
        };
        RuledQuad { c0, c1 }
    }

    pub fn eval(&self, t: f64, s: f64) -> T {
        self.c0.eval(t) * (1.0 - s) + self.c1.eval(t) * s
    }

    pub fn deriv_t(&self, t: f64, s: f64) -> T {
        self.c0.derivative().eval(t) * (1.0 - s) + self.c1.derivative().eval(t) * s
    }

    pub fn deriv_s(&self, t: f64) -> T {
        self.c1.eval(t) - self.c0.eval(t)
    }
}

/// A parametrized surface piece ready for integration: a Bezier triangle
/// over the reference triangle, or a ruled tensor patch over the unit
/// square. Orientation is the parametrization's own (d1 x d2).
#[derive(Debug, Clone)]
pub enum PieceMap {
    Triangle(BezierTriangle),
    Quad(RuledQuad<Vec3>),
}

impl PieceMap {
    pub fn order(&self) -> usize {
        match self {
            PieceMap::Triangle(net) => net.order,
            PieceMap::Quad(q) => q.c0.order(),
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> Vec3 {
        match self {
            PieceMap::Triangle(net) => net.eval(&Vec2::new(u, v)),
            PieceMap::Quad(q) => q.eval(u, v),
        }
    }

    pub fn partials(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        match self {
            PieceMap::Triangle(net) => {
                let xi = Vec2::new(u, v);
                (net.derivative(0).eval(&xi), net.derivative(1).eval(&xi))
            }
            PieceMap::Quad(q) => (q.deriv_t(u, v), q.deriv_s(u)),
        }
    }

    /// Same geometry with the normal orientation flipped (parameter swap
    /// for triangles, ruling reversal for quads); exact.
    pub fn reversed(&self) -> PieceMap {
        match self {
            PieceMap::Triangle(net) => {
                let q = net.order;
                let mut coeffs = vec![Vec3::zeros(); net.coeffs.len()];
                for (i, j, _k) in tri_indices(q) {
                    let k = q - i - j;
                    coeffs[tri_idx(q, i, k)] = net.coeffs[tri_idx(q, i, j)];
                }
                PieceMap::Triangle(TriNet { order: q, coeffs })
            }
            PieceMap::Quad(q) => PieceMap::Quad(RuledQuad {
                c0: q.c1.clone(),
                c1: q.c0.clone(),
            }),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            PieceMap::Triangle(net) => net.diameter(),
            PieceMap::Quad(q) => crate::geom::Aabb3::from_points(
                q.c0.points.iter().chain(q.c1.points.iter()),
            )
            .diagonal(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::{poly2_from_monomials, RefEdge};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// phi(xi) = (xi1, xi2, xi1^2 + xi2^2), exactly order 2.
    fn paraboloid() -> BezierTriangle {
        let x = poly2_from_monomials(2, &[(1, 0, 1.0)]);
        let y = poly2_from_monomials(2, &[(0, 1, 1.0)]);
        let z = poly2_from_monomials(2, &[(2, 0, 1.0), (0, 2, 1.0)]);
        let coeffs: Vec<Vec3> = (0..x.coeffs.len())
            .map(|i| Vec3::new(x.coeffs[i], y.coeffs[i], z.coeffs[i]))
            .collect();
        TriNet { order: 2, coeffs }
    }

    fn flat() -> BezierTriangle {
        let x = poly2_from_monomials(1, &[(1, 0, 1.0)]);
        let y = poly2_from_monomials(1, &[(0, 1, 1.0)]);
        let coeffs: Vec<Vec3> = (0..x.coeffs.len())
            .map(|i| Vec3::new(x.coeffs[i], y.coeffs[i], 0.0))
            .collect();
        TriNet { order: 1, coeffs }
    }

    #[test]
    fn curve_projection_on_flat_patch() {
        let patch = flat();
        let plane = Plane::new(Vec3::new(0.5, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let xi = closest_point_on_curve(
            &patch,
            &plane,
            &Vec3::new(0.5, 0.3, 1.0),
            &Vec2::new(0.3, 0.3),
        )
        .unwrap();
        assert!((xi - Vec2::new(0.5, 0.3)).norm() <= 1e-9, "{xi:?}");
    }

    #[test]
    fn curve_projection_residuals_on_paraboloid() {
        // Intersection with z = 0.25 is the quarter circle of radius 0.5.
        let patch = paraboloid();
        let plane = Plane::new(Vec3::new(0.0, 0.0, 0.25), Vec3::new(0.0, 0.0, 1.0));
        let scale = patch.diameter();
        for k in 0..=8 {
            let ang = std::f64::consts::FRAC_PI_2 * k as f64 / 8.0;
            let seed = Vec2::new(0.45 * ang.cos(), 0.45 * ang.sin());
            let x0 = Vec3::new(0.55 * ang.cos(), 0.55 * ang.sin(), 0.3);
            let xi = closest_point_on_curve(&patch, &plane, &x0, &seed).unwrap();
            let phi = patch.eval(&xi);
            assert!((phi.z - 0.25).abs() <= 1e-12 * scale);
            let d = x0 - phi;
            let t = Vec3::new(0.0, 0.0, 1.0).cross(&patch.normal(&xi));
            assert!(d.dot(&(t / t.norm())).abs() <= 1e-12 * scale);
            // on the circle
            assert!((phi.x * phi.x + phi.y * phi.y - 0.25).abs() <= 1e-10);
        }
    }

    #[test]
    fn curve_projection_fixed_point() {
        let patch = paraboloid();
        let plane = Plane::new(Vec3::new(0.0, 0.0, 0.25), Vec3::new(0.0, 0.0, 1.0));
        let xi0 = Vec2::new(0.3, 0.4); // on the circle: 0.09 + 0.16 = 0.25
        let x0 = patch.eval(&xi0);
        let xi = closest_point_on_curve(&patch, &plane, &x0, &xi0).unwrap();
        assert!((xi - xi0).norm() <= 1e-12, "{xi:?}");
    }

    #[test]
    fn surface_projection_flat_and_sampled_minimum() {
        let patch = flat();
        let xi =
            closest_point_on_surface(&patch, &Vec3::new(0.2, 0.3, 2.0), &Vec2::new(0.4, 0.4))
                .unwrap();
        assert!((xi - Vec2::new(0.2, 0.3)).norm() <= 1e-9);

        // feet kept interior by offsetting surface points along the normal
        let patch = paraboloid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let a = rng.gen_range(0.15..0.5);
            let b = rng.gen_range(0.15..(0.85 - a));
            let base = Vec2::new(a, b);
            let nrm = patch.normal(&base);
            let x0 = patch.eval(&base) + (nrm / nrm.norm()) * rng.gen_range(-0.15..0.15);
            let xi = closest_point_on_surface(&patch, &x0, &Vec2::new(0.3, 0.3)).unwrap();
            let d = (x0 - patch.eval(&xi)).norm();
            for _ in 0..1000 {
                let u = rng.gen_range(0.0..1.0);
                let v = rng.gen_range(0.0..1.0 - u);
                let dr = (x0 - patch.eval(&Vec2::new(u, v))).norm();
                assert!(d <= dr + 1e-9, "{d} vs {dr}");
            }
        }
    }

    #[test]
    fn fit_operator_is_left_inverse_and_interpolates() {
        for order in 1..=4 {
            let n = 4 * (order + 1);
            let ts: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
            let op = FitOperator::curve(order, &ts).unwrap();
            let eye = &op.pinv * &op.basis;
            for i in 0..=order {
                for j in 0..=order {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((eye[(i, j)] - want).abs() <= 1e-12);
                }
            }
        }
        // square system: interpolation
        let order = 3;
        let ts: Vec<f64> = (0..=order).map(|j| j as f64 / order as f64).collect();
        let op = FitOperator::curve(order, &ts).unwrap();
        let vals = [0.7, -0.2, 0.9, 0.4];
        let coeffs = op.apply(&vals);
        let curve = BezierCurve::new(coeffs);
        for (j, &t) in ts.iter().enumerate() {
            assert!((curve.eval(t) - vals[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn polynomial_curve_is_reproduced() {
        // Sampling the target at the fit's own reference parameters makes
        // the least-squares system consistent, so the control points come
        // back exactly (in one refit).
        let target = BezierCurve::new(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.35, 0.1, 0.05),
            Vec3::new(0.7, -0.1, 0.15),
            Vec3::new(1.0, 0.0, 0.2),
        ]);
        let (fit, q) = parametrize_curve(
            (target.eval(0.0), target.eval(1.0)),
            3,
            |_j, t, _x0| Ok(target.eval(t)),
            ALG_EPS,
        )
        .unwrap();
        assert!(q.converged);
        assert!(q.err <= 1e-12, "{}", q.err);
        for (p, t) in fit.points.iter().zip(&target.points) {
            assert!((p - t).norm() <= 1e-12, "{p:?} vs {t:?}");
        }
    }

    #[test]
    fn quarter_circle_error_decreases_monotonically() {
        let patch = paraboloid();
        let plane = Plane::new(Vec3::new(0.0, 0.0, 0.25), Vec3::new(0.0, 0.0, 1.0));
        let n = 4 * 4;
        let mut seeds: Vec<Vec2> = (0..n)
            .map(|j| {
                let a = std::f64::consts::FRAC_PI_2 * j as f64 / (n - 1) as f64;
                Vec2::new(0.5 * a.cos(), 0.5 * a.sin())
            })
            .collect();
        let (fit, q) = parametrize_curve(
            (Vec3::new(0.5, 0.0, 0.25), Vec3::new(0.0, 0.5, 0.25)),
            3,
            |j, _t, x0| {
                let xi = closest_point_on_curve(&patch, &plane, x0, &seeds[j])?;
                seeds[j] = xi;
                Ok(patch.eval(&xi))
            },
            ALG_EPS,
        )
        .unwrap();
        assert!(q.history.len() >= 3, "{:?}", q.history);
        // distance to the curve shrinks every round (eps wobble at the end)
        for w in q.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", q.history);
        }
        assert!(q.history[1] < 0.1 * q.history[0], "{:?}", q.history);
        // the z data is constant, so the fit reproduces the plane exactly;
        // in-plane the cubic tracks the circle to a few 1e-5 of the
        // radius, the representation limit of one cubic on a 90-degree arc
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let p = fit.eval(t);
            let r = (p.x * p.x + p.y * p.y).sqrt();
            assert!((r - 0.5).abs() <= 1e-4, "radius {r}");
            assert!((p.z - 0.25).abs() <= 1e-10);
        }
    }

    #[test]
    fn polynomial_triangle_is_reproduced() {
        // Curved order-3 target, its own edges frozen, consistent interior
        // sampling: the lone interior control point is recovered exactly.
        let x = poly2_from_monomials(3, &[(1, 0, 1.0), (0, 2, 0.2)]);
        let y = poly2_from_monomials(3, &[(0, 1, 1.0), (2, 0, -0.1)]);
        let z = poly2_from_monomials(3, &[(1, 1, 0.3), (1, 0, 0.1)]);
        let coeffs: Vec<Vec3> = (0..x.coeffs.len())
            .map(|i| Vec3::new(x.coeffs[i], y.coeffs[i], z.coeffs[i]))
            .collect();
        let target = TriNet { order: 3, coeffs };
        let edges = [
            target.edge_curve(RefEdge::Bottom),
            target.edge_curve(RefEdge::Diagonal),
            target.edge_curve(RefEdge::Left),
        ];
        let (net, q) =
            parametrize_triangle(&edges, |_j, xi, _x0| Ok(target.eval(xi)), ALG_EPS).unwrap();
        assert!(q.converged);
        assert!(q.err <= 1e-12, "{}", q.err);
        for (a, b) in net.coeffs.iter().zip(&target.coeffs) {
            assert!((a - b).norm() <= 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn triangle_fit_stays_on_target_surface() {
        // Order-3 fit over a paraboloid piece with its exact (elevated)
        // edges frozen. The target is exactly representable, so once the
        // stalled resampling hands over to the foot-point rounds the fit
        // should recover it to roundoff.
        let patch = paraboloid().restrict_to_subtriangle(
            &Vec2::new(0.2, 0.2),
            &Vec2::new(0.6, 0.2),
            &Vec2::new(0.2, 0.6),
        );
        let edges = [
            patch.edge_curve(RefEdge::Bottom).elevated_to(3),
            patch.edge_curve(RefEdge::Diagonal).elevated_to(3),
            patch.edge_curve(RefEdge::Left).elevated_to(3),
        ];
        let (net, q) = parametrize_triangle(
            &edges,
            |_j, xi, x0| {
                let p = closest_point_on_surface(&patch, x0, xi)?;
                Ok(patch.eval(&p))
            },
            ALG_EPS,
        )
        .unwrap();
        assert!(q.err <= 1e-10, "{}", q.err);
        assert!(q.history[0] > 10.0 * q.err, "{:?}", q.history);
        for w in q.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", q.history);
        }
        for i in 0..=10 {
            for j in 0..=(10 - i) {
                let xi = Vec2::new(i as f64 / 10.0, j as f64 / 10.0);
                let p = net.eval(&xi);
                assert!(
                    (p.z - (p.x * p.x + p.y * p.y)).abs() <= 1e-9,
                    "off-surface at {xi:?}"
                );
            }
        }
    }

    #[test]
    fn piece_reversal_flips_normals_only() {
        let tri = PieceMap::Triangle(paraboloid());
        let rev = tri.reversed();
        for &(u, v) in &[(0.2, 0.3), (0.5, 0.1), (0.1, 0.7)] {
            assert!((tri.eval(u, v) - rev.eval(v, u)).norm() <= 1e-15);
            let (a1, a2) = tri.partials(u, v);
            let (b1, b2) = rev.partials(v, u);
            let n = a1.cross(&a2);
            let m = b1.cross(&b2);
            assert!((n + m).norm() <= 1e-13 * n.norm().max(1.0), "{n:?} {m:?}");
        }
        let quad = PieceMap::Quad(RuledQuad::new(
            BezierCurve::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.3)]),
            BezierCurve::new(vec![Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0)]),
        ));
        let rquad = quad.reversed();
        for &(t, s) in &[(0.25, 0.4), (0.7, 0.9)] {
            assert!((quad.eval(t, s) - rquad.eval(t, 1.0 - s)).norm() <= 1e-15);
            let (a1, a2) = quad.partials(t, s);
            let (b1, b2) = rquad.partials(t, 1.0 - s);
            let n = a1.cross(&a2);
            let m = b1.cross(&b2);
            assert!((n + m).norm() <= 1e-13 * n.norm().max(1.0));
        }
    }

    #[test]
    fn ruled_quad_between_parallel_curves() {
        let c0 = BezierCurve::new(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.5, 0.2, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ]);
        let c1 = BezierCurve::new(vec![Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0)]);
        let quad = RuledQuad::new(c0.clone(), c1.clone());
        assert_eq!(quad.c0.order(), 2);
        assert_eq!(quad.c1.order(), 2);
        let p = quad.eval(0.5, 0.0);
        assert!((p - c0.eval(0.5)).norm() <= 1e-15);
        let p = quad.eval(0.25, 1.0);
        assert!((p - c1.eval(0.25)).norm() <= 1e-15);
        let mid = quad.eval(0.5, 0.5);
        assert!((mid - (c0.eval(0.5) + c1.eval(0.5)) * 0.5).norm() <= 1e-15);
    }
}
