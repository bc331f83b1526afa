//! Root isolation for Bernstein-form polynomials on the unit interval and
//! the reference triangle.
//!
//! Both solvers prune by the convex-hull property (a region whose Bernstein
//! coefficients exclude zero contains no root), bisect what survives, and
//! polish candidates with guarded Newton iterations evaluated on the
//! original polynomials, so the final accuracy never depends on subdivision
//! arithmetic.

use crate::bezier::{BernsteinPoly2, CurveSplit, ScalarCurve, TensorPoly2};
use crate::error::{Error, Result};
use crate::geom::{lex_cmp_2, Rect2, ReferenceTriangle, Vec2};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Subdivision depth budget for the bivariate solver.
pub const MAX_DEPTH: usize = 64;

/// Regions smaller than this are handed to Newton; the depth budget cannot
/// reach 1e-12 boxes, so isolation stops here and polishing takes over.
const EMIT_FLOOR: f64 = 1e-8;

const NEWTON_MAX_ITERS: usize = 50;

// ---------------------------------------------------------------------------
// Univariate
// ---------------------------------------------------------------------------

/// All roots of a Bernstein-form polynomial in [0, 1], sorted ascending,
/// pairwise separated by more than `tol`, each with |p(t)| <= tol * scale
/// where scale is the coefficient infinity norm.
pub fn isolate_univariate(p: &ScalarCurve, tol: f64) -> Result<Vec<f64>> {
    let scale = p.coeff_inf_norm();
    if scale == 0.0 {
        return Err(Error::IllPosed);
    }
    let floor = tol.max(1e-10);
    let mut cands: Vec<f64> = Vec::new();

    // Exact endpoint roots are invisible to strict sign-change counting.
    if p.eval(0.0).abs() <= tol * scale {
        cands.push(0.0);
    }
    if p.eval(1.0).abs() <= tol * scale {
        cands.push(1.0);
    }

    let mut stack: Vec<(ScalarCurve, f64, f64)> = vec![(p.clone(), 0.0, 1.0)];
    while let Some((seg, a, b)) = stack.pop() {
        let (lo, hi) = seg.coeff_range();
        if lo > 0.0 || hi < 0.0 {
            continue;
        }
        let changes = seg.sign_changes();
        if changes == 0 {
            // Coefficients touch zero without crossing; only sub-tol wiggles
            // are possible here once the interval is small.
            if b - a < floor {
                let mid = 0.5 * (a + b);
                if p.eval(mid).abs() <= tol * scale {
                    cands.push(mid);
                }
            } else {
                push_halves(&mut stack, &seg, a, b);
            }
            continue;
        }
        if changes == 1 {
            // Certified bracket with exactly one root.
            cands.push(polish_bracketed(p, a, b));
            continue;
        }
        if b - a < floor {
            let mid = 0.5 * (a + b);
            let t = newton_univariate(p, mid, a, b, tol * scale);
            if p.eval(t).abs() <= tol * scale {
                cands.push(t);
            } else if p.eval(mid).abs() <= tol * scale {
                cands.push(mid);
            }
            continue;
        }
        push_halves(&mut stack, &seg, a, b);
    }

    cands.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut roots: Vec<f64> = Vec::new();
    for t in cands {
        match roots.last() {
            Some(&last) if (t - last).abs() <= tol.max(1e-11) => {
                // Keep the better of the merged pair.
                if p.eval(t).abs() < p.eval(last).abs() {
                    *roots.last_mut().unwrap() = t;
                }
            }
            _ => roots.push(t),
        }
    }

    // Even-multiplicity roots surface as clusters of residual-certified
    // candidates spread across the flat basin; collapse neighbors whose
    // midpoint also satisfies the residual bound, since nothing at this
    // tolerance distinguishes them.
    let mut merged: Vec<f64> = Vec::new();
    for t in roots {
        match merged.last() {
            Some(&last)
                if t - last <= 1e-3 && p.eval(0.5 * (last + t)).abs() <= tol * scale =>
            {
                if p.eval(t).abs() < p.eval(last).abs() {
                    *merged.last_mut().unwrap() = t;
                }
            }
            _ => merged.push(t),
        }
    }
    Ok(merged)
}

fn push_halves(stack: &mut Vec<(ScalarCurve, f64, f64)>, seg: &ScalarCurve, a: f64, b: f64) {
    match seg.split(0.5) {
        CurveSplit::Pair(l, r) => {
            let mid = 0.5 * (a + b);
            // Right first so the left half is processed first (sorted later
            // anyway; this just keeps traversal deterministic).
            stack.push((r, mid, b));
            stack.push((l, a, mid));
        }
        CurveSplit::Degenerate(_) => {}
    }
}

/// Safeguarded Newton on a sign-changing bracket [a, b]. Iterates to
/// stagnation rather than stopping at the acceptance residual, so simple
/// roots come out at full precision.
fn polish_bracketed(p: &ScalarCurve, a: f64, b: f64) -> f64 {
    let dp = p.derivative();
    let (mut lo, mut hi) = (a, b);
    let (mut flo, fhi) = (p.eval(lo), p.eval(hi));
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITERS {
        let f = p.eval(x);
        if f == 0.0 || hi - lo < 1e-16 {
            return x;
        }
        // Shrink the bracket.
        if (f > 0.0) == (flo > 0.0) {
            lo = x;
            flo = f;
        } else {
            hi = x;
        }
        let d = dp.eval(x);
        let step = if d != 0.0 { f / d } else { f64::INFINITY };
        let xn = x - step;
        let next = if xn > lo && xn < hi { xn } else { 0.5 * (lo + hi) };
        if (next - x).abs() < 1e-17 {
            return next;
        }
        x = next;
    }
    x
}

/// Unbracketed Newton clamped to [a, b]; used for candidates that never
/// certified a sign change (even-multiplicity roots).
fn newton_univariate(p: &ScalarCurve, start: f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    let dp = p.derivative();
    let mut x = start;
    for _ in 0..NEWTON_MAX_ITERS {
        let f = p.eval(x);
        if f.abs() <= abs_tol {
            return x;
        }
        let d = dp.eval(x);
        if d == 0.0 {
            return x;
        }
        let xn = (x - f / d).clamp(a - (b - a), b + (b - a)).clamp(0.0, 1.0);
        if (xn - x).abs() < 1e-16 {
            return xn;
        }
        x = xn;
    }
    x
}

// ---------------------------------------------------------------------------
// Bivariate
// ---------------------------------------------------------------------------

/// All common roots of two Bernstein-form polynomials over the reference
/// triangle, sorted lexicographically, pairwise separated by more than
/// `tol`, with both residuals below tol * (own coefficient scale).
///
/// Subdivision runs on axis-aligned boxes clipped against the triangle;
/// boxes where either polynomial's tensor coefficients exclude zero are
/// discarded, the longer axis is bisected otherwise, and surviving boxes
/// below the emission floor are polished with a damped 2x2 Newton evaluated
/// on the original simplex-form polynomials.
pub fn solve_bivariate(p1: &BernsteinPoly2, p2: &BernsteinPoly2, tol: f64) -> Result<Vec<Vec2>> {
    let s1 = p1.coeff_inf_norm();
    let s2 = p2.coeff_inf_norm();
    if s1 == 0.0 || s2 == 0.0 {
        return Err(Error::IllPosed);
    }
    let floor = tol.max(EMIT_FLOOR);

    let t1 = TensorPoly2::from_simplex_poly(p1);
    let t2 = TensorPoly2::from_simplex_poly(p2);
    // Tensor conversion is exact up to interpolation conditioning; widen the
    // exclusion test accordingly so pruning stays sound.
    let m1 = 1e-11 * s1;
    let m2 = 1e-11 * s2;

    let mut cands: Vec<Vec2> = Vec::new();
    let mut stack: Vec<(TensorPoly2, TensorPoly2, usize)> = vec![(t1, t2, 0)];
    while let Some((a, b, depth)) = stack.pop() {
        let dom = a.domain;
        if dom.min.x + dom.min.y > 1.0 {
            continue; // entirely outside the reference triangle
        }
        let (lo1, hi1) = a.coeff_range();
        if lo1 > m1 || hi1 < -m1 {
            continue;
        }
        let (lo2, hi2) = b.coeff_range();
        if lo2 > m2 || hi2 < -m2 {
            continue;
        }
        if dom.diameter() < floor {
            cands.push(dom.center());
            continue;
        }
        if depth >= MAX_DEPTH {
            return Err(Error::MaxDepth(MAX_DEPTH));
        }
        let axis = dom.longest_axis();
        let coord = 0.5 * (dom.min[axis] + dom.max[axis]);
        let (a_lo, a_hi) = a.split(axis, coord);
        let (b_lo, b_hi) = b.split(axis, coord);
        stack.push((a_hi, b_hi, depth + 1));
        stack.push((a_lo, b_lo, depth + 1));
    }

    // Polish and filter.
    let abs1 = tol * s1;
    let abs2 = tol * s2;
    let mut roots: Vec<Vec2> = Vec::new();
    for c in cands {
        let x = newton_2x2(p1, p2, &c);
        let pick = |p: &Vec2| -> bool {
            ReferenceTriangle::contains(p, 1e-9)
                && p1.eval(p).abs() <= abs1
                && p2.eval(p).abs() <= abs2
        };
        let refined = if pick(&x) {
            Some(ReferenceTriangle::clamp(&x))
        } else if pick(&c) {
            Some(ReferenceTriangle::clamp(&c))
        } else {
            None
        };
        if let Some(r) = refined {
            let sep = tol.max(1e-9);
            let mut merged = false;
            for existing in roots.iter_mut() {
                if (r - *existing).norm() <= sep {
                    let better = p1.eval(&r).abs() + p2.eval(&r).abs()
                        < p1.eval(existing).abs() + p2.eval(existing).abs();
                    if better {
                        *existing = r;
                    }
                    merged = true;
                    break;
                }
            }
            if !merged {
                roots.push(r);
            }
        }
    }
    roots.sort_by(lex_cmp_2);
    Ok(roots)
}

/// Damped Newton for the 2x2 system, clamped to the reference triangle.
fn newton_2x2(p1: &BernsteinPoly2, p2: &BernsteinPoly2, start: &Vec2) -> Vec2 {
    let d1 = (p1.derivative(0), p1.derivative(1));
    let d2 = (p2.derivative(0), p2.derivative(1));
    let res = |x: &Vec2| Vec2::new(p1.eval(x), p2.eval(x));
    let mut x = *start;
    let mut f = res(&x);
    for _ in 0..NEWTON_MAX_ITERS {
        if f.norm() == 0.0 {
            return x;
        }
        let j11 = d1.0.eval(&x);
        let j12 = d1.1.eval(&x);
        let j21 = d2.0.eval(&x);
        let j22 = d2.1.eval(&x);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            return x;
        }
        let dx = Vec2::new((f.x * j22 - f.y * j12) / det, (f.y * j11 - f.x * j21) / det);
        // Damped line search: halve until the residual decreases.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let xn = ReferenceTriangle::clamp(&(x - dx * lambda));
            let fn_ = res(&xn);
            if fn_.norm() < f.norm() {
                if (xn - x).norm() < 1e-16 {
                    return xn;
                }
                x = xn;
                f = fn_;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return x;
        }
    }
    x
}

/// Where a box-and-triangle subdivision region sits; exported for callers
/// that reuse the pruning logic on their own regions.
pub fn region_excludes_triangle(dom: &Rect2) -> bool {
    dom.min.x + dom.min.y > 1.0
}
