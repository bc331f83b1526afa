//! Intersection events between Bezier geometry and planes or lines.
//!
//! Signed distance to a plane is affine in position, so the pullback of a
//! plane through a Bezier curve or triangle is again a Bernstein polynomial
//! with coefficients obtained by taking signed distances of the control
//! points. Everything here reduces to that observation plus the root
//! isolation machinery.

use crate::bezier::{BernsteinPoly2, BezierTriangle, Curve3, ScalarCurve};
use crate::error::{Error, Result};
use crate::geom::{lex_cmp_2, Plane, Vec2};
use crate::rootfind::{isolate_univariate, solve_bivariate};

/// Half-width of the sign probe used to classify a root as transversal or
/// tangential: the polynomial must change sign across the root to count as
/// a crossing.
pub const TANGENCY_PROBE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveHit {
    pub t: f64,
    /// True when the pullback does not change sign across the root, i.e.
    /// the curve touches the plane without crossing it.
    pub tangential: bool,
}

/// Scalar pullback of a plane through a curve: coefficients are the signed
/// distances of the control points. Exact in Bernstein form.
pub fn curve_plane_pullback(curve: &Curve3, plane: &Plane) -> ScalarCurve {
    ScalarCurve::new(
        curve
            .points
            .iter()
            .map(|p| plane.signed_distance(p))
            .collect(),
    )
}

/// Scalar pullback of a plane through a Bezier triangle.
pub fn plane_pullback(surf: &BezierTriangle, plane: &Plane) -> BernsteinPoly2 {
    BernsteinPoly2::new(
        surf.order,
        surf.coeffs
            .iter()
            .map(|p| plane.signed_distance(p))
            .collect(),
    )
}

/// Parameters where a curve meets a plane, each flagged as crossing or
/// tangential. Fails with `IllPosed` when the curve lies in the plane;
/// callers that allow coplanar curves must test for that first.
pub fn curve_plane(curve: &Curve3, plane: &Plane, tol: f64) -> Result<Vec<CurveHit>> {
    let pull = curve_plane_pullback(curve, plane);
    classify_roots(&pull, tol)
}

/// Roots of a scalar Bernstein polynomial with tangency classification.
pub fn classify_roots(pull: &ScalarCurve, tol: f64) -> Result<Vec<CurveHit>> {
    classify_roots_probe(pull, tol, TANGENCY_PROBE)
}

/// As `classify_roots` with an explicit probe half-width; wider probes
/// treat near-tangential crossings as tangential.
pub fn classify_roots_probe(pull: &ScalarCurve, tol: f64, probe: f64) -> Result<Vec<CurveHit>> {
    let scale = pull.coeff_inf_norm();
    let roots = isolate_univariate(pull, tol)?;
    let near = tol.max(1e-14) * scale;
    Ok(roots
        .into_iter()
        .map(|t| {
            let a = (t - probe).max(0.0);
            let b = (t + probe).min(1.0);
            let tangential = if t < probe || t > 1.0 - probe {
                // One-sided roots at the ends count as crossings; the
                // adjacent geometry decides what happens there.
                false
            } else {
                let va = pull.eval(a);
                let vb = pull.eval(b);
                va * vb > 0.0 || (va.abs() <= near && vb.abs() <= near)
            };
            CurveHit { t, tangential }
        })
        .collect())
}

/// Intersection of a Bezier triangle with the line formed by two planes.
/// Returns parameter-space points, sorted lexicographically.
pub fn surface_line(
    surf: &BezierTriangle,
    pa: &Plane,
    pb: &Plane,
    tol: f64,
) -> Result<Vec<Vec2>> {
    let cross = pa.normal.cross(&pb.normal);
    if cross.norm() <= 1e-12 * pa.normal.norm() * pb.normal.norm() {
        return Err(Error::DegenerateLine);
    }
    let ga = plane_pullback(surf, pa);
    let gb = plane_pullback(surf, pb);
    solve_bivariate(&ga, &gb, tol)
}

/// Points on the zero set of `gamma` whose directional derivative along
/// coordinate axis `axis` vanishes: solutions of {gamma = 0, d_axis gamma
/// = 0}. At such a point the zero curve's tangent is parallel to `axis`.
/// Linear polynomials have none; a vanishing partial means the zero set
/// itself is axis-parallel and contributes no isolated critical points.
pub fn aa_critical_points(gamma: &BernsteinPoly2, axis: usize, tol: f64) -> Result<Vec<Vec2>> {
    if gamma.order < 2 {
        return Ok(Vec::new());
    }
    let scale = gamma.coeff_inf_norm();
    let d = gamma.derivative(axis);
    if d.is_identically_zero(1e-14 * scale.max(1.0)) {
        return Ok(Vec::new());
    }
    // Shared order keeps both systems on one subdivision lattice.
    let d = d.elevated_to(gamma.order);
    let mut pts = solve_bivariate(gamma, &d, tol)?;
    pts.sort_by(lex_cmp_2);
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::{poly2_from_monomials, BezierCurve, TriNet};
    use crate::geom::Vec3;
    use approx::assert_relative_eq;

    fn paraboloid_patch() -> BezierTriangle {
        // phi(xi) = (xi1, xi2, xi1^2 + xi2^2); z is order 2, exactly
        // representable with the quadratic net.
        let x = poly2_from_monomials(2, &[(1, 0, 1.0)]);
        let y = poly2_from_monomials(2, &[(0, 1, 1.0)]);
        let z = poly2_from_monomials(2, &[(2, 0, 1.0), (0, 2, 1.0)]);
        let coeffs: Vec<Vec3> = x
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .zip(&z.coeffs)
            .map(|((a, b), c)| Vec3::new(*a, *b, *c))
            .collect();
        TriNet::new(2, coeffs)
    }

    #[test]
    fn curve_plane_crossing_matches_samples() {
        // Cubic with z(t) = t^3 shape via control z coords 0, 0, 0, 1
        // crossing z = 0.125 at t = 0.5.
        let curve = BezierCurve::new(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.3, 0.1, 0.0),
            Vec3::new(0.6, 0.2, 0.0),
            Vec3::new(1.0, 0.3, 1.0),
        ]);
        let plane = Plane {
            point: Vec3::new(0.0, 0.0, 0.125),
            normal: Vec3::new(0.0, 0.0, 1.0),
        };
        let hits = curve_plane(&curve, &plane, 1e-12).unwrap();
        assert_eq!(hits.len(), 1);
        assert_relative_eq!(hits[0].t, 0.5, epsilon = 1e-11);
        assert!(!hits[0].tangential);
        // Independent check: the curve point lies on the plane.
        let p = curve.eval(hits[0].t);
        assert!((p.z - 0.125).abs() <= 1e-12);
    }

    #[test]
    fn curve_plane_flags_touch_points() {
        // z(t) = (2t - 1)^2: order-2 Bernstein coefficients 1, -1, 1.
        let curve = BezierCurve::new(vec![
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.5, 0.0, -1.0),
            Vec3::new(1.0, 0.0, 1.0),
        ]);
        let plane = Plane {
            point: Vec3::zeros(),
            normal: Vec3::new(0.0, 0.0, 1.0),
        };
        let hits = curve_plane(&curve, &plane, 1e-12).unwrap();
        assert_eq!(hits.len(), 1);
        assert_relative_eq!(hits[0].t, 0.5, epsilon = 1e-6);
        assert!(hits[0].tangential);
    }

    #[test]
    fn coplanar_curve_is_ill_posed() {
        let curve = BezierCurve::new(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.5, 1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ]);
        let plane = Plane {
            point: Vec3::zeros(),
            normal: Vec3::new(0.0, 0.0, 1.0),
        };
        assert!(matches!(
            curve_plane(&curve, &plane, 1e-12),
            Err(Error::IllPosed)
        ));
    }

    #[test]
    fn surface_line_hits_paraboloid() {
        let surf = paraboloid_patch();
        let pa = Plane {
            point: Vec3::new(0.3, 0.0, 0.0),
            normal: Vec3::new(1.0, 0.0, 0.0),
        };
        let pb = Plane {
            point: Vec3::new(0.0, 0.4, 0.0),
            normal: Vec3::new(0.0, 1.0, 0.0),
        };
        let pts = surface_line(&surf, &pa, &pb, 1e-12).unwrap();
        assert_eq!(pts.len(), 1);
        assert_relative_eq!(pts[0].x, 0.3, epsilon = 1e-12);
        assert_relative_eq!(pts[0].y, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn surface_line_rejects_parallel_planes() {
        let surf = paraboloid_patch();
        let pa = Plane {
            point: Vec3::zeros(),
            normal: Vec3::new(0.0, 0.0, 1.0),
        };
        let pb = Plane {
            point: Vec3::new(0.0, 0.0, 0.5),
            normal: Vec3::new(0.0, 0.0, -1.0),
        };
        assert!(matches!(
            surface_line(&surf, &pa, &pb, 1e-12),
            Err(Error::DegenerateLine)
        ));
    }

    #[test]
    fn critical_points_of_circle() {
        // Circle of radius 0.2 about (0.4, 0.4). Where d/dxi1 vanishes the
        // tangent is parallel to xi1: the top and bottom points (0.4, 0.4
        // +- 0.2). The other direction gives the left/right points.
        let gamma = poly2_from_monomials(
            2,
            &[
                (2, 0, 1.0),
                (0, 2, 1.0),
                (1, 0, -0.8),
                (0, 1, -0.8),
                (0, 0, 0.32 - 0.04),
            ],
        );
        let horiz = aa_critical_points(&gamma, 0, 1e-12).unwrap();
        let expected_h = [Vec2::new(0.4, 0.2), Vec2::new(0.4, 0.6)];
        assert_eq!(horiz.len(), 2, "{horiz:?}");
        for (p, e) in horiz.iter().zip(&expected_h) {
            assert!((p - e).norm() <= 1e-10, "{p:?} vs {e:?}");
        }
        let vert = aa_critical_points(&gamma, 1, 1e-12).unwrap();
        let expected_v = [Vec2::new(0.2, 0.4), Vec2::new(0.6, 0.4)];
        assert_eq!(vert.len(), 2, "{vert:?}");
        for (p, e) in vert.iter().zip(&expected_v) {
            assert!((p - e).norm() <= 1e-10, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn critical_point_on_reference_boundary() {
        // gamma = xi1^2 + xi2 - 0.5: d/dxi1 = 2 xi1 vanishes on the curve
        // only at (0, 0.5).
        let gamma = poly2_from_monomials(2, &[(2, 0, 1.0), (0, 1, 1.0), (0, 0, -0.5)]);
        let pts = aa_critical_points(&gamma, 0, 1e-12).unwrap();
        assert_eq!(pts.len(), 1, "{pts:?}");
        assert!((pts[0] - Vec2::new(0.0, 0.5)).norm() <= 1e-10);
    }

    #[test]
    fn critical_points_skip_linear_and_axis_parallel() {
        let line = poly2_from_monomials(1, &[(1, 0, 1.0), (0, 1, 1.0), (0, 0, -0.5)]);
        assert!(aa_critical_points(&line, 0, 1e-12).unwrap().is_empty());
        assert!(aa_critical_points(&line, 1, 1e-12).unwrap().is_empty());
        // Horizontal line expressed at order 2: d/dxi1 vanishes identically.
        let horiz = poly2_from_monomials(1, &[(0, 1, 1.0), (0, 0, -0.3)]).elevated();
        assert!(aa_critical_points(&horiz, 0, 1e-12).unwrap().is_empty());
    }

    #[test]
    fn monotone_curve_has_no_critical_points() {
        // Strictly monotone zero curve: no axis-parallel tangents.
        let gamma = poly2_from_monomials(
            2,
            &[(1, 0, 1.0), (0, 1, -1.0), (1, 1, 0.1), (0, 0, -0.1)],
        );
        assert!(aa_critical_points(&gamma, 0, 1e-12).unwrap().is_empty());
        assert!(aa_critical_points(&gamma, 1, 1e-12).unwrap().is_empty());
    }
}
