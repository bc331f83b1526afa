//! Gauss rules on parametrized surface pieces, volume moments of cut
//! cells via the divergence theorem, and moment-fitted bulk quadratures
//! on the background cells.

use crate::bezier::binomial;
use crate::error::{Error, Result};
use crate::fitting::PieceMap;
use crate::geom::Vec3;
use crate::grid::BackgroundCell;
use nalgebra::DMatrix;

/// Gauss-Legendre nodes and weights on [0, 1], exact through degree 2n-1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // (P_n, P_{n-1}) by the three-term recurrence
    let eval = |x: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for m in 2..=n {
            let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
            p0 = p1;
            p1 = p2;
        }
        (p1, p0)
    };
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for k in 0..n {
        // Newton from the Chebyshev-like initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (pn, pn1) = eval(x);
            dp = n as f64 * (pn1 - x * pn) / (1.0 - x * x);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                let (pn, pn1) = eval(x);
                dp = n as f64 * (pn1 - x * pn) / (1.0 - x * x);
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs.push(0.5 * (x + 1.0));
        ws.push(0.5 * w);
    }
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

/// Rule on the unit reference triangle exact for total degree `degree`:
/// tensor Gauss through the collapsed-square substitution
/// (a, b) -> (a, b(1-a)) with Jacobian (1-a).
pub fn triangle_rule(degree: usize) -> Vec<(f64, f64, f64)> {
    let n = degree / 2 + 1;
    let (xa, wa) = gauss_legendre(n + 1); // the Jacobian raises the a-degree by one
    let (xb, wb) = gauss_legendre(n);
    let mut out = Vec::with_capacity(xa.len() * xb.len());
    for (&a, &wu) in xa.iter().zip(&wa) {
        for (&b, &wv) in xb.iter().zip(&wb) {
            out.push((a, b * (1.0 - a), wu * wv * (1.0 - a)));
        }
    }
    out
}

/// Physical-space surface quadrature: points, scalar weights carrying the
/// area element, and unit normals in the piece's own orientation.
#[derive(Debug, Clone, Default)]
pub struct SurfaceRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec3>,
}

impl SurfaceRule {
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Vector area: integral of the unit normal. Zero for any closed
    /// consistently oriented boundary.
    pub fn vector_area(&self) -> Vec3 {
        self.points
            .iter()
            .zip(&self.weights)
            .zip(&self.normals)
            .fold(Vec3::zeros(), |acc, ((_, &w), n)| acc + n * w)
    }

    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w * f(p))
            .sum()
    }

    pub fn append(&mut self, other: SurfaceRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
        self.normals.extend(other.normals);
    }
}

/// Gauss rule on one piece for spatial integrands of total degree
/// `degree`. The reference rule is raised by 3x the map order to cover
/// the composed integrand and the area-element factor without exact
/// degree bookkeeping.
pub fn surface_rule(piece: &PieceMap, degree: usize) -> Result<SurfaceRule> {
    let q = piece.order().max(1);
    // A degree-`degree` polynomial composed with the order-q map has
    // parameter degree q*degree, and the unnormalized area vector adds
    // 2(q-1): the rule is exact for the full flux integrand, which is
    // what lets closure and complementarity identities hold to roundoff.
    let target = q * degree + 2 * (q - 1);
    let floor = 1e-14 * piece.diameter().max(1e-30).powi(2);
    let mut rule = SurfaceRule::default();
    let mut push = |u: f64, v: f64, wref: f64| -> Result<()> {
        let (d1, d2) = piece.partials(u, v);
        let n = d1.cross(&d2);
        let area = n.norm();
        if area <= floor {
            return Err(Error::NonPositiveJacobian);
        }
        rule.points.push(piece.eval(u, v));
        rule.weights.push(wref * area);
        rule.normals.push(n / area);
        Ok(())
    };
    match piece {
        PieceMap::Triangle(_) => {
            for (u, v, w) in triangle_rule(target) {
                push(u, v, w)?;
            }
        }
        PieceMap::Quad(_) => {
            // the ruling direction is linear, so its degree stays at
            // degree+1 while the t-direction carries the composed order
            let (xt, wt) = gauss_legendre(target / 2 + 2);
            let (xs, ws) = gauss_legendre(degree.div_ceil(2) + 1);
            for (&t, &a) in xt.iter().zip(&wt) {
                for (&s, &b) in xs.iter().zip(&ws) {
                    push(t, s, a * b)?;
                }
            }
        }
    }
    Ok(rule)
}

/// Volume moments of the region enclosed by a watertight oriented
/// boundary, for all monomials with per-axis exponent <= degree, in
/// global coordinates.
#[derive(Debug, Clone)]
pub struct MonomialMoments {
    pub degree: usize,
    /// Indexed by `idx(a, b, c)`, value = integral of x^a y^b z^c.
    pub values: Vec<f64>,
    /// Relative disagreement of the three antiderivative sweeps on the
    /// volume; a watertightness diagnostic.
    pub sweep_spread: f64,
}

impl MonomialMoments {
    pub fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        let n = self.degree + 1;
        (a * n + b) * n + c
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[self.idx(a, b, c)]
    }

    pub fn volume(&self) -> f64 {
        self.get(0, 0, 0)
    }
}

/// Monomial moments of the solid bounded by `pieces` (outward oriented,
/// watertight) by integrating antiderivative forms over the boundary.
/// Work happens in the cell-local frame mapping the cell to [-1,1]^3 and
/// averages the three sweep axes; the result is transformed back.
pub fn stokes_moments(
    pieces: &[PieceMap],
    degree: usize,
    cell: &BackgroundCell,
) -> Result<MonomialMoments> {
    let n = degree + 1;
    let center = cell.center();
    let half = (cell.aabb.max - cell.aabb.min) * 0.5;
    // one rule per piece covers every monomial in the family
    let spatial = 3 * degree + 1;
    let mut rules = Vec::with_capacity(pieces.len());
    for piece in pieces {
        rules.push(surface_rule(piece, spatial)?);
    }
    // local moments per sweep axis
    let mut local = vec![0.0; n * n * n];
    let mut sweeps = [0.0; 3];
    let powers = |v: f64| -> Vec<f64> {
        let mut p = Vec::with_capacity(n + 1);
        let mut acc = 1.0;
        for _ in 0..=n {
            p.push(acc);
            acc *= v;
        }
        p
    };
    let mut per_axis = vec![[0.0; 3]; n * n * n];
    for rule in &rules {
        for ((p, &w), nrm) in rule.points.iter().zip(&rule.weights).zip(&rule.normals) {
            let lx = (p.x - center.x) / half.x;
            let ly = (p.y - center.y) / half.y;
            let lz = (p.z - center.z) / half.z;
            let px = powers(lx);
            let py = powers(ly);
            let pz = powers(lz);
            // scaled facet fluxes: local normal times local area element
            let fx = w * nrm.x / (half.y * half.z);
            let fy = w * nrm.y / (half.x * half.z);
            let fz = w * nrm.z / (half.x * half.y);
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let i = (a * n + b) * n + c;
                        per_axis[i][0] += px[a + 1] / (a + 1) as f64 * py[b] * pz[c] * fx;
                        per_axis[i][1] += px[a] * py[b + 1] / (b + 1) as f64 * pz[c] * fy;
                        per_axis[i][2] += px[a] * py[b] * pz[c + 1] / (c + 1) as f64 * fz;
                    }
                }
            }
        }
    }
    for (i, tri) in per_axis.iter().enumerate() {
        local[i] = (tri[0] + tri[1] + tri[2]) / 3.0;
    }
    sweeps.copy_from_slice(&per_axis[0]);
    let vol_mean = local[0];
    let spread = if vol_mean.abs() > 1e-300 {
        let lo = sweeps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sweeps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / vol_mean.abs()
    } else {
        0.0
    };
    // back to global monomials: x^a = (cx + hx*t)^a expanded in t
    let expand = |c: f64, h: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|e| {
                (0..=e)
                    .map(|i| binomial(e, i) * c.powi((e - i) as i32) * h.powi(i as i32))
                    .collect()
            })
            .collect()
    };
    let tx = expand(center.x, half.x);
    let ty = expand(center.y, half.y);
    let tz = expand(center.z, half.z);
    // local moments carry the local volume element; physical volume
    // restores the cell scale
    let det = half.x * half.y * half.z;
    let mut values = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for (i, &wa) in tx[a].iter().enumerate() {
                    for (j, &wb) in ty[b].iter().enumerate() {
                        for (k, &wc) in tz[c].iter().enumerate() {
                            s += wa * wb * wc * local[(i * n + j) * n + k];
                        }
                    }
                }
                values[(a * n + b) * n + c] = s * det;
            }
        }
    }
    Ok(MonomialMoments {
        degree,
        values,
        sweep_spread: spread,
    })
}

/// Bulk quadrature rule in physical space.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w * f(p))
            .sum()
    }

    /// Moment fitting does not guarantee positivity; callers may want to
    /// log how often it fails.
    pub fn negative_weight_count(&self) -> usize {
        self.weights.iter().filter(|w| **w < 0.0).count()
    }
}

/// Weights on the fixed tensor Lagrange lattice of the cell reproducing
/// the given moments. The lattice is geometry-independent: equispaced
/// per axis including the cell boundary (cell center for degree 0). The
/// Vandermonde system factorizes per axis and is solved in the cell's
/// [-1,1]^3 frame.
pub fn moment_fit(moments: &MonomialMoments, cell: &BackgroundCell) -> Result<Quadrature> {
    let r = moments.degree;
    let n = r + 1;
    let center = cell.center();
    let half = (cell.aabb.max - cell.aabb.min) * 0.5;
    let nodes1: Vec<f64> = if r == 0 {
        vec![0.0]
    } else {
        (0..n).map(|i| -1.0 + 2.0 * i as f64 / r as f64).collect()
    };
    // relocalize the global moments: t-powers of ((x - c)/h)
    let expand = |c: f64, h: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|e| {
                (0..=e)
                    .map(|i| binomial(e, i) * (-c / h).powi((e - i) as i32) * (1.0 / h).powi(i as i32))
                    .collect()
            })
            .collect()
    };
    let tx = expand(center.x, half.x);
    let ty = expand(center.y, half.y);
    let tz = expand(center.z, half.z);
    let mut local = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for (i, &wa) in tx[a].iter().enumerate() {
                    for (j, &wb) in ty[b].iter().enumerate() {
                        for (k, &wc) in tz[c].iter().enumerate() {
                            s += wa * wb * wc * moments.values[(i * n + j) * n + k];
                        }
                    }
                }
                local[(a * n + b) * n + c] = s;
            }
        }
    }
    // per-axis Vandermonde solve: contract the moment tensor one axis at
    // a time with V^{-1}, V[e][node] = node^e
    let vand = DMatrix::from_fn(n, n, |e, a| nodes1[a].powi(e as i32));
    let lu = vand.lu();
    let solve_axis = |data: &mut [f64], axis: usize| -> Result<()> {
        let stride = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        for u in 0..n {
            for v in 0..n {
                let mut col = nalgebra::DVector::zeros(n);
                for e in 0..n {
                    let idx = match axis {
                        0 => stride(e, u, v),
                        1 => stride(u, e, v),
                        _ => stride(u, v, e),
                    };
                    col[e] = data[idx];
                }
                let sol = lu.solve(&col).ok_or(Error::SingularSystem)?;
                for e in 0..n {
                    let idx = match axis {
                        0 => stride(e, u, v),
                        1 => stride(u, e, v),
                        _ => stride(u, v, e),
                    };
                    data[idx] = sol[e];
                }
            }
        }
        Ok(())
    };
    let mut w = local.clone();
    solve_axis(&mut w, 0)?;
    solve_axis(&mut w, 1)?;
    solve_axis(&mut w, 2)?;
    // relocalized moments keep the physical volume element, so the
    // solved weights are physical as they stand
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for (a, &na) in nodes1.iter().enumerate() {
        for (b, &nb) in nodes1.iter().enumerate() {
            for (c, &nc) in nodes1.iter().enumerate() {
                points.push(Vec3::new(
                    center.x + half.x * na,
                    center.y + half.y * nb,
                    center.z + half.z * nc,
                ));
                weights.push(w[(a * n + b) * n + c]);
            }
        }
    }
    let rule = Quadrature { points, weights };
    // exactness check doubles as a conditioning guard
    let volscale = cell.volume();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let want = moments.values[(a * n + b) * n + c];
                let got = rule.integrate(|p| {
                    p.x.powi(a as i32) * p.y.powi(b as i32) * p.z.powi(c as i32)
                });
                if (got - want).abs() > 1e-12 * volscale.max(want.abs()) {
                    return Err(Error::SingularSystem);
                }
            }
        }
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::{poly2_from_monomials, BezierCurve, TriNet};
    use crate::geom::Aabb3;
    use crate::grid::BackgroundGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cell() -> BackgroundCell {
        let grid = BackgroundGrid::new(
            Aabb3 {
                min: Vec3::new(0.0, 0.0, 0.0),
                max: Vec3::new(1.0, 1.0, 1.0),
            },
            [1, 1, 1],
        );
        grid.cell([0, 0, 0])
    }

    fn flat_triangle(v0: Vec3, v1: Vec3, v2: Vec3) -> PieceMap {
        let x = poly2_from_monomials(1, &[(0, 0, v0.x), (1, 0, v1.x - v0.x), (0, 1, v2.x - v0.x)]);
        let y = poly2_from_monomials(1, &[(0, 0, v0.y), (1, 0, v1.y - v0.y), (0, 1, v2.y - v0.y)]);
        let z = poly2_from_monomials(1, &[(0, 0, v0.z), (1, 0, v1.z - v0.z), (0, 1, v2.z - v0.z)]);
        let coeffs: Vec<Vec3> = (0..x.coeffs.len())
            .map(|i| Vec3::new(x.coeffs[i], y.coeffs[i], z.coeffs[i]))
            .collect();
        PieceMap::Triangle(TriNet { order: 1, coeffs })
    }

    fn quad_between(a0: Vec3, a1: Vec3, b0: Vec3, b1: Vec3) -> PieceMap {
        PieceMap::Quad(crate::fitting::RuledQuad::new(
            BezierCurve::new(vec![a0, a1]),
            BezierCurve::new(vec![b0, b1]),
        ))
    }

    #[test]
    fn gauss_nodes_integrate_monomials() {
        for n in 1..=10 {
            let (xs, ws) = gauss_legendre(n);
            for deg in 0..=(2 * n - 1) {
                let got: f64 = xs
                    .iter()
                    .zip(&ws)
                    .map(|(&x, &w)| w * x.powi(deg as i32))
                    .sum();
                let want = 1.0 / (deg + 1) as f64;
                assert!((got - want).abs() <= 1e-14, "n={n} deg={deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn triangle_rule_is_exact() {
        // integral of x^a y^b over the unit right triangle is a!b!/(a+b+2)!
        let fact = |m: usize| (1..=m).product::<usize>() as f64;
        for degree in 0..=8 {
            let rule = triangle_rule(degree);
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let got: f64 = rule
                        .iter()
                        .map(|&(x, y, w)| w * x.powi(a as i32) * y.powi(b as i32))
                        .sum();
                    let want = fact(a) * fact(b) / fact(a + b + 2);
                    assert!((got - want).abs() <= 1e-14, "deg {degree} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn flat_triangle_area_and_normals() {
        let piece = flat_triangle(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        );
        let rule = surface_rule(&piece, 2).unwrap();
        assert!((rule.area() - 0.5).abs() <= 1e-14);
        for n in &rule.normals {
            assert!((n - Vec3::new(0.0, 0.0, 1.0)).norm() <= 1e-14);
        }
    }

    #[test]
    fn tilted_triangle_polynomial_integrals() {
        // triangle (0,0,0)-(1,0,1)-(0,1,1): x=u, y=v, z=u+v, area factor
        // sqrt(3). With f = x^2 z the pullback is u^3 + u^2 v, whose
        // reference integrals are 1/20 and 1/60, so the total is
        // sqrt(3) * (1/20 + 1/60) = sqrt(3)/15.
        let piece = flat_triangle(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
        );
        let rule = surface_rule(&piece, 3).unwrap();
        let got = rule.integrate(|p| p.x * p.x * p.z);
        assert!((got - 3.0_f64.sqrt() / 15.0).abs() <= 1e-12, "{got}");
        // f = y z^2 pulls back to v(u+v)^2; integrals: u^2 v -> 1/60,
        // 2 u v^2 -> 2/60, v^3 -> 1/20; total sqrt(3) * (1/60 + 2/60 + 3/60)
        let got = rule.integrate(|p| p.y * p.z * p.z);
        assert!((got - 3.0_f64.sqrt() * 0.1).abs() <= 1e-12, "{got}");
    }

    #[test]
    fn curved_quad_area() {
        // X(t,s) = (t, s, st): area = int sqrt(1 + s^2 + t^2) over the
        // unit square = 1.2807892752734039 (30-digit adaptive oracle,
        // frozen)
        let piece = quad_between(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0),
        );
        let rule = surface_rule(&piece, 12).unwrap();
        assert!((rule.area() - 1.2807892752734039).abs() <= 1e-9, "{}", rule.area());
    }

    /// Outward-oriented boundary of the unit cube as 12 flat triangles.
    fn cube_boundary() -> Vec<PieceMap> {
        let mut pieces = Vec::new();
        let corners = |f: usize, s: f64| -> [Vec3; 4] {
            // facet quad corners, CCW seen from outside
            let (a, b) = ((f + 1) % 3, (f + 2) % 3);
            let mut out = [[0.0; 3]; 4];
            let pattern = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            for (m, &(pa, pb)) in pattern.iter().enumerate() {
                out[m][f] = s;
                if s > 0.5 {
                    out[m][a] = pa;
                    out[m][b] = pb;
                } else {
                    out[m][a] = pb;
                    out[m][b] = pa;
                }
            }
            out.map(|c| Vec3::new(c[0], c[1], c[2]))
        };
        for f in 0..3 {
            for s in [0.0, 1.0] {
                let [c0, c1, c2, c3] = corners(f, s);
                pieces.push(flat_triangle(c0, c1, c2));
                pieces.push(flat_triangle(c0, c2, c3));
            }
        }
        pieces
    }

    #[test]
    fn cube_moments_are_exact() {
        let cell = unit_cell();
        let m = stokes_moments(&cube_boundary(), 2, &cell).unwrap();
        assert!(m.sweep_spread <= 1e-12, "{}", m.sweep_spread);
        assert!((m.volume() - 1.0).abs() <= 1e-12);
        assert!((m.get(1, 1, 1) - 0.125).abs() <= 1e-12);
        assert!((m.get(1, 0, 0) - 0.5).abs() <= 1e-12);
        assert!((m.get(2, 0, 0) - 1.0 / 3.0).abs() <= 1e-12);
        assert!((m.get(2, 2, 2) - 1.0 / 27.0).abs() <= 1e-12);
    }

    #[test]
    fn half_cell_moments() {
        // slab x < 0.5 of the unit cell
        let scale = |p: Vec3| Vec3::new(0.5 * p.x, p.y, p.z);
        let pieces: Vec<PieceMap> = cube_boundary()
            .into_iter()
            .map(|p| match p {
                PieceMap::Triangle(net) => PieceMap::Triangle(TriNet {
                    order: net.order,
                    coeffs: net.coeffs.into_iter().map(scale).collect(),
                }),
                PieceMap::Quad(_) => unreachable!(),
            })
            .collect();
        let m = stokes_moments(&pieces, 1, &unit_cell()).unwrap();
        assert!(m.sweep_spread <= 1e-12);
        assert!((m.volume() - 0.5).abs() <= 1e-12);
        assert!((m.get(1, 0, 0) - 0.125).abs() <= 1e-12);
        assert!((m.get(1, 1, 1) - 0.03125).abs() <= 1e-12);
    }

    /// Boundary of the solid {z <= x y} inside the unit cube: bottom
    /// square, two wall triangles, and the exact ruled top z = x y.
    fn under_ruled_surface() -> Vec<PieceMap> {
        vec![
            // bottom z=0, outward -z
            flat_triangle(
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
            ),
            flat_triangle(
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
            ),
            // wall x=1: 0 <= z <= y, outward +x
            flat_triangle(
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 1.0),
            ),
            // wall y=1: 0 <= z <= x, outward +y
            flat_triangle(
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 1.0),
                Vec3::new(1.0, 1.0, 0.0),
            ),
            // top z = x y exactly: X(t,s) = (t, s, st); the normal
            // d_t x d_s = (1,0,s) x (0,1,t) = (-s, -t, 1) points out of
            // the solid already
            quad_between(
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 1.0),
            ),
        ]
    }

    #[test]
    fn curved_solid_moments_match_closed_forms() {
        // vol = 1/4; int x = 1/6; int xyz = 1/32 (z-integral x^2y^2/2,
        // then x^3/2 * y^3 integrates to (1/8)(1/4))
        let cell = unit_cell();
        let m = stokes_moments(&under_ruled_surface(), 1, &cell).unwrap();
        assert!(m.sweep_spread <= 1e-10, "{}", m.sweep_spread);
        assert!((m.volume() - 0.25).abs() <= 1e-12, "{}", m.volume());
        assert!((m.get(1, 0, 0) - 1.0 / 6.0).abs() <= 1e-12);
        assert!((m.get(1, 1, 1) - 1.0 / 32.0).abs() <= 1e-12);
    }

    #[test]
    fn closed_boundaries_have_zero_vector_area() {
        for pieces in [cube_boundary(), under_ruled_surface()] {
            let mut total = SurfaceRule::default();
            for p in &pieces {
                total.append(surface_rule(p, 2).unwrap());
            }
            assert!(total.vector_area().norm() <= 1e-12 * total.area());
        }
    }

    #[test]
    fn moment_fit_reproduces_cell_and_slab() {
        let cell = unit_cell();
        for r in 0..=5 {
            let m = stokes_moments(&cube_boundary(), r, &cell).unwrap();
            let rule = moment_fit(&m, &cell).unwrap();
            assert!((rule.total() - 1.0).abs() <= 1e-12);
            for a in 0..=r {
                for b in 0..=r {
                    for c in 0..=r {
                        let got = rule.integrate(|p| {
                            p.x.powi(a as i32) * p.y.powi(b as i32) * p.z.powi(c as i32)
                        });
                        let want = m.get(a, b, c);
                        assert!((got - want).abs() <= 1e-12, "r={r} ({a},{b},{c})");
                    }
                }
            }
        }
        // half cell: the rule integrates xyz to the slab value
        let scale = |p: Vec3| Vec3::new(0.5 * p.x, p.y, p.z);
        let pieces: Vec<PieceMap> = cube_boundary()
            .into_iter()
            .map(|p| match p {
                PieceMap::Triangle(net) => PieceMap::Triangle(TriNet {
                    order: net.order,
                    coeffs: net.coeffs.into_iter().map(scale).collect(),
                }),
                PieceMap::Quad(_) => unreachable!(),
            })
            .collect();
        let m = stokes_moments(&pieces, 1, &unit_cell()).unwrap();
        let rule = moment_fit(&m, &unit_cell()).unwrap();
        assert!((rule.integrate(|p| p.x * p.y * p.z) - 0.03125).abs() <= 1e-12);
        assert!((rule.total() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn monte_carlo_agrees_on_curved_solid() {
        // independent check of the ruled-top moments: 10^6 samples,
        // binomial 3-sigma band
        let cell = unit_cell();
        let m = stokes_moments(&under_ruled_surface(), 2, &cell).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000usize;
        let mut hits = 0usize;
        let mut sx = 0.0;
        for _ in 0..n {
            let x = rng.gen::<f64>();
            let y = rng.gen::<f64>();
            let z = rng.gen::<f64>();
            if z <= x * y {
                hits += 1;
                sx += x * x; // accumulate x^2 over the solid
            }
        }
        let vol_mc = hits as f64 / n as f64;
        let sigma_vol = (0.25 * 0.75 / n as f64).sqrt();
        assert!((m.volume() - vol_mc).abs() <= 3.0 * sigma_vol);
        let mx2_mc = sx / n as f64;
        // crude spread bound: samples of x^2 * indicator lie in [0,1]
        let sigma_mx2 = (0.25 / n as f64).sqrt();
        assert!((m.get(2, 0, 0) - mx2_mc).abs() <= 3.0 * sigma_mx2);
    }

    #[test]
    fn degenerate_piece_is_rejected() {
        let piece = flat_triangle(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        );
        assert!(matches!(
            surface_rule(&piece, 2),
            Err(Error::NonPositiveJacobian)
        ));
    }

    #[test]
    fn moment_fit_on_offset_cell() {
        // conditioning sanity away from the origin: cell [2,2.5]^3
        let grid = BackgroundGrid::new(
            Aabb3 {
                min: Vec3::new(2.0, 2.0, 2.0),
                max: Vec3::new(2.5, 2.5, 2.5),
            },
            [1, 1, 1],
        );
        let cell = grid.cell([0, 0, 0]);
        let shift = |p: Vec3| Vec3::new(2.0 + 0.5 * p.x, 2.0 + 0.5 * p.y, 2.0 + 0.5 * p.z);
        let pieces: Vec<PieceMap> = cube_boundary()
            .into_iter()
            .map(|p| match p {
                PieceMap::Triangle(net) => PieceMap::Triangle(TriNet {
                    order: net.order,
                    coeffs: net.coeffs.into_iter().map(shift).collect(),
                }),
                PieceMap::Quad(_) => unreachable!(),
            })
            .collect();
        let m = stokes_moments(&pieces, 3, &cell).unwrap();
        assert!((m.volume() - 0.125).abs() <= 1e-12, "{}", m.volume());
        // int x^3 over [2, 2.5] times 0.25 cross-section area
        let want = (2.5f64.powi(4) - 2.0f64.powi(4)) / 4.0 * 0.25;
        assert!((m.get(3, 0, 0) - want).abs() <= 1e-11 * want.abs());
        let rule = moment_fit(&m, &cell).unwrap();
        assert!((rule.integrate(|p| p.x * p.x * p.x) - want).abs() <= 1e-11 * want);
    }

    #[test]
    fn random_polynomial_on_random_flat_pieces() {
        // degree-3 polynomial on affine triangles vs the exact pullback
        // integral computed from reference-triangle monomial values
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fact = |m: usize| (1..=m).product::<usize>() as f64;
        for _ in 0..10 {
            let v: Vec<Vec3> = (0..3)
                .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let piece = flat_triangle(v[0], v[1], v[2]);
            let e1 = v[1] - v[0];
            let e2 = v[2] - v[0];
            let area2 = e1.cross(&e2).norm();
            if area2 < 1e-3 {
                continue;
            }
            // f(p) = (c . p)^3 for a random direction c: pullback is
            // (alpha + beta u + gamma v)^3, expanded exactly below
            let cdir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let alpha = cdir.dot(&v[0]);
            let beta = cdir.dot(&e1);
            let gamma = cdir.dot(&e2);
            let mut want = 0.0;
            for i in 0..=3usize {
                for j in 0..=(3 - i) {
                    let k = 3 - i - j;
                    let coef = fact(3) / (fact(i) * fact(j) * fact(k))
                        * alpha.powi(k as i32)
                        * beta.powi(i as i32)
                        * gamma.powi(j as i32);
                    want += coef * fact(i) * fact(j) / fact(i + j + 2);
                }
            }
            want *= area2;
            let rule = surface_rule(&piece, 3).unwrap();
            let got = rule.integrate(|p| cdir.dot(p).powi(3));
            assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }
}
