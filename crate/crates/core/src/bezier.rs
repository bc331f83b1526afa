//! Bernstein-form polynomials on the reference simplex, Bezier curves, and
//! tensor-product Bernstein polynomials on boxes.
//!
//! Triangular nets are indexed by barycentric multi-indices (i, j, k) with
//! i + j + k = q, stored lexicographically with i descending first, then j.
//! The map to reference coordinates is lambda0 = 1 - xi1 - xi2, lambda1 =
//! xi1, lambda2 = xi2, so the corner control point P_(q,0,0) sits at
//! xi = (0,0), P_(0,q,0) at (1,0) and P_(0,0,q) at (0,1).
//!
//! Everything here works by de Casteljau recurrences and blossoming; no
//! monomial conversion happens anywhere (the tensor form is still a
//! Bernstein basis, just on a box).

use crate::geom::{Rect2, Vec2, Vec3};

/// Control value: scalar or small vector with affine combinations.
pub trait Ctrl:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
{
    fn zero() -> Self;
}

impl Ctrl for f64 {
    fn zero() -> Self {
        0.0
    }
}
impl Ctrl for Vec2 {
    fn zero() -> Self {
        Vec2::zeros()
    }
}
impl Ctrl for Vec3 {
    fn zero() -> Self {
        Vec3::zeros()
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, i| a * i as f64)
}

/// Number of control values in a triangular net of order q.
pub fn tri_len(q: usize) -> usize {
    (q + 1) * (q + 2) / 2
}

/// Storage index of multi-index (i, j, k), i + j + k = q.
pub fn tri_idx(q: usize, i: usize, j: usize) -> usize {
    let r = q - i;
    r * (r + 1) / 2 + (r - j)
}

/// Multi-indices of order q in storage order.
pub fn tri_indices(q: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..=q)
        .rev()
        .flat_map(move |i| (0..=(q - i)).rev().map(move |j| (i, j, q - i - j)))
}

// ---------------------------------------------------------------------------
// Triangular nets
// ---------------------------------------------------------------------------

/// Bernstein-form polynomial of total order `q` on the reference triangle
/// with control values of type T.
#[derive(Debug, Clone, PartialEq)]
pub struct TriNet<T> {
    pub order: usize,
    pub coeffs: Vec<T>,
}

/// Scalar polynomial over the reference triangle.
pub type BernsteinPoly2 = TriNet<f64>;
/// Polynomial patch mapping the reference triangle into 3-space.
pub type BezierTriangle = TriNet<Vec3>;
/// Planar patch (used for reference-domain maps).
pub type BezierTriangle2 = TriNet<Vec2>;

/// Edges of the reference triangle, named by their geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefEdge {
    /// xi2 = 0, from (0,0) to (1,0).
    Bottom,
    /// xi1 + xi2 = 1, from (1,0) to (0,1).
    Diagonal,
    /// xi1 = 0, from (0,1) to (0,0).
    Left,
}

impl RefEdge {
    pub fn endpoints(self) -> (Vec2, Vec2) {
        match self {
            RefEdge::Bottom => (Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)),
            RefEdge::Diagonal => (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)),
            RefEdge::Left => (Vec2::new(0.0, 1.0), Vec2::new(0.0, 0.0)),
        }
    }
}

impl<T: Ctrl> TriNet<T> {
    pub fn new(order: usize, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), tri_len(order), "control net length mismatch");
        TriNet { order, coeffs }
    }

    pub fn constant(order: usize, value: T) -> Self {
        TriNet {
            order,
            coeffs: vec![value; tri_len(order)],
        }
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        debug_assert_eq!(i + j + k, self.order);
        self.coeffs[tri_idx(self.order, i, j)]
    }

    /// One de Casteljau sweep with barycentric weights `l`, reducing a net
    /// of order `ord` (stored in `buf[..tri_len(ord)]`) to order `ord - 1`
    /// in place.
    fn sweep(buf: &mut [T], ord: usize, l: &[f64; 3]) {
        for (i, j, _k) in tri_indices(ord - 1) {
            let a = buf[tri_idx(ord, i + 1, j)];
            let b = buf[tri_idx(ord, i, j + 1)];
            let c = buf[tri_idx(ord, i, j)];
            buf[tri_idx(ord - 1, i, j)] = a * l[0] + b * l[1] + c * l[2];
        }
    }

    pub fn eval_bary(&self, l: &[f64; 3]) -> T {
        let mut buf = self.coeffs.clone();
        for ord in (1..=self.order).rev() {
            Self::sweep(&mut buf, ord, l);
        }
        buf[0]
    }

    pub fn eval(&self, xi: &Vec2) -> T {
        self.eval_bary(&[1.0 - xi.x - xi.y, xi.x, xi.y])
    }

    /// Directional derivative net along xi1 (dir = 0) or xi2 (dir = 1);
    /// order drops by one. Order-0 input yields the zero constant.
    pub fn derivative(&self, dir: usize) -> TriNet<T> {
        if self.order == 0 {
            return TriNet::constant(0, T::zero());
        }
        let q = self.order;
        let mut out = Vec::with_capacity(tri_len(q - 1));
        for (i, j, k) in tri_indices(q - 1) {
            let base = self.at(i + 1, j, k);
            let d = if dir == 0 {
                self.at(i, j + 1, k) - base
            } else {
                self.at(i, j, k + 1) - base
            };
            out.push(d * q as f64);
        }
        TriNet::new(q - 1, out)
    }

    /// Single-step degree elevation; represents the same polynomial.
    pub fn elevated(&self) -> TriNet<T> {
        let q = self.order;
        let mut out = Vec::with_capacity(tri_len(q + 1));
        let inv = 1.0 / (q + 1) as f64;
        for (i, j, k) in tri_indices(q + 1) {
            let mut v = T::zero();
            if i > 0 {
                v = v + self.at(i - 1, j, k) * (i as f64);
            }
            if j > 0 {
                v = v + self.at(i, j - 1, k) * (j as f64);
            }
            if k > 0 {
                v = v + self.at(i, j, k - 1) * (k as f64);
            }
            out.push(v * inv);
        }
        TriNet::new(q + 1, out)
    }

    pub fn elevated_to(&self, order: usize) -> TriNet<T> {
        assert!(order >= self.order);
        let mut cur = self.clone();
        while cur.order < order {
            cur = cur.elevated();
        }
        cur
    }

    /// Exact restriction to the affine sub-triangle with reference-space
    /// corners (v0, v1, v2): the child net Q with Q(eta) = P(A eta) where A
    /// maps the reference corners onto v0, v1, v2. Computed by blossoming
    /// (three chained de Casteljau pyramids).
    pub fn restrict_to_subtriangle(&self, v0: &Vec2, v1: &Vec2, v2: &Vec2) -> TriNet<T> {
        let q = self.order;
        let l0 = [1.0 - v0.x - v0.y, v0.x, v0.y];
        let l1 = [1.0 - v1.x - v1.y, v1.x, v1.y];
        let l2 = [1.0 - v2.x - v2.y, v2.x, v2.y];

        // Pyramid with l0: levels[a] has order q - a and entries equal to
        // the blossom with a copies of v0.
        let mut levels0: Vec<Vec<T>> = Vec::with_capacity(q + 1);
        levels0.push(self.coeffs.clone());
        for a in 1..=q {
            let mut buf = levels0[a - 1].clone();
            Self::sweep(&mut buf, q - a + 1, &l0);
            buf.truncate(tri_len(q - a));
            levels0.push(buf);
        }

        let mut out = vec![T::zero(); tri_len(q)];
        for a in 0..=q {
            // Pyramid with l1 starting from levels0[a].
            let mut levels1: Vec<Vec<T>> = Vec::with_capacity(q - a + 1);
            levels1.push(levels0[a].clone());
            for b in 1..=(q - a) {
                let mut buf = levels1[b - 1].clone();
                Self::sweep(&mut buf, q - a - b + 1, &l1);
                buf.truncate(tri_len(q - a - b));
                levels1.push(buf);
            }
            for b in 0..=(q - a) {
                let c = q - a - b;
                // Collapse with l2 for c steps; single value remains.
                let mut buf = levels1[b].clone();
                for ord in ((q - a - b - c + 1)..=(q - a - b)).rev() {
                    Self::sweep(&mut buf, ord, &l2);
                }
                out[tri_idx(q, a, b)] = buf[0];
            }
        }
        TriNet::new(q, out)
    }

    /// Exact restriction to the reference-space segment from `a` to `b`:
    /// a curve of the same order with d_j = blossom(a^(q-j), b^j), so
    /// d_0 = P(a) and d_q = P(b).
    pub fn restrict_to_segment(&self, a: &Vec2, b: &Vec2) -> BezierCurve<T> {
        let q = self.order;
        let la = [1.0 - a.x - a.y, a.x, a.y];
        let lb = [1.0 - b.x - b.y, b.x, b.y];
        // levels[m] = pyramid after m sweeps with la (order q - m).
        let mut levels: Vec<Vec<T>> = Vec::with_capacity(q + 1);
        levels.push(self.coeffs.clone());
        for m in 1..=q {
            let mut buf = levels[m - 1].clone();
            Self::sweep(&mut buf, q - m + 1, &la);
            buf.truncate(tri_len(q - m));
            levels.push(buf);
        }
        let mut pts = Vec::with_capacity(q + 1);
        for j in 0..=q {
            // Take the (q - j)-fold la pyramid and collapse j times with lb.
            let mut buf = levels[q - j].clone();
            for ord in (1..=j).rev() {
                Self::sweep(&mut buf, ord, &lb);
            }
            pts.push(buf[0]);
        }
        BezierCurve::new(pts)
    }

    /// Control points of the restriction to a full reference edge; an exact
    /// index selection, no arithmetic.
    pub fn edge_curve(&self, edge: RefEdge) -> BezierCurve<T> {
        let q = self.order;
        let pts: Vec<T> = (0..=q)
            .map(|t| match edge {
                RefEdge::Bottom => self.at(q - t, t, 0),
                RefEdge::Diagonal => self.at(0, q - t, t),
                RefEdge::Left => self.at(t, 0, q - t),
            })
            .collect();
        BezierCurve::new(pts)
    }

    /// Split by an axis-aligned reference line into exact sub-triangle
    /// patches (one side is a triangle, the other a trapezoid fanned into
    /// two). Children whose domain degenerates are dropped.
    pub fn split_axis_aligned(&self, axis: usize, coord: f64) -> Vec<(TriNet<T>, [Vec2; 3])> {
        let eps = 1e-14;
        if coord <= eps || coord >= 1.0 - eps {
            let corners = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
            return vec![(self.clone(), corners)];
        }
        let c = coord;
        // Corner layouts for the cut xi_axis = c over the reference triangle.
        let tris: Vec<[Vec2; 3]> = if axis == 0 {
            vec![
                [Vec2::new(0.0, 0.0), Vec2::new(c, 0.0), Vec2::new(c, 1.0 - c)],
                [Vec2::new(0.0, 0.0), Vec2::new(c, 1.0 - c), Vec2::new(0.0, 1.0)],
                [Vec2::new(c, 0.0), Vec2::new(1.0, 0.0), Vec2::new(c, 1.0 - c)],
            ]
        } else {
            vec![
                [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0 - c, c)],
                [Vec2::new(0.0, 0.0), Vec2::new(1.0 - c, c), Vec2::new(0.0, c)],
                [Vec2::new(0.0, c), Vec2::new(1.0 - c, c), Vec2::new(0.0, 1.0)],
            ]
        };
        tris.into_iter()
            .map(|t| (self.restrict_to_subtriangle(&t[0], &t[1], &t[2]), t))
            .collect()
    }
}

impl BernsteinPoly2 {
    pub fn coeff_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &c in &self.coeffs {
            lo = lo.min(c);
            hi = hi.max(c);
        }
        (lo, hi)
    }

    pub fn coeff_inf_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()))
    }

    pub fn is_identically_zero(&self, tol: f64) -> bool {
        self.coeff_inf_norm() <= tol
    }

    pub fn has_coeff_sign_change(&self) -> bool {
        let (lo, hi) = self.coeff_range();
        lo < 0.0 && hi > 0.0
    }

    /// Gradient at a reference point.
    pub fn gradient(&self, xi: &Vec2) -> Vec2 {
        Vec2::new(self.derivative(0).eval(xi), self.derivative(1).eval(xi))
    }
}

impl BezierTriangle {
    /// Axis-aligned bounding box of the control net; contains the patch by
    /// the convex-hull property.
    pub fn control_aabb(&self) -> crate::geom::Aabb3 {
        crate::geom::Aabb3::from_points(self.coeffs.iter())
    }

    pub fn diameter(&self) -> f64 {
        self.control_aabb().diagonal()
    }

    /// Unnormalized surface normal d1 x d2 at a reference point.
    pub fn normal(&self, xi: &Vec2) -> Vec3 {
        self.derivative(0).eval(xi).cross(&self.derivative(1).eval(xi))
    }
}

/// Exact Bernstein coefficients of coef * xi1^a * xi2^b as an order-q net
/// (requires a + b <= q). Used to build test polynomials and benchmark
/// fixtures with known closed forms.
pub fn poly2_from_monomial(q: usize, a: usize, b: usize, coef: f64) -> BernsteinPoly2 {
    assert!(a + b <= q);
    let mut out = vec![0.0; tri_len(q)];
    let m = q - a - b;
    for (i, j, k) in tri_indices(q) {
        if j >= a && k >= b {
            // xi1^a xi2^b (l0+l1+l2)^m expanded over the Bernstein basis.
            let s = j - a;
            let t = k - b;
            if i + s + t == m {
                let multi = factorial(m) / (factorial(i) * factorial(s) * factorial(t));
                let basis = factorial(q) / (factorial(i) * factorial(j) * factorial(k));
                out[tri_idx(q, i, j)] += coef * multi / basis;
            }
        }
    }
    BernsteinPoly2::new(q, out)
}

/// Sum of monomial nets: terms are (a, b, coefficient).
pub fn poly2_from_monomials(q: usize, terms: &[(usize, usize, f64)]) -> BernsteinPoly2 {
    let mut out = BernsteinPoly2::constant(q, 0.0);
    for &(a, b, c) in terms {
        let t = poly2_from_monomial(q, a, b, c);
        for (o, v) in out.coeffs.iter_mut().zip(t.coeffs) {
            *o += v;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

/// Bezier curve of order n with control points in T, over t in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve<T> {
    pub points: Vec<T>,
}

pub type ScalarCurve = BezierCurve<f64>;
pub type Curve2 = BezierCurve<Vec2>;
pub type Curve3 = BezierCurve<Vec3>;

/// Result of splitting a curve; a cut at (or beyond) an endpoint is
/// degenerate and returns the curve unchanged.
pub enum CurveSplit<T> {
    Pair(BezierCurve<T>, BezierCurve<T>),
    Degenerate(BezierCurve<T>),
}

impl<T: Ctrl> BezierCurve<T> {
    pub fn new(points: Vec<T>) -> Self {
        assert!(!points.is_empty());
        BezierCurve { points }
    }

    pub fn order(&self) -> usize {
        self.points.len() - 1
    }

    pub fn eval(&self, t: f64) -> T {
        let mut buf = self.points.clone();
        let n = buf.len();
        for lvl in 1..n {
            for i in 0..(n - lvl) {
                buf[i] = buf[i] * (1.0 - t) + buf[i + 1] * t;
            }
        }
        buf[0]
    }

    pub fn derivative(&self) -> BezierCurve<T> {
        let n = self.order();
        if n == 0 {
            return BezierCurve::new(vec![T::zero()]);
        }
        let pts = (0..n)
            .map(|i| (self.points[i + 1] - self.points[i]) * n as f64)
            .collect();
        BezierCurve::new(pts)
    }

    pub fn split(&self, t: f64) -> CurveSplit<T> {
        let eps = 1e-14;
        if t <= eps || t >= 1.0 - eps {
            return CurveSplit::Degenerate(self.clone());
        }
        let n = self.points.len();
        let mut buf = self.points.clone();
        let mut left = Vec::with_capacity(n);
        let mut right = vec![T::zero(); n];
        left.push(buf[0]);
        right[n - 1] = buf[n - 1];
        for lvl in 1..n {
            for i in 0..(n - lvl) {
                buf[i] = buf[i] * (1.0 - t) + buf[i + 1] * t;
            }
            left.push(buf[0]);
            right[n - 1 - lvl] = buf[n - 1 - lvl];
        }
        CurveSplit::Pair(BezierCurve::new(left), BezierCurve::new(right))
    }

    /// Exact restriction to the parameter interval [t0, t1].
    pub fn restricted(&self, t0: f64, t1: f64) -> BezierCurve<T> {
        assert!(t0 <= t1);
        let right = match self.split(t0) {
            CurveSplit::Pair(_, r) => r,
            CurveSplit::Degenerate(c) => c,
        };
        let local = if t0 >= 1.0 - 1e-14 {
            1.0
        } else {
            (t1 - t0) / (1.0 - t0)
        };
        match right.split(local) {
            CurveSplit::Pair(l, _) => l,
            CurveSplit::Degenerate(c) => c,
        }
    }

    pub fn elevated(&self) -> BezierCurve<T> {
        let n = self.order();
        let mut pts = Vec::with_capacity(n + 2);
        pts.push(self.points[0]);
        for i in 1..=n {
            let a = i as f64 / (n + 1) as f64;
            pts.push(self.points[i - 1] * a + self.points[i] * (1.0 - a));
        }
        pts.push(self.points[n]);
        BezierCurve::new(pts)
    }

    pub fn elevated_to(&self, order: usize) -> BezierCurve<T> {
        assert!(order >= self.order());
        let mut cur = self.clone();
        while cur.order() < order {
            cur = cur.elevated();
        }
        cur
    }

    pub fn reversed(&self) -> BezierCurve<T> {
        let mut pts = self.points.clone();
        pts.reverse();
        BezierCurve::new(pts)
    }
}

impl ScalarCurve {
    pub fn coeff_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &c in &self.points {
            lo = lo.min(c);
            hi = hi.max(c);
        }
        (lo, hi)
    }

    pub fn coeff_inf_norm(&self) -> f64 {
        self.points.iter().fold(0.0f64, |a, c| a.max(c.abs()))
    }

    /// Number of strict sign changes in the coefficient sequence (zeros are
    /// skipped); bounds the root count by variation diminishing.
    pub fn sign_changes(&self) -> usize {
        let mut count = 0;
        let mut last = 0.0f64;
        for &c in &self.points {
            if c != 0.0 {
                if last != 0.0 && c.signum() != last.signum() {
                    count += 1;
                }
                last = c;
            }
        }
        count
    }
}

// ---------------------------------------------------------------------------
// Tensor-product form on boxes
// ---------------------------------------------------------------------------

/// Scalar tensor-product Bernstein polynomial of bidegree (m, n) over an
/// axis-aligned box. Row-major: coefficient (a, b) at index a * (n+1) + b,
/// where a runs along x and b along y.
#[derive(Debug, Clone)]
pub struct TensorPoly2 {
    pub deg: (usize, usize),
    pub domain: Rect2,
    pub coeffs: Vec<f64>,
}

fn solve_bernstein_vandermonde(n: usize, rhs_cols: &mut nalgebra::DMatrix<f64>) {
    // Interpolation at uniform nodes t_i = i / n in the order-n Bernstein
    // basis; conditioning is harmless for the small orders used here.
    let m = nalgebra::DMatrix::from_fn(n + 1, n + 1, |i, j| {
        let t = i as f64 / n as f64;
        binomial(n, j) * t.powi(j as i32) * (1.0 - t).powi((n - j) as i32)
    });
    let lu = m.lu();
    let solved = lu.solve(rhs_cols).expect("Bernstein interpolation matrix is invertible");
    *rhs_cols = solved;
}

impl TensorPoly2 {
    pub fn idx(&self, a: usize, b: usize) -> usize {
        a * (self.deg.1 + 1) + b
    }

    /// Tensor Bernstein form of a simplex polynomial on the unit square
    /// (which contains the reference triangle). Same polynomial, rebased.
    pub fn from_simplex_poly(p: &BernsteinPoly2) -> TensorPoly2 {
        let q = p.order;
        let n = q.max(1);
        // Values on the uniform (n+1) x (n+1) grid.
        let mut vals = nalgebra::DMatrix::from_fn(n + 1, n + 1, |a, b| {
            p.eval(&Vec2::new(a as f64 / n as f64, b as f64 / n as f64))
        });
        // Interpolate along x (rows of coefficients per y-node), then y.
        solve_bernstein_vandermonde(n, &mut vals);
        let mut t = vals.transpose();
        solve_bernstein_vandermonde(n, &mut t);
        let coeffs_mat = t.transpose();
        let mut coeffs = Vec::with_capacity((n + 1) * (n + 1));
        for a in 0..=n {
            for b in 0..=n {
                coeffs.push(coeffs_mat[(a, b)]);
            }
        }
        TensorPoly2 {
            deg: (n, n),
            domain: Rect2::unit(),
            coeffs,
        }
    }

    pub fn eval(&self, p: &Vec2) -> f64 {
        let e = self.domain.extent();
        let u = (p.x - self.domain.min.x) / e.x;
        let v = (p.y - self.domain.min.y) / e.y;
        let (m, n) = self.deg;
        // Collapse y first, then x.
        let mut rows = Vec::with_capacity(m + 1);
        for a in 0..=m {
            let mut buf: Vec<f64> = (0..=n).map(|b| self.coeffs[a * (n + 1) + b]).collect();
            for lvl in 1..=n {
                for i in 0..=(n - lvl) {
                    buf[i] = buf[i] * (1.0 - v) + buf[i + 1] * v;
                }
            }
            rows.push(buf[0]);
        }
        for lvl in 1..=m {
            for i in 0..=(m - lvl) {
                rows[i] = rows[i] * (1.0 - u) + rows[i + 1] * u;
            }
        }
        rows[0]
    }

    pub fn coeff_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &c in &self.coeffs {
            lo = lo.min(c);
            hi = hi.max(c);
        }
        (lo, hi)
    }

    /// Split the box at absolute coordinate `coord` along `axis`; both
    /// children carry Bernstein coefficients on their sub-box.
    pub fn split(&self, axis: usize, coord: f64) -> (TensorPoly2, TensorPoly2) {
        let e = self.domain.extent();
        let t = if axis == 0 {
            (coord - self.domain.min.x) / e.x
        } else {
            (coord - self.domain.min.y) / e.y
        };
        let (m, n) = self.deg;
        let (dlo, dhi) = self.domain.split(axis, coord);
        let mut lo = self.clone();
        let mut hi = self.clone();
        lo.domain = dlo;
        hi.domain = dhi;
        if axis == 0 {
            // de Casteljau on columns of a-index for each fixed b.
            for b in 0..=n {
                let mut buf: Vec<f64> = (0..=m).map(|a| self.coeffs[a * (n + 1) + b]).collect();
                let mut left = Vec::with_capacity(m + 1);
                let mut right = vec![0.0; m + 1];
                left.push(buf[0]);
                right[m] = buf[m];
                for lvl in 1..=m {
                    for i in 0..=(m - lvl) {
                        buf[i] = buf[i] * (1.0 - t) + buf[i + 1] * t;
                    }
                    left.push(buf[0]);
                    right[m - lvl] = buf[m - lvl];
                }
                for a in 0..=m {
                    lo.coeffs[a * (n + 1) + b] = left[a];
                    hi.coeffs[a * (n + 1) + b] = right[a];
                }
            }
        } else {
            for a in 0..=m {
                let row = &self.coeffs[a * (n + 1)..(a + 1) * (n + 1)];
                let mut buf = row.to_vec();
                let mut left = Vec::with_capacity(n + 1);
                let mut right = vec![0.0; n + 1];
                left.push(buf[0]);
                right[n] = buf[n];
                for lvl in 1..=n {
                    for i in 0..=(n - lvl) {
                        buf[i] = buf[i] * (1.0 - t) + buf[i + 1] * t;
                    }
                    left.push(buf[0]);
                    right[n - lvl] = buf[n - lvl];
                }
                lo.coeffs[a * (n + 1)..(a + 1) * (n + 1)].copy_from_slice(&left);
                hi.coeffs[a * (n + 1)..(a + 1) * (n + 1)].copy_from_slice(&right);
            }
        }
        (lo, hi)
    }
}
