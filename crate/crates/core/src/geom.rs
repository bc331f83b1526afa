//! Small geometric primitives shared across the kernel.

use nalgebra::{Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Oriented plane through `point` with (not necessarily unit) normal.
/// Signed distance is positive on the side the normal points into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

impl Plane {
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        Plane { point, normal }
    }

    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        (x - self.point).dot(&self.normal)
    }
}

/// Closed axis-aligned box in 3D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb3 {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb3 {
    pub fn empty() -> Self {
        Aabb3 {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.absorb(p);
        }
        b
    }

    pub fn absorb(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb3) -> Aabb3 {
        Aabb3 {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// Closed-box overlap test: touching boxes intersect.
    pub fn intersects(&self, other: &Aabb3) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && self.max[i] >= other.min[i])
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn inflate(&self, margin: f64) -> Aabb3 {
        Aabb3 {
            min: self.min - Vec3::repeat(margin),
            max: self.max + Vec3::repeat(margin),
        }
    }
}

/// Closed axis-aligned rectangle in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect2 {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect2 {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Rect2 { min, max }
    }

    pub fn unit() -> Self {
        Rect2::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0))
    }

    pub fn extent(&self) -> Vec2 {
        self.max - self.min
    }

    pub fn diameter(&self) -> f64 {
        self.extent().norm()
    }

    pub fn center(&self) -> Vec2 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, p: &Vec2, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }

    /// Longest axis: 0 for x, 1 for y. Ties go to x.
    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.y > e.x {
            1
        } else {
            0
        }
    }

    pub fn split(&self, axis: usize, coord: f64) -> (Rect2, Rect2) {
        let mut lo = *self;
        let mut hi = *self;
        if axis == 0 {
            lo.max.x = coord;
            hi.min.x = coord;
        } else {
            lo.max.y = coord;
            hi.min.y = coord;
        }
        (lo, hi)
    }
}

/// Reference triangle {xi1 >= 0, xi2 >= 0, xi1 + xi2 <= 1}.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceTriangle;

impl ReferenceTriangle {
    pub const VERTICES: [Vec2; 3] = [
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(0.0, 1.0),
    ];

    pub fn contains(p: &Vec2, tol: f64) -> bool {
        p.x >= -tol && p.y >= -tol && p.x + p.y <= 1.0 + tol
    }

    /// Barycentric coordinates (lambda0, lambda1, lambda2) of a reference
    /// point; lambda1 = xi1, lambda2 = xi2.
    pub fn barycentric(p: &Vec2) -> [f64; 3] {
        [1.0 - p.x - p.y, p.x, p.y]
    }

    /// Euclidean projection onto the (closed) reference triangle.
    pub fn clamp(p: &Vec2) -> Vec2 {
        let mut q = Vec2::new(p.x.max(0.0), p.y.max(0.0));
        let s = q.x + q.y;
        if s > 1.0 {
            // Project onto the diagonal xi1 + xi2 = 1, then re-clamp.
            let d = 0.5 * (s - 1.0);
            q.x = (q.x - d).clamp(0.0, 1.0);
            q.y = (q.y - d).clamp(0.0, 1.0);
            let s2 = q.x + q.y;
            if s2 > 1.0 {
                q *= 1.0 / s2;
            }
        }
        q
    }
}

/// Lexicographic comparison of 2D points (x first, then y).
pub fn lex_cmp_2(a: &Vec2, b: &Vec2) -> std::cmp::Ordering {
    a.x.partial_cmp(&b.x)
        .unwrap()
        .then(a.y.partial_cmp(&b.y).unwrap())
}

/// Distance from `p` to segment [a, b].
pub fn dist_point_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + t * ab)).norm()
}

/// Proper intersection test for open segments (a,b) and (c,d); endpoint
/// touches within `tol` do not count.
pub fn segments_cross(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2, tol: f64) -> bool {
    let orient = |p: &Vec2, q: &Vec2, r: &Vec2| (q - p).perp(&(r - p));
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    let scale = (b - a).norm() * (d - c).norm() + tol;
    let t = tol * scale;
    d1 * d2 < -t * t && d3 * d4 < -t * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_triangle_membership() {
        assert!(ReferenceTriangle::contains(&Vec2::new(0.2, 0.3), 0.0));
        assert!(!ReferenceTriangle::contains(&Vec2::new(0.6, 0.6), 1e-12));
        assert!(ReferenceTriangle::contains(&Vec2::new(0.5, 0.5), 1e-12));
    }

    #[test]
    fn clamp_projects_into_triangle() {
        let cases = [
            Vec2::new(-0.2, 0.5),
            Vec2::new(0.8, 0.8),
            Vec2::new(1.5, -0.3),
            Vec2::new(0.3, 0.3),
        ];
        for p in cases {
            let q = ReferenceTriangle::clamp(&p);
            assert!(ReferenceTriangle::contains(&q, 1e-12), "{p:?} -> {q:?}");
        }
        // Interior points are fixed points.
        let p = Vec2::new(0.25, 0.25);
        assert_eq!(ReferenceTriangle::clamp(&p), p);
    }

    #[test]
    fn aabb_overlap_is_closed() {
        let a = Aabb3 {
            min: Vec3::new(0.0, 0.0, 0.0),
            max: Vec3::new(1.0, 1.0, 1.0),
        };
        let b = Aabb3 {
            min: Vec3::new(1.0, 0.0, 0.0),
            max: Vec3::new(2.0, 1.0, 1.0),
        };
        assert!(a.intersects(&b));
    }

    #[test]
    fn segment_crossing() {
        let tol = 1e-12;
        assert!(segments_cross(
            &Vec2::new(0.0, 0.0),
            &Vec2::new(1.0, 1.0),
            &Vec2::new(0.0, 1.0),
            &Vec2::new(1.0, 0.0),
            tol
        ));
        // Shared endpoint is not a proper crossing.
        assert!(!segments_cross(
            &Vec2::new(0.0, 0.0),
            &Vec2::new(1.0, 1.0),
            &Vec2::new(1.0, 1.0),
            &Vec2::new(2.0, 0.0),
            tol
        ));
    }
}
