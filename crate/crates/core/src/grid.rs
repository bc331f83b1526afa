//! Axis-aligned background grid and per-cell facet geometry.
//!
//! Cells are half-open boxes [min, max) except along the top boundary of
//! the grid, where the last cell also owns its max face. Facets follow the
//! fixed order -x, +x, -y, +y, -z, +z throughout; every facet carries a
//! right-handed in-plane frame whose u x v axis equals the outward normal,
//! so counterclockwise polygons in facet coordinates are outward-oriented.

use crate::geom::{Aabb3, Rect2, Vec2, Vec3, Plane};

/// Facet direction in the fixed traversal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    XNeg,
    XPos,
    YNeg,
    YPos,
    ZNeg,
    ZPos,
}

impl Dir {
    pub const ALL: [Dir; 6] = [
        Dir::XNeg,
        Dir::XPos,
        Dir::YNeg,
        Dir::YPos,
        Dir::ZNeg,
        Dir::ZPos,
    ];

    pub fn axis(self) -> usize {
        match self {
            Dir::XNeg | Dir::XPos => 0,
            Dir::YNeg | Dir::YPos => 1,
            Dir::ZNeg | Dir::ZPos => 2,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Dir::XNeg | Dir::YNeg | Dir::ZNeg => -1.0,
            _ => 1.0,
        }
    }

    pub fn opposite(self) -> Dir {
        match self {
            Dir::XNeg => Dir::XPos,
            Dir::XPos => Dir::XNeg,
            Dir::YNeg => Dir::YPos,
            Dir::YPos => Dir::YNeg,
            Dir::ZNeg => Dir::ZPos,
            Dir::ZPos => Dir::ZNeg,
        }
    }

    pub fn index(self) -> usize {
        Dir::ALL.iter().position(|&d| d == self).unwrap()
    }

    /// In-plane axes (u, v) with e_u x e_v = outward normal.
    pub fn tangent_axes(self) -> (usize, usize) {
        match self {
            Dir::XPos => (1, 2),
            Dir::XNeg => (2, 1),
            Dir::YPos => (2, 0),
            Dir::YNeg => (0, 2),
            Dir::ZPos => (0, 1),
            Dir::ZNeg => (1, 0),
        }
    }

    pub fn normal(self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis()] = self.sign();
        n
    }
}

/// Right-handed 2D chart on a facet plane. Coordinates are the global
/// coordinates along the two tangent axes, so lengths and areas are
/// physical and lifting back to 3D is exact.
#[derive(Debug, Clone, Copy)]
pub struct FacetFrame {
    pub dir: Dir,
    /// Coordinate of the plane along the facet axis.
    pub plane_coord: f64,
    pub u_axis: usize,
    pub v_axis: usize,
    /// Facet rectangle in (u, v) coordinates.
    pub rect: Rect2,
}

impl FacetFrame {
    pub fn plane(&self) -> Plane {
        let mut point = Vec3::zeros();
        point[self.dir.axis()] = self.plane_coord;
        Plane {
            point,
            normal: self.dir.normal(),
        }
    }

    pub fn to_3d(&self, p: &Vec2) -> Vec3 {
        let mut out = Vec3::zeros();
        out[self.dir.axis()] = self.plane_coord;
        out[self.u_axis] = p.x;
        out[self.v_axis] = p.y;
        out
    }

    pub fn to_2d(&self, p: &Vec3) -> Vec2 {
        Vec2::new(p[self.u_axis], p[self.v_axis])
    }

    /// Push a 3D tangent vector into facet coordinates.
    pub fn tangent_to_2d(&self, v: &Vec3) -> Vec2 {
        Vec2::new(v[self.u_axis], v[self.v_axis])
    }

    pub fn normal(&self) -> Vec3 {
        self.dir.normal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundGrid {
    pub bbox: Aabb3,
    pub n: [usize; 3],
}

impl BackgroundGrid {
    pub fn new(bbox: Aabb3, n: [usize; 3]) -> Self {
        assert!(n.iter().all(|&k| k > 0), "grid needs at least one cell per axis");
        BackgroundGrid { bbox, n }
    }

    /// Uniform grid with n cells per direction.
    pub fn uniform(bbox: Aabb3, n: usize) -> Self {
        Self::new(bbox, [n, n, n])
    }

    pub fn h(&self) -> Vec3 {
        let d = self.bbox.max - self.bbox.min;
        Vec3::new(
            d.x / self.n[0] as f64,
            d.y / self.n[1] as f64,
            d.z / self.n[2] as f64,
        )
    }

    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Plane coordinate of grid line `k` along `axis` (k in 0..=n).
    pub fn line(&self, axis: usize, k: usize) -> f64 {
        // The last line is the exact bbox coordinate, not an accumulation.
        if k == self.n[axis] {
            self.bbox.max[axis]
        } else {
            self.bbox.min[axis] + self.h()[axis] * k as f64
        }
    }

    pub fn cell(&self, idx: [usize; 3]) -> BackgroundCell {
        debug_assert!((0..3).all(|a| idx[a] < self.n[a]));
        let min = Vec3::new(
            self.line(0, idx[0]),
            self.line(1, idx[1]),
            self.line(2, idx[2]),
        );
        let max = Vec3::new(
            self.line(0, idx[0] + 1),
            self.line(1, idx[1] + 1),
            self.line(2, idx[2] + 1),
        );
        BackgroundCell {
            idx,
            aabb: Aabb3 { min, max },
        }
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.n[1] + idx[1]) * self.n[0] + idx[0]
    }

    pub fn from_flat(&self, flat: usize) -> [usize; 3] {
        let i = flat % self.n[0];
        let j = (flat / self.n[0]) % self.n[1];
        let k = flat / (self.n[0] * self.n[1]);
        [i, j, k]
    }

    /// Cells in flat-index order (x fastest).
    pub fn cells(&self) -> impl Iterator<Item = BackgroundCell> + '_ {
        (0..self.cell_count()).map(|f| self.cell(self.from_flat(f)))
    }

    /// The unique owning cell of a point under the half-open convention.
    /// Points outside the grid are clamped.
    pub fn owning_cell(&self, p: &Vec3) -> [usize; 3] {
        let h = self.h();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let rel = (p[a] - self.bbox.min[a]) / h[a];
            idx[a] = (rel.floor() as isize).clamp(0, self.n[a] as isize - 1) as usize;
        }
        idx
    }

    /// Inclusive index range of cells whose closed boxes meet `aabb`.
    /// Boxes that only touch a shared grid plane are included on both
    /// sides; restriction decides what actually lands in the cell.
    pub fn cell_range(&self, aabb: &Aabb3) -> Option<([usize; 3], [usize; 3])> {
        if !self.bbox.intersects(aabb) {
            return None;
        }
        let h = self.h();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let rl = (aabb.min[a] - self.bbox.min[a]) / h[a];
            let rh = (aabb.max[a] - self.bbox.min[a]) / h[a];
            lo[a] = (rl.floor() as isize).clamp(0, self.n[a] as isize - 1) as usize;
            // ceil - 1 so a max coordinate exactly on a grid line stays in
            // the lower cell; the upper cell sees only a measure-zero slice,
            // and content exactly on the plane belongs to the upper cell via
            // the floor on the min side.
            let top = rh.ceil() as isize - 1;
            hi[a] = top.clamp(lo[a] as isize, self.n[a] as isize - 1) as usize;
        }
        Some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundCell {
    pub idx: [usize; 3],
    pub aabb: Aabb3,
}

impl BackgroundCell {
    pub fn center(&self) -> Vec3 {
        0.5 * (self.aabb.min + self.aabb.max)
    }

    pub fn volume(&self) -> f64 {
        let d = self.aabb.max - self.aabb.min;
        d.x * d.y * d.z
    }

    /// Facet plane with outward normal.
    pub fn facet_plane(&self, dir: Dir) -> Plane {
        let a = dir.axis();
        let coord = if dir.sign() < 0.0 {
            self.aabb.min[a]
        } else {
            self.aabb.max[a]
        };
        let mut point = Vec3::zeros();
        point[a] = coord;
        Plane {
            point,
            normal: dir.normal(),
        }
    }

    pub fn facet_frame(&self, dir: Dir) -> FacetFrame {
        let a = dir.axis();
        let coord = if dir.sign() < 0.0 {
            self.aabb.min[a]
        } else {
            self.aabb.max[a]
        };
        let (u_axis, v_axis) = dir.tangent_axes();
        let rect = Rect2 {
            min: Vec2::new(self.aabb.min[u_axis], self.aabb.min[v_axis]),
            max: Vec2::new(self.aabb.max[u_axis], self.aabb.max[v_axis]),
        };
        FacetFrame {
            dir,
            plane_coord: coord,
            u_axis,
            v_axis,
            rect,
        }
    }

    /// Affine chart onto [-1, 1]^3 used to condition moment systems.
    pub fn local_frame(&self) -> CellFrame {
        CellFrame {
            center: self.center(),
            half: 0.5 * (self.aabb.max - self.aabb.min),
        }
    }
}

/// Affine map between a cell and the reference box [-1, 1]^3.
#[derive(Debug, Clone, Copy)]
pub struct CellFrame {
    pub center: Vec3,
    pub half: Vec3,
}

impl CellFrame {
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            (p.x - self.center.x) / self.half.x,
            (p.y - self.center.y) / self.half.y,
            (p.z - self.center.z) / self.half.z,
        )
    }

    pub fn from_local(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            self.center.x + p.x * self.half.x,
            self.center.y + p.y * self.half.y,
            self.center.z + p.z * self.half.z,
        )
    }

    /// Jacobian determinant of from_local.
    pub fn volume_scale(&self) -> f64 {
        self.half.x * self.half.y * self.half.z
    }
}
