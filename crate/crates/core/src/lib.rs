//! Cut-cell quadrature for oriented Bezier-triangle boundary meshes on
//! axis-aligned Cartesian background grids.
//!
//! The pipeline runs in stages:
//!
//! 1. `mesh` / `grid`: load the boundary mesh, build the background grid,
//!    and bin faces to candidate cells by control-net bounding boxes.
//! 2. `intersect` / `rootfind`: locate curve-plane, surface-line and
//!    axis-aligned critical points in reference coordinates.
//! 3. `trim`: refine each face's reference domain into monotone leaf
//!    regions, connect boundary intersections into alpha-curves, and split
//!    the domain into nonlinear polygons classified against the cell.
//! 4. `partition` / `fitting`: decompose polygons into triangles and
//!    anisotropic quads, then parametrize each piece (exact restrictions
//!    where possible, frozen-boundary least-squares fits elsewhere).
//! 5. `cellcut`: assemble watertight boundary representations of the inside
//!    and outside fragments of every cut cell.
//! 6. `quadrature`: surface rules on pieces, monomial moments by the
//!    divergence theorem, and moment-fitted bulk rules.
//! 7. `pipeline` / `bench`: whole-grid driver, output writers, and the
//!    sphere/robustness benchmarks.
//!
//! All polynomial work stays in Bernstein form (barycentric on simplices,
//! tensor-product on boxes); nothing is ever converted to the monomial basis.

pub mod bench;
pub mod bezier;
pub mod cellcut;
pub mod error;
pub mod fitting;
pub mod geom;
pub mod grid;
pub mod intersect;
pub mod mesh;
pub mod partition;
pub mod pipeline;
pub mod quadrature;
pub mod rootfind;
pub mod trim;

pub use error::{Error, Result};
