//! Discrete background geometries: structured grids (periodic torus,
//! Neumann slab) and a warped-product radial reduction, together with
//! curvature tensors, an independent finite difference curvature oracle and
//! the doubling (even reflection) construction.

mod chart;
mod curvature;
mod double;
mod metric;
mod oracle;

pub use chart::{Backend, EndKind, GridChart};
pub use curvature::{
    cell_volumes, curvature, unit_sphere_area, CurvatureBundle, GridCurvature, WarpedCurvature,
};
pub use double::{double_field, double_metric, neumann_violation};
pub use metric::{build_metric, MetricData, MetricField, MetricRecipe};
pub use oracle::{fd_curvature_oracle, CurvatureAtNode};
