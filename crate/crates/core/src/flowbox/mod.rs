//! Volume-preserving flowbox charts that rectify the field to `∂/∂x₁`.

mod chart;
mod fixture;
mod moser;
mod poisson;
mod spline;

pub use chart::{
    build_chart, chart_det_fd, generic_max_radius, sample_chart_domain, suspension_max_radius, verify_chart, ChartReport,
    FlowboxChart, RectifyingChart, SuspensionChart,
};
pub use fixture::{read_chart_fixture, write_chart_fixture, ChartFixture};
pub use moser::{moser_grid_fixed, moser_solve_1d, moser_solve_grid, Density, MoserMap};
pub use poisson::BallGrid;
pub use spline::TensorSpline;
