mod geometry;
mod ising;

pub use geometry::{
    compatible, components, enumerate_shapes, is_closed_connected, Contour, Plaquette, ShapeConstraint, Vertex,
};
pub use ising::{
    alpha_crossing, alpha_ising, box_contours, contours_from_spins, ising_exact, plus_alignment, IsingAlpha, IsingContourModel,
    IsingGrid, ShapeCatalog,
};
