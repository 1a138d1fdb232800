//! Finite element machinery: meshes, quadrature, truss and 9-node quad
//! elements, assembly, generalized-α dynamics, and forward simulation.

pub mod assembly;
pub mod dynamics;
pub mod element;
pub mod mesh;
pub mod quad;
pub mod simulate;

pub use assembly::{
    assemble_internal, assemble_load_vector, assemble_mass, external_force, gp_force_maps,
    reference_geometry, strains_at_gauss, ElemGeom, GpForceMap,
};
pub use dynamics::{galpha_step, initial_acceleration, DynState, GAlphaParams, NewtonOpts};
pub use mesh::{
    read_mesh_file, structured_plate, truss_chain, write_mesh_file, BCs, Dirichlet, EdgeTraction,
    ElementKind, LoadProtocol, Mesh, PlateGrid, PointLoad, TractionProfile,
};
pub use quad::{gauss_quad, shape_quad9};
pub use simulate::{simulate, GpState, Material, SimOptions, SimStatus, Trajectory};
