//! Rigid transforms, triangle meshes, point clouds, and the geometric
//! queries the rest of the crate is built on. Everything is `f64`.

pub mod cloud;
pub mod containment;
pub mod mesh;
pub mod nearest;
pub mod pose;
pub mod sample;

pub use cloud::{Aabb, PointCloud};
pub use containment::point_in_mesh;
pub use mesh::{primitives, TriMesh};
pub use nearest::{
    closest_point_on_triangle, nearest_displacement, nearest_pair_from_samples, nearest_point_on_mesh, NearestPair,
};
pub use pose::{rot_from_6d, rot_to_6d, Pose, Rot6D, Rotation, Vec3};
pub use sample::{random_rotation, sample_surface_points};
