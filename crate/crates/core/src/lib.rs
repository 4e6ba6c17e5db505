//! Semantics-aware cage-based deformation of annotated triangle meshes.
//!
//! A template mesh carries annotations (points, polylines, regions) with
//! measures, and a relationship graph whose constraint arcs drive a
//! local-global solver over the vertices of an enclosing cage. The template
//! follows the cage through mean value or Green coordinates.
//!
//! Every numeric type is generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotation;
pub mod cage;
pub mod fitting;
pub mod geom;
pub mod mesh;
pub mod scalar;
pub mod semgraph;
pub mod solver;

pub use scalar::Real;

pub type Mesh = mesh::TriangleMesh<f64>;
pub type Annotation = annotation::Annotation<f64>;
pub type Graph = semgraph::RelationshipGraph<f64>;
pub type Coordinates = cage::CoordinateMatrix<f64>;
pub type Session = solver::SolverSession<f64>;
pub type Similarity = fitting::SimilarityTransform<f64>;
