//! Generalized geometry on a single coordinate chart: the big tangent
//! bundle, generalized metrics and their connections, Dirac structures and
//! 2-nilpotent structures, with pointwise numerical verification of the
//! identities relating them.

pub mod chartfield;
pub mod sampling;
pub mod bigtangent;
pub mod genmetric;
pub mod connections;
pub mod dirac;
pub mod nilpotent;
