//! Yoccoz puzzles for unicritical polynomials `z^d + c`.
//!
//! Angles and labels are exact rationals. Everything numerical is generic
//! over [`Real`] (`f32` or `f64`); the aliases below fix `f64`.

pub mod angle;
pub mod combinatorics;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod lab;
pub mod modulus;
pub mod nest;
pub mod puzzle;
pub mod scalar;

pub use angle::{enumerate_portraits, times_d, Angle, Arc, Portrait};
pub use combinatorics::{critical_value_labels, pullback_labels, same_combinatorics, Combinatorics, Label, SymbolicPuzzle};
pub use dynamics::{classify_alpha, classify_alpha_portrait, green, trace_ray, FixedPointInfo};
pub use error::{Error, Result};
pub use lab::{m_of_piece, nest_moduli_profile, verify_children_lemma, verify_lemma_y, VerificationRow};
pub use modulus::{modulus, modulus_with, GridKind, ModulusOptions};
pub use nest::{favorite_nest, modified_principal_nest, NestRecord, NestStop};
pub use puzzle::{PuzzleConfig, PuzzleLevel};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Parameter = dynamics::Parameter<f64>;
pub type RayTrace = dynamics::RayTrace<f64>;
pub type Puzzle = puzzle::Puzzle<f64>;
pub type PuzzlePiece = puzzle::PuzzlePiece<f64>;
pub type AnnulusSpec = modulus::AnnulusSpec<f64>;
pub type ModulusEstimate = modulus::ModulusEstimate<f64>;
pub type MEstimate = lab::MEstimate<f64>;
pub type MProfile = lab::MProfile<f64>;

pub type Parameter32 = dynamics::Parameter<f32>;
pub type Puzzle32 = puzzle::Puzzle<f32>;
pub type AnnulusSpec32 = modulus::AnnulusSpec<f32>;
