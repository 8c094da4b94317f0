//! Certified membership decisions in amalgamated free products.
//!
//! This crate decides the generalized word problem in groups
//! `G = (A * B; H = K, φ)` where the amalgamated subgroups are normal in the
//! factors and satisfy the maximum condition. Factor groups come from four
//! effective classes (finite permutation groups, finitely generated abelian
//! groups, the Klein bottle group, free groups). Every negative answer is
//! returned together with a self-contained finite-quotient certificate that
//! an independent verifier can check without trusting the search.
//!
//! The crate is organized around the modules:
//!
//! - [`presentations`]: alphabets, freely reduced words, the input format
//! - [`permgrp`]: finite permutation groups and the permutational product
//! - [`stallings`]: subgroup graphs of free groups, folding, completions
//! - [`effgroups`]: the effective factor-group classes and their quotients
//! - [`finamalg`]: amalgams of finite groups and their free kernels
//! - [`amalgam`]: the main decision engine over general amalgams
//! - [`certificates`]: certificate serialization and the independent verifier
//! - [`cli`]: the command-line front end
//!
//! See the `examples/` directory for one runnable walkthrough per major
//! capability.

pub mod certificates;
pub mod cli;
pub mod effgroups;
pub mod amalgam;
pub mod finamalg;
pub mod permgrp;
pub mod presentations;
pub mod stallings;
