#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error_profile;
pub mod integrate;
pub mod kernels;
pub mod optimal;
pub mod quadrature;
pub mod report;
pub mod simplex;
pub mod verify;
