//! Plackett-Luce models for rankings with ties.

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;

pub mod error;
pub mod fit;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod linalg;
pub mod network;
pub mod rankings;
pub mod scalar;
pub mod simulate;
pub mod tree;

pub use error::{Error, Result, NOT_CONNECTED_MESSAGE};
pub use scalar::Scalar;

pub type Rankings = rankings::RankingsTable<f64>;
pub type Grouped = rankings::GroupedRankings<f64>;
pub type Fit = fit::ModelFit<f64>;
pub type Config = fit::FitConfig<f64>;
pub type Tree = tree::PLTree<f64>;
pub type Rankings32 = rankings::RankingsTable<f32>;
pub type Fit32 = fit::ModelFit<f32>;
