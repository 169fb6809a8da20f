//! Littlewood-Paley decomposition for densities of finite-rank operators on
//! the discrete torus, together with numerical checkers for the surrounding
//! inequalities (Khinchine, scalar and density Littlewood-Paley,
//! Gagliardo-Nirenberg-Sobolev, Lieb-Thirring and its dyadic proof chain).

pub mod corpus;
pub mod error;
mod fft;
pub mod grid;
pub mod lab;
pub mod operator;
pub mod partition;
pub mod projectors;
pub mod report;
pub mod sum;

pub use error::{LabError, Result};
pub use grid::{GridFunction, SpectrumFunction, TorusGrid};

pub use operator::{Contract, Density, FiniteRankOperator};
pub use partition::{BlockFamily, BumpProfile, DyadicBlockSet, GlueKind};
pub use projectors::SignVector;
