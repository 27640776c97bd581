//! Double-well molecules under stochastic collisions whose outcome is a
//! weighted superposition of two perturbed histories.

pub mod analysis;
pub mod config;
pub mod histories;
pub mod molecule;
pub mod pair;
pub mod protocol;
pub mod runner;
pub mod smallmat;
