pub mod error;
pub mod fields;
pub mod minimize;
pub mod potential;
pub mod unfold;
pub mod limits;
pub mod setvalued;
pub mod recovery;
pub mod cli;
