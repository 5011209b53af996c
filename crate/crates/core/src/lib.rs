//! Higher-order local mobility and singularity analysis of lower-pair multi-loop linkages.

pub mod analysis;
pub mod cli;
pub mod differentials;
pub mod linkage;
pub mod poly;
pub mod screw;
pub mod solver;
