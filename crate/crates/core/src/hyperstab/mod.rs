//! Hyperstability of the radical equation: sequences, contraction
//! constants, the closed-form iteration and the end-to-end experiment.

pub mod expansion;
pub mod experiment;
pub mod model;
pub mod sequences;

pub use expansion::{exact_sextic_table_sum, expand_t_power, ExpansionEntry, ExpansionTable};
pub use experiment::*;
pub use model::*;
pub use sequences::{cube_identity_defects, cube_sequences, sequences, sequences_n, sextic_defect, Sequences};
