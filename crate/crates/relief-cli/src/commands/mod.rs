pub mod convert;
pub mod eval;
pub mod pseudo_label;
pub mod refine;
pub mod stats;
pub mod viz;
