pub mod double_double;
pub mod fidelity;
pub mod gradient;
