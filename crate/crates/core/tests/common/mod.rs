pub mod stub;
pub mod random;
