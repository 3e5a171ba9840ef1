pub mod error;
pub mod galois;
pub mod mfhs;
pub mod connect;
pub mod code;
pub mod exact6321;
pub mod sim;
pub mod cli;
