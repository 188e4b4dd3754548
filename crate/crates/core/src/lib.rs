pub mod blind;
pub mod deg;
pub mod games;
pub mod group;
pub mod hpkeet;
pub mod ops;
pub mod tm;
pub mod wire;
