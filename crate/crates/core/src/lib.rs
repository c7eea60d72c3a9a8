pub mod bits;
pub mod cim;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod cost;
pub mod counter;
pub mod device;
pub mod engine;
pub mod hdc;
pub mod selftest;
pub mod trace;
