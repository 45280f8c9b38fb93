#![no_std]

extern crate alloc;

pub mod bumps;
pub mod corona;
pub mod error;
pub mod grid;
pub mod math;
pub mod orlicz;
pub mod search;
pub mod selfimprove;
pub mod sparse;

pub use error::{Error, Result};
