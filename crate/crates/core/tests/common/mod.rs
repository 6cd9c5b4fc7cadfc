#![allow(dead_code)]

pub mod mutations;
pub mod oracles;
