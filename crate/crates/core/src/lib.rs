#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod criteria;
pub mod error;
pub mod oracle;
pub mod prepfn;
pub mod qcore;
pub mod search;
pub mod spinops;
