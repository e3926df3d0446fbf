//! Head-to-head evaluation of language models through competitive games.

pub mod cli;
pub mod engine;
pub mod games;
pub mod players;
pub mod ratings;
pub mod report;
pub mod sandbox;
pub mod tournament;
pub mod trace;
