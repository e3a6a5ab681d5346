//! A simulated drone, a synthetic visual question answering model and a
//! scripted controller holding a command-driven conversation to describe a
//! scene and flag hazards in it.

pub mod controller;
pub mod engine;
pub mod fact;
pub mod geometry;
pub mod grammar;
pub mod harness;
pub mod motion;
pub mod perception;
pub mod protocol;
pub mod rng;
pub mod scene;
pub mod visibility;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/grammar.md")]
    mod grammar {}
    #[doc = include_str!("../../../book/src/episodes.md")]
    mod episodes {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
