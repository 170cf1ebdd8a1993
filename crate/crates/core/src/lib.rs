//! Trace reconstruction over the binary deletion channel for smoothed
//! sources.
//!
//! A source string is picked by an adversary, then each bit is flipped with
//! probability `σ/2`. Traces drop each bit independently with probability
//! `δ`. The library estimates window counts from traces ([`small`],
//! [`large`]), grows the window multiset ([`branch`]), rebuilds the string
//! ([`assemble`]) and votes over repetitions ([`pipeline`]).
//!
//! The guide in `book/` walks through each stage; its snippets run as
//! doc-tests of this crate.
//!
//! ```
//! use tracerec::deck::build_deck;
//! use tracerec::assemble::{assemble_from_deck, Assembly};
//! use tracerec::word::BitString;
//!
//! let x: BitString = "0011010111".parse()?;
//! let deck = build_deck(&x, 5)?;
//! assert_eq!(assemble_from_deck(&deck, 10)?, Assembly::Success(x));
//! # Ok::<(), tracerec::Error>(())
//! ```

pub mod assemble;
pub mod branch;
pub mod channel;
pub mod deck;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod large;
pub mod lp;
pub mod oracle;
pub mod pipeline;
pub mod poly;
pub mod rng;
pub mod small;
pub mod sum;
pub mod word;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/polynomial.md")]
    mod polynomial {}
    #[doc = include_str!("../../../book/src/small.md")]
    mod small {}
    #[doc = include_str!("../../../book/src/large.md")]
    mod large {}
    #[doc = include_str!("../../../book/src/deck.md")]
    mod deck {}
    #[doc = include_str!("../../../book/src/assembly.md")]
    mod assembly {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
