//! Post-processing for text rendered by image generators: find misrendered
//! words, erase the ones nobody asked for, place the ones that went missing,
//! and repair misspellings with an OCR-verified edit loop.

pub mod backends;
pub mod evalharness;
pub mod imaging;
pub mod layoutgen;
pub mod pipeline;
pub mod prompt;
pub mod wordmatch;
