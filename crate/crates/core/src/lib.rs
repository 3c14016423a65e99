//! Pipeline library that turns natural-language end-to-end scenarios into
//! Robot Framework scripts through three prompting levels, plus the
//! measurement code used to score the generated scripts.

pub mod model;
pub mod scenario;
pub mod selector;
pub mod fsutil;
pub mod gateway;
pub mod modularizer;
pub mod crawler;
pub mod extractor;
pub mod scriptgen;
pub mod metrics;
