//! Verification, routing, reward scoring and augmentation for structured
//! document-parsing annotations: Markdown pages carrying HTML tables and
//! LaTeX formulas, optionally paired with coordinate-token bounding boxes.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the batch
//! driver and the command line live in the `docforge` crate.
//!
//! Layout of the crate:
//!
//! * [`corpus`] and [`config`]: records flowing through the engine.
//! * [`markup`]: the Markdown/HTML/LaTeX grammar, stripping and normalization.
//! * [`metrics`]: edit distances, TEDS, layout and formula similarity.
//! * [`rewards`] and [`gdpo`]: rule-based rewards and decoupled advantages.
//! * [`cascade`]: the L1 → L2 → L3 verification funnel, repair gates and DPCS.
//! * [`diagnostics`]: error taxonomy and corpus-level weakness profiles.
//! * [`augment`]: seeded perturbations and template synthesis.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod augment;
pub mod cascade;
pub mod config;
pub mod corpus;
pub mod diagnostics;
pub mod gdpo;
pub mod markup;
pub mod metrics;
pub mod rewards;

mod math;

pub use config::{ConfigError, EngineConfig};
pub use corpus::{
    parse_box_tokens, BoundingBox, BoxParse, BoxSpanError, BoxedText, CandidateAnnotation, Layer,
    ModalityConfidence, ReferenceAnnotation, SampleRecord, VerdictRecord, VerdictState,
};
pub use diagnostics::{ErrorCategory, ErrorTag, SubCode};
