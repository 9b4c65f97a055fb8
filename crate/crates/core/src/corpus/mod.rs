//! Synthetic text-line corpus: glyph atlas, rendering, and the on-disk
//! manifest format every other module consumes.
//!
//! A corpus is a directory:
//!
//! ```text
//! <corpus_dir>/
//!   manifest.jsonl   header record first, then one JSON record per sample
//!   img/<id>.pgm     one binary PGM (P5) per sample
//!   provenance.json  command, config hash, seed
//! ```
//!
//! All randomness flows through named streams keyed by the generator seed,
//! so regenerating any single sample by index reproduces its stored image
//! exactly, and the whole corpus is byte-stable across runs and machines.

mod atlas;
mod generate;
mod image;
mod manifest;
mod render;
mod style;
mod vocab;

pub use atlas::GlyphAtlas;
pub use generate::{generate_corpus, render_for_index, GenerateSpec, SampleDraw};
pub use image::{read_pgm, write_pgm, Image};
pub use manifest::{
    open_manifest, read_manifest, write_manifest, CorpusManifest, ManifestHeader, ManifestReader,
    SampleRecord, Split,
};
pub use render::render_line;
pub use style::StyleSpec;
pub use vocab::Vocabulary;

/// Maximum label length a corpus may carry.
pub const L_MAX: usize = 8;

/// Default glyph cell height in pixels.
pub const CELL_HEIGHT: usize = 16;

/// Default glyph cell width in pixels.
pub const CELL_WIDTH: usize = 8;
