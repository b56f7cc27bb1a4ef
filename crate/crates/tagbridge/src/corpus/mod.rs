//! Corpus ingestion (two-column TSV and CoNLL-U), vocabularies,
//! cross-dataset duplicate detection, and synthetic corpora with exact
//! oracles.

pub mod oracle;
pub mod overlap;
pub mod parse;
pub mod synth;
pub mod types;

pub use overlap::{detect_overlap, OverlapReport};
pub use parse::{load_corpus, parse_conllu, parse_pairs, parse_two_col, CorpusFormat};
pub use synth::{gen_synthetic, SynthConfig, SynthCorpus};
pub use types::{build_vocab, ParallelPair, Sentence, Side, TagId, Tagset, Vocab, PAD_ID, UNK_ID};
