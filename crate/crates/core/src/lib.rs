//! Benchmark toolkit for utterance-level multimodal sentiment and emotion
//! classification.
//!
//! The pipeline runs corpus → per-modality encoders → feature-level fusion
//! → classifier (RBF SVM or bidirectional contextual LSTM) → evaluation
//! protocol (speaker-inclusive, speaker-exclusive k-fold, fixed split,
//! cross-dataset) and renders accuracy grids over the seven modality
//! combinations.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```bash
//! cargo run --release -p mmsb --example quickstart
//! cargo run --release -p mmsb --example label_rules
//! cargo run --release -p mmsb --example manifest_roundtrip
//! cargo run --release -p mmsb --example gradient_check
//! cargo run --release -p mmsb --example text_cnn
//! cargo run --release -p mmsb --example svm_rbf
//! cargo run --release -p mmsb --example context_bclstm
//! cargo run --release -p mmsb --example speaker_exclusive
//! cargo run --release -p mmsb --example cross_dataset
//! cargo run --release -p mmsb --example modality_grid
//! cargo run --release -p mmsb --example tsne_projection
//! ```

pub mod autodiff;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod projection;
pub mod runner;
pub mod seed;

pub use error::{Error, Result};
