//! Anti-sparse (spread) coding of real vectors and the binary-code
//! nearest-neighbor search schemes built on top of it.
//!
//! A spread representation recodes `y ∈ R^d` as `x ∈ R^m` (m ≥ d) by
//! minimizing `J_h(x) = ‖Ax − y‖²/2 + h‖x‖∞` along a path of decreasing
//! penalties. Most components of the minimizer stick to `±‖x‖∞`, so the sign
//! pattern is a natural binary code and `A·sign(x)` is an explicit
//! reconstruction of the input. The crate provides:
//!
//! - [`frames`]: projection matrices (random Gaussian, uniform frame via QR)
//!   and PCA preprocessing;
//! - [`solver`]: the exact ℓ∞ path-following solver with an optimality
//!   certificate and breakpoint diagnostics;
//! - [`embedding`]: binary codes and pre-binarized queries (anti-sparse and
//!   sign-of-projection LSH variants);
//! - [`index`]: an immutable packed-code index with symmetric Hamming,
//!   asymmetric lookup-table, and reconstruction re-ranking search;
//! - [`data`]: synthetic datasets, fvecs/bvecs ingestion, exact ground truth;
//! - [`eval`]: recall@R evaluation and the experiment grid runner.
//!
//! Batch entry points (`*_batch`, ground truth, query sweeps) run
//! data-parallel under the `parallel` feature (on by default) and fall back
//! to sequential loops without it; the `ASANN_THREADS` environment variable
//! caps the worker count. All randomness is drawn from ChaCha20 streams
//! keyed by explicit 64-bit seeds, so every artifact in the crate is
//! reproducible bit-for-bit from its seed.

pub mod data;
pub mod embedding;
pub mod eval;
pub mod exec;
pub mod frames;
pub mod index;
pub mod io;
pub mod solver;

pub use data::{gen_unit_sphere, ground_truth, GroundTruth, VectorDataset};
pub use embedding::{encode_antisparse, encode_lsh, prebinarize_query, BinaryCode, PreBinarizedQuery};
pub use frames::{make_random_gaussian, make_uniform_frame, pca_apply, pca_fit, MatrixKind, PcaModel, ProjectionMatrix};
pub use index::{build_index, build_luts, rerank_reconstruction, search_asymmetric, search_hamming, BinaryIndex, ScoredList, SearchMode};
pub use solver::{check_optimality, reconstruct, solve, solve_path, OptimalityReport, PathBreakpoint, SpreadRepresentation};
