//! Multi-level network embedding by boosted nonnegative low-rank
//! approximation.
//!
//! The pipeline turns an undirected graph into a nonnegative node
//! connectivity matrix `X` ([`connectivity`]), then fits `X` with a sequence
//! of rank-`d_s` nonnegative factorizations, each one applied to the clipped
//! residual the previous levels left behind ([`boost`], [`nmf`]). The node
//! embedding is the column concatenation of every level's left factor.
//! [`eval`] scores embeddings by multi-label node classification.
//!
//! ```
//! use boostne::{boost, connectivity, graph};
//!
//! let edges = "0 1\n1 2\n2 3\n3 0\n0 2\n4 5\n5 6\n6 7\n7 4\n4 6\n3 4\n";
//! let g = graph::load_edge_list(edges.as_bytes(), Default::default())?;
//! let x = connectivity::deepwalk_matrix(&g, 3, 1.0)?;
//!
//! let cfg = boost::BoostConfig::with_dimension(4, 2)?.seed(7);
//! let emb = boost::boostne(&x, &cfg)?;
//! assert_eq!(emb.embedding.dim(), (8, 4));
//!
//! let trace = boost::residual_trace(&emb);
//! assert!(trace.windows(2).all(|w| w[1].frobenius_norm <= w[0].frobenius_norm));
//! # Ok::<(), boostne::Error>(())
//! ```

pub mod boost;
pub mod cli;
pub mod connectivity;
mod error;
pub mod eval;
mod fingerprint;
pub mod graph;
pub mod io;
pub mod nmf;
pub mod sparse;

pub use error::{Error, Result};
pub use fingerprint::Fingerprint;
