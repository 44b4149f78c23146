//! Dropout-robust secure aggregation for federated learning.
//!
//! Clients hide their model updates under the expansion of a short key by a
//! seed-homomorphic rounding PRG; a compact double-masking subprotocol
//! agrees on the sum of keys, and one subtraction demasks the aggregate.
//! The classic full-length double-masking protocol is included as the
//! baseline, along with an in-process network simulator, a benchmark
//! harness, and a synthetic federated training loop.
//!
//! The guide under `book/` walks through each layer; its code blocks are
//! compiled as doc-tests below so they stay honest.

pub mod bench;
pub mod flsim;
pub mod hma;
pub mod quantizer;
pub mod secagg;
pub mod shprg;
pub mod simnet;
pub mod wire;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rounding-prg.md")]
    mod rounding_prg {}
    #[doc = include_str!("../../../book/src/quantization.md")]
    mod quantization {}
    #[doc = include_str!("../../../book/src/double-masking.md")]
    mod double_masking {}
    #[doc = include_str!("../../../book/src/masked-aggregation.md")]
    mod masked_aggregation {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/benchmarking.md")]
    mod benchmarking {}
    #[doc = include_str!("../../../book/src/federated-training.md")]
    mod federated_training {}
}
