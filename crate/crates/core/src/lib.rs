pub mod analysis;
pub mod cli;
pub mod collocation;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod multiscale;
pub mod polykernel;
pub mod stokes_kernel;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    mod kernel {}
    #[doc = include_str!("../../../book/src/collocation.md")]
    mod collocation {}
    #[doc = include_str!("../../../book/src/multiscale.md")]
    mod multiscale {}
    #[doc = include_str!("../../../book/src/errors.md")]
    mod errors {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
