pub mod admiss;
pub mod bayes;
pub mod density;
pub mod doc;
pub mod error;
pub mod evar;
pub mod experiments;
pub mod fixtures;
pub mod problem;
pub mod risk;
pub mod rng;
pub mod table;
pub mod testfam;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/evariables.md")]
    mod evariables {}
    #[doc = include_str!("../../../book/src/test-families.md")]
    mod test_families {}
    #[doc = include_str!("../../../book/src/risk.md")]
    mod risk {}
    #[doc = include_str!("../../../book/src/admissibility.md")]
    mod admissibility {}
    #[doc = include_str!("../../../book/src/bayes.md")]
    mod bayes {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
