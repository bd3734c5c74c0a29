//! Credit scorecard toolkit: binning, weight of evidence, logistic
//! regression, points scaling, validation and reject inference.

mod error;

pub mod binning;
pub mod data;
pub mod logit;
pub mod performance;
pub mod pipeline;
pub mod preselect;
pub mod project;
pub mod reject;
pub mod scorecard;
pub mod woe;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/binning.md")]
    mod binning {}
    #[doc = include_str!("../../../book/src/woe.md")]
    mod woe {}
    #[doc = include_str!("../../../book/src/preselection.md")]
    mod preselection {}
    #[doc = include_str!("../../../book/src/logit.md")]
    mod logit {}
    #[doc = include_str!("../../../book/src/scorecard.md")]
    mod scorecard {}
    #[doc = include_str!("../../../book/src/performance.md")]
    mod performance {}
    #[doc = include_str!("../../../book/src/reject.md")]
    mod reject {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/studio.md")]
    mod studio {}
}
