// Book chapters, compiled as doctests so their snippets stay runnable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}
#[doc = include_str!("../../../book/src/svm.md")]
pub mod svm {}
#[doc = include_str!("../../../book/src/qga.md")]
pub mod qga {}
#[doc = include_str!("../../../book/src/tuning.md")]
pub mod tuning {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
