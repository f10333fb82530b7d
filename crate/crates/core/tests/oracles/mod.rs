//! Independent reference implementations and the checks built on them.
//!
//! Each check returns a one-line detail on success and a reason on failure. The command-line
//! crate's acceptance harness includes this module as well.

#![allow(dead_code)]

pub mod augment;
pub mod generator;
pub mod gradient;
pub mod metrics;
pub mod upl;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}
pub(crate) use ensure;

/// Turn a library error into a check failure.
pub fn fail<E: std::fmt::Display>(context: &'static str) -> impl Fn(E) -> String {
    move |e| format!("{context}: {e}")
}
