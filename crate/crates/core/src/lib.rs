// Index loops mirror the matrix notation, and negated comparisons treat NaN as failure.
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity,
    clippy::single_range_in_vec_init,
    clippy::ptr_arg
)]

pub mod cli;
pub mod code;
pub mod error;
pub mod exponent;
pub(crate) mod lp;
pub mod mac;
pub mod oracle;
pub mod prob;
pub mod region;
pub mod report;
pub mod search;
pub(crate) mod sphere;
pub mod surface;
pub(crate) mod tilt;
