//! Topic-wise daily news sentiment panels joined with index OHLC data, lagged
//! design matrices, and the four linear model families used to measure which
//! news topics move a market index one day ahead.
//!
//! The stages are exposed as separate modules and glued together by
//! [`pipeline::run_pipeline`]:
//!
//! corpus → topics → sentiment → panel → models → report

pub mod corpus;
pub mod dates;
pub mod fixture;
pub mod models;
pub mod panel;
pub mod pipeline;
pub mod report;
pub mod sentiment;
pub mod topics;

pub use corpus::NewsItem;
pub use dates::DateRange;
