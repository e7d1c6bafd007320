//! Serialization, end-to-end pipelines, the i.i.d. experiment harness and
//! report rendering.

pub mod experiment;
pub mod io;
pub mod pipeline;
pub mod report;
