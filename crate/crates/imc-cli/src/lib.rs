//! Document parsing and rendering support behind the `imc` binary.

pub mod document;
pub mod svg;
