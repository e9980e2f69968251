//! Reserved method names for lowered operators. The angle brackets keep
//! them out of the namespace user `extern` declarations can reach.

pub const OP_ASSIGNMENT: &str = "<op.assignment>";
pub const OP_BINARY: &str = "<op.binary>";
pub const OP_INDEX_ACCESS: &str = "<op.indexAccess>";
pub const OP_FIELD_ACCESS: &str = "<op.fieldAccess>";
pub const OP_ALLOC: &str = "<op.alloc>";

pub fn is_operator(full_name: &str) -> bool {
    full_name.starts_with("<op.")
}
