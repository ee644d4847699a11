//! Cell value normalization shared by ingest, the facet index and queries.

use alloc::string::String;

/// Trims the value and collapses internal whitespace runs to one space.
pub fn normalize_value(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Case-folded matching key for a facet value.
///
/// Values keep their display case, but two values with the same key are the
/// same facet value.
pub fn value_key(raw: &str) -> String {
    normalize_value(raw).to_lowercase()
}
