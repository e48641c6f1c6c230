//! Parameter scans (under construction).
