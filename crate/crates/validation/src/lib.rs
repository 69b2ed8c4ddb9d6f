//! End-to-end acceptance checks for `chifield` live in `tests/acceptance.rs`.
