//! Acceptance experiments live in `tests/acceptance.rs`.
