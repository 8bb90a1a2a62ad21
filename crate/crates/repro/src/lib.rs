//! Holds the `acceptance` test target only; run it with
//! `cargo test -p shortcut-repro --test acceptance`.
//!
//! Kept out of `shortcut-core` so the library's own tests run first and a
//! failed criterion does not hide them.
