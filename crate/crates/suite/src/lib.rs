//! Holds the workspace acceptance suite (`tests/acceptance.rs`); the library
//! itself is empty.
