//! Acceptance criteria for `freqmux`, run by `cargo test -p validation --test acceptance`.
