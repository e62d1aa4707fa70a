//! Deterministic simulator and evaluation framework for web single sign-on.
//!
//! The crate models SSO schemes — federated identity protocols and credential
//! managers — as message-passing state machines over a simulated network of
//! principals, then grades each scheme against a fixed set of usability,
//! deployability, security, and privacy benefits using a symbolic attacker.
//!
//! Layered bottom-up:
//!
//! * [`terms`] — symbolic term algebra and the attacker derivation engine
//!   (decomposition closure, synthesis, offline guessing of weak secrets).
//! * [`world`] — principals, channels, trace recording, fault injection.
//! * [`schemes`] — one driver per scheme behind a common lifecycle interface
//!   (deploy, register SPs, set up devices, authenticate, switch IdP).
//! * [`evaluator`] — benefit scenarios, the taxonomy classifier, and the
//!   impersonation search.
//! * [`report`] — the expected verdict matrix, diffing, and rendering.
//! * [`cli`] — the `ssosim` command line.
//!
//! Runs are replayable: the same scenario and seed produce byte-identical
//! traces. See the crate examples for end-to-end usage.

pub mod cli;
pub mod evaluator;
pub mod report;
pub mod schemes;
pub mod terms;
pub mod world;
