//! Simulated two-phase protocols, their Bell mappings and empirical behaviors.
//!
//! Phase A is a classical interaction that leaves the prover holding some state;
//! the verifier maps the transcript to a virtual input and output `(ξ, α)`.
//! Phase B is a single challenge `y` and response `b`. Every run is seeded and
//! sharded into fixed-size chunks, each with its own ChaCha stream, so the
//! output is identical under parallel and sequential execution.

pub mod compiled;
mod diagnostic;
pub mod optimize;
mod records;
mod run;
pub mod tcf;
mod witness;

pub use compiled::{
    optimize_tilted, run_compiled_chsh, ClassicalCompiled, CompiledClassicalProver,
    CompiledStrategy, LeakedAngles, MockQhe, PadKey, PlainAngles, TiltedStrategy,
};
pub use diagnostic::hidden_input_diagnostic;
pub use records::{
    read_jsonl, write_jsonl, PhaseFlag, ProverView, RecordHeader, Transcript, TranscriptRecord,
};
pub use run::{RunOptions, SimulationRun, Tally, MAX_SHOTS, SHARD_SIZE};
pub use tcf::{
    run_tcf_protocol, AlphaConvention, PhaseAMode, TcfClassicalProver, TcfConfig, TcfProver, ToyTcf,
};
pub use witness::{extract_amdl_witness, ClassicalProver, ClassicalRound, Extraction};
