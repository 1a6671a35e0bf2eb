//! Mining stateful service models from request/response traces, and emulating the recorded
//! service from those models.

pub mod analysis;
pub mod bundle;
pub mod emulation;
pub mod error;
pub mod eval;
pub mod format;
pub mod inference;
pub mod message;
pub mod model;
pub mod synth;
pub mod trace;

pub use analysis::{AnalysisConfig, EqualityRules, MessageAnalysis, PayloadEqualityMap};
pub use bundle::{mine, mine_text, MiningConfig, ModelBundle};
pub use emulation::{reset_session, Emulator, GeneratedResponse, Mode, Provenance, SessionState};
pub use error::{Error, Result};
pub use format::MessageFormat;
pub use inference::{Inference, ModelTrace, Partition};
pub use message::{Message, Syntax};
pub use model::{DependencyModel, ModelKind, INITIAL};
pub use trace::{
    Interaction, InteractionTrace, InteractionType, KeyPattern, KeyPayload, TraceOptions,
};
