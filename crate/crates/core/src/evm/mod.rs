//! The instrumented mini-EVM.

pub mod asm;
pub mod gas;
pub mod interp;
pub mod opcode;
pub mod trace;
pub mod world;

pub use gas::GasSchedule;
pub use interp::{deploy, deploy_at, execute_message, DeployOutcome, Message, VmError};
pub use trace::{
    CodePhase, EventAux, EventHook, ExecResult, ExecStatus, FrameInfo, NoopHook, PredOp,
    PredicateTag, StackSlot, Taint, TraceEvent,
};
pub use world::{Account, AccountKind, Address, World};
