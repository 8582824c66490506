//! Steering sessions over HTTP and the batch commands behind `ctxmem`.

pub mod api;
pub mod cli;
pub mod config;
pub mod session;

pub use session::{replay, CreateRequest, Session, SessionError, StepRequest, StepResult};
