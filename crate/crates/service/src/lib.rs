//! Route evaluation service: truth reuse, automatic candidate evaluation,
//! crowd tasks with early stop, rewards, persistence and an HTTP API.

pub mod api;
pub mod clock;
pub mod config;
pub mod engine;
pub mod error;
pub mod evaluate;
pub mod events;
pub mod request;
pub mod store;
pub mod task;
pub mod truth;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::ServiceConfig;
pub use engine::Engine;
pub use error::ServiceError;
pub use request::{Method, RequestRecord, RequestStatus, RouteRequest};
pub use task::{Task, TaskState};
