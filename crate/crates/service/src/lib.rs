//! HTTP session service: serves the graph, features and proofreading hints
//! of one editing session and applies revision-checked edits.

pub mod api;
pub mod session;

pub use api::{router, serve, serve_on, EditRequest, SelectionRequest, UndoRequest, REVISION_HEADER};
pub use session::{Event, EventBody, Receipt, Session, SessionConfig, SessionError, Snapshot, TABLE_NAME};
