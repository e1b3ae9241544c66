//! Shared record of pipeline calls, used by test doubles.

use std::sync::{Arc, Mutex};

use crate::prompt::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Call {
    Execute,
    Complete(Option<Stage>),
}

#[derive(Debug, Clone, Default)]
pub struct CallLog(Arc<Mutex<Vec<Call>>>);

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, call: Call) {
        self.0.lock().unwrap().push(call);
    }

    pub fn calls(&self) -> Vec<Call> {
        self.0.lock().unwrap().clone()
    }

    pub fn clear(&self) {
        self.0.lock().unwrap().clear();
    }
}
