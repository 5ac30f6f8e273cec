//! Phase-transition log. Every transition is sent to subscribers and, when
//! configured, written as one JSON line.

use std::io::Write;
use std::sync::mpsc::{channel, Receiver, Sender};

use serde::{Deserialize, Serialize};
use slingkube_core::api::mgmt::Phase;
use slingkube_core::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectKind {
    Job,
    VniClaim,
    /// `Running` when created, `Deleted` when removed.
    VniCrd,
    Pod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: ObjectKind,
    pub namespace: String,
    pub name: String,
    pub uid: String,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Default)]
pub(crate) struct EventSink {
    subscribers: Vec<Sender<Event>>,
    log: Option<Box<dyn Write + Send>>,
    pub(crate) count: u64,
}

impl EventSink {
    pub(crate) fn subscribe(&mut self) -> Receiver<Event> {
        let (tx, rx) = channel();
        self.subscribers.push(tx);
        rx
    }

    pub(crate) fn set_log(&mut self, w: Box<dyn Write + Send>) {
        self.log = Some(w);
    }

    pub(crate) fn emit(&mut self, e: Event) {
        self.count += 1;
        if let Some(w) = self.log.as_mut() {
            let line = serde_json::to_string(&e).expect("event serializes");
            let _ = writeln!(w, "{line}");
        }
        self.subscribers.retain(|s| s.send(e.clone()).is_ok());
    }

    pub(crate) fn flush(&mut self) {
        if let Some(w) = self.log.as_mut() {
            let _ = w.flush();
        }
    }
}
