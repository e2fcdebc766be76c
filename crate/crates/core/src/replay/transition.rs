use serde::{Deserialize, Serialize};

/// One experience tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub action: usize,
    pub reward: T,
    pub next_state: Vec<T>,
    pub terminal: bool,
}

impl<T> Transition<T> {
    pub fn new(state: Vec<T>, action: usize, reward: T, next_state: Vec<T>, terminal: bool) -> Self {
        Self {
            state,
            action,
            reward,
            next_state,
            terminal,
        }
    }
}
