use serde::{Deserialize, Serialize};

use crate::env::MetaAction;
use crate::scalar::{compensated_sum, Scalar};

/// Operation-time model: per-action physical durations and per-token
/// inference latency, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeModel<T = f64> {
    pub move_ahead_s: T,
    pub rotate_s: T,
    pub obs_s: T,
    pub stop_s: T,
    pub tau_s_per_token: T,
}

impl<T: Scalar> TimeModel<T> {
    /// Measured robot durations: MoveAhead 1.0 s, rotation 0.6 s, panoramic
    /// observation 4.0 s, stop 0.1 s; τ = 0.015 s per token.
    pub fn standard() -> Self {
        Self {
            move_ahead_s: T::ratio(1, 1),
            rotate_s: T::ratio(6, 10),
            obs_s: T::ratio(4, 1),
            stop_s: T::ratio(1, 10),
            tau_s_per_token: T::ratio(15, 1000),
        }
    }

    pub fn with_tau(self, tau_s_per_token: T) -> Self {
        Self { tau_s_per_token, ..self }
    }

    pub fn is_valid(&self) -> bool {
        [self.move_ahead_s, self.rotate_s, self.obs_s, self.stop_s, self.tau_s_per_token]
            .iter()
            .all(|v| *v > T::zero())
    }

    /// Physical duration of one action. `End` is priced as a stop.
    pub fn action_cost(&self, action: MetaAction) -> T {
        match action {
            MetaAction::MoveAhead => self.move_ahead_s,
            MetaAction::RotateLeft | MetaAction::RotateRight => self.rotate_s,
            MetaAction::Obs => self.obs_s,
            MetaAction::End => self.stop_s,
        }
    }

    /// Summed physical execution time of an action sequence.
    pub fn physical_time<I: IntoIterator<Item = MetaAction>>(&self, actions: I) -> T {
        compensated_sum(actions.into_iter().map(|a| self.action_cost(a)))
    }

    /// `τ × (N_cot + N_action)`.
    pub fn inference_time(&self, reasoning_tokens: u64, action_tokens: u64) -> T {
        self.tau_s_per_token * T::from_count(reasoning_tokens + action_tokens)
    }
}

impl<T: Scalar> Default for TimeModel<T> {
    fn default() -> Self {
        Self::standard()
    }
}
