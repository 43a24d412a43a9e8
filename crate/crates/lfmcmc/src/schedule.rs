//! Tolerance sequences for burn-in and targeting.
//!
//! A schedule emits a monotone non-increasing sequence of tolerances bounded
//! below by the target. The self-scaling rule snaps each accepted step's
//! tolerance onto the smallest value that still gives the proposal non-zero
//! weight, so burn-in needs no rate tuning.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum EpsilonSchedule {
    /// Constant at the target tolerance.
    Fixed { target: f64 },
    /// `max(epsilon0 - rate * t, target)`.
    Linear {
        target: f64,
        epsilon0: f64,
        rate: f64,
    },
    /// Snaps onto the proposed distance, floored at the target and never
    /// increasing; moves only on accepted steps.
    SelfScaling { target: f64 },
}

impl EpsilonSchedule {
    pub fn fixed(target: f64) -> Result<Self> {
        check_target(target)?;
        Ok(Self::Fixed { target })
    }

    pub fn linear(target: f64, epsilon0: f64, rate: f64) -> Result<Self> {
        check_target(target)?;
        if !(epsilon0.is_finite() && epsilon0 >= target) {
            return Err(Error::Config(format!(
                "linear schedule needs epsilon0 >= target, got epsilon0 = {epsilon0}, target = {target}"
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Config(format!(
                "linear schedule rate must be positive, got {rate}"
            )));
        }
        Ok(Self::Linear {
            target,
            epsilon0,
            rate,
        })
    }

    pub fn self_scaling(target: f64) -> Result<Self> {
        check_target(target)?;
        Ok(Self::SelfScaling { target })
    }

    pub fn target(&self) -> f64 {
        match self {
            Self::Fixed { target } | Self::Linear { target, .. } | Self::SelfScaling { target } => {
                *target
            }
        }
    }

    pub fn is_self_scaling(&self) -> bool {
        matches!(self, Self::SelfScaling { .. })
    }

    /// Tolerance for the chain's initial state, given the distance of the
    /// initial summaries to the observed ones. The self-scaling rule starts
    /// at that distance (floored at the target, so the sequence invariant
    /// holds); fixed and linear schedules start at their own epsilon_0.
    pub fn initial_epsilon(&self, rho0: f64) -> f64 {
        assert!(rho0 >= 0.0);
        match self {
            Self::Fixed { target } => *target,
            Self::Linear { epsilon0, .. } => *epsilon0,
            Self::SelfScaling { target } => target.max(rho0),
        }
    }

    /// Candidate tolerance entering step t's acceptance computation: the
    /// proposed state is weighted at the smallest tolerance that can accept
    /// it, and the current state's weight is re-evaluated at the same value.
    pub fn step_epsilon(&self, t: usize, eps_prev: f64, rho_proposed: f64) -> f64 {
        assert!(rho_proposed >= 0.0);
        match self {
            Self::Fixed { target } => *target,
            Self::Linear {
                target,
                epsilon0,
                rate,
            } => (epsilon0 - rate * t as f64).max(*target),
            Self::SelfScaling { target } => target.max(rho_proposed.min(eps_prev)),
        }
    }

    /// Tolerance recorded for step t once the accept decision is known.
    pub fn next_epsilon(&self, state: &ScheduleState) -> f64 {
        assert!(
            state.eps_prev >= self.target(),
            "eps_prev {} below target {} is a contract violation",
            state.eps_prev,
            self.target()
        );
        match self {
            Self::Fixed { .. } | Self::Linear { .. } => {
                self.step_epsilon(state.t, state.eps_prev, state.rho_proposed)
            }
            Self::SelfScaling { .. } => {
                if state.accepted {
                    self.step_epsilon(state.t, state.eps_prev, state.rho_proposed)
                } else {
                    state.eps_prev
                }
            }
        }
    }
}

fn check_target(target: f64) -> Result<()> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Config(format!(
            "target epsilon must be positive and finite, got {target}"
        )));
    }
    Ok(())
}

/// Per-step inputs to [`EpsilonSchedule::next_epsilon`].
#[derive(Clone, Copy, Debug)]
pub struct ScheduleState {
    pub t: usize,
    pub eps_prev: f64,
    /// Distance of the proposed summaries to the observed ones; ignored by
    /// fixed and linear schedules.
    pub rho_proposed: f64,
    pub accepted: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(t: usize, eps_prev: f64, rho: f64, accepted: bool) -> ScheduleState {
        ScheduleState {
            t,
            eps_prev,
            rho_proposed: rho,
            accepted,
        }
    }

    #[test]
    fn self_scaling_accepted_takes_rho() {
        let s = EpsilonSchedule::self_scaling(1.0).unwrap();
        assert_eq!(s.next_epsilon(&state(5, 5.0, 3.0, true)), 3.0);
    }

    #[test]
    fn self_scaling_floors_at_target() {
        let s = EpsilonSchedule::self_scaling(1.0).unwrap();
        assert_eq!(s.next_epsilon(&state(5, 5.0, 0.5, true)), 1.0);
    }

    #[test]
    fn self_scaling_rejected_keeps_previous() {
        let s = EpsilonSchedule::self_scaling(1.0).unwrap();
        assert_eq!(s.next_epsilon(&state(5, 5.0, 3.0, false)), 5.0);
    }

    #[test]
    fn self_scaling_never_increases() {
        let s = EpsilonSchedule::self_scaling(1.0).unwrap();
        assert_eq!(s.next_epsilon(&state(5, 2.0, 9.0, true)), 2.0);
    }

    #[test]
    fn linear_reaches_target() {
        let s = EpsilonSchedule::linear(3.0, 10.0, 0.01).unwrap();
        assert_eq!(s.next_epsilon(&state(1000, 3.0, 0.0, false)), 3.0);
        assert_eq!(s.next_epsilon(&state(100, 9.0, 0.0, true)), 9.0);
    }

    #[test]
    fn fixed_is_constant() {
        let s = EpsilonSchedule::fixed(2.5).unwrap();
        assert_eq!(s.next_epsilon(&state(0, 2.5, 7.0, true)), 2.5);
        assert_eq!(s.initial_epsilon(9.0), 2.5);
    }

    #[test]
    fn initial_epsilon_self_scaling() {
        let s = EpsilonSchedule::self_scaling(1.0).unwrap();
        assert_eq!(s.initial_epsilon(4.2), 4.2);
        assert_eq!(s.initial_epsilon(0.3), 1.0);
    }

    #[test]
    fn eps_prev_below_target_panics() {
        let s = EpsilonSchedule::self_scaling(2.0).unwrap();
        assert!(std::panic::catch_unwind(|| s.next_epsilon(&state(0, 1.0, 3.0, true))).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(EpsilonSchedule::fixed(0.0).is_err());
        assert!(EpsilonSchedule::linear(3.0, 2.0, 0.1).is_err());
        assert!(EpsilonSchedule::linear(3.0, 10.0, 0.0).is_err());
        assert!(EpsilonSchedule::self_scaling(f64::NAN).is_err());
    }
}
