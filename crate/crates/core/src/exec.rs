//! Execution plane: per-appliance state machines.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ArrivalEvent, DeviceClass, DeviceSpec, SimTime};
use crate::scalar::Scalar;
use crate::scheduler::Schedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Mode {
    /// Follow the shared schedule.
    Coordinated,
    /// Free-running duty cycle anchored at the activation time.
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("no schedule coverage at {t} (window [{start}, {end}))")]
    NoScheduleCoverage { t: SimTime, start: SimTime, end: SimTime },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviceRuntime<T> {
    pub spec: DeviceSpec<T>,
    pub active: bool,
    pub request_time: SimTime,
    pub service_end_time: SimTime,
    /// Start of the in-progress ON run.
    pub on_since: Option<SimTime>,
    pub mode: Mode,
}

impl<T: Scalar> DeviceRuntime<T> {
    pub fn new(spec: DeviceSpec<T>, mode: Mode) -> Self {
        DeviceRuntime {
            spec,
            active: false,
            request_time: SimTime::ZERO,
            service_end_time: SimTime::ZERO,
            on_since: None,
            mode,
        }
    }

    /// Whether a user request covers `t`.
    pub fn requested_at(&self, t: SimTime) -> bool {
        self.active && self.request_time <= t && t < self.service_end_time
    }

    pub fn is_on(&self) -> bool {
        self.on_since.is_some()
    }

    /// Registers a user request. A request for an already active device
    /// extends its service end and keeps the original request time.
    pub fn apply_activation(&mut self, event: &ArrivalEvent) {
        debug_assert_eq!(event.device_id, self.spec.device_id);
        let new_end = event.at + event.service_duration_s;
        if self.active && self.service_end_time > event.at {
            self.service_end_time = self.service_end_time.max(new_end);
        } else {
            self.active = true;
            self.request_time = event.at;
            self.service_end_time = new_end;
        }
    }

    fn draw(&self, on: bool) -> T {
        if on {
            self.spec.power_kw
        } else {
            T::zero()
        }
    }

    fn protected_at(&self, t: SimTime) -> bool {
        self.on_since.is_some_and(|s| t < s + self.spec.min_dcd_s)
    }

    /// Type-1 appliances are simply ON while requested.
    fn type1_step(&mut self, t: SimTime) -> T {
        let on = self.requested_at(t);
        if on {
            self.on_since.get_or_insert(t);
        } else {
            self.on_since = None;
            if self.active && t >= self.service_end_time {
                self.active = false;
            }
        }
        self.draw(on)
    }

    /// ON iff `t` falls in one of this device's scheduled intervals, or the
    /// current run has not yet lasted minDCD.
    pub fn coordinated_step(&mut self, schedule: &Schedule<T>, t: SimTime) -> Result<T, ExecError> {
        if self.spec.device_class == DeviceClass::Type1 {
            return Ok(self.type1_step(t));
        }
        if !schedule.covers(t) {
            return Err(ExecError::NoScheduleCoverage {
                t,
                start: schedule.period_start,
                end: schedule.period_end(),
            });
        }
        let interval = schedule.interval_at(self.spec.device_id, t);
        let on = interval.is_some() || self.protected_at(t);
        if on {
            if self.on_since.is_none() {
                // The interval may have begun between two samples.
                let start = interval.map_or(t, |iv| iv.start.min(t));
                self.on_since = Some(start);
            }
        } else {
            self.on_since = None;
            if self.active && t >= self.service_end_time {
                self.active = false;
            }
        }
        Ok(self.draw(on))
    }

    /// ON for minDCD starting at the request time, OFF for the rest of each
    /// maxDCP period. A run in progress when service ends is completed.
    pub fn baseline_step(&mut self, t: SimTime) -> T {
        if self.spec.device_class == DeviceClass::Type1 {
            return self.type1_step(t);
        }
        let (dcd, dcp) = (self.spec.min_dcd_s, self.spec.max_dcp_s);
        if !self.active || t < self.request_time {
            self.on_since = None;
            return self.draw(false);
        }
        let cycle_start = |at: SimTime| {
            let phase = at.since(self.request_time) % dcp;
            (at - phase, phase < dcd)
        };
        let on = if t < self.service_end_time {
            let (start, on) = cycle_start(t);
            self.on_since = on.then_some(start);
            on
        } else {
            // Run in progress at the last requested second, if any.
            let (start, was_on) = cycle_start(self.service_end_time - 1);
            if was_on && t < start + dcd {
                self.on_since = Some(start);
                true
            } else {
                self.active = false;
                self.on_since = None;
                false
            }
        };
        self.draw(on)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DeviceId;
    use crate::scheduler::Interval;
    use std::collections::BTreeMap;

    fn rt(mode: Mode) -> DeviceRuntime<f64> {
        DeviceRuntime::new(DeviceSpec::type2(9, 1.0, 900, 1800), mode)
    }

    fn arrival(at: u64, dur: u64) -> ArrivalEvent {
        ArrivalEvent { at: SimTime(at), device_id: DeviceId(9), service_duration_s: dur }
    }

    fn schedule_with(intervals: &[(u64, u64)]) -> Schedule<f64> {
        let mut assignments = BTreeMap::new();
        assignments.insert(DeviceId(9), intervals.iter().map(|&(s, e)| Interval::new(s, e)).collect());
        Schedule::from_parts(SimTime(0), 1800, SimTime(0), assignments, BTreeMap::new())
    }

    #[test]
    fn activation_examples() {
        let mut d = rt(Mode::Baseline);
        d.apply_activation(&arrival(100, 3600));
        assert!(d.active);
        assert_eq!(d.service_end_time, SimTime(3700));
        d.apply_activation(&arrival(2000, 3600));
        assert_eq!(d.service_end_time, SimTime(5600));
        assert_eq!(d.request_time, SimTime(100));
        d.apply_activation(&arrival(3000, 600));
        assert_eq!(d.service_end_time, SimTime(5600));
    }

    #[test]
    fn expired_service_starts_a_new_session() {
        let mut d = rt(Mode::Baseline);
        d.apply_activation(&arrival(0, 1800));
        d.apply_activation(&arrival(1800, 1800));
        assert_eq!(d.request_time, SimTime(1800));
        assert_eq!(d.service_end_time, SimTime(3600));
    }

    #[test]
    fn coordinated_follows_intervals() {
        let sched = schedule_with(&[(0, 900)]);
        let mut d = rt(Mode::Coordinated);
        d.apply_activation(&arrival(0, 3600));
        assert_eq!(d.coordinated_step(&sched, SimTime(500)), Ok(1.0));
        let mut d = rt(Mode::Coordinated);
        d.apply_activation(&arrival(0, 3600));
        assert_eq!(d.coordinated_step(&sched, SimTime(1200)), Ok(0.0));
    }

    #[test]
    fn coordinated_outside_window_is_an_error() {
        let sched = schedule_with(&[(0, 900)]);
        let mut d = rt(Mode::Coordinated);
        assert!(matches!(
            d.coordinated_step(&sched, SimTime(1800)),
            Err(ExecError::NoScheduleCoverage { .. })
        ));
    }

    #[test]
    fn dropped_interval_still_runs_min_dcd() {
        // Interval [800, 1700) starts, then a re-plan at 900 removes it.
        let first = schedule_with(&[(800, 1700)]);
        let second = schedule_with(&[]);
        let mut d = rt(Mode::Coordinated);
        d.apply_activation(&arrival(0, 7200));
        let mut on_secs = 0;
        for t in 700..1800 {
            let sched = if t < 900 { &first } else { &second };
            if d.coordinated_step(sched, SimTime(t)).unwrap() > 0.0 {
                on_secs += 1;
            }
        }
        assert_eq!(on_secs, 900);
        assert!(!d.is_on());
    }

    #[test]
    fn baseline_examples() {
        let mut d = rt(Mode::Baseline);
        d.apply_activation(&arrival(100, 7200));
        assert_eq!(d.baseline_step(SimTime(500)), 1.0);
        assert_eq!(d.baseline_step(SimTime(1200)), 0.0);
        assert_eq!(d.baseline_step(SimTime(2000)), 1.0);
        assert_eq!(d.on_since, Some(SimTime(1900)));
    }

    #[test]
    fn baseline_off_before_request() {
        let mut d = rt(Mode::Baseline);
        d.apply_activation(&arrival(100, 7200));
        assert_eq!(d.baseline_step(SimTime(60)), 0.0);
    }

    #[test]
    fn baseline_completes_run_at_service_end() {
        let mut d = rt(Mode::Baseline);
        d.apply_activation(&arrival(0, 2000));
        // Second run starts at 1800, service ends at 2000, run lasts to 2700.
        assert_eq!(d.baseline_step(SimTime(2600)), 1.0);
        assert_eq!(d.baseline_step(SimTime(2700)), 0.0);
        assert!(!d.active);
    }

    #[test]
    fn baseline_duty_fraction_is_exact() {
        let mut d = rt(Mode::Baseline);
        d.apply_activation(&arrival(37, 100_000));
        let on: f64 = (37..37 + 5 * 1800).map(|t| d.baseline_step(SimTime(t))).sum();
        assert_eq!(on, 0.5 * 5.0 * 1800.0);
    }

    #[test]
    fn type1_ignores_duty_cycle() {
        let mut d = DeviceRuntime::new(DeviceSpec::<f64>::type1(2, 0.3), Mode::Baseline);
        d.apply_activation(&ArrivalEvent {
            at: SimTime(10),
            device_id: DeviceId(2),
            service_duration_s: 100,
        });
        assert_eq!(d.baseline_step(SimTime(5)), 0.0);
        assert_eq!(d.baseline_step(SimTime(10)), 0.3);
        assert_eq!(d.baseline_step(SimTime(1000)), 0.3 * 0.0);
        assert!(!d.active);
    }
}
