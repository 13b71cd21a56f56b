//! Coordinated duty-cycle scheduler.
//!
//! Every node runs the same pure function over its view, so identical views
//! give identical schedules without any negotiation. Planning windows sit on a
//! global grid anchored at `t = 0`. Inside a window each active Type-2 device
//! receives one minDCD run per maxDCP sub-window. Devices are placed one at a
//! time in `(request_time, device_id)` order, each at the candidate start that
//! keeps the local peak lowest, so the total load climbs in single-device
//! steps instead of stacking.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::comms::{StatusRecord, View};
use crate::model::{DeviceClass, DeviceId, SimTime};
use crate::scalar::Scalar;

/// Half-open `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Interval {
    pub start: SimTime,
    pub end: SimTime,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Self {
        assert!(start < end, "interval requires start < end ({start} >= {end})");
        Interval { start: SimTime(start), end: SimTime(end) }
    }

    pub fn len(&self) -> u64 {
        self.end.since(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }

    pub fn within(&self, outer: &Interval) -> bool {
        outer.start <= self.start && self.end <= outer.end
    }

    pub fn overlap(&self, other: &Interval) -> u64 {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.since(lo)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start.0, self.end.0)
    }
}

/// Piecewise-constant load. `values[i]` holds on `[breakpoints[i], breakpoints[i+1])`,
/// the last value holds to infinity and the load is zero before the first breakpoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LoadProfile<T> {
    breakpoints: Vec<SimTime>,
    values: Vec<T>,
}

impl<T: Scalar> LoadProfile<T> {
    pub fn new() -> Self {
        LoadProfile { breakpoints: Vec::new(), values: Vec::new() }
    }

    pub fn breakpoints(&self) -> &[SimTime] {
        &self.breakpoints
    }

    pub fn segments(&self) -> impl Iterator<Item = (SimTime, T)> + '_ {
        self.breakpoints.iter().copied().zip(self.values.iter().copied())
    }

    pub fn value_at(&self, t: SimTime) -> T {
        match self.breakpoints.partition_point(|&b| b <= t) {
            0 => T::zero(),
            i => self.values[i - 1],
        }
    }

    /// Index of the breakpoint at `t`, inserting one if needed.
    fn split_at(&mut self, t: SimTime) -> usize {
        let i = self.breakpoints.partition_point(|&b| b < t);
        if self.breakpoints.get(i) != Some(&t) {
            let v = if i == 0 { T::zero() } else { self.values[i - 1] };
            self.breakpoints.insert(i, t);
            self.values.insert(i, v);
        }
        i
    }

    pub fn add(&mut self, interval: Interval, kw: T) {
        let lo = self.split_at(interval.start);
        let hi = self.split_at(interval.end);
        for v in &mut self.values[lo..hi] {
            *v = *v + kw;
        }
    }

    /// Highest load anywhere in `interval`.
    pub fn max_over(&self, interval: Interval) -> T {
        let first = self.value_at(interval.start);
        let lo = self.breakpoints.partition_point(|&b| b <= interval.start);
        let hi = self.breakpoints.partition_point(|&b| b < interval.end);
        self.values[lo..hi].iter().fold(first, |m, &v| m.max(v))
    }

    pub fn peak(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("duration exceeds window ({duration_s} s > {window})")]
    DurationExceedsWindow { duration_s: u64, window: Interval },
}

/// Places a `duration_s` block of `power_kw` inside `window` at the start that
/// minimises the resulting peak over the block, earliest start on ties.
/// Candidates are `window.start` and every profile breakpoint that leaves room.
pub fn place_interval<T: Scalar>(
    profile: &mut LoadProfile<T>,
    duration_s: u64,
    window: Interval,
    power_kw: T,
) -> Result<Interval, ScheduleError> {
    if duration_s == 0 || duration_s > window.len() {
        return Err(ScheduleError::DurationExceedsWindow { duration_s, window });
    }
    let latest = window.end - duration_s;
    let candidates = std::iter::once(window.start)
        .chain(profile.breakpoints().iter().copied().filter(|&b| b > window.start && b <= latest));

    let mut best: Option<(T, SimTime)> = None;
    for start in candidates {
        let peak = profile.max_over(Interval { start, end: start + duration_s }) + power_kw;
        if best.is_none_or(|(p, _)| peak < p) {
            best = Some((peak, start));
        }
    }
    let (_, start) = best.expect("window.start is always a candidate");
    let chosen = Interval { start, end: start + duration_s };
    profile.add(chosen, power_kw);
    Ok(chosen)
}

/// Active Type-2 devices still in service at `now`, by `(request_time, id)`.
pub fn order_devices<T: Scalar>(view: &View<T>, now: SimTime) -> Vec<&StatusRecord<T>> {
    let mut active: Vec<&StatusRecord<T>> = view
        .records
        .values()
        .filter(|r| r.device_class == DeviceClass::Type2 && r.active && r.service_end_time > now)
        .collect();
    active.sort_by_key(|r| (r.request_time, r.device_id));
    active
}

/// Planning window length: the largest maxDCP among Type-2 devices in the view.
pub fn planning_period<T: Scalar>(view: &View<T>) -> u64 {
    view.records
        .values()
        .filter(|r| r.device_class == DeviceClass::Type2)
        .map(|r| r.max_dcp_s)
        .max()
        .unwrap_or(0)
}

/// ON intervals for one planning window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule<T> {
    pub period_start: SimTime,
    pub period_len_s: u64,
    /// Placements never start before this instant.
    pub planned_at: SimTime,
    pub assignments: BTreeMap<DeviceId, Vec<Interval>>,
    power_kw: BTreeMap<DeviceId, T>,
}

impl<T: Scalar> Schedule<T> {
    pub fn from_parts(
        period_start: SimTime,
        period_len_s: u64,
        planned_at: SimTime,
        assignments: BTreeMap<DeviceId, Vec<Interval>>,
        power_kw: BTreeMap<DeviceId, T>,
    ) -> Self {
        Schedule { period_start, period_len_s, planned_at, assignments, power_kw }
    }

    pub fn period_end(&self) -> SimTime {
        self.period_start + self.period_len_s
    }

    pub fn covers(&self, t: SimTime) -> bool {
        self.period_start <= t && t < self.period_end()
    }

    /// Structural equality ignoring when the plan was computed.
    pub fn same_plan(&self, other: &Self) -> bool {
        self.period_start == other.period_start
            && self.period_len_s == other.period_len_s
            && self.assignments == other.assignments
    }

    pub fn intervals(&self, id: DeviceId) -> &[Interval] {
        self.assignments.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn interval_at(&self, id: DeviceId, t: SimTime) -> Option<Interval> {
        self.intervals(id).iter().copied().find(|iv| iv.contains(t))
    }

    /// Intervals that have begun by `now`, i.e. must survive a re-plan.
    pub fn started_by(&self, now: SimTime) -> Vec<(DeviceId, Interval)> {
        self.assignments
            .iter()
            .flat_map(|(&id, ivs)| ivs.iter().filter(|iv| iv.start <= now).map(move |&iv| (id, iv)))
            .collect()
    }

    pub fn load_profile(&self) -> LoadProfile<T> {
        let mut profile = LoadProfile::new();
        for (id, ivs) in &self.assignments {
            let kw = self.power_kw.get(id).copied().unwrap_or_else(T::zero);
            for &iv in ivs {
                profile.add(iv, kw);
            }
        }
        profile
    }

    pub fn peak_kw(&self) -> T {
        self.load_profile().peak()
    }

    pub const CSV_HEADER: &'static str = "period_start,device_id,start_s,end_s";

    pub fn csv_rows(&self) -> Vec<String> {
        self.assignments
            .iter()
            .flat_map(|(id, ivs)| {
                ivs.iter()
                    .map(move |iv| format!("{},{},{},{}", self.period_start.0, id, iv.start.0, iv.end.0))
            })
            .collect()
    }
}

/// Where a run for `rec` may go inside `sub`: it cannot start before `now`
/// and must start while the request is still in force. `None` if no minDCD run
/// fits.
fn placement_window<T: Scalar>(rec: &StatusRecord<T>, sub: &Interval, now: SimTime) -> Option<Interval> {
    let from = sub.start.max(now);
    let latest_by_window = sub.end.0.checked_sub(rec.min_dcd_s)?;
    let latest_by_service = rec.service_end_time.0.checked_sub(1)?;
    let last_start = SimTime(latest_by_window.min(latest_by_service));
    (from <= last_start).then(|| Interval { start: from, end: last_start + rec.min_dcd_s })
}

/// Schedules one full planning window starting at `period_start`.
pub fn build_schedule<T: Scalar>(
    view: &View<T>,
    period_start: SimTime,
    committed: &[(DeviceId, Interval)],
) -> Schedule<T> {
    let len = planning_period(view);
    build_schedule_from(view, period_start, len, period_start, committed)
}

/// Re-plans the window `[period_start, period_start + period_len_s)` at `now`.
///
/// `committed` intervals are kept as-is and seed the load profile. Each active
/// device then gets one minDCD placement, starting no earlier than `now`, in
/// every sub-window of its maxDCP that is not already satisfied by a committed
/// interval and still has room for a run starting before its service ends.
/// Sub-windows without room are left for the next planning window.
pub fn build_schedule_from<T: Scalar>(
    view: &View<T>,
    period_start: SimTime,
    period_len_s: u64,
    now: SimTime,
    committed: &[(DeviceId, Interval)],
) -> Schedule<T> {
    let window_end = period_start + period_len_s;
    let mut profile = LoadProfile::new();
    let mut assignments: BTreeMap<DeviceId, Vec<Interval>> = BTreeMap::new();
    let mut power_kw = BTreeMap::new();

    for &(id, iv) in committed {
        let kw = view.get(id).map_or_else(T::zero, |r| r.power_kw);
        profile.add(iv, kw);
        power_kw.insert(id, kw);
        assignments.entry(id).or_default().push(iv);
    }

    for rec in order_devices(view, now) {
        let (dcd, dcp) = (rec.min_dcd_s, rec.max_dcp_s);
        power_kw.insert(rec.device_id, rec.power_kw);
        let mut sub_start = period_start;
        while dcp > 0 && sub_start + dcp <= window_end {
            let sub = Interval { start: sub_start, end: sub_start + dcp };
            sub_start = sub.end;

            let satisfied =
                committed.iter().any(|&(id, iv)| id == rec.device_id && iv.within(&sub) && iv.len() >= dcd);
            if satisfied {
                continue;
            }
            let Some(room) = placement_window(rec, &sub, now) else {
                continue;
            };
            let placed = place_interval(&mut profile, dcd, room, rec.power_kw)
                .expect("placement_window always leaves room for minDCD");
            assignments.entry(rec.device_id).or_default().push(placed);
        }
    }

    for ivs in assignments.values_mut() {
        ivs.sort();
    }
    Schedule { period_start, period_len_s, planned_at: now, assignments, power_kw }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScheduleViolation {
    #[error("missing device {0}")]
    MissingDevice(DeviceId),
    #[error("interval below minDCD for device {device} ({interval})")]
    BelowMinDcd { device: DeviceId, interval: Interval },
    #[error("interval outside planning window for device {device} ({interval})")]
    OutsideWindow { device: DeviceId, interval: Interval },
    #[error("overlapping or unsorted intervals for device {0}")]
    Overlapping(DeviceId),
    #[error("no minDCD run for device {device} in window starting at {window_start}")]
    WindowUnsatisfied { device: DeviceId, window_start: SimTime },
}

/// Verifies the structural invariants of `schedule` and that every active
/// device in `view` gets a minDCD run in each maxDCP sub-window that had room
/// when the schedule was planned.
pub fn check_schedule<T: Scalar>(
    schedule: &Schedule<T>,
    view: &View<T>,
) -> Result<(), Vec<ScheduleViolation>> {
    let mut violations = Vec::new();
    let window = Interval { start: schedule.period_start, end: schedule.period_end() };

    for (&device, ivs) in &schedule.assignments {
        if ivs.windows(2).any(|w| w[0].end > w[1].start) {
            violations.push(ScheduleViolation::Overlapping(device));
        }
        let min_dcd = view.get(device).map_or(0, |r| r.min_dcd_s);
        for &interval in ivs {
            if interval.is_empty() || !interval.within(&window) {
                violations.push(ScheduleViolation::OutsideWindow { device, interval });
            }
            if interval.len() < min_dcd {
                violations.push(ScheduleViolation::BelowMinDcd { device, interval });
            }
        }
    }

    for rec in order_devices(view, schedule.planned_at) {
        let (dcd, dcp) = (rec.min_dcd_s, rec.max_dcp_s);
        let required: Vec<Interval> = (0..)
            .map(|k| window.start + k * dcp)
            .take_while(|&s| dcp > 0 && s + dcp <= window.end)
            .map(|s| Interval { start: s, end: s + dcp })
            .filter(|sub| placement_window(rec, sub, schedule.planned_at).is_some())
            .collect();
        if required.is_empty() {
            continue;
        }
        let ivs = schedule.intervals(rec.device_id);
        if ivs.is_empty() {
            violations.push(ScheduleViolation::MissingDevice(rec.device_id));
            continue;
        }
        let runs = contiguous_runs(ivs);
        for sub in required {
            if !runs.iter().any(|run| run.overlap(&sub) >= dcd) {
                violations.push(ScheduleViolation::WindowUnsatisfied {
                    device: rec.device_id,
                    window_start: sub.start,
                });
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn contiguous_runs(sorted: &[Interval]) -> Vec<Interval> {
    let mut runs: Vec<Interval> = Vec::new();
    for &iv in sorted {
        match runs.last_mut() {
            Some(last) if last.end >= iv.start => last.end = last.end.max(iv.end),
            _ => runs.push(iv),
        }
    }
    runs
}
