//! Discrete-event loop tying the planes together.
//!
//! Time advances tick by tick. Before the devices are stepped at tick `t`,
//! every communication round with start time `<= t` is executed: pending
//! arrivals up to the round time are applied, each node publishes its record,
//! records are disseminated, and nodes whose view changed (or whose planning
//! window rolled over) re-plan. Both modes see the same arrival trace; only
//! the coordinated mode uses the communication plane.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::comms::{run_round, Delivery, LossModel, StatusEmitter, View};
use crate::exec::{DeviceRuntime, Mode};
use crate::metrics::LoadTrace;
use crate::model::{validate_config, ArrivalEvent, ConfigError, DeviceId, DeviceSpec, SimConfig, SimTime};
use crate::rng::{RngStream, Substream};
use crate::scalar::Scalar;
use crate::scheduler::{build_schedule_from, Interval, Schedule};

/// Homogeneous Poisson arrivals over Type-2 devices.
///
/// Inter-arrival gaps are `-ln(u) / λ` from `arrivals`; each event then draws
/// its device from `arrivals` and its service duration (uniform, inclusive)
/// from `service`. A `u` of exactly zero is redrawn.
pub fn generate_arrivals<T: Scalar>(
    rate_per_hour: f64,
    horizon_s: u64,
    devices: &[DeviceSpec<T>],
    service_range_s: (u64, u64),
    arrivals: &mut RngStream,
    service: &mut RngStream,
) -> Vec<ArrivalEvent> {
    let mut targets: Vec<DeviceId> =
        devices.iter().filter(|d| d.is_schedulable()).map(|d| d.device_id).collect();
    targets.sort();
    if rate_per_hour <= 0.0 || targets.is_empty() {
        return Vec::new();
    }

    let lambda = rate_per_hour / 3600.0;
    let mut t = 0.0f64;
    let mut events = Vec::new();
    loop {
        let mut u = arrivals.next_f64();
        while u == 0.0 {
            u = arrivals.next_f64();
        }
        t += -u.ln() / lambda;
        if t >= horizon_s as f64 {
            break;
        }
        let device_id = targets[arrivals.next_index(targets.len())];
        let service_duration_s = service.next_in_range(service_range_s.0, service_range_s.1);
        events.push(ArrivalEvent { at: SimTime(t as u64), device_id, service_duration_s });
    }
    events
}

/// Arrival trace for a config, as used by [`run_simulation`].
pub fn arrivals_for<T: Scalar>(config: &SimConfig<T>) -> Vec<ArrivalEvent> {
    generate_arrivals(
        config.arrival_rate_per_hour,
        config.horizon_s,
        &config.devices,
        (config.service_duration_min_s, config.service_duration_max_s),
        &mut RngStream::substream(config.seed, Substream::Arrivals),
        &mut RngStream::substream(config.seed, Substream::Service),
    )
}

/// Hooks for the optional debug traces. All methods default to no-ops.
pub trait SimObserver<T> {
    fn on_delivery(&mut self, _delivery: Delivery) {}
    /// A node adopted a schedule that differs from its previous one.
    fn on_schedule(&mut self, _node: DeviceId, _schedule: &Schedule<T>) {}
    fn on_device(&mut self, _t: SimTime, _device: DeviceId, _mode: Mode, _on: bool) {}
}

pub struct NoObserver;

impl<T> SimObserver<T> for NoObserver {}

/// Overrides the configured loss probability for a range of round indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LossOverride {
    pub rounds: Range<u64>,
    pub probability: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub loss_overrides: Vec<LossOverride>,
}

impl RunOptions {
    fn loss_for(&self, round: u64, default: LossModel) -> LossModel {
        self.loss_overrides
            .iter()
            .rev()
            .find(|o| o.rounds.contains(&round))
            .and_then(|o| LossModel::new(o.probability))
            .unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult<T> {
    pub seed: u64,
    pub arrivals: Vec<ArrivalEvent>,
    pub coordinated: LoadTrace<T>,
    pub baseline: LoadTrace<T>,
    /// Devices with a request covering each tick.
    pub active_count: Vec<u32>,
    /// Whether all node-local schedules were identical at each tick.
    pub agreement: Vec<bool>,
    /// Arrivals applied to the coordinated and baseline runtimes.
    pub applied_arrivals: (usize, usize),
    /// Schedule computations after caching.
    pub plans_built: usize,
}

impl<T> SimResult<T> {
    pub fn tick_count(&self) -> usize {
        self.agreement.len()
    }

    pub fn fully_agreed(&self) -> bool {
        self.agreement.iter().all(|&a| a)
    }
}

pub fn run_simulation<T: Scalar>(config: &SimConfig<T>) -> Result<SimResult<T>, Vec<ConfigError>> {
    run_simulation_with(config, &RunOptions::default(), &mut NoObserver)
}

type PlanKey = (Vec<(DeviceId, u64)>, Vec<(DeviceId, Interval)>);

pub fn run_simulation_with<T: Scalar>(
    config: &SimConfig<T>,
    options: &RunOptions,
    observer: &mut dyn SimObserver<T>,
) -> Result<SimResult<T>, Vec<ConfigError>> {
    let config = validate_config(config.clone())?;
    let mut devices = config.devices.clone();
    devices.sort_by_key(|d| d.device_id);
    let n = devices.len();
    let index: HashMap<DeviceId, usize> = devices.iter().enumerate().map(|(i, d)| (d.device_id, i)).collect();

    let arrivals = arrivals_for(&config);
    let default_loss = LossModel::new(config.loss_probability).expect("validated");
    let mut loss_rng = RngStream::substream(config.seed, Substream::Loss);

    let period = match config.planning_period_s() {
        0 => config.horizon_s,
        p => p,
    };

    let mut coord: Vec<DeviceRuntime<T>> =
        devices.iter().map(|d| DeviceRuntime::new(d.clone(), Mode::Coordinated)).collect();
    let mut base: Vec<DeviceRuntime<T>> =
        devices.iter().map(|d| DeviceRuntime::new(d.clone(), Mode::Baseline)).collect();
    let mut emitters: Vec<StatusEmitter<T>> = (0..n).map(|_| StatusEmitter::new()).collect();
    let mut views: Vec<View<T>> = vec![View::new(); n];
    let mut schedules: Vec<Option<Arc<Schedule<T>>>> = vec![None; n];

    let ticks = config.tick_count();
    let mut coordinated = Vec::with_capacity(ticks);
    let mut baseline = Vec::with_capacity(ticks);
    let mut active_count = Vec::with_capacity(ticks);
    let mut agreement = Vec::with_capacity(ticks);

    let mut next_arrival = 0;
    let mut applied = (0, 0);
    let mut round = 0u64;
    let mut plans_built = 0;

    for tick in 0..ticks as u64 {
        let t = SimTime(tick * config.tick_s);

        loop {
            let round_time = SimTime(round * config.cp_round_period_s);
            if round_time > t || round_time.0 >= config.horizon_s {
                break;
            }
            while let Some(ev) = arrivals.get(next_arrival).filter(|ev| ev.at <= round_time) {
                let i = index[&ev.device_id];
                coord[i].apply_activation(ev);
                base[i].apply_activation(ev);
                applied.0 += 1;
                applied.1 += 1;
                next_arrival += 1;
            }

            let records: Vec<_> = emitters
                .iter_mut()
                .zip(&coord)
                .map(|(em, rt)| em.make_status_record(rt, round, round_time))
                .collect();
            let loss = options.loss_for(round, default_loss);
            let outcome =
                run_round(&records, &mut views, &loss, &mut loss_rng, round, |d| observer.on_delivery(d));

            let period_start = SimTime(round_time.0 / period * period);
            let mut cache: HashMap<PlanKey, Arc<Schedule<T>>> = HashMap::new();
            for i in 0..n {
                let current = schedules[i].as_ref();
                let same_window = current.is_some_and(|s| s.period_start == period_start);
                if same_window && !outcome.changed[i] {
                    continue;
                }
                let committed = match current {
                    Some(s) if same_window => s.started_by(round_time),
                    _ => Vec::new(),
                };
                let key = (views[i].fingerprint(), committed);
                let plan = cache
                    .entry(key)
                    .or_insert_with_key(|(_, committed)| {
                        plans_built += 1;
                        Arc::new(build_schedule_from(&views[i], period_start, period, round_time, committed))
                    })
                    .clone();
                if current.is_none_or(|s| !s.same_plan(&plan)) {
                    observer.on_schedule(devices[i].device_id, &plan);
                }
                schedules[i] = Some(plan);
            }
            round += 1;
        }

        let mut load_c = T::zero();
        let mut load_b = T::zero();
        let mut active = 0u32;
        for i in 0..n {
            let sched = schedules[i].as_ref().expect("round 0 runs before the first tick");
            let kw_c = coord[i].coordinated_step(sched, t).expect("planning windows tile the horizon");
            let kw_b = base[i].baseline_step(t);
            load_c = load_c + kw_c;
            load_b = load_b + kw_b;
            if coord[i].requested_at(t) {
                active += 1;
            }
            observer.on_device(t, devices[i].device_id, Mode::Coordinated, coord[i].is_on());
            observer.on_device(t, devices[i].device_id, Mode::Baseline, base[i].is_on());
        }
        coordinated.push(load_c);
        baseline.push(load_b);
        active_count.push(active);

        let first = schedules[0].as_ref();
        agreement.push(schedules.iter().all(|s| match (s, first) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b) || a.same_plan(b),
            _ => false,
        }));
    }

    Ok(SimResult {
        seed: config.seed,
        arrivals,
        coordinated: LoadTrace::new(config.tick_s, coordinated),
        baseline: LoadTrace::new(config.tick_s, baseline),
        active_count,
        agreement,
        applied_arrivals: applied,
        plans_built,
    })
}

/// Runs seeds `config.seed, config.seed + 1, ...` in parallel; results are in
/// seed order.
pub fn run_sweep<T: Scalar>(
    config: &SimConfig<T>,
    n_seeds: usize,
) -> Result<Vec<SimResult<T>>, Vec<ConfigError>> {
    assert!(n_seeds >= 1, "a sweep needs at least one seed");
    let config = validate_config(config.clone())?;
    (0..n_seeds as u64)
        .into_par_iter()
        .map(|k| run_simulation(&config.with_seed(config.seed.wrapping_add(k))))
        .collect()
}
