//! Decentralized duty-cycle coordination for home-area-network appliances.
//!
//! The crate simulates a set of device-interfaces that share appliance status
//! every communication round, derive the same staggered ON schedule from that
//! shared view, and thereby cut the peak and variance of the total load
//! compared with appliances that free-run their duty cycles.
//!
//! Power quantities are generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` aliases below are what the CLI uses.

pub mod cli;
pub mod comms;
pub mod config;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod scheduler;
pub mod sim;

pub use comms::{merge_view, run_round, LossModel, StatusEmitter, StatusRecord, View};
pub use config::{format_config, parse_config};
pub use exec::{DeviceRuntime, Mode};
pub use metrics::{mean, peak, reduction_pct, stddev, LoadTrace, MetricsSummary};
pub use model::{
    duty_fraction, slot_count, validate_config, ArrivalEvent, ConfigError, DeviceClass, DeviceId, DeviceSpec,
    SimConfig, SimTime,
};
pub use rng::{RngStream, Substream};
pub use scalar::Scalar;
pub use scheduler::{
    build_schedule, build_schedule_from, check_schedule, order_devices, place_interval, Interval,
    LoadProfile, Schedule,
};
pub use sim::{generate_arrivals, run_simulation, run_sweep, SimResult};

pub type DeviceSpecF64 = DeviceSpec<f64>;
pub type SimConfigF64 = SimConfig<f64>;
pub type StatusRecordF64 = StatusRecord<f64>;
pub type ViewF64 = View<f64>;
pub type ScheduleF64 = Schedule<f64>;
pub type LoadProfileF64 = LoadProfile<f64>;
pub type DeviceRuntimeF64 = DeviceRuntime<f64>;
pub type LoadTraceF64 = LoadTrace<f64>;
pub type SimResultF64 = SimResult<f64>;
pub type MetricsSummaryF64 = MetricsSummary<f64>;

pub type SimConfigF32 = SimConfig<f32>;
pub type ScheduleF32 = Schedule<f32>;
pub type SimResultF32 = SimResult<f32>;
