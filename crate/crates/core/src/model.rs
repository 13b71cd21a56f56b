//! Domain types, scenario configuration and validation.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Sub};

use num_traits::FromPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

/// Whole seconds since simulation start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn secs(self) -> u64 {
        self.0
    }

    /// Saturating difference in seconds.
    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub<u64> for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: u64) -> SimTime {
        SimTime(self.0 - rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

/// Identifier of a device-interface and the appliance behind it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DeviceId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum DeviceClass {
    /// Must switch on as soon as it is requested. Never scheduled.
    Type1,
    /// Duty-cycled and schedulable.
    Type2,
}

impl DeviceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceClass::Type1 => "type1",
            DeviceClass::Type2 => "type2",
        }
    }
}

impl std::str::FromStr for DeviceClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "type1" | "type-1" | "1" => Ok(DeviceClass::Type1),
            "type2" | "type-2" | "2" => Ok(DeviceClass::Type2),
            other => Err(format!("unknown device class {other:?}")),
        }
    }
}

/// Static description of one appliance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviceSpec<T> {
    pub device_id: DeviceId,
    pub device_class: DeviceClass,
    /// Draw while ON.
    pub power_kw: T,
    /// Minimum contiguous ON time once started. Type-2 only.
    pub min_dcd_s: u64,
    /// Window within which one `min_dcd_s` run must happen. Type-2 only.
    pub max_dcp_s: u64,
}

impl<T: Scalar> DeviceSpec<T> {
    pub fn type2(id: u32, power_kw: T, min_dcd_s: u64, max_dcp_s: u64) -> Self {
        DeviceSpec {
            device_id: DeviceId(id),
            device_class: DeviceClass::Type2,
            power_kw,
            min_dcd_s,
            max_dcp_s,
        }
    }

    pub fn type1(id: u32, power_kw: T) -> Self {
        DeviceSpec {
            device_id: DeviceId(id),
            device_class: DeviceClass::Type1,
            power_kw,
            min_dcd_s: 0,
            max_dcp_s: 0,
        }
    }

    pub fn is_schedulable(&self) -> bool {
        self.device_class == DeviceClass::Type2
    }
}

/// A user request for an appliance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ArrivalEvent {
    pub at: SimTime,
    pub device_id: DeviceId,
    pub service_duration_s: u64,
}

/// Everything needed to reproduce one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig<T> {
    pub devices: Vec<DeviceSpec<T>>,
    pub horizon_s: u64,
    /// Load sampling resolution.
    pub tick_s: u64,
    pub cp_round_period_s: u64,
    pub arrival_rate_per_hour: f64,
    pub loss_probability: f64,
    pub seed: u64,
    pub service_duration_min_s: u64,
    pub service_duration_max_s: u64,
}

pub const DEFAULT_TICK_S: u64 = 60;
pub const DEFAULT_CP_ROUND_PERIOD_S: u64 = 2;
pub const DEFAULT_SERVICE_MIN_S: u64 = 1800;
pub const DEFAULT_SERVICE_MAX_S: u64 = 7200;

impl<T: Scalar> SimConfig<T> {
    /// 26 identical 1 kW Type-2 appliances, 15 min ON every 30 min, 350 minutes,
    /// lossless dissemination.
    pub fn reference_scenario(arrival_rate_per_hour: f64, seed: u64) -> Self {
        SimConfig {
            devices: (0..26).map(|id| DeviceSpec::type2(id, T::one(), 900, 1800)).collect(),
            horizon_s: 21_000,
            tick_s: DEFAULT_TICK_S,
            cp_round_period_s: DEFAULT_CP_ROUND_PERIOD_S,
            arrival_rate_per_hour,
            loss_probability: 0.0,
            seed,
            service_duration_min_s: DEFAULT_SERVICE_MIN_S,
            service_duration_max_s: DEFAULT_SERVICE_MAX_S,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SimConfig { seed, ..self.clone() }
    }

    pub fn tick_count(&self) -> usize {
        (self.horizon_s / self.tick_s) as usize
    }

    pub fn device(&self, id: DeviceId) -> Option<&DeviceSpec<T>> {
        self.devices.iter().find(|d| d.device_id == id)
    }

    /// Global planning period: the largest maxDCP over Type-2 devices.
    pub fn planning_period_s(&self) -> u64 {
        self.devices.iter().filter(|d| d.is_schedulable()).map(|d| d.max_dcp_s).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("minDCD exceeds maxDCP for device {device} ({min_dcd_s} s > {max_dcp_s} s)")]
    MinDcdExceedsMaxDcp { device: DeviceId, min_dcd_s: u64, max_dcp_s: u64 },
    #[error("non-positive minDCD for device {0}")]
    NonPositiveMinDcd(DeviceId),
    #[error("non-positive power for device {device} ({power_kw} kW)")]
    NonPositivePower { device: DeviceId, power_kw: f64 },
    #[error("duplicate device id {0}")]
    DuplicateDeviceId(DeviceId),
    #[error("loss probability out of range: {0} (expected 0 <= p <= 1)")]
    LossProbabilityOutOfRange(f64),
    #[error("tick_s must be positive")]
    NonPositiveTick,
    #[error("horizon_s {horizon_s} is not a positive multiple of tick_s {tick_s}")]
    HorizonNotMultipleOfTick { horizon_s: u64, tick_s: u64 },
    #[error("cp_round_period_s must be positive")]
    NonPositiveRoundPeriod,
    #[error("arrival_rate_per_hour must be finite and non-negative, got {0}")]
    InvalidArrivalRate(f64),
    #[error("service duration range [{min_s}, {max_s}] is invalid (need 0 < min <= max)")]
    InvalidServiceRange { min_s: u64, max_s: u64 },
}

/// Checks every configuration invariant and reports all violations at once.
pub fn validate_config<T: Scalar>(config: SimConfig<T>) -> Result<SimConfig<T>, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut seen = BTreeSet::new();
    let mut reported_dup = BTreeSet::new();

    for d in &config.devices {
        if !seen.insert(d.device_id) && reported_dup.insert(d.device_id) {
            errors.push(ConfigError::DuplicateDeviceId(d.device_id));
        }
        // Negated so NaN is rejected as well.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(d.power_kw > T::zero()) {
            errors.push(ConfigError::NonPositivePower { device: d.device_id, power_kw: d.power_kw.as_f64() });
        }
        if d.is_schedulable() {
            if d.min_dcd_s == 0 {
                errors.push(ConfigError::NonPositiveMinDcd(d.device_id));
            } else if d.min_dcd_s > d.max_dcp_s {
                errors.push(ConfigError::MinDcdExceedsMaxDcp {
                    device: d.device_id,
                    min_dcd_s: d.min_dcd_s,
                    max_dcp_s: d.max_dcp_s,
                });
            }
        }
    }

    if !(0.0..=1.0).contains(&config.loss_probability) {
        errors.push(ConfigError::LossProbabilityOutOfRange(config.loss_probability));
    }
    if config.tick_s == 0 {
        errors.push(ConfigError::NonPositiveTick);
    } else if config.horizon_s == 0 || !config.horizon_s.is_multiple_of(config.tick_s) {
        errors.push(ConfigError::HorizonNotMultipleOfTick {
            horizon_s: config.horizon_s,
            tick_s: config.tick_s,
        });
    }
    if config.cp_round_period_s == 0 {
        errors.push(ConfigError::NonPositiveRoundPeriod);
    }
    if !config.arrival_rate_per_hour.is_finite() || config.arrival_rate_per_hour < 0.0 {
        errors.push(ConfigError::InvalidArrivalRate(config.arrival_rate_per_hour));
    }
    if config.service_duration_min_s == 0 || config.service_duration_min_s > config.service_duration_max_s {
        errors.push(ConfigError::InvalidServiceRange {
            min_s: config.service_duration_min_s,
            max_s: config.service_duration_max_s,
        });
    }

    if errors.is_empty() {
        Ok(config)
    } else {
        Err(errors)
    }
}

/// Number of non-overlapping minDCD runs that fit in one maxDCP window.
///
/// Panics unless `0 < min_dcd_s <= max_dcp_s`; validate the config first.
pub fn slot_count(max_dcp_s: u64, min_dcd_s: u64) -> u64 {
    assert!(
        min_dcd_s > 0 && min_dcd_s <= max_dcp_s,
        "slot_count requires 0 < minDCD <= maxDCP (got {min_dcd_s}, {max_dcp_s})"
    );
    max_dcp_s / min_dcd_s
}

/// Fraction of each maxDCP window a device spends ON: `min_dcd_s / max_dcp_s`.
///
/// Generic over any numeric type constructible from integers, so exact
/// rationals work as well as floats. Panics on invalid inputs.
pub fn duty_fraction<N>(min_dcd_s: u64, max_dcp_s: u64) -> N
where
    N: FromPrimitive + Div<Output = N>,
{
    assert!(
        min_dcd_s > 0 && min_dcd_s <= max_dcp_s,
        "duty_fraction requires 0 < minDCD <= maxDCP (got {min_dcd_s}, {max_dcp_s})"
    );
    let num = N::from_u64(min_dcd_s).expect("minDCD representable");
    let den = N::from_u64(max_dcp_s).expect("maxDCP representable");
    num / den
}
