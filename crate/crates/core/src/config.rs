//! Flat `key=value` scenario files.
//!
//! ```text
//! # 26 identical appliances
//! horizon_s=21000
//! arrival_rate_per_hour=30
//! device.0.class=type2
//! device.0.power_kw=1
//! device.0.min_dcd_s=900
//! device.0.max_dcp_s=1800
//! ```
//!
//! `tick_s`, `cp_round_period_s`, `loss_probability`, `seed` and the service
//! range have defaults; everything else is required. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    DeviceClass, DeviceId, DeviceSpec, SimConfig, DEFAULT_CP_ROUND_PERIOD_S, DEFAULT_SERVICE_MAX_S,
    DEFAULT_SERVICE_MIN_S, DEFAULT_TICK_S,
};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    /// 1-based; 0 for errors not tied to a line (missing keys).
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ParseError { line, message: message.into() }
    }
}

#[derive(Default)]
struct DeviceFields {
    class: Option<DeviceClass>,
    power_kw: Option<f64>,
    min_dcd_s: Option<u64>,
    max_dcp_s: Option<u64>,
}

fn parse_num<V: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<V, ParseError> {
    value.parse::<V>().map_err(|_| ParseError::at(line, format!("invalid value {value:?} for {key}")))
}

/// Parses a scenario file. All problems are reported, not just the first.
pub fn parse_config<T: Scalar>(text: &str) -> Result<SimConfig<T>, Vec<ParseError>> {
    let mut errors = Vec::new();
    let mut horizon_s = None;
    let mut arrival_rate = None;
    let mut tick_s = DEFAULT_TICK_S;
    let mut round_s = DEFAULT_CP_ROUND_PERIOD_S;
    let mut loss = 0.0;
    let mut seed = 0u64;
    let mut svc_min = DEFAULT_SERVICE_MIN_S;
    let mut svc_max = DEFAULT_SERVICE_MAX_S;
    let mut devices: BTreeMap<u32, DeviceFields> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(ParseError::at(line_no, format!("expected key=value, got {line:?}")));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());

        // Collapse each branch to Result<(), ParseError> so errors accumulate.
        let outcome: Result<(), ParseError> = (|| {
            match key {
                "horizon_s" => horizon_s = Some(parse_num(line_no, key, value)?),
                "tick_s" => tick_s = parse_num(line_no, key, value)?,
                "cp_round_period_s" => round_s = parse_num(line_no, key, value)?,
                "arrival_rate_per_hour" => arrival_rate = Some(parse_num(line_no, key, value)?),
                "loss_probability" => loss = parse_num(line_no, key, value)?,
                "seed" => seed = parse_num(line_no, key, value)?,
                "service_duration_min_s" => svc_min = parse_num(line_no, key, value)?,
                "service_duration_max_s" => svc_max = parse_num(line_no, key, value)?,
                _ => {
                    let mut parts = key.splitn(3, '.');
                    let (Some("device"), Some(id), Some(field)) = (parts.next(), parts.next(), parts.next())
                    else {
                        return Err(ParseError::at(line_no, format!("unknown key {key:?}")));
                    };
                    let id: u32 = id
                        .parse()
                        .map_err(|_| ParseError::at(line_no, format!("invalid device id in {key:?}")))?;
                    let entry = devices.entry(id).or_default();
                    match field {
                        "class" => {
                            entry.class = Some(value.parse().map_err(|e: String| ParseError::at(line_no, e))?)
                        }
                        "power_kw" => entry.power_kw = Some(parse_num(line_no, key, value)?),
                        "min_dcd_s" => entry.min_dcd_s = Some(parse_num(line_no, key, value)?),
                        "max_dcp_s" => entry.max_dcp_s = Some(parse_num(line_no, key, value)?),
                        _ => return Err(ParseError::at(line_no, format!("unknown key {key:?}"))),
                    }
                }
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            errors.push(e);
        }
    }

    if horizon_s.is_none() {
        errors.push(ParseError::at(0, "missing required key horizon_s"));
    }
    if arrival_rate.is_none() {
        errors.push(ParseError::at(0, "missing required key arrival_rate_per_hour"));
    }

    let mut specs = Vec::with_capacity(devices.len());
    for (id, f) in devices {
        let class = f.class.unwrap_or_else(|| {
            errors.push(ParseError::at(0, format!("missing device.{id}.class")));
            DeviceClass::Type2
        });
        let Some(power) = f.power_kw else {
            errors.push(ParseError::at(0, format!("missing device.{id}.power_kw")));
            continue;
        };
        let (min_dcd_s, max_dcp_s) = match class {
            DeviceClass::Type1 => (f.min_dcd_s.unwrap_or(0), f.max_dcp_s.unwrap_or(0)),
            DeviceClass::Type2 => match (f.min_dcd_s, f.max_dcp_s) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    errors
                        .push(ParseError::at(0, format!("type2 device {id} needs min_dcd_s and max_dcp_s")));
                    continue;
                }
            },
        };
        specs.push(DeviceSpec {
            device_id: DeviceId(id),
            device_class: class,
            power_kw: T::of(power),
            min_dcd_s,
            max_dcp_s,
        });
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(SimConfig {
        devices: specs,
        horizon_s: horizon_s.unwrap_or_default(),
        tick_s,
        cp_round_period_s: round_s,
        arrival_rate_per_hour: arrival_rate.unwrap_or_default(),
        loss_probability: loss,
        seed,
        service_duration_min_s: svc_min,
        service_duration_max_s: svc_max,
    })
}

/// Renders a config in the file format accepted by [`parse_config`].
pub fn format_config<T: Scalar>(config: &SimConfig<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "horizon_s={}", config.horizon_s);
    let _ = writeln!(out, "tick_s={}", config.tick_s);
    let _ = writeln!(out, "cp_round_period_s={}", config.cp_round_period_s);
    let _ = writeln!(out, "arrival_rate_per_hour={}", config.arrival_rate_per_hour);
    let _ = writeln!(out, "loss_probability={}", config.loss_probability);
    let _ = writeln!(out, "seed={}", config.seed);
    let _ = writeln!(out, "service_duration_min_s={}", config.service_duration_min_s);
    let _ = writeln!(out, "service_duration_max_s={}", config.service_duration_max_s);
    for d in &config.devices {
        let id = d.device_id;
        let _ = writeln!(out, "device.{id}.class={}", d.device_class.as_str());
        let _ = writeln!(out, "device.{id}.power_kw={}", d.power_kw);
        if d.is_schedulable() {
            let _ = writeln!(out, "device.{id}.min_dcd_s={}", d.min_dcd_s);
            let _ = writeln!(out, "device.{id}.max_dcp_s={}", d.max_dcp_s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# two appliances
horizon_s=3600
arrival_rate_per_hour=4   # low rate
seed=9
device.1.class=type2
device.1.power_kw=1.5
device.1.min_dcd_s=900
device.1.max_dcp_s=1800
device.2.class=TYPE1
device.2.power_kw=0.1
";

    #[test]
    fn parses_with_defaults() {
        let cfg: SimConfig<f64> = parse_config(SMALL).unwrap();
        assert_eq!(cfg.horizon_s, 3600);
        assert_eq!(cfg.tick_s, 60);
        assert_eq!(cfg.cp_round_period_s, 2);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.devices.len(), 2);
        assert_eq!(cfg.devices[0].power_kw, 1.5);
        assert_eq!(cfg.devices[1].device_class, DeviceClass::Type1);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{SMALL}colour=blue\ndevice.1.colour=red\n");
        let errs = parse_config::<f64>(&text).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|e| e.message.starts_with("unknown key")));
        assert_eq!(errs[0].line, 11);
    }

    #[test]
    fn missing_required_keys_are_listed() {
        let errs = parse_config::<f64>("seed=1\n").unwrap_err();
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn bad_values_name_the_key() {
        let errs = parse_config::<f64>("horizon_s=abc\narrival_rate_per_hour=1\n").unwrap_err();
        assert_eq!(errs[0].to_string(), "line 1: invalid value \"abc\" for horizon_s");
    }

    #[test]
    fn format_parse_round_trip() {
        let cfg = SimConfig::<f64>::reference_scenario(18.0, 77);
        let back: SimConfig<f64> = parse_config(&format_config(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }
}
