//! Communication plane.
//!
//! Each round every node broadcasts its own [`StatusRecord`]; every other node
//! receives it independently with probability `1 - p`. Records carry a
//! sequence number owned by the sending node and views keep the highest one
//! seen per device, so any round in which everything is delivered brings all
//! views into agreement.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::exec::DeviceRuntime;
use crate::model::{DeviceClass, DeviceId, SimTime};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Replicated snapshot of one device's ownership state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatusRecord<T> {
    pub device_id: DeviceId,
    pub seq: u64,
    pub device_class: DeviceClass,
    pub active: bool,
    pub request_time: SimTime,
    pub service_end_time: SimTime,
    pub power_kw: T,
    pub min_dcd_s: u64,
    pub max_dcp_s: u64,
}

impl<T: PartialEq> StatusRecord<T> {
    /// Equality ignoring `seq`.
    pub fn same_payload(&self, other: &Self) -> bool {
        self.device_id == other.device_id
            && self.device_class == other.device_class
            && self.active == other.active
            && self.request_time == other.request_time
            && self.service_end_time == other.service_end_time
            && self.power_kw == other.power_kw
            && self.min_dcd_s == other.min_dcd_s
            && self.max_dcp_s == other.max_dcp_s
    }
}

/// One node's merged picture of every device.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct View<T> {
    pub records: BTreeMap<DeviceId, StatusRecord<T>>,
    pub last_round: u64,
}

impl<T> Default for View<T> {
    fn default() -> Self {
        View { records: BTreeMap::new(), last_round: 0 }
    }
}

impl<T: Clone> View<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = StatusRecord<T>>) -> Self {
        View { records: records.into_iter().map(|r| (r.device_id, r)).collect(), last_round: 0 }
    }

    pub fn get(&self, id: DeviceId) -> Option<&StatusRecord<T>> {
        self.records.get(&id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Keeps the incoming record iff its seq is strictly higher than the
    /// stored one (or nothing is stored). Returns whether the view changed.
    pub fn merge(&mut self, incoming: &StatusRecord<T>, round: u64) -> bool {
        let replace = match self.records.get(&incoming.device_id) {
            Some(stored) => incoming.seq > stored.seq,
            None => true,
        };
        if replace {
            self.records.insert(incoming.device_id, incoming.clone());
            self.last_round = round;
        }
        replace
    }

    /// `(device, seq)` pairs. Since only owners bump seq, two views with the
    /// same fingerprint hold the same records.
    pub fn fingerprint(&self) -> Vec<(DeviceId, u64)> {
        self.records.values().map(|r| (r.device_id, r.seq)).collect()
    }
}

/// Functional form of [`View::merge`].
pub fn merge_view<T: Clone>(mut view: View<T>, incoming: &StatusRecord<T>, round: u64) -> View<T> {
    view.merge(incoming, round);
    view
}

/// Independent per-(sender, receiver, round) drop probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossModel {
    p: f64,
}

impl LossModel {
    pub fn new(p: f64) -> Option<Self> {
        (0.0..=1.0).contains(&p).then_some(LossModel { p })
    }

    pub fn lossless() -> Self {
        LossModel { p: 0.0 }
    }

    pub fn probability(&self) -> f64 {
        self.p
    }

    /// One Bernoulli draw: delivered iff `u >= p`.
    pub fn delivered(&self, rng: &mut RngStream) -> bool {
        rng.next_f64() >= self.p
    }
}

/// Tracks what a node last broadcast so seq is only bumped on change.
#[derive(Clone, Debug, Default)]
pub struct StatusEmitter<T> {
    last: Option<StatusRecord<T>>,
    last_change_round: Option<u64>,
}

impl<T: Scalar> StatusEmitter<T> {
    pub fn new() -> Self {
        StatusEmitter { last: None, last_change_round: None }
    }

    pub fn last_change_round(&self) -> Option<u64> {
        self.last_change_round
    }

    /// Snapshot of `rt` as seen at `now`. The first record has seq 0; later
    /// records reuse the previous seq unless some payload field changed.
    pub fn make_status_record(
        &mut self,
        rt: &DeviceRuntime<T>,
        round_index: u64,
        now: SimTime,
    ) -> StatusRecord<T> {
        let spec = &rt.spec;
        let mut record = StatusRecord {
            device_id: spec.device_id,
            seq: 0,
            device_class: spec.device_class,
            active: rt.requested_at(now),
            request_time: rt.request_time,
            service_end_time: rt.service_end_time,
            power_kw: spec.power_kw,
            min_dcd_s: spec.min_dcd_s,
            max_dcp_s: spec.max_dcp_s,
        };
        match &self.last {
            Some(prev) if prev.same_payload(&record) => return prev.clone(),
            Some(prev) => {
                record.seq = prev.seq + 1;
                self.last_change_round = Some(round_index);
            }
            None => self.last_change_round = Some(round_index),
        }
        self.last = Some(record.clone());
        record
    }
}

/// One row of the optional round trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub round: u64,
    pub sender: DeviceId,
    pub receiver: DeviceId,
    pub delivered: bool,
}

impl Delivery {
    pub const CSV_HEADER: &'static str = "round,sender,receiver,delivered";

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.round, self.sender, self.receiver, self.delivered as u8)
    }
}

/// Per-round delivery statistics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundOutcome {
    /// Records received from other nodes, indexed like the input views.
    pub received: Vec<usize>,
    /// Receivers whose view changed.
    pub changed: Vec<bool>,
}

/// Runs one all-to-all dissemination round.
///
/// `records[i]` is node `i`'s own record and `views[i]` its view; records must
/// be sorted by device id. All Bernoulli draws are taken first, in ascending
/// `(sender, receiver)` order, then applied. `on_delivery` sees every draw.
pub fn run_round<T: Scalar>(
    records: &[StatusRecord<T>],
    views: &mut [View<T>],
    loss: &LossModel,
    rng: &mut RngStream,
    round: u64,
    mut on_delivery: impl FnMut(Delivery),
) -> RoundOutcome {
    assert_eq!(records.len(), views.len(), "one record per participating node");
    debug_assert!(records.windows(2).all(|w| w[0].device_id < w[1].device_id));
    let n = records.len();

    let mut matrix = vec![false; n * n];
    for s in 0..n {
        for r in 0..n {
            if s == r {
                continue;
            }
            let ok = loss.delivered(rng);
            matrix[s * n + r] = ok;
            on_delivery(Delivery {
                round,
                sender: records[s].device_id,
                receiver: records[r].device_id,
                delivered: ok,
            });
        }
    }

    let mut received = vec![0; n];
    let mut changed = vec![false; n];
    for (r, view) in views.iter_mut().enumerate() {
        changed[r] |= view.merge(&records[r], round);
        for s in 0..n {
            if s != r && matrix[s * n + r] {
                received[r] += 1;
                changed[r] |= view.merge(&records[s], round);
            }
        }
    }
    RoundOutcome { received, changed }
}
