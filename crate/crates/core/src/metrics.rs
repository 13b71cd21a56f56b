//! Load statistics and coordinated-vs-baseline comparison.

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::sim::SimResult;

/// Total load sampled once per tick over `[0, horizon)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadTrace<T> {
    pub tick_s: u64,
    pub samples: Vec<T>,
}

impl<T: Scalar> LoadTrace<T> {
    pub fn new(tick_s: u64, samples: Vec<T>) -> Self {
        LoadTrace { tick_s, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("empty trace")]
    EmptyTrace,
    #[error("non-positive baseline")]
    NonPositiveBaseline,
}

fn non_empty<T>(samples: &[T]) -> Result<&[T], MetricsError> {
    if samples.is_empty() {
        Err(MetricsError::EmptyTrace)
    } else {
        Ok(samples)
    }
}

pub fn peak<T: Scalar>(samples: &[T]) -> Result<T, MetricsError> {
    let s = non_empty(samples)?;
    Ok(s.iter().copied().fold(T::neg_infinity(), T::max))
}

pub fn mean<T: Scalar>(samples: &[T]) -> Result<T, MetricsError> {
    let s = non_empty(samples)?;
    Ok(s.iter().copied().sum::<T>() / T::of_u64(s.len() as u64))
}

/// Population standard deviation (divides by N).
pub fn stddev<T: Scalar>(samples: &[T]) -> Result<T, MetricsError> {
    let m = mean(samples)?;
    let var = samples.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::of_u64(samples.len() as u64);
    Ok(var.sqrt())
}

/// `(base - coord) / base * 100`.
pub fn reduction_pct<T: Scalar>(base: T, coord: T) -> Result<T, MetricsError> {
    // Negated so NaN is rejected as well.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(base > T::zero()) {
        return Err(MetricsError::NonPositiveBaseline);
    }
    Ok((base - coord) / base * T::of(100.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeStats<T> {
    pub peak_kw: T,
    pub mean_kw: T,
    pub stddev_kw: T,
}

impl<T: Scalar> ModeStats<T> {
    pub fn of(trace: &LoadTrace<T>) -> Result<Self, MetricsError> {
        Ok(ModeStats {
            peak_kw: peak(&trace.samples)?,
            mean_kw: mean(&trace.samples)?,
            stddev_kw: stddev(&trace.samples)?,
        })
    }
}

/// Per-run comparison. Percentages are `None` when the baseline figure is zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsSummary<T> {
    pub seed: u64,
    pub coordinated: ModeStats<T>,
    pub baseline: ModeStats<T>,
    pub peak_reduction_pct: Option<T>,
    pub stddev_reduction_pct: Option<T>,
    pub mean_delta_pct: Option<T>,
}

impl<T: Scalar> MetricsSummary<T> {
    pub fn from_traces(
        seed: u64,
        coordinated: &LoadTrace<T>,
        baseline: &LoadTrace<T>,
    ) -> Result<Self, MetricsError> {
        let c = ModeStats::of(coordinated)?;
        let b = ModeStats::of(baseline)?;
        Ok(MetricsSummary {
            seed,
            coordinated: c,
            baseline: b,
            peak_reduction_pct: reduction_pct(b.peak_kw, c.peak_kw).ok(),
            stddev_reduction_pct: reduction_pct(b.stddev_kw, c.stddev_kw).ok(),
            mean_delta_pct: reduction_pct(b.mean_kw, c.mean_kw).ok().map(|r| -r),
        })
    }

    pub fn from_result(result: &SimResult<T>) -> Result<Self, MetricsError> {
        Self::from_traces(result.seed, &result.coordinated, &result.baseline)
    }
}

/// Median, mean and max of the defined values, if any.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Aggregate<T> {
    pub median: T,
    pub mean: T,
    pub max: T,
    pub count: usize,
}

pub fn aggregate<T: Scalar>(values: impl IntoIterator<Item = Option<T>>) -> Option<Aggregate<T>> {
    let mut v: Vec<T> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("metrics are finite"));
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / T::of(2.0) };
    Some(Aggregate { median, mean: mean(&v).expect("non-empty"), max: v[n - 1], count: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_trace() {
        let x = [2.0, 2.0, 2.0];
        assert_eq!((peak(&x), mean(&x), stddev(&x)), (Ok(2.0), Ok(2.0), Ok(0.0)));
    }

    #[test]
    fn two_point_trace() {
        let x = [0.0, 2.0];
        assert_eq!((peak(&x), mean(&x), stddev(&x)), (Ok(2.0), Ok(1.0), Ok(1.0)));
    }

    #[test]
    fn three_point_population_stddev() {
        let x = [1.0f64, 3.0, 2.0];
        assert_eq!(peak(&x), Ok(3.0));
        assert_eq!(mean(&x), Ok(2.0));
        assert!((stddev(&x).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((stddev(&x).unwrap() - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn empty_trace_is_an_error() {
        let e: [f64; 0] = [];
        assert_eq!(peak(&e), Err(MetricsError::EmptyTrace));
        assert_eq!(stddev(&e).unwrap_err().to_string(), "empty trace");
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduction_pct(26.0, 13.0), Ok(50.0));
        assert_eq!(reduction_pct(10.0, 10.0), Ok(0.0));
        assert!((reduction_pct(10.0f64, 4.2).unwrap() - 58.0).abs() < 1e-9);
        assert_eq!(reduction_pct(0.0, 1.0), Err(MetricsError::NonPositiveBaseline));
    }

    #[test]
    fn median_of_two_is_midpoint() {
        let a = aggregate([Some(40.0), Some(50.0)]).unwrap();
        assert_eq!(a.median, 45.0);
        assert_eq!(a.max, 50.0);
        assert!(aggregate::<f64>([None, None]).is_none());
    }

    #[test]
    fn mean_delta_sign() {
        let base = LoadTrace::new(60, vec![2.0f64, 2.0]);
        let coord = LoadTrace::new(60, vec![1.0, 3.0, 2.0, 2.2]);
        let s = MetricsSummary::from_traces(0, &coord, &base).unwrap();
        assert!((s.mean_delta_pct.unwrap() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn zero_baseline_leaves_percentages_undefined() {
        let z = LoadTrace::new(60, vec![0.0f64; 4]);
        let s = MetricsSummary::from_traces(0, &z, &z).unwrap();
        assert_eq!(s.peak_reduction_pct, None);
        assert_eq!(s.mean_delta_pct, None);
    }

    proptest! {
        #[test]
        fn stddev_ignores_constant_offset(
            xs in proptest::collection::vec(0.0f64..30.0, 1..50),
            c in 0.0f64..10.0,
        ) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            prop_assert!((stddev(&xs).unwrap() - stddev(&shifted).unwrap()).abs() < 1e-9);
            prop_assert!((mean(&shifted).unwrap() - mean(&xs).unwrap() - c).abs() < 1e-9);
        }

        #[test]
        fn reduction_strictly_decreasing(base in 0.1f64..100.0, a in 0.0f64..100.0, d in 0.01f64..10.0) {
            prop_assert_eq!(reduction_pct(base, base).unwrap(), 0.0);
            prop_assert!(reduction_pct(base, a).unwrap() > reduction_pct(base, a + d).unwrap());
        }
    }
}
