use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::binseg::{binseg_detect, Segmentation, StepDetectParams};
use super::series::DispersionSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "NFTY")]
    Nfty,
    #[serde(rename = "MIN")]
    Min,
    #[serde(rename = "MEAN_TRAIN")]
    MeanTrain,
    #[serde(rename = "MEDIAN_TRAIN")]
    MedianTrain,
    #[serde(rename = "SLOPS")]
    Slops,
}

impl Estimator {
    pub const ALL: [Estimator; 5] =
        [Estimator::Nfty, Estimator::Min, Estimator::MeanTrain, Estimator::MedianTrain, Estimator::Slops];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Nfty => "NFTY",
            Estimator::Min => "MIN",
            Estimator::MeanTrain => "MEAN_TRAIN",
            Estimator::MedianTrain => "MEDIAN_TRAIN",
            Estimator::Slops => "SLOPS",
        }
    }

    /// True for estimators that work on a dispersion series.
    pub fn is_dispersion(self) -> bool {
        self != Estimator::Slops
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == up)
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport<F> {
    pub capacity_pps: F,
    pub delta_star_ns: F,
    pub method: Estimator,
    pub segmentation: Option<Segmentation<F>>,
    pub packets_sent: usize,
    pub diagnostics: BTreeMap<String, String>,
}

impl<F: Scalar> EstimateReport<F> {
    fn from_delta(delta: F, method: Estimator, series: &DispersionSeries<F>) -> Result<Self> {
        if !(delta > F::zero()) {
            return Err(Error::Estimation(format!(
                "{method} picked a zero dispersion; use a longer probe to span the receiver batch interval"
            )));
        }
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("series_len".to_string(), series.len().to_string());
        Ok(EstimateReport {
            capacity_pps: F::of(1e9) / delta,
            delta_star_ns: delta,
            method,
            segmentation: None,
            packets_sent: series.len() + 1,
            diagnostics,
        })
    }

    pub fn with_packets_sent(mut self, packets: usize) -> Self {
        self.packets_sent = packets;
        self
    }
}

/// Segments the series and takes the smallest segment mean as δ*.
pub fn nfty_estimate<F: Scalar>(series: &DispersionSeries<F>, params: &StepDetectParams) -> Result<EstimateReport<F>> {
    let seg = binseg_detect(&series.values, params)?;
    let skip = usize::from(params.exclude_first_segment && seg.segments.len() > 1);
    let delta = seg.segments[skip..]
        .iter()
        .map(|s| s.mean)
        .fold(F::infinity(), F::min);
    let mut report = EstimateReport::from_delta(delta, Estimator::Nfty, series)?;
    report.diagnostics.insert("segments".to_string(), seg.segments.len().to_string());
    report.segmentation = Some(seg);
    Ok(report)
}

/// Whole-train statistics: minimum, mean or median gap.
pub fn baseline_estimate<F: Scalar>(series: &DispersionSeries<F>, method: Estimator) -> Result<EstimateReport<F>> {
    if series.is_empty() {
        return Err(Error::EmptySeries("no dispersion values".into()));
    }
    let delta = match method {
        Estimator::Min => series.min(),
        Estimator::MeanTrain => series.mean(),
        Estimator::MedianTrain => series.median(),
        other => return Err(Error::Estimation(format!("{other} is not a train baseline"))),
    };
    EstimateReport::from_delta(delta, method, series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(v: Vec<f64>) -> DispersionSeries<f64> {
        DispersionSeries::two_sided(v).unwrap()
    }

    fn steps(parts: &[(f64, usize)]) -> Vec<f64> {
        parts.iter().flat_map(|&(m, n)| std::iter::repeat_n(m, n)).collect()
    }

    #[test]
    fn min_of_segment_means() {
        let s = series(steps(&[(10_000.0, 60), (7_000.0, 60), (5_000.0, 60)]));
        let r = nfty_estimate(&s, &StepDetectParams::default()).unwrap();
        assert_eq!(r.delta_star_ns, 5_000.0);
        assert_eq!(r.capacity_pps, 200_000.0);
        assert_eq!(r.segmentation.unwrap().segments.len(), 3);
    }

    #[test]
    fn constant_series_all_agree() {
        let s = series(vec![5_000.0; 99]);
        for m in [Estimator::Min, Estimator::MeanTrain, Estimator::MedianTrain] {
            assert_eq!(baseline_estimate(&s, m).unwrap().capacity_pps, 200_000.0);
        }
        assert_eq!(nfty_estimate(&s, &StepDetectParams::default()).unwrap().capacity_pps, 200_000.0);
    }

    #[test]
    fn mean_train_underestimates_two_phase() {
        let s = series(steps(&[(10_000.0, 100), (5_000.0, 100)]));
        let r = baseline_estimate(&s, Estimator::MeanTrain).unwrap();
        assert_eq!(r.delta_star_ns, 7_500.0);
        assert!((r.capacity_pps - 133_333.333).abs() < 0.001);
    }

    #[test]
    fn min_rejects_zero_gap() {
        let mut v = vec![5_000.0; 10];
        v[4] = 0.0;
        assert!(matches!(baseline_estimate(&series(v), Estimator::Min), Err(Error::Estimation(_))));
    }

    #[test]
    fn exclude_first_segment() {
        let s = series(steps(&[(2_000.0, 40), (5_000.0, 200)]));
        let p = StepDetectParams { exclude_first_segment: true, ..StepDetectParams::default() };
        assert_eq!(nfty_estimate(&s, &p).unwrap().delta_star_ns, 5_000.0);
        assert_eq!(nfty_estimate(&s, &StepDetectParams::default()).unwrap().delta_star_ns, 2_000.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Estimator::ALL {
            assert_eq!(m.name().parse::<Estimator>().unwrap(), m);
        }
        assert_eq!("mean-train".parse::<Estimator>().unwrap(), Estimator::MeanTrain);
        assert!("fastest".parse::<Estimator>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn nfty_never_below_mean_train(v in prop::collection::vec(1.0f64..1e5, 2..300)) {
            let s = series(v);
            let nfty = nfty_estimate(&s, &StepDetectParams::default()).unwrap();
            let mean = baseline_estimate(&s, Estimator::MeanTrain).unwrap();
            prop_assert!(nfty.delta_star_ns <= mean.delta_star_ns * (1.0 + 1e-12));
            prop_assert!(nfty.capacity_pps >= mean.capacity_pps * (1.0 - 1e-12));
        }

        #[test]
        fn constant_agreement(c in 1.0f64..1e6, n in 1usize..400) {
            let s = series(vec![c; n]);
            let nfty = nfty_estimate(&s, &StepDetectParams::default()).unwrap().capacity_pps;
            for m in [Estimator::Min, Estimator::MeanTrain, Estimator::MedianTrain] {
                prop_assert_eq!(baseline_estimate(&s, m).unwrap().capacity_pps, nfty);
            }
        }
    }
}
