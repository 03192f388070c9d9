use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simcore::{IcmpReplyRecord, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeriesKind {
    TwoSidedConsecutive,
    OneSidedNormalized,
}

/// Ordered dispersion values in nanoseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionSeries<F> {
    pub values: Vec<F>,
    pub kind: SeriesKind,
    /// Packet-id distance behind each one-sided value; empty for two-sided.
    pub index_gaps: Vec<u64>,
}

impl<F: Scalar> DispersionSeries<F> {
    pub fn two_sided(values: Vec<F>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries("no dispersion values".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= F::zero())) {
            return Err(Error::Data(format!("dispersion value {v} is negative or NaN")));
        }
        Ok(DispersionSeries { values, kind: SeriesKind::TwoSidedConsecutive, index_gaps: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> F {
        shifted_mean(&self.values)
    }

    /// Averages the two middle values for even lengths.
    pub fn median(&self) -> F {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.partial_cmp(b).expect("series values are not NaN"));
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / F::of(2.0)
        }
    }

    pub fn min(&self) -> F {
        self.values.iter().copied().fold(F::infinity(), F::min)
    }

    /// Converts to another scalar width.
    pub fn cast<G: Scalar>(&self) -> DispersionSeries<G> {
        DispersionSeries {
            values: self.values.iter().map(|v| G::of(v.to_f64_lossy())).collect(),
            kind: self.kind,
            index_gaps: self.index_gaps.clone(),
        }
    }
}

/// Mean taken about the first value, so constant input returns that value
/// exactly. Accumulates in `f64`.
pub(crate) fn shifted_mean<F: Scalar>(values: &[F]) -> F {
    let first = values[0].to_f64_lossy();
    let dev: f64 = values.iter().map(|v| v.to_f64_lossy() - first).sum();
    values[0] + F::of(dev / values.len() as f64)
}

/// Consecutive receive-time gaps in receiver order. Dropped and expired
/// packets never reach the receiver and so never contribute a gap.
pub fn dispersion_from_trace<F: Scalar>(trace: &Trace, flow_filter: Option<u64>) -> Result<DispersionSeries<F>> {
    let mut times: Vec<(u64, u64)> = trace
        .received()
        .filter(|p| flow_filter.is_none_or(|f| p.flow_id == f))
        .filter_map(|p| p.t_recv.map(|t| (t.0, p.packet_id)))
        .collect();
    if times.len() < 2 {
        return Err(Error::EmptySeries(format!(
            "{} packet(s) received, need at least 2",
            times.len()
        )));
    }
    times.sort_unstable();
    let values = times.windows(2).map(|w| F::of((w[1].0 - w[0].0) as f64)).collect();
    DispersionSeries::two_sided(values)
}

/// Reply spacing divided by the packet-id distance between the expired
/// packets, in reply arrival order.
pub fn onesided_dispersion<F: Scalar>(replies: &[IcmpReplyRecord]) -> Result<DispersionSeries<F>> {
    if replies.len() < 2 {
        return Err(Error::EmptySeries(format!(
            "{} ICMP repl(ies), need at least 2",
            replies.len()
        )));
    }
    let mut values = Vec::with_capacity(replies.len() - 1);
    let mut gaps = Vec::with_capacity(replies.len() - 1);
    for w in replies.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.orig_packet_id <= a.orig_packet_id {
            return Err(Error::Data(format!(
                "reply for packet {} follows packet {}; ids must increase",
                b.orig_packet_id, a.orig_packet_id
            )));
        }
        if b.t_reply_arrival < a.t_reply_arrival {
            return Err(Error::Data("replies are not in arrival order".into()));
        }
        let gap = b.orig_packet_id - a.orig_packet_id;
        let dt = (b.t_reply_arrival - a.t_reply_arrival) as f64;
        values.push(F::of(dt / gap as f64));
        gaps.push(gap);
    }
    Ok(DispersionSeries { values, kind: SeriesKind::OneSidedNormalized, index_gaps: gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probegen::PacketKind;
    use crate::simcore::PacketRecord;
    use crate::time::SimTime;

    fn trace_with(recv: &[Option<u64>]) -> Trace {
        let packets = recv
            .iter()
            .enumerate()
            .map(|(i, t)| PacketRecord {
                packet_id: i as u64,
                flow_id: 1,
                kind: PacketKind::Udp,
                size_bytes: 64,
                ttl: 64,
                t_sent: SimTime(0),
                t_nf_in: None,
                t_nf_out: None,
                t_recv: t.map(SimTime),
                thread_id: None,
                dropped_at: t.is_none().then(|| "nf_ingress".to_string()),
            })
            .collect();
        Trace {
            packets,
            icmp_replies: Vec::new(),
            scenario_digest: String::new(),
            seed: 0,
            nf_levels: Vec::new(),
            nf_top_level: 0,
        }
    }

    fn reply(id: u64, t: u64) -> IcmpReplyRecord {
        IcmpReplyRecord { orig_packet_id: id, router_hop: 6, t_reply_arrival: SimTime(t) }
    }

    #[test]
    fn consecutive_gaps() {
        let t = trace_with(&[Some(0), Some(5_000), Some(10_000), Some(15_000)]);
        let s: DispersionSeries<f64> = dispersion_from_trace(&t, None).unwrap();
        assert_eq!(s.values, vec![5_000.0; 3]);
        assert_eq!(s.kind, SeriesKind::TwoSidedConsecutive);
    }

    #[test]
    fn drop_skips_a_gap() {
        let t = trace_with(&[Some(0), Some(5_000), None, Some(15_000), Some(20_000)]);
        let s: DispersionSeries<f32> = dispersion_from_trace(&t, None).unwrap();
        assert_eq!(s.values, vec![5_000.0, 10_000.0, 5_000.0]);
    }

    #[test]
    fn too_few_packets() {
        let t = trace_with(&[Some(0), None]);
        assert!(matches!(dispersion_from_trace::<f64>(&t, None), Err(Error::EmptySeries(_))));
    }

    #[test]
    fn onesided_normalizes() {
        let s: DispersionSeries<f64> = onesided_dispersion(&[reply(0, 7), reply(100, 500_007)]).unwrap();
        assert_eq!(s.values, vec![5_000.0]);
        assert_eq!(s.index_gaps, vec![100]);
        let s: DispersionSeries<f64> =
            onesided_dispersion(&[reply(3, 0), reply(4, 10), reply(5, 25)]).unwrap();
        assert_eq!(s.values, vec![10.0, 15.0]);
    }

    #[test]
    fn onesided_rejects_duplicates() {
        let err = onesided_dispersion::<f64>(&[reply(5, 0), reply(5, 10)]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }
}
