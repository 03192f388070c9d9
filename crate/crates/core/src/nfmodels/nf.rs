use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Governor, NfConfig};
use crate::rng::{mix64, stage_rng, STAGE_GOVERNOR};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreadAssign {
    #[default]
    PerFlowHash,
    RoundRobin,
}

/// Worker thread for a packet. Per-flow hashing pins a flow to one thread.
pub fn assign_thread(policy: ThreadAssign, packet_id: u64, flow_id: u64, k: usize) -> usize {
    let k = k.max(1) as u64;
    match policy {
        ThreadAssign::PerFlowHash => (mix64(flow_id) % k) as usize,
        ThreadAssign::RoundRobin => (packet_id % k) as usize,
    }
}

/// Processing time at a relative speed factor, rounded to the nanosecond.
pub fn nf_service_time(base_service_ns: u64, level_factor: f64) -> u64 {
    (base_service_ns as f64 / level_factor).round() as u64
}

/// Frequency state of an NF: the ladder and the current rung.
#[derive(Debug, Clone)]
pub struct NfState {
    service_ns: Vec<u64>,
    level: usize,
}

impl NfState {
    pub fn new(nf: &NfConfig) -> Self {
        NfState {
            service_ns: nf
                .freq_levels
                .iter()
                .map(|&f| nf_service_time(nf.base_service_ns, f))
                .collect(),
            level: 0,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn set_level(&mut self, level: usize) {
        self.level = level.min(self.service_ns.len() - 1);
    }

    pub fn service_time(&self) -> u64 {
        self.service_ns[self.level]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelChange {
    pub at: SimTime,
    pub level: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NfInput {
    pub packet_id: u64,
    pub flow_id: u64,
    pub t_in: SimTime,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct NfOutput {
    /// Service completion per input, `None` when dropped at ingress.
    pub done: Vec<Option<SimTime>>,
    pub thread: Vec<u32>,
    pub levels: Vec<LevelChange>,
    pub dropped: u64,
}

// Stage priority for simultaneous events: ingress, then service, then governor.
const PRIO_ARRIVAL: u8 = 0;
const PRIO_SERVICE: u8 = 1;
const PRIO_TICK: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    prio: u8,
    packet_id: u64,
    slot: usize,
}

struct Worker {
    queue: VecDeque<usize>,
    serving_since: Option<u64>,
    busy_closed: u64,
    busy_at_last_tick: u64,
}

impl Worker {
    fn busy_until(&self, t: u64) -> u64 {
        self.busy_closed + self.serving_since.map_or(0, |s| t.saturating_sub(s))
    }
}

/// Runs the NF stage. `inputs` must be sorted by `(t_in, packet_id)`.
pub(crate) fn run_nf(nf: &NfConfig, inputs: &[NfInput], seed: u64) -> NfOutput {
    let n = inputs.len();
    let mut out = NfOutput {
        done: vec![None; n],
        thread: vec![0; n],
        levels: vec![LevelChange { at: SimTime::ZERO, level: 0 }],
        dropped: 0,
    };
    let mut state = NfState::new(nf);
    let gov_cfg = nf.effective_governor();
    let mut governor = Governor::new(gov_cfg.clone(), nf.freq_levels.len());
    let mut workers: Vec<Worker> = (0..nf.threads_k)
        .map(|_| Worker {
            queue: VecDeque::new(),
            serving_since: None,
            busy_closed: 0,
            busy_at_last_tick: 0,
        })
        .collect();

    let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
    if nf.dvfs_enabled() && n > 0 {
        let phase = if gov_cfg.phase_random {
            stage_rng(seed, STAGE_GOVERNOR).random_range(0..gov_cfg.tick_ns)
        } else {
            0
        };
        let first = if phase == 0 { gov_cfg.tick_ns } else { phase };
        heap.push(Reverse(Event { time: first, prio: PRIO_TICK, packet_id: 0, slot: usize::MAX }));
    }

    let mut next_arrival = 0usize;
    let mut waiting = 0usize;
    let mut in_service = 0usize;

    loop {
        let arrival = inputs.get(next_arrival).map(|p| Event {
            time: p.t_in.0,
            prio: PRIO_ARRIVAL,
            packet_id: p.packet_id,
            slot: next_arrival,
        });
        let ev = match (arrival, heap.peek()) {
            (Some(a), Some(Reverse(h))) if a <= *h => {
                next_arrival += 1;
                a
            }
            (Some(a), None) => {
                next_arrival += 1;
                a
            }
            (_, Some(_)) => heap.pop().unwrap().0,
            (None, None) => break,
        };

        match ev.prio {
            PRIO_ARRIVAL => {
                let p = &inputs[ev.slot];
                let th = assign_thread(nf.thread_assign, p.packet_id, p.flow_id, nf.threads_k);
                out.thread[ev.slot] = th as u32;
                let w = &mut workers[th];
                if w.serving_since.is_none() {
                    w.serving_since = Some(ev.time);
                    in_service += 1;
                    heap.push(Reverse(Event {
                        time: ev.time + state.service_time(),
                        prio: PRIO_SERVICE,
                        packet_id: p.packet_id,
                        slot: ev.slot,
                    }));
                } else if waiting >= nf.queue_capacity {
                    out.dropped += 1;
                } else {
                    w.queue.push_back(ev.slot);
                    waiting += 1;
                }
            }
            PRIO_SERVICE => {
                out.done[ev.slot] = Some(SimTime(ev.time));
                let th = out.thread[ev.slot] as usize;
                let w = &mut workers[th];
                let since = w.serving_since.take().expect("completion on idle worker");
                w.busy_closed += ev.time - since;
                in_service -= 1;
                if let Some(next) = w.queue.pop_front() {
                    waiting -= 1;
                    w.serving_since = Some(ev.time);
                    in_service += 1;
                    heap.push(Reverse(Event {
                        time: ev.time + state.service_time(),
                        prio: PRIO_SERVICE,
                        packet_id: inputs[next].packet_id,
                        slot: next,
                    }));
                }
            }
            _ => {
                let tick = gov_cfg.tick_ns as f64;
                let busy = workers
                    .iter_mut()
                    .map(|w| {
                        let total = w.busy_until(ev.time);
                        let frac = (total - w.busy_at_last_tick) as f64 / tick;
                        w.busy_at_last_tick = total;
                        frac
                    })
                    .fold(0.0, f64::max);
                let before = state.level();
                state.set_level(governor.tick(busy));
                if state.level() != before {
                    out.levels.push(LevelChange { at: SimTime(ev.time), level: state.level() });
                }
                let pending = next_arrival < n || waiting > 0 || in_service > 0;
                if pending {
                    heap.push(Reverse(Event {
                        time: ev.time + gov_cfg.tick_ns,
                        prio: PRIO_TICK,
                        packet_id: 0,
                        slot: usize::MAX,
                    }));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfmodels::GovernorConfig;

    #[test]
    fn service_time_scales_with_level() {
        assert_eq!(nf_service_time(5_000, 1.0), 5_000);
        assert_eq!(nf_service_time(5_000, 0.5), 10_000);
        // 7087 / 0.8 = 8858.75
        assert_eq!(nf_service_time(7_087, 0.8), 8_859);
    }

    #[test]
    fn nf_state_tracks_level() {
        let mut nf = NfConfig::fixed(5_000);
        nf.freq_levels = vec![0.5, 1.0];
        let mut st = NfState::new(&nf);
        assert_eq!(st.service_time(), 10_000);
        st.set_level(7);
        assert_eq!(st.level(), 1);
        assert_eq!(st.service_time(), 5_000);
    }

    #[test]
    fn thread_assignment_policies() {
        for id in 0..10 {
            assert_eq!(assign_thread(ThreadAssign::PerFlowHash, id, 99, 1), 0);
            assert_eq!(assign_thread(ThreadAssign::RoundRobin, id, 99, 1), 0);
        }
        let rr: Vec<usize> = (0..4).map(|i| assign_thread(ThreadAssign::RoundRobin, i, 7, 2)).collect();
        assert_eq!(rr, vec![0, 1, 0, 1]);
        let pinned: Vec<usize> =
            (0..50).map(|i| assign_thread(ThreadAssign::PerFlowHash, i, 12_345, 4)).collect();
        assert!(pinned.iter().all(|&t| t == pinned[0]));
    }

    fn inputs(times: &[u64]) -> Vec<NfInput> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| NfInput { packet_id: i as u64, flow_id: 1, t_in: SimTime(t) })
            .collect()
    }

    #[test]
    fn back_to_back_arrivals_leave_at_service_spacing() {
        let nf = NfConfig::fixed(5_000);
        let out = run_nf(&nf, &inputs(&[0, 100, 200, 300]), 1);
        let done: Vec<u64> = out.done.iter().map(|d| d.unwrap().0).collect();
        assert_eq!(done, vec![5_000, 10_000, 15_000, 20_000]);
    }

    #[test]
    fn sparse_arrivals_keep_their_spacing() {
        let nf = NfConfig::fixed(5_000);
        let out = run_nf(&nf, &inputs(&[0, 8_000, 16_000]), 1);
        let done: Vec<u64> = out.done.iter().map(|d| d.unwrap().0).collect();
        assert_eq!(done, vec![5_000, 13_000, 21_000]);
    }

    #[test]
    fn full_buffer_drops_excess() {
        let mut nf = NfConfig::fixed(5_000);
        nf.queue_capacity = 2;
        let out = run_nf(&nf, &inputs(&[0, 1, 2, 3, 4]), 1);
        assert_eq!(out.dropped, 2);
        assert_eq!(out.done.iter().filter(|d| d.is_none()).count(), 2);
    }

    #[test]
    fn governor_climbs_under_sustained_load() {
        let mut nf = NfConfig::fixed(1_000);
        nf.freq_levels = vec![0.5, 1.0];
        nf.governor = GovernorConfig {
            tick_ns: 100_000,
            phase_random: false,
            ..GovernorConfig::default()
        };
        // 1000 packets at once keep the worker busy for well over one tick.
        let out = run_nf(&nf, &inputs(&vec![0; 1_000]), 1);
        assert_eq!(out.levels[1], LevelChange { at: SimTime(100_000), level: 1 });
        let done: Vec<u64> = out.done.iter().map(|d| d.unwrap().0).collect();
        // Completions order before the tick, so packet 50 still starts at the old speed.
        assert_eq!(done[49], 100_000);
        assert_eq!(done[50], 102_000);
        assert_eq!(done[51], 103_000);
    }
}
