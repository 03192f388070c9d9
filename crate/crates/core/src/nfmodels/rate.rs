/// Generic cell rate algorithm: a token bucket expressed as a theoretical
/// arrival time. Internally exact in picoseconds.
///
/// The same state serves as a policer ([`Gcra::conform`], drop when empty)
/// and as a shaper ([`Gcra::shape`], delay until a token is available).
#[derive(Debug, Clone)]
pub struct Gcra {
    emission_ps: u128,
    tolerance_ps: u128,
    tat_ps: u128,
}

impl Gcra {
    /// `burst` is the number of back-to-back packets admitted from a full bucket.
    pub fn new(rate_pps: f64, burst: u32) -> Self {
        assert!(rate_pps > 0.0, "rate must be positive");
        let emission_ps = (1e12 / rate_pps).ceil().max(1.0) as u128;
        Gcra {
            emission_ps,
            tolerance_ps: emission_ps * u128::from(burst.max(1) - 1),
            tat_ps: 0,
        }
    }

    /// Polices a packet arriving at `t_ns`. Returns whether it holds a token.
    pub fn conform(&mut self, t_ns: u64) -> bool {
        let t = u128::from(t_ns) * 1000;
        if t + self.tolerance_ps < self.tat_ps {
            return false;
        }
        self.tat_ps = self.tat_ps.max(t) + self.emission_ps;
        true
    }

    /// Shapes a packet arriving at `t_ns`, returning its release time in ns.
    pub fn shape(&mut self, t_ns: u64) -> u64 {
        let t = u128::from(t_ns) * 1000;
        let eligible = t.max(self.tat_ps.saturating_sub(self.tolerance_ps));
        self.tat_ps = self.tat_ps.max(eligible) + self.emission_ps;
        eligible.div_ceil(1000) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn policer_with_burst_one_blocks_second_packet() {
        let mut g = Gcra::new(5.0, 1);
        assert!(g.conform(0));
        assert!(!g.conform(55_000));
        assert!(g.conform(200_000_000));
    }

    #[test]
    fn shaper_spaces_packets_at_rate() {
        let mut g = Gcra::new(40_000.0, 1);
        let out: Vec<u64> = (0..4).map(|_| g.shape(0)).collect();
        assert_eq!(out, vec![0, 25_000, 50_000, 75_000]);
    }

    #[test]
    fn shaper_passes_burst_untouched() {
        let mut g = Gcra::new(1_000.0, 3);
        assert_eq!(g.shape(10), 10);
        assert_eq!(g.shape(11), 11);
        assert_eq!(g.shape(12), 12);
        assert!(g.shape(13) > 1_000_000);
    }

    proptest! {
        // Replies in any window of length T never exceed rate * T + burst.
        #[test]
        fn policer_window_bound(
            rate in 1.0f64..10_000.0,
            burst in 1u32..5,
            gaps in proptest::collection::vec(0u64..2_000_000, 1..300),
        ) {
            let mut g = Gcra::new(rate, burst);
            let mut t = 0u64;
            let mut accepted = Vec::new();
            for d in gaps {
                t += d;
                if g.conform(t) {
                    accepted.push(t);
                }
            }
            for (i, &start) in accepted.iter().enumerate() {
                for (j, &end) in accepted.iter().enumerate().skip(i) {
                    let window = (end - start) as f64 * 1e-9;
                    let count = (j - i + 1) as f64;
                    prop_assert!(count <= rate * window + burst as f64 + 1e-6);
                }
            }
        }
    }
}
