use crate::error::{Error, Result};
use crate::rng::mix64;
use crate::simcore::{run_simulation, ScenarioConfig};

use super::build_one_sided_probe;

/// Packet pairs sent by [`estimate_router_time`].
pub const ROUTER_TIME_PAIRS: usize = 5;

/// Estimates how long the router at `expire_hop` takes to generate a
/// TTL-exceeded reply: back-to-back pairs both expire there, and the reply
/// spacing is its processing time. Returns the median over the pairs.
pub fn estimate_router_time(scenario: &ScenarioConfig, expire_hop: usize, seed: u64) -> Result<u64> {
    let rate = scenario.sender.nominal_rate_pps;
    let probe = build_one_sided_probe(&scenario.link, 2, 1, expire_hop, rate)?;
    let mut spacings = Vec::with_capacity(ROUTER_TIME_PAIRS);
    for pair in 0..ROUTER_TIME_PAIRS {
        let trace = run_simulation(scenario, &probe, mix64(seed.wrapping_add(pair as u64)))?;
        if let [a, b] = trace.icmp_replies.as_slice() {
            spacings.push(b.t_reply_arrival - a.t_reply_arrival);
        }
    }
    if spacings.is_empty() {
        return Err(Error::RouterEstimation(format!(
            "no pair out of {ROUTER_TIME_PAIRS} produced two replies from hop {expire_hop}; \
             the router is probably rate-limiting ICMP"
        )));
    }
    spacings.sort_unstable();
    Ok(spacings[spacings.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfmodels::{NfConfig, RouterConfig};
    use crate::probegen::default_expire_hop;

    fn scenario(router: RouterConfig) -> ScenarioConfig {
        let mut s = ScenarioConfig::with_nf(NfConfig::fixed(5_000));
        s.router = router;
        s
    }

    #[test]
    fn recovers_processing_time() {
        for t_r in [55_000, 100_000] {
            let s = scenario(RouterConfig { icmp_processing_ns: t_r, ..RouterConfig::default() });
            let hop = default_expire_hop(&s.link);
            assert_eq!(estimate_router_time(&s, hop, 3).unwrap(), t_r);
        }
    }

    #[test]
    fn rate_limited_router_fails() {
        let s = scenario(RouterConfig::default().rate_limited());
        let hop = default_expire_hop(&s.link);
        assert!(matches!(estimate_router_time(&s, hop, 3), Err(Error::RouterEstimation(_))));
    }
}
