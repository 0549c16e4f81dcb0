use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{LinkId, RoadNetwork};

/// Link id to dedicated bus lane count.
pub type BusLaneConfig = BTreeMap<LinkId, u32>;

/// Links with two or more lanes.
pub fn bus_lane_candidates(net: &RoadNetwork) -> Vec<LinkId> {
    net.links().iter().filter(|l| l.lanes_total >= 2).map(|l| l.id).collect()
}

/// Picks `count` of `candidates` and gives each one bus lane.
pub fn sample_bus_lane_config(
    net: &RoadNetwork,
    candidates: &[LinkId],
    count: usize,
    seed: u64,
) -> Result<BusLaneConfig> {
    for &id in candidates {
        let i = net
            .index_of(id)
            .ok_or_else(|| Error::Validation(format!("unknown bus lane candidate {id}")))?;
        if net.link(i).lanes_total < 2 {
            return Err(Error::Validation(format!(
                "bus lane candidate {id} has a single lane"
            )));
        }
    }
    if count > candidates.len() {
        return Err(Error::Argument(format!(
            "cannot pick {count} of {} bus lane candidates",
            candidates.len()
        )));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sorted
        .choose_multiple(&mut rng, count)
        .map(|&id| (id, 1))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::GridSpec;

    #[test]
    fn sampling_cases() {
        let net = GridSpec::new(3, 4, 100.0, 2).build().unwrap();
        let cand: Vec<LinkId> = bus_lane_candidates(&net).into_iter().take(20).collect();
        assert_eq!(cand.len(), 20);
        assert!(sample_bus_lane_config(&net, &cand, 0, 1).unwrap().is_empty());
        let all = sample_bus_lane_config(&net, &cand, 20, 1).unwrap();
        assert_eq!(all.keys().copied().collect::<Vec<_>>(), cand);
        let a = sample_bus_lane_config(&net, &cand, 5, 1).unwrap();
        assert_eq!(a, sample_bus_lane_config(&net, &cand, 5, 1).unwrap());
        assert_ne!(a, sample_bus_lane_config(&net, &cand, 5, 2).unwrap());
        assert!(net.with_bus_lanes(&a).is_ok());
        assert!(sample_bus_lane_config(&net, &cand, 21, 1).is_err());
    }

    #[test]
    fn single_lane_candidate_rejected() {
        let net = GridSpec::new(2, 2, 100.0, 1).build().unwrap();
        let ids: Vec<LinkId> = net.links().iter().map(|l| l.id).collect();
        assert!(sample_bus_lane_config(&net, &ids, 1, 0).is_err());
        assert!(bus_lane_candidates(&net).is_empty());
    }
}
