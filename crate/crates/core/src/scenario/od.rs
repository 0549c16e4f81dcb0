use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{LinkId, RoadNetwork};
use crate::sim::Demand;

/// Peak-period demand in veh/h keyed by (origin link, destination link).
#[derive(Debug, Clone, PartialEq)]
pub struct ODMatrix {
    entries: BTreeMap<(LinkId, LinkId), f64>,
}

impl ODMatrix {
    pub fn new(entries: BTreeMap<(LinkId, LinkId), f64>) -> Result<Self> {
        for (&(o, d), &v) in &entries {
            if o == d {
                return Err(Error::Validation(format!("OD pair {o} -> {d} starts at its destination")));
            }
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("OD pair {o} -> {d} has demand {v}")));
            }
        }
        Ok(ODMatrix { entries })
    }

    pub fn entries(&self) -> &BTreeMap<(LinkId, LinkId), f64> {
        &self.entries
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.values().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    fn with_values(&self, values: impl IntoIterator<Item = f64>) -> Self {
        ODMatrix {
            entries: self.entries.keys().copied().zip(values).collect(),
        }
    }

    /// Checks links against `net` and converts to index space.
    pub fn to_demand(&self, net: &RoadNetwork) -> Result<Demand> {
        let idx = |id: LinkId| {
            net.index_of(id)
                .ok_or_else(|| Error::Validation(format!("OD references unknown link {id}")))
        };
        let pairs = self
            .entries
            .iter()
            .map(|(&(o, d), &v)| Ok((idx(o)?, idx(d)?, v)))
            .collect::<Result<Vec<_>>>()?;
        Demand::new(net, &pairs)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# OD origin_link dest_link veh_per_h\n");
        for (&(o, d), v) in &self.entries {
            let _ = writeln!(out, "OD {o} {d} {v}");
        }
        out
    }

    pub fn parse(text: &str, src: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
            match toks.as_slice() {
                [] => {}
                ["OD", o, d, v] => {
                    let bad = |what: &str| Error::parse(src, n + 1, format!("bad {what}"));
                    let key = (
                        o.parse().map_err(|_| bad("origin"))?,
                        d.parse().map_err(|_| bad("destination"))?,
                    );
                    let v: f64 = v.parse().map_err(|_| bad("demand"))?;
                    if entries.insert(key, v).is_some() {
                        return Err(Error::parse(src, n + 1, "duplicate OD pair"));
                    }
                }
                _ => return Err(Error::parse(src, n + 1, "expected `OD origin dest veh_per_h`")),
            }
        }
        ODMatrix::new(entries).map_err(|e| Error::parse(src, 0, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Multiplies entry `i` by `factors[i]` (entry order) and rescales so the
/// total is unchanged.
pub fn perturb_od(base: &ODMatrix, factors: &[f64]) -> Result<ODMatrix> {
    if factors.len() != base.len() {
        return Err(Error::Argument(format!(
            "{} factors for {} OD pairs",
            factors.len(),
            base.len()
        )));
    }
    if let Some(f) = factors.iter().find(|f| !(0.8..=1.2).contains(*f)) {
        return Err(Error::Argument(format!("perturbation factor {f} outside [0.8, 1.2]")));
    }
    let total = base.total();
    if !(total > 0.0) {
        return Err(Error::Argument("base OD total must be positive".into()));
    }
    let raw: Vec<f64> = base.entries.values().zip(factors).map(|(v, f)| v * f).collect();
    let scale = total / raw.iter().sum::<f64>();
    Ok(base.with_values(raw.into_iter().map(|v| v * scale)))
}

pub fn scale_demand(od: &ODMatrix, factor: f64) -> Result<ODMatrix> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::Argument(format!("demand factor must be positive, got {factor}")));
    }
    Ok(od.with_values(od.entries.values().map(|v| v * factor)))
}

/// Random OD matrix over distinct link pairs whose rates are drawn uniformly
/// around `mean_vph` (±50 %). Origins need a downstream link, destinations an
/// upstream one.
pub fn generate_base_od(net: &RoadNetwork, pairs: usize, mean_vph: f64, seed: u64) -> Result<ODMatrix> {
    let origins: Vec<usize> = (0..net.num_links()).filter(|&i| !net.downstream(i).is_empty()).collect();
    let dests: Vec<usize> = (0..net.num_links()).filter(|&i| !net.upstream(i).is_empty()).collect();
    let possible = origins.len() * dests.len();
    if pairs == 0 || pairs > possible / 2 {
        return Err(Error::Argument(format!(
            "cannot draw {pairs} OD pairs from a network with {} links",
            net.num_links()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = BTreeMap::new();
    while entries.len() < pairs {
        let o = *origins.choose(&mut rng).expect("non-empty");
        let d = *dests.choose(&mut rng).expect("non-empty");
        if o == d {
            continue;
        }
        let key = (net.link(o).id, net.link(d).id);
        let rate = mean_vph * rng.gen_range(0.5..1.5);
        entries.entry(key).or_insert(rate);
    }
    ODMatrix::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn od(values: &[f64]) -> ODMatrix {
        ODMatrix::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| ((i as LinkId, 100 + i as LinkId), v))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn perturb_examples() {
        assert_eq!(perturb_od(&od(&[10.0, 10.0]), &[0.8, 1.2]).unwrap().values(), vec![8.0, 12.0]);
        assert_eq!(perturb_od(&od(&[10.0, 10.0]), &[0.8, 0.8]).unwrap().values(), vec![10.0, 10.0]);
        assert!(perturb_od(&od(&[10.0, 10.0]), &[0.7, 1.0]).is_err());
        assert!(perturb_od(&od(&[10.0]), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn scale_examples() {
        let m = od(&[10.0, 20.0]);
        assert_eq!(scale_demand(&m, 1.0).unwrap(), m);
        assert_eq!(scale_demand(&m, 1.3).unwrap().values(), vec![13.0, 26.0]);
        let back = scale_demand(&scale_demand(&m, 2.0).unwrap(), 0.5).unwrap();
        for (a, b) in back.values().iter().zip(m.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(scale_demand(&m, 0.0).is_err());
        assert!(scale_demand(&m, -1.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = od(&[10.5, 0.1, 333.0]);
        assert_eq!(ODMatrix::parse(&m.to_text(), "t").unwrap(), m);
        assert!(ODMatrix::parse("OD 1 1 5", "t").is_err());
        assert!(ODMatrix::parse("OD 1 2 5\nOD 1 2 6", "t").is_err());
        let err = ODMatrix::parse("OD 1 2\n", "f.od").unwrap_err().to_string();
        assert!(err.contains("f.od:1"), "{err}");
    }

    #[test]
    fn base_od_is_seeded() {
        let net = crate::network::GridSpec::new(3, 3, 100.0, 2).build().unwrap();
        let a = generate_base_od(&net, 10, 200.0, 4).unwrap();
        assert_eq!(a, generate_base_od(&net, 10, 200.0, 4).unwrap());
        assert_ne!(a, generate_base_od(&net, 10, 200.0, 5).unwrap());
        assert_eq!(a.len(), 10);
        a.to_demand(&net).unwrap();
    }

    proptest! {
        #[test]
        fn perturbation_keeps_total(
            values in prop::collection::vec(0.1f64..500.0, 1..30),
            seed in any::<u64>(),
        ) {
            let m = od(&values);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let factors: Vec<f64> = values.iter().map(|_| rng.gen_range(0.8..=1.2)).collect();
            let p = perturb_od(&m, &factors).unwrap();
            prop_assert!((p.total() - m.total()).abs() <= 1e-9 * m.total().max(1.0));
        }
    }
}
