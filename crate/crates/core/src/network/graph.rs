use super::{LinkId, RoadNetwork};
use crate::error::{Error, Result};

/// Directed graph whose nodes are the network links. Node `i` has an edge to
/// every link downstream of it and to itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkGraph {
    ids: Vec<LinkId>,
    adjacency: Vec<Vec<usize>>,
}

impl LinkGraph {
    pub fn from_network(net: &RoadNetwork) -> Self {
        let adjacency = (0..net.num_links())
            .map(|i| {
                let mut out: Vec<usize> = net.downstream(i).to_vec();
                out.push(i);
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        LinkGraph {
            ids: net.links().iter().map(|l| l.id).collect(),
            adjacency,
        }
    }

    /// Builds from explicit adjacency; every node must list itself.
    pub fn from_adjacency(ids: Vec<LinkId>, adjacency: Vec<Vec<usize>>) -> Result<Self> {
        if ids.len() != adjacency.len() {
            return Err(Error::Argument("id and adjacency lengths differ".into()));
        }
        for (i, adj) in adjacency.iter().enumerate() {
            if !adj.contains(&i) {
                return Err(Error::Validation(format!(
                    "node {} has no self-loop",
                    ids[i]
                )));
            }
            if let Some(&bad) = adj.iter().find(|&&j| j >= ids.len()) {
                return Err(Error::Validation(format!("edge to unknown node {bad}")));
            }
        }
        Ok(LinkGraph { ids, adjacency })
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[LinkId] {
        &self.ids
    }

    /// Out-neighbors of `i`, self included, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.iter().map(move |&j| (i, j)))
            .collect()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut adjacency = vec![Vec::new(); self.ids.len()];
        for (i, a) in self.adjacency.iter().enumerate() {
            for &j in a {
                adjacency[j].push(i);
            }
        }
        for a in adjacency.iter_mut() {
            a.sort_unstable();
        }
        LinkGraph {
            ids: self.ids.clone(),
            adjacency,
        }
    }

    /// Dense row-major `N x N` neighbor mask.
    pub fn dense_mask(&self) -> Vec<bool> {
        let n = self.num_nodes();
        let mut mask = vec![false; n * n];
        for (i, a) in self.adjacency.iter().enumerate() {
            for &j in a {
                mask[i * n + j] = true;
            }
        }
        mask
    }

    /// Applies a node relabeling: node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.num_nodes();
        let mut ids = vec![0; n];
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            ids[perm[i]] = self.ids[i];
            let mut a: Vec<usize> = self.adjacency[i].iter().map(|&j| perm[j]).collect();
            a.sort_unstable();
            adjacency[perm[i]] = a;
        }
        LinkGraph { ids, adjacency }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_grid_network, Junction, Link};

    #[test]
    fn single_link_has_only_self_loop() {
        let net = RoadNetwork::new(
            vec![
                Junction { id: 0, x: 0.0, y: 0.0 },
                Junction { id: 1, x: 1.0, y: 0.0 },
            ],
            vec![Link::new(0, 0, 1, 10.0, 1, 0, 25.0)],
            vec![],
        )
        .unwrap();
        let g = LinkGraph::from_network(&net);
        assert_eq!(g.edges(), vec![(0, 0)]);
    }

    #[test]
    fn chain_edges() {
        let net = crate::network::tests::chain();
        let g = LinkGraph::from_network(&net);
        assert_eq!(
            g.edges(),
            vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)]
        );
    }

    #[test]
    fn grid_adjacency_matches_pairwise_scan() {
        let net = generate_grid_network(5, 5, 100.0, 2).unwrap();
        let g = LinkGraph::from_network(&net);
        let links = net.links();
        for (i, a) in links.iter().enumerate() {
            let mut expect: Vec<usize> = links
                .iter()
                .enumerate()
                .filter(|(j, b)| *j == i || (a.to == b.from && b.to != a.from))
                .map(|(j, _)| j)
                .collect();
            expect.sort_unstable();
            assert_eq!(g.neighbors(i), expect.as_slice(), "link {}", a.id);
        }
    }

    #[test]
    fn double_reversal_is_identity() {
        let net = generate_grid_network(4, 3, 100.0, 2).unwrap();
        let g = LinkGraph::from_network(&net);
        assert_ne!(g.reversed(), g);
        assert_eq!(g.reversed().reversed(), g);
    }

    #[test]
    fn missing_self_loop_rejected() {
        let err = LinkGraph::from_adjacency(vec![0, 1], vec![vec![0, 1], vec![0]]).unwrap_err();
        assert!(err.to_string().contains("self-loop"));
    }
}
