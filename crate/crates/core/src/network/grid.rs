use super::{Junction, Link, RoadNetwork, Signal, DEFAULT_FREE_FLOW_KMH};
use crate::error::{Error, Result};

/// Synthetic bidirectional grid.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Meters.
    pub link_length: f64,
    pub lanes: u32,
    pub free_flow_speed: f64,
    /// Fixed cycle for junctions with three or more approaches; `None`
    /// leaves the grid unsignalized.
    pub signal_cycle_s: Option<f64>,
    /// Lane count override for horizontal links on every `n`-th row.
    pub arterial_every: Option<(usize, u32)>,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, link_length: f64, lanes: u32) -> Self {
        GridSpec {
            rows,
            cols,
            link_length,
            lanes,
            free_flow_speed: DEFAULT_FREE_FLOW_KMH,
            signal_cycle_s: Some(90.0),
            arterial_every: None,
        }
    }

    pub fn build(&self) -> Result<RoadNetwork> {
        let (rows, cols) = (self.rows, self.cols);
        if rows < 2 || cols < 2 {
            return Err(Error::Argument(format!(
                "grid needs at least 2x2 junctions, got {rows}x{cols}"
            )));
        }
        let jid = |r: usize, c: usize| (r * cols + c) as u32;
        let mut junctions = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                junctions.push(Junction {
                    id: jid(r, c),
                    x: c as f64 * self.link_length,
                    y: r as f64 * self.link_length,
                });
            }
        }

        let mut links = Vec::new();
        let mut push = |from: u32, to: u32, lanes: u32| {
            let id = links.len() as u32;
            links.push(Link::new(
                id,
                from,
                to,
                self.link_length,
                lanes,
                0,
                self.free_flow_speed,
            ));
        };
        for r in 0..rows {
            let lanes = match self.arterial_every {
                Some((every, lanes)) if every > 0 && r % every == 0 => lanes,
                _ => self.lanes,
            };
            for c in 0..cols - 1 {
                push(jid(r, c), jid(r, c + 1), lanes);
                push(jid(r, c + 1), jid(r, c), lanes);
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols {
                push(jid(r, c), jid(r + 1, c), self.lanes);
                push(jid(r + 1, c), jid(r, c), self.lanes);
            }
        }

        let mut signals = Vec::new();
        if let Some(cycle) = self.signal_cycle_s {
            for r in 0..rows {
                for c in 0..cols {
                    let degree = [r > 0, r + 1 < rows, c > 0, c + 1 < cols]
                        .iter()
                        .filter(|&&b| b)
                        .count();
                    if degree >= 3 {
                        signals.push(Signal {
                            junction: jid(r, c),
                            cycle_s: cycle,
                            offset_s: 0.0,
                            split: 0.5,
                        });
                    }
                }
            }
        }
        RoadNetwork::new(junctions, links, signals)
    }
}

/// Bidirectional `rows x cols` junction grid with uniform links.
pub fn generate_grid_network(
    rows: usize,
    cols: usize,
    link_length: f64,
    lanes: u32,
) -> Result<RoadNetwork> {
    GridSpec::new(rows, cols, link_length, lanes).build()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Undirected adjacent pairs by brute force over all junction pairs.
    fn count_adjacent_pairs(rows: usize, cols: usize) -> usize {
        let cells: Vec<(i64, i64)> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r as i64, c as i64)))
            .collect();
        let mut n = 0;
        for (a, p) in cells.iter().enumerate() {
            for q in &cells[a + 1..] {
                if (p.0 - q.0).abs() + (p.1 - q.1).abs() == 1 {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn two_by_two_has_eight_boundary_links() {
        let net = generate_grid_network(2, 2, 100.0, 2).unwrap();
        assert_eq!(net.num_links(), 8);
        assert!(net
            .links()
            .iter()
            .all(|l| l.is_boundary_in && l.is_boundary_out));
    }

    #[test]
    fn link_count_matches_closed_form() {
        for (rows, cols) in [(2, 3), (5, 5), (3, 7), (4, 2)] {
            let net = generate_grid_network(rows, cols, 100.0, 3).unwrap();
            let closed = 2 * (2 * rows * cols - rows - cols);
            assert_eq!(net.num_links(), closed);
            assert_eq!(net.num_links(), 2 * count_adjacent_pairs(rows, cols));
            assert_eq!(net.junctions().len(), rows * cols);
        }
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(matches!(
            generate_grid_network(1, 5, 100.0, 2),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn perimeter_flags_on_5x5() {
        let net = generate_grid_network(5, 5, 100.0, 2).unwrap();
        // Links between interior junctions only: 2 * (2*9 - 3 - 3).
        let interior = net
            .links()
            .iter()
            .filter(|l| !l.is_boundary_in && !l.is_boundary_out)
            .count();
        assert_eq!(interior, 24);
        assert_eq!(net.signals().len(), 21);
    }

    #[test]
    fn ids_are_deterministic() {
        let a = generate_grid_network(3, 4, 150.0, 2).unwrap();
        let b = generate_grid_network(3, 4, 150.0, 2).unwrap();
        assert_eq!(a, b);
    }
}
