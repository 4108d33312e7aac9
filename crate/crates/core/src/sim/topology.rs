use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{distance, Position};
use crate::NodeId;

use super::{rng_stream, Stream};

/// Node placement plus the sink, over a square field.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub positions: Vec<Position>,
    pub sink: NodeId,
    pub field_size: f64,
    pub tx_range: f64,
    pub seed: u64,
}

/// Uniform i.i.d. placement of `n` nodes over a `field_size` × `field_size`
/// square, with the sink drawn uniformly among them.
pub fn generate_topology(n: usize, field_size: f64, tx_range: f64, seed: u64) -> Topology {
    assert!(n >= 2, "a topology needs at least two nodes");
    let mut rng = rng_stream(seed, Stream::Positions);
    let positions = (0..n)
        .map(|_| Position::new(rng.gen_range(0.0..field_size), rng.gen_range(0.0..field_size)))
        .collect();
    let sink = pick_sink(n, &mut rng_stream(seed, Stream::Sink));
    Topology { positions, sink, field_size, tx_range, seed }
}

pub(crate) fn pick_sink(n: usize, rng: &mut ChaCha8Rng) -> NodeId {
    rng.gen_range(0..n)
}

impl Topology {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// For each node, the sorted ids of nodes within transmission range.
    pub fn neighbor_lists(&self) -> Vec<Vec<NodeId>> {
        let n = self.positions.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && distance(self.positions[i], self.positions[j]) <= self.tx_range)
                    .collect()
            })
            .collect()
    }

    pub fn mean_degree(&self) -> f64 {
        let lists = self.neighbor_lists();
        lists.iter().map(Vec::len).sum::<usize>() as f64 / lists.len() as f64
    }

    /// Breadth-first hop distances from `from` over the connectivity graph.
    pub fn hop_distances(&self, from: NodeId) -> Vec<Option<u32>> {
        let lists = self.neighbor_lists();
        let mut dist = vec![None; self.positions.len()];
        let mut frontier = std::collections::VecDeque::from([from]);
        dist[from] = Some(0);
        while let Some(u) = frontier.pop_front() {
            let d = dist[u].expect("visited");
            for &v in &lists[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    frontier.push_back(v);
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_one_sink() {
        let t = generate_topology(2, 1000.0, 250.0, 9);
        assert_eq!(t.len(), 2);
        assert!(t.sink < 2);
    }

    #[test]
    fn same_seed_same_topology() {
        let a = generate_topology(50, 1000.0, 250.0, 17);
        let b = generate_topology(50, 1000.0, 250.0, 17);
        assert_eq!(a, b);
        let c = generate_topology(50, 1000.0, 250.0, 18);
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn positions_inside_field() {
        let t = generate_topology(200, 1000.0, 250.0, 3);
        assert!(t.positions.iter().all(|p| (0.0..1000.0).contains(&p.x) && (0.0..1000.0).contains(&p.y)));
    }

    #[test]
    fn neighbor_lists_are_symmetric() {
        let t = generate_topology(60, 1000.0, 250.0, 5);
        let lists = t.neighbor_lists();
        for (i, l) in lists.iter().enumerate() {
            for &j in l {
                assert!(lists[j].contains(&i));
            }
        }
    }

    #[test]
    fn bfs_on_a_line() {
        let t = Topology {
            positions: (0..4).map(|i| Position::new(200.0 * i as f64, 0.0)).collect(),
            sink: 3,
            field_size: 1000.0,
            tx_range: 250.0,
            seed: 0,
        };
        assert_eq!(t.hop_distances(0), vec![Some(0), Some(1), Some(2), Some(3)]);
    }
}
