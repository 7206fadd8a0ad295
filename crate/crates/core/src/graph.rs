//! Immutable undirected simple graph in compressed sparse row form.
//!
//! ```text
//! offsets[0] = 0
//! offsets[v+1] = offsets[v] + degree(v)
//! neighbors(v) = targets[offsets[v] .. offsets[v+1]]   (strictly increasing)
//! offsets[n] = 2 * num_edges
//! ```

use crate::error::{FafError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    num_edges: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Graph {
    /// Builds a graph from arbitrary (possibly directed, duplicated or looping)
    /// edge pairs. Edges are symmetrized, self-loops dropped and duplicates
    /// collapsed.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            for index in [u, v] {
                if index >= num_nodes {
                    return Err(FafError::IndexOutOfRange { index, num_nodes });
                }
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }

        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }

        Ok(Self {
            num_nodes,
            num_edges: targets.len() / 2,
            offsets,
            targets,
        })
    }

    /// Graph with `num_nodes` isolated nodes.
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            num_edges: 0,
            offsets: vec![0; num_nodes + 1],
            targets: Vec::new(),
        }
    }

    /// Adopts raw CSR arrays after checking every structural invariant.
    pub fn from_csr(offsets: Vec<usize>, targets: Vec<usize>) -> Result<Self> {
        if offsets.is_empty() || offsets[0] != 0 {
            return Err(FafError::InvalidData(
                "csr offsets must start at 0".to_string(),
            ));
        }
        let num_nodes = offsets.len() - 1;
        if offsets[num_nodes] != targets.len() || !targets.len().is_multiple_of(2) {
            return Err(FafError::InvalidData(format!(
                "csr offsets end at {} but {} targets are stored",
                offsets[num_nodes],
                targets.len()
            )));
        }
        let graph = Self {
            num_nodes,
            num_edges: targets.len() / 2,
            offsets,
            targets,
        };
        graph.validate()?;
        Ok(graph)
    }

    fn validate(&self) -> Result<()> {
        for v in 0..self.num_nodes {
            if self.offsets[v] > self.offsets[v + 1] {
                return Err(FafError::InvalidData(format!(
                    "csr offsets decrease at node {v}"
                )));
            }
            let list = self.neighbors(v);
            for (i, &u) in list.iter().enumerate() {
                if u >= self.num_nodes {
                    return Err(FafError::IndexOutOfRange {
                        index: u,
                        num_nodes: self.num_nodes,
                    });
                }
                if u == v {
                    return Err(FafError::InvalidData(format!("self-loop at node {v}")));
                }
                if i > 0 && list[i - 1] >= u {
                    return Err(FafError::InvalidData(format!(
                        "neighbors of node {v} are not strictly increasing"
                    )));
                }
            }
        }
        for (u, v) in self.directed_edges() {
            if self.neighbors(v).binary_search(&u).is_err() {
                return Err(FafError::InvalidData(format!(
                    "edge {u}->{v} has no reverse entry"
                )));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Sorted neighbor list of `v`. Panics if `v` is out of range.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        if v >= self.num_nodes {
            return Err(FafError::IndexOutOfRange {
                index: v,
                num_nodes: self.num_nodes,
            });
        }
        Ok(self.offsets[v + 1] - self.offsets[v])
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && v < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Every stored (source, target) pair; each undirected edge appears twice.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |v| self.neighbors(v).iter().map(move |&u| (v, u)))
    }

    /// Undirected edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.directed_edges().filter(|&(u, v)| u < v)
    }

    /// Subgraph on the same node set keeping the edges accepted by `keep`.
    pub fn filter_edges<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(usize, usize) -> bool,
    {
        let kept: Vec<(usize, usize)> = self.edges().filter(|&(u, v)| keep(u, v)).collect();
        Graph::from_edges(self.num_nodes, kept).expect("subgraph indices are in range")
    }
}
