//! Connected undirected topologies over agents `1..=P`, with seeded
//! random generators and an edge-list file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netsim::AgentId;

/// Random generators retry this many times before reporting failure to
/// produce a connected graph.
const MAX_ATTEMPTS: usize = 100;

/// A connected undirected graph over agents `1..=P`.
///
/// Invariants established at construction: no self-loops, no duplicate
/// edges, every pair of agents connected by some path.
#[derive(Clone, Debug)]
pub struct Topology {
    neighbors: Vec<Vec<AgentId>>,      // by agent index, each sorted ascending
    edges: Vec<(AgentId, AgentId)>,    // lower id first, lexicographic order
}

impl Topology {
    pub fn from_edges(
        agents: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if agents == 0 {
            return Err(Error::invalid("at least one agent is required"));
        }
        let mut canonical: Vec<(AgentId, AgentId)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop at agent {a}")));
            }
            if !(1..=agents).contains(&a) || !(1..=agents).contains(&b) {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) references an agent outside 1..={agents}"
                )));
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            canonical.push((AgentId(lo), AgentId(hi)));
        }
        canonical.sort_unstable();
        if canonical.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate edge"));
        }

        let mut neighbors = vec![Vec::new(); agents];
        for &(a, b) in &canonical {
            neighbors[a.index()].push(b);
            neighbors[b.index()].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let topology = Topology {
            neighbors,
            edges: canonical,
        };
        if !topology.is_connected() {
            return Err(Error::invalid("topology is not connected"));
        }
        Ok(topology)
    }

    /// The line `1 − 2 − ... − P`.
    pub fn path(agents: usize) -> Result<Self> {
        Self::from_edges(agents, (1..agents).map(|a| (a, a + 1)))
    }

    /// All pairs connected.
    pub fn complete(agents: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 1..=agents {
            for b in (a + 1)..=agents {
                edges.push((a, b));
            }
        }
        Self::from_edges(agents, edges)
    }

    /// Erdős–Rényi G(P, prob): each pair joined independently with the
    /// given probability.
    ///
    /// Each pair consumes one uniform draw in a fixed order, so for a
    /// fixed seed a larger probability yields a superset of the edges.
    /// Disconnected samples are redrawn from the continuing stream; after
    /// 100 failures the generator reports an error.
    pub fn erdos_renyi(agents: usize, prob: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::invalid(format!(
                "edge probability {prob} outside [0, 1]"
            )));
        }
        if agents == 0 {
            return Err(Error::invalid("at least one agent is required"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_ATTEMPTS {
            let mut edges = Vec::new();
            for a in 1..=agents {
                for b in (a + 1)..=agents {
                    if rng.random::<f64>() < prob {
                        edges.push((a, b));
                    }
                }
            }
            if let Ok(topology) = Self::from_edges(agents, edges) {
                return Ok(topology);
            }
        }
        Err(Error::Generation(format!(
            "no connected G({agents}, {prob}) sample in {MAX_ATTEMPTS} attempts (seed {seed})"
        )))
    }

    /// Random geometric graph: agents at uniform points in the unit
    /// square, joined when their distance is at most `radius`.
    ///
    /// Resamples like [`Topology::erdos_renyi`] when disconnected.
    pub fn random_geometric(agents: usize, radius: f64, seed: u64) -> Result<Self> {
        if radius < 0.0 {
            return Err(Error::invalid("radius must be non-negative"));
        }
        if agents == 0 {
            return Err(Error::invalid("at least one agent is required"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r2 = radius * radius;
        for _ in 0..MAX_ATTEMPTS {
            let points: Vec<(f64, f64)> = (0..agents)
                .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let mut edges = Vec::new();
            for a in 0..agents {
                for b in (a + 1)..agents {
                    let dx = points[a].0 - points[b].0;
                    let dy = points[a].1 - points[b].1;
                    if dx * dx + dy * dy <= r2 {
                        edges.push((a + 1, b + 1));
                    }
                }
            }
            if let Ok(topology) = Self::from_edges(agents, edges) {
                return Ok(topology);
            }
        }
        Err(Error::Generation(format!(
            "no connected geometric({agents}, {radius}) sample in {MAX_ATTEMPTS} attempts (seed {seed})"
        )))
    }

    pub fn agents(&self) -> usize {
        self.neighbors.len()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> {
        (1..=self.agents()).map(AgentId)
    }

    pub fn neighbors(&self, agent: AgentId) -> &[AgentId] {
        &self.neighbors[agent.index()]
    }

    pub fn degree(&self, agent: AgentId) -> usize {
        self.neighbors[agent.index()].len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list: lower id first, lexicographic order.
    pub fn edges(&self) -> &[(AgentId, AgentId)] {
        &self.edges
    }

    pub fn contains_edge(&self, a: AgentId, b: AgentId) -> bool {
        a != b
            && a.0 >= 1
            && a.0 <= self.agents()
            && self.neighbors[a.index()].binary_search(&b).is_ok()
    }

    fn is_connected(&self) -> bool {
        let p = self.agents();
        let mut seen = vec![false; p];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for nb in &self.neighbors[i] {
                if !seen[nb.index()] {
                    seen[nb.index()] = true;
                    count += 1;
                    stack.push(nb.index());
                }
            }
        }
        count == p
    }

    /// Writes the `diht-topology v1` edge-list format: a header with the
    /// agent and edge counts, then one edge per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{TOPOLOGY_MAGIC}")?;
        writeln!(w, "agents {}", self.agents())?;
        writeln!(w, "edges {}", self.edge_count())?;
        for &(a, b) in &self.edges {
            writeln!(w, "{a} {b}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r)
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let magic = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::format("empty topology file")),
        };
        if magic.trim() != TOPOLOGY_MAGIC {
            return Err(Error::format(format!(
                "expected `{TOPOLOGY_MAGIC}` header, found `{magic}`"
            )));
        }
        let agents: usize = parse_header(&mut lines, "agents")?;
        let edge_count: usize = parse_header(&mut lines, "edges")?;
        let mut edges = Vec::with_capacity(edge_count);
        for line in lines {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let a: usize = parse_token(parts.next(), trimmed)?;
            let b: usize = parse_token(parts.next(), trimmed)?;
            if parts.next().is_some() {
                return Err(Error::format(format!("trailing tokens in `{trimmed}`")));
            }
            edges.push((a, b));
        }
        if edges.len() != edge_count {
            return Err(Error::format(format!(
                "header declares {edge_count} edges, found {}",
                edges.len()
            )));
        }
        Self::from_edges(agents, edges)
    }
}

const TOPOLOGY_MAGIC: &str = "diht-topology v1";

fn parse_header(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    key: &str,
) -> Result<usize> {
    let line = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::format("unexpected end of topology file")),
    };
    let rest = line
        .trim()
        .strip_prefix(key)
        .ok_or_else(|| Error::format(format!("expected `{key} <count>`, found `{line}`")))?;
    rest.trim()
        .parse()
        .map_err(|_| Error::format(format!("cannot parse `{rest}` as {key} count")))
}

fn parse_token(token: Option<&str>, line: &str) -> Result<usize> {
    token
        .ok_or_else(|| Error::format(format!("incomplete edge line `{line}`")))?
        .parse()
        .map_err(|_| Error::format(format!("cannot parse agent id in `{line}`")))
}
