//! Network graphs: nodes, undirected links with up/down state, the text
//! file format, and the two built-in 6x6 benchmark grids.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Highest node degree supported. Routing decisions record the set of
/// usable links as a 64-bit mask.
pub const MAX_DEGREE: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge ({u}, {v}) references a node outside 0..{node_count}")]
    EndpointOutOfRange { u: usize, v: usize, node_count: usize },
    #[error("edge ({0}, {1}) is declared twice")]
    DuplicateEdge(usize, usize),
    #[error("node {node} has degree {degree}, above the supported maximum of {MAX_DEGREE}")]
    DegreeTooHigh { node: usize, degree: usize },
    #[error("no edge ({0}, {1}) in topology")]
    UnknownEdge(usize, usize),
    #[error("topology must have at least one node")]
    Empty,
}

/// Unordered node pair, normalized so that `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    a: usize,
    b: usize,
}

impl Edge {
    pub fn new(u: usize, v: usize) -> Self {
        if u <= v {
            Edge { a: u, b: v }
        } else {
            Edge { a: v, b: u }
        }
    }

    pub fn endpoints(self) -> (usize, usize) {
        (self.a, self.b)
    }

    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other(self, node: usize) -> Option<usize> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkState {
    Up,
    Down,
}

/// Immutable undirected network graph.
///
/// Each node owns an ordered list of incident links (sorted by neighbor
/// index). A link's position in that list is its *link index* at that
/// node, which is the action coordinate used by routing agents. Link
/// indices never change when links go down; availability is queried
/// separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    links: BTreeMap<Edge, LinkState>,
    // adjacency[n] = all neighbors of n (up or down), ascending
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology with every link up.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        if node_count == 0 {
            return Err(TopologyError::Empty);
        }
        let mut links = BTreeMap::new();
        for &(u, v) in edges {
            if u == v {
                return Err(TopologyError::SelfLoop(u, v));
            }
            if u >= node_count || v >= node_count {
                return Err(TopologyError::EndpointOutOfRange { u, v, node_count });
            }
            if links.insert(Edge::new(u, v), LinkState::Up).is_some() {
                return Err(TopologyError::DuplicateEdge(u, v));
            }
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for e in links.keys() {
            let (a, b) = e.endpoints();
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for (node, adj) in adjacency.iter_mut().enumerate() {
            adj.sort_unstable();
            if adj.len() > MAX_DEGREE {
                return Err(TopologyError::DegreeTooHigh {
                    node,
                    degree: adj.len(),
                });
            }
        }
        Ok(Topology {
            node_count,
            links,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.links.len()
    }

    /// All edges in ascending order, regardless of state.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.links.keys().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.links.contains_key(&Edge::new(u, v))
    }

    pub fn link_state(&self, u: usize, v: usize) -> Option<LinkState> {
        self.links.get(&Edge::new(u, v)).copied()
    }

    pub fn is_up(&self, u: usize, v: usize) -> bool {
        self.link_state(u, v) == Some(LinkState::Up)
    }

    /// Neighbors reachable over "up" links, ascending.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[node]
            .iter()
            .copied()
            .filter(move |&v| self.is_up(node, v))
    }

    /// Every neighbor regardless of link state, ascending. Position in this
    /// slice is the link index.
    pub fn links_of(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Link index of the link `node`–`neighbor` at `node`.
    pub fn link_index(&self, node: usize, neighbor: usize) -> Option<usize> {
        self.adjacency[node].binary_search(&neighbor).ok()
    }

    /// Bit `i` set iff link index `i` at `node` is up.
    pub fn available_mask(&self, node: usize) -> u64 {
        self.adjacency[node]
            .iter()
            .enumerate()
            .filter(|(_, &v)| self.is_up(node, v))
            .fold(0u64, |m, (i, _)| m | (1 << i))
    }

    /// Returns a copy with one link's state replaced.
    pub fn set_link_state(&self, u: usize, v: usize, state: LinkState) -> Result<Topology, TopologyError> {
        let edge = Edge::new(u, v);
        if !self.links.contains_key(&edge) {
            return Err(TopologyError::UnknownEdge(u, v));
        }
        let mut next = self.clone();
        next.links.insert(edge, state);
        Ok(next)
    }

    /// Reachability mask from `start` over up links (`start` included).
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(n) = stack.pop() {
            for v in self.neighbors(n) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    pub fn is_connected(&self) -> bool {
        self.reachable_from(0).into_iter().all(|r| r)
    }

    /// Parses the line-oriented topology format:
    ///
    /// ```text
    /// # comment
    /// nodes 3
    /// edge 0 1
    /// edge 1 2
    /// ```
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let mut node_count = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| TopologyError::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap_or_default();
            let args = words
                .map(|w| {
                    w.parse::<usize>()
                        .map_err(|_| err(&format!("expected a node number, got `{w}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            match (keyword, node_count) {
                ("nodes", None) => match args[..] {
                    [n] => node_count = Some(n),
                    _ => return Err(err("`nodes` takes exactly one count")),
                },
                ("nodes", Some(_)) => return Err(err("`nodes` declared more than once")),
                ("edge", Some(_)) => match args[..] {
                    [u, v] => edges.push((u, v)),
                    _ => return Err(err("`edge` takes exactly two endpoints")),
                },
                ("edge", None) => return Err(err("`edge` before `nodes` declaration")),
                (other, _) => return Err(err(&format!("unknown keyword `{other}`"))),
            }
        }
        let n = node_count.ok_or(TopologyError::Parse {
            line: 0,
            msg: "missing `nodes` line".into(),
        })?;
        Topology::new(n, &edges)
    }

    /// Renders in the text format accepted by [`Topology::parse`]. Link
    /// state is not part of the format.
    pub fn to_text(&self) -> String {
        let mut out = format!("nodes {}\n", self.node_count);
        for e in self.edges() {
            let (a, b) = e.endpoints();
            out.push_str(&format!("edge {a} {b}\n"));
        }
        out
    }
}

/// Shipped fixture for the original grid.
pub const GRID_ORIGINAL_TEXT: &str = include_str!("../data/grid6x6_original.net");
/// Shipped fixture for the modified grid.
pub const GRID_MODIFIED_TEXT: &str = include_str!("../data/grid6x6_modified.net");

const GRID_SIDE: usize = 6;

// Internal grid links left out to make the halves irregular.
const GRID_OMITTED: [(usize, usize); 4] = [(7, 8), (25, 31), (9, 15), (28, 29)];

fn grid_halves() -> Vec<(usize, usize)> {
    let idx = |r: usize, c: usize| r * GRID_SIDE + c;
    let mut edges = Vec::new();
    for cols in [0..3, 3..6] {
        let last = cols.end - 1;
        for r in 0..GRID_SIDE {
            for c in cols.clone() {
                if c != last {
                    edges.push((idx(r, c), idx(r, c + 1)));
                }
                if r + 1 < GRID_SIDE {
                    edges.push((idx(r, c), idx(r + 1, c)));
                }
            }
        }
    }
    edges.retain(|e| !GRID_OMITTED.contains(e));
    edges
}

/// The irregular 6x6 grid: two 18-node halves (columns 0-2 and 3-5)
/// joined by the bridge links 20–21 and 32–33.
pub fn build_grid_original() -> Topology {
    let mut edges = grid_halves();
    edges.extend([(20, 21), (32, 33)]);
    Topology::new(36, &edges).expect("built-in grid is valid")
}

/// The original grid with link 32–33 replaced by 20–27, so both bridges
/// leave from node 20.
pub fn build_grid_modified() -> Topology {
    let mut edges = grid_halves();
    edges.extend([(20, 21), (20, 27)]);
    Topology::new(36, &edges).expect("built-in grid is valid")
}

/// Looks up a built-in topology by name.
pub fn builtin(name: &str) -> Option<Topology> {
    match name {
        "original" | "grid6x6-original" | "6x6" => Some(build_grid_original()),
        "modified" | "grid6x6-modified" | "6x6-modified" => Some(build_grid_modified()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 2] = ["original", "modified"];
