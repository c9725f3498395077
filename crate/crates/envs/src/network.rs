//! Undirected simple graphs and the three random-graph generators.

use ats_core::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Undirected graph without self-loops or multi-edges, stored as sorted
/// adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    /// Builds a graph from an edge list, dropping self-loops and duplicates.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            if a != b {
                adj[a].push(b as u32);
                adj[b].push(a as u32);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Self { adj }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&(b as u32)).is_ok()
    }

    /// Each edge once, as `(low, high)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Embeds `sub` (indexed `0..members.len()`) on the given node ids.
    pub fn embed(&mut self, sub: &Graph, members: &[usize]) {
        for (a, b) in sub.edges() {
            let (x, y) = (members[a], members[b]);
            self.adj[x].push(y as u32);
            self.adj[y].push(x as u32);
        }
        for &m in members {
            self.adj[m].sort_unstable();
            self.adj[m].dedup();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkKind {
    #[serde(rename = "BA")]
    BarabasiAlbert,
    #[serde(rename = "ER")]
    ErdosRenyi,
    #[serde(rename = "WS")]
    WattsStrogatz,
}

impl NetworkKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::BarabasiAlbert => "BA",
            Self::ErdosRenyi => "ER",
            Self::WattsStrogatz => "WS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkParams {
    /// Edges per arriving node (BA).
    pub ba_m: usize,
    /// Target mean degree; the edge probability is `mean_degree / (n - 1)` (ER).
    pub er_mean_degree: f64,
    /// Lattice degree, even (WS).
    pub ws_k: usize,
    /// Rewiring probability (WS).
    pub ws_rewire: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            ba_m: 4,
            er_mean_degree: 8.0,
            ws_k: 8,
            ws_rewire: 0.1,
        }
    }
}

/// Generates a graph on `n` nodes with the exact parameters in `params`.
pub fn generate(kind: NetworkKind, n: usize, params: &NetworkParams, rng: &mut impl Rng) -> Result<Graph> {
    match kind {
        NetworkKind::BarabasiAlbert => barabasi_albert(n, params.ba_m, rng),
        NetworkKind::ErdosRenyi => {
            let p = if n > 1 { params.er_mean_degree / (n - 1) as f64 } else { 0.0 };
            erdos_renyi(n, p.min(1.0), rng)
        }
        NetworkKind::WattsStrogatz => watts_strogatz(n, params.ws_k, params.ws_rewire, rng),
    }
}

/// Like [`generate`] but shrinks parameters that do not fit a small group:
/// `m` and `k` are capped below the group size (and `k` kept even).
pub fn generate_clamped(kind: NetworkKind, n: usize, params: &NetworkParams, rng: &mut impl Rng) -> Result<Graph> {
    if n <= 1 {
        return Ok(Graph::empty(n));
    }
    let mut p = *params;
    p.ba_m = p.ba_m.min(n - 1);
    let k = p.ws_k.min(n - 1);
    p.ws_k = k - k % 2;
    match kind {
        NetworkKind::BarabasiAlbert if p.ba_m == 0 => Ok(Graph::empty(n)),
        NetworkKind::WattsStrogatz if p.ws_k == 0 => Ok(Graph::empty(n)),
        _ => generate(kind, n, &p, rng),
    }
}

/// Preferential attachment. Starts from a clique on `m + 1` nodes; every later
/// node links to `m` distinct earlier nodes chosen with probability
/// proportional to degree. Edge count is `m (m + 1) / 2 + m (n - m - 1)`.
pub fn barabasi_albert(n: usize, m: usize, rng: &mut impl Rng) -> Result<Graph> {
    if m == 0 || m >= n {
        return Err(Error::Domain(format!("BA needs 1 <= m < n, got m={m}, n={n}")));
    }
    let mut edges = Vec::with_capacity(m * n);
    // Every edge endpoint once, so a uniform pick is degree-proportional.
    let mut ends: Vec<usize> = Vec::with_capacity(2 * m * n);
    for a in 0..=m {
        for b in 0..a {
            edges.push((b, a));
            ends.push(a);
            ends.push(b);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for v in (m + 1)..n {
        chosen.clear();
        while chosen.len() < m {
            let u = ends[rng.random_range(0..ends.len())];
            if !chosen.contains(&u) {
                chosen.push(u);
            }
        }
        for &u in &chosen {
            edges.push((u, v));
            ends.push(u);
            ends.push(v);
        }
    }
    Ok(Graph::from_edges(n, edges))
}

/// Each of the `n (n - 1) / 2` pairs independently with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("ER edge probability {p} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    Ok(Graph::from_edges(n, edges))
}

/// Ring lattice where each node links to its `k / 2` nearest neighbors on each
/// side; every lattice edge `(i, i + j)` is then rewired with probability `p`
/// to a uniformly chosen new endpoint, avoiding self-loops and duplicates.
pub fn watts_strogatz(n: usize, k: usize, p: f64, rng: &mut impl Rng) -> Result<Graph> {
    if k == 0 || k % 2 == 1 || k >= n {
        return Err(Error::Domain(format!("WS needs an even k with 0 < k < n, got k={k}, n={n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("WS rewiring probability {p} outside [0, 1]")));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(k); n];
    let link = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        adj[a].push(b);
        adj[b].push(a);
    };
    for i in 0..n {
        for j in 1..=k / 2 {
            link(&mut adj, i, (i + j) % n);
        }
    }
    if p > 0.0 {
        for j in 1..=k / 2 {
            for i in 0..n {
                if rng.random::<f64>() >= p {
                    continue;
                }
                let old = (i + j) % n;
                if adj[i].len() >= n - 1 || !adj[i].contains(&old) {
                    continue;
                }
                let new = loop {
                    let c = rng.random_range(0..n);
                    if c != i && !adj[i].contains(&c) {
                        break c;
                    }
                };
                adj[i].retain(|&x| x != old);
                adj[old].retain(|&x| x != i);
                link(&mut adj, i, new);
            }
        }
    }
    Ok(Graph::from_edges(
        n,
        adj.iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().map(move |&b| (a, b))),
    ))
}

/// Random partition of `0..n` into groups, listed as member indices.
pub fn shuffled_groups(sizes: &[usize], rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    let mut ids: Vec<usize> = (0..total).collect();
    ids.shuffle(rng);
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(ids[start..start + s].to_vec());
        start += s;
    }
    out
}
