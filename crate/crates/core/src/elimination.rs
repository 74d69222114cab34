//! Greedy min-fill triangulation and variable elimination.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{DbnError, Result};
use crate::factor::Factor;
use crate::model::{CptRole, DiscreteDbn, Lag};

/// Undirected graph over variable ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractionGraph {
    adj: BTreeMap<usize, BTreeSet<usize>>,
}

impl InteractionGraph {
    pub fn add_node(&mut self, v: usize) {
        self.adj.entry(v).or_default();
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj.entry(a).or_default().insert(b);
            self.adj.entry(b).or_default().insert(a);
        }
    }

    /// Connects every pair in `vars`.
    pub fn add_clique(&mut self, vars: &[usize]) {
        for &v in vars {
            self.add_node(v);
        }
        for (k, &a) in vars.iter().enumerate() {
            for &b in &vars[k + 1..] {
                self.add_edge(a, b);
            }
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.adj.keys().copied()
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[&v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn from_factors<'a>(factors: impl IntoIterator<Item = &'a Factor>) -> Self {
        let mut g = InteractionGraph::default();
        for f in factors {
            g.add_clique(f.vars());
        }
        g
    }

    fn fill_count(&self, v: usize) -> usize {
        let nbrs: Vec<usize> = self.adj[&v].iter().copied().collect();
        let mut missing = 0;
        for (k, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[k + 1..] {
                if !self.has_edge(a, b) {
                    missing += 1;
                }
            }
        }
        missing
    }

    /// Removes `v`, connecting its neighbours. Returns the eliminated clique
    /// (`v` first) and the fill edges added.
    fn eliminate(&mut self, v: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
        let nbrs: Vec<usize> = self.adj.remove(&v).unwrap_or_default().into_iter().collect();
        let mut fill = Vec::new();
        for &u in &nbrs {
            self.adj.get_mut(&u).unwrap().remove(&v);
        }
        for (k, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[k + 1..] {
                if !self.has_edge(a, b) {
                    self.add_edge(a, b);
                    fill.push((a, b));
                }
            }
        }
        let mut clique = vec![v];
        clique.extend(nbrs);
        (clique, fill)
    }
}

/// Greedy min-fill order over `eliminate` (other vertices stay); ties go to
/// the lowest variable id.
pub fn min_fill_order(graph: &InteractionGraph, eliminate: &BTreeSet<usize>) -> Vec<usize> {
    let mut g = graph.clone();
    let mut remaining: BTreeSet<usize> = eliminate.iter().copied().filter(|v| g.adj.contains_key(v)).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let best = *remaining.iter().min_by_key(|&&v| (g.fill_count(v), v)).unwrap();
        g.eliminate(best);
        remaining.remove(&best);
        order.push(best);
    }
    order
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangulation {
    pub order: Vec<usize>,
    /// Maximal cliques of the triangulated graph, each sorted.
    pub cliques: Vec<Vec<usize>>,
    pub fill_edges: Vec<(usize, usize)>,
}

/// Eliminates every vertex by greedy min-fill and collects the maximal cliques.
pub fn triangulate(graph: &InteractionGraph) -> Triangulation {
    let all: BTreeSet<usize> = graph.nodes().collect();
    let order = min_fill_order(graph, &all);
    let mut g = graph.clone();
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    let mut fill_edges = Vec::new();
    for &v in &order {
        let (mut clique, fill) = g.eliminate(v);
        fill_edges.extend(fill);
        clique.sort_unstable();
        cliques.push(clique);
    }
    let maximal = cliques
        .iter()
        .filter(|c| !cliques.iter().any(|d| d.len() > c.len() && c.iter().all(|v| d.contains(v))))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    Triangulation { order, cliques: maximal, fill_edges }
}

/// Moral graph of the two-slice network: previous-slice hidden nodes get ids
/// `0..n`, current-slice nodes (hidden and observed) get `n..2n`.
pub fn two_slice_moral_graph(dbn: &DiscreteDbn) -> InteractionGraph {
    let n = dbn.num_nodes();
    let mut g = InteractionGraph::default();
    for &h in dbn.hidden() {
        g.add_node(h);
    }
    for i in 0..n {
        let mut family: Vec<usize> = dbn
            .cpt(i, CptRole::Transition)
            .parents
            .iter()
            .map(|p| match p.lag {
                Lag::Previous => p.node,
                Lag::Current => n + p.node,
            })
            .collect();
        family.push(n + i);
        g.add_clique(&family);
    }
    g
}

/// Sums all variables except `query` out of the product of `factors`,
/// eliminating in greedy min-fill order. The result is ordered as `query`.
/// Fails before any arithmetic if an intermediate factor would exceed `cap`
/// entries; `name` labels variables in the diagnostic.
pub fn eliminate_to(
    factors: Vec<Factor>,
    query: &[usize],
    cards: &BTreeMap<usize, usize>,
    cap: usize,
    name: impl Fn(usize) -> String,
) -> Result<Factor> {
    let graph = InteractionGraph::from_factors(&factors);
    let hidden_vars: BTreeSet<usize> = graph.nodes().filter(|v| !query.contains(v)).collect();
    let order = min_fill_order(&graph, &hidden_vars);

    let mut sim = graph.clone();
    for &v in &order {
        let (clique, _) = sim.eliminate(v);
        let size: u128 = clique.iter().map(|u| cards[u] as u128).product();
        if size > cap as u128 {
            let members: Vec<String> = clique.iter().map(|&u| name(u)).collect();
            return Err(DbnError::CapExceeded {
                what: format!("elimination factor over {{{}}} when eliminating {}", members.join(", "), name(v)),
                size,
                cap: cap as u128,
            });
        }
    }

    let mut pool = factors;
    for v in order {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) = pool.into_iter().partition(|f| f.contains(v));
        pool = rest;
        let merged = bucket.iter().fold(Factor::unit(), |acc, f| acc.product(f));
        pool.push(merged.sum_out(v));
    }
    let query_cards: Vec<usize> = query.iter().map(|v| cards[v]).collect();
    let base = Factor::constant(query.to_vec(), query_cards, 1.0);
    let joint = pool.iter().fold(base, |acc, f| acc.product(f));
    Ok(joint.marginal(query))
}
