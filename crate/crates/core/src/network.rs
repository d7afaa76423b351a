//! Win/loss network implied by rankings, strong connectivity and
//! pseudo-rankings against a ghost item.

use serde::{Deserialize, Serialize};

use crate::rankings::{RankingsTable, GHOST_ITEM};
use crate::scalar::Scalar;

/// `counts[(i, j)]`: weighted number of times item `i` is ranked strictly
/// above item `j`. Ties add nothing in either direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdjacencyMatrix<T> {
    items: Vec<String>,
    counts: Vec<T>,
}

impl<T: Scalar> AdjacencyMatrix<T> {
    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.counts[i * self.items.len() + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.items.len();
        &self.counts[i * n..(i + 1) * n]
    }

    /// Builds a matrix from explicit counts (row-major, `n * n`).
    pub fn from_counts(items: Vec<String>, counts: Vec<T>) -> Self {
        assert_eq!(counts.len(), items.len() * items.len());
        Self { items, counts }
    }

    /// Directed graph with edge `i -> j` whenever `i` beat `j` at least once.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).filter(|&j| self.get(i, j) > T::zero()).collect())
            .collect()
    }
}

pub fn adjacency<T: Scalar>(table: &RankingsTable<T>) -> AdjacencyMatrix<T> {
    let n = table.n_items();
    let mut counts = vec![T::zero(); n * n];
    for r in 0..table.n_rows() {
        if table.is_na(r) {
            continue;
        }
        let w = table.weight(r);
        let row = table.row(r);
        for i in 0..n {
            if row[i] == 0 {
                continue;
            }
            for j in 0..n {
                if row[j] != 0 && row[i] < row[j] {
                    counts[i * n + j] += w;
                }
            }
        }
    }
    AdjacencyMatrix {
        items: table.items().to_vec(),
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub items: Vec<String>,
    /// One-based cluster id per item; clusters are numbered in order of
    /// their first item.
    pub membership: Vec<usize>,
    pub csize: Vec<usize>,
    pub no: usize,
    pub strongly_connected: bool,
}

impl std::fmt::Display for ConnectivityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if !self.strongly_connected {
            writeln!(f, "Network of items is not strongly connected")?;
        }
        writeln!(f, "$membership")?;
        writeln!(f, "{}", self.items.join(" "))?;
        let ids: Vec<String> = self.membership.iter().map(|m| m.to_string()).collect();
        writeln!(f, "{}", ids.join(" "))?;
        writeln!(f, "$csize")?;
        let sizes: Vec<String> = self.csize.iter().map(|m| m.to_string()).collect();
        writeln!(f, "{}", sizes.join(" "))?;
        writeln!(f, "$no")?;
        write!(f, "no = {}", self.no)
    }
}

/// Strongly connected components of the win graph (iterative Tarjan).
pub fn connectivity<T: Scalar>(adj: &AdjacencyMatrix<T>) -> ConnectivityReport {
    let graph = adj.successors();
    let components = tarjan_scc(&graph);
    let n = graph.len();
    let mut comp_of = vec![0usize; n];
    for (c, members) in components.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    // renumber by first item
    let mut label = vec![0usize; components.len()];
    let mut next = 0;
    let mut membership = Vec::with_capacity(n);
    for v in 0..n {
        let c = comp_of[v];
        if label[c] == 0 {
            next += 1;
            label[c] = next;
        }
        membership.push(label[c]);
    }
    let mut csize = vec![0usize; next];
    for &m in &membership {
        csize[m - 1] += 1;
    }
    let report = ConnectivityReport {
        items: adj.items().to_vec(),
        membership,
        csize,
        no: next,
        strongly_connected: next == 1,
    };
    if !report.strongly_connected {
        log::info!("Network of items is not strongly connected");
    }
    report
}

/// Tarjan's algorithm with an explicit stack; returns components in the
/// order they are completed.
pub fn tarjan_scc(graph: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = graph.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;
    // (node, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        lowlink[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < graph[v].len() {
                let w = graph[v][*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    lowlink[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

/// Appends a ghost item and, for every real item `i`, the paired
/// comparisons `i > ghost` and `ghost > i`, each with weight `npseudo`.
/// With `npseudo == 0` the table is returned unchanged.
pub fn augment_with_pseudo_rankings<T: Scalar>(table: &RankingsTable<T>, npseudo: T) -> RankingsTable<T> {
    if !(npseudo > T::zero()) {
        return table.clone();
    }
    let j = table.n_items();
    let mut out = table.with_extra_item(GHOST_ITEM);
    for i in 0..j {
        let mut win = vec![0u32; j + 1];
        win[i] = 1;
        win[j] = 2;
        out.push_dense_row(win, npseudo);
        let mut loss = vec![0u32; j + 1];
        loss[i] = 2;
        loss[j] = 1;
        out.push_dense_row(loss, npseudo);
    }
    out
}
