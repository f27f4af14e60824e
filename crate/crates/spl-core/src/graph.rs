//! Index-based directed-graph primitives shared by the network and
//! reaction-network modules: Tarjan strongly connected components and
//! bounded simple-cycle enumeration.

use std::collections::BTreeSet;

/// Tarjan SCC over an adjacency list. Components are returned sorted by
/// their smallest member so the output is a deterministic function of the
/// graph alone, and each component's members are sorted ascending.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut state = TarjanState {
        next_index: 0,
        stack: Vec::new(),
        on_stack: vec![false; n],
        index: vec![None; n],
        lowlink: vec![0; n],
        components: Vec::new(),
    };
    for v in 0..n {
        if state.index[v].is_none() {
            strongconnect(v, adj, &mut state);
        }
    }
    for comp in &mut state.components {
        comp.sort_unstable();
    }
    state.components.sort_by_key(|c| c[0]);
    state.components
}

struct TarjanState {
    next_index: usize,
    stack: Vec<usize>,
    on_stack: Vec<bool>,
    index: Vec<Option<usize>>,
    lowlink: Vec<usize>,
    components: Vec<Vec<usize>>,
}

// Iterative so deep graphs cannot overflow the call stack.
fn strongconnect(root: usize, adj: &[Vec<usize>], st: &mut TarjanState) {
    // (node, next out-edge position)
    let mut call_stack: Vec<(usize, usize)> = vec![(root, 0)];
    st.index[root] = Some(st.next_index);
    st.lowlink[root] = st.next_index;
    st.next_index += 1;
    st.stack.push(root);
    st.on_stack[root] = true;

    while let Some(&(v, edge_pos)) = call_stack.last() {
        if edge_pos < adj[v].len() {
            let w = adj[v][edge_pos];
            call_stack.last_mut().unwrap().1 += 1;
            match st.index[w] {
                None => {
                    st.index[w] = Some(st.next_index);
                    st.lowlink[w] = st.next_index;
                    st.next_index += 1;
                    st.stack.push(w);
                    st.on_stack[w] = true;
                    call_stack.push((w, 0));
                }
                Some(widx) => {
                    if st.on_stack[w] {
                        st.lowlink[v] = st.lowlink[v].min(widx);
                    }
                }
            }
        } else {
            call_stack.pop();
            if let Some(&(parent, _)) = call_stack.last() {
                st.lowlink[parent] = st.lowlink[parent].min(st.lowlink[v]);
            }
            if st.lowlink[v] == st.index[v].unwrap() {
                let mut comp = Vec::new();
                loop {
                    let w = st.stack.pop().expect("tarjan stack underflow");
                    st.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                st.components.push(comp);
            }
        }
    }
}

/// Condensation of the graph under a component partition: edges between
/// distinct components, deduplicated.
pub fn condensation(adj: &[Vec<usize>], component_of: &[usize], n_components: usize) -> Vec<Vec<usize>> {
    let mut dag = vec![Vec::new(); n_components];
    for (u, outs) in adj.iter().enumerate() {
        let cu = component_of[u];
        for &v in outs {
            let cv = component_of[v];
            if cu != cv {
                dag[cu].push(cv);
            }
        }
    }
    for out in &mut dag {
        out.sort_unstable();
        out.dedup();
    }
    dag
}

/// All simple directed cycles of length in `[2, max_len]`, each reported once
/// as the rotation starting at its smallest node index, sorted by
/// `(length, node sequence)`.
///
/// Plain DFS restricted to nodes `>= start`: every cycle is discovered exactly
/// once, rooted at its minimal node. A Johnson-style blocked search is not
/// used because the length bound invalidates its unblocking invariant.
pub fn simple_cycles_bounded(adj: &[Vec<usize>], max_len: usize) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    let mut in_path = vec![false; n];

    // sorted neighbor lists make the DFS order (and thus discovery order)
    // independent of input edge order
    let sorted_adj: Vec<Vec<usize>> = adj
        .iter()
        .map(|outs| {
            let set: BTreeSet<usize> = outs.iter().copied().collect();
            set.into_iter().collect()
        })
        .collect();

    fn dfs(
        v: usize,
        start: usize,
        max_len: usize,
        adj: &[Vec<usize>],
        path: &mut Vec<usize>,
        in_path: &mut [bool],
        cycles: &mut Vec<Vec<usize>>,
    ) {
        for &w in &adj[v] {
            if w == start && path.len() >= 2 {
                cycles.push(path.clone());
            } else if w > start && !in_path[w] && path.len() < max_len {
                path.push(w);
                in_path[w] = true;
                dfs(w, start, max_len, adj, path, in_path, cycles);
                in_path[w] = false;
                path.pop();
            }
        }
    }

    for start in 0..n {
        path.push(start);
        in_path[start] = true;
        dfs(start, start, max_len, &sorted_adj, &mut path, &mut in_path, &mut cycles);
        in_path[start] = false;
        path.pop();
    }

    cycles.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    cycles
}
