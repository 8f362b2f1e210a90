use std::collections::HashSet;

use super::Dfa;

/// Hopcroft minimization. Unreachable states are dropped and the result is
/// renumbered breadth-first from the initial state, so two equivalent DFAs
/// over the same alphabet minimize to identical tables.
pub fn minimize_dfa(dfa: &Dfa) -> Dfa {
    let k = dfa.n_letters();
    let reach = dfa.reachable_states();
    let mut local = vec![usize::MAX; dfa.n_states()];
    for (i, &q) in reach.iter().enumerate() {
        local[q] = i;
    }
    let n = reach.len();
    let next = |i: usize, l: usize| local[dfa.delta[reach[i] * k + l]];

    // inverse[l][t] = sources reaching t on letter l
    let mut inverse = vec![vec![Vec::new(); n]; k];
    for i in 0..n {
        for (l, inv) in inverse.iter_mut().enumerate() {
            inv[next(i, l)].push(i);
        }
    }

    let (acc, rej): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| dfa.accepting[reach[i]]);
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of = vec![0usize; n];
    for b in [acc, rej] {
        if !b.is_empty() {
            for &i in &b {
                block_of[i] = blocks.len();
            }
            blocks.push(b);
        }
    }

    let mut work: Vec<(usize, usize)> = Vec::new();
    let mut queued: HashSet<(usize, usize)> = HashSet::new();
    if blocks.len() == 2 {
        let smaller = if blocks[0].len() <= blocks[1].len() { 0 } else { 1 };
        for l in 0..k {
            work.push((smaller, l));
            queued.insert((smaller, l));
        }
    }

    let mut marked = vec![false; n];
    while let Some((a, l)) = work.pop() {
        queued.remove(&(a, l));
        let preimage: Vec<usize> = blocks[a]
            .iter()
            .flat_map(|&t| inverse[l][t].iter().copied())
            .collect();
        let mut touched: Vec<usize> = Vec::new();
        for &s in &preimage {
            if !marked[s] {
                marked[s] = true;
                let b = block_of[s];
                if !touched.contains(&b) {
                    touched.push(b);
                }
            }
        }
        for y in touched {
            let (inside, outside): (Vec<usize>, Vec<usize>) =
                blocks[y].iter().partition(|&&s| marked[s]);
            if outside.is_empty() {
                continue;
            }
            let z = blocks.len();
            for &s in &outside {
                block_of[s] = z;
            }
            let z_small = outside.len() < inside.len();
            blocks[y] = inside;
            blocks.push(outside);
            for c in 0..k {
                if queued.contains(&(y, c)) {
                    work.push((z, c));
                    queued.insert((z, c));
                } else {
                    let pick = if z_small { z } else { y };
                    work.push((pick, c));
                    queued.insert((pick, c));
                }
            }
        }
        for s in preimage {
            marked[s] = false;
        }
    }

    // Breadth-first renumbering of blocks from the initial state's block.
    let mut order = vec![usize::MAX; blocks.len()];
    let mut reps: Vec<usize> = Vec::new();
    order[block_of[0]] = 0;
    reps.push(block_of[0]);
    let mut head = 0;
    while head < reps.len() {
        let b = reps[head];
        head += 1;
        let i = blocks[b][0];
        for l in 0..k {
            let t = block_of[next(i, l)];
            if order[t] == usize::MAX {
                order[t] = reps.len();
                reps.push(t);
            }
        }
    }

    let mut delta = Vec::with_capacity(reps.len() * k);
    let mut accepting = Vec::with_capacity(reps.len());
    let mut annotations = Vec::with_capacity(reps.len());
    for &b in &reps {
        let i = blocks[b][0];
        accepting.push(dfa.accepting[reach[i]]);
        for l in 0..k {
            delta.push(order[block_of[next(i, l)]]);
        }
        if let Some(a) = &dfa.annotations {
            let first = blocks[b].iter().map(|&s| reach[s]).min().expect("nonempty block");
            annotations.push(a[first].clone());
        }
    }
    let out = Dfa {
        name: dfa.name.clone(),
        alphabet: dfa.alphabet.clone(),
        initial: 0,
        accepting,
        delta,
        annotations: dfa.annotations.as_ref().map(|_| annotations),
    };
    debug_assert!(out.validate().is_ok());
    out
}
