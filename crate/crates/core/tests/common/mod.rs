#![allow(dead_code)]

use pcdag::graph::Dag;
use pcdag::nalgebra::DMatrix;

/// Every DAG on `p` nodes (each pair absent, forward or backward; cyclic ones dropped).
pub fn all_dags(p: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut arcs = Vec::new();
        for &(i, j) in &pairs {
            match code % 3 {
                1 => arcs.push((i, j)),
                2 => arcs.push((j, i)),
                _ => {}
            }
            code /= 3;
        }
        if let Ok(d) = Dag::from_arcs(p, &arcs) {
            out.push(d);
        }
    }
    out
}

/// d-separation of `a` and `b` given `s` by enumerating every simple path.
pub fn d_separated_by_paths(d: &Dag, a: usize, b: usize, s: &[usize]) -> bool {
    let p = d.p();
    let g = d.graph();
    let mut desc = vec![vec![false; p]; p];
    for (v, row) in desc.iter_mut().enumerate() {
        row[v] = true;
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for w in g.children(u) {
                if !row[w] {
                    row[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    let open = |path: &[usize]| {
        path.windows(3).all(|w| {
            let (x, v, y) = (w[0], w[1], w[2]);
            if g.is_directed(x, v) && g.is_directed(y, v) {
                (0..p).any(|u| desc[v][u] && s.contains(&u))
            } else {
                !s.contains(&v)
            }
        })
    };
    fn any_open(d: &Dag, path: &mut Vec<usize>, b: usize, open: &dyn Fn(&[usize]) -> bool) -> bool {
        let last = *path.last().unwrap();
        if last == b {
            return open(path);
        }
        for next in d.graph().adjacent(last) {
            if !path.contains(&next) {
                path.push(next);
                let hit = any_open(d, path, b, open);
                path.pop();
                if hit {
                    return true;
                }
            }
        }
        false
    }
    !any_open(d, &mut vec![a], b, &open)
}

pub fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0..1usize << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
