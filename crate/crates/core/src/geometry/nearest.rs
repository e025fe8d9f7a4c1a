use super::{squared_distance, Point};

/// Exact nearest neighbor of every query among `targets`.
///
/// Targets are sorted along x once; each query then sweeps outward from its
/// insertion position and stops in a direction as soon as the x-gap alone
/// exceeds the best squared distance found. Ties resolve to the lowest
/// target index.
pub fn nearest_sq(queries: &[Point], targets: &[Point]) -> (Vec<f64>, Vec<usize>) {
    assert!(!targets.is_empty(), "nearest_sq needs at least one target");
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[a][0].total_cmp(&targets[b][0]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| targets[i][0]).collect();

    let mut dists = Vec::with_capacity(queries.len());
    let mut idx = Vec::with_capacity(queries.len());
    for &q in queries {
        let start = xs.partition_point(|&x| x < q[0]);
        let mut best = f64::INFINITY;
        let mut best_i = usize::MAX;
        let consider = |k: usize, best: &mut f64, best_i: &mut usize| {
            let i = order[k];
            let d = squared_distance(q, targets[i]);
            if d < *best || (d == *best && i < *best_i) {
                *best = d;
                *best_i = i;
            }
        };
        let mut up = start;
        while up < xs.len() {
            let dx = xs[up] - q[0];
            if dx * dx > best {
                break;
            }
            consider(up, &mut best, &mut best_i);
            up += 1;
        }
        let mut down = start;
        while down > 0 {
            down -= 1;
            let dx = q[0] - xs[down];
            if dx * dx > best {
                break;
            }
            consider(down, &mut best, &mut best_i);
        }
        dists.push(best);
        idx.push(best_i);
    }
    (dists, idx)
}
