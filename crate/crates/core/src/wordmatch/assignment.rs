//! Dense minimum-cost assignment over small square integer matrices.
//!
//! `solve` is the O(n^3) potentials form of the Hungarian method.
//! `solve_lexicographic` returns, among all optimal assignments, the one
//! whose row-to-column vector is lexicographically smallest.

pub(crate) fn solve(costs: &[Vec<u64>]) -> (Vec<usize>, u64) {
    let n = costs.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    debug_assert!(costs.iter().all(|row| row.len() == n));

    let inf = i64::MAX / 4;
    let c = |i: usize, j: usize| costs[i][j] as i64;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| costs[i][j]).sum();
    (assignment, total)
}

pub(crate) fn solve_lexicographic(costs: &[Vec<u64>]) -> (Vec<usize>, u64) {
    let n = costs.len();
    let (_, optimum) = solve(costs);
    let mut assignment = Vec::with_capacity(n);
    let mut free: Vec<usize> = (0..n).collect();
    let mut remaining = optimum;

    for row in 0..n {
        let mut fixed = None;
        for (slot, &col) in free.iter().enumerate() {
            let here = costs[row][col];
            if here > remaining {
                continue;
            }
            let rest_cols: Vec<usize> = free.iter().copied().filter(|&c| c != col).collect();
            let sub: Vec<Vec<u64>> = (row + 1..n)
                .map(|r| rest_cols.iter().map(|&c| costs[r][c]).collect())
                .collect();
            if here + solve(&sub).1 == remaining {
                fixed = Some((slot, col, here));
                break;
            }
        }
        let (slot, col, here) = fixed.expect("an optimal completion always exists");
        free.remove(slot);
        assignment.push(col);
        remaining -= here;
    }
    (assignment, optimum)
}
