//! Dense linear assignment over real costs.
//!
//! Shortest augmenting path Hungarian method, `O(n^3)`, followed by a pass
//! that picks the lexicographically smallest permutation among all optimal
//! ones using the equality subgraph of the final dual potentials.

/// Minimum-cost perfect assignment for a square row-major cost matrix.
///
/// Returns `perm` with row `i` assigned to column `perm[i]`.
pub fn solve(costs: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(costs.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    let (row_to_col, u, v) = hungarian(costs, n);
    lexicographic_min(costs, n, row_to_col, &u, &v)
}

/// Returns the assignment and the row and column potentials.
fn hungarian(costs: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based bookkeeping; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &costs[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - ui0 - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Among the optimal assignments (perfect matchings on edges with zero
/// reduced cost), selects the lexicographically smallest one.
fn lexicographic_min(costs: &[f64], n: usize, mut row_to_col: Vec<usize>, u: &[f64], v: &[f64]) -> Vec<usize> {
    let scale = costs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let tight = |i: usize, j: usize| costs[i * n + j] - u[i] - v[j] <= tol;

    let mut col_to_row = vec![0usize; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut col_fixed = vec![false; n];
    let mut visited = vec![false; n];
    let mut parent = vec![usize::MAX; n];

    for i in 0..n {
        let current = row_to_col[i];
        for j in 0..current {
            if col_fixed[j] || !tight(i, j) {
                continue;
            }
            // Try to give column j to row i; its owner must reach `current`.
            let owner = col_to_row[j];
            visited.fill(false);
            visited[j] = true;
            parent.fill(usize::MAX);
            let mut stack = vec![owner];
            let mut found = false;
            // parent[c] = row that claims column c along the path
            'search: while let Some(r) = stack.pop() {
                for c in 0..n {
                    if visited[c] || col_fixed[c] || !tight(r, c) {
                        continue;
                    }
                    visited[c] = true;
                    parent[c] = r;
                    if c == current {
                        found = true;
                        break 'search;
                    }
                    stack.push(col_to_row[c]);
                }
            }
            if !found {
                continue;
            }
            // Walk back from `current`, shifting each column to its claimant.
            let mut c = current;
            loop {
                let r = parent[c];
                let prev = row_to_col[r];
                row_to_col[r] = c;
                col_to_row[c] = r;
                if r == owner {
                    break;
                }
                c = prev;
            }
            row_to_col[i] = j;
            col_to_row[j] = i;
            break;
        }
        col_fixed[row_to_col[i]] = true;
    }
    row_to_col
}
