//! Minimum-cost rectangular assignment (Hungarian method with potentials).

/// Solves `min sum cost[i][assign[i]]` over injective row-to-column maps.
///
/// `cost` is `rows x cols`; the smaller side is fully assigned. Returns, for
/// each row, the assigned column or `None`.
pub fn solve_assignment(cost: &[Vec<f64>], cols: usize) -> Vec<Option<usize>> {
    let rows = cost.len();
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let n = rows.max(cols);
    let at = |i: usize, j: usize| if i < rows && j < cols { cost[i][j] } else { 0.0 };

    // 1-based arrays; index 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![None; rows];
    for j in 1..=n {
        let i = col_owner[j];
        if i >= 1 && i <= rows && j <= cols {
            assign[i - 1] = Some(j - 1);
        }
    }
    assign
}
