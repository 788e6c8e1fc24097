//! Assignment-based GED upper bounds.
//!
//! Nodes of both graphs are matched through a linear sum assignment over the
//! `(N1 + N2) × (N1 + N2)` substitution / deletion / insertion cost matrix.
//! The optimal assignment is turned into a node mapping whose full edit-path
//! cost is reported, so the value is always a valid upper bound on the GED.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ged::mapping_cost;
use crate::graph::{bfs_order, Graph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LsapError {
    #[error("cost matrix is not square: {0} values for side {1}")]
    NotSquare(usize, usize),
    #[error("no assignment avoids the forbidden cells")]
    Infeasible,
}

/// Square integer cost matrix. Cells equal to `forbidden` may not be chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostMatrix {
    side: usize,
    values: Vec<i64>,
    forbidden: i64,
}

impl CostMatrix {
    /// Matrix without forbidden cells.
    pub fn new(side: usize, values: Vec<i64>) -> Result<CostMatrix, LsapError> {
        if values.len() != side * side {
            return Err(LsapError::NotSquare(values.len(), side));
        }
        Ok(CostMatrix {
            side,
            values,
            forbidden: i64::MAX,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.values[row * self.side + col]
    }

    pub fn is_forbidden(&self, row: usize, col: usize) -> bool {
        self.get(row, col) >= self.forbidden
    }

    /// Sentinel value marking forbidden cells.
    pub fn forbidden_value(&self) -> i64 {
        self.forbidden
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i64]> {
        self.values.chunks(self.side.max(1))
    }
}

impl fmt::Display for CostMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let cells: Vec<String> = row
                .iter()
                .map(|&v| {
                    if v >= self.forbidden {
                        "inf".to_string()
                    } else {
                        v.to_string()
                    }
                })
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Which node costs populate the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostVariant {
    /// Label cost only; deletions and insertions cost 1.
    Plain,
    /// Adds the incident-edge cost estimate: `|deg i - deg j|` for
    /// substitutions and the node degree for deletions and insertions.
    DegreeEnriched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LsapAlgorithm {
    Hungarian,
    JonkerVolgenant,
}

/// Row-to-column permutation with its total cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub cost: i64,
}

/// Builds the block cost matrix
///
/// ```text
/// | substitution  | deletion (diag) |
/// | insertion     | 0               |
/// ```
///
/// with forbidden off-diagonal cells in the deletion and insertion blocks.
pub fn build_cost_matrix(g1: &Graph, g2: &Graph, variant: CostVariant) -> CostMatrix {
    let (n1, n2) = (g1.node_count(), g2.node_count());
    let side = n1 + n2;
    let enriched = variant == CostVariant::DegreeEnriched;
    let extra = |d: usize| if enriched { d as i64 } else { 0 };

    let mut finite = Vec::with_capacity(n1 * n2 + n1 + n2);
    let mut sub = vec![0i64; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let label = i64::from(g1.label(i) != g2.label(j));
            let c = label + extra(g1.degree(i).abs_diff(g2.degree(j)));
            sub[i * n2 + j] = c;
            finite.push(c);
        }
    }
    let del: Vec<i64> = (0..n1).map(|i| 1 + extra(g1.degree(i))).collect();
    let ins: Vec<i64> = (0..n2).map(|j| 1 + extra(g2.degree(j))).collect();
    finite.extend(&del);
    finite.extend(&ins);
    let max_cell = finite.into_iter().max().unwrap_or(0);
    let forbidden = side as i64 * max_cell + 1;

    let mut values = vec![forbidden; side * side];
    for i in 0..n1 {
        values[i * side..i * side + n2].copy_from_slice(&sub[i * n2..(i + 1) * n2]);
        values[i * side + n2 + i] = del[i];
    }
    for j in 0..n2 {
        let row = n1 + j;
        values[row * side + j] = ins[j];
        for k in 0..n1 {
            values[row * side + n2 + k] = 0;
        }
    }
    CostMatrix {
        side,
        values,
        forbidden,
    }
}

/// Minimum-cost perfect assignment.
pub fn solve_lsap(c: &CostMatrix, algorithm: LsapAlgorithm) -> Result<Assignment, LsapError> {
    let row_to_col = match algorithm {
        LsapAlgorithm::Hungarian => hungarian(c),
        LsapAlgorithm::JonkerVolgenant => jonker_volgenant(c),
    };
    let mut cost = 0i64;
    for (row, &col) in row_to_col.iter().enumerate() {
        if c.is_forbidden(row, col) {
            return Err(LsapError::Infeasible);
        }
        cost += c.get(row, col);
    }
    Ok(Assignment { row_to_col, cost })
}

/// Kuhn-Munkres with starred and primed zeros.
fn hungarian(c: &CostMatrix) -> Vec<usize> {
    let n = c.side();
    if n == 0 {
        return Vec::new();
    }
    let mut m: Vec<i64> = c.values.clone();
    for row in m.chunks_mut(n) {
        let min = *row.iter().min().unwrap();
        row.iter_mut().for_each(|v| *v -= min);
    }
    for j in 0..n {
        let min = (0..n).map(|i| m[i * n + j]).min().unwrap();
        (0..n).for_each(|i| m[i * n + j] -= min);
    }

    const NONE: usize = usize::MAX;
    let mut star_in_row = vec![NONE; n];
    let mut star_in_col = vec![NONE; n];
    let mut prime_in_row = vec![NONE; n];
    for i in 0..n {
        for j in 0..n {
            if m[i * n + j] == 0 && star_in_row[i] == NONE && star_in_col[j] == NONE {
                star_in_row[i] = j;
                star_in_col[j] = i;
            }
        }
    }

    let mut row_covered = vec![false; n];
    let mut col_covered = vec![false; n];
    loop {
        col_covered.iter_mut().for_each(|c| *c = false);
        row_covered.iter_mut().for_each(|c| *c = false);
        prime_in_row.iter_mut().for_each(|p| *p = NONE);
        for j in 0..n {
            col_covered[j] = star_in_col[j] != NONE;
        }
        if col_covered.iter().all(|&c| c) {
            break;
        }

        // Prime uncovered zeros until one has no star in its row.
        let (zr, zc) = loop {
            let mut found = None;
            'search: for i in 0..n {
                if row_covered[i] {
                    continue;
                }
                for j in 0..n {
                    if !col_covered[j] && m[i * n + j] == 0 {
                        found = Some((i, j));
                        break 'search;
                    }
                }
            }
            match found {
                Some((i, j)) => {
                    prime_in_row[i] = j;
                    let s = star_in_row[i];
                    if s == NONE {
                        break (i, j);
                    }
                    row_covered[i] = true;
                    col_covered[s] = false;
                }
                None => {
                    let mut min = i64::MAX;
                    for i in (0..n).filter(|&i| !row_covered[i]) {
                        for j in (0..n).filter(|&j| !col_covered[j]) {
                            min = min.min(m[i * n + j]);
                        }
                    }
                    for i in 0..n {
                        for j in 0..n {
                            if row_covered[i] {
                                m[i * n + j] += min;
                            }
                            if !col_covered[j] {
                                m[i * n + j] -= min;
                            }
                        }
                    }
                }
            }
        };

        // Alternate primes and stars along the augmenting path.
        let (mut row, mut col) = (zr, zc);
        loop {
            let starred_row = star_in_col[col];
            star_in_row[row] = col;
            star_in_col[col] = row;
            if starred_row == NONE {
                break;
            }
            row = starred_row;
            col = prime_in_row[row];
        }
    }
    star_in_row
}

/// Jonker-Volgenant: column reduction, reduction transfer, augmenting row
/// reduction, then shortest augmenting paths for the remaining free rows.
fn jonker_volgenant(c: &CostMatrix) -> Vec<usize> {
    let n = c.side();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    let cost = |i: usize, j: usize| c.values[i * n + j];
    const FREE: usize = usize::MAX;
    let big = i64::MAX / 4;

    let mut row_sol = vec![FREE; n];
    let mut col_sol = vec![FREE; n];
    let mut v = vec![0i64; n];
    let mut matches = vec![0usize; n];

    for j in (0..n).rev() {
        let (imin, min) = (0..n)
            .map(|i| (i, cost(i, j)))
            .min_by_key(|&(i, c)| (c, i))
            .unwrap();
        v[j] = min;
        matches[imin] += 1;
        if matches[imin] == 1 {
            row_sol[imin] = j;
            col_sol[j] = imin;
        } else if v[j] < v[row_sol[imin]] {
            let j1 = row_sol[imin];
            row_sol[imin] = j;
            col_sol[j] = imin;
            col_sol[j1] = FREE;
        } else {
            col_sol[j] = FREE;
        }
    }

    let mut free_rows = Vec::with_capacity(n);
    for i in 0..n {
        match matches[i] {
            0 => free_rows.push(i),
            1 => {
                let j1 = row_sol[i];
                let min = (0..n)
                    .filter(|&j| j != j1)
                    .map(|j| cost(i, j) - v[j])
                    .min()
                    .unwrap();
                v[j1] -= min;
            }
            _ => {}
        }
    }
    for _ in 0..2 {
        let previous = std::mem::take(&mut free_rows);
        let mut queue = previous;
        let mut k = 0;
        while k < queue.len() {
            let i = queue[k];
            k += 1;
            let mut umin = cost(i, 0) - v[0];
            let mut j1 = 0;
            let mut j2 = 0;
            let mut usubmin = big;
            for j in 1..n {
                let h = cost(i, j) - v[j];
                if h < usubmin {
                    if h >= umin {
                        usubmin = h;
                        j2 = j;
                    } else {
                        usubmin = umin;
                        umin = h;
                        j2 = j1;
                        j1 = j;
                    }
                }
            }
            let mut i0 = col_sol[j1];
            if umin < usubmin {
                v[j1] -= usubmin - umin;
            } else if i0 != FREE {
                j1 = j2;
                i0 = col_sol[j2];
            }
            if row_sol[i] != FREE && col_sol[row_sol[i]] == i {
                col_sol[row_sol[i]] = FREE;
            }
            row_sol[i] = j1;
            col_sol[j1] = i;
            if i0 != FREE {
                row_sol[i0] = FREE;
                if umin < usubmin {
                    // Re-examine the displaced row immediately.
                    k -= 1;
                    queue[k] = i0;
                } else {
                    free_rows.push(i0);
                }
            }
        }
    }

    let mut d = vec![0i64; n];
    let mut pred = vec![0usize; n];
    let mut col_list: Vec<usize> = (0..n).collect();
    for &free_row in &free_rows {
        for j in 0..n {
            d[j] = cost(free_row, j) - v[j];
            pred[j] = free_row;
            col_list[j] = j;
        }
        let (mut low, mut up) = (0usize, 0usize);
        let mut last = 0usize;
        let mut min = 0i64;
        let end_of_path;
        'search: loop {
            if up == low {
                last = low;
                min = d[col_list[up]];
                up += 1;
                for k in up..n {
                    let j = col_list[k];
                    let h = d[j];
                    if h <= min {
                        if h < min {
                            up = low;
                            min = h;
                        }
                        col_list[k] = col_list[up];
                        col_list[up] = j;
                        up += 1;
                    }
                }
                for &j in &col_list[low..up] {
                    if col_sol[j] == FREE {
                        end_of_path = j;
                        break 'search;
                    }
                }
            }
            let j1 = col_list[low];
            low += 1;
            let i = col_sol[j1];
            let h = cost(i, j1) - v[j1] - min;
            let mut k = up;
            while k < n {
                let j = col_list[k];
                let v2 = cost(i, j) - v[j] - h;
                if v2 < d[j] {
                    pred[j] = i;
                    if v2 == min {
                        if col_sol[j] == FREE {
                            end_of_path = j;
                            break 'search;
                        }
                        col_list[k] = col_list[up];
                        col_list[up] = j;
                        up += 1;
                    }
                    d[j] = v2;
                }
                k += 1;
            }
        }
        // Columns scanned before the last minimum update get new prices.
        for &j1 in &col_list[..last] {
            v[j1] += d[j1] - min;
        }
        let mut j = end_of_path;
        loop {
            let i = pred[j];
            col_sol[j] = i;
            let next = row_sol[i];
            row_sol[i] = j;
            if i == free_row {
                break;
            }
            j = next;
        }
    }
    row_sol
}

/// Node mapping implied by an assignment over a matrix from
/// [`build_cost_matrix`]: `Some(j)` for substitutions, `None` for deletions.
pub fn assignment_to_mapping(assignment: &Assignment, n1: usize, n2: usize) -> Vec<Option<usize>> {
    assignment.row_to_col[..n1]
        .iter()
        .map(|&col| (col < n2).then_some(col))
        .collect()
}

/// Refines the substitution costs so that, among assignments of equal cost,
/// the one closest to aligning the two BFS orders wins. Node costs are scaled
/// by `side² + 1`, which exceeds any total of the `|position difference|`
/// terms, so every optimum of the result is also optimal for `c`. Identical
/// graphs therefore always map onto themselves.
fn with_bfs_tie_break(c: &CostMatrix, g1: &Graph, g2: &Graph) -> CostMatrix {
    let (n1, n2) = (g1.node_count(), g2.node_count());
    let side = c.side();
    let scale = (side * side) as i64 + 1;
    let position = |g: &Graph| {
        let mut pos = vec![0usize; g.node_count()];
        for (k, &v) in bfs_order(g).iter().enumerate() {
            pos[v] = k;
        }
        pos
    };
    let (p1, p2) = (position(g1), position(g2));
    let forbidden = (c.forbidden - 1) * scale + (side * side) as i64 + 1;
    let mut values = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            let v = c.get(i, j);
            values.push(if c.is_forbidden(i, j) {
                forbidden
            } else if i < n1 && j < n2 {
                v * scale + p1[i].abs_diff(p2[j]) as i64
            } else {
                v * scale
            });
        }
    }
    CostMatrix {
        side,
        values,
        forbidden,
    }
}

/// GED upper bound: the edit-path cost of the optimal node assignment.
pub fn assignment_ged(
    g1: &Graph,
    g2: &Graph,
    algorithm: LsapAlgorithm,
    variant: CostVariant,
) -> u32 {
    let c = with_bfs_tie_break(&build_cost_matrix(g1, g2, variant), g1, g2);
    let assignment =
        solve_lsap(&c, algorithm).expect("block cost matrices always admit a finite assignment");
    let mapping = assignment_to_mapping(&assignment, g1.node_count(), g2.node_count());
    mapping_cost(g1, g2, &mapping)
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn matrix() -> impl Strategy<Value = CostMatrix> {
        (1usize..=6).prop_flat_map(|side| {
            proptest::collection::vec(-30i64..60, side * side)
                .prop_map(move |values| CostMatrix::new(side, values).unwrap())
        })
    }

    proptest! {
        #[test]
        fn solvers_agree_on_a_valid_permutation(c in matrix()) {
            let h = solve_lsap(&c, LsapAlgorithm::Hungarian).unwrap();
            let jv = solve_lsap(&c, LsapAlgorithm::JonkerVolgenant).unwrap();
            prop_assert_eq!(h.cost, jv.cost);
            for a in [&h, &jv] {
                let mut cols = a.row_to_col.clone();
                cols.sort_unstable();
                prop_assert_eq!(cols, (0..c.side()).collect::<Vec<_>>());
                let total: i64 = a.row_to_col.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
                prop_assert_eq!(total, a.cost);
            }
        }
    }
}
