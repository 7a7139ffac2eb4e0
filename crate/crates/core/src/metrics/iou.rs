use crate::model::{BBox, Category, LayoutGraph};

/// Maximum-weight assignment of rows to columns (Hungarian method with
/// potentials). Returns the matched column of each row; with more rows than
/// columns some rows stay unmatched.
pub fn max_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| weights[i][j]).collect()).collect();
        let mut out = vec![None; rows];
        for (j, i) in max_assignment(&transposed).into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        return out;
    }
    // Minimise negated weights; rows and columns are 1-based, 0 is a sentinel.
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Optimal same-category matching by IoU. Matched IoU is summed over all
/// categories and divided by `Σ max(count_gen, count_ref)`, so missing and
/// extra boxes both count against the score. Two empty layouts score 1.
pub fn max_iou(generated: &LayoutGraph, reference: &LayoutGraph) -> f64 {
    let mut matched = 0.0;
    let mut slots = 0usize;
    for cat in Category::ALL {
        let of = |g: &LayoutGraph| -> Vec<BBox> {
            g.nodes().iter().filter(|n| n.category == cat).map(|n| n.bbox).collect()
        };
        let (a, b) = (of(generated), of(reference));
        slots += a.len().max(b.len());
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let w: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| x.iou(y)).collect()).collect();
        matched += max_assignment(&w)
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| w[i][j]))
            .sum::<f64>();
    }
    if slots == 0 {
        1.0
    } else {
        matched / slots as f64
    }
}
