//! Witness linear program for alpha-vector domination.
//!
//! For a candidate `c` against vectors `A`, solve
//!
//! ```text
//! maximize d  subject to  b . (c - a) >= d  for all a in A,  b in simplex.
//! ```
//!
//! `c` is dominated when the optimal margin `d` is at most
//! [`DOMINATION_TOLERANCE`].

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::{AlphaVector, ValueFnError};

/// Witness margins at or below this are treated as empty regions.
pub const DOMINATION_TOLERANCE: f64 = 1e-9;

/// Largest margin by which `candidate` beats every vector in `others` at some
/// belief. `+inf` when `others` is empty.
pub(crate) fn witness_margin(candidate: &[f64], others: &[&[f64]]) -> Result<f64, ValueFnError> {
    witness(candidate, others).map(|(m, _)| m)
}

/// Optimal margin together with a belief attaining it.
///
/// Rows are generated lazily: the LP starts from the strongest competitor at
/// each corner and adds the competitor that is most violated at the current
/// optimum until none is.
pub(crate) fn witness(
    candidate: &[f64],
    others: &[&[f64]],
) -> Result<(f64, Vec<f64>), ValueFnError> {
    let n = candidate.len();
    if others.is_empty() {
        return Ok((f64::INFINITY, vec![1.0 / n as f64; n]));
    }
    let gap = |a: &[f64], b: &[f64]| -> f64 {
        b.iter().zip(candidate).zip(a).map(|((p, c), x)| p * (c - x)).sum()
    };
    let scale = others
        .iter()
        .flat_map(|a| a.iter().zip(candidate).map(|(x, c)| (x - c).abs()))
        .fold(1.0, f64::max);
    let mut active: Vec<usize> = Vec::new();
    for s in 0..n {
        let worst = (0..others.len())
            .min_by(|&i, &j| {
                (candidate[s] - others[i][s]).total_cmp(&(candidate[s] - others[j][s]))
            })
            .expect("others is non-empty");
        if !active.contains(&worst) {
            active.push(worst);
        }
    }
    loop {
        let rows: Vec<&[f64]> = active.iter().map(|&i| others[i]).collect();
        let (bound, belief) = solve_restricted(candidate, &rows)?;
        let (worst, margin) = others
            .iter()
            .enumerate()
            .map(|(i, a)| (i, gap(a, &belief)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("others is non-empty");
        if margin >= bound - 1e-12 * scale || active.contains(&worst) {
            return Ok((margin.min(bound), belief));
        }
        active.push(worst);
    }
}

/// Witness LP over an explicit list of competitors. A dense tableau handles
/// the common case; results that fail a consistency check are recomputed
/// with `microlp`.
fn solve_restricted(
    candidate: &[f64],
    others: &[&[f64]],
) -> Result<(f64, Vec<f64>), ValueFnError> {
    if let Some((bound, belief)) = solve_tableau(candidate, others) {
        let achieved = others
            .iter()
            .map(|a| {
                belief
                    .iter()
                    .zip(candidate.iter().zip(a.iter()))
                    .map(|(b, (c, x))| b * (c - x))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let scale = bound.abs().max(1.0);
        if (achieved - bound).abs() <= 1e-9 * scale {
            return Ok((bound, belief));
        }
    }
    solve_microlp(candidate, others)
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 10_000;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

/// Dense tableau for `max c.x s.t. A x <= b, x >= 0` with `b >= 0`.
struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; the last row is the objective,
    /// the last column the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Self {
        let rows = a.len();
        let vars = c.len();
        let cols = vars + rows;
        let width = cols + 1;
        let mut data = vec![0.0; (rows + 1) * width];
        for (i, row) in a.iter().enumerate() {
            data[i * width..i * width + vars].copy_from_slice(row);
            data[i * width + vars + i] = 1.0;
            data[i * width + cols] = b[i];
        }
        for (j, &cj) in c.iter().enumerate() {
            data[rows * width + j] = -cj;
        }
        Self {
            rows,
            cols,
            data,
            basis: (vars..vars + rows).collect(),
        }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.cols + 1;
        let p = self.at(pr, pc);
        for v in &mut self.data[pr * width..(pr + 1) * width] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * width..(pr + 1) * width].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * width + pc];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.data[r * width..(r + 1) * width]
                .iter_mut()
                .zip(&pivot_row)
            {
                *v -= f * pv;
            }
            self.data[r * width + pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Dantzig pricing with a largest-pivot ratio test, falling back to
    /// Bland's rule when progress stalls. `None` on unboundedness or when the
    /// pivot budget runs out.
    fn maximize(&mut self) -> Option<f64> {
        let mut stalled = 0;
        for _ in 0..MAX_PIVOTS {
            let bland = stalled >= STALL_LIMIT;
            let costs = (0..self.cols).map(|j| (j, self.at(self.rows, j)));
            let entering = if bland {
                costs.clone().find(|&(_, c)| c < -COST_EPS)
            } else {
                costs
                    .filter(|&(_, c)| c < -COST_EPS)
                    .min_by(|x, y| x.1.total_cmp(&y.1))
            };
            let Some((pc, _)) = entering else {
                return Some(self.at(self.rows, self.cols));
            };
            let ratios: Vec<(usize, f64, f64)> = (0..self.rows)
                .filter_map(|r| {
                    let a = self.at(r, pc);
                    (a > PIVOT_EPS).then(|| (r, self.at(r, self.cols).max(0.0) / a, a))
                })
                .collect();
            let min_ratio = ratios.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            if !min_ratio.is_finite() {
                return None;
            }
            let slack = 1e-12 * (1.0 + min_ratio);
            let ties = ratios.iter().filter(|x| x.1 <= min_ratio + slack);
            let (pr, _, _) = if bland {
                ties.min_by_key(|x| self.basis[x.0])
            } else {
                ties.max_by(|x, y| x.2.total_cmp(&y.2))
            }
            .copied()
            .expect("minimum ratio is attained");
            stalled = if min_ratio <= slack { stalled + 1 } else { 0 };
            self.pivot(pr, pc);
        }
        None
    }
}

/// The last belief coordinate is eliminated through the simplex constraint
/// and `d` is shifted so that the origin is a feasible basis.
fn solve_tableau(candidate: &[f64], others: &[&[f64]]) -> Option<(f64, Vec<f64>)> {
    let n = candidate.len();
    let last = n - 1;
    let deltas: Vec<Vec<f64>> = others
        .iter()
        .map(|a| a.iter().zip(candidate).map(|(x, c)| x - c).collect())
        .collect();
    let shift = deltas
        .iter()
        .flat_map(|d| d.iter().map(|x| x.abs()))
        .fold(0.0, f64::max)
        + 1.0;
    // Variables: b_0..b_{n-2}, then y = d + shift.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(others.len() + 1);
    let mut rhs = Vec::with_capacity(others.len() + 1);
    for d in &deltas {
        let mut row: Vec<f64> = (0..last).map(|s| d[s] - d[last]).collect();
        row.push(1.0);
        rows.push(row);
        rhs.push(shift - d[last]);
    }
    if last > 0 {
        let mut simplex = vec![1.0; last];
        simplex.push(0.0);
        rows.push(simplex);
        rhs.push(1.0);
    }
    let mut objective = vec![0.0; last];
    objective.push(1.0);
    let mut tableau = Tableau::new(&rows, &rhs, &objective);
    let best = tableau.maximize()?;
    let mut belief = vec![0.0; n];
    for (r, &var) in tableau.basis.iter().enumerate() {
        if var < last {
            belief[var] = tableau.at(r, tableau.cols).max(0.0);
        }
    }
    let head: f64 = belief[..last].iter().sum();
    if head > 1.0 {
        belief[..last].iter_mut().for_each(|b| *b /= head);
    }
    belief[last] = (1.0 - belief[..last].iter().sum::<f64>()).max(0.0);
    Some((best - shift, belief))
}

fn solve_microlp(
    candidate: &[f64],
    others: &[&[f64]],
) -> Result<(f64, Vec<f64>), ValueFnError> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let belief: Vec<_> = candidate
        .iter()
        .map(|_| problem.add_var(0.0, (0.0, 1.0)))
        .collect();
    let margin = problem.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    problem.add_constraint(
        belief.iter().map(|&b| (b, 1.0)),
        ComparisonOp::Eq,
        1.0,
    );
    for a in others {
        let row = belief
            .iter()
            .zip(candidate.iter().zip(a.iter()))
            .map(|(&b, (c, x))| (b, c - x))
            .chain(std::iter::once((margin, -1.0)));
        problem.add_constraint(row, ComparisonOp::Ge, 0.0);
    }
    let failed = |e: String| ValueFnError::Internal(format!("witness LP: {e}"));
    let solution = problem
        .solve()
        .map_err(|e| failed(e.to_string()))?
        .into_solution()
        .map_err(|_| failed("interrupted".into()))?;
    let mut values: Vec<f64> = belief
        .iter()
        .map(|&b| solution.var_value(b).max(0.0))
        .collect();
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    Ok((solution.var_value(margin), values))
}

/// True when no belief gives `candidate` a value strictly above every vector
/// in `others` (by more than [`DOMINATION_TOLERANCE`]).
pub fn is_dominated(candidate: &AlphaVector, others: &[AlphaVector]) -> bool {
    let refs: Vec<&[f64]> = others.iter().map(|a| a.values.as_slice()).collect();
    witness_margin(&candidate.values, &refs).expect("witness LP is feasible and bounded")
        <= DOMINATION_TOLERANCE
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> AlphaVector {
        AlphaVector {
            values: values.to_vec(),
            action: 0,
            id: 0,
        }
    }

    #[test]
    fn pointwise_domination() {
        assert!(is_dominated(&v(&[1.0, 2.0, 3.0]), &[v(&[1.0, 2.5, 3.0])]));
        assert!(is_dominated(&v(&[1.0, 2.0]), &[v(&[1.0, 2.0])]));
    }

    #[test]
    fn corner_witness() {
        let other = v(&[1.0, 2.0, 3.0]);
        assert!(!is_dominated(&v(&[1.0, 2.001, 3.0]), &[other]));
    }

    #[test]
    fn dominated_by_a_pair() {
        // max(b0, b1) >= 0.5 on the 1-simplex.
        let others = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        assert!(is_dominated(&v(&[0.4, 0.4]), &others));
        assert!(!is_dominated(&v(&[0.6, 0.6]), &others));
        // Touching at exactly one point has zero margin.
        assert!(is_dominated(&v(&[0.5, 0.5]), &others));
    }

    #[test]
    fn margin_value() {
        let others: Vec<&[f64]> = vec![&[1.0, 0.0], &[0.0, 1.0]];
        let m = witness_margin(&[0.6, 0.6], &others).unwrap();
        assert!((m - 0.1).abs() < 1e-12);
        assert_eq!(witness_margin(&[0.0], &[]).unwrap(), f64::INFINITY);
        let single: Vec<&[f64]> = vec![&[2.0]];
        assert!((witness_margin(&[3.0], &single).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Brute-force margin over a fine grid of the 2-simplex.
    fn grid_margin(c: &[f64], others: &[Vec<f64>]) -> f64 {
        let steps = 200;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let b = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ];
                let m = others
                    .iter()
                    .map(|a| (0..3).map(|s| b[s] * (c[s] - a[s])).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                best = best.max(m);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn margin_matches_grid_search(
            c in prop::collection::vec(-10.0f64..10.0, 3),
            others in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..6),
        ) {
            let refs: Vec<&[f64]> = others.iter().map(|o| o.as_slice()).collect();
            let lp = witness_margin(&c, &refs).unwrap();
            let grid = grid_margin(&c, &others);
            // The grid under-approximates the optimum by at most its resolution.
            prop_assert!(lp >= grid - 1e-9);
            prop_assert!(lp <= grid + 0.5);
        }

        #[test]
        fn tableau_agrees_with_microlp(
            n in 2usize..6,
            seed in prop::collection::vec(-50.0f64..50.0, 30),
            count in 1usize..6,
        ) {
            let c: Vec<f64> = seed[..n].to_vec();
            let others: Vec<Vec<f64>> = (0..count)
                .map(|k| (0..n).map(|s| seed[(n + k * n + s) % seed.len()] * 0.7 + k as f64).collect())
                .collect();
            let refs: Vec<&[f64]> = others.iter().map(|o| o.as_slice()).collect();
            let (reference, _) = solve_microlp(&c, &refs).unwrap();
            if let Some((value, belief)) = solve_tableau(&c, &refs) {
                let scale = reference.abs().max(1.0);
                prop_assert!((value - reference).abs() <= 1e-7 * scale, "{value} vs {reference}");
                prop_assert!((belief.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }
}
