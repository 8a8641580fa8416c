//! Equal-size hard assignment of samples to decoders.
//!
//! The balanced problem assigns `N` samples to `K` decoders, each decoder
//! taking exactly `N / K` samples, minimizing the summed cost. It is the
//! square assignment problem on an `N x N` matrix in which every decoder
//! column is repeated `N / K` times. [`hungarian_min_cost`] solves square
//! problems directly; [`balanced_assign`] runs the same shortest augmenting
//! path method with the duplicated columns merged into one capacitated column
//! per decoder, so the expansion never has to be materialized.
//!
//! Both solvers return the lexicographically smallest optimal answer: among
//! all optimal assignments, the lowest sample index gets the lowest tied
//! column, then the next sample, and so on.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNASSIGNED: usize = usize::MAX;

/// Dense `N x K` matrix of finite assignment costs, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    values: Vec<f64>,
    n_samples: usize,
    n_decoders: usize,
}

impl CostMatrix {
    pub fn new(n_samples: usize, n_decoders: usize, values: Vec<f64>) -> Result<Self> {
        if n_samples == 0 || n_decoders == 0 {
            return Err(Error::Dimension(format!(
                "cost matrix must be non-empty, got {n_samples}x{n_decoders}"
            )));
        }
        if values.len() != n_samples * n_decoders {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {n_samples}x{n_decoders} matrix, got {}",
                n_samples * n_decoders,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "cost entry ({}, {}) is not finite",
                pos / n_decoders,
                pos % n_decoders
            )));
        }
        Ok(Self {
            values,
            n_samples,
            n_decoders,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_decoders = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_decoders);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_decoders {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n_decoders}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), n_decoders, values)
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    #[inline]
    pub fn n_decoders(&self) -> usize {
        self.n_decoders
    }

    #[inline]
    pub fn get(&self, sample: usize, decoder: usize) -> f64 {
        self.values[sample * self.n_decoders + decoder]
    }

    #[inline]
    pub fn row(&self, sample: usize) -> &[f64] {
        &self.values[sample * self.n_decoders..(sample + 1) * self.n_decoders]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.n_samples == self.n_decoders
    }

    /// Per-decoder quota `N / K`, or a quota error when `K` does not divide `N`.
    pub fn quota(&self) -> Result<usize> {
        if self.n_samples % self.n_decoders != 0 {
            return Err(Error::Quota {
                n_samples: self.n_samples,
                n_decoders: self.n_decoders,
            });
        }
        Ok(self.n_samples / self.n_decoders)
    }

    /// The square `N x N` matrix with every decoder column repeated `N / K`
    /// times; column `j` belongs to decoder `j / (N / K)`.
    pub fn duplicated(&self) -> Result<CostMatrix> {
        let quota = self.quota()?;
        let n = self.n_samples;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(self.get(i, j / quota));
            }
        }
        CostMatrix::new(n, n, values)
    }

    /// Summed cost of an assignment, accumulated in sample order.
    pub fn objective(&self, assignment: &AssignmentMatrix) -> f64 {
        assignment
            .assignee()
            .iter()
            .enumerate()
            .map(|(n, &k)| self.get(n, k))
            .sum()
    }

    /// Reads the whitespace-separated text format: a first line `N K`, then
    /// `N` rows of `K` reals.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        let mut next_usize = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
        };
        let n = next_usize("sample count")?;
        let k = next_usize("decoder count")?;
        let values = it
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad cost '{t}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, k, values)
    }
}

/// Hard assignment of each sample to exactly one decoder.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    assignee: Vec<usize>,
    n_decoders: usize,
}

impl AssignmentMatrix {
    pub fn new(assignee: Vec<usize>, n_decoders: usize) -> Result<Self> {
        if let Some(&bad) = assignee.iter().find(|&&k| k >= n_decoders) {
            return Err(Error::Domain(format!(
                "decoder index {bad} out of range for {n_decoders} decoders"
            )));
        }
        Ok(Self {
            assignee,
            n_decoders,
        })
    }

    pub fn assignee(&self) -> &[usize] {
        &self.assignee
    }

    pub fn n_samples(&self) -> usize {
        self.assignee.len()
    }

    pub fn n_decoders(&self) -> usize {
        self.n_decoders
    }

    pub fn decoder_of(&self, sample: usize) -> usize {
        self.assignee[sample]
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_decoders];
        for &k in &self.assignee {
            counts[k] += 1;
        }
        counts
    }

    /// True when every decoder holds exactly `N / K` samples.
    pub fn is_balanced(&self) -> bool {
        let n = self.assignee.len();
        n % self.n_decoders == 0 && self.counts().iter().all(|&c| c == n / self.n_decoders)
    }

    /// Dense 0/1 view, `A[n][k]`.
    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        self.assignee
            .iter()
            .map(|&k| {
                let mut row = vec![0u8; self.n_decoders];
                row[k] = 1;
                row
            })
            .collect()
    }

    /// Writes `N` lines `sample_index decoder_index`.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for (n, k) in self.assignee.iter().enumerate() {
            writeln!(out, "{n} {k}")?;
        }
        Ok(())
    }
}

impl fmt::Display for AssignmentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .assignee
            .iter()
            .enumerate()
            .map(|(n, k)| format!("{n}->{k}"))
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

fn tie_tolerance(cost: &CostMatrix) -> f64 {
    let scale = cost.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    1e-12 * scale
}

/// Minimum-cost perfect matching of a square cost matrix.
///
/// Returns `sigma` with `sigma[row] = column`. Runs the O(n^3) shortest
/// augmenting path form of the Hungarian method, then moves along
/// zero-reduced-cost edges to the lexicographically smallest optimum.
pub fn hungarian_min_cost(cost: &CostMatrix) -> Result<Vec<usize>> {
    if !cost.is_square() {
        return Err(Error::Dimension(format!(
            "hungarian_min_cost needs a square matrix, got {}x{}",
            cost.n_samples(),
            cost.n_decoders()
        )));
    }
    let n = cost.n_samples();
    let inf = f64::INFINITY;
    // 1-indexed potentials and matching; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut sigma = vec![UNASSIGNED; n];
    for j in 1..=n {
        sigma[row_of_col[j] - 1] = j - 1;
    }

    let tol = tie_tolerance(cost);
    let tight = |r: usize, c: usize| cost.get(r, c) - u[r + 1] - v[c + 1] <= tol;
    canonicalize(&mut sigma, n, tight);
    Ok(sigma)
}

/// Equal-size hard assignment minimizing `sum_n cost[n, assignee(n)]` with
/// every decoder receiving exactly `N / K` samples.
///
/// This is the Hungarian method on the duplicated `N x N` problem, with the
/// `N / K` copies of a decoder merged into one node of capacity `N / K`.
/// Samples are inserted one at a time; each insertion follows the shortest
/// augmenting path through the decoder graph, where moving a sample from
/// decoder `a` to decoder `b` costs `cost[r, b] - cost[r, a]`. The graph has
/// only `K` nodes, so Bellman-Ford per insertion is cheap and the whole solve
/// is `O(N^2 K)` in the worst case.
pub fn balanced_assign(cost: &CostMatrix) -> Result<AssignmentMatrix> {
    let quota = cost.quota()?;
    let n = cost.n_samples();
    let k = cost.n_decoders();
    let tol = tie_tolerance(cost);

    let mut assignee = vec![UNASSIGNED; n];
    let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(quota); k];
    // moves[a][b]: cheapest (cost delta, sample) for moving a member of `a` to `b`.
    let mut moves = vec![vec![(f64::INFINITY, UNASSIGNED); k]; k];
    let refresh = |a: usize, members: &[Vec<usize>], moves: &mut [Vec<(f64, usize)>]| {
        for b in 0..k {
            let mut best = (f64::INFINITY, UNASSIGNED);
            if b != a {
                for &r in &members[a] {
                    let delta = cost.get(r, b) - cost.get(r, a);
                    if delta < best.0 {
                        best = (delta, r);
                    }
                }
            }
            moves[a][b] = best;
        }
    };

    let mut dist = vec![0.0; k];
    let mut pred = vec![UNASSIGNED; k];
    for i in 0..n {
        dist.copy_from_slice(cost.row(i));
        pred.iter_mut().for_each(|p| *p = UNASSIGNED);
        for _ in 1..k {
            let mut changed = false;
            for a in 0..k {
                if members[a].is_empty() {
                    continue;
                }
                for b in 0..k {
                    let cand = dist[a] + moves[a][b].0;
                    if cand < dist[b] - tol {
                        dist[b] = cand;
                        pred[b] = a;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut target = UNASSIGNED;
        for b in 0..k {
            if members[b].len() < quota && (target == UNASSIGNED || dist[b] < dist[target] - tol) {
                target = b;
            }
        }
        debug_assert!(target != UNASSIGNED);

        // Walk the augmenting path backwards, moving one sample per edge.
        let mut b = target;
        let mut steps = 0;
        while pred[b] != UNASSIGNED {
            steps += 1;
            if steps > k {
                return Err(Error::Numeric(
                    "cycle in augmenting path; costs are too ill-conditioned".into(),
                ));
            }
            let a = pred[b];
            let r = moves[a][b].1;
            let pos = members[a].iter().position(|&m| m == r).expect("member");
            members[a].swap_remove(pos);
            members[b].push(r);
            assignee[r] = b;
            refresh(a, &members, &mut moves);
            refresh(b, &members, &mut moves);
            b = a;
        }
        assignee[i] = b;
        members[b].push(i);
        refresh(b, &members, &mut moves);
    }

    // Dual potentials: shortest distances in the final move graph from a
    // virtual source joined to every decoder with weight 0.
    let mut pot = vec![0.0; k];
    for _ in 0..k {
        let mut changed = false;
        for a in 0..k {
            for b in 0..k {
                let cand = pot[a] + moves[a][b].0;
                if cand < pot[b] - tol {
                    pot[b] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let row_pot: Vec<f64> = (0..n)
        .map(|r| cost.get(r, assignee[r]) - pot[assignee[r]])
        .collect();
    let tight = |r: usize, b: usize| cost.get(r, b) - row_pot[r] - pot[b] <= tol;
    canonicalize(&mut assignee, k, tight);
    AssignmentMatrix::new(assignee, k)
}

/// Solves the balanced problem by literally expanding to `N x N` and running
/// [`hungarian_min_cost`]. Same answer as [`balanced_assign`], at O(N^3).
pub fn balanced_assign_dense(cost: &CostMatrix) -> Result<AssignmentMatrix> {
    let quota = cost.quota()?;
    let sigma = hungarian_min_cost(&cost.duplicated()?)?;
    AssignmentMatrix::new(
        sigma.into_iter().map(|j| j / quota).collect(),
        cost.n_decoders(),
    )
}

/// Rewrites an optimal assignment into the lexicographically smallest one.
///
/// `tight(r, c)` must mark the zero-reduced-cost edges of an optimal dual, so
/// the optimal assignments are exactly the capacity-respecting assignments
/// that use tight edges only. Sample by sample, the lowest tight column that
/// can still be completed is fixed; completion is checked by searching for a
/// chain of tight moves among the not-yet-fixed samples.
fn canonicalize(assignee: &mut [usize], n_cols: usize, tight: impl Fn(usize, usize) -> bool) {
    let n = assignee.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_cols];
    for (r, &c) in assignee.iter().enumerate() {
        members[c].push(r);
    }
    // movable[a][b]: number of free samples in `a` with a tight edge to `b`.
    let mut movable = vec![vec![0usize; n_cols]; n_cols];
    let mut tight_row = vec![false; n_cols];
    let fill = |r: usize, tight_row: &mut Vec<bool>| {
        for (c, t) in tight_row.iter_mut().enumerate() {
            *t = tight(r, c);
        }
    };
    for r in 0..n {
        fill(r, &mut tight_row);
        let a = assignee[r];
        for b in 0..n_cols {
            if b != a && tight_row[b] {
                movable[a][b] += 1;
            }
        }
    }

    let mut locked = vec![false; n];
    let mut parent = vec![UNASSIGNED; n_cols];
    let mut queue = VecDeque::new();
    for r in 0..n {
        let cur = assignee[r];
        fill(r, &mut tight_row);
        for b in 0..n_cols {
            if b != cur && tight_row[b] {
                movable[cur][b] -= 1;
            }
        }
        locked[r] = true;

        for target in 0..cur {
            if !tight_row[target] {
                continue;
            }
            // BFS from `target` to `cur` over columns linked by movable samples.
            parent.iter_mut().for_each(|p| *p = UNASSIGNED);
            parent[target] = target;
            queue.clear();
            queue.push_back(target);
            while let Some(a) = queue.pop_front() {
                if a == cur {
                    break;
                }
                for b in 0..n_cols {
                    if parent[b] == UNASSIGNED && movable[a][b] > 0 {
                        parent[b] = a;
                        queue.push_back(b);
                    }
                }
            }
            if parent[cur] == UNASSIGNED {
                continue;
            }

            let mut b = cur;
            while b != target {
                let a = parent[b];
                let mover = *members[a]
                    .iter()
                    .filter(|&&m| !locked[m] && tight(m, b))
                    .min()
                    .expect("movable count out of sync");
                fill(mover, &mut tight_row);
                for c in 0..n_cols {
                    if tight_row[c] {
                        if c != a {
                            movable[a][c] -= 1;
                        }
                        if c != b {
                            movable[b][c] += 1;
                        }
                    }
                }
                let pos = members[a].iter().position(|&m| m == mover).expect("member");
                members[a].swap_remove(pos);
                members[b].push(mover);
                assignee[mover] = b;
                b = a;
            }
            let pos = members[cur].iter().position(|&m| m == r).expect("member");
            members[cur].swap_remove(pos);
            members[target].push(r);
            assignee[r] = target;
            break;
        }
    }
}

/// Largest sample count accepted by [`brute_force_assign`].
pub const BRUTE_FORCE_MAX_SAMPLES: usize = 10;

/// Exhaustive search over every quota-respecting assignment, in lexicographic
/// order; the first strictly best one wins. Verification oracle only.
pub fn brute_force_assign(cost: &CostMatrix) -> Result<AssignmentMatrix> {
    let n = cost.n_samples();
    if n > BRUTE_FORCE_MAX_SAMPLES {
        return Err(Error::Size(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_SAMPLES} samples, got {n}"
        )));
    }
    let quota = cost.quota()?;
    let k = cost.n_decoders();

    struct Search<'a> {
        cost: &'a CostMatrix,
        quota: usize,
        load: Vec<usize>,
        current: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize) {
            if i == self.cost.n_samples() {
                let total: f64 = self
                    .current
                    .iter()
                    .enumerate()
                    .map(|(n, &k)| self.cost.get(n, k))
                    .sum();
                if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                    self.best = Some((total, self.current.clone()));
                }
                return;
            }
            for k in 0..self.cost.n_decoders() {
                if self.load[k] < self.quota {
                    self.load[k] += 1;
                    self.current.push(k);
                    self.go(i + 1);
                    self.current.pop();
                    self.load[k] -= 1;
                }
            }
        }
    }

    let mut search = Search {
        cost,
        quota,
        load: vec![0; k],
        current: Vec::with_capacity(n),
        best: None,
    };
    search.go(0);
    let (_, assignee) = search.best.expect("at least one feasible assignment");
    AssignmentMatrix::new(assignee, k)
}

/// Lexicographically first minimum-cost permutation by enumeration.
/// Verification oracle for square problems.
pub fn brute_force_permutation(cost: &CostMatrix) -> Result<Vec<usize>> {
    if !cost.is_square() {
        return Err(Error::Dimension("brute force permutation needs a square matrix".into()));
    }
    Ok(brute_force_assign(cost)?.assignee().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn total(cost: &CostMatrix, sigma: &[usize]) -> f64 {
        sigma.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
    }

    fn random_int_costs(rng: &mut ChaCha8Rng, n: usize, k: usize, hi: i32) -> CostMatrix {
        let values = (0..n * k).map(|_| rng.gen_range(0..=hi) as f64).collect();
        CostMatrix::new(n, k, values).unwrap()
    }

    #[test]
    fn hungarian_zero_diagonal() {
        let cost = CostMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let sigma = hungarian_min_cost(&cost).unwrap();
        assert_eq!(sigma, vec![0, 1]);
        assert_eq!(total(&cost, &sigma), 0.0);
    }

    #[test]
    fn hungarian_three_by_three() {
        // Enumerating all six permutations gives the unique optimum 1 + 2 + 2.
        let cost =
            CostMatrix::from_rows(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]).unwrap();
        let sigma = hungarian_min_cost(&cost).unwrap();
        assert_eq!(sigma, vec![1, 0, 2]);
        assert_eq!(total(&cost, &sigma), 5.0);
        assert_eq!(brute_force_permutation(&cost).unwrap(), sigma);
    }

    #[test]
    fn hungarian_constant_matrix_picks_identity() {
        let cost = CostMatrix::new(4, 4, vec![7.0; 16]).unwrap();
        let sigma = hungarian_min_cost(&cost).unwrap();
        assert_eq!(sigma, vec![0, 1, 2, 3]);
        assert_eq!(total(&cost, &sigma), 28.0);
    }

    #[test]
    fn hungarian_rejects_non_square() {
        let cost = CostMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(hungarian_min_cost(&cost), Err(Error::Dimension(_))));
    }

    #[test]
    fn non_finite_costs_are_domain_errors() {
        let err = CostMatrix::new(2, 2, vec![0.0, f64::NAN, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let err = CostMatrix::from_rows(&[[0.0, f64::INFINITY], [1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn balanced_block_diagonal() {
        let cost =
            CostMatrix::from_rows(&[[0.0, 1.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]]).unwrap();
        let a = balanced_assign(&cost).unwrap();
        assert_eq!(a.assignee(), &[0, 0, 1, 1]);
        assert_eq!(cost.objective(&a), 0.0);
    }

    #[test]
    fn balanced_forced_split_tie_break() {
        // Both feasible assignments cost 5; the lexicographic rule keeps sample 0 on decoder 0.
        let cost = CostMatrix::from_rows(&[[0.0, 5.0], [0.0, 5.0]]).unwrap();
        let a = balanced_assign(&cost).unwrap();
        assert_eq!(a.assignee(), &[0, 1]);
        assert_eq!(cost.objective(&a), 5.0);
    }

    #[test]
    fn balanced_matches_brute_force_seeded_6x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(6003);
        let cost = random_int_costs(&mut rng, 6, 3, 9);
        let fast = balanced_assign(&cost).unwrap();
        let oracle = brute_force_assign(&cost).unwrap();
        assert_eq!(cost.objective(&fast), cost.objective(&oracle));
        assert_eq!(fast, oracle);
    }

    #[test]
    fn balanced_rejects_indivisible() {
        let cost = CostMatrix::new(3, 2, vec![0.0; 6]).unwrap();
        assert!(matches!(balanced_assign(&cost), Err(Error::Quota { .. })));
        assert!(matches!(brute_force_assign(&cost), Err(Error::Quota { .. })));
    }

    #[test]
    fn brute_force_examples() {
        let cost = CostMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(brute_force_assign(&cost).unwrap().assignee(), &[0, 1]);

        let cost = CostMatrix::from_rows(&[[3.0], [4.0]]).unwrap();
        assert_eq!(brute_force_assign(&cost).unwrap().assignee(), &[0, 0]);

        // Six quota-respecting assignments; the alternating one is the unique optimum at 4.
        let cost =
            CostMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0], [1.0, 2.0], [2.0, 1.0]]).unwrap();
        let a = brute_force_assign(&cost).unwrap();
        assert_eq!(a.assignee(), &[0, 1, 0, 1]);
        assert_eq!(cost.objective(&a), 4.0);
    }

    #[test]
    fn brute_force_size_limit() {
        let cost = CostMatrix::new(12, 2, vec![0.0; 24]).unwrap();
        assert!(matches!(brute_force_assign(&cost), Err(Error::Size(_))));
    }

    #[test]
    fn dense_and_merged_solvers_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, k) in &[(8, 2), (12, 3), (20, 4), (30, 5), (24, 6)] {
            for _ in 0..10 {
                let cost = random_int_costs(&mut rng, n, k, 5);
                let merged = balanced_assign(&cost).unwrap();
                let dense = balanced_assign_dense(&cost).unwrap();
                assert_eq!(merged, dense, "n={n} k={k}");
                assert!(merged.is_balanced());
            }
        }
    }

    #[test]
    fn constant_cost_fills_decoders_in_order() {
        let cost = CostMatrix::new(6, 3, vec![-0.25; 18]).unwrap();
        let a = balanced_assign(&cost).unwrap();
        assert_eq!(a.assignee(), &[0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn text_round_trip() {
        let input = "4 2\n0 1\n0 1\n1 0\n1 0\n";
        let cost = CostMatrix::read_text(input.as_bytes()).unwrap();
        let a = balanced_assign(&cost).unwrap();
        let mut out = Vec::new();
        a.write_text(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0 0\n1 0\n2 1\n3 1\n");
    }

    #[test]
    fn text_reader_reports_bad_input() {
        assert!(matches!(
            CostMatrix::read_text("2 2\n0 1\n0\n".as_bytes()),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            CostMatrix::read_text("2 x\n".as_bytes()),
            Err(Error::Parse(_))
        ));
    }
}
