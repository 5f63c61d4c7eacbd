//! Stochastic dependency between rows of a column submatrix.
//!
//! Two rows of `Phi_T` are dependent when they contain copies of a common
//! scalar random variable. This is read off the `var_id` provenance of the
//! matrix, never from the entry values.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{MatrixKind, SensingMatrix};

/// A sorted set of distinct, 0-based column indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    /// Validates against a column count `cols`. Order of `indices` is
    /// irrelevant; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>, cols: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter("support must be non-empty".into()));
        }
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "duplicate support index {}",
                w[0]
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= cols {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    len: cols,
                });
            }
        }
        Ok(Self(indices))
    }

    /// Trusts the caller: `indices` must be sorted and distinct.
    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|T|(|T|-1)`.
    pub fn pair_count(&self) -> usize {
        self.len() * (self.len() - 1)
    }
}

/// Which half of the row-dependency bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRegime {
    /// `|T|(|T|-1) < l`: at most `|T|(|T|-1)` dependent rows.
    FewColumns,
    /// `|T|(|T|-1) >= l`: at most `l-1` dependent rows.
    ManyColumns,
}

#[derive(Debug, Clone, Serialize)]
pub struct DependencyReport {
    pub support: SupportSet,
    pub per_row: Vec<Vec<usize>>,
    pub max_size: usize,
    pub bound: Option<usize>,
    pub regime: Option<BoundRegime>,
    pub pass: bool,
}

impl DependencyReport {
    pub fn row_sizes(&self) -> Vec<usize> {
        self.per_row.iter().map(Vec::len).collect()
    }
}

fn check_support(m: &SensingMatrix, t: &SupportSet) -> Result<()> {
    match t.indices().last() {
        Some(&last) if last >= m.ncols() => Err(Error::IndexOutOfRange {
            index: last,
            len: m.ncols(),
        }),
        None => Err(Error::InvalidParameter("support must be non-empty".into())),
        _ => Ok(()),
    }
}

/// Rows of each label restricted to the columns of `t`.
fn label_rows(m: &SensingMatrix, t: &SupportSet) -> HashMap<usize, Vec<usize>> {
    let ids = m.var_id();
    let mut map: HashMap<usize, Vec<usize>> = HashMap::new();
    for &c in t.indices() {
        for i in 0..m.nrows() {
            let rows = map.entry(ids[(i, c)]).or_default();
            if rows.last() != Some(&i) {
                rows.push(i);
            }
        }
    }
    map
}

fn rows_dependent_on(
    m: &SensingMatrix,
    t: &SupportSet,
    map: &HashMap<usize, Vec<usize>>,
    i: usize,
) -> Vec<usize> {
    let ids = m.var_id();
    let mut out = BTreeSet::new();
    for &c in t.indices() {
        if let Some(rows) = map.get(&ids[(i, c)]) {
            out.extend(rows.iter().copied().filter(|&j| j != i));
        }
    }
    out.into_iter().collect()
}

/// `D_{T,i}`: rows `j != i` of `M_T` sharing a variable with row `i`.
pub fn dependent_rows(m: &SensingMatrix, t: &SupportSet, i: usize) -> Result<Vec<usize>> {
    check_support(m, t)?;
    if i >= m.nrows() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: m.nrows(),
        });
    }
    let map = label_rows(m, t);
    Ok(rows_dependent_on(m, t, &map, i))
}

/// Dependency sets of every row, checked for symmetry and irreflexivity.
pub fn dependency_report(m: &SensingMatrix, t: &SupportSet) -> Result<DependencyReport> {
    check_support(m, t)?;
    let map = label_rows(m, t);
    let per_row: Vec<Vec<usize>> = (0..m.nrows())
        .map(|i| rows_dependent_on(m, t, &map, i))
        .collect();
    for (i, deps) in per_row.iter().enumerate() {
        for &j in deps {
            if j == i {
                return Err(Error::Invariant(format!(
                    "row {i} listed as dependent on itself"
                )));
            }
            if per_row[j].binary_search(&i).is_err() {
                return Err(Error::Invariant(format!(
                    "dependency {i} -> {j} is not symmetric"
                )));
            }
        }
    }
    let max_size = per_row.iter().map(Vec::len).max().unwrap_or(0);
    Ok(DependencyReport {
        support: t.clone(),
        per_row,
        max_size,
        bound: None,
        regime: None,
        pass: true,
    })
}

/// The row-dependency bound for a block Toeplitz matrix with `l` block
/// rows: `|T|(|T|-1)` when that is below `l`, otherwise `l-1`.
pub fn lemma1_bound(support_len: usize, l: usize) -> (usize, BoundRegime) {
    let pairs = support_len * support_len.saturating_sub(1);
    if pairs < l {
        (pairs, BoundRegime::FewColumns)
    } else {
        (l - 1, BoundRegime::ManyColumns)
    }
}

/// Computes every `D_{T,i}` of a block Toeplitz (or block circulant) matrix
/// and checks `max_i |D_{T,i}|` against [`lemma1_bound`].
pub fn verify_lemma1(m: &SensingMatrix, t: &SupportSet) -> Result<DependencyReport> {
    match m.spec().kind {
        MatrixKind::ToeplitzBlock | MatrixKind::CirculantBlock => {}
        other => {
            return Err(Error::WrongKind {
                expected: "toeplitz_block or circulant_block",
                found: other.to_string(),
            })
        }
    }
    let mut report = dependency_report(m, t)?;
    let (bound, regime) = lemma1_bound(t.len(), m.spec().l);
    report.bound = Some(bound);
    report.regime = Some(regime);
    report.pass = report.max_size <= bound;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CirculantCount {
    pub count: usize,
    pub bound: usize,
    pub pass: bool,
}

/// Counts the rows of a `p x q` circulant that depend on its first row,
/// via Hamming distances between shifted indicator tuples of `t`.
///
/// Row `i` of the shift matrix is `sigma^i(t)`, `sigma` the cyclic right
/// shift; restricted to the columns of `t`, row 0 is all ones, and row `i`
/// shares a variable with row 0 exactly when its restriction is not all
/// zeros, i.e. its Hamming distance to row 0 is below `|T|`.
pub fn circulant_dependency_bound(p: usize, q: usize, t: &SupportSet) -> Result<CirculantCount> {
    if p == 0 || q == 0 || p > q {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= p <= q, got p={p}, q={q}"
        )));
    }
    if t.len() > q {
        return Err(Error::InvalidParameter(format!(
            "|T| = {} exceeds q = {q}",
            t.len()
        )));
    }
    if let Some(&last) = t.indices().last() {
        if last >= q {
            return Err(Error::IndexOutOfRange {
                index: last,
                len: q,
            });
        }
    }
    let mut indicator = vec![false; q];
    for &j in t.indices() {
        indicator[j] = true;
    }
    let restrict = |row: &[bool]| -> Vec<bool> { t.indices().iter().map(|&j| row[j]).collect() };
    let first = restrict(&indicator);
    let mut shifted = indicator.clone();
    let mut count = 0;
    for _ in 1..p {
        shifted.rotate_right(1);
        let row = restrict(&shifted);
        let hamming = row.iter().zip(&first).filter(|(a, b)| a != b).count();
        if hamming < t.len() {
            count += 1;
        }
    }
    let bound = t.pair_count();
    Ok(CirculantCount {
        count,
        bound,
        pass: count <= bound,
    })
}

/// Disjoint classes covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColoringPartition {
    pub classes: Vec<Vec<usize>>,
    pub q: usize,
}

impl ColoringPartition {
    /// Checks coverage, independence within classes and size balance.
    pub fn verify(&self, adjacency: &[Vec<usize>]) -> Result<()> {
        let n = adjacency.len();
        if self.classes.len() != self.q {
            return Err(Error::Invariant(format!(
                "{} classes for q = {}",
                self.classes.len(),
                self.q
            )));
        }
        let mut color = vec![usize::MAX; n];
        for (c, class) in self.classes.iter().enumerate() {
            for &v in class {
                if v >= n || color[v] != usize::MAX {
                    return Err(Error::Invariant(format!("vertex {v} missing or repeated")));
                }
                color[v] = c;
            }
        }
        if color.contains(&usize::MAX) {
            return Err(Error::Invariant("classes do not cover every vertex".into()));
        }
        for (v, nbrs) in adjacency.iter().enumerate() {
            if let Some(&w) = nbrs.iter().find(|&&w| color[w] == color[v]) {
                return Err(Error::Invariant(format!(
                    "adjacent vertices {v} and {w} share class {}",
                    color[v]
                )));
            }
        }
        let (lo, hi) = (n / self.q, n.div_ceil(self.q));
        if let Some(c) = self.classes.iter().find(|c| c.len() < lo || c.len() > hi) {
            return Err(Error::Invariant(format!(
                "class of size {} outside [{lo}, {hi}]",
                c.len()
            )));
        }
        Ok(())
    }
}

/// Equitable `q`-coloring: greedy assignment to the smallest admissible
/// class, then shifts of single vertices along chains of classes from a
/// largest class to a class at least two smaller. Each shift strictly
/// lowers the sum of squared class sizes, so the loop terminates; if no
/// chain exists while the sizes are unbalanced, the coloring fails.
pub fn equitable_coloring_graph(adjacency: &[Vec<usize>], q: usize) -> Result<ColoringPartition> {
    if q == 0 {
        return Err(Error::InvalidParameter("q must be positive".into()));
    }
    let n = adjacency.len();
    let mut color = vec![usize::MAX; n];
    let mut sizes = vec![0usize; q];
    for v in 0..n {
        let mut blocked = vec![false; q];
        for &w in &adjacency[v] {
            if color[w] != usize::MAX {
                blocked[color[w]] = true;
            }
        }
        let pick = (0..q)
            .filter(|&c| !blocked[c])
            .min_by_key(|&c| (sizes[c], c))
            .ok_or_else(|| {
                Error::ColoringFailure(format!("vertex {v} has neighbors in all {q} classes"))
            })?;
        color[v] = pick;
        sizes[pick] += 1;
    }

    // a vertex of class `from` that can move to class `to`
    let movable = |color: &[usize], from: usize, to: usize| -> Option<usize> {
        (0..n).find(|&v| color[v] == from && adjacency[v].iter().all(|&w| color[w] != to))
    };

    loop {
        let max = *sizes.iter().max().unwrap_or(&0);
        let min = *sizes.iter().min().unwrap_or(&0);
        if max <= min + 1 {
            break;
        }
        // breadth-first search over classes from every largest class
        let mut parent: Vec<Option<usize>> = vec![None; q];
        let mut seen = vec![false; q];
        let mut queue = std::collections::VecDeque::new();
        for c in 0..q {
            if sizes[c] == max {
                seen[c] = true;
                queue.push_back(c);
            }
        }
        let mut target = None;
        while let Some(c) = queue.pop_front() {
            if sizes[c] + 2 <= max {
                target = Some(c);
                break;
            }
            for next in 0..q {
                if !seen[next] && movable(&color, c, next).is_some() {
                    seen[next] = true;
                    parent[next] = Some(c);
                    queue.push_back(next);
                }
            }
        }
        let target = target.ok_or_else(|| {
            Error::ColoringFailure(format!(
                "no class chain rebalances sizes {min}..{max} with q = {q}"
            ))
        })?;
        let mut path = vec![target];
        while let Some(p) = parent[*path.last().unwrap()] {
            path.push(p);
        }
        path.reverse();
        // shift from the end of the chain backwards so each receiving class
        // has only lost vertices since the search
        for w in path.windows(2).rev() {
            let (from, to) = (w[0], w[1]);
            let v = movable(&color, from, to).ok_or_else(|| {
                Error::ColoringFailure("class chain invalidated during shift".into())
            })?;
            color[v] = to;
            sizes[from] -= 1;
            sizes[to] += 1;
        }
    }

    let mut classes = vec![Vec::new(); q];
    for (v, &c) in color.iter().enumerate() {
        classes[c].push(v);
    }
    let partition = ColoringPartition { classes, q };
    partition
        .verify(adjacency)
        .map_err(|e| Error::ColoringFailure(format!("post-check failed: {e}")))?;
    Ok(partition)
}

/// Equitable coloring of the row dependency graph of `M_T` with
/// `q = |T|(|T|-1)+1` colors.
pub fn equitable_coloring(m: &SensingMatrix, t: &SupportSet) -> Result<ColoringPartition> {
    let report = dependency_report(m, t)?;
    equitable_coloring_graph(&report.per_row, t.pair_count() + 1)
}
