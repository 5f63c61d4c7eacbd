//! Monte Carlo success-probability curves: the fraction of random sparse
//! signals recovered exactly, as a function of the number of measurements.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{build_structured, BlockStructureSpec, DistKind};
use crate::recovery::{basis_pursuit_with, is_exact_recovery, omp, BpOptions, SparseSignal};
use crate::rng::{derive_seed, name_key, rng_from_seed};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Matrix family compared in an experiment. Each is instantiated at every
/// grid value `n` as an `n x N` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Iid,
    /// Scalar Toeplitz: `N` columns, `n` rows, `1 x 1` blocks.
    Toeplitz,
    /// Block Toeplitz with `l` block rows of `d = n/l` rows, see
    /// [`toeplitz_block_shape`].
    ToeplitzBlock,
}

impl TemplateKind {
    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Iid => "iid",
            TemplateKind::Toeplitz => "toeplitz",
            TemplateKind::ToeplitzBlock => "toeplitz_block",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Bp,
    Omp,
}

/// `(l, d)` for the block Toeplitz template: `l` is the largest divisor of
/// `n` with `l <= 3m(3m-1)` and `d = n/l >= 8`; `(1, n)` when none exists.
pub fn toeplitz_block_shape(n: usize, m: usize) -> (usize, usize) {
    let cap = 3 * m * (3 * m).saturating_sub(1);
    (1..=n)
        .rev()
        .find(|&l| n.is_multiple_of(l) && l <= cap && n / l >= 8)
        .map_or((1, n), |l| (l, n / l))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: usize,
    pub kinds: Vec<TemplateKind>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub distribution: DistKind,
    pub solver: SolverKind,
    pub rel_tol: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// `N = 512`, `m = 10`, 200 trials at `n = 40, 60, ..., 240, 256`.
    pub fn desk() -> Self {
        let mut n_grid: Vec<usize> = (40..=240).step_by(20).collect();
        n_grid.push(256);
        Self {
            big_n: 512,
            m: 10,
            kinds: vec![
                TemplateKind::Iid,
                TemplateKind::Toeplitz,
                TemplateKind::ToeplitzBlock,
            ],
            n_grid,
            trials: 200,
            distribution: DistKind::Bernoulli,
            solver: SolverKind::Bp,
            rel_tol: crate::recovery::DEFAULT_REL_TOL,
            solver_tol: crate::recovery::DEFAULT_SOLVER_TOL,
            max_iter: 5000,
            master_seed: 2024,
        }
    }

    /// `N = 2048`, `m = 20`, 1000 trials at `n = 60, 80, ..., 400`.
    pub fn full() -> Self {
        Self {
            big_n: 2048,
            m: 20,
            n_grid: (60..=400).step_by(20).collect(),
            trials: 1000,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.big_n == 0 || self.trials == 0 {
            return Err(Error::InvalidParameter(
                "N and trials must be at least 1".into(),
            ));
        }
        if self.m > self.big_n {
            return Err(Error::InvalidParameter(format!(
                "m = {} exceeds N = {}",
                self.m, self.big_n
            )));
        }
        if self.kinds.is_empty() || self.n_grid.is_empty() {
            return Err(Error::InvalidParameter(
                "kinds and n_grid must be non-empty".into(),
            ));
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "n_grid must be positive and strictly increasing".into(),
            ));
        }
        if let Some(&n) = self.n_grid.last() {
            if n > self.big_n {
                return Err(Error::InvalidParameter(format!(
                    "grid value {n} exceeds N = {}",
                    self.big_n
                )));
            }
        }
        if !(self.rel_tol > 0.0 && self.solver_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "tolerances and max_iter must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Matrix spec for `kind` at `n` rows, seeded per trial.
    pub fn matrix_spec(&self, kind: TemplateKind, n: usize, trial: usize) -> BlockStructureSpec {
        let seed = derive_seed(&[
            self.master_seed,
            name_key(kind.name()),
            n as u64,
            trial as u64,
        ]);
        let dist = self.distribution;
        let mut spec = match kind {
            TemplateKind::Iid => BlockStructureSpec::iid(n, self.big_n, dist, seed),
            TemplateKind::Toeplitz => {
                BlockStructureSpec::toeplitz_block(self.big_n, n, 1, 1, dist, seed)
            }
            TemplateKind::ToeplitzBlock => {
                let (l, d) = toeplitz_block_shape(n, self.m);
                BlockStructureSpec::toeplitz_block(self.big_n, l, d, 1, dist, seed)
            }
        };
        spec.distribution.scale_rows = n;
        spec
    }

    /// The signal seed depends on `(n, trial)` only, so all kinds see the
    /// same signals.
    pub fn signal_seed(&self, n: usize, trial: usize) -> u64 {
        derive_seed(&[self.master_seed, n as u64, trial as u64])
    }

    /// Hash of every field that affects a cell's outcome.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self).unwrap_or_default();
        name_key(&json)
    }
}

/// `m` uniformly placed standard normal entries.
pub fn generate_sparse_signal(big_n: usize, m: usize, seed: u64) -> Result<SparseSignal> {
    if m > big_n {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds N = {big_n}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let support = sample(&mut rng, big_n, m).into_vec();
    let values = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    SparseSignal::new(big_n, support, values)
}

/// One sense-and-recover trial. Solver errors count as failures.
pub fn run_trial(
    config: &ExperimentConfig,
    kind: TemplateKind,
    n: usize,
    trial: usize,
) -> Result<bool> {
    let signal = generate_sparse_signal(config.big_n, config.m, config.signal_seed(n, trial))?;
    let matrix = build_structured(&config.matrix_spec(kind, n, trial))?;
    let y = signal.measure(&matrix)?;
    let result = match config.solver {
        SolverKind::Bp => basis_pursuit_with(
            &matrix,
            &y,
            &BpOptions {
                tol: config.solver_tol,
                max_iter: config.max_iter,
                ..BpOptions::default()
            },
        ),
        SolverKind::Omp => omp(&matrix, &y, config.m.min(n), config.solver_tol),
    };
    match result {
        Ok(r) => Ok(is_exact_recovery(&signal, &r, config.rel_tol)),
        Err(e) => {
            log::warn!("{} n={n} trial={trial}: solver error: {e}", kind.name());
            Ok(false)
        }
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let t = trials as f64;
    let p = successes as f64 / t;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / t;
    let center = (p + z2 / (2.0 * t)) / denom;
    let half = Z95 * (p * (1.0 - p) / t + z2 / (4.0 * t * t)).sqrt() / denom;
    // the endpoints are exactly 0 and 1 at the extremes
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub kind: TemplateKind,
    pub n: usize,
    pub successes: usize,
    pub trials: usize,
    pub fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl CurvePoint {
    pub fn new(kind: TemplateKind, n: usize, successes: usize, trials: usize) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(successes, trials);
        Self {
            kind,
            n,
            successes,
            trials,
            fraction: successes as f64 / trials as f64,
            ci_lo,
            ci_hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessCurve {
    pub points: Vec<CurvePoint>,
}

impl SuccessCurve {
    pub fn series(&self, kind: TemplateKind) -> Vec<&CurvePoint> {
        self.points.iter().filter(|p| p.kind == kind).collect()
    }

    pub fn point(&self, kind: TemplateKind, n: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.kind == kind && p.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,n,successes,trials,fraction,ci_lo,ci_hi\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                p.kind.name(),
                p.n,
                p.successes,
                p.trials,
                p.fraction,
                p.ci_lo,
                p.ci_hi
            );
        }
        out
    }
}

/// Gnuplot script plotting `curve.csv` with Wilson error bars.
pub fn plot_script(config: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output 'curve.png'");
    let _ = writeln!(
        s,
        "set title 'Recovery success, N = {}, m = {}, {} trials'",
        config.big_n, config.m, config.trials
    );
    let _ = writeln!(s, "set xlabel 'measurements n'");
    let _ = writeln!(s, "set ylabel 'fraction recovered'");
    let _ = writeln!(s, "set yrange [0:1.05]");
    let _ = writeln!(s, "set key bottom right");
    let plots: Vec<String> = config
        .kinds
        .iter()
        .map(|k| {
            format!(
                "'curve.csv' using (strcol(1) eq '{0}' ? $2 : NaN):5:6:7 with yerrorlines title '{0}'",
                k.name()
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedCell {
    fingerprint: u64,
    kind: TemplateKind,
    n: usize,
    successes: usize,
    trials: usize,
}

fn cell_path(dir: &Path, fingerprint: u64, kind: TemplateKind, n: usize) -> PathBuf {
    dir.join(format!("{fingerprint:016x}-{}-{n}.json", kind.name()))
}

fn read_cell(path: &Path, fingerprint: u64, kind: TemplateKind, n: usize) -> Option<CachedCell> {
    let text = fs::read_to_string(path).ok()?;
    let cell: CachedCell = serde_json::from_str(&text).ok()?;
    (cell.fingerprint == fingerprint && cell.kind == kind && cell.n == n).then_some(cell)
}

/// Writes through a temporary file and a rename so a cell is never seen
/// half written.
fn write_cell(path: &Path, cell: &CachedCell) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(cell)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn run_cell(config: &ExperimentConfig, kind: TemplateKind, n: usize) -> Result<usize> {
    let outcomes: Vec<bool> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, kind, n, t))
        .collect::<Result<_>>()?;
    Ok(outcomes.into_iter().filter(|&ok| ok).count())
}

/// Sweeps the full `(kind, n)` grid. With `cache_dir`, finished cells are
/// stored there and reused on later runs with an identical config.
pub fn success_curve(config: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<SuccessCurve> {
    config.validate()?;
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir)?;
    }
    let fingerprint = config.fingerprint();
    let mut points = Vec::with_capacity(config.kinds.len() * config.n_grid.len());
    for &kind in &config.kinds {
        for &n in &config.n_grid {
            let path = cache_dir.map(|d| cell_path(d, fingerprint, kind, n));
            let cached = path
                .as_deref()
                .and_then(|p| read_cell(p, fingerprint, kind, n));
            let successes = match cached {
                Some(cell) => {
                    log::debug!("cached cell {} n={n}", kind.name());
                    cell.successes
                }
                None => {
                    let s = run_cell(config, kind, n)?;
                    log::info!("{} n={n}: {s}/{}", kind.name(), config.trials);
                    if let Some(p) = &path {
                        write_cell(
                            p,
                            &CachedCell {
                                fingerprint,
                                kind,
                                n,
                                successes: s,
                                trials: config.trials,
                            },
                        )?;
                    }
                    s
                }
            };
            points.push(CurvePoint::new(kind, n, successes, config.trials));
        }
    }
    Ok(SuccessCurve { points })
}

/// Resolved configuration plus the block shape used at each grid value.
pub fn config_echo(config: &ExperimentConfig) -> serde_json::Value {
    let shapes: Vec<serde_json::Value> = config
        .n_grid
        .iter()
        .map(|&n| {
            let (l, d) = toeplitz_block_shape(n, config.m);
            serde_json::json!({ "n": n, "l": l, "d": d })
        })
        .collect();
    serde_json::json!({ "config": config, "toeplitz_block_shapes": shapes })
}

/// Writes `curve.csv`, `config-echo.json` and `plot.gp` into `dir`.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, curve: &SuccessCurve) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("curve.csv"), curve.to_csv())?;
    fs::write(
        dir.join("config-echo.json"),
        serde_json::to_string_pretty(&config_echo(config))? + "\n",
    )?;
    fs::write(dir.join("plot.gp"), plot_script(config))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_shapes() {
        // m = 10 caps l at 870
        assert_eq!(toeplitz_block_shape(40, 10), (5, 8));
        assert_eq!(toeplitz_block_shape(256, 10), (32, 8));
        assert_eq!(toeplitz_block_shape(60, 10), (6, 10));
        assert_eq!(toeplitz_block_shape(7, 10), (1, 7));
        // m = 1 caps l at 6
        assert_eq!(toeplitz_block_shape(120, 1), (6, 20));
    }

    #[test]
    fn wilson_closed_forms() {
        let z2 = Z95 * Z95;
        let (lo, hi) = wilson_interval(0, 50);
        assert_eq!(lo, 0.0);
        assert!((hi - z2 / (50.0 + z2)).abs() < 1e-15);
        let (lo, hi) = wilson_interval(50, 50);
        assert!((lo - 50.0 / (50.0 + z2)).abs() < 1e-15);
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson_interval(10, 20);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-15 && lo < 0.5);
    }

    #[test]
    fn signals() {
        let s = generate_sparse_signal(30, 0, 1).unwrap();
        assert_eq!(s.to_dense(), vec![0.0; 30]);
        let dense = generate_sparse_signal(12, 12, 5).unwrap();
        assert_eq!(dense.support(), (0..12).collect::<Vec<_>>().as_slice());
        assert_eq!(
            generate_sparse_signal(50, 4, 9).unwrap(),
            generate_sparse_signal(50, 4, 9).unwrap()
        );
        assert!(generate_sparse_signal(3, 4, 9).is_err());
    }

    #[test]
    fn validation() {
        let c = ExperimentConfig::desk();
        c.validate().unwrap();
        assert!(ExperimentConfig {
            n_grid: vec![40, 40],
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            n_grid: vec![600],
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig { trials: 0, ..c }.validate().is_err());
    }

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            big_n: 64,
            m: 3,
            n_grid: vec![2, 32, 64],
            trials: 4,
            ..ExperimentConfig::desk()
        }
    }

    #[test]
    fn paired_signals_and_replay() {
        let c = tiny();
        for kind in c.kinds.clone() {
            assert_eq!(
                run_trial(&c, kind, 32, 1).unwrap(),
                run_trial(&c, kind, 32, 1).unwrap()
            );
        }
        assert_ne!(
            c.matrix_spec(TemplateKind::Iid, 32, 0).seed,
            c.matrix_spec(TemplateKind::Toeplitz, 32, 0).seed
        );
    }

    #[test]
    fn curve_extremes_and_cache() {
        let c = tiny();
        let dir = tempfile::tempdir().unwrap();
        let curve = success_curve(&c, Some(dir.path())).unwrap();
        for kind in &c.kinds {
            // n < m cannot succeed; square IID-like systems always do
            assert_eq!(curve.point(*kind, 2).unwrap().successes, 0);
        }
        assert_eq!(curve.point(TemplateKind::Iid, 64).unwrap().successes, 4);
        let again = success_curve(&c, Some(dir.path())).unwrap();
        assert_eq!(curve.to_csv(), again.to_csv());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 9);
    }
}
