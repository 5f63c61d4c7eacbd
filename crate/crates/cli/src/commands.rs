//! Subcommand implementations. Each resolves its arguments, logs the
//! effective configuration, runs, and returns a report.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use log::info;
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use structcs_core::bounds::{corollary_bound, theorem1_bound, BoundParams};
use structcs_core::dependency::{dependency_report, equitable_coloring, verify_lemma1};
use structcs_core::deterministic::PolySpec;
use structcs_core::experiment::{
    config_echo, generate_sparse_signal, success_curve, write_outputs,
};
use structcs_core::matrix::io;
use structcs_core::recovery::{basis_pursuit, omp, DEFAULT_SOLVER_TOL};
use structcs_core::rip::{delta_exhaustive, delta_monte_carlo};
use structcs_core::{
    build_matrix, BlockStructureSpec, DistKind, ExperimentConfig, MatrixKind, RecoveryStatus,
    SensingMatrix, SupportSet,
};

use crate::cli::{
    BenchArgs, BoundsArgs, BuildArgs, DepsArgs, DistArg, FormatArg, GlobalArgs, KindArg,
    MatrixArgs, PresetArg, RecoverArgs, RipArgs, RipMethodArg, SolverArg,
};

/// What a subcommand produced. `pass = false` maps to exit status 1.
pub struct Report {
    pub json: Value,
    pub text: String,
    pub pass: bool,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Self {
            json,
            text,
            pass: true,
        }
    }
}

/// Bad input: reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

fn log_effective(command: &str, global: &GlobalArgs, args: &impl Serialize) {
    let effective = json!({
        "command": command,
        "seed": global.seed.unwrap_or(0),
        "threads": rayon::current_num_threads(),
        "json": global.json,
        "args": args,
    });
    info!("effective config: {effective}");
}

fn dist_kind(d: DistArg) -> DistKind {
    match d {
        DistArg::Gaussian => DistKind::Gaussian,
        DistArg::Bernoulli => DistKind::Bernoulli,
        DistArg::SparseTernary => DistKind::SparseTernary,
    }
}

/// A fully resolved matrix request: the block spec and the rows kept.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixRequest {
    pub spec: BlockStructureSpec,
    pub rows: usize,
}

impl MatrixRequest {
    pub fn build(&self) -> anyhow::Result<SensingMatrix> {
        let m = build_matrix(&self.spec)?;
        Ok(if self.rows < m.nrows() {
            m.truncate_rows(self.rows)?
        } else {
            m
        })
    }
}

fn required(v: Option<usize>, flag: &str, kind: &str) -> anyhow::Result<usize> {
    match v {
        Some(0) => Err(usage(format!("--{flag} must be at least 1"))),
        Some(v) => Ok(v),
        None => Err(usage(format!("--{flag} is required for --kind {kind}"))),
    }
}

/// Resolves matrix flags into a spec. When the requested row count is not
/// a multiple of the block height, whole block rows are built and the
/// surplus rows dropped.
pub fn resolve_matrix(a: &MatrixArgs, seed: Option<u64>) -> anyhow::Result<MatrixRequest> {
    if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading spec {}", path.display()))?;
        let mut spec: BlockStructureSpec = serde_json::from_str(&text)
            .map_err(|e| usage(format!("invalid spec {}: {e}", path.display())))?;
        if let Some(s) = seed {
            spec.seed = s;
        }
        spec.validate().map_err(|e| usage(e.to_string()))?;
        let rows = a.n.unwrap_or(spec.n());
        if rows == 0 || rows > spec.n() {
            bail!(usage(format!(
                "--n {rows} must be between 1 and the spec's {} rows",
                spec.n()
            )));
        }
        return Ok(MatrixRequest { spec, rows });
    }
    let kind = a
        .kind
        .ok_or_else(|| usage("--kind (or --spec) is required"))?;
    let dist = dist_kind(a.dist.unwrap_or(DistArg::Gaussian));
    let seed = seed.unwrap_or(0);
    let name = format!("{kind:?}").to_lowercase();
    let request = match kind {
        KindArg::Devore => {
            let p = required(a.p, "p", &name)?;
            let r = a.r.unwrap_or(1);
            let t = a.t.unwrap_or(1);
            let s = a.s.unwrap_or(1);
            let total = p
                .checked_pow(r as u32 + 1)
                .ok_or_else(|| usage("p^(r+1) overflows"))?;
            let l = a.l.unwrap_or(total / t.max(1));
            let ps = PolySpec { p, r, t, s, l };
            ps.validate().map_err(|e| usage(e.to_string()))?;
            let spec = ps.to_block_spec();
            let rows = a.n.unwrap_or(spec.n());
            MatrixRequest { spec, rows }
        }
        KindArg::Iid => {
            let n = required(a.n, "n", &name)?;
            let big_n = required(a.big_n, "N", &name)?;
            MatrixRequest {
                spec: BlockStructureSpec::iid(n, big_n, dist, seed),
                rows: n,
            }
        }
        KindArg::Toeplitz => {
            let n = required(a.n, "n", &name)?;
            let big_n = required(a.big_n, "N", &name)?;
            MatrixRequest {
                spec: BlockStructureSpec::toeplitz_block(big_n, n, 1, 1, dist, seed),
                rows: n,
            }
        }
        KindArg::ToeplitzBlock | KindArg::Circulant | KindArg::CirculantCirculant => {
            let e = a.e.unwrap_or(1);
            if e == 0 {
                bail!(usage("--e must be at least 1"));
            }
            let k = match (a.k, a.big_n) {
                (Some(k), None) => k,
                (None, Some(big_n)) if big_n % e == 0 => big_n / e,
                (None, Some(big_n)) => {
                    bail!(usage(format!("--N {big_n} is not a multiple of --e {e}")))
                }
                (Some(k), Some(big_n)) if k * e == big_n => k,
                (Some(k), Some(big_n)) => {
                    bail!(usage(format!("--k {k} times --e {e} is not --N {big_n}")))
                }
                (None, None) => bail!(usage(format!("--N or --k is required for --kind {name}"))),
            };
            let (l, d, rows) = match (a.l, a.d, a.n) {
                (Some(l), Some(d), None) => (l, d, l * d),
                (Some(l), Some(d), Some(n)) if n <= l * d => (l, d, n),
                (Some(l), Some(d), Some(n)) => {
                    bail!(usage(format!("--n {n} exceeds l*d = {}", l * d)))
                }
                (None, Some(d), Some(n)) if d > 0 => (n.div_ceil(d), d, n),
                (Some(l), None, Some(n)) if l > 0 => (l, n.div_ceil(l), n),
                (None, None, Some(n)) => (n, 1, n),
                (Some(l), None, None) => (l, 1, l),
                _ => bail!(usage(format!("--kind {name} needs two of --n, --l, --d"))),
            };
            let spec = match kind {
                KindArg::ToeplitzBlock => {
                    BlockStructureSpec::toeplitz_block(k, l, d, e, dist, seed)
                }
                KindArg::Circulant => BlockStructureSpec::circulant_block(k, l, d, e, dist, seed),
                _ => BlockStructureSpec::circulant_circulant(k, l, d, e, dist, seed),
            };
            MatrixRequest { spec, rows }
        }
    };
    request.spec.validate().map_err(|e| usage(e.to_string()))?;
    if request.rows == 0 || request.rows > request.spec.n() {
        bail!(usage(format!(
            "--n must be between 1 and {}",
            request.spec.n()
        )));
    }
    Ok(request)
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

pub fn read_matrix(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let m = if is_binary(path) {
        io::read_binary(BufReader::new(file))
    } else {
        io::read_csv(BufReader::new(file))
    };
    m.map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn build(global: &GlobalArgs, args: &BuildArgs) -> anyhow::Result<Report> {
    let request = resolve_matrix(&args.matrix, global.seed)?;
    let format = args.format.unwrap_or(match &args.out {
        Some(p) if is_binary(p) => FormatArg::Binary,
        _ => FormatArg::Csv,
    });
    log_effective(
        "build",
        global,
        &json!({ "matrix": request, "out": args.out, "format": format, "spec_out": args.spec_out }),
    );
    let m = request.build()?;
    if let Some(path) = &args.spec_out {
        std::fs::write(path, serde_json::to_string_pretty(&request.spec)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            match format {
                FormatArg::Csv => io::write_csv(m.entries(), &mut w)?,
                FormatArg::Binary => io::write_binary(m.entries(), &mut w)?,
            }
            w.flush()?;
        }
        None if !global.json => {
            if format == FormatArg::Binary {
                bail!(usage("binary output needs --out"));
            }
            let stdout = std::io::stdout();
            io::write_csv(m.entries(), stdout.lock())?;
        }
        None => {}
    }
    let json = json!({
        "kind": request.spec.kind,
        "rows": m.nrows(),
        "cols": m.ncols(),
        "block_rows": request.spec.n(),
        "variables": m.variables().len(),
        "spec": request.spec,
        "out": args.out,
    });
    let text = match &args.out {
        Some(p) => format!(
            "wrote {} {}x{} matrix ({} distinct variables) to {}",
            request.spec.kind,
            m.nrows(),
            m.ncols(),
            m.variables().len(),
            p.display()
        ),
        None => String::new(),
    };
    Ok(Report::ok(json, text))
}

pub fn rip(global: &GlobalArgs, args: &RipArgs) -> anyhow::Result<Report> {
    let order = args.order.ok_or_else(|| usage("--order is required"))?;
    let method = args.method.unwrap_or(RipMethodArg::Exhaustive);
    let samples = args.samples.unwrap_or(1000);
    let seed = global.seed.unwrap_or(0);
    let (m, source) = match &args.matrix_file {
        Some(path) => (
            SensingMatrix::from_dense(read_matrix(path)?)?,
            json!({ "file": path }),
        ),
        None => {
            let request = resolve_matrix(&args.matrix, global.seed)?;
            (request.build()?, serde_json::to_value(&request)?)
        }
    };
    log_effective(
        "rip",
        global,
        &json!({ "matrix": source, "order": order, "method": method, "samples": samples }),
    );
    let est = match method {
        RipMethodArg::Exhaustive => delta_exhaustive(&m, order),
        RipMethodArg::Mc => delta_monte_carlo(&m, order, samples, seed),
    }
    .map_err(|e| usage(e.to_string()))?;
    let method_name = match method {
        RipMethodArg::Exhaustive => "exhaustive",
        RipMethodArg::Mc => "mc",
    };
    let json = json!({
        "delta": est.delta,
        "method": method_name,
        "order": order,
        "samples": if method == RipMethodArg::Mc { Some(samples) } else { None },
        "worst_support": est.worst_support,
        "rows": m.nrows(),
        "cols": m.ncols(),
    });
    let text = format!(
        "delta_{order} = {:.12} ({method_name}), worst support {:?}",
        est.delta,
        est.worst_support.indices()
    );
    Ok(Report::ok(json, text))
}

pub fn deps(global: &GlobalArgs, args: &DepsArgs) -> anyhow::Result<Report> {
    let request = resolve_matrix(&args.matrix, global.seed)?;
    let cols = request.spec.big_n();
    let support = match (&args.support, args.order) {
        (Some(t), _) => t.clone(),
        (None, Some(order)) => {
            let seed = global.seed.unwrap_or(0);
            generate_sparse_signal(cols, order, seed)
                .map_err(|e| usage(e.to_string()))?
                .support()
                .to_vec()
        }
        (None, None) => bail!(usage("--support or --order is required")),
    };
    log_effective(
        "deps",
        global,
        &json!({ "matrix": request, "support": support, "coloring": args.coloring }),
    );
    let t = SupportSet::new(support, cols).map_err(|e| usage(e.to_string()))?;
    let m = request.build()?;
    let report = match m.spec().kind {
        MatrixKind::ToeplitzBlock | MatrixKind::CirculantBlock => verify_lemma1(&m, &t)?,
        _ => dependency_report(&m, &t)?,
    };
    let mut pass = report.pass;
    let coloring = if args.coloring {
        Some(match equitable_coloring(&m, &t) {
            Ok(c) => json!({
                "q": c.q,
                "class_sizes": c.classes.iter().map(Vec::len).collect::<Vec<_>>(),
                "classes": c.classes,
            }),
            Err(e) => {
                pass = false;
                json!({ "error": e.to_string() })
            }
        })
    } else {
        None
    };
    let sizes = report.row_sizes();
    let json = json!({
        "T": t,
        "per_row_sizes": sizes,
        "max": report.max_size,
        "bound": report.bound,
        "regime": report.regime,
        "pass": pass,
        "rows": m.nrows(),
        "kind": m.spec().kind,
        "coloring": coloring,
    });
    let bound = report.bound.map_or("none".to_string(), |b| b.to_string());
    let mut text = format!(
        "T = {:?}: max dependent rows {} (bound {bound}) over {} rows: {}",
        t.indices(),
        report.max_size,
        m.nrows(),
        if report.pass { "pass" } else { "FAIL" }
    );
    if let Some(c) = &coloring {
        text.push_str(&format!("\ncoloring: {c}"));
    }
    Ok(Report { json, text, pass })
}

pub fn bounds(global: &GlobalArgs, args: &BoundsArgs) -> anyhow::Result<Report> {
    let m = args.m.ok_or_else(|| usage("--m is required"))?;
    let big_n = args.big_n.ok_or_else(|| usage("--N is required"))?;
    let l = args.l.ok_or_else(|| usage("--l is required"))?;
    let delta = args.delta.ok_or_else(|| usage("--delta is required"))?;
    let mut params = BoundParams::with_defaults(delta, m, big_n, args.n.unwrap_or(1), l.max(1));
    if let Some(c0) = args.c0 {
        params.c0 = c0;
        params.c2 = c0 / 10.0;
    }
    if let Some(c2) = args.c2 {
        params.c2 = c2;
    }
    params.l = l;
    let eval = |p: &BoundParams| match args.l2 {
        Some(l2) => corollary_bound(p, l, l2),
        None => theorem1_bound(p),
    };
    if args.n.is_none() {
        // evaluate at the sample-complexity threshold
        let threshold = eval(&params).map_err(|e| usage(e.to_string()))?.n_required;
        params.n = usize::try_from(threshold.max(1)).map_err(|_| usage("threshold overflows"))?;
    }
    let l_eff = l * args.l2.unwrap_or(1);
    params.d = (params.n / l_eff.max(1)).max(1);
    log_effective(
        "bounds",
        global,
        &json!({ "params": params, "l2": args.l2 }),
    );
    let r = eval(&params).map_err(|e| usage(e.to_string()))?;
    let json = json!({
        "regime": r.regime,
        "exponent": r.exponent,
        "prob_lower": r.prob_lower,
        "n_required": r.n_required,
        "c1": r.c1,
        "vacuous": r.vacuous,
        "params": params,
        "l_effective": l_eff,
    });
    let text = format!(
        "regime {:?}: P(RIP) >= {:.6} at n = {} (exponent {:.6}); n_required = {}{}",
        r.regime,
        r.prob_lower,
        params.n,
        r.exponent,
        r.n_required,
        if r.vacuous { " [vacuous]" } else { "" }
    );
    Ok(Report::ok(json, text))
}

pub fn recover(global: &GlobalArgs, args: &RecoverArgs) -> anyhow::Result<Report> {
    let matrix_path = args
        .matrix
        .as_ref()
        .ok_or_else(|| usage("--matrix is required"))?;
    let y_path = args.y.as_ref().ok_or_else(|| usage("--y is required"))?;
    let solver = args.solver.unwrap_or(SolverArg::Bp);
    let tol = args.tol.unwrap_or(DEFAULT_SOLVER_TOL);
    let max_iter = args.max_iter.unwrap_or(5000);
    let a = read_matrix(matrix_path)?;
    let y_file = File::open(y_path).with_context(|| format!("opening {}", y_path.display()))?;
    let y = io::read_vector(BufReader::new(y_file))
        .map_err(|e| usage(format!("{}: {e}", y_path.display())))?;
    let sparsity = args.sparsity.unwrap_or(a.nrows().min(a.ncols()));
    log_effective(
        "recover",
        global,
        &json!({
            "matrix": matrix_path, "y": y_path, "solver": solver, "tol": tol,
            "max_iter": max_iter, "sparsity": sparsity, "out": args.out,
        }),
    );
    let res = match solver {
        SolverArg::Bp => basis_pursuit(&a, &y, tol, max_iter),
        SolverArg::Omp => omp(&a, &y, sparsity, tol),
    }
    .map_err(|e| usage(e.to_string()))?;
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            io::write_vector(&res.estimate, &mut w)?;
            w.flush()?;
        }
        None if !global.json => io::write_vector(&res.estimate, std::io::stdout().lock())?,
        None => {}
    }
    let scale = res.estimate.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let nonzeros = res
        .estimate
        .iter()
        .filter(|v| v.abs() > 1e-12 * scale)
        .count();
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let json = json!({
        "solver": solver,
        "status": res.status,
        "iterations": res.iterations,
        "residual_norm": res.residual_norm,
        "relative_residual": if y_norm > 0.0 { res.residual_norm / y_norm } else { res.residual_norm },
        "nonzeros": nonzeros,
        "length": res.estimate.len(),
        "out": args.out,
    });
    let text = match &args.out {
        Some(p) => format!(
            "{:?} after {} iterations, residual {:.3e}, {nonzeros} nonzeros; estimate written to {}",
            res.status,
            res.iterations,
            res.residual_norm,
            p.display()
        ),
        None => String::new(),
    };
    Ok(Report {
        json,
        text,
        pass: res.status == RecoveryStatus::Converged,
    })
}

/// Preset, then the config file's `experiment` object, then flags.
pub fn resolve_experiment(
    global: &GlobalArgs,
    args: &BenchArgs,
) -> anyhow::Result<ExperimentConfig> {
    let preset = match args.preset.unwrap_or(PresetArg::Desk) {
        PresetArg::Desk => ExperimentConfig::desk(),
        PresetArg::Full => ExperimentConfig::full(),
    };
    let Value::Object(mut cfg) = serde_json::to_value(&preset)? else {
        unreachable!("experiment config serializes to an object");
    };
    if let Some(extra) = &args.experiment {
        cfg.extend(extra.clone());
    }
    let flags = [
        ("N", args.big_n.map(Value::from)),
        ("m", args.m.map(Value::from)),
        ("trials", args.trials.map(Value::from)),
        ("n_grid", args.n_grid.clone().map(Value::from)),
        ("master_seed", global.seed.map(Value::from)),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.insert(key.to_string(), v);
        }
    }
    let config: ExperimentConfig = serde_json::from_value(Value::Object(cfg))
        .map_err(|e| usage(format!("invalid experiment config: {e}")))?;
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

pub fn bench(global: &GlobalArgs, args: &BenchArgs) -> anyhow::Result<Report> {
    let config = resolve_experiment(global, args)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("bench-out"));
    log_effective(
        "bench",
        global,
        &json!({ "experiment": config_echo(&config), "out": out, "cache": args.cache }),
    );
    let curve = success_curve(&config, args.cache.as_deref())?;
    write_outputs(&out, &config, &curve)?;
    let json = json!({
        "out": out,
        "fingerprint": format!("{:016x}", config.fingerprint()),
        "config": config,
        "points": curve.points,
    });
    let text = format!(
        "{}wrote curve.csv, config-echo.json and plot.gp to {}",
        curve.to_csv(),
        out.display()
    );
    Ok(Report::ok(json, text))
}
