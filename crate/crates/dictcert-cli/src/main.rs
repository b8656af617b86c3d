mod config;
mod emit;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use dictcert::balancedness::{alpha_bound, dense, BalanceOptions, SvMethod};
use dictcert::certificate::{build_certificate, verify_certificate, CertParams};
use dictcert::io::{read_instance, write_dlmat, write_instance};
use dictcert::learner::{antitonic_fit, phase_transition_grid, PhaseConfig};
use dictcert::model::{gen_coefficients, gen_dictionary, gen_dictionary_coherent_below, observe};
use dictcert::tangent::{is_local_min, solve_linearized, PdParams, SolverParams, VerdictConfig};
use dictcert::verify::{run_suite, Lemma};
use dictcert::{rng, Instance};
use serde_json::json;

use config::*;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] dictcert::Error),
    #[error("cli: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    AssertFailed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::AssertFailed(_) => 3,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

const COHERENCE_DRAWS: usize = 10_000;

fn load(src: &Source) -> Result<Instance> {
    if let Some(dir) = &src.instance {
        return Ok(read_instance(dir)?.0);
    }
    let n = src.n;
    let m = src.m.unwrap_or(n);
    let p = src.p.unwrap_or_else(|| dictcert::learner::default_p(n));
    let dseed = rng::derive(src.seed, 0);
    let a = match src.coherence_below {
        Some(b) => gen_dictionary_coherent_below(m, n, src.kind, src.k, b, dseed, COHERENCE_DRAWS)?.0,
        None => gen_dictionary(m, n, src.kind, dseed)?,
    };
    let x = gen_coefficients(n, p, src.k, rng::derive(src.seed, 1))?;
    Ok(observe(&a, &x)?)
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    base.with_file_name(format!("{stem}.{ext}"))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    emit::write_text(path, &emit::json_string(v)?)?;
    Ok(())
}

fn gen(args: &GenArgs) -> Result<()> {
    if args.source.instance.is_some() {
        return Err(CliError::Usage("gen draws a new instance; --instance is not accepted".into()));
    }
    let inst = load(&args.source)?;
    write_instance(&args.out, &inst, args.source.seed)?;
    Ok(())
}

fn certify(args: &CertifyArgs) -> Result<()> {
    if !(args.zeta_scale > 0.0 && args.zeta_scale <= 0.5) {
        return Err(CliError::Usage(format!("certificate: zeta_scale must lie in (0, 1/2], got {}", args.zeta_scale)));
    }
    let inst = load(&args.source)?;
    let (a, x) = (&inst.dict, &inst.coeffs);
    let params = CertParams { zeta_scale: args.zeta_scale, ..CertParams::default() };
    let state = build_certificate(a, x, &params)?;
    let bal = alpha_bound(a, x, &BalanceOptions { with_terms: false, ..BalanceOptions::default() })?;
    let report = verify_certificate(a, x, &state.lambda, bal.alpha)?;

    let csv_path = args.csv.clone().unwrap_or_else(|| with_ext(&args.out, "csv"));
    let lambda_path = args.lambda.clone().unwrap_or_else(|| with_ext(&args.out, "lambda.mat"));
    let rows: Vec<Vec<String>> = state
        .per_step
        .iter()
        .map(|s| vec![s.j.to_string(), emit::float(s.q_norm), emit::float(s.offsup_inf), s.zeta_zero.to_string()])
        .collect();
    emit::write_text(&csv_path, &emit::csv_string(&["j", "q_norm", "offsup_inf", "zeta_zero"], &rows)?)?;
    write_dlmat(&lambda_path, &state.lambda)?;

    let doc = json!({
        "n": a.n(), "m": a.m(), "p": x.p(), "k": x.k(),
        "mu": a.mu(),
        "k_mu": x.k() as f64 * a.mu(),
        "coherence_warning": state.coherence_warning,
        "passes": state.passes(),
        "restart_boundaries": state.restart_boundaries,
        "xi": bal.xi,
        "alpha": bal.alpha,
        "report": report,
        "all_ok": report.all_ok(),
    });
    write_json(&args.out, &doc)?;
    if args.assert_ok && !report.all_ok() {
        return Err(CliError::AssertFailed(format!(
            "certificate: conditions failed (interp_ok = {}, offsup_ok = {}, phi_ok = {})",
            report.interp_ok, report.offsup_ok, report.phi_ok
        )));
    }
    Ok(())
}

fn balance(args: &BalanceArgs) -> Result<()> {
    let inst = load(&args.source)?;
    let (a, x) = (&inst.dict, &inst.coeffs);
    let method = match args.method {
        Method::Auto => SvMethod::Auto,
        Method::Dense => SvMethod::Dense,
        Method::Lanczos => SvMethod::Lanczos,
    };
    let opts = BalanceOptions { method, with_terms: !args.no_terms, ..BalanceOptions::default() };
    let report = alpha_bound(a, x, &opts)?;
    let mut ok = !report.degenerate;
    if let Some(t) = &report.terms {
        ok &= t.chain_ok && t.tdiff_bound_ok && t.psi_sum_ok && t.identity_bound_ok;
    }

    let dense_check = if args.dense_check {
        match dense::xi(a, x) {
            Ok(xi_dense) => {
                let xi_tol = if report.xi_method == SvMethod::Lanczos { 1e-6 } else { 1e-8 };
                let xi_diff = (xi_dense - report.xi).abs();
                let mut psi_diff: f64 = 0.0;
                if let Some(t) = &report.terms {
                    for pn in &t.psi_norms {
                        let d = dense::psi(a, x, pn.row)?;
                        let want = d.singular_values().max();
                        psi_diff = psi_diff.max((pn.norm - want).abs() / want.max(1.0));
                    }
                }
                let agree = xi_diff <= xi_tol * report.xi.max(1.0) && psi_diff <= 1e-6;
                ok &= agree;
                json!({"xi_dense": xi_dense, "xi_abs_diff": xi_diff, "psi_max_rel_diff": psi_diff, "agree": agree})
            }
            Err(e @ dictcert::Error::Validation { .. }) => json!({"skipped": e.to_string()}),
            Err(e) => return Err(e.into()),
        }
    } else {
        serde_json::Value::Null
    };

    let doc = json!({ "report": report, "dense_check": dense_check });
    write_json(&args.out, &doc)?;
    if args.assert_ok && !ok {
        return Err(CliError::AssertFailed("balancedness: a bound check or the dense cross-check failed".into()));
    }
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<()> {
    if !(args.tol > 0.0) || args.max_iter == 0 {
        return Err(CliError::Usage("tangent: need tol > 0 and max_iter ≥ 1".into()));
    }
    let inst = load(&args.source)?;
    let (a, x) = (&inst.dict, &inst.coeffs);
    let solver = SolverParams { backend: args.backend, pd: PdParams { tol: args.tol, max_iter: args.max_iter } };
    let verdict = is_local_min(a, x, &VerdictConfig { solver, seed: rng::derive(args.source.seed, 2), ..VerdictConfig::default() })?;
    let direct = solve_linearized(a, x.dense(), &solver)?;
    let ev = &verdict.evidence;
    let margins = json!({
        "interp_dev": ev.certificate.map(|c| c.interp_dev),
        "offsup_slack": ev.certificate.map(|c| 0.5 - c.offsup_inf),
        "phi_slack": ev.certificate.map(|c| c.alpha / 2.0 - c.phi_norm),
        "dual_offsup_slack": ev.dual_offsup.map(|s| 1.0 - s),
        "dual_margin": ev.dual_margin,
        "objective_gap": direct.objective - ev.x_l1,
        "duality_gap": direct.gap,
    });
    let doc = json!({
        "verdict": verdict.is_local_min,
        "route": verdict.route,
        "alpha": ev.alpha,
        "xi": ev.xi,
        "objective": direct.objective,
        "x_l1": ev.x_l1,
        "backend": args.backend,
        "status": direct.status,
        "iterations": direct.iterations,
        "margins": margins,
        "evidence": ev,
    });
    write_json(&args.out, &doc)?;
    if args.assert_ok && verdict.is_local_min != dictcert::tangent::Decision::CertifiedYes {
        return Err(CliError::AssertFailed(format!("tangent: verdict is {:?}", verdict.is_local_min)));
    }
    Ok(())
}

fn phase(args: &PhaseArgs) -> Result<()> {
    let cfg: PhaseConfig = serde_json::from_str(&fs::read_to_string(&args.config)?)
        .map_err(|e| CliError::Usage(format!("learner: bad grid config {}: {e}", args.config.display())))?;
    let cells = phase_transition_grid(&cfg)?;
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.n.to_string(),
                c.m.to_string(),
                c.k.to_string(),
                c.p.to_string(),
                c.trials.to_string(),
                emit::float(c.success_frac),
                emit::float(c.mean_aligned_err),
                emit::float(c.mean_raw_err),
            ]
        })
        .collect();
    let header = ["n", "m", "k", "p", "trials", "success_frac", "mean_aligned_err", "mean_raw_err"];
    emit::write_text(&args.out, &emit::csv_string(&header, &rows)?)?;
    if let Some(svg) = &args.svg {
        let pts: Vec<_> = cells.iter().map(|c| (c.n, c.m, c.k, c.success_frac)).collect();
        emit::write_text(svg, &emit::heatmap_svg(&pts))?;
    }
    // isotonic summary per (n, m) column, on stderr only
    let mut cols: Vec<(usize, usize)> = cells.iter().map(|c| (c.n, c.m)).collect();
    cols.dedup();
    for (n, m) in cols {
        let col: Vec<_> = cells.iter().filter(|c| c.n == n && c.m == m).collect();
        let fit = antitonic_fit(
            &col.iter().map(|c| c.success_frac).collect::<Vec<_>>(),
            &col.iter().map(|c| c.trials as f64).collect::<Vec<_>>(),
        );
        let fit: Vec<String> = fit.iter().map(|v| format!("{v:.3}")).collect();
        eprintln!("n={n} m={m} isotonic success over k: [{}]", fit.join(", "));
    }
    Ok(())
}

fn lemmas(args: &LemmasArgs) -> Result<()> {
    let which: Vec<Lemma> = if args.which == "all" {
        Lemma::ALL.to_vec()
    } else {
        args.which.split(',').map(|s| s.trim().parse()).collect::<dictcert::Result<_>>()?
    };
    let reports = run_suite(&which, args.trials, args.seed)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.trials.to_string(),
                emit::float(r.estimate),
                emit::float(r.bound),
                emit::float(r.ci_halfwidth),
                r.violations.to_string(),
                r.passed.to_string(),
            ]
        })
        .collect();
    let header = ["check", "trials", "estimate", "bound", "ci_halfwidth", "violations", "passed"];
    emit::write_text(&args.csv, &emit::csv_string(&header, &rows)?)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let doc = json!({
        "seed": args.seed,
        "trials": args.trials,
        "all_passed": failed.is_empty(),
        "failed": failed,
        "reports": reports,
    });
    write_json(&args.out, &doc)?;
    if args.assert_ok && !failed.is_empty() {
        return Err(CliError::AssertFailed(format!("verify: failed checks: {}", failed.join(", "))));
    }
    Ok(())
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Certify(a) => certify(a),
        Command::Balance(a) => balance(a),
        Command::Solve(a) => solve(a),
        Command::Phase(a) => phase(a),
        Command::Lemmas(a) => lemmas(a),
    }
}

fn run(cli: Cli) -> Result<()> {
    let command = match (&cli.run_config, cli.command) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)?;
            let rc: RunConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad run configuration {}: {e}", path.display())))?;
            rc.command
        }
        (None, Some(c)) => c,
        (Some(_), Some(_)) => return Err(CliError::Usage("give either a subcommand or --run-config, not both".into())),
        (None, None) => return Err(CliError::Usage("missing subcommand (see --help)".into())),
    };
    if cli.print_config {
        print!("{}", emit::json_string(&RunConfig { command })?);
        return Ok(());
    }
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| dispatch(&command))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
