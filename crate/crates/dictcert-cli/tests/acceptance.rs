//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Wall-clock limits are part of each criterion.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dictcert::balancedness::{dense, restricted_min_sv, SvMethod};
use dictcert::certificate::{build_certificate, verify_certificate, CertParams, INTERP_TOL};
use dictcert::learner::{antitonic_fit, default_p, phase_transition_grid, PhaseConfig, SolveParams};
use dictcert::linalg::l1_norm;
use dictcert::model::{gen_coefficients, gen_dictionary, gen_dictionary_coherent_below, gen_instance, observe, DictKind};
use dictcert::rng::{self, par_map};
use dictcert::tangent::{
    is_local_min, rip_failure_witness, solve_linearized, vertex_enumeration, Backend, Decision, PdParams, SolverParams,
    VerdictConfig,
};
use dictcert::verify::{mc_q_scaling, run_suite, Lemma};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_interpolation() -> Outcome {
    let rows = par_map(50, |t| {
        let s = rng::derive_path(SEED, &[1, t as u64]);
        let (a, _) = gen_dictionary_coherent_below(16, 16, DictKind::Orthonormal, 2, 0.125, rng::derive(s, 0), 100)?;
        let x = gen_coefficients(16, 800, 2, rng::derive(s, 1))?;
        let st = build_certificate(&a, &x, &CertParams::default())?;
        let r = verify_certificate(&a, &x, &st.lambda, 1.0)?;
        Ok::<_, dictcert::Error>((r.interp_dev, r.offsup_inf))
    });
    let mut ok = 0;
    let (mut worst_dev, mut worst_off) = (0.0f64, 0.0f64);
    for r in &rows {
        if let Ok((dev, off)) = r {
            worst_dev = worst_dev.max(*dev);
            worst_off = worst_off.max(*off);
            ok += usize::from(*dev <= INTERP_TOL && *off <= 0.5);
        }
    }
    outcome(ok == 50, format!("{ok}/50 certified, max interp dev {worst_dev:.2e}, max offsup {worst_off:.3}"))
}

fn c2_q_scaling() -> Outcome {
    match mc_q_scaling(16, 16, 2, &[250, 500, 1000, 2000], 50, rng::derive(SEED, 2), DictKind::Orthonormal) {
        Ok(r) => outcome((r.estimate + 0.5).abs() <= 0.2, format!("slope {:.3} (target -0.5 +/- 0.2)", r.estimate)),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn c3_balancedness() -> Outcome {
    let rows = par_map(50, |t| {
        let s = rng::derive_path(SEED, &[3, t as u64]);
        let (a, _) = gen_dictionary_coherent_below(8, 8, DictKind::GaussianUnit, 1, 0.5, rng::derive(s, 0), 100_000)?;
        let x = gen_coefficients(8, 512, 1, rng::derive(s, 1))?;
        let est = restricted_min_sv(&a, &x, SvMethod::Auto)?;
        let oracle = dense::xi(&a, &x)?;
        Ok::<_, dictcert::Error>((est.xi, (est.xi - oracle).abs(), est.method))
    });
    let mut big = 0;
    let mut worst = 0.0f64;
    let mut all_dense = true;
    let mut errors = 0;
    for r in &rows {
        match r {
            Ok((xi, diff, method)) => {
                big += usize::from(*xi > 0.25);
                worst = worst.max(*diff);
                all_dense &= *method == SvMethod::Dense;
            }
            Err(_) => errors += 1,
        }
    }
    outcome(
        big >= 45 && worst <= 1e-8 && all_dense && errors == 0,
        format!("xi > 1/4 in {big}/50, max |xi - svd oracle| {worst:.2e}, dense path {all_dense}, errors {errors}"),
    )
}

fn c4_local_min() -> Outcome {
    let strict = SolverParams { backend: Backend::Pd, pd: PdParams { tol: 1e-11, max_iter: 200_000 } };
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [1usize, 2] {
        let rows = par_map(50, |t| {
            let s = rng::derive_path(SEED, &[4, k as u64, t as u64]);
            let inst = gen_instance(16, 16, k, 800, DictKind::Orthonormal, s)?;
            let v = is_local_min(&inst.dict, &inst.coeffs, &VerdictConfig { seed: rng::derive(s, 9), ..Default::default() })?;
            if v.is_local_min != Decision::CertifiedYes {
                return Ok::<_, dictcert::Error>((false, 0.0));
            }
            let sol = solve_linearized(&inst.dict, inst.coeffs.dense(), &strict)?;
            Ok((true, (sol.objective - l1_norm(inst.coeffs.dense())).abs()))
        });
        let yes = rows.iter().filter(|r| matches!(r, Ok((true, _)))).count();
        let worst = rows.iter().filter_map(|r| r.as_ref().ok()).map(|r| r.1).fold(0.0, f64::max);
        let errors = rows.iter().filter(|r| r.is_err()).count();
        pass &= yes >= 45 && worst <= 1e-7 && errors == 0;
        parts.push(format!("k={k}: {yes}/50 certified_yes, max |obj - |X|_1| {worst:.1e}"));
    }
    outcome(pass, parts.join("; "))
}

fn c5_backends() -> Outcome {
    let rows = par_map(20, |t| {
        let inst = gen_instance(3, 3, 1, 4, DictKind::GaussianUnit, rng::derive_path(SEED, &[5, t as u64]))?;
        let x = inst.coeffs.dense();
        let oracle = vertex_enumeration(&inst.dict, x)?;
        let lp = solve_linearized(&inst.dict, x, &SolverParams { backend: Backend::Lp, ..Default::default() })?;
        let pd_params = SolverParams { backend: Backend::Pd, pd: PdParams { tol: 1e-12, max_iter: 400_000 } };
        let pd = solve_linearized(&inst.dict, x, &pd_params)?;
        Ok::<_, dictcert::Error>(((lp.objective - oracle).abs(), (pd.objective - oracle).abs()))
    });
    let (mut lp_worst, mut pd_worst, mut errors) = (0.0f64, 0.0f64, 0);
    for r in &rows {
        match r {
            Ok((l, p)) => {
                lp_worst = lp_worst.max(*l);
                pd_worst = pd_worst.max(*p);
            }
            Err(_) => errors += 1,
        }
    }
    outcome(
        lp_worst <= 1e-9 && pd_worst <= 1e-9 && errors == 0,
        format!("20 instances, max deviation from vertex enumeration: lp {lp_worst:.1e}, pd {pd_worst:.1e}"),
    )
}

fn c6_witness() -> Outcome {
    let run = || -> dictcert::Result<(f64, f64, bool)> {
        let a = gen_dictionary(12, 12, DictKind::Orthonormal, rng::derive(SEED, 6))?;
        let x = gen_coefficients(12, 60, 3, rng::derive(SEED, 7))?;
        let inst = observe(&a, &x)?;
        let perm: Vec<usize> = (0..12).map(|i| (i + 5) % 12).collect();
        let (_, w) = rip_failure_witness(&inst.dict, &inst.coeffs, &perm)?;
        Ok((w.bilinear_norm, w.diag_inf, w.same_column_sparsity))
    };
    match run() {
        Ok((bil, diag, same)) => outcome(
            bil <= 1e-12 && diag <= 1e-12 && same,
            format!("bilinear residual {bil:.1e}, diagonal residual {diag:.1e}, equal column supports {same}"),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn c7_lemmas() -> Outcome {
    match run_suite(&Lemma::ALL, 1000, rng::derive(SEED, 8)) {
        Ok(reports) => {
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
            let detail = if failed.is_empty() {
                format!("{} checks passed", reports.len())
            } else {
                format!("failed: {}", failed.join(", "))
            };
            outcome(failed.is_empty(), detail)
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn c8_phase() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, ks) in [(8usize, vec![1usize, 2, 4]), (16, vec![1, 4, 8])] {
        let cfg = PhaseConfig {
            n_list: vec![n],
            ratio_list: vec![1.0],
            k_list: ks.clone(),
            trials: 10,
            seed: rng::derive(SEED, 10),
            p: Some(default_p(n)),
            kind: DictKind::GaussianUnit,
            solve: SolveParams::default(),
        };
        let cells = match phase_transition_grid(&cfg) {
            Ok(c) => c,
            Err(e) => return outcome(false, e.to_string()),
        };
        let succ: Vec<f64> = cells.iter().map(|c| c.success_frac).collect();
        let fit = antitonic_fit(&succ, &vec![10.0; succ.len()]);
        let monotone = fit.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let half = cells.iter().find(|c| c.k == n.div_ceil(2)).map(|c| c.success_frac).unwrap_or(f64::NAN);
        let gap = succ[0] - half;
        pass &= gap >= 0.5 && monotone;
        parts.push(format!("n={n} k={ks:?} success {succ:?} gap {gap:.1} isotonic nonincreasing {monotone}"));
    }
    outcome(pass, parts.join("; "))
}

fn run_cli(dir: &Path, jobs: &str, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_dictcert"))
        .arg("--jobs")
        .arg(jobs)
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn c9_jobs() -> Outcome {
    let Ok(tmp) = tempfile::tempdir() else {
        return outcome(false, "no temporary directory".into());
    };
    let grid = r#"{"n_list":[6],"ratio_list":[1.0],"k_list":[1,2],"trials":3,"seed":3}"#;
    if fs::write(tmp.path().join("grid.json"), grid).is_err() {
        return outcome(false, "cannot write grid config".into());
    }
    let files = ["cert.json", "cert.csv", "cert.lambda.mat", "solve.json", "bal.json", "lemmas.json", "lemmas.csv", "grid.csv", "grid.svg"];
    let mut outputs = Vec::new();
    for jobs in ["1", "2", "5"] {
        let d = tmp.path().join(format!("jobs{jobs}"));
        if fs::create_dir(&d).is_err() {
            return outcome(false, "cannot create run directory".into());
        }
        let runs: [&[&str]; 5] = [
            &["certify", "--n", "16", "--k", "2", "--p", "400", "--kind", "orthonormal", "--seed", "7"],
            &["solve", "--n", "8", "--k", "1", "--p", "80", "--seed", "7", "--out", "solve.json"],
            &["balance", "--n", "8", "--k", "2", "--p", "60", "--seed", "7", "--out", "bal.json"],
            &["lemmas", "--which", "eig,rows,psi,chernoff", "--trials", "100", "--seed", "7", "--out", "lemmas.json"],
            &["phase", "--config", "../grid.json", "--out", "grid.csv", "--svg", "grid.svg"],
        ];
        for args in runs {
            if !run_cli(&d, jobs, args) {
                return outcome(false, format!("dictcert {} failed with --jobs {jobs}", args[0]));
            }
        }
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.join(f)).unwrap_or_default()).collect();
        outputs.push(bytes);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("{} output files identical across --jobs 1, 2, 5: {same}", files.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 9] = [
        (1, "certificate interpolation and sup-norm", Duration::from_secs(60), c1_interpolation),
        (2, "golfing residual scaling", Duration::from_secs(300), c2_q_scaling),
        (3, "restricted singular value", Duration::from_secs(300), c3_balancedness),
        (4, "local-minimum verdicts", Duration::from_secs(600), c4_local_min),
        (5, "linearized backends vs vertex enumeration", Duration::from_secs(60), c5_backends),
        (6, "permutation witness", Duration::from_secs(60), c6_witness),
        (7, "lemma suite", Duration::from_secs(600), c7_lemmas),
        (8, "phase transition", Duration::from_secs(1200), c8_phase),
        (9, "determinism across --jobs", Duration::from_secs(600), c9_jobs),
    ];
    let mut failures = 0;
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let pass = o.pass && took <= limit;
        failures += usize::from(!pass);
        println!(
            "criterion {id} [{}] {name}: {} ({:.1}s, limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {}/9 passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
