use serde_json::{json, Value};

use rittkit::decomp::{decompose as run_decompose, DecompOptions};
use rittkit::markov::{markov_decomposition_demo, schur_markov, toeplitz_symbol, unitary_mixture_markov};
use rittkit::sampling::{gaussian_mat, random_unitary, substream};
use rittkit::sqfun::{square_function, SqSpec};
use rittkit::stolzexample::{growth_experiment, make_diag_a, rank_one_test};
use rittkit::superop::SuperOp;
use rittkit::{Exponent, Mat};

use crate::output::{emit, json_bytes, write_to, Cell, Table, SCHEMA};
use crate::{
    checks, CheckArgs, DecomposeArgs, Failure, GrowthArgs, Input, MarkovArgs, MarkovKind, Operator,
    SqfunArgs,
};

fn require_seed(seed: Option<u64>) -> Result<u64, Failure> {
    seed.ok_or_else(|| Failure::Usage("--seed is required for randomized commands".into()))
}

fn p_json(p: Exponent) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        json!(p.value())
    }
}

fn operator(op: Operator, n: usize) -> Result<SuperOp, Failure> {
    let a = make_diag_a(n)?;
    Ok(match op {
        Operator::La => a.left_mult(),
        Operator::Ra => a.right_mult(),
    })
}

fn require_split_range(p: Exponent) -> Result<(), Failure> {
    if !(p.value() > 1.0 && p.value() < 2.0) {
        return Err(Failure::Usage(format!("p must lie in (1, 2), got {p}")));
    }
    Ok(())
}

pub fn growth(a: &GrowthArgs) -> Result<(), Failure> {
    if a.p.value() == 2.0 {
        return Err(Failure::Usage("p = 2 has no column/row gap".into()));
    }
    let report = growth_experiment(a.p, &a.n_list)?;
    let summary = json!({
        "schema": SCHEMA,
        "command": "growth",
        "config": { "p": p_json(a.p), "n_list": a.n_list },
        "slope": report.slope,
        "residual": report.residual,
        "theta": report.theta,
        "expected_slope": report.expected_slope,
    });
    let table = Table {
        header: vec!["n", "col_norm", "row_norm", "ratio"],
        rows: report
            .rows
            .iter()
            .map(|r| vec![Cell::U(r.n as u64), Cell::F(r.col_norm), Cell::F(r.row_norm), Cell::F(r.ratio)])
            .collect(),
    };
    let mut full = summary.clone();
    full["rows"] = serde_json::to_value(&report.rows).expect("serializable");
    emit(&a.output, &full, &table)?;
    if let Some(path) = &a.summary {
        write_to(Some(path), &json_bytes(&summary))?;
    }
    Ok(())
}

pub fn decompose(a: &DecomposeArgs) -> Result<(), Failure> {
    let seed = require_seed(a.seed)?;
    require_split_range(a.p)?;
    let t = operator(a.operator, a.n)?;
    let x = gaussian_mat(&mut substream(seed, 0), a.n);
    let mut opts = DecompOptions { tol: a.tol, k_max: a.k_max, k: a.k, ..DecompOptions::default() };
    opts.rad.seed = seed;
    let r = run_decompose(&t, &x, a.p, a.splitter, &opts)?;
    let json = json!({
        "schema": SCHEMA,
        "command": "decompose",
        "config": {
            "p": p_json(a.p), "n": a.n, "seed": seed, "operator": a.operator,
            "splitter": a.splitter, "tol": a.tol, "k_max": a.k_max, "k": a.k,
        },
        "result": r,
    });
    let table = Table {
        header: vec!["splitter", "constant", "residual", "k_used", "col_sq", "row_sq"],
        rows: vec![vec![
            Cell::S(serde_json::to_value(a.splitter).expect("serializable").as_str().unwrap_or("").into()),
            Cell::F(r.constant),
            Cell::F(r.residual),
            Cell::U(r.k_used as u64),
            Cell::F(r.col_sq),
            Cell::F(r.row_sq),
        ]],
    };
    emit(&a.output, &json, &table)
}

pub fn sqfun(a: &SqfunArgs) -> Result<(), Failure> {
    let t = operator(a.operator, a.n)?;
    let (x, seed) = match a.input {
        Input::Random => {
            let seed = require_seed(a.seed)?;
            (gaussian_mat(&mut substream(seed, 0), a.n), Some(seed))
        }
        Input::RankOne => (rank_one_test(a.n)?, a.seed),
    };
    let mut spec = SqSpec::new(a.p, a.alpha, a.kind).with_tol(a.tol).with_k_max(a.k_max);
    if let Some(rho) = a.rho {
        spec = spec.with_rho(rho);
    }
    let r = square_function(&t, &x, &spec)?;
    let json = json!({
        "schema": SCHEMA,
        "command": "sqfun",
        "config": {
            "p": p_json(a.p), "alpha": a.alpha, "kind": a.kind, "n": a.n, "operator": a.operator,
            "input": a.input, "rho": a.rho, "seed": seed, "tol": a.tol, "k_max": a.k_max,
        },
        "result": r,
    });
    let table = Table {
        header: vec!["value", "lower", "upper", "k_used", "tail_bound", "converged"],
        rows: vec![vec![
            Cell::F(r.value),
            Cell::F(r.lower),
            Cell::F(r.upper),
            Cell::U(r.k_used as u64),
            Cell::F(r.tail_bound),
            Cell::B(r.converged),
        ]],
    };
    emit(&a.output, &json, &table)
}

pub fn markov(a: &MarkovArgs) -> Result<(), Failure> {
    let seed = require_seed(a.seed)?;
    require_split_range(a.p)?;
    let map = match a.kind {
        MarkovKind::Toeplitz => {
            if !(a.c.abs() < 1.0) {
                return Err(Failure::Usage(format!("--c must lie in (-1, 1), got {}", a.c)));
            }
            schur_markov(toeplitz_symbol(a.n, a.c))?
        }
        MarkovKind::Unitary => {
            let u = random_unitary(&mut substream(seed, 1), a.n);
            unitary_mixture_markov(vec![0.5, 0.5], vec![u.clone(), u.adjoint()])?
        }
    };
    let mut spectrum: Vec<f64> = map.op.eigenvalues()?.iter().map(|z| z.re).collect();
    spectrum.sort_by(f64::total_cmp);
    let x: Mat = gaussian_mat(&mut substream(seed, 0), a.n);
    let mut opts = DecompOptions { tol: a.tol, k_max: a.k_max, ..DecompOptions::default() };
    opts.rad.seed = seed;
    let demo = markov_decomposition_demo(&map, a.p, &x, a.splitter, &opts)?;
    let json = json!({
        "schema": SCHEMA,
        "command": "markov",
        "config": {
            "kind": a.kind, "n": a.n, "c": a.c, "p": p_json(a.p), "seed": seed,
            "splitter": a.splitter, "tol": a.tol, "k_max": a.k_max,
        },
        "certificate": map.certificate,
        "spectrum": spectrum,
        "demo": demo,
    });
    let table = Table {
        header: vec!["valid", "fixed_dim", "constant", "residual", "k_used", "col_sq", "row_sq"],
        rows: vec![vec![
            Cell::B(map.certificate.all()),
            Cell::U(demo.fixed_dim as u64),
            Cell::F(demo.result.constant),
            Cell::F(demo.result.residual),
            Cell::U(demo.result.k_used as u64),
            Cell::F(demo.result.col_sq),
            Cell::F(demo.result.row_sq),
        ]],
    };
    emit(&a.output, &json, &table)
}

pub fn check(a: &CheckArgs) -> Result<(), Failure> {
    let results = checks::run_suite(&a.suite, a.seed)
        .ok_or_else(|| Failure::Usage(format!("unknown suite {:?}; known: {}", a.suite, checks::SUITES.join(", "))))?;
    let passed = results.iter().all(|r| r.passed);
    let json = json!({
        "schema": SCHEMA,
        "command": "check",
        "suite": a.suite,
        "seed": a.seed,
        "passed": passed,
        "results": results,
    });
    let table = Table {
        header: vec!["check", "passed", "detail"],
        rows: results
            .iter()
            .map(|r| vec![Cell::S(r.name.clone()), Cell::B(r.passed), Cell::S(r.detail.clone())])
            .collect(),
    };
    emit(&a.output, &json, &table)?;
    for r in &results {
        eprintln!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Failed(format!("suite {} had failures", a.suite)))
    }
}
