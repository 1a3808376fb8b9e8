//! One function per subcommand.

use std::f64::consts::TAU;

use serde::Serialize;
use serde_json::json;
use ttlab::clark::{alpha_grid, clark_measure, disintegration_check};
use ttlab::experiments::{
    angular_condition_a, angular_condition_b, fejer_suite, hs_approx_gap, product_defect_s1, stz_defect_s1,
    stz_trace, szego_gap, ConvergenceRecord, SweepRecord,
};
use ttlab::operators::{
    apply_function, build_clark_unitary, build_truncated_toeplitz, hs_norm, op_norm, rank_one_defect, trace,
    trace_formula_rhs, trace_norm, OperatorMatrix,
};
use ttlab::{generate_zeros, ExperimentConfig, FiniteBlaschke, TrigPoly, C64};

use crate::config::ConfigFile;
use crate::error::CliError;
use crate::output::{convergence_csv, csv_bytes, sweep_csv, OutputSink, RunManifest, RunStatus};
use crate::{Command, Flags};

pub const CONTRACTION_TOL: f64 = 1e-6;
pub const RANK_ONE_TOL: f64 = 1e-7;

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn largest_b(exp: &ExperimentConfig) -> Result<FiniteBlaschke, CliError> {
    let n = *exp.n_values.last().expect("validated non-empty");
    Ok(FiniteBlaschke::from_sequence(&exp.sequence, n)?)
}

fn put_sequence(sink: &mut OutputSink, exp: &ExperimentConfig) -> Result<(), CliError> {
    let n = *exp.n_values.last().expect("validated non-empty");
    let zeros: Vec<[f64; 2]> = generate_zeros(&exp.sequence, n)?.into_iter().map(pair).collect();
    sink.put_json("sequence", &json!({ "kind": exp.sequence.tag(), "zeros": zeros }))
}

fn put_convergence(sink: &mut OutputSink, stem: &str, recs: &[ConvergenceRecord]) -> Result<(), CliError> {
    sink.put_csv(stem, convergence_csv(recs))?;
    sink.put_json(stem, recs)
}

fn put_sweep(sink: &mut OutputSink, stem: &str, recs: &[SweepRecord]) -> Result<(), CliError> {
    sink.put_csv(stem, sweep_csv(recs))?;
    sink.put_json(stem, recs)
}

fn matrix_csv(m: &OperatorMatrix) -> Result<Vec<u8>, CliError> {
    let header: Vec<String> = ["i", "j", "re", "im"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = m
        .entries()
        .map(|(i, j, re, im)| vec![i.to_string(), j.to_string(), num(re), num(im)])
        .collect();
    csv_bytes(&header, &rows)
}

pub fn execute(cmd: &Command, flags: &Flags, config: &ConfigFile) -> Result<RunManifest, CliError> {
    let exp = config.experiment()?;
    let mut sink = OutputSink::start(
        &config.output_dir(),
        &config.output.formats,
        cmd.name(),
        config.hash(),
        config.sweep.seed,
    )?;
    sink.put("config.toml", config.to_toml().as_bytes())?;
    let result = match cmd {
        Command::Operator(_) => operator(&mut sink, &exp, flags),
        Command::Clark(_) => clark(&mut sink, &exp, flags),
        Command::Szego(_) => szego(&mut sink, &exp),
        Command::Stz(_) => stz(&mut sink, &exp),
        Command::Angular(_) => angular(&mut sink, &exp),
        Command::Lemmas(_) => lemmas(&mut sink, &exp, config),
    };
    match result {
        Ok(status) => sink.finish(status),
        Err(e) => {
            sink.note(format!("run aborted: {e}"));
            sink.finish(RunStatus::Failed)?;
            Err(e)
        }
    }
}

#[derive(Serialize)]
struct OperatorReport<'a> {
    zeros: Vec<[f64; 2]>,
    symbol: String,
    function: String,
    trace: [f64; 2],
    trace_formula_rhs: [f64; 2],
    hs_norm: f64,
    trace_norm: f64,
    op_norm: f64,
    function_trace: [f64; 2],
    matrix: &'a OperatorMatrix,
}

fn operator(sink: &mut OutputSink, exp: &ExperimentConfig, flags: &Flags) -> Result<RunStatus, CliError> {
    let b = largest_b(exp)?;
    let q = &exp.quadrature;
    let t = build_truncated_toeplitz(&b, &exp.symbol, q)?;
    let rhs = trace_formula_rhs(&b, &exp.symbol, q)?;
    let ft = apply_function(&t, &exp.function)?;
    let report = OperatorReport {
        zeros: b.zeros().iter().map(|&z| pair(z)).collect(),
        symbol: exp.symbol.name(),
        function: exp.function.name(),
        trace: pair(trace(&t)),
        trace_formula_rhs: pair(rhs.value),
        hs_norm: hs_norm(&t),
        trace_norm: trace_norm(&t),
        op_norm: op_norm(&t),
        function_trace: pair(trace(&ft)),
        matrix: &t,
    };
    sink.put_csv("operator", matrix_csv(&t))?;
    sink.put_json("operator", &report)?;
    if let Some(theta) = flags.alpha_angle {
        let u = build_clark_unitary(&b, C64::from_polar(1.0, theta), q)?;
        sink.put_csv("clark_unitary", matrix_csv(&u))?;
        sink.put_json("clark_unitary", &u)?;
    }
    if !t.converged {
        sink.note("operator quadrature did not converge within max_points");
    }
    Ok(RunStatus::Ok)
}

fn clark(sink: &mut OutputSink, exp: &ExperimentConfig, flags: &Flags) -> Result<RunStatus, CliError> {
    let b = largest_b(exp)?;
    let alphas: Vec<C64> = match flags.alpha_angle {
        Some(t) => vec![C64::from_polar(1.0, t)],
        None => alpha_grid(exp.alpha_count),
    };
    let mut rows = Vec::new();
    let mut measures = Vec::new();
    for a in alphas {
        let mu = clark_measure(&b, a)?;
        let alpha_angle = a.arg().rem_euclid(TAU);
        let residual = mu
            .atoms
            .iter()
            .map(|at| (b.eval(at.point.value()) - a).norm())
            .fold(0.0, f64::max);
        for at in &mu.atoms {
            rows.push(vec![num(alpha_angle), num(at.point.angle()), num(at.weight)]);
        }
        measures.push(json!({
            "alpha_angle": alpha_angle,
            "total_mass": mu.total_mass(),
            "beta_norm": mu.atoms.iter().map(|a| a.weight).fold(0.0, f64::max),
            "max_residual": residual,
            "atoms": mu.atoms,
        }));
    }
    let header: Vec<String> = ["alpha_angle", "zeta_angle", "weight"].iter().map(|s| s.to_string()).collect();
    sink.put_csv("clark", csv_bytes(&header, &rows))?;
    let d = disintegration_check(&exp.symbol, &b, exp.alpha_count, &exp.quadrature)?;
    sink.put_json(
        "clark",
        &json!({
            "zeros": b.zeros().iter().map(|&z| pair(z)).collect::<Vec<_>>(),
            "measures": measures,
            "disintegration": {
                "symbol": exp.symbol.name(),
                "lhs": pair(d.lhs),
                "rhs": pair(d.rhs),
                "gap": d.gap,
                "alpha_count": d.alpha_count,
                "converged": d.converged,
            },
        }),
    )?;
    Ok(RunStatus::Ok)
}

fn szego(sink: &mut OutputSink, exp: &ExperimentConfig) -> Result<RunStatus, CliError> {
    let recs = szego_gap(exp)?;
    put_convergence(sink, "szego", &recs)?;
    put_sequence(sink, exp)?;
    Ok(RunStatus::Ok)
}

fn stz(sink: &mut OutputSink, exp: &ExperimentConfig) -> Result<RunStatus, CliError> {
    let recs = stz_trace(exp)?;
    put_convergence(sink, "stz", &recs)?;
    put_sequence(sink, exp)?;
    Ok(RunStatus::Ok)
}

fn angular(sink: &mut OutputSink, exp: &ExperimentConfig) -> Result<RunStatus, CliError> {
    let a = angular_condition_a(exp)?;
    put_sweep(sink, "angular_a", &a)?;
    let d = angular_condition_b(exp)?;
    let mut header = vec!["angle".to_string(), "partial_sum".to_string()];
    header.extend(d.thresholds.iter().map(|t| format!("first_above_{t}")));
    let rows: Vec<Vec<String>> = d
        .grid
        .iter()
        .zip(d.final_sums())
        .zip(&d.crossings)
        .map(|((g, s), cr)| {
            let mut r = vec![num(*g), num(s)];
            r.extend(cr.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
            r
        })
        .collect();
    sink.put_csv("angular_b", csv_bytes(&header, &rows))?;
    let below: Vec<_> = d
        .thresholds
        .iter()
        .map(|&t| json!({ "threshold": t, "fraction_below": d.fraction_below(t) }))
        .collect();
    sink.put_json("angular_b", &json!({ "summary": below, "diagnostics": d }))?;
    put_sequence(sink, exp)?;
    Ok(RunStatus::Ok)
}

fn is_char(s: &ttlab::SymbolRep, k: i32) -> bool {
    s.as_trig() == Some(&TrigPoly::character(k))
}

fn lemmas(sink: &mut OutputSink, exp: &ExperimentConfig, config: &ConfigFile) -> Result<RunStatus, CliError> {
    let mut failures = Vec::new();

    let fejer = fejer_suite(exp)?;
    for r in &fejer.contraction {
        if r.value > 1.0 + CONTRACTION_TOL {
            failures.push(format!("N = {}: contraction ratio {} exceeds 1 + {CONTRACTION_TOL}", r.n, r.value));
        }
    }
    put_sweep(sink, "fejer_contraction", &fejer.contraction)?;
    put_sweep(sink, "fejer_l2", &fejer.l2_gap)?;
    put_sweep(sink, "fejer_pointwise", &fejer.pointwise)?;

    put_convergence(sink, "hs_approx_gap", &hs_approx_gap(exp)?)?;

    let (phi, psi) = config.product_pair()?;
    let product = product_defect_s1(exp, &phi, &psi)?;
    if is_char(&phi, 1) && is_char(&psi, -1) {
        for r in &product {
            if (r.value - 1.0).abs() > RANK_ONE_TOL {
                failures.push(format!("N = {}: product defect {} differs from 1", r.n, r.value));
            }
        }
    }
    put_sweep(sink, "product_defect", &product)?;

    let mut rank_one = Vec::new();
    for &n in &exp.n_values {
        let b = FiniteBlaschke::from_sequence(&exp.sequence, n)?;
        if !b.vanishes_at_origin() {
            continue;
        }
        let d = rank_one_defect(&b, &exp.quadrature)?;
        let sv = d.matrix.singular_values();
        let second = sv.get(1).copied().unwrap_or(0.0);
        let tr = trace(&d);
        if (tr - C64::new(1.0, 0.0)).norm() > RANK_ONE_TOL || second > RANK_ONE_TOL {
            failures.push(format!("N = {n}: rank-one defect trace {tr}, second singular value {second}"));
        }
        rank_one.push(SweepRecord::new(n, tr.re).with("trace_im", tr.im).with("second_singular_value", second));
    }
    put_sweep(sink, "rank_one", &rank_one)?;

    if exp.function.is_poly() && exp.symbol.as_trig().is_some() {
        put_sweep(sink, "stz_defect", &stz_defect_s1(exp)?)?;
    } else {
        sink.note("stz_defect skipped: needs a polynomial function and a trigonometric-polynomial symbol");
    }
    put_sequence(sink, exp)?;

    if failures.is_empty() {
        Ok(RunStatus::Ok)
    } else {
        for f in failures {
            sink.note(f);
        }
        Ok(RunStatus::AssertionFailed)
    }
}
