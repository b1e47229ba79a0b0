//! Command implementations. Each returns the text to emit; failures of exact
//! identities surface as [`CliError::Identity`] after the report is written.

use std::fmt::Write as _;

use kfree_core::analytic::{
    delta_star, main_term, p_s_grid, p_s_identity_residual, residue_poly, rho2g_zero_check,
    w_collapse, ContourSpec,
};
use kfree_core::arith_core::{factorize, format_f64, gcd, mobius, primes_up_to, rat};
use kfree_core::circle::{farey_dissect, minor_arc_probe, total_length, write_probe_csv, ExpState};
use kfree_core::density::{
    eta_row, g_exact, g_local, g_row_exact, g_sq_sum_exact, variance_spectral,
};
use kfree_core::gauss_sums::{
    convolve_plocal, gauss_g, gauss_h, phi_cap, phi_q, plocal_closed_form, psi_d, psi_d_complex,
    LocalPoint, PLocalGauss,
};
use kfree_core::sieve::{enumerate_tuples_with_budget, local_residues, variance_brute};
use kfree_core::{DensityContext, Rat, TupleConfig, VarianceReport};
use serde::Serialize;

use crate::config::{Format, Method, RunConfig};
use crate::CliError;

/// Suites of `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Identities,
    Gauss,
    Analytic,
    Farey,
}

#[derive(Debug, Serialize)]
struct Check {
    check: String,
    pass: bool,
    /// Probes only warn; they never fail the run.
    probe: bool,
    detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        check: name.to_string(),
        pass,
        probe: false,
        detail,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_checks(checks: &[Check], format: Format) -> Result<String, CliError> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(checks)? + "\n",
        Format::Csv => {
            let mut out = String::from("check,result,detail\n");
            for c in checks {
                let result = match (c.pass, c.probe) {
                    (true, _) => "pass",
                    (false, true) => "warn",
                    (false, false) => "fail",
                };
                let _ = writeln!(
                    out,
                    "{},{result},{}",
                    csv_field(&c.check),
                    csv_field(&c.detail)
                );
            }
            out
        }
    })
}

fn suite_identities(cfg: &TupleConfig, qmax: u64) -> Vec<Check> {
    let mut mass_bad = Vec::new();
    let mut square_bad = Vec::new();
    let mut route_bad = Vec::new();
    let one = rat(1, 1);
    for q in 1..=qmax {
        let row = g_row_exact(cfg, q);
        if row.iter().sum::<Rat>() != one {
            mass_bad.push(q);
        }
        if row.iter().map(|g| g * g).sum::<Rat>() != g_sq_sum_exact(cfg, q) {
            square_bad.push(q);
        }
        if q <= 100 && (1..=q).any(|a| g_local(cfg, q, a) != g_exact(cfg, q, a)) {
            route_bad.push(q);
        }
    }
    vec![
        check(
            "square-sum identity",
            square_bad.is_empty(),
            format!("q <= {qmax}, failures {square_bad:?}"),
        ),
        check(
            "mass",
            mass_bad.is_empty(),
            format!("q <= {qmax}, failures {mass_bad:?}"),
        ),
        check(
            "Euler vs Gauss densities",
            route_bad.is_empty(),
            format!("q <= {}, failures {route_bad:?}", qmax.min(100)),
        ),
    ]
}

fn suite_gauss(cfg: &TupleConfig, qmax: u64) -> Vec<Check> {
    let qmax = qmax.min(243);
    let mut out = Vec::new();
    // Vanishing beyond k-th powers.
    let vanish = (1..=qmax * 8)
        .filter(|&q| factorize(q).factors.iter().any(|&(_, e)| e > cfg.k()))
        .all(|q| gauss_g(cfg, q) == rat(0, 1));
    out.push(check(
        "G vanishes beyond k-th powers",
        vanish,
        format!("q <= {}", qmax * 8),
    ));
    // Quasi-multiplicativity of H.
    let mut worst: f64 = 0.0;
    for q1 in 1..=qmax.min(60) {
        for q2 in 1..=qmax.min(60) {
            if gcd(q1, q2) != 1 {
                continue;
            }
            let a1 = (1..=q1).find(|&a| gcd(a, q1) == 1).unwrap_or(1);
            let a2 = (1..=q2).rev().find(|&a| gcd(a, q2) == 1).unwrap_or(1);
            let joint = gauss_h(cfg, q1 * q2, (a1 * q2 + a2 * q1) as i64);
            let split =
                gauss_h(cfg, q1, a1 as i64).and_then(|h| Ok(h * gauss_h(cfg, q2, a2 as i64)?));
            if let (Ok(j), Ok(s)) = (joint, split) {
                worst = worst.max((j - s).norm());
            }
        }
    }
    out.push(check(
        "H quasi-multiplicative",
        worst < 1e-9,
        format!("max deviation {worst:.3e}"),
    ));
    // Ψ: integer route vs complex definition.
    let mut worst: f64 = 0.0;
    for d in 1..=qmax.min(200) {
        for nu in [-5i64, 0, 1, 7] {
            worst = worst.max((psi_d_complex(cfg, d, nu) - psi_d(cfg, d, nu) as f64).norm());
        }
    }
    out.push(check(
        "Psi integer vs complex",
        worst < 1e-9,
        format!("max deviation {worst:.3e}"),
    ));
    // Σ'_{A mod q/d} Φ_q(−Ad) = Φ(q)μ(q/d) at prime powers.
    let mut bad = Vec::new();
    for q in (2..=qmax).filter(|&q| factorize(q).factors.len() == 1) {
        for d in kfree_core::arith_core::divisors(q) {
            let e = q / d;
            let s: i64 = (1..=e)
                .filter(|&a| gcd(a, e) == 1)
                .map(|a| phi_q(cfg, q, -((a * d) as i64)))
                .sum();
            if s != phi_cap(cfg, q) * mobius(e) {
                bad.push((q, d));
            }
        }
    }
    out.push(check(
        "reduced Phi class sum",
        bad.is_empty(),
        format!("failures {bad:?}"),
    ));
    // p-local convolution closed form at the configuration's own shifts.
    let mut worst: f64 = 0.0;
    for p in [2u64, 3, 5] {
        let lr = local_residues(cfg, p);
        let shifts: Vec<u64> = lr.residues.iter().map(|&h| h as u64).collect();
        let factors: Vec<PLocalGauss> = shifts
            .iter()
            .map(|&h| PLocalGauss::kfree_shifted(p, cfg.k(), h))
            .collect();
        for l in 0..=cfg.k() {
            for a in 0..p.pow(l) {
                if (l == 0 && a != 0) || (l > 0 && a % p == 0) {
                    continue;
                }
                let point = if l == 0 {
                    LocalPoint::ZERO
                } else {
                    LocalPoint { a, l }
                };
                if let Ok(b) = convolve_plocal(&factors, point) {
                    worst = worst.max((b - plocal_closed_form(p, cfg.k(), &shifts, point)).norm());
                }
            }
        }
    }
    out.push(check(
        "p-local convolution closed form",
        worst < 1e-9,
        format!("max deviation {worst:.3e}"),
    ));
    // Probe: Σ_A |Φ_q(A)| against q^{1.1}.
    let fitted = (2..=qmax)
        .map(|q| {
            (1..=q as i64).map(|a| phi_q(cfg, q, a).abs()).sum::<i64>() as f64
                / (q as f64).powf(1.1)
        })
        .fold(0.0, f64::max);
    out.push(Check {
        check: "probe: sum |Phi_q| / q^1.1".into(),
        pass: fitted.is_finite(),
        probe: true,
        detail: format!("fitted C = {fitted:.6}"),
    });
    out
}

fn suite_analytic(cfg: &TupleConfig, qmax: u64, p_max: u64) -> Result<Vec<Check>, CliError> {
    let grid = p_s_grid();
    let mut ps: f64 = 0.0;
    for q in (2..=qmax.min(243)).filter(|&q| factorize(q).factors.len() == 1) {
        ps = ps.max(p_s_identity_residual(q, &grid)?);
    }
    let bad: Vec<u64> = primes_up_to(50)
        .into_iter()
        .filter(|&p| {
            let r = local_residues(cfg, p).big_r as i64;
            (1..=cfg.k()).map(|t| delta_star(cfg, p, t)).sum::<i64>() != -r * (r - 1)
        })
        .collect();
    let rho = rho2g_zero_check(cfg, p_max)?;
    let poly = residue_poly(cfg, ContourSpec::default_for(cfg.k()), p_max)?;
    let (lhs, rhs) = w_collapse(cfg, qmax.min(100));
    Ok(vec![
        check("P_s identity", ps <= 1e-9, format!("max residual {ps:.3e}")),
        check(
            "Delta* local sums",
            bad.is_empty(),
            format!("p <= 50, failures {bad:?}"),
        ),
        check(
            "rho^2 G(0) = rho",
            rho.passes(),
            format!(
                "gap {:.3e}, certified tail {:.3e}, P_max {p_max}",
                rho.gap, rho.tail_bound
            ),
        ),
        check(
            "residue polynomial certified",
            poly.certified,
            format!("refinement movement {:.3e}", poly.movement),
        ),
        check(
            "W(Q) collapse",
            lhs == rhs,
            format!("Q <= {}", qmax.min(100)),
        ),
    ])
}

fn suite_farey(gamma: u64) -> Vec<Check> {
    let arcs = farey_dissect(gamma);
    let bad = arcs.iter().filter(|a| !a.sandwich_holds()).count();
    let total = total_length(&arcs);
    vec![
        check(
            "arc sandwich",
            bad == 0,
            format!("gamma {gamma}, {} arcs, {bad} violations", arcs.len()),
        ),
        check("total length", total == rat(1, 1), format!("total {total}")),
    ]
}

pub fn verify(rc: &RunConfig, suite: Suite) -> Result<(String, bool), CliError> {
    let qmax = rc.qmax.unwrap_or(200);
    let checks = match suite {
        Suite::Farey => suite_farey(rc.gamma.unwrap_or(100)),
        Suite::Identities => suite_identities(&rc.tuple()?, qmax),
        Suite::Gauss => suite_gauss(&rc.tuple()?, qmax),
        Suite::Analytic => suite_analytic(&rc.tuple()?, qmax, rc.p_max)?,
    };
    let ok = checks.iter().all(|c| c.pass || c.probe);
    Ok((
        render_checks(&checks, rc.format.unwrap_or(Format::Csv))?,
        ok,
    ))
}

/// Above this many (modulus, member) pairs the automatic choice switches
/// from bucketing to the spectral route.
const BRUTE_WORK_LIMIT: f64 = 2e9;

fn run_variance(
    rc: &RunConfig,
    cfg: &TupleConfig,
    x: u64,
    q: u64,
) -> Result<VarianceReport, CliError> {
    let ctx = DensityContext::new(cfg, rc.tol)?;
    let set = enumerate_tuples_with_budget(cfg, x, &rc.budget)?;
    let spectral = match rc.method {
        Method::Brute => false,
        Method::Spectral => true,
        Method::Auto => q as f64 * set.len() as f64 > BRUTE_WORK_LIMIT,
    };
    Ok(if spectral {
        variance_spectral(&ctx, &set, q, &rc.budget)?
    } else {
        variance_brute(&set, q, &rc.budget, |m| eta_row(&ctx, m).values)?
    })
}

pub fn variance(rc: &RunConfig) -> Result<String, CliError> {
    let cfg = rc.tuple()?;
    let (x, q) = (rc.require_x()?, rc.require_q()?);
    let report = run_variance(rc, &cfg, x, q)?;
    let cumulative = report.cumulative();
    Ok(match rc.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("q,sum_a_E2,cumulative_V\n");
            for (i, (v, c)) in report.per_q.iter().zip(&cumulative).enumerate() {
                let _ = writeln!(out, "{},{},{}", i + 1, format_f64(*v), format_f64(*c));
            }
            out
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                k: u32,
                h: &'a [u64],
                x: u64,
                #[serde(rename = "Q")]
                q: u64,
                per_q: &'a [f64],
                cumulative: &'a [f64],
                #[serde(rename = "V")]
                v: f64,
            }
            let out = Out {
                k: cfg.k(),
                h: cfg.h(),
                x,
                q,
                per_q: &report.per_q,
                cumulative: &cumulative,
                v: report.total,
            };
            serde_json::to_string_pretty(&out)? + "\n"
        }
    })
}

#[derive(Serialize)]
struct Sample {
    x: f64,
    #[serde(rename = "Q")]
    q: f64,
    main_term: f64,
}

pub fn predict(rc: &RunConfig) -> Result<(String, bool), CliError> {
    let cfg = rc.tuple()?;
    let ctx = DensityContext::new(&cfg, rc.tol)?;
    let poly = residue_poly(&cfg, ContourSpec::default_for(cfg.k()), rc.p_max)?;
    let x = rc.x.unwrap_or(1_000_000) as f64;
    let qs: Vec<f64> = match rc.q {
        Some(q) => vec![q as f64],
        None => vec![x / 100.0, x / 10.0],
    };
    let samples: Vec<Sample> = if poly.certified {
        qs.iter()
            .map(|&q| {
                Ok(Sample {
                    x,
                    q,
                    main_term: main_term(x, q, &poly)?,
                })
            })
            .collect::<Result<_, CliError>>()?
    } else {
        Vec::new()
    };
    #[derive(Serialize)]
    struct Out<'a> {
        k: u32,
        r: usize,
        h: &'a [u64],
        rho: f64,
        rho_half_width: f64,
        #[serde(rename = "P_coeffs")]
        p_coeffs: &'a [f64],
        certified: bool,
        refinement_movement: f64,
        main_term: Vec<Sample>,
    }
    let out = Out {
        k: cfg.k(),
        r: cfg.r(),
        h: cfg.h(),
        rho: ctx.rho(),
        rho_half_width: ctx.rho_half_width(),
        p_coeffs: &poly.coeffs,
        certified: poly.certified,
        refinement_movement: poly.movement,
        main_term: samples,
    };
    Ok((serde_json::to_string_pretty(&out)? + "\n", poly.certified))
}

pub fn compare(rc: &RunConfig) -> Result<String, CliError> {
    let cfg = rc.tuple()?;
    let (x, q) = (rc.require_x()?, rc.require_q()?);
    let poly = residue_poly(&cfg, ContourSpec::default_for(cfg.k()), rc.p_max)?;
    if !poly.certified {
        return Err(CliError::Identity(format!(
            "residue polynomial not certified (refinement movement {:e}); refusing to compare",
            poly.movement
        )));
    }
    let report = run_variance(rc, &cfg, x, q)?;
    let (xf, qf) = (x as f64, q as f64);
    let main = main_term(xf, qf, &poly)?;
    let k = cfg.k() as f64;
    let error_budget = qf * qf * (xf / qf).powf(cfg.frak_c() / k) + xf.powf(1.0 + 2.0 / (k + 1.0));
    let note = (error_budget > main.abs())
        .then(|| "error term dominates; ratio uninformative".to_string());
    #[derive(Serialize)]
    struct Out<'a> {
        k: u32,
        h: &'a [u64],
        x: u64,
        #[serde(rename = "Q")]
        q: u64,
        #[serde(rename = "V_empirical")]
        v_empirical: f64,
        main_term: f64,
        ratio: f64,
        error_budget: f64,
        note: Option<String>,
    }
    let out = Out {
        k: cfg.k(),
        h: cfg.h(),
        x,
        q,
        v_empirical: report.total,
        main_term: main,
        ratio: report.total / main,
        error_budget,
        note,
    };
    Ok(serde_json::to_string_pretty(&out)? + "\n")
}

pub fn farey(rc: &RunConfig) -> Result<String, CliError> {
    let gamma = rc
        .gamma
        .ok_or_else(|| CliError::Config("--gamma is required".into()))?;
    if gamma == 0 || gamma > 5000 {
        return Err(CliError::Resource(format!(
            "gamma = {gamma} outside 1..=5000"
        )));
    }
    let arcs = farey_dissect(gamma);
    Ok(match rc.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("a,q,left,right,lambda,sandwich\n");
            for a in &arcs {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    a.a,
                    a.q,
                    a.left,
                    a.right,
                    a.lambda,
                    a.sandwich_holds()
                );
            }
            out
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Arc {
                a: u64,
                q: u64,
                left: String,
                right: String,
                lambda: String,
                sandwich: bool,
            }
            let rows: Vec<Arc> = arcs
                .iter()
                .map(|a| Arc {
                    a: a.a,
                    q: a.q,
                    left: a.left.to_string(),
                    right: a.right.to_string(),
                    lambda: a.lambda.to_string(),
                    sandwich: a.sandwich_holds(),
                })
                .collect();
            serde_json::to_string_pretty(&rows)? + "\n"
        }
    })
}

pub fn probe(rc: &RunConfig) -> Result<String, CliError> {
    let cfg = rc.tuple()?;
    let x = rc.require_x()?;
    let gamma = rc.gamma.unwrap_or_else(|| (2.0 * (x as f64).sqrt()) as u64);
    let ctx = DensityContext::new(&cfg, rc.tol)?;
    let state = ExpState::new(&ctx, x, rc.q.unwrap_or(gamma), &rc.budget)?;
    let rows = minor_arc_probe(&state, gamma)?;
    Ok(match rc.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_probe_csv(&rows, &mut buf)?;
            String::from_utf8(buf).expect("ASCII output")
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                bound_id: &'a str,
                x: u64,
                gamma: u64,
                lhs: f64,
                rhs_shape: f64,
                #[serde(rename = "fitted_C")]
                fitted_c: f64,
            }
            let rows: Vec<Row> = rows
                .iter()
                .map(|r| Row {
                    bound_id: &r.bound_id,
                    x: r.x,
                    gamma: r.gamma,
                    lhs: r.lhs,
                    rhs_shape: r.rhs_shape,
                    fitted_c: r.fitted_c,
                })
                .collect();
            serde_json::to_string_pretty(&rows)? + "\n"
        }
    })
}
