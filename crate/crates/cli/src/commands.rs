use nctorus::connection::{Connection, Convention, ProjectiveModule, PROJECTION_TOL};
use nctorus::forms::{dixmier_constant, ym_spectral_paths};
use nctorus::matrix::{idempotent_to_projection, is_projection};
use nctorus::optimize::minimize_ym;
use nctorus::serial;
use serde::Serialize;

use crate::config::Job;
use crate::failure::Failure;
use crate::report::{
    Check, Header, OptimizeReport, ProjectionFile, ProjectionReport, ValidateReport, YmReport, YmResiduals,
};

/// Agreement required between the spectral value and `c` times the
/// dynamical value, relative to `max(1, ym_dynamical)`.
pub const AGREEMENT_TOL: f64 = 1e-9;

pub const TRACE_FILE: &str = "trace.jsonl";
pub const FINAL_FILE: &str = "final_connection.json";
pub const PROJECTION_FILE: &str = "projection.json";

/// Everything a command produces. `report` goes to `<command>.json` and
/// stdout; `files` are written next to it.
pub struct Output {
    pub command: &'static str,
    pub report: String,
    pub files: Vec<(&'static str, String)>,
    pub passed: bool,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn validate(job: &Job) -> Result<Output, Failure> {
    let tol = job.tol;
    let mut checks = Vec::new();
    let mut loss: f64 = 0.0;

    let raw = &job.config.theta;
    let n = job.n();
    let skew = (0..n)
        .flat_map(|k| (0..n).map(move |m| (k, m)))
        .map(|(k, m)| (raw[k * n + m] + raw[m * n + k]).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("theta_skew_symmetry", skew, nctorus::torus::THETA_LOAD_TOL));

    let p = job.projection()?;
    loss = loss.max(p.max_truncation_loss());
    let ptol = tol.max(PROJECTION_TOL);
    let pc = is_projection(&p, ptol)?;
    checks.push(Check::new("projection_idempotency", pc.idempotency, ptol));
    checks.push(Check::new("projection_self_adjointness", pc.self_adjointness, ptol));

    let convention = job.convention();
    let adjoint_name = match convention {
        Convention::Dynamical => "skew_adjointness",
        Convention::Spectral => "self_adjointness",
    };
    if pc.is_projection {
        let module = ProjectiveModule::new(p)?;
        let potentials = job.potentials(&module)?;
        for (j, a) in potentials.iter().enumerate() {
            loss = loss.max(a.max_truncation_loss());
            let adj = match convention {
                Convention::Dynamical => a.skew_residual()?,
                Convention::Spectral => a.self_adjoint_residual()?,
            };
            checks.push(Check::new(format!("potential_{j}_{adjoint_name}"), adj, tol));
            let (res, bound) = module.compression_residual(a)?;
            checks.push(Check::new(format!("potential_{j}_compression"), res, bound.max(tol)));
        }
        let c = Connection::new_unchecked(module, convention, potentials)?;
        let compat = c.check_compatibility(job.samples, job.seed)?;
        checks.push(Check::new("compatibility", compat, tol));
    } else {
        for j in 0..n {
            checks.push(Check::skipped(format!("potential_{j}_{adjoint_name}"), tol));
            checks.push(Check::skipped(format!("potential_{j}_compression"), tol));
        }
        checks.push(Check::skipped("compatibility", tol));
    }

    if job.config.idempotent.is_some() {
        let e = job.idempotent()?;
        loss = loss.max(e.max_truncation_loss());
        checks.push(Check::new("idempotent_idempotency", e.mul(&e)?.distance(&e)?, tol));
    }

    let passed = checks.iter().all(|c| c.passed);
    let report = ValidateReport {
        header: Header::new("validate", job, loss),
        passed,
        checks,
    };
    Ok(Output {
        command: "validate",
        report: to_json(&report)?,
        files: Vec::new(),
        passed,
    })
}

pub fn ym(job: &Job) -> Result<Output, Failure> {
    let input = job.connection()?;
    let dynamical = match input.convention() {
        Convention::Dynamical => input.clone(),
        Convention::Spectral => input.phi_inverse()?,
    };
    let spectral = dynamical.phi_map()?;
    let curvature = dynamical.curvature()?;
    let ym_dynamical = curvature.squared_norm()?;
    let paths = ym_spectral_paths(&spectral)?;
    let ym_spectral = paths.columns;
    let c = dixmier_constant(job.n())?;

    let (ratio, ratio_exact_zero) = if ym_dynamical != 0.0 {
        (Some(ym_spectral / ym_dynamical), false)
    } else {
        (None, ym_spectral == 0.0)
    };
    let agreement = (ym_spectral - c * ym_dynamical).abs() / ym_dynamical.max(1.0);
    let check = dynamical.module().check();
    let residuals = YmResiduals {
        ym_spectral_closed_form: paths.closed_form,
        spectral_cross_check: paths.relative_deviation,
        agreement,
        compatibility: dynamical.check_compatibility(job.samples, job.seed)?,
        curvature_skew: curvature.skew_residual()?,
        projection_idempotency: check.idempotency,
        projection_self_adjointness: check.self_adjointness,
    };
    let passed = agreement <= AGREEMENT_TOL && (ratio.is_some() || ratio_exact_zero);
    let loss = dynamical.max_truncation_loss().max(curvature.max_truncation_loss());
    let report = YmReport {
        header: Header::new("ym", job, loss),
        passed,
        input_convention: input.convention(),
        q: dynamical.module().q(),
        ym_dynamical,
        ym_spectral,
        constant_c: c,
        ratio,
        ratio_exact_zero,
        ratio_relative_deviation: ratio.map(|r| (r - c).abs() / c),
        residuals,
    };
    Ok(Output {
        command: "ym",
        report: to_json(&report)?,
        files: Vec::new(),
        passed,
    })
}

pub fn make_projection(job: &Job) -> Result<Output, Failure> {
    let p = job.idempotent()?;
    let input = is_projection(&p, job.tol)?;
    let res = idempotent_to_projection(&p, job.tol, job.max_iter)?;
    let loss = [&p, &res.p_tilde, &res.z, &res.z_inv]
        .iter()
        .map(|m| m.max_truncation_loss())
        .fold(0.0, f64::max);
    let module = ProjectiveModule::new(res.p_tilde.clone())?;
    let file = ProjectionFile {
        module: serial::module_to_json(&module),
        z: serial::matrix_to_json(&res.z),
        z_inv: serial::matrix_to_json(&res.z_inv),
    };
    let report = ProjectionReport {
        header: Header::new("make-projection", job, loss),
        passed: res.check.is_projection,
        q: p.q(),
        input_idempotency: input.idempotency,
        input_self_adjointness: input.self_adjointness,
        idempotency: res.check.idempotency,
        self_adjointness: res.check.self_adjointness,
        similarity: res.similarity,
        change: res.p_tilde.distance(&p)?,
        output: PROJECTION_FILE,
    };
    Ok(Output {
        command: "make-projection",
        report: to_json(&report)?,
        files: vec![(PROJECTION_FILE, to_json(&file)?)],
        passed: res.check.is_projection,
    })
}

pub fn optimize(job: &Job) -> Result<Output, Failure> {
    let input = job.connection()?;
    let start = match input.convention() {
        Convention::Dynamical => input,
        Convention::Spectral => input.phi_inverse()?,
    };
    let trace = minimize_ym(&start, &job.params)?;
    let last = trace.records.last().copied();
    let passed = !trace.line_search_failed && trace.is_monotone();
    let loss = trace.final_connection.max_truncation_loss();
    let report = OptimizeReport {
        header: Header::new("optimize", job, loss),
        passed,
        params: job.params,
        iterations: trace.records.len() - 1,
        initial_ym: trace.records[0].ym,
        final_ym: trace.final_ym(),
        final_grad_norm: last.map(|r| r.grad_norm).unwrap_or(f64::NAN),
        converged: trace.converged,
        line_search_failed: trace.line_search_failed,
        monotone: trace.is_monotone(),
        trace: TRACE_FILE,
        final_connection: FINAL_FILE,
    };
    let trace_text = serial::trace_to_jsonl(&trace.records)?;
    let final_config = to_json(&job.config_for(&trace.final_connection))?;
    Ok(Output {
        command: "optimize",
        report: to_json(&report)?,
        files: vec![(TRACE_FILE, trace_text), (FINAL_FILE, final_config)],
        passed,
    })
}
