// SPDX-License-Identifier: Apache-2.0

//! Deterministic JSON and CSV rendering of run reports.
//!
//! Object keys are sorted and every float is printed with 12 significant
//! digits in scientific notation, so equal reports serialize to equal bytes.
//! Non-finite numbers become `null`, except a divergent Schur integral which
//! is spelled `"divergent"`.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::integrate::ImproperIntegral;
use crate::scenario::{Analysis, Command, EvolveStage, RowData, RowError, RunReport, RunRow, TransformStage};

pub const CSV_HEADER: [&str; 15] = [
    "sweep_param",
    "sweep_value",
    "command",
    "grid_n",
    "verdict",
    "schur_value",
    "gelfand_estimate",
    "terms_used",
    "residual",
    "chain_ok",
    "spr_K_estimate",
    "t",
    "norm_direct",
    "norm_conjugated",
    "gap",
];

/// Fixed float rendering shared by JSON and CSV output.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        // normalizes -0.0
        "0.00000000000e0".to_string()
    } else {
        format!("{x:.11e}")
    }
}

struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn schur(v: Option<f64>) -> Value {
    match v {
        None => Value::Null,
        Some(x) if x.is_infinite() => Value::String("divergent".into()),
        Some(x) => num(x),
    }
}

fn integral(i: &ImproperIntegral) -> Value {
    json!({
        "verdict": if i.is_finite() { "finite" } else { "divergent" },
        "value": if i.is_finite() { num(i.value) } else { Value::Null },
        "levels": i.partial_sums.len(),
    })
}

fn analysis_json(a: &Analysis) -> Value {
    let c = &a.certificate;
    let mut cert = json!({
        "verdict": c.verdict.as_str(),
        "schur_value": schur(c.schur_value),
        "gelfand_estimate": num(c.gelfand.estimate),
        "gelfand_iterates": nums(&c.gelfand.iterates),
        "gelfand_n_max": c.gelfand.n_max,
        "eigen_spr": num(c.gelfand.eigen_spr),
        "grid_n": c.gelfand.grid_n,
        "volterra_flag": c.volterra_flag,
        "spr_margin": num(c.spr_margin),
        "diagnostics": c.diagnostics,
    });
    if let Some(m) = &c.majorant_check {
        cert["majorant_check"] = json!({ "holds": m.holds, "worst_margin": num(m.worst_margin) });
    }
    let mut out = json!({
        "preset": a.preset.name,
        "params": a.preset.params,
        "grid_n": a.grid.n(),
        "v_norm": num(a.v_norm),
        "w_norm": num(a.w_norm),
        "certificate": cert,
    });
    if let Some(m) = &a.modulus {
        out["modulus_condition"] = integral(m);
    }
    if let Some(p) = a.preset.product_vanishes {
        out["product_vanishes"] = Value::Bool(p);
    }
    out
}

fn transform_json(st: &TransformStage, a: &Analysis, tol: &crate::scenario::Tolerances) -> Value {
    let t = &st.transform;
    let inv = &st.inverse;
    json!({
        "terms_used": t.terms_used,
        "term_norms": nums(&t.term_norms),
        "ratios": nums(&t.ratios),
        "converged": t.converged,
        "residual": num(t.residual),
        "residual_ok": t.residual <= tol.residual_target,
        "chain_ok": t.chain.holds,
        "chain_first_failure": t.chain.first_failure,
        "chain_sharp_ok": t.chain.sharp_holds,
        "chain_checked": t.chain.checked,
        "spr_K_estimate": num(t.spr_k.estimate),
        "spr_K_iterates": t.spr_k.n_max,
        "verdict": a.certificate.verdict.as_str(),
        "band": st.band,
        "grid_n": a.grid.n(),
        "tolerances": {
            "term_tol": num(tol.term_tol),
            "residual_target": num(tol.residual_target),
            "spr_margin": num(tol.spr_margin),
        },
        "aggregate_bound_ok": st.aggregate_bound_ok,
        "cond": num(st.cond),
        "inverse": {
            "cross_check": num(inv.disagreement),
            "agrees": inv.agrees(),
            "identity_residual": num(inv.identity_residual),
            "neumann_terms": inv.neumann_terms,
            "spr_estimate": num(inv.spr_estimate),
        },
    })
}

fn evolve_json(ev: &EvolveStage) -> Value {
    let s = &ev.stability;
    let mut out = json!({
        "t_grid": nums(&s.t_grid),
        "norms": nums(&s.norms),
        "sup_norm": num(s.sup_norm),
        "grid_n": s.grid_n,
    });
    if let Some(v) = &s.norms_conjugated {
        out["norms_conjugated"] = nums(v);
    }
    if let Some(v) = &s.gaps {
        out["gaps"] = nums(v);
    }
    if let Some(v) = s.conjugation_gap {
        out["conjugation_gap"] = num(v);
    }
    if let Some(v) = s.cond_bound {
        out["cond_bound"] = num(v);
    }
    if let Some(v) = &ev.vector_gaps {
        out["vector_gaps"] = nums(v);
    }
    out
}

fn error_json(e: &RowError) -> Value {
    let mut out = json!({ "kind": e.kind, "message": e.message });
    if let Some(r) = &e.ratios {
        out["ratios"] = nums(r);
    }
    if let Some(t) = &e.term_norms {
        out["term_norms"] = nums(t);
    }
    out
}

fn row_body(d: &RowData, tol: &crate::scenario::Tolerances) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("analysis".into(), analysis_json(&d.analysis));
    if let Some(st) = &d.transform {
        m.insert("transform".into(), transform_json(st, &d.analysis, tol));
    }
    if let Some(ev) = &d.evolve {
        m.insert("stability".into(), evolve_json(ev));
    }
    if let Some(n) = &d.note {
        m.insert("note".into(), Value::String(n.clone()));
    }
    m
}

fn tool() -> Value {
    json!({ "name": "friedrichs", "version": crate::VERSION })
}

/// Structured report as a JSON value.
pub fn to_json_value(r: &RunReport) -> Value {
    let config = serde_json::to_value(&r.config).unwrap_or(Value::Null);
    let mut top = Map::new();
    top.insert("tool".into(), tool());
    top.insert("command".into(), Value::String(r.command.as_str().into()));
    top.insert("config".into(), config);
    top.insert("status".into(), Value::String("ok".into()));
    top.insert("exit_code".into(), json!(r.exit_code()));
    if r.command == Command::Sweep {
        let sw = r.config.sweep.as_ref();
        let rows: Vec<Value> = r
            .rows
            .iter()
            .map(|row| {
                let mut m = match &row.outcome {
                    Ok(d) => row_body(d, &r.config.tolerances),
                    Err(e) => Map::from_iter([("error".to_string(), error_json(e))]),
                };
                m.insert("sweep_value".into(), row.sweep_value.map(num).unwrap_or(Value::Null));
                m.insert("params".into(), json!(row.params));
                m.insert("grid_n".into(), json!(row.grid_n));
                Value::Object(m)
            })
            .collect();
        top.insert(
            "sweep".into(),
            json!({
                "param": sw.map(|s| s.param.clone()),
                "command": sw.map(|s| s.command.as_str()),
                "rows": rows,
            }),
        );
    } else if let Some(Ok(d)) = r.rows.first().map(|row| &row.outcome) {
        top.extend(row_body(d, &r.config.tolerances));
    }
    if let Some(t) = &r.timings {
        top.insert("timings".into(), json!(t));
    }
    Value::Object(top)
}

/// Serializes any JSON value with sorted keys and fixed float format.
pub fn write_json(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    v.serialize(&mut ser).expect("serializing a JSON value into memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

pub fn emit_json(r: &RunReport) -> String {
    write_json(&to_json_value(r))
}

fn opt_float(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => fmt_float(v),
        Some(v) if v.is_infinite() => "divergent".into(),
        _ => String::new(),
    }
}

fn csv_rows(r: &RunReport, row: &RunRow) -> Vec<Vec<String>> {
    let sweep_param = r.config.sweep.as_ref().filter(|_| r.command == Command::Sweep).map(|s| s.param.clone());
    let lead = vec![
        sweep_param.unwrap_or_default(),
        opt_float(row.sweep_value),
        row.command.as_str().to_string(),
        row.grid_n.to_string(),
    ];
    let d = match &row.outcome {
        Ok(d) => d,
        Err(e) => {
            let mut line = lead;
            line.push(format!("error:{}", e.kind));
            line.resize(CSV_HEADER.len(), String::new());
            return vec![line];
        }
    };
    let c = &d.analysis.certificate;
    let mut base = lead;
    base.push(c.verdict.as_str().into());
    base.push(match c.schur_value {
        None => String::new(),
        Some(v) => opt_float(Some(v)),
    });
    base.push(fmt_float(c.gelfand.estimate));
    match &d.transform {
        Some(st) => {
            let t = &st.transform;
            base.push(t.terms_used.to_string());
            base.push(fmt_float(t.residual));
            base.push(t.chain.holds.to_string());
            base.push(fmt_float(t.spr_k.estimate));
        }
        None => base.extend(std::iter::repeat_n(String::new(), 4)),
    }
    match &d.evolve {
        Some(ev) => {
            let s = &ev.stability;
            (0..s.t_grid.len())
                .map(|k| {
                    let mut line = base.clone();
                    line.push(fmt_float(s.t_grid[k]));
                    line.push(fmt_float(s.norms[k]));
                    line.push(opt_float(s.norms_conjugated.as_ref().map(|v| v[k])));
                    line.push(opt_float(s.gaps.as_ref().map(|v| v[k])));
                    line
                })
                .collect()
        }
        None => {
            base.extend(std::iter::repeat_n(String::new(), 4));
            vec![base]
        }
    }
}

/// CSV report, one line per run row (per `t` for evolve), ordered by sweep
/// value then `t`.
pub fn emit_csv(r: &RunReport) -> Result<String> {
    let mut rows: Vec<&RunRow> = r.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.sweep_value
            .unwrap_or(f64::NEG_INFINITY)
            .total_cmp(&b.sweep_value.unwrap_or(f64::NEG_INFINITY))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for row in rows {
        let mut lines = csv_rows(r, row);
        lines.sort_by(|a, b| {
            let t = |l: &Vec<String>| l[11].parse::<f64>().unwrap_or(f64::NEG_INFINITY);
            t(a).total_cmp(&t(b))
        });
        for line in lines {
            w.write_record(&line)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Failure report for an error that aborted a run.
pub fn failure_json(command: &str, e: &Error) -> String {
    let mut top = Map::new();
    top.insert("tool".into(), tool());
    top.insert("command".into(), Value::String(command.into()));
    top.insert("status".into(), Value::String("error".into()));
    top.insert("exit_code".into(), json!(1));
    top.insert("error".into(), error_json(&RowError::from_error(e)));
    write_json(&Value::Object(top))
}
