//! Machine-readable emission of harness results.
//!
//! CSV rows are written in a fixed order with `Display`-formatted floats
//! (shortest round-trip representation), so identical results serialize to
//! identical bytes. Missing values are empty fields.

use std::io::{self, Write};

use serde::Serialize;

use crate::sim::experiments::{AggRecord, NormalityResult, RepRecord, SimResultTable};
use crate::sim::rolling::RollingResult;

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_bool(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per `(setting, grid point, method, replication)`.
pub fn write_records_csv<W: Write>(w: &mut W, records: &[RepRecord]) -> io::Result<()> {
    writeln!(
        w,
        "setting,grid_label,method,replication,rel_err_f,rel_err_u_avg,rel_err_u_noavg,\
         rel_err_a,rel_err_b,rel_err_y_new,rank_b_hat,lambda_star,iterations,converged"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.setting,
            r.grid_label,
            r.method,
            r.replication,
            fmt_opt_f64(r.rel_err_f),
            fmt_opt_f64(r.rel_err_u_avg),
            fmt_opt_f64(r.rel_err_u_noavg),
            fmt_opt_f64(r.rel_err_a),
            fmt_opt_f64(r.rel_err_b),
            fmt_opt_f64(r.rel_err_y_new),
            fmt_opt_usize(r.rank_b_hat),
            fmt_opt_f64(r.lambda_star),
            fmt_opt_usize(r.iterations),
            fmt_opt_bool(r.converged),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AggregateDoc<'a> {
    schema_version: &'static str,
    aggregates: &'a [AggJson],
}

#[derive(Serialize)]
struct AggJson {
    setting: String,
    grid_label: String,
    method: String,
    metric: String,
    count: usize,
    mean: f64,
    sd: f64,
    q25: f64,
    median: f64,
    q75: f64,
}

pub fn write_aggregates_json<W: Write>(w: &mut W, table: &SimResultTable) -> io::Result<()> {
    let aggregates: Vec<AggJson> = table
        .aggregates
        .iter()
        .map(|a: &AggRecord| AggJson {
            setting: a.setting.clone(),
            grid_label: a.grid_label.clone(),
            method: a.method.clone(),
            metric: a.metric.clone(),
            count: a.count,
            mean: a.mean,
            sd: a.sd,
            q25: a.q25,
            median: a.median,
            q75: a.q75,
        })
        .collect();
    let doc = AggregateDoc { schema_version: "1", aggregates: &aggregates };
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)
}

/// One row per loading entry: which matrix, the entry position, the KS
/// statistic of the studentized errors, and the pass flag.
pub fn write_normality_csv<W: Write>(w: &mut W, result: &NormalityResult) -> io::Result<()> {
    writeln!(w, "matrix,row,col,ks,pass,standardized_mean,sd")?;
    for (name, entries) in [("R", &result.entries_r), ("C", &result.entries_c)] {
        for e in entries {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                name, e.row, e.col, e.ks, e.pass, e.standardized_mean, e.sd
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct NormalitySummary {
    schema_version: &'static str,
    replications: usize,
    ks_level: f64,
    ks_critical: f64,
    pass_rate_r: f64,
    pass_rate_c: f64,
    entries_r: usize,
    entries_c: usize,
}

pub fn write_normality_json<W: Write>(w: &mut W, result: &NormalityResult) -> io::Result<()> {
    let doc = NormalitySummary {
        schema_version: "1",
        replications: result.replications,
        ks_level: result.ks_level,
        ks_critical: result.ks_critical,
        pass_rate_r: result.pass_rate_r,
        pass_rate_c: result.pass_rate_c,
        entries_r: result.entries_r.len(),
        entries_c: result.entries_c.len(),
    };
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)
}

pub fn write_rolling_csv<W: Write>(w: &mut W, result: &RollingResult) -> io::Result<()> {
    writeln!(w, "t,y_true,y_hat,train_mean")?;
    for p in &result.predictions {
        writeln!(w, "{},{},{},{}", p.t, p.y_true, p.y_hat, p.train_mean)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RollingSummary<'a> {
    schema_version: &'static str,
    method: &'a str,
    window: usize,
    pretrain_len: usize,
    predictions: usize,
    r2: f64,
}

pub fn write_rolling_json<W: Write>(w: &mut W, result: &RollingResult) -> io::Result<()> {
    let doc = RollingSummary {
        schema_version: "1",
        method: &result.method,
        window: result.window,
        pretrain_len: result.pretrain_len,
        predictions: result.predictions.len(),
        r2: result.r2,
    };
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)
}
