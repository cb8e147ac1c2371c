//! CSV and SVG output with fixed formatting, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{DiscreteField, Space};
use crate::scenario::{RunReport, SweepTable};

/// `%.12e`-style formatting: `-1.234567890123e-05`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

fn flag(b: Option<bool>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const RUN_COLUMNS: [&str; 40] = [
    "scenario",
    "seed",
    "d",
    "p",
    "q",
    "sigma",
    "s",
    "r",
    "c1",
    "c2",
    "k_d",
    "k_f",
    "k_n",
    "k_t",
    "delta",
    "eta_star",
    "l_min",
    "minimum",
    "g1",
    "g2",
    "g3",
    "radius",
    "satisfied",
    "eta",
    "h_lr",
    "h_w1p",
    "k_w1p",
    "k_lr",
    "h_div_residual",
    "k_div_residual",
    "converged",
    "iterations",
    "final_residual",
    "du_norm_p",
    "du_norm_sigma",
    "weak_residual",
    "reformulation_gap",
    "apriori",
    "apriori_margin",
    "errors",
];

/// One header line and one data row; cells of stages that did not run are empty.
pub fn run_csv(r: &RunReport) -> String {
    let ex = r.exponents.as_ref();
    let m = r.model.as_ref();
    let n = r.norms.as_ref();
    let sm = r.smallness.as_ref();
    let ext = r.extension.as_ref();
    let sol = r.solve.as_ref();
    let ver = r.verification.as_ref();
    let ap = ver.and_then(|v| v.apriori.as_ref());
    let errors: Vec<String> = r.errors.iter().map(|e| format!("{}: {}", e.stage, e.message)).collect();
    let cells = [
        quote(&r.scenario),
        r.seed.to_string(),
        ex.map(|e| e.d.to_string()).unwrap_or_default(),
        opt(ex.map(|e| e.p)),
        opt(ex.map(|e| e.q)),
        opt(ex.map(|e| e.sigma)),
        opt(ex.map(|e| e.s)),
        opt(ex.map(|e| e.r)),
        opt(m.map(|m| m.c1)),
        opt(m.map(|m| m.c2)),
        opt(n.map(|n| n.k_d)),
        opt(n.map(|n| n.k_f)),
        opt(n.map(|n| n.k_n)),
        opt(n.map(|n| n.k_t)),
        opt(n.map(|n| n.delta)),
        opt(sm.map(|s| s.eta_star)),
        opt(sm.map(|s| s.l_min)),
        sm.map(|s| s.kind.label().to_string()).unwrap_or_default(),
        opt(sm.map(|s| s.g1)),
        opt(sm.map(|s| s.g2)),
        opt(sm.map(|s| s.g3)),
        opt(sm.map(|s| s.r)),
        flag(sm.map(|s| s.satisfied)),
        opt(ext.map(|e| e.eta)),
        opt(ext.map(|e| e.norms.h_lr)),
        opt(ext.map(|e| e.norms.h_w1p)),
        opt(ext.map(|e| e.norms.k_w1p)),
        opt(ext.map(|e| e.norms.k_lr)),
        opt(ext.map(|e| e.norms.h_div_residual)),
        opt(ext.map(|e| e.norms.k_div_residual)),
        flag(sol.map(|s| s.converged)),
        sol.map(|s| s.iterations.to_string()).unwrap_or_default(),
        opt(sol.map(|s| s.final_residual)),
        opt(sol.map(|s| s.du_norm_p)),
        opt(sol.map(|s| s.du_norm_sigma)),
        opt(ver.map(|v| v.weak_residual)),
        opt(ver.map(|v| v.reformulation_gap)),
        ap.map(|a| a.status.clone()).unwrap_or_default(),
        opt(ap.and_then(|a| a.margin)),
        quote(&errors.join("; ")),
    ];
    debug_assert_eq!(cells.len(), RUN_COLUMNS.len());
    format!("{}\n{}\n", RUN_COLUMNS.join(","), cells.join(","))
}

pub const SWEEP_COLUMNS: [&str; 12] =
    ["eta", "l", "g1", "g2", "g3", "radius", "h_lr", "h_w1p", "k_w1p", "k_lr", "h_div_residual", "k_div_residual"];

pub fn sweep_csv(t: &SweepTable) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for row in &t.rows {
        let e = row.extension.as_ref();
        let cells = [
            sci(row.eta),
            sci(row.l),
            sci(row.g1),
            sci(row.g2),
            sci(row.g3),
            sci(row.r),
            opt(e.map(|e| e.h_lr)),
            opt(e.map(|e| e.h_w1p)),
            opt(e.map(|e| e.k_w1p)),
            opt(e.map(|e| e.k_lr)),
            opt(e.map(|e| e.h_div_residual)),
            opt(e.map(|e| e.k_div_residual)),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"];

/// Log-log plot of the sweep, one polyline per quantity. Non-positive values
/// are left out of their polyline.
pub fn sweep_svg(t: &SweepTable, title: &str) -> Result<String> {
    if t.rows.is_empty() {
        return Err(Error::Precondition("empty sweep".into()));
    }
    let mut series: Vec<(&str, Vec<(f64, f64)>)> = vec![
        ("L", t.rows.iter().map(|r| (r.eta, r.l)).collect()),
        ("G1", t.rows.iter().map(|r| (r.eta, r.g1)).collect()),
        ("G2", t.rows.iter().map(|r| (r.eta, r.g2)).collect()),
        ("G3", t.rows.iter().map(|r| (r.eta, r.g3)).collect()),
        ("R", t.rows.iter().map(|r| (r.eta, r.r)).collect()),
    ];
    if t.rows.iter().all(|r| r.extension.is_some()) {
        series.push(("|h|_r", t.rows.iter().map(|r| (r.eta, r.extension.unwrap().h_lr)).collect()));
        series.push(("|grad h|_p", t.rows.iter().map(|r| (r.eta, r.extension.unwrap().h_w1p)).collect()));
    }
    let logs: Vec<(&str, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(name, pts)| {
            let pts = pts
                .into_iter()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
                .map(|(x, y)| (x.log10(), y.log10()))
                .collect();
            (name, pts)
        })
        .collect();
    let all = logs.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        return Err(Error::Precondition("no positive values to plot".into()));
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let (w, h, ml, mr, mt, mb) = (720.0, 480.0, 70.0, 130.0, 40.0, 50.0);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    for k in x0 as i32..=x1 as i32 {
        let x = px(k as f64);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{mt}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##, h - mb);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">1e{k}</text>"#, h - mb + 16.0);
    }
    for k in y0 as i32..=y1 as i32 {
        let y = py(k as f64);
        let _ = writeln!(s, r##"<line x1="{ml}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, w - mr);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">1e{k}</text>"#, ml - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">eta</text>"#, (ml + w - mr) / 2.0, h - 12.0);
    for (i, (name, pts)) in logs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        }
        let ly = mt + 16.0 * (i as f64 + 1.0);
        let lx = w - mr + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    SvgPlot,
}

/// Writes `<scenario>.csv` (plus `<scenario>_sweep.csv` when a sweep ran) or
/// `<scenario>_sweep.svg`; returns the written paths.
pub fn emit_report(r: &RunReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let base = sanitize(&r.scenario);
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    match format {
        ReportFormat::Csv => {
            put(format!("{base}.csv"), run_csv(r))?;
            if let Some(t) = &r.sweep {
                put(format!("{base}_sweep.csv"), sweep_csv(t))?;
            }
        }
        ReportFormat::SvgPlot => {
            let t = r
                .sweep
                .as_ref()
                .ok_or_else(|| Error::Precondition("svg plot needs a sweep in the report".into()))?;
            put(format!("{base}_sweep.svg"), sweep_svg(t, &r.scenario)?)?;
        }
    }
    Ok(written)
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Mesh text with the vertex values of `v` and `pressure` appended to each node line.
pub fn field_dump(v: &DiscreteField, pressure: &DiscreteField) -> Result<String> {
    if !v.space.is_vector() || pressure.space != Space::ScalarP1 || !v.same_mesh(pressure) {
        return Err(Error::Structure("dump needs a vector velocity and a P1 pressure on one mesh".into()));
    }
    let mesh = &*v.mesh;
    let text = mesh.to_text();
    let mut out = String::with_capacity(text.len() * 2);
    let mut node = None;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("NODES ") {
            let _ = writeln!(out, "# columns: id x y vx vy pressure");
            node = Some(rest.trim().parse::<usize>().unwrap_or(0));
            out.push_str(line);
        } else if node.is_some_and(|n| n > 0) {
            let i: usize = line.split_whitespace().next().and_then(|t| t.parse().ok()).unwrap_or(0);
            let val = v.p2_value(i);
            let _ = write!(out, "{line} {:.17e} {:.17e} {:.17e}", val[0], val[1], pressure.dofs[i]);
            node = node.map(|n| n - 1);
        } else {
            node = None;
            out.push_str(line);
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponents() {
        assert_eq!(sci(0.0), "0.000000000000e+00");
        assert_eq!(sci(-1234.5), "-1.234500000000e+03");
        assert_eq!(sci(1e-300), "1.000000000000e-300");
        assert_eq!(sci(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(quote("plain"), "plain");
    }
}
