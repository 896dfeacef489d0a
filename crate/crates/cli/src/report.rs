//! Result rows, the CSV table and the Markdown certificate. Column order is
//! fixed by [`COLUMNS`] and documented in `docs/csv_schema.md`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::experiment::{Certificates, Experiment, Hypothesis, Meta, MethodOutcome, Status};

pub const COLUMNS: [&str; 47] = [
    "fingerprint",
    "problem",
    "n",
    "m",
    "smoother_a",
    "smoother_s",
    "method",
    "delta",
    "gamma",
    "gamma_bar",
    "alpha_lo",
    "alpha_hi",
    "kappa_lo",
    "kappa_hi",
    "rho1",
    "rho1_tilde",
    "rho2",
    "rho2_root",
    "rho2_tilde",
    "prior_bwy1990",
    "prior_ts_convergent",
    "hyp_ra_strict",
    "hyp_rs_sbar",
    "chain_ok",
    "rho_e_up",
    "norm_e_d",
    "rho_f",
    "rho_t",
    "loewner_pass",
    "loewner_applicable",
    "loewner_total",
    "fov_gamma",
    "fov_big_gamma",
    "fov_min_empirical",
    "fov_max_empirical",
    "fov_ok",
    "elman_bound",
    "bound_name",
    "bound_rate",
    "steps",
    "observed_rate",
    "final_relative",
    "bound_violations",
    "gmres_iterations",
    "note",
    "status",
    "error",
];

/// Marker for a value that is missing or not finite.
pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(Option<f64>),
    Int(Option<usize>),
    Flag(Option<bool>),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(Some(x)) if x.is_finite() => format!("{x:.12e}"),
            Cell::Int(Some(i)) => i.to_string(),
            Cell::Flag(Some(b)) => b.to_string(),
            _ => NA.to_string(),
        }
    }
}

/// One row per (problem, pair, method); certificate-only runs use
/// method `none`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub cells: Vec<Cell>,
}

impl ResultRow {
    pub fn get(&self, column: &str) -> Option<&Cell> {
        COLUMNS.iter().position(|c| *c == column).map(|i| &self.cells[i])
    }

    pub fn render(&self) -> Vec<String> {
        self.cells.iter().map(Cell::render).collect()
    }
}

fn num(x: f64) -> Cell {
    Cell::Num(Some(x))
}

fn base_cells(meta: Option<&Meta>, certs: Option<&Certificates>) -> Vec<Cell> {
    let text = |s: Option<&str>| Cell::Text(s.unwrap_or(NA).to_string());
    let mut v = vec![
        text(meta.map(|m| m.fingerprint.as_str())),
        text(meta.map(|m| m.problem.as_str())),
        Cell::Int(meta.map(|m| m.n)),
        Cell::Int(meta.map(|m| m.m)),
        text(meta.map(|m| m.smoother_a.as_str())),
        text(meta.map(|m| m.smoother_s.as_str())),
    ];
    let Some(c) = certs else {
        return v;
    };
    let s = &c.spectral;
    let chain = c.chain.as_ref().ok();
    let fov = c.fov.as_ref().ok();
    let applicable = c.loewner.entries.iter().filter(|e| e.applicable).count();
    let passing = c.loewner.entries.iter().filter(|e| e.applicable && e.holds).count();
    v.extend([
        num(s.delta),
        num(s.gamma),
        num(s.gamma_bar),
        num(s.alpha_lo),
        num(s.alpha_hi),
        num(s.kappa_lo),
        num(s.kappa_hi),
        num(c.bwy.rho1.value),
        num(c.bwy.rho1_tilde.value),
        num(c.sium.rho2.value),
        num(c.sium.rho2_root.value),
        num(c.sium.rho2_tilde.value),
        Cell::Num(c.prior.map(|p| p.bwy1990)),
        Cell::Flag(c.prior.map(|p| p.ts_convergent)),
        Cell::Flag(Some(c.hyp_ra)),
        Cell::Flag(Some(c.hyp_rs_sbar)),
        Cell::Flag(chain.map(|r| r.chain_ok)),
        Cell::Num(chain.map(|r| r.rho_e_up)),
        Cell::Num(chain.map(|r| r.norm_e_d)),
        Cell::Num(chain.map(|r| r.rho_f)),
        Cell::Num(chain.map(|r| r.rho_t)),
        Cell::Int(Some(passing)),
        Cell::Int(Some(applicable)),
        Cell::Int(Some(c.loewner.entries.len())),
        Cell::Num(fov.map(|f| f.gamma)),
        Cell::Num(fov.map(|f| f.big_gamma)),
        Cell::Num(fov.map(|f| f.min_empirical)),
        Cell::Num(fov.map(|f| f.max_empirical)),
        Cell::Flag(fov.map(|f| f.sandwich_ok())),
        Cell::Num(c.elman),
    ]);
    v
}

fn pad(mut v: Vec<Cell>, upto: usize) -> Vec<Cell> {
    while v.len() < upto {
        v.push(Cell::Num(None));
    }
    v
}

const METHOD_COL: usize = 6;
const BOUND_COL: usize = 37;

fn method_row(base: &[Cell], o: &MethodOutcome) -> ResultRow {
    let mut cells = pad(base.to_vec(), BOUND_COL - 1);
    cells.insert(METHOD_COL, Cell::Text(o.method.name().to_string()));
    cells.extend([
        Cell::Text(o.bound_name.to_string()),
        num(o.bound_rate),
        Cell::Int(Some(o.steps)),
        num(o.observed_rate),
        num(o.final_relative),
        Cell::Int(Some(o.violations)),
        Cell::Int(matches!(o.method.name(), "gmres_G" | "gmres_split").then_some(o.steps)),
        Cell::Text(o.note.clone()),
        Cell::Text(o.status().code().to_string()),
        Cell::Text(String::new()),
    ]);
    ResultRow { cells }
}

fn summary_row(base: &[Cell], ex: &Experiment) -> ResultRow {
    let mut cells = pad(base.to_vec(), BOUND_COL - 1);
    cells.insert(METHOD_COL, Cell::Text("none".into()));
    let status = if ex.error.is_some() {
        "error"
    } else if ex.all_pass() {
        "pass"
    } else {
        "fail"
    };
    cells.extend([
        Cell::Text(NA.into()),
        Cell::Num(None),
        Cell::Int(None),
        Cell::Num(None),
        Cell::Num(None),
        Cell::Int(None),
        Cell::Int(None),
        Cell::Text(String::new()),
        Cell::Text(status.into()),
        Cell::Text(ex.error.clone().unwrap_or_default()),
    ]);
    ResultRow { cells }
}

/// Rows sorted by (fingerprint, method). A run without method outcomes, or
/// one aborted by an error, gets a `none` row carrying the certificates and
/// the error text.
pub fn rows(ex: &Experiment) -> Vec<ResultRow> {
    let base = base_cells(ex.meta.as_ref(), ex.certificates.as_ref());
    let mut out: Vec<ResultRow> = ex.outcomes.iter().map(|o| method_row(&base, o)).collect();
    if out.is_empty() || ex.error.is_some() {
        out.push(summary_row(&base, ex));
    }
    out.sort_by(|a, b| a.render()[0].cmp(&b.render()[0]).then(a.render()[METHOD_COL].cmp(&b.render()[METHOD_COL])));
    out
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.render())?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.3e}")
    } else if x.is_finite() {
        format!("{x:.6}")
    } else {
        NA.into()
    }
}

fn held(ok: bool) -> &'static str {
    if ok {
        "held"
    } else {
        "failed"
    }
}

fn theorem(md: &mut String, title: &str, hypotheses: &[Hypothesis], bound: &str, observation: &str, status: &Status) {
    let _ = writeln!(md, "### {title}\n");
    let _ = writeln!(md, "- Hypotheses:");
    for (name, ok) in hypotheses {
        let _ = writeln!(md, "  - {name}: {}", held(*ok));
    }
    let _ = writeln!(md, "- Bound: {bound}");
    let _ = writeln!(md, "- Observation: {observation}");
    let _ = writeln!(md, "- Status: **{status}**\n");
}

/// Human-readable certificate. Deterministic: no timings or paths.
pub fn markdown(ex: &Experiment) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Certificate\n");
    if let Some(m) = &ex.meta {
        let _ = writeln!(md, "- Fingerprint: `{}`", m.fingerprint);
        let _ = writeln!(md, "- Problem: {} (n = {}, m = {})", m.problem, m.n, m.m);
        let _ = writeln!(md, "- R_A: {}", m.smoother_a);
        let _ = writeln!(md, "- R_S: {}", m.smoother_s);
        if let Some((lam, factor)) = m.rescale {
            let _ = writeln!(md, "- R_S rescaling: λ_max = {}, factor = {}", fmt(lam), fmt(factor));
        }
        let _ = writeln!(md);
    }
    let verdict = match ex.exit_code() {
        0 => "ALL CERTIFICATES PASSED",
        1 => "SOME CERTIFICATES FAILED",
        _ => "ABORTED",
    };
    let _ = writeln!(md, "**Overall: {verdict}** (exit code {})\n", ex.exit_code());
    if let Some(e) = &ex.error {
        let _ = writeln!(md, "Error: {e}\n");
    }
    let Some(c) = &ex.certificates else {
        return md;
    };
    let s = &c.spectral;
    let _ = writeln!(md, "## Spectral constants\n");
    let _ = writeln!(md, "| δ | γ | γ̄ | λ(R_A A) | λ(R_S S) |\n|---|---|---|---|---|");
    let _ = writeln!(
        md,
        "| {} | {} | {} | [{}, {}] | [{}, {}] |\n",
        fmt(s.delta),
        fmt(s.gamma),
        fmt(s.gamma_bar),
        fmt(s.alpha_lo),
        fmt(s.alpha_hi),
        fmt(s.kappa_lo),
        fmt(s.kappa_hi)
    );

    let _ = writeln!(md, "## Rate formulas\n");
    let _ = writeln!(md, "| rate | value | conditions |\n|---|---|---|");
    for (name, rate) in [
        ("ρ₁", &c.bwy.rho1),
        ("ρ̃₁", &c.bwy.rho1_tilde),
        ("ρ₂", &c.sium.rho2),
        ("ρ₂ (root form)", &c.sium.rho2_root),
        ("ρ̃₂", &c.sium.rho2_tilde),
    ] {
        let conds: Vec<String> = rate.conditions.iter().map(|(n, ok)| format!("{}: {}", crate::experiment::condition_label(n), held(*ok))).collect();
        let _ = writeln!(md, "| {name} | {} | {} |", fmt(rate.value), conds.join(", "));
    }
    match c.prior {
        Some(p) => {
            let _ = writeln!(md, "| max{{δ, 2γ/(1−γ)}} | {} | γ < 1: held |", fmt(p.bwy1990));
        }
        None => {
            let _ = writeln!(md, "| max{{δ, 2γ/(1−γ)}} | {NA} | γ < 1: failed |");
        }
    }
    let _ = writeln!(md);

    let _ = writeln!(md, "## Theorems\n");
    let hyp_line = |ok: bool| if ok { Status::Pass } else { Status::Fail };
    theorem(
        &mut md,
        "Standing hypotheses",
        &c.hypotheses(),
        "R_A⁻¹ − A > 0 and R_S⁻¹ − S̄ ≥ 0",
        &format!(
            "λ_min(R_A⁻¹ − A) = {}, λ_min(R_S⁻¹ − S̄) = {}",
            c.loewner.get("hyp_RA_strict").map(|e| fmt(e.worst)).unwrap_or_else(|| NA.into()),
            c.loewner.get("hyp_RS_Sbar").map(|e| fmt(e.worst)).unwrap_or_else(|| NA.into())
        ),
        &hyp_line(c.hyp_ra && c.hyp_rs_sbar),
    );
    let chain_obs = match &c.chain {
        Ok(r) => {
            let [a, b, f, t, r1] = r.chain();
            format!("ρ(E_(u,p)) = {}, ‖E‖_D = {}, ρ(F) = {}, ρ(T) = {}, ρ₁ = {}", fmt(a), fmt(b), fmt(f), fmt(t), fmt(r1))
        }
        Err(e) => format!("not evaluated: {e}"),
    };
    theorem(&mut md, "Chain ρ(E_(u,p)) ≤ ‖E‖_D ≤ ρ(F) ≤ ρ(T) ≤ ρ₁", &c.hypotheses(), "each link within 1e-8 relative", &chain_obs, &c.chain_status());

    for o in &ex.outcomes {
        let title = match o.method.name() {
            "bwy" => "BWY contraction",
            "sium" => "SIUM contraction",
            "ium" => "IUM contraction",
            "gmres_G" => "GMRes with G (LDU norm)",
            _ => "GMRes split (D norm)",
        };
        let bound = if o.bound_name == "elman" {
            format!("per-step residual contraction ≤ √(1 − γ_fov²/Γ_fov²) = {}", fmt(o.bound_rate))
        } else {
            format!("error² ≤ {} with rate {}", o.bound_name.replace("rho", "ρ").replace("^2k", "^{2k}"), fmt(o.bound_rate))
        };
        let obs = format!(
            "{} steps, observed rate {}, final relative {}, {} violation(s) ({})",
            o.steps,
            fmt(o.observed_rate),
            fmt(o.final_relative),
            o.violations,
            o.note
        );
        theorem(&mut md, title, &o.hypotheses, &bound, &obs, &o.status());
    }

    let fov_obs = match &c.fov {
        Ok(f) => format!(
            "min (Px, x)_D/(x, x)_D = {}, ‖P‖_D = {}; γ_fov = {}, Γ_fov = {}",
            fmt(f.min_empirical),
            fmt(f.max_empirical),
            fmt(f.gamma),
            fmt(f.big_gamma)
        ),
        Err(e) => format!("not evaluated: {e}"),
    };
    theorem(&mut md, "Field-of-values constants", &c.fov_hypotheses(), "γ_fov ≤ (Px, x)_D/(x, x)_D and ‖P‖_D ≤ Γ_fov", &fov_obs, &c.fov_status());

    let _ = writeln!(md, "## Loewner suite: {}\n", c.loewner_status());
    let _ = writeln!(md, "| certificate | holds | worst | applicable |\n|---|---|---|---|");
    for e in &c.loewner.entries {
        let _ = writeln!(md, "| {} | {} | {:.3e} | {} |", e.name, e.holds, e.worst, e.applicable);
    }
    md
}

#[derive(Debug, Clone)]
pub struct Written {
    pub csv: PathBuf,
    pub markdown: PathBuf,
}

/// Writes `results.csv` and `certificate.md` into `dir`.
pub fn emit_report(ex: &Experiment, dir: &Path) -> io::Result<Written> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    let md_path = dir.join("certificate.md");
    let text = csv_string(&rows(ex)).map_err(io::Error::other)?;
    fs::write(&csv_path, text)?;
    fs::write(&md_path, markdown(ex))?;
    Ok(Written { csv: csv_path, markdown: md_path })
}
