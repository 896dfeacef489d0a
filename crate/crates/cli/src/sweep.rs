//! Rate-formula landscape over a (δ, γ) grid; no matrices are built. The
//! given γ is used for both γ and γ̄.

use std::fmt::Write as _;

use saddle_core::theory::{bwy_rates, prior_rates, sium_rates};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub delta: Axis,
    pub gamma: Axis,
}

/// `start:stop:count` (inclusive ends) or a single number.
fn parse_axis(text: &str) -> Result<Axis, String> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("`{s}` is not a number"));
    match parts.as_slice() {
        [x] => Ok(Axis { values: vec![num(x)?] }),
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.parse().map_err(|_| format!("`{n}` is not a point count"))?;
            if n < 2 {
                return Err("point count must be >= 2".into());
            }
            if b < a {
                return Err(format!("stop {b} is below start {a}"));
            }
            Ok(Axis { values: (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect() })
        }
        _ => Err(format!("`{text}`: expected start:stop:count or a number")),
    }
}

/// Parses `delta=...,gamma=...`.
pub fn parse_grid(text: &str) -> Result<SweepGrid, String> {
    let (mut delta, mut gamma) = (None, None);
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| format!("`{item}`: expected name=range"))?;
        let axis = parse_axis(v)?;
        if axis.values.iter().any(|x| *x < 0.0) {
            return Err(format!("{k}: values must be >= 0"));
        }
        match k.trim() {
            "delta" => delta = Some(axis),
            "gamma" => gamma = Some(axis),
            other => return Err(format!("unknown axis `{other}` (expected delta or gamma)")),
        }
    }
    Ok(SweepGrid { delta: delta.ok_or("missing delta axis")?, gamma: gamma.ok_or("missing gamma axis")? })
}

pub const SWEEP_COLUMNS: [&str; 10] =
    ["delta", "gamma", "rho1", "rho1_valid", "rho1_tilde", "rho2", "rho2_root", "rho2_tilde", "prior_bwy1990", "prior_ts_convergent"];

fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        crate::report::NA.into()
    }
}

/// CSV text, rows in δ-major order.
pub fn sweep_csv(grid: &SweepGrid) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for &d in &grid.delta.values {
        for &g in &grid.gamma.values {
            let b = bwy_rates(d, g, g);
            let s = sium_rates(d, g, g);
            let prior = prior_rates(d, g).ok();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                cell(d),
                cell(g),
                cell(b.rho1.value),
                b.rho1.valid(),
                cell(b.rho1_tilde.value),
                cell(s.rho2.value),
                cell(s.rho2_root.value),
                cell(s.rho2_tilde.value),
                prior.map(|p| cell(p.bwy1990)).unwrap_or_else(|| crate::report::NA.into()),
                prior.map(|p| p.ts_convergent.to_string()).unwrap_or_else(|| crate::report::NA.into()),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("delta=0:0.6:4, gamma=0.5").unwrap();
        assert_eq!(g.delta.values.len(), 4);
        assert!((g.delta.values[3] - 0.6).abs() < 1e-15);
        assert_eq!(g.gamma.values, vec![0.5]);
        assert!(parse_grid("delta=0:1:1,gamma=0").is_err());
        assert!(parse_grid("delta=0,gama=0").is_err());
        assert!(parse_grid("delta=0").is_err());
    }

    #[test]
    fn rho1_at_zero_delta_is_gamma() {
        let csv = sweep_csv(&parse_grid("delta=0,gamma=0:0.9:10").unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 11);
        for line in &lines[1..] {
            let f: Vec<&str> = line.split(',').collect();
            let g: f64 = f[1].parse().unwrap();
            let r: f64 = f[2].parse().unwrap();
            assert!((r - g).abs() <= 1e-12);
        }
    }
}
