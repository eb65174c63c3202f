//! Sampling of rescaled kernels over a `p`-sweep, and the CSV exchange format.
//!
//! Columns: `p, u1..u2n, uprime1..uprime2n, re_value, im_value, model,
//! kappa_left, kappa_right, point, deviation`, where `deviation` is
//! `|value - P(u, u')|` and `point` indexes the sample pair. Floats are
//! written with 17 significant digits in exponent notation.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calculus::ModelGaussian;
use crate::error::{Error, Result};
use crate::manifolds::{ManifoldKind, ModelManifold};

/// Perfect squares `25, 36, ..., 400`.
pub fn default_p_values() -> Vec<u32> {
    (5..=20).map(|k| k * k).collect()
}

/// Sweep for the torus: dense small `p` for the decay rate plus the squares.
pub fn default_torus_p_values() -> Vec<u32> {
    let mut p: Vec<u32> = vec![10, 12, 14, 16, 18, 20, 22, 25, 30];
    p.extend((6..=20).map(|k| k * k));
    p
}

/// `count` pairs `(u, u')` drawn uniformly from the disc of radius `sigma`.
pub fn sample_pairs(count: usize, sigma: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let r = sigma * rng.random::<f64>().sqrt();
        let t = std::f64::consts::TAU * rng.random::<f64>();
        vec![r * t.cos(), r * t.sin()]
    };
    (0..count).map(|_| (draw(), draw())).collect()
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub manifold: ModelManifold,
    pub base_point: Complex64,
    pub p_values: Vec<u32>,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRow {
    pub p: u32,
    pub u: Vec<f64>,
    pub up: Vec<f64>,
    pub value: Complex64,
    pub model: ManifoldKind,
    pub kappa_left: f64,
    pub kappa_right: f64,
    pub point: usize,
    pub deviation: f64,
}

impl SampleRow {
    /// Value with the density factors removed.
    pub fn raw(&self) -> Complex64 {
        self.value / (self.kappa_left * self.kappa_right).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepFailure {
    pub p: u32,
    pub point: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub rows: Vec<SampleRow>,
    pub failures: Vec<SweepFailure>,
}

/// Samples every `(p, pair)` in parallel; rows come out ordered by `p`
/// then pair index. Points that leave the chart are reported, not fatal.
pub fn run_sweep(config: &SweepConfig) -> SweepOutput {
    let gaussian = ModelGaussian::new(config.manifold.dim());
    let tasks: Vec<(u32, usize)> = config
        .p_values
        .iter()
        .flat_map(|&p| (0..config.pairs.len()).map(move |i| (p, i)))
        .collect();
    let results: Vec<std::result::Result<SampleRow, SweepFailure>> = tasks
        .par_iter()
        .map(|&(p, point)| {
            let (u, up) = &config.pairs[point];
            let fail = |e: Error| SweepFailure {
                p,
                point,
                message: e.to_string(),
            };
            let s = config
                .manifold
                .rescaled_kernel(p, config.base_point, u, up)
                .map_err(fail)?;
            let model = gaussian.value(u, up).map_err(fail)?;
            Ok(SampleRow {
                p,
                u: u.clone(),
                up: up.clone(),
                value: s.value,
                model: config.manifold.kind(),
                kappa_left: s.kappa_left,
                kappa_right: s.kappa_right,
                point,
                deviation: (s.value - model).norm(),
            })
        })
        .collect();
    let mut out = SweepOutput::default();
    for r in results {
        match r {
            Ok(row) => out.rows.push(row),
            Err(f) => out.failures.push(f),
        }
    }
    out
}

fn header(n: usize) -> Vec<String> {
    let mut h = vec!["p".to_string()];
    h.extend((1..=2 * n).map(|i| format!("u{i}")));
    h.extend((1..=2 * n).map(|i| format!("uprime{i}")));
    for s in [
        "re_value",
        "im_value",
        "model",
        "kappa_left",
        "kappa_right",
        "point",
        "deviation",
    ] {
        h.push(s.to_string());
    }
    h
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(rows: &[SampleRow], out: W) -> Result<()> {
    let n = rows.first().map_or(1, |r| r.u.len() / 2);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n))?;
    for r in rows {
        if r.u.len() != 2 * n || r.up.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                found: r.u.len().max(r.up.len()),
            });
        }
        let mut rec = vec![r.p.to_string()];
        rec.extend(r.u.iter().chain(&r.up).map(|&v| fmt(v)));
        rec.push(fmt(r.value.re));
        rec.push(fmt(r.value.im));
        rec.push(r.model.to_string());
        rec.push(fmt(r.kappa_left));
        rec.push(fmt(r.kappa_right));
        rec.push(r.point.to_string());
        rec.push(fmt(r.deviation));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, column: &str, line: u64) -> Result<T> {
    field.trim().parse().map_err(|_| {
        Error::Schema(format!(
            "line {line}: cannot parse '{field}' in column '{column}'"
        ))
    })
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SampleRow>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let head: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if head.len() < 10 || !head.len().is_multiple_of(2) {
        return Err(Error::Schema(format!(
            "unexpected header with {} columns",
            head.len()
        )));
    }
    let n = (head.len() - 8) / 4;
    let want = header(n);
    if head != want {
        return Err(Error::Schema(format!(
            "expected header '{}'",
            want.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != want.len() {
            return Err(Error::Schema(format!(
                "line {line}: expected {} fields",
                want.len()
            )));
        }
        let f = |i: usize| parse::<f64>(&rec[i], &want[i], line);
        let u = (1..=2 * n).map(f).collect::<Result<Vec<_>>>()?;
        let up = (2 * n + 1..=4 * n).map(f).collect::<Result<Vec<_>>>()?;
        let k = 4 * n + 1;
        rows.push(SampleRow {
            p: parse(&rec[0], "p", line)?,
            u,
            up,
            value: Complex64::new(f(k)?, f(k + 1)?),
            model: rec[k + 2].trim().parse()?,
            kappa_left: f(k + 3)?,
            kappa_right: f(k + 4)?,
            point: parse(&rec[k + 5], "point", line)?,
            deviation: f(k + 6)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Schema("no sample rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_seeded_and_bounded() {
        let a = sample_pairs(8, 1.0, 7);
        assert_eq!(a, sample_pairs(8, 1.0, 7));
        assert_ne!(a, sample_pairs(8, 1.0, 8));
        for (u, up) in &a {
            assert!(u[0].hypot(u[1]) <= 1.0 && up[0].hypot(up[1]) <= 1.0);
        }
    }

    #[test]
    fn default_sweeps() {
        let p = default_p_values();
        assert_eq!(p.len(), 16);
        assert_eq!((p[0], p[15]), (25, 400));
        assert!(default_torus_p_values().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_round_trip() {
        let config = SweepConfig {
            manifold: ModelManifold::cp1(),
            base_point: Complex64::new(0.3, 0.2),
            p_values: vec![25, 36],
            pairs: sample_pairs(3, 1.0, 1),
        };
        let out = run_sweep(&config);
        assert!(out.failures.is_empty());
        assert_eq!(out.rows.len(), 6);
        let mut buf = Vec::new();
        write_csv(&out.rows, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, out.rows);
    }

    #[test]
    fn csv_schema_errors() {
        assert!(matches!(read_csv("".as_bytes()), Err(Error::Schema(_))));
        let head = header(1).join(",");
        assert!(matches!(read_csv(head.as_bytes()), Err(Error::Schema(_))));
        let bad = format!("{head}\n25,x,0,0,0,1,0,cp1,1,1,0,0\n");
        assert!(matches!(read_csv(bad.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn chart_failures_are_collected() {
        let config = SweepConfig {
            manifold: ModelManifold::flat_torus(),
            base_point: Complex64::new(0.0, 0.0),
            p_values: vec![1, 30],
            pairs: vec![(vec![0.9, 0.0], vec![0.0, 0.0])],
        };
        let out = run_sweep(&config);
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].p, 1);
    }
}
