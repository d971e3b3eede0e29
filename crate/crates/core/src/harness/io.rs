//! Text format for scenarios and ground truth, JSON for track sets.
//!
//! ```text
//! # any comment
//! horizon 50
//! obs_dim 2
//! seed 7
//! param p_d 0.9
//! obs 1 3.25 -10.5 clutter
//! obs 1 12 4 object 0
//! state 0 1 12.1 4.2 0.3 -0.1
//! ```
//!
//! `obs` lines list a scan's observations in index order. The label is
//! `clutter`, `object <id>` or `-` when unknown. `state` lines give an
//! object's state at consecutive times starting from its birth. Floats are
//! written in shortest round-trip form, so save/load is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{Scenario, TrackSet};
use crate::sim::{GroundTruth, SimParams, Trajectory};

/// Contents of a scenario file.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub params: Option<SimParams>,
    pub seed: Option<u64>,
    pub truth: Option<GroundTruth>,
}

fn param_pairs(p: &SimParams) -> Vec<(&'static str, String)> {
    vec![
        ("dt", p.dt.to_string()),
        ("sigma_a", p.sigma_a.to_string()),
        ("sigma", p.sigma.to_string()),
        ("window", p.window.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")),
        ("p_d", p.p_d.to_string()),
        ("p_s", p.p_s.to_string()),
        ("lambda_fa", p.lambda_fa.to_string()),
        ("lambda_b", p.lambda_b.to_string()),
        ("sigma_v", p.sigma_v.to_string()),
    ]
}

pub fn write_scenario<W: Write>(file: &ScenarioFile, mut w: W) -> Result<()> {
    let sc = &file.scenario;
    let mut out = String::new();
    writeln!(out, "# possmc scenario").unwrap();
    writeln!(out, "horizon {}", sc.horizon()).unwrap();
    writeln!(out, "obs_dim {}", sc.obs_dim()).unwrap();
    if let Some(s) = file.seed {
        writeln!(out, "seed {s}").unwrap();
    }
    if let Some(p) = &file.params {
        for (k, v) in param_pairs(p) {
            writeln!(out, "param {k} {v}").unwrap();
        }
    }
    for k in 1..=sc.horizon() {
        for (i, z) in sc.scan(k).iter().enumerate() {
            write!(out, "obs {k}").unwrap();
            for v in z.iter() {
                write!(out, " {v}").unwrap();
            }
            match file.truth.as_ref().map(|t| t.labels[k - 1][i]) {
                None => out.push_str(" -\n"),
                Some(None) => out.push_str(" clutter\n"),
                Some(Some(j)) => writeln!(out, " object {j}").unwrap(),
            }
        }
    }
    if let Some(t) = &file.truth {
        for (j, obj) in t.objects.iter().enumerate() {
            for (d, s) in obj.states.iter().enumerate() {
                writeln!(out, "state {j} {} {} {} {} {}", obj.birth + d, s[0], s[1], s[2], s[3]).unwrap();
            }
        }
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let t = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    t.parse().map_err(|_| parse_err(line, format!("invalid {what} '{t}'")))
}

pub fn read_scenario<R: BufRead>(r: R) -> Result<ScenarioFile> {
    let mut horizon: Option<usize> = None;
    let mut obs_dim: Option<usize> = None;
    let mut seed = None;
    let mut params: BTreeMap<String, String> = BTreeMap::new();
    let mut scans: Vec<Vec<DVector<f64>>> = Vec::new();
    let mut labels: Vec<Vec<Option<Option<usize>>>> = Vec::new();
    let mut states: BTreeMap<usize, Vec<(usize, [f64; 4])>> = BTreeMap::new();
    for (n, line) in r.lines().enumerate() {
        let ln = n + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next().unwrap_or_default() {
            "horizon" => {
                let k: usize = num(tok.next(), ln, "horizon")?;
                if k == 0 {
                    return Err(parse_err(ln, "horizon must be positive"));
                }
                horizon = Some(k);
                scans = vec![Vec::new(); k];
                labels = vec![Vec::new(); k];
            }
            "obs_dim" => obs_dim = Some(num(tok.next(), ln, "obs_dim")?),
            "seed" => seed = Some(num(tok.next(), ln, "seed")?),
            "param" => {
                let key = tok.next().ok_or_else(|| parse_err(ln, "missing parameter name"))?;
                params.insert(key.to_string(), tok.collect::<Vec<_>>().join(" "));
            }
            "obs" => {
                let (Some(k_max), Some(d)) = (horizon, obs_dim) else {
                    return Err(parse_err(ln, "obs before horizon and obs_dim"));
                };
                let k: usize = num(tok.next(), ln, "time")?;
                if k == 0 || k > k_max {
                    return Err(parse_err(ln, format!("time {k} outside 1..={k_max}")));
                }
                let mut z = Vec::with_capacity(d);
                for c in 0..d {
                    z.push(num::<f64>(tok.next(), ln, &format!("coordinate {c}"))?);
                }
                let label = match tok.next() {
                    None | Some("-") => None,
                    Some("clutter") => Some(None),
                    Some("object") => Some(Some(num(tok.next(), ln, "object id")?)),
                    Some(other) => return Err(parse_err(ln, format!("invalid label '{other}'"))),
                };
                if tok.next().is_some() {
                    return Err(parse_err(ln, "trailing tokens"));
                }
                scans[k - 1].push(DVector::from_vec(z));
                labels[k - 1].push(label);
            }
            "state" => {
                let j: usize = num(tok.next(), ln, "object id")?;
                let k: usize = num(tok.next(), ln, "time")?;
                let mut s = [0.0; 4];
                for (c, v) in s.iter_mut().enumerate() {
                    *v = num(tok.next(), ln, &format!("state component {c}"))?;
                }
                states.entry(j).or_default().push((k, s));
            }
            other => return Err(parse_err(ln, format!("unknown record '{other}'"))),
        }
    }
    let (Some(_), Some(d)) = (horizon, obs_dim) else {
        return Err(parse_err(0, "missing horizon or obs_dim"));
    };
    let scenario = Scenario::new(d, scans)?;
    let params = if params.is_empty() { None } else { Some(sim_params(&params, scenario.horizon())?) };
    let labelled = labels.iter().flatten().all(Option::is_some);
    let truth = if labelled && (!states.is_empty() || labels.iter().flatten().next().is_some()) {
        let mut objects = Vec::with_capacity(states.len());
        for (idx, (j, mut st)) in states.into_iter().enumerate() {
            if j != idx {
                return Err(parse_err(0, format!("object ids must be consecutive from 0, missing {idx}")));
            }
            st.sort_by_key(|(k, _)| *k);
            let birth = st[0].0;
            if st.iter().enumerate().any(|(d, (k, _))| *k != birth + d) {
                return Err(parse_err(0, format!("states of object {j} are not at consecutive times")));
            }
            objects.push(Trajectory { birth, states: st.into_iter().map(|(_, s)| s).collect() });
        }
        let labels: Vec<Vec<Option<usize>>> =
            labels.into_iter().map(|s| s.into_iter().map(|l| l.expect("labelled")).collect()).collect();
        if let Some(bad) = labels.iter().flatten().flatten().find(|&&j| j >= objects.len()) {
            return Err(parse_err(0, format!("label refers to unknown object {bad}")));
        }
        Some(GroundTruth { objects, labels })
    } else {
        None
    };
    Ok(ScenarioFile { scenario, params, seed, truth })
}

fn sim_params(map: &BTreeMap<String, String>, horizon: usize) -> Result<SimParams> {
    let mut p = SimParams { horizon, ..SimParams::default() };
    for (k, v) in map {
        let f = || v.parse::<f64>().map_err(|_| parse_err(0, format!("invalid value for param {k}: '{v}'")));
        match k.as_str() {
            "dt" => p.dt = f()?,
            "sigma_a" => p.sigma_a = f()?,
            "sigma" => p.sigma = f()?,
            "p_d" => p.p_d = f()?,
            "p_s" => p.p_s = f()?,
            "lambda_fa" => p.lambda_fa = f()?,
            "lambda_b" => p.lambda_b = f()?,
            "sigma_v" => p.sigma_v = f()?,
            "window" => {
                let w: Vec<f64> = v
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(0, format!("invalid window '{v}'")))?;
                p.window = w.try_into().map_err(|_| parse_err(0, "window needs four numbers"))?;
            }
            _ => return Err(parse_err(0, format!("unknown param '{k}'"))),
        }
    }
    p.validate()?;
    Ok(p)
}

pub fn write_track_set<W: Write>(tracks: &TrackSet, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, tracks)?;
    Ok(())
}

pub fn read_track_set<R: std::io::Read>(r: R) -> Result<TrackSet> {
    let t: TrackSet = serde_json::from_reader(r)?;
    TrackSet::new(t.tracks().to_vec())
}
