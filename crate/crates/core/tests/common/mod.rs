//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod gradcheck;

use std::collections::{HashMap, HashSet};

use lingsel::numcore::Rng;
use lingsel::selection::ScoredList;

/// Straight-line transcription of the multi-list selection loop, written
/// without reference to the library implementation.
#[derive(Debug, PartialEq)]
pub struct TraceResult {
    pub selected: Vec<String>,
    pub total_sec: f64,
    pub exhausted: bool,
    pub passes: usize,
}

pub fn multi_list_trace(
    u1: &[String],
    u2: &[String],
    u3: &[String],
    durations: &HashMap<String, f64>,
    l0: usize,
    budget_sec: f64,
) -> TraceResult {
    let longest = u1.len().max(u2.len()).max(u3.len());
    let mut r: Vec<String> = Vec::new();
    let mut total = 0.0;
    let mut window = l0;
    let mut passes = 0;
    while total < budget_sec {
        passes += 1;
        let top1 = &u1[..window.min(u1.len())];
        let top2 = &u2[..window.min(u2.len())];
        let top3 = &u3[..window.min(u3.len())];
        let mut admitted = false;
        for u in top1 {
            if !r.contains(u) && top2.contains(u) && top3.contains(u) {
                r.push(u.clone());
                total += durations[u];
                admitted = true;
            }
        }
        if !admitted && window >= longest {
            break;
        }
        window += l0;
    }
    TraceResult {
        selected: r,
        total_sec: total,
        exhausted: total < budget_sec,
        passes,
    }
}

/// One random selection instance: three independently scored rankings of
/// the same pool.
pub struct Instance {
    pub lists: [ScoredList; 3],
    pub durations: HashMap<String, f64>,
    pub l0: usize,
    pub budget_sec: f64,
}

impl Instance {
    pub fn ids(&self, i: usize) -> Vec<String> {
        self.lists[i].ids().map(String::from).collect()
    }

    pub fn pool_total(&self) -> f64 {
        self.durations.values().sum()
    }
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = Rng::new(seed);
    let n = 1 + rng.below(50);
    let ids: Vec<String> = (0..n).map(|i| format!("u{i:02}")).collect();
    let durations: HashMap<String, f64> = ids.iter().map(|id| (id.clone(), 5.0 + 20.0 * rng.uniform())).collect();
    let mut list = || ScoredList::from_scores(ids.iter().map(|id| (id.clone(), rng.uniform()))).unwrap();
    let lists = [list(), list(), list()];
    let l0 = 1 + rng.below(10);
    let total: f64 = durations.values().sum();
    let hi = (1.5 * total).max(10.0);
    let budget_sec = 10.0 + (hi - 10.0) * rng.uniform();
    Instance {
        lists,
        durations,
        l0,
        budget_sec,
    }
}

pub fn unique(ids: &[String]) -> bool {
    ids.iter().collect::<HashSet<_>>().len() == ids.len()
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn lingsel(args: &[&str]) -> Run {
    lingsel_env(args, &[])
}

pub fn lingsel_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_lingsel"))
        .args(args)
        .envs(env.iter().copied())
        .output()
        .expect("spawn lingsel");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn ok(args: &[&str]) -> Run {
    let r = lingsel(args);
    assert_eq!(r.code, 0, "lingsel {args:?} failed:\n{}", r.stderr);
    r
}

pub fn path_str(p: &std::path::Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn read(p: &std::path::Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn json_lines(p: &std::path::Path) -> Vec<serde_json::Value> {
    String::from_utf8(read(p))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}
