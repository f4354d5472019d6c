//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::Instant;

use common::gradcheck::{reconstruction_check, svdd_check, MAX_REL};
use common::{lingsel_env, multi_list_trace, ok, path_str, random_instance, read};
use lingsel::dsvdd::{ae_pretrain, dsvdd_fit, dsvdd_train, fix_center, DsvddConfig};
use lingsel::evaluation::gen_synthetic_suite;
use lingsel::iforest::{avg_path_length, iforest_train, IForestConfig};
use lingsel::numcore::Rng;
use lingsel::ocsvm::{ocsvm_train, Gamma, OcSvmConfig};
use lingsel::selection::{select_ensemble, select_random, ScoredList, SelectionConfig, Strategy};
use ndarray::Array2;
use tempfile::TempDir;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian(rng: &mut Rng, n: usize, d: usize, shift: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gaussian() + shift)
}

fn c1_oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut mismatches = 0;
    for seed in 0..500 {
        let inst = random_instance(seed);
        let cfg = SelectionConfig {
            budget_sec: inst.budget_sec,
            l0: inst.l0,
            strategy: Strategy::Ensemble,
            seed: 0,
            tight_budget: false,
        };
        let got = select_ensemble(&inst.lists[0], &inst.lists[1], &inst.lists[2], &inst.durations, &cfg).unwrap();
        let want = multi_list_trace(&inst.ids(0), &inst.ids(1), &inst.ids(2), &inst.durations, inst.l0, inst.budget_sec);
        if got.selected != want.selected || got.exhausted != want.exhausted {
            mismatches += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(mismatches == 0 && secs < 5.0, format!("{mismatches}/500 mismatches, {secs:.2} s (limit 5 s)"))
}

fn c2_nu_property() -> Outcome {
    let t = Instant::now();
    let (n, nu) = (200, 0.01);
    let mut worst_frac: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut box_ok = true;
    for d in [2, 512] {
        for seed in 0..20 {
            let x = gaussian(&mut Rng::new(seed), n, d, 0.0);
            let fit = ocsvm_train(x.view(), &OcSvmConfig::default()).unwrap();
            let dec = fit.model.decision_rows(x.view()).unwrap();
            let frac = dec.iter().filter(|&&v| v < 0.0).count() as f64 / n as f64;
            worst_frac = worst_frac.max(frac);
            worst_sum = worst_sum.max((fit.dual.iter().sum::<f64>() - 1.0).abs());
            box_ok &= fit.dual.iter().all(|&a| (0.0..=fit.upper).contains(&a));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let limit = nu + 1.0 / n as f64;
    outcome(
        worst_frac <= limit && worst_sum <= 1e-9 && box_ok && secs < 30.0,
        format!("max outlier fraction {worst_frac} (limit {limit}), max |Σα−1| {worst_sum:.1e}, box {box_ok}, {secs:.2} s (limit 30 s)"),
    )
}

fn c3_two_point_closed_form() -> Outcome {
    let x = Array2::from_shape_vec((2, 1), vec![0.0, 1.0]).unwrap();
    let cfg = OcSvmConfig {
        nu: 1.0,
        gamma: Gamma::Fixed(1.0),
        ..Default::default()
    };
    let fit = ocsvm_train(x.view(), &cfg).unwrap();
    let dec = fit.model.decision_rows(x.view()).unwrap();
    let alpha_err = fit.dual.iter().map(|a| (a - 0.5).abs()).fold(0.0, f64::max);
    let f_err = dec.iter().map(|f| f.abs()).fold(0.0, f64::max);
    outcome(
        fit.dual.len() == 2 && alpha_err <= 1e-9 && f_err <= 1e-9,
        format!("α = {:?}, f(x_i) = {dec:?} (tolerance 1e-9)", fit.dual),
    )
}

fn c4_iforest() -> Outcome {
    let (c1, c2, c256) = (avg_path_length(1), avg_path_length(2), avg_path_length(256));
    let formula = c1 == 0.0 && c2 == 1.0 && (c256 - 10.2448).abs() <= 1e-3;

    let same = Array2::from_elem((300, 3), 1.5);
    let model = iforest_train(same.view(), &IForestConfig::default()).unwrap();
    let queries = gaussian(&mut Rng::new(1), 20, 3, 0.0);
    let identical_dev = queries
        .rows()
        .into_iter()
        .chain(same.rows().into_iter().take(1))
        .map(|q| (model.anomaly_score(q).unwrap() - 0.5).abs())
        .fold(0.0, f64::max);

    let mut ranked = 0;
    for seed in 0..20 {
        let mut rng = Rng::new(100 + seed);
        let train = gaussian(&mut rng, 500, 2, 0.0);
        let inliers = gaussian(&mut rng, 100, 2, 0.0);
        let outliers = gaussian(&mut rng, 100, 2, 8.0);
        let m = iforest_train(train.view(), &IForestConfig { seed, ..Default::default() }).unwrap();
        let di = m.decision_rows(inliers.view()).unwrap();
        let dout = m.decision_rows(outliers.view()).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let pairs = di.iter().zip(&dout).filter(|(a, b)| a > b).count();
        if mean(&di) > mean(&dout) && pairs >= 95 {
            ranked += 1;
        }
    }
    outcome(
        formula && identical_dev <= 1e-12 && ranked >= 19,
        format!("c(1)={c1} c(2)={c2} c(256)={c256:.5}, identical-data |s−0.5| ≤ {identical_dev:.1e}, ranking {ranked}/20 seeds (need 19)"),
    )
}

fn c5_gradient_check() -> Outcome {
    let t = Instant::now();
    let (enc, dec) = reconstruction_check();
    let svdd = svdd_check();
    let secs = t.elapsed().as_secs_f64();
    let worst = enc.err.max(dec.err).max(svdd.err);
    outcome(
        worst < MAX_REL && secs < 10.0,
        format!("max relative error {worst:.2e} (limit {MAX_REL:.0e}), {secs:.2} s (limit 10 s)"),
    )
}

fn c6_contraction() -> Outcome {
    let x = gaussian(&mut Rng::new(64), 64, 512, 0.0);
    let cfg = DsvddConfig {
        ae_epochs: 100,
        enc_epochs: 50,
        ..Default::default()
    };
    let (encoder, _) = ae_pretrain(x.view(), &cfg).unwrap();
    let center = fix_center(&encoder, x.view()).unwrap();
    let bits: Vec<u64> = center.iter().map(|c| c.to_bits()).collect();
    match dsvdd_train(x.view(), encoder, center, &cfg) {
        Ok((model, report)) => {
            let unchanged = model.center.iter().map(|c| c.to_bits()).collect::<Vec<_>>() == bits;
            outcome(
                report.final_loss < report.initial_loss && unchanged,
                format!(
                    "mean distance {:.4e} -> {:.4e}, center bit-unchanged {unchanged}",
                    report.initial_loss, report.final_loss
                ),
            )
        }
        Err(e) => outcome(false, format!("training failed: {e}")),
    }
}

fn c7_pipeline(dir: &Path) -> Outcome {
    let t = Instant::now();
    let target = dir.join("target.jsonl");
    let other = dir.join("other.jsonl");
    ok(&["synth", "--seed", "1", "--separation", "10", "--dim", "512", "--n-target", "500", "--n-other", "2000",
        "--out-target", path_str(&target), "--out-other", path_str(&other)]);
    let methods: [(&str, &[&str]); 3] = [
        ("ocsvm", &[]),
        ("iforest", &[]),
        // desk schedule; the default 2500/1000 epochs alone exceeds the time limit here
        ("dsvdd", &["--ae-epochs", "100", "--enc-epochs", "300", "--enc-lr", "3e-3"]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (method, extra) in methods {
        let model = dir.join(format!("{method}.json"));
        let report = dir.join(format!("{method}.eval.json"));
        let mut args = vec!["train", "--method", method, "--manifest", path_str(&target), "--out", path_str(&model)];
        args.extend_from_slice(extra);
        ok(&args);
        ok(&["evaluate", "--model", path_str(&model), "--pos", path_str(&target), "--neg", path_str(&other), "--out", path_str(&report)]);
        let v: serde_json::Value = serde_json::from_slice(&read(&report)).unwrap();
        let (pos, neg) = (v["pos_err"].as_f64().unwrap(), v["neg_err"].as_f64().unwrap());
        pass &= pos <= 0.10 && neg <= 0.10;
        parts.push(format!("{method} pos {pos:.3} neg {neg:.3}"));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(pass && secs < 180.0, format!("{} (limit 0.10 each), {secs:.1} s (limit 180 s)", parts.join(", ")))
}

fn ranking(ids: &[String], scores: Vec<f64>) -> ScoredList {
    ScoredList::from_scores(ids.iter().cloned().zip(scores)).unwrap()
}

fn c8_selection_recovery() -> Outcome {
    let mut ok_seeds = 0;
    let mut lines = Vec::new();
    for seed in 0..10 {
        let (target, other) = gen_synthetic_suite(1000 + seed, 400, 2000, 512, 10.0).unwrap();
        let seed_set = target.head(300);
        let planted: Vec<_> = target.records()[300..].to_vec();
        let pool = lingsel::Corpus::new(planted.iter().cloned().chain(other.records().iter().cloned()).collect()).unwrap();
        let planted_ids: HashSet<&str> = planted.iter().map(|r| r.id.as_str()).collect();
        let budget_sec: f64 = planted.iter().map(|r| r.duration_sec).sum();

        let x = seed_set.matrix();
        let p = pool.matrix();
        let ids: Vec<String> = pool.ids().map(String::from).collect();
        let durations: HashMap<String, f64> = pool.records().iter().map(|r| (r.id.clone(), r.duration_sec)).collect();
        let dsvdd_cfg = DsvddConfig {
            ae_epochs: 100,
            enc_epochs: 50,
            seed,
            ..Default::default()
        };
        let d = dsvdd_fit(x.view(), &dsvdd_cfg).unwrap().model.decision_rows(p.view()).unwrap();
        let o = ocsvm_train(x.view(), &OcSvmConfig::default()).unwrap().model.decision_rows(p.view()).unwrap();
        let i = iforest_train(x.view(), &IForestConfig { seed, ..Default::default() })
            .unwrap()
            .decision_rows(p.view())
            .unwrap();
        let cfg = SelectionConfig {
            budget_sec,
            l0: 10,
            strategy: Strategy::Ensemble,
            seed,
            tight_budget: false,
        };
        let ens = select_ensemble(&ranking(&ids, d), &ranking(&ids, o), &ranking(&ids, i), &durations, &cfg).unwrap();
        let rnd = select_random(&ids, &durations, &SelectionConfig { strategy: Strategy::Random, ..cfg }).unwrap();
        let recall = |sel: &[String]| sel.iter().filter(|id| planted_ids.contains(id.as_str())).count() as f64 / 100.0;
        let (re, rr) = (recall(&ens.selected), recall(&rnd.selected));
        if re >= 0.8 && re > rr {
            ok_seeds += 1;
        }
        lines.push(format!("{re:.2}/{rr:.2}"));
    }
    outcome(
        ok_seeds == 10,
        format!("ensemble/random recall per seed [{}], {ok_seeds}/10 seeds meet ≥ 0.80 and beat random", lines.join(" ")),
    )
}

fn c9_determinism(dir: &Path) -> Outcome {
    let mut diffs = Vec::new();
    let mut twice = |name: &str, args: &dyn Fn(&str) -> Vec<String>, env: &[(&str, &str)], env2: &[(&str, &str)]| {
        let outs: Vec<Vec<u8>> = [env, env2]
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let out = dir.join(format!("{name}.{k}"));
                let a = args(path_str(&out));
                let r = lingsel_env(&a.iter().map(String::as_str).collect::<Vec<_>>(), e);
                assert_eq!(r.code, 0, "{name}: {}", r.stderr);
                read(&out)
            })
            .collect();
        if outs[0] != outs[1] {
            diffs.push(name.to_string());
        }
    };
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let target = dir.join("t.jsonl");
    let other = dir.join("o.jsonl");
    let (t, o) = (path_str(&target).to_string(), path_str(&other).to_string());
    ok(&["synth", "--seed", "5", "--n-target", "120", "--n-other", "200", "--out-target", &t, "--out-other", &o]);
    twice("synth", &|out| s(&["synth", "--seed", "5", "--n-target", "50", "--n-other", "50", "--out-target", out, "--out-other", &format!("{out}.other")]), &[], &[]);
    let one = [("LINGSEL_THREADS", "1")];
    let eight = [("LINGSEL_THREADS", "8")];
    let models = [
        ("ocsvm", s(&[])),
        ("iforest", s(&["--seed", "3"])),
        ("dsvdd", s(&["--ae-epochs", "3", "--enc-epochs", "3", "--seed", "3"])),
    ];
    for (method, extra) in &models {
        let train = |out: &str| {
            let mut a = s(&["train", "--method", method, "--manifest", &t, "--out", out]);
            a.extend(extra.iter().cloned());
            a
        };
        twice(&format!("train-{method}"), &train, &one, &eight);
        let model = dir.join(format!("train-{method}.0"));
        let m = path_str(&model).to_string();
        twice(&format!("score-{method}"), &|out| s(&["score", "--model", &m, "--manifest", &o, "--out", out]), &one, &eight);
        twice(&format!("evaluate-{method}"), &|out| s(&["evaluate", "--model", &m, "--pos", &t, "--neg", &o, "--out", out]), &[], &[]);
    }
    let sc: Vec<String> = ["dsvdd", "ocsvm", "iforest"].iter().map(|m| path_str(&dir.join(format!("score-{m}.0"))).to_string()).collect();
    let joined = sc.join(",");
    twice("select-ensemble", &|out| s(&["select", "--strategy", "ensemble", "--scores", &joined, "--pool", &o, "--hours", "0.5", "--l0", "20", "--out", out]), &[], &[]);
    twice("select-single", &|out| s(&["select", "--strategy", "single", "--scores", &sc[1], "--pool", &o, "--hours", "0.5", "--out", out]), &[], &[]);
    twice("select-random", &|out| s(&["select", "--strategy", "random", "--seed", "4", "--pool", &o, "--hours", "0.5", "--out", out]), &[], &[]);
    outcome(
        diffs.is_empty(),
        if diffs.is_empty() {
            "synth, train/score/evaluate for all methods (train and score under 1 vs 8 threads), select for all strategies: byte-identical".to_string()
        } else {
            format!("differing outputs: {}", diffs.join(", "))
        },
    )
}

fn main() {
    let dir = TempDir::new().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("1 selection oracle equivalence", Box::new(c1_oracle_equivalence)),
        ("2 OcSVM nu-property", Box::new(c2_nu_property)),
        ("3 OcSVM two-point closed form", Box::new(c3_two_point_closed_form)),
        ("4 Isolation Forest formulas and ranking", Box::new(c4_iforest)),
        ("5 Deep SVDD gradient check", Box::new(c5_gradient_check)),
        ("6 Deep SVDD contraction", Box::new(c6_contraction)),
        ("7 end-to-end synthetic pipeline", Box::new(|| c7_pipeline(dir.path()))),
        ("8 ensemble selection recovery", Box::new(c8_selection_recovery)),
        ("9 determinism", Box::new(|| c9_determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("N/A  criterion 10 CER, continued pre-training, ASR fine-tuning: not reproducible at desk scale, no test");
    println!("{} of {} testable criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
