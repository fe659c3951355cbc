//! Acceptance criteria at their pinned tolerances. Prints one PASS/FAIL line
//! per criterion plus informational lines. Exits nonzero on any failure only
//! when `ACCEPTANCE_STRICT=1`, so the rest of the workspace suite still runs.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use rayon::prelude::*;

use syncmarket::calibration::{calibrate, CalibrationSettings, MechanismKind};
use syncmarket::experiments::{
    run_duration_grid, run_sweep, write_results, ExperimentConfig, ResultRow, SweepAxis, SweepParam,
};
use syncmarket::mechanisms::{run_omniscient, MarketContext, Pvisa, EFFECTIVELY_INFINITE};
use syncmarket::scenario_gen::{sample_scenario, GeneratorConfig};
use syncmarket::stats::{spearman, variance};
use syncmarket::verification::fixtures::{AdditiveReserve, FirstPrice, SumOfCompetingBids};
use syncmarket::verification::{
    adversarial_sup_ratio, check_bound, gamma_floor, power_law_config, run_property_suite, Benchmark, BoundReport,
    BoundSpec, Metric,
};
use syncmarket::welfare::brute_force_benchmark;

const TRIALS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

struct Suite {
    failed: Vec<String>,
    passed: usize,
}

impl Suite {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
        if o.pass {
            self.passed += 1;
        } else {
            self.failed.push(name.to_string());
        }
    }
}

fn info(line: String) {
    println!("INFO {line}");
}

fn settings() -> CalibrationSettings {
    CalibrationSettings::default()
}

fn bound(mechanism: MechanismKind, benchmark: Benchmark, metric: Metric, target: f64, config: &GeneratorConfig) -> BoundReport {
    let spec = BoundSpec { mechanism, benchmark, metric, bound: target };
    check_bound(&spec, config, &settings(), TRIALS).expect("bound run")
}

fn fmt(r: &BoundReport) -> String {
    format!("{} mean {:.4} ci99 {:.4} lower {:.4}", r.label, r.ratio_mean, r.ratio_ci, r.lower())
}

fn table_ii() -> GeneratorConfig {
    GeneratorConfig { rng_seed: 42, ..GeneratorConfig::default() }
}

fn theorem2_total() -> Outcome {
    let cfg = power_law_config(&table_ii());
    let r = bound(MechanismKind::epvisa(), Benchmark::ConditionalOmniscient, Metric::Total, 0.96, &cfg);
    let u = bound(MechanismKind::epvisa(), Benchmark::Omniscient, Metric::Total, 0.96, &cfg);
    info(format!("power-law total vs unconditional omniscient: {}", fmt(&u)));
    Outcome { pass: r.ratio_mean >= 0.96 && r.lower() >= 0.955, detail: fmt(&r) }
}

fn theorem2_perf() -> Outcome {
    let cfg = power_law_config(&table_ii());
    let r = bound(MechanismKind::epvisa(), Benchmark::ConditionalOmniscient, Metric::Perf, 0.885, &cfg);
    let u = bound(MechanismKind::epvisa(), Benchmark::Omniscient, Metric::Perf, 0.885, &cfg);
    info(format!("power-law perf vs unconditional omniscient: {}", fmt(&u)));
    let grid: Vec<f64> = (1..100_000).map(|i| 1.0 / (1.0 - i as f64 / 100_000.0)).collect();
    let g = gamma_floor(&grid).expect("grid in domain");
    Outcome {
        pass: r.ratio_mean >= 0.885 && r.lower() >= 0.88 && (0.8855..=0.8866).contains(&g),
        detail: format!("{}; gamma floor {g:.6}", fmt(&r)),
    }
}

/// Monte Carlo sup over brand bids of PViSA's ratio on the adversarial
/// family, with one Pareto(`tail`) valuation and `k` Pareto(`a`) matches.
fn adversarial_monte_carlo(a: f64, tail: f64, eps: f64, k: usize, n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let nu_d = Pareto::new(1.0, tail).unwrap();
    let m_d = Pareto::new(1.0, a).unwrap();
    let draws: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let nu: f64 = nu_d.sample(&mut rng);
            let top = (0..k).map(|_| m_d.sample(&mut rng)).fold(0.0, f64::max);
            (nu, top)
        })
        .collect();
    let mean_top = draws.iter().map(|d| d.1).sum::<f64>() / n as f64;
    let brand = (1.0 + eps) * mean_top;
    let omni: f64 = draws.iter().map(|&(nu, m)| nu * (1.0 + m.max(brand))).sum();
    let mut bids = vec![0.0, EFFECTIVELY_INFINITE];
    bids.extend((0..=60).map(|i| (i as f64 * 0.1).exp()));
    bids.iter()
        .map(|&b| {
            let w: f64 = draws.iter().map(|&(nu, m)| nu * (1.0 + if nu * m <= b { brand } else { m })).sum();
            w / omni
        })
        .fold(0.0, f64::max)
}

fn half_bounds() -> Outcome {
    let cfg = table_ii();
    let pv: Vec<BoundReport> = [0.0, EFFECTIVELY_INFINITE]
        .iter()
        .map(|&b| bound(MechanismKind::Pvisa { brand_bid: Some(b) }, Benchmark::ConditionalOmniscient, Metric::Total, 0.5, &cfg))
        .collect();
    let ep: Vec<BoundReport> = [1.0, EFFECTIVELY_INFINITE]
        .iter()
        .map(|&a| bound(MechanismKind::epvisa_with_alpha(a), Benchmark::ConditionalOmniscient, Metric::Total, 0.5, &cfg))
        .collect();
    let best = |v: &[BoundReport]| v.iter().max_by(|x, y| x.ratio_mean.total_cmp(&y.ratio_mean)).unwrap().clone();
    let (bp, be) = (best(&pv), best(&ep));
    for r in pv.iter().chain(&ep) {
        info(format!("degenerate setting {}", fmt(r)));
    }
    for kind in [MechanismKind::Pvisa { brand_bid: Some(0.0) }, MechanismKind::epvisa_with_alpha(1.0)] {
        let u = bound(kind, Benchmark::Omniscient, Metric::Total, 0.5, &cfg);
        info(format!("default settings vs unconditional omniscient: {}", fmt(&u)));
    }
    let sup = adversarial_sup_ratio(1.05, 1.001, 0.05, 2).expect("adversarial ratio");
    let analytic2 = adversarial_sup_ratio(2.0, 3.0, 0.05, 2).expect("adversarial ratio");
    let mc2 = adversarial_monte_carlo(2.0, 3.0, 0.05, 2, 1_000_000);
    let pass = bp.lower() >= 0.5 - 0.005
        && bp.ratio_mean >= 0.5
        && be.lower() >= 0.5 - 0.005
        && be.ratio_mean >= 0.5
        && sup < 0.6
        && (analytic2 - mc2).abs() <= 0.01;
    Outcome {
        pass,
        detail: format!(
            "best PViSA {}; best EPViSA {}; adversarial sup {sup:.4}; a=2 analytic {analytic2:.4} vs Monte Carlo {mc2:.4}",
            fmt(&bp),
            fmt(&be)
        ),
    }
}

fn rows_for(rows: &[ResultRow], mech: &str) -> Vec<ResultRow> {
    rows.iter().filter(|r| r.mechanism == mech).cloned().collect()
}

fn dominance() -> Outcome {
    let c = ExperimentConfig {
        trials: TRIALS,
        sweep: SweepAxis { param: SweepParam::NumAvs, values: vec![30.0] },
        ..ExperimentConfig::default()
    };
    let rows = run_sweep(&c).expect("sweep");
    let pv = &rows_for(&rows, "pvisa")[0];
    let ep = &rows_for(&rows, "epvisa")[0];
    Outcome {
        pass: ep.mean_total - ep.ci_total >= 2.0 * (pv.mean_total + pv.ci_total),
        detail: format!(
            "EPViSA {:.4} ± {:.4}, PViSA {:.4} ± {:.4}, ratio {:.3}",
            ep.mean_total,
            ep.ci_total,
            pv.mean_total,
            pv.ci_total,
            ep.mean_total / pv.mean_total
        ),
    }
}

fn property_suite() -> Outcome {
    let cfg = table_ii();
    let calib = calibrate(&cfg, &settings()).expect("calibration");
    let ep = MechanismKind::epvisa().build(&cfg, &calib, &settings()).expect("build");
    let r = run_property_suite(ep.as_ref(), &cfg, 1000).expect("suite");
    let pv = run_property_suite(&Pvisa::new(calib.brand_bid), &cfg, 1000).expect("suite");
    info(format!(
        "PViSA suite: sp {} fnp {} asf {}",
        pv.strategy_proof.len(),
        pv.false_name.len(),
        pv.adverse_selection.len()
    ));
    let fp = run_property_suite(&FirstPrice(Pvisa::new(0.0)), &cfg, 50).expect("suite");
    let sum = run_property_suite(&SumOfCompetingBids { alpha: 1.0, brand_bid: 0.0 }, &cfg, 50).expect("suite");
    let res = run_property_suite(&AdditiveReserve { alpha: 1.0, reserve: 0.5, brand_bid: 0.0 }, &cfg, 50).expect("suite");
    let sensitivity = [fp.strategy_proof.len(), sum.false_name.len(), res.adverse_selection.len()];
    Outcome {
        pass: r.pass() && sensitivity.iter().all(|&n| n >= 1),
        detail: format!(
            "EPViSA over {} scenarios: sp {} fnp {} asf {}; fixture violations first-price {} sum-critical {} reserve {}",
            r.scenarios,
            r.strategy_proof.len(),
            r.false_name.len(),
            r.adverse_selection.len(),
            sensitivity[0],
            sensitivity[1],
            sensitivity[2]
        ),
    }
}

fn oracle_equivalence() -> Outcome {
    let results: Vec<(bool, bool, bool)> = (0..500u64)
        .into_par_iter()
        .map(|t| {
            let cfg = GeneratorConfig {
                num_avs: 1 + (t % 4) as usize,
                num_perf_mbps: 1 + ((t / 4) % 4) as usize,
                rng_seed: 7_000 + t,
                ..GeneratorConfig::default()
            };
            let small = CalibrationSettings { draws: 50, estimate_samples: 50 };
            let s = sample_scenario(&cfg, t).expect("scenario");
            let calib = calibrate(&cfg, &small).expect("calibration");
            let (brute, alloc) = brute_force_benchmark(&s).expect("enumeration");
            let omni = run_omniscient(&s).ok();
            let omni_total = omni.as_ref().map_or(0.0, |o| o.total_welfare);
            let bounded = brute.total >= omni_total;
            let same_choice = omni.as_ref().map_or(alloc.av.is_none(), |o| o.winner_av == alloc.av && o.winner_mbp == alloc.mbp);
            let equal_when_same = !same_choice || brute.total == omni_total;
            let ctx = MarketContext::new(&s).expect("context");
            let chain = [MechanismKind::pvisa(), MechanismKind::epvisa()].iter().all(|k| {
                let m = k.build(&cfg, &calib, &small).expect("build");
                m.run_truthful(&ctx).expect("run").total_welfare <= omni_total
            });
            (bounded, equal_when_same, chain)
        })
        .collect();
    let bad = |f: fn(&(bool, bool, bool)) -> bool| results.iter().filter(|r| !f(r)).count();
    let (b, e, c) = (bad(|r| r.0), bad(|r| r.1), bad(|r| r.2));
    Outcome {
        pass: b == 0 && e == 0 && c == 0,
        detail: format!("500 instances: omniscient above optimum {b}, unequal on same choice {e}, chain breaks {c}"),
    }
}

fn trends() -> Outcome {
    let base = ExperimentConfig { trials: TRIALS, ..ExperimentConfig::default() };
    let mut lines = Vec::new();
    let mut pass = true;
    for param in [SweepParam::NumAvs, SweepParam::NumPerfMbps] {
        let c = ExperimentConfig { sweep: SweepAxis::default_for(param), ..base.clone() };
        let rows = run_sweep(&c).expect("sweep");
        for mech in ["pvisa", "epvisa"] {
            let r = rows_for(&rows, mech);
            let rho = spearman(&r.iter().map(|x| x.param_value).collect::<Vec<_>>(), &r.iter().map(|x| x.mean_total).collect::<Vec<_>>());
            pass &= rho > 0.9;
            lines.push(format!("{mech} welfare vs {} rho {rho:.3}", param.name()));
        }
        let (pv, ep) = (rows_for(&rows, "pvisa"), rows_for(&rows, "epvisa"));
        let brand_ok = pv.iter().zip(&ep).all(|(p, e)| e.mean_brand > p.mean_brand);
        pass &= brand_ok;
        lines.push(format!("brand surplus EPViSA > PViSA in every {} cell: {brand_ok}", param.name()));
    }
    let rows = run_duration_grid(&base, &base.dt_axis, &base.ar_axis).expect("grid");
    let on = |name: &str, mech: &str| -> Vec<ResultRow> {
        rows.iter().filter(|r| r.param_name == name && r.mechanism == mech).cloned().collect()
    };
    let ep_ar = on("ar_scale", "epvisa");
    let rho = spearman(&ep_ar.iter().map(|x| x.param_value).collect::<Vec<_>>(), &ep_ar.iter().map(|x| x.mean_duration_s).collect::<Vec<_>>());
    let durations: Vec<String> = ep_ar.iter().map(|x| format!("{:.4}", x.mean_duration_s)).collect();
    pass &= rho < -0.9;
    lines.push(format!("EPViSA duration vs ar_scale rho {rho:.3} [{}]", durations.join(", ")));
    let var = |mech: &str| variance(&on("dt_scale", mech).iter().map(|x| x.mean_duration_s).collect::<Vec<_>>());
    let (vp, ve) = (var("pvisa"), var("epvisa"));
    pass &= ve <= vp;
    lines.push(format!("duration variance over dt_scale EPViSA {ve:.3e} vs PViSA {vp:.3e}"));
    Outcome { pass, detail: lines.join("; ") }
}

fn determinism() -> Outcome {
    let mut c = ExperimentConfig {
        trials: 300,
        calibration: CalibrationSettings { draws: 200, estimate_samples: 200 },
        sweep: SweepAxis { param: SweepParam::CacheSize, values: vec![5.0, 20.0] },
        ..ExperimentConfig::default()
    };
    let mut outputs = Vec::new();
    for w in [1, 2, 4, 7] {
        c.workers = Some(w);
        let rows = run_sweep(&c).expect("sweep");
        let mut buf = Vec::new();
        write_results(&rows, &mut buf, c.format).expect("write");
        outputs.push(buf);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Outcome { pass: same, detail: format!("{} worker counts, {} bytes each", outputs.len(), outputs[0].len()) }
}

fn main() {
    let mut suite = Suite { failed: Vec::new(), passed: 0 };
    suite.run("power-law total welfare bound 0.96", theorem2_total);
    suite.run("power-law performance surplus bound 0.885", theorem2_perf);
    suite.run("half bounds and adversarial tightness", half_bounds);
    suite.run("EPViSA at least twice PViSA welfare", dominance);
    suite.run("incentive property suite", property_suite);
    suite.run("small-instance oracle equivalence", oracle_equivalence);
    suite.run("sweep trends", trends);
    suite.run("worker-count determinism", determinism);
    println!("acceptance: {} passed, {} failed {:?}", suite.passed, suite.failed.len(), suite.failed);
    if !suite.failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
