//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Set `DROPLAB_ACCEPTANCE=1,5,10` to run a subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{
    batch_means, brute_distribution, cutpoint_decomposition_holds, exact_conditional_area, lattice_disc_config,
    mean_and_se, oracle_enclosed_area, outermost_oracle, rational, rational_weight, reduced_instance, total_variation,
};
use droplab::circuit::{cutpoints, interior_area, mprg, outermost_circuit, regeneration_sites, theta_rg_max};
use droplab::conditioned::{enclosed_area, rejection_sample, warm_start, ConditionSpec, ConstrainedChain};
use droplab::droplet::DropletStats;
use droplab::geometry::{in_backward_cone, in_forward_cone};
use droplab::harness::{fit_scaling, run_scan, tail_report, wulff_for, ChainPlan, ScanPlan, Statistic, WulffSpec};
use droplab::lattice::{dual_config, Region};
use droplab::model::{
    critical_point, dual_params, exact_distribution, exact_distribution_graph, sample_fk, sample_q1, HeatBath,
};
use droplab::surgery::{kernel_report, SurgeryPlan};
use droplab::wulff::{choose_constants, disc};
use droplab::{BondConfig, Boundary, BoxGeom, RcParams, Site, StreamRng};
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Conditioned samples shared by criteria 5, 7, 8 and 9.
struct Scan {
    rows: Vec<DropletStats>,
    q0: f64,
    c0: f64,
    seconds: f64,
}

type Criterion = (u32, &'static str, fn(&mut Shared) -> Verdict);

#[derive(Default)]
struct Shared {
    scan: Option<Scan>,
}

const SCAN_N: [u32; 4] = [12, 16, 24, 32];

impl Shared {
    fn scan(&mut self) -> &Scan {
        self.scan.get_or_insert_with(|| {
            let t = Instant::now();
            let (p_c, _) = critical_point(1.0);
            let params = RcParams::new(0.7 * p_c, 1.0, Boundary::Free).unwrap();
            let bundle = wulff_for(&params, &WulffSpec::default(), None).unwrap();
            let k = bundle.shape.constants.unwrap();
            let plan = ScanPlan {
                n_list: SCAN_N.to_vec(),
                params,
                chains: ChainPlan { burn_in: 200, sweeps: 2000, thin: 8, chains: 4, seed: 0 },
                margin: 2.5,
            };
            let entries = run_scan(&plan, &bundle.shape, 1).unwrap();
            let mut rows = Vec::new();
            for e in entries {
                assert!(e.error.is_none(), "n = {}: {:?}", e.n, e.error);
                rows.extend(e.rows);
            }
            Scan { rows, q0: k.q0, c0: k.c0, seconds: t.elapsed().as_secs_f64() }
        })
    }
}

fn sampler_exactness(_: &mut Shared) -> Verdict {
    let geom = BoxGeom::new(1).unwrap();
    let draws = 100_000;
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for q in [1.0, 1.5, 2.0] {
        for p in [0.2, 0.5] {
            let params = RcParams::new(p, q, Boundary::Free).unwrap();
            let exact = exact_distribution(geom, &params).unwrap();
            let cdf: Vec<f64> = exact
                .iter()
                .scan(0.0, |acc, &x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect();
            let mut rng = StreamRng::new(1, (q * 10.0) as u64 * 100 + (p * 10.0) as u64 * 2);
            let (mut counts, mut reference) = (vec![0f64; exact.len()], vec![0f64; exact.len()]);
            for _ in 0..draws {
                counts[sample_fk(geom, &params, 1000, &mut rng).unwrap().to_bits() as usize] += 1.0;
                let u: f64 = rng.random();
                reference[cdf.partition_point(|&c| c < u).min(exact.len() - 1)] += 1.0;
            }
            let emp: Vec<f64> = counts.iter().map(|c| c / draws as f64).collect();
            let iid: Vec<f64> = reference.iter().map(|c| c / draws as f64).collect();
            let (tv, tv_ref) = (total_variation(&emp, &exact), total_variation(&iid, &exact));
            worst = worst.max(tv);
            parts.push(format!("q={q} p={p} free: tv={tv:.4} iid={tv_ref:.4}"));
        }
    }
    let sampled = t.elapsed().as_secs_f64();
    let balance = detailed_balance();
    let seconds = t.elapsed().as_secs_f64();
    let pass = worst < 0.01 && balance.is_ok() && seconds < 300.0;
    verdict(
        pass,
        format!(
            "max tv {worst:.4} (need < 0.01); sampling {sampled:.0} s, total {seconds:.0} s (need < 300); detailed balance {}; {}",
            match &balance {
                Ok(n) => format!("exact on {n} transitions"),
                Err(e) => format!("violated: {e}"),
            },
            parts.join("; ")
        ),
    )
}

/// Heat-bath detailed balance in rational arithmetic over every
/// configuration and edge of the 12-edge box.
fn detailed_balance() -> Result<usize, String> {
    let geom = BoxGeom::new(1).unwrap();
    let graph = geom.graph();
    let mut hb = HeatBath::new(geom);
    let mut checked = 0;
    for (pn, pd) in [(1, 5), (1, 2)] {
        for (qn, qd) in [(1, 1), (3, 2), (2, 1)] {
            for bc in [Boundary::Free, Boundary::Wired] {
                let wired = bc == Boundary::Wired;
                let (p, q) = (rational(pn, pd), rational(qn, qd));
                let params = RcParams::new(pn as f64 / pd as f64, qn as f64 / qd as f64, bc).unwrap();
                for bits in 0..1u64 << geom.edge_count() {
                    let cfg = BondConfig::from_bits(geom, bits);
                    for e in geom.edges() {
                        if cfg.is_open(e) {
                            continue;
                        }
                        let mut open = cfg.clone();
                        open.set(e, true);
                        let joined = qn == qd || hb.connected_off_edge(&cfg, e, wired);
                        let p_open: BigRational =
                            if joined { p.clone() } else { &p / (&p + &q * (BigRational::one() - &p)) };
                        let lhs = rational_weight(&graph, cfg.states(), &p, &q, wired) * &p_open;
                        let rhs =
                            rational_weight(&graph, open.states(), &p, &q, wired) * (BigRational::one() - &p_open);
                        if lhs != rhs {
                            return Err(format!("p={pn}/{pd} q={qn}/{qd} {bc} bits {bits} edge {e}"));
                        }
                        let f = hb.open_probability(&cfg, &params, e);
                        let exact = p_open.numer().to_string().parse::<f64>().unwrap()
                            / p_open.denom().to_string().parse::<f64>().unwrap();
                        if (f - exact).abs() > 1e-15 {
                            return Err(format!("float rate {f} vs {exact} at bits {bits} edge {e}"));
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(checked)
}

fn circuit_key(cfg: &BondConfig) -> Option<(Vec<Site>, usize)> {
    outermost_circuit(cfg).map(|c| {
        let mut v = c.vertices().to_vec();
        v.sort();
        (v, interior_area(&c) as usize)
    })
}

fn gamma0_oracle(_: &mut Shared) -> Verdict {
    let mut mismatches = 0;
    let mut present = 0;
    let g1 = BoxGeom::new(1).unwrap();
    for bits in 0..1u64 << g1.edge_count() {
        let cfg = BondConfig::from_bits(g1, bits);
        let got = circuit_key(&cfg);
        present += got.is_some() as u32;
        mismatches += (got != outermost_oracle(&cfg)) as u32;
    }
    let g3 = BoxGeom::new(3).unwrap();
    let mut rng = StreamRng::new(2, 0);
    for i in 0..10_000 {
        let cfg = sample_q1(g3, [0.45, 0.5, 0.55, 0.65][i % 4], &mut rng);
        let got = circuit_key(&cfg);
        present += got.is_some() as u32;
        mismatches += (got != outermost_oracle(&cfg)) as u32;
    }
    verdict(
        mismatches == 0,
        format!("{mismatches} mismatches over 4096 + 10000 configurations ({present} with a circuit)"),
    )
}

fn duality(_: &mut Shared) -> Verdict {
    let geom = BoxGeom::new(1).unwrap();
    let dual_graph = geom.dual_graph();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for q in [1.0, 1.5, 2.0, 3.0, 4.0] {
        for p in [0.1, 0.2, 0.35, 0.5, 0.6, 0.8] {
            let params = RcParams::new(p, q, Boundary::Free).unwrap();
            let star = dual_params(&params).unwrap();
            let primal = exact_distribution(geom, &params).unwrap();
            let dual = exact_distribution_graph(&dual_graph, &star).unwrap();
            let oracle = brute_distribution(&dual_graph, star.p, q, true);
            for bits in 0..1u64 << geom.edge_count() {
                let d = dual_config(&BondConfig::from_bits(geom, bits));
                let dbits = d.states().iter().enumerate().fold(0u64, |acc, (e, &s)| acc | (s as u64) << e);
                let a = primal[bits as usize];
                worst = worst.max((a - dual[dbits as usize]).abs()).max((a - oracle[dbits as usize]).abs());
            }
            cases += 1;
        }
    }
    verdict(worst < 1e-10, format!("max per-configuration error {worst:.2e} over {cases} (p, q) pairs (need < 1e-10)"))
}

fn surgery_kernels(_: &mut Shared) -> Verdict {
    let g2 = BoxGeom::new(2).unwrap();
    let g1 = BoxGeom::new(1).unwrap();
    let mut plans = vec![
        ("sector (2,1)-(2,2)", SurgeryPlan::sector(g2, Site::new(2, 1), Site::new(2, 2)).unwrap()),
        ("sector (2,0)-(2,1)", SurgeryPlan::sector(g2, Site::new(2, 0), Site::new(2, 1)).unwrap()),
    ];
    let f = Region::rect(g1, Site::new(-1, -1), Site::new(-1, 1));
    let g = Region::rect(g1, Site::new(1, 0), Site::new(1, 1));
    plans.push(("shift G by (0,-1)", SurgeryPlan::shift(g1, &f, &g, Site::new(0, -1)).unwrap()));
    let f = Region::rect(g1, Site::new(-1, -1), Site::new(0, 1));
    let g = Region::rect(g1, Site::new(1, -1), Site::new(1, 0));
    plans.push(("shift G by (0,1)", SurgeryPlan::shift(g1, &f, &g, Site::new(0, 1)).unwrap()));
    let (mut tv, mut mi) = (0f64, 0f64);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, plan) in &plans {
        let mut touched = 0;
        for p in [0.2, 0.35, 0.5, 0.7] {
            let rep = kernel_report(plan, p).unwrap();
            touched = rep.touched;
            tv = tv.max(rep.tv_to_product);
            mi = mi.max(rep.mutual_information);
            ok &= rep.touched <= 14;
        }
        parts.push(format!("{name}: {touched} touched"));
    }
    verdict(
        ok && tv < 1e-12 && mi < 1e-12,
        format!("max tv {tv:.2e}, max mutual information {mi:.2e} (need < 1e-12); {}", parts.join(", ")),
    )
}

fn random_circuit(geom: BoxGeom, rng: &mut StreamRng) -> droplab::circuit::Circuit {
    loop {
        let p = rng.random_range(0.55..0.75);
        if let Some(c) = outermost_circuit(&sample_q1(geom, p, rng)) {
            return c;
        }
    }
}

/// Draw a point `y` reached from `x` along a cone direction and within the
/// angular window; `None` when the draw is degenerate.
fn cone_triple(rng: &mut StreamRng) -> Option<(f64, f64, [f64; 2], [f64; 2])> {
    let q0 = rng.random_range(0.02..1.55);
    let c0 = rng.random_range(0.01..0.999) * q0 / 2.0;
    let r = rng.random_range(0.5..200.0);
    let th = rng.random_range(-PI..PI);
    let phi = rng.random_range(-1.0..1.0) * c0;
    let beta = rng.random_range(-1.0..1.0);
    let alpha = PI / 2.0 - q0;
    let x = [r * th.cos(), r * th.sin()];
    let u = [(th + phi).cos(), (th + phi).sin()];
    let g = th + PI / 2.0 + beta * alpha + if phi < 0.0 { PI } else { 0.0 };
    let d = [g.cos(), g.sin()];
    let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    if cross(d, u).abs() <= 1e-12 {
        return None;
    }
    let t = -cross(x, u) / cross(d, u);
    let y = [x[0] + t * d[0], x[1] + t * d[1]];
    if t < 0.0 || y[0] * u[0] + y[1] * u[1] < 0.0 {
        return None;
    }
    if !(in_forward_cone(y, x, alpha + 1e-9) || in_backward_cone(y, x, alpha + 1e-9)) {
        return None;
    }
    Some((q0, c0, x, y))
}

fn geometry_lemmas(shared: &mut Shared) -> Verdict {
    let geom = BoxGeom::new(6).unwrap();
    let mut rng = StreamRng::new(5, 0);
    let (mut decompositions, mut bad_decomp) = (0, 0);
    while decompositions < 1000 {
        let c = random_circuit(geom, &mut rng);
        let cps = cutpoints(&c).unwrap();
        if cps.len() < 2 {
            continue;
        }
        let i = rng.random_range(0..cps.len());
        let j = (i + rng.random_range(1..cps.len())) % cps.len();
        bad_decomp += cutpoint_decomposition_holds(&c, cps[i], cps[j]).is_err() as u32;
        decompositions += 1;
    }
    let mut rng = StreamRng::new(5, 1);
    let (mut triples, mut bad_angle) = (0, 0);
    while triples < 100_000 {
        let Some((q0, c0, x, y)) = cone_triple(&mut rng) else { continue };
        let norm = x[0].hypot(x[1]);
        let ang = (x[0] * y[1] - x[1] * y[0]).atan2(x[0] * y[0] + x[1] * y[1]).abs();
        let dist = (y[0] - x[0]).hypot(y[1] - x[1]);
        let bound = norm * ang / (q0 / 2.0).sin();
        bad_angle += (ang > c0 + 1e-12 || dist > bound * (1.0 + 1e-9) + 1e-9) as u32;
        triples += 1;
    }
    let scan = shared.scan();
    let (mut eligible, mut bad_mprg) = (0, 0);
    for r in &scan.rows {
        if r.rg_count == 0 || r.theta_rg_max > 2.0 * scan.c0 {
            continue;
        }
        eligible += 1;
        bad_mprg += (r.mprg > r.radius * r.theta_rg_max / (scan.q0 / 2.0).sin() * (1.0 + 1e-12)) as u32;
    }
    // lattice discs give eligible instances at sizes where samples have none
    let k = choose_constants(&disc(), 0.4, 1.2).unwrap();
    let (mut disc_eligible, mut bad_disc) = (0, 0);
    for r in (6..120).map(|r| r as f64 + 0.37) {
        let c = outermost_circuit(&lattice_disc_config(r)).unwrap();
        let rg = regeneration_sites(&c, k.q0, k.c0).unwrap();
        let theta = theta_rg_max(&rg);
        if theta > 2.0 * k.c0 {
            continue;
        }
        disc_eligible += 1;
        let big_r = c.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max);
        bad_disc += (mprg(&c, &rg) > big_r * theta / (k.q0 / 2.0).sin() * (1.0 + 1e-12)) as u32;
    }
    verdict(
        bad_decomp + bad_angle + bad_mprg + bad_disc == 0,
        format!(
            "cutpoint decomposition {bad_decomp}/{decompositions} violations; distance-angle {bad_angle}/{triples}; \
             MPRG bound {bad_mprg}/{eligible} on conditioned samples ({} drawn, {eligible} with theta <= 2 c0), \
             {bad_disc}/{disc_eligible} on lattice discs",
            scan.rows.len()
        ),
    )
}

fn conditioned_small(_: &mut Shared) -> Verdict {
    let p = 0.45;
    let params = RcParams::new(p, 1.0, Boundary::Free).unwrap();
    let spec = ConditionSpec::new(2).unwrap();
    let mut rng = StreamRng::new(6, 0);

    let (start, active) = reduced_instance(3);
    let law = exact_conditional_area(&start, &active, p, 4);
    let exact: f64 = law.iter().map(|&(a, w)| a as f64 * w).sum();
    let mut chain = ConstrainedChain::new(params, spec, start.clone()).unwrap().with_active_edges(active.clone());
    let mut series = Vec::new();
    for _ in 0..100_000 {
        chain.sweep(&mut rng).unwrap();
        series.push(chain.area() as f64);
    }
    let (m_chain, se_chain) = batch_means(&series, 50);
    let mut cfg = start;
    let mut accepted = Vec::new();
    while accepted.len() < 20_000 {
        for &e in &active {
            cfg.set(e, rng.random::<f64>() < p);
        }
        let a = oracle_enclosed_area(&cfg);
        if a >= 4 {
            accepted.push(a as f64);
        }
    }
    let (m_rej, se_rej) = mean_and_se(&accepted);
    let z_chain = (m_chain - exact).abs() / se_chain;
    let z_rej = (m_rej - exact).abs() / se_rej;

    let geom = BoxGeom::new(5).unwrap();
    let mut rej = Vec::new();
    for _ in 0..3000 {
        let (cfg, _) = rejection_sample(geom, &params, &spec, 1_000_000, 1, &mut rng).unwrap();
        rej.push(enclosed_area(&cfg) as f64);
    }
    let (m_full_rej, se_full_rej) = mean_and_se(&rej);
    let start = warm_start(geom, &params, 2, &mut rng).unwrap();
    let mut chain = ConstrainedChain::new(params, spec, start).unwrap();
    let mut series = Vec::new();
    for s in 0..60_000 {
        chain.sweep(&mut rng).unwrap();
        if s >= 500 {
            series.push(chain.area() as f64);
        }
    }
    let (m_full, se_full) = batch_means(&series, 40);
    let z_full = (m_full - m_full_rej).abs() / se_full.hypot(se_full_rej);
    verdict(
        z_chain < 4.0 && z_rej < 4.0 && z_full < 4.0,
        format!(
            "reduced instance: exact {exact:.4}, chain {m_chain:.4} ({z_chain:.2} se), rejection {m_rej:.4} ({z_rej:.2} se); \
             full L=5 box: chain {m_full:.3} vs rejection {m_full_rej:.3} ({z_full:.2} se); need < 4"
        ),
    )
}

fn scaling(shared: &mut Shared) -> Verdict {
    let scan = shared.scan();
    let counts: Vec<usize> = SCAN_N.iter().map(|&n| scan.rows.iter().filter(|r| r.n == n).count()).collect();
    let mlr = fit_scaling(&scan.rows, Statistic::Mlr).unwrap();
    let mfl = fit_scaling(&scan.rows, Statistic::Mfl).unwrap();
    let increasing = mlr.medians_increasing() && mfl.medians_increasing();
    let (b_mlr, b_mfl) = (mlr.power.slope, mfl.power.slope);
    let exponents = (0.20..=0.55).contains(&b_mlr) && (0.50..=0.85).contains(&b_mfl);
    let (s_mlr, s_mfl) = (mlr.ratio.as_ref().unwrap().spread, mfl.ratio.as_ref().unwrap().spread);
    let band = s_mlr < 3.0 && s_mfl < 3.0;
    let corrected = |r: &droplab::harness::FitReport| r.corrected.as_ref().map_or(f64::NAN, |c| c.exponent);
    let medians = |r: &droplab::harness::FitReport| {
        r.per_n.iter().map(|s| format!("{:.2}", s.median)).collect::<Vec<_>>().join("/")
    };
    verdict(
        counts.iter().all(|&c| c >= 200) && increasing && exponents && band,
        format!(
            "samples {counts:?}; medians MLR {} MFL {} increasing={increasing}; exponents MLR {b_mlr:.3} in [0.20,0.55], \
             MFL {b_mfl:.3} in [0.50,0.85]; ratio spreads {s_mlr:.2}, {s_mfl:.2} (need < 3); \
             log-corrected exponents MLR {:.3}, MFL {:.3}; scan {:.0} s",
            medians(&mlr),
            medians(&mfl),
            corrected(&mlr),
            corrected(&mfl),
            scan.seconds
        ),
    )
}

fn exc_tail(shared: &mut Shared) -> Verdict {
    let scan = shared.scan();
    let rep = tail_report(&scan.rows, 24, 10).unwrap();
    let Some(fit) = &rep.fit else {
        return verdict(false, format!("no tail fit possible from {} samples", rep.samples));
    };
    let decreasing = rep.decreasing();
    verdict(
        rep.samples >= 1000 && decreasing && fit.slope < 0.0 && fit.ci95.1 < 0.0,
        format!(
            "{} samples; survival decreasing={decreasing}; slope {:.3}, 95% CI ({:.3}, {:.3}) over {} bins",
            rep.samples, fit.slope, fit.ci95.0, fit.ci95.1, fit.bins_used
        ),
    )
}

fn regeneration(shared: &mut Shared) -> Verdict {
    let scan = shared.scan();
    let med: Vec<(u32, f64)> = [16, 24, 32]
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> =
                scan.rows.iter().filter(|r| r.n == n).map(|r| r.theta_rg_max * n as f64 / (n as f64).ln()).collect();
            v.sort_by(f64::total_cmp);
            (n, droplab::harness::quantile(&v, 0.5))
        })
        .collect();
    let growth =
        med.iter().enumerate().flat_map(|(i, a)| med[i + 1..].iter().map(move |b| b.1 / a.1)).fold(0.0, f64::max);
    let text: Vec<String> = med.iter().map(|(n, m)| format!("n={n}: {m:.3}")).collect();
    verdict(
        growth.is_finite() && growth <= 2.0,
        format!("medians {}; max growth {growth:.2} (need <= 2)", text.join(", ")),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let o =
        Command::new(env!("CARGO_BIN_EXE_droplab")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("`{}` exited {:?}: {}", args.join(" "), o.status.code(), String::from_utf8_lossy(&o.stderr)))
    }
}

fn files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn determinism(_: &mut Shared) -> Verdict {
    let runs: [&[&str]; 10] = [
        &["--seed", "3", "sample", "--p", "0.3", "--q", "2", "--count", "2", "--sweeps", "50", "--out", "sample"],
        &["exact-enum", "--p", "0.4", "--q", "1.5", "--bc", "wired", "--out", "exact"],
        &["--seed", "4", "wulff-estimate", "--p", "0.35", "--samples", "20000", "--out", "wulff"],
        &[
            "--seed",
            "5",
            "condition",
            "--n",
            "5",
            "--chains",
            "2",
            "--sweeps",
            "60",
            "--thin",
            "6",
            "--wulff",
            "wulff/wulff.json",
            "--out",
            "cond",
        ],
        &[
            "measure",
            "--input",
            "cond/chain_0_last.rcg,cond/chain_1_last.rcg",
            "--n",
            "5",
            "--wulff",
            "wulff/wulff.json",
            "--out",
            "meas",
        ],
        &[
            "--seed",
            "6",
            "surgery",
            "--input",
            "cond/chain_0_last.rcg",
            "--x",
            "5,1",
            "--y=-1,5",
            "--n",
            "5",
            "--out",
            "surg",
        ],
        &[
            "--seed",
            "7",
            "scan",
            "--n-list",
            "4,5,6",
            "--chains",
            "2",
            "--sweeps",
            "600",
            "--thin",
            "6",
            "--wulff-samples",
            "20000",
            "--out",
            "scan",
        ],
        &[
            "--seed",
            "7",
            "scan",
            "--n-list",
            "4,5,6",
            "--chains",
            "2",
            "--sweeps",
            "600",
            "--thin",
            "6",
            "--threads",
            "2",
            "--wulff-samples",
            "20000",
            "--out",
            "scan_threads",
        ],
        &["fit", "--input", "scan", "--out", "fit"],
        &["report", "--input", "scan", "--tail-n", "6", "--bins", "8", "--out", "report"],
    ];
    let root = tempfile::tempdir().unwrap();
    for side in ["a", "b"] {
        let dir = root.path().join(side);
        std::fs::create_dir_all(&dir).unwrap();
        for args in runs {
            if let Err(e) = run_cli(&dir, args) {
                return verdict(false, e);
            }
        }
    }
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let (fa, fb) = (files(&a), files(&b));
    let rel = |base: &Path, v: &[std::path::PathBuf]| -> Vec<std::path::PathBuf> {
        v.iter().map(|p| p.strip_prefix(base).unwrap().to_path_buf()).collect()
    };
    if rel(&a, &fa) != rel(&b, &fb) {
        return verdict(false, "the two runs wrote different file sets".into());
    }
    let differing: Vec<String> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| std::fs::read(x).unwrap() != std::fs::read(y).unwrap())
        .map(|(x, _)| x.strip_prefix(&a).unwrap().display().to_string())
        .collect();
    // thread count must not change any output besides the recorded setting
    let mut thread_diff = Vec::new();
    for f in files(&a.join("scan")) {
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        if name.starts_with("manifest") {
            continue;
        }
        if std::fs::read(&f).unwrap() != std::fs::read(a.join("scan_threads").join(&name)).unwrap() {
            thread_diff.push(name);
        }
    }
    verdict(
        differing.is_empty() && thread_diff.is_empty(),
        format!(
            "{} files from 9 subcommands compared; differing: {differing:?}; differing across thread counts: {thread_diff:?}",
            fa.len()
        ),
    )
}

fn main() {
    let only: Option<Vec<u32>> =
        std::env::var("DROPLAB_ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [Criterion; 10] = [
        (1, "sampler exactness", sampler_exactness),
        (2, "outermost circuit oracle", gamma0_oracle),
        (3, "duality", duality),
        (4, "surgery measure preservation", surgery_kernels),
        (5, "geometry lemmas", geometry_lemmas),
        (6, "conditioned sampler at tiny scale", conditioned_small),
        (7, "scaling study", scaling),
        (8, "EXC tail", exc_tail),
        (9, "regeneration profusion", regeneration),
        (10, "determinism", determinism),
    ];
    let mut shared = Shared::default();
    let mut failed = 0;
    for (k, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&k)) {
            continue;
        }
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(|| f(&mut shared))).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += !v.pass as u32;
        println!(
            "criterion {k}: {} {name} [{:.1} s] {}",
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
