//! Simulation and analysis subcommands.

use std::path::{Path, PathBuf};

use droplab::circuit::outermost_circuit;
use droplab::conditioned::{default_half_width, enclosed_area};
use droplab::droplet::{droplet_stats, read_csv, write_csv, DropletStats, SampleTag};
use droplab::harness::{
    fan_out, fit_scaling, quantile, run_chain, run_scan, scaling_plot, survival_plot, tail_report, write_scan,
    wulff_for, ChainPlan, ChainSummary, Plot, ScanPlan, Series, Statistic, WulffBundle, WulffSpec, IRREDUCIBILITY_NOTE,
};
use droplab::lattice::dual_config;
use droplab::model::{dual_params, exact_distribution, exact_distribution_graph, sample_fk, ParamsReport};
use droplab::snapshot::Snapshot;
use droplab::wulff::{choose_constants, disc, WulffShape, DEFAULT_ANNULUS};
use droplab::{BondConfig, Boundary, BoxGeom, Error, RcParams, Result, StreamRng};
use serde_json::{json, Value};

use crate::args::{
    ConditionArgs, ExactArgs, FitArgs, MeasureArgs, ReportArgs, SampleArgs, ScanArgs, WulffArgs, WulffSource,
};
use crate::Ctx;

/// Least samples per `n` accepted by the fitting subcommands.
pub const FIT_MIN_SAMPLES: usize = 50;

/// Wulff shape with constants, plus the JSON it was read from or built as.
pub struct LoadedWulff {
    pub shape: WulffShape,
    pub annulus: (f64, f64),
    pub json: Value,
}

/// Read a Wulff file: either a full bundle or a bare shape.
pub fn read_wulff(path: &Path) -> Result<LoadedWulff> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    let json: Value = serde_json::from_str(&text)?;
    let (shape, annulus) = match serde_json::from_value::<WulffBundle>(json.clone()) {
        Ok(b) => (b.shape, b.spec.annulus),
        Err(_) => (serde_json::from_value::<WulffShape>(json.clone())?, DEFAULT_ANNULUS),
    };
    if shape.constants.is_none() {
        return Err(Error::input(format!("{} carries no regeneration constants", path.display())));
    }
    Ok(LoadedWulff { shape, annulus, json })
}

pub fn load_wulff(src: &WulffSource, params: &RcParams) -> Result<LoadedWulff> {
    if let Some(p) = &src.wulff {
        return read_wulff(p);
    }
    let spec = WulffSpec { samples: src.wulff_samples.unwrap_or(WulffSpec::default().samples), ..WulffSpec::default() };
    let bundle = wulff_for(params, &spec, src.cache.as_deref())?;
    Ok(LoadedWulff { annulus: spec.annulus, json: serde_json::to_value(&bundle)?, shape: bundle.shape })
}

/// The disc with constants for the default annulus.
pub fn default_disc() -> Result<WulffShape> {
    let mut w = disc();
    w.constants = Some(choose_constants(&w, DEFAULT_ANNULUS.0, DEFAULT_ANNULUS.1)?);
    Ok(w)
}

fn write_rows(path: &Path, rows: &[DropletStats]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, rows)
}

pub fn sample(ctx: &Ctx, a: &SampleArgs) -> Result<()> {
    let params = a.model.resolve()?;
    let geom = BoxGeom::new(a.half_width.unwrap_or(4))?;
    let sweeps = a.sweeps.unwrap_or(1000);
    let count = a.count.unwrap_or(1);
    if count == 0 {
        return Err(Error::input("count must be positive"));
    }
    let draws = fan_out((0..count).collect(), ctx.threads, |k| {
        let mut rng = StreamRng::new(ctx.seed, k as u64);
        sample_fk(geom, &params, sweeps, &mut rng)
    });
    let mut m = ctx.manifest("sample", a, Some(&params))?;
    let mut results = Vec::new();
    for (k, cfg) in draws.into_iter().enumerate() {
        let cfg = cfg?;
        let name = format!("sample_{k:03}.rcg");
        Snapshot::new(params, ctx.seed, cfg.clone()).write(&ctx.path(&name))?;
        results.push(json!({
            "file": name,
            "stream": k,
            "open_edges": cfg.open_count(),
            "enclosed_area": enclosed_area(&cfg),
        }));
        m.outputs.push(name);
    }
    m.results = json!({ "half_width": geom.half_width(), "sweeps": sweeps, "draws": results });
    ctx.finish(m)
}

pub fn exact_enum(ctx: &Ctx, a: &ExactArgs) -> Result<()> {
    let params = a.model.resolve()?;
    let geom = BoxGeom::new(a.half_width.unwrap_or(1))?;
    let probs = exact_distribution(geom, &params)?;
    let (mut mean_open, mut enclosed) = (0.0, 0.0);
    for (bits, &pr) in probs.iter().enumerate() {
        let cfg = BondConfig::from_bits(geom, bits as u64);
        mean_open += pr * cfg.open_count() as f64;
        if outermost_circuit(&cfg).is_some() {
            enclosed += pr;
        }
    }
    let duality = match (params.bc, dual_params(&params)) {
        (Boundary::Free, Ok(star)) => {
            let dual = exact_distribution_graph(&geom.dual_graph(), &star)?;
            let mut worst: f64 = 0.0;
            for (bits, &pr) in probs.iter().enumerate() {
                let d = dual_config(&BondConfig::from_bits(geom, bits as u64));
                let dbits = d.states().iter().enumerate().fold(0usize, |acc, (e, &s)| acc | (s as usize) << e);
                worst = worst.max((pr - dual[dbits]).abs());
            }
            json!({ "p_star": star.p, "max_abs_error": worst })
        }
        _ => Value::Null,
    };
    let summary = json!({
        "params": ParamsReport::from(&params),
        "half_width": geom.half_width(),
        "edges": geom.edge_count(),
        "configurations": probs.len(),
        "mean_open_edges": mean_open,
        "origin_enclosed": enclosed,
        "duality": duality,
        "probabilities": probs,
    });
    ctx.write_json("exact.json", &summary)?;
    let mut m = ctx.manifest("exact-enum", a, Some(&params))?;
    m.outputs.push("exact.json".into());
    m.results = json!({ "mean_open_edges": mean_open, "origin_enclosed": enclosed, "duality": summary["duality"] });
    ctx.finish(m)
}

pub fn condition(ctx: &Ctx, a: &ConditionArgs) -> Result<()> {
    let params = a.model.resolve()?;
    let n = a.n.ok_or_else(|| Error::input("condition needs --n"))?;
    match a.constraint.as_deref().unwrap_or("area_ge") {
        "area_ge" => {}
        "area_eq" => {
            return Err(Error::input("fixed-area conditioning |INT| = n^2 is not supported; use --constraint area_ge"))
        }
        other => return Err(Error::input(format!("unknown constraint `{other}`"))),
    }
    let half_width = a.half_width.unwrap_or_else(|| default_half_width(n));
    let plan = ChainPlan {
        burn_in: a.burn_in.unwrap_or(100),
        sweeps: a.sweeps.unwrap_or(1000),
        thin: a.thin.unwrap_or(10),
        chains: a.chains.unwrap_or(1),
        seed: ctx.seed,
    };
    plan.validate()?;
    let wulff = load_wulff(&a.wulff, &params)?;
    let results =
        fan_out((0..plan.chains).collect(), ctx.threads, |k| run_chain(&params, n, half_width, &plan, k, &wulff.shape));
    let mut m = ctx.manifest("condition", a, Some(&params))?;
    m.assumptions.push(IRREDUCIBILITY_NOTE.into());
    let mut chains = Vec::new();
    for r in results {
        let r = r?;
        let csv = format!("chain_{}.csv", r.chain);
        write_rows(&ctx.path(&csv), &r.rows)?;
        m.outputs.push(csv);
        if let Some(last) = &r.last {
            let snap = format!("chain_{}_last.rcg", r.chain);
            Snapshot::new(params, ctx.seed, last.clone()).write(&ctx.path(&snap))?;
            m.outputs.push(snap);
        }
        chains.push(ChainSummary::from(&r));
    }
    ctx.write_json("wulff.json", &wulff.json)?;
    m.outputs.push("wulff.json".into());
    m.results = json!({
        "n": n,
        "half_width": half_width,
        "min_area": n as u64 * n as u64,
        "plan": plan,
        "constants": wulff.shape.constants,
        "chains": chains,
    });
    ctx.finish(m)
}

pub fn measure(ctx: &Ctx, a: &MeasureArgs) -> Result<()> {
    let inputs = a.input.clone().unwrap_or_default();
    if inputs.is_empty() {
        return Err(Error::input("measure needs --input"));
    }
    let n = a.n.ok_or_else(|| Error::input("measure needs --n"))?;
    let snaps = inputs.iter().map(|p| Snapshot::read(p)).collect::<Result<Vec<_>>>()?;
    if a.wulff.wulff.is_none() && snaps.iter().any(|s| s.params != snaps[0].params) {
        return Err(Error::input("snapshots with different parameters need an explicit --wulff"));
    }
    let wulff = load_wulff(&a.wulff, &snaps[0].params)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (k, (snap, path)) in snaps.iter().zip(&inputs).enumerate() {
        let tag = SampleTag { seed: snap.seed, stream: 0, sample: k as u64 };
        match droplet_stats(&snap.config, n, &wulff.shape, tag) {
            Ok(r) => {
                r.validate()?;
                rows.push(r);
            }
            Err(Error::NoCircuit) => skipped.push(path.display().to_string()),
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::NoCircuit);
    }
    write_rows(&ctx.path("measure.csv"), &rows)?;
    let mut m = ctx.manifest("measure", a, Some(&snaps[0].params))?;
    m.outputs.push("measure.csv".into());
    m.results = json!({ "rows": rows.len(), "no_circuit": skipped, "constants": wulff.shape.constants });
    ctx.finish(m)
}

pub fn wulff_estimate(ctx: &Ctx, a: &WulffArgs) -> Result<()> {
    let params = a.model.resolve()?;
    let d = WulffSpec::default();
    let spec = WulffSpec {
        dirs: a.dirs.unwrap_or(d.dirs),
        kmax: a.kmax.unwrap_or(d.kmax),
        samples: a.samples.unwrap_or(d.samples),
        seed: ctx.seed,
        annulus: (a.c1.unwrap_or(d.annulus.0), a.big_c1.unwrap_or(d.annulus.1)),
    };
    let bundle = wulff_for(&params, &spec, None)?;
    ctx.write_json("wulff.json", &bundle)?;
    let mut ring: Vec<(f64, f64)> = bundle.shape.boundary.iter().map(|v| (v[0], v[1])).collect();
    ring.extend(ring.first().copied());
    let plot = Plot {
        title: format!("Wulff shape, p = {}, q = {}", params.p, params.q),
        x_label: "x".into(),
        y_label: "y".into(),
        log_x: false,
        log_y: false,
        series: vec![Series { name: "boundary".into(), points: ring, line: true }],
    };
    std::fs::write(ctx.path("wulff.svg"), plot.to_svg())?;
    let mut m = ctx.manifest("wulff-estimate", a, Some(&params))?;
    m.outputs = vec!["wulff.json".into(), "wulff.svg".into()];
    m.results = json!({
        "xi": bundle.xi.xi,
        "flagged": bundle.xi.flagged,
        "lambda": bundle.shape.lambda,
        "constants": bundle.shape.constants,
    });
    ctx.finish(m)
}

pub fn scan(ctx: &Ctx, a: &ScanArgs) -> Result<()> {
    let params = a.model.resolve()?;
    let plan = ScanPlan {
        n_list: a.n_list.clone().unwrap_or_else(|| vec![12, 16, 24, 32]),
        params,
        chains: ChainPlan {
            burn_in: a.burn_in.unwrap_or(100),
            sweeps: a.sweeps.unwrap_or(1000),
            thin: a.thin.unwrap_or(10),
            chains: a.chains.unwrap_or(4),
            seed: ctx.seed,
        },
        margin: a.margin.unwrap_or(2.5),
    };
    plan.validate()?;
    let wulff = load_wulff(&a.wulff, &params)?;
    let entries = run_scan(&plan, &wulff.shape, ctx.threads)?;
    let paths = write_scan(&entries, &ctx.out)?;
    ctx.write_json("wulff.json", &wulff.json)?;
    let mut m = ctx.manifest("scan", a, Some(&params))?;
    m.assumptions.push(IRREDUCIBILITY_NOTE.into());
    m.outputs = paths.iter().filter_map(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).collect();
    m.outputs.push("wulff.json".into());
    let per_n: Vec<Value> = entries
        .iter()
        .map(|e| {
            json!({
                "n": e.n,
                "half_width": e.half_width,
                "samples": e.rows.len(),
                "error": e.error,
                "chains": e.chains,
            })
        })
        .collect();
    m.results = json!({ "constants": wulff.shape.constants, "per_n": per_n });
    let failed: Vec<String> =
        entries.iter().filter_map(|e| e.error.as_ref().map(|x| format!("n = {}: {x}", e.n))).collect();
    ctx.finish(m)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Infeasible(failed.join("; ")))
    }
}

/// Rows of the given CSV files; directories contribute their scan CSVs in
/// name order.
pub fn read_rows(inputs: &[PathBuf]) -> Result<Vec<DropletStats>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .and_then(|s| s.to_str())
                        .is_some_and(|s| s.starts_with("droplets_n") && s.ends_with(".csv"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::input("no scan CSV files found"));
    }
    let mut rows = Vec::new();
    for f in &files {
        let file = std::fs::File::open(f).map_err(|e| Error::input(format!("cannot open {}: {e}", f.display())))?;
        rows.extend(read_csv(file)?);
    }
    for r in &rows {
        r.validate()?;
    }
    Ok(rows)
}

fn check_sample_counts(rows: &[DropletStats]) -> Result<()> {
    let mut ns: Vec<u32> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    for n in ns {
        let c = rows.iter().filter(|r| r.n == n).count();
        if c < FIT_MIN_SAMPLES {
            return Err(Error::input(format!("n = {n} has {c} samples; fits need at least {FIT_MIN_SAMPLES}")));
        }
    }
    Ok(())
}

fn inputs_or_out(ctx: &Ctx, input: &Option<Vec<PathBuf>>) -> Vec<PathBuf> {
    input.clone().filter(|v| !v.is_empty()).unwrap_or_else(|| vec![ctx.out.clone()])
}

pub fn fit(ctx: &Ctx, a: &FitArgs) -> Result<()> {
    let rows = read_rows(&inputs_or_out(ctx, &a.input))?;
    check_sample_counts(&rows)?;
    let stats = a.stat.clone().unwrap_or_else(|| vec!["mlr".into(), "mfl".into()]);
    let stats = stats.iter().map(|s| s.parse::<Statistic>()).collect::<Result<Vec<_>>>()?;
    let reports = stats.iter().map(|&s| fit_scaling(&rows, s)).collect::<Result<Vec<_>>>()?;
    ctx.write_json("fit.json", &reports)?;
    std::fs::write(ctx.path("scaling.svg"), scaling_plot(&reports).to_svg())?;
    for r in &reports {
        println!(
            "{}: exponent {:.4} (95% CI {:.4} .. {:.4}), medians increasing: {}",
            r.statistic.name(),
            r.power.slope,
            r.power.ci95.0,
            r.power.ci95.1,
            r.medians_increasing()
        );
    }
    let mut m = ctx.manifest("fit", a, None)?;
    m.outputs = vec!["fit.json".into(), "scaling.svg".into()];
    m.results = json!({ "rows": rows.len() });
    ctx.finish(m)
}

/// Median of `theta_rg_max * n / log n` per `n`.
pub fn regeneration_profile(rows: &[DropletStats]) -> Vec<(u32, f64)> {
    let mut ns: Vec<u32> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let nf = n as f64;
            let mut v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.theta_rg_max * nf / nf.ln()).collect();
            v.sort_by(f64::total_cmp);
            (n, quantile(&v, 0.5))
        })
        .collect()
}

/// `(eligible, violations)` of `MPRG <= R csc(q0/2) theta` over rows with
/// `theta <= 2 c0`.
pub fn mprg_bound(rows: &[DropletStats], q0: f64, c0: f64) -> (usize, usize) {
    let csc = 1.0 / (q0 / 2.0).sin();
    // a NaN MPRG counts as a violation
    let eligible: Vec<&DropletStats> = rows.iter().filter(|r| r.rg_count > 0 && r.theta_rg_max <= 2.0 * c0).collect();
    let bad =
        eligible.iter().filter(|r| r.mprg.is_nan() || r.mprg > r.radius * csc * r.theta_rg_max * (1.0 + 1e-12)).count();
    (eligible.len(), bad)
}

pub fn report(ctx: &Ctx, a: &ReportArgs) -> Result<()> {
    let inputs = inputs_or_out(ctx, &a.input);
    let rows = read_rows(&inputs)?;
    check_sample_counts(&rows)?;
    let mut ns: Vec<u32> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let tail_n = a.tail_n.unwrap_or(if ns.contains(&24) { 24 } else { *ns.last().expect("rows exist") });
    let (tail, tail_error) = match tail_report(&rows, tail_n, a.bins.unwrap_or(20)) {
        Ok(t) => (Some(t), None),
        Err(e @ Error::Input(_)) => {
            eprintln!("droplab: EXC tail skipped: {e}");
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let mut fits = Vec::new();
    let mut fit_errors = Vec::new();
    for s in [Statistic::Mlr, Statistic::Mfl, Statistic::ThetaRgMax] {
        match fit_scaling(&rows, s) {
            Ok(r) => fits.push(r),
            Err(e) => fit_errors.push(json!({ "statistic": s.name(), "error": e.to_string() })),
        }
    }
    let wulff_path = a.wulff.clone().or_else(|| {
        let dir = inputs.iter().find(|p| p.is_dir()).cloned().or_else(|| inputs[0].parent().map(Path::to_path_buf))?;
        Some(dir.join("wulff.json")).filter(|p| p.exists())
    });
    let mprg = match &wulff_path {
        Some(p) => {
            let k = read_wulff(p)?.shape.constants.expect("checked on read");
            let (eligible, violations) = mprg_bound(&rows, k.q0, k.c0);
            json!({ "q0": k.q0, "c0": k.c0, "eligible": eligible, "violations": violations })
        }
        None => Value::Null,
    };
    let profile = regeneration_profile(&rows);
    let growth = match (profile.first(), profile.last()) {
        (Some(&(_, lo)), Some(&(_, hi))) if lo > 0.0 => hi / lo,
        _ => f64::NAN,
    };
    let report = json!({
        "fits": fits,
        "fit_errors": fit_errors,
        "tail": tail,
        "tail_error": tail_error,
        "tail_decreasing": tail.as_ref().map(|t| t.decreasing()),
        "regeneration": { "median_theta_n_over_log_n": profile, "growth": growth },
        "mprg_bound": mprg,
    });
    ctx.write_json("report.json", &report)?;
    std::fs::write(ctx.path("scaling.svg"), scaling_plot(&fits).to_svg())?;
    std::fs::write(ctx.path("survival.svg"), survival_plot(tail.as_slice()).to_svg())?;
    if let Some(f) = tail.as_ref().and_then(|t| t.fit.as_ref()) {
        println!("EXC/n tail at n = {tail_n}: slope {:.4} (95% CI {:.4} .. {:.4})", f.slope, f.ci95.0, f.ci95.1);
    }
    let mut m = ctx.manifest("report", a, None)?;
    m.outputs = vec!["report.json".into(), "scaling.svg".into(), "survival.svg".into()];
    m.results = json!({ "rows": rows.len(), "tail_n": tail_n });
    ctx.finish(m)
}
