//! Stage runner behind the subcommands.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use coarse_kernels::box_space::{cycle_box_space, union_girth};
use coarse_kernels::fibred::{
    fce_cycles_with, fce_large_girth_with, kernels_from_fce, validate_fce, GeneratorOptions,
};
use coarse_kernels::gluing::{
    decay_check, glue, negative_type_on_balls, partition_of_unity, proper_function, proper_schedules, relayout,
    separation_check, verify_properness, AnnularDecomposition, Schedule, ROUNDOFF,
};
use coarse_kernels::io::{save_fce, save_space, write_envelopes_csv, write_kernel_csv, write_json, SpaceFile};
use coarse_kernels::kernels::{
    check_scale_independence, is_negative_type, variation_on_pairs, ScaleEntry,
};
use coarse_kernels::{CoarseUnion, Error, FibredEmbedding, Kernel, Metric, ScaleFamily};
use serde::Serialize;
use serde_json::json;

use crate::config::{GeneratorChoice, PipelineConfig, SpaceSpec};
use crate::report::{Report, ScheduleEntry};

/// Which parts of the pipeline a subcommand runs.
#[derive(Clone, Copy, Debug, Default)]
pub struct Stages {
    pub fce: bool,
    pub write_fce: bool,
    pub validate: bool,
    pub kernels: bool,
    pub glue: bool,
    pub proper: bool,
}

impl Stages {
    pub fn all() -> Self {
        Self {
            fce: true,
            write_fce: false,
            validate: true,
            kernels: true,
            glue: true,
            proper: true,
        }
    }
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
    report: Report,
}

impl Run<'_> {
    fn artifact(&mut self, name: &str) -> PathBuf {
        self.report.artifacts.push(name.to_string());
        self.out.join(name)
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let path = self.artifact(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn min_offset_space(cfg: &PipelineConfig) -> Result<CoarseUnion> {
    Ok(match &cfg.space {
        SpaceSpec::Cycles { lengths } => cycle_box_space(lengths)?.into_union(),
        SpaceSpec::Box(b) => b.build()?.into_union(),
        SpaceSpec::File { path } => coarse_kernels::io::load_space(path)?,
    })
}

fn build_fce(cfg: &PipelineConfig, options: GeneratorOptions) -> Result<(CoarseUnion, FibredEmbedding<i64>)> {
    let cycles = match cfg.generator {
        GeneratorChoice::Cycles => true,
        GeneratorChoice::LargeGirth => false,
        GeneratorChoice::Auto => matches!(cfg.space, SpaceSpec::Cycles { .. }),
    };
    if let (true, SpaceSpec::Cycles { lengths }) = (cycles, &cfg.space) {
        let (bs, fce) = fce_cycles_with(lengths, options)?;
        return Ok((bs.into_union(), fce));
    }
    let base = min_offset_space(cfg)?;
    let (u, fce) = fce_large_girth_with(base.components().to_vec(), None, options)?;
    let u = CoarseUnion::with_basepoints(u.components().to_vec(), base.basepoints().to_vec())?;
    Ok((u, fce))
}

fn space_summary(u: &CoarseUnion, scales: Option<&[u64]>) -> serde_json::Value {
    let sizes: Vec<usize> = (0..u.component_count()).map(|i| u.component(i).n()).collect();
    json!({
        "points": u.len(),
        "components": u.component_count(),
        "sizes": sizes,
        "diameters": u.diameters(),
        "girth": union_girth(u),
        "offsets": u.offsets().iter().map(|o| o.to_string()).collect::<Vec<_>>(),
        "scales": scales,
    })
}

fn all_schedules(cfg: &PipelineConfig, fce: &FibredEmbedding<i64>) -> Result<Vec<Schedule>> {
    let mut s = proper_schedules(cfg.n_max, &fce.controls)?;
    for g in &cfg.schedules {
        s.push(Schedule::new(g.r, g.eps, &fce.controls)?);
    }
    Ok(s)
}

fn tag(r: u64, eps: f64) -> String {
    format!("R{r}_eps{eps}")
}

pub fn run(cfg: &PipelineConfig, command: &str, stages: Stages) -> Result<Report> {
    cfg.validate().context("invalid configuration")?;
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut run = Run {
        cfg,
        out,
        report: Report::new(command, cfg),
    };

    if !stages.fce {
        let u = min_offset_space(cfg).context("building the space")?;
        space_checks(&mut run, &u)?;
        run.report.space = Some(space_summary(&u, None));
        let path = run.artifact("space.json");
        save_space(&path, &u)?;
        run.report
            .notes
            .push("space written with minimal offsets; later stages relayout for the schedules".into());
        return finish(run);
    }

    let options = GeneratorOptions {
        transitions: stages.validate || stages.write_fce,
    };
    let (base, fce) = build_fce(cfg, options).context("building the fibred coarse embedding")?;
    let schedules = all_schedules(cfg, &fce)?;
    let u = relayout(&base, &fce.scales, &schedules).context("laying out the union")?;
    run.report.space = Some(space_summary(&u, Some(&fce.scales)));
    let path = run.artifact("space.json");
    write_json(&path, &SpaceFile::from_union(&u))?;
    space_checks(&mut run, &u)?;
    if stages.write_fce {
        let path = run.artifact("fce.json");
        save_fce(&path, &fce)?;
    }
    if stages.validate {
        validate_stage(&mut run, &u, &fce)?;
    }
    if stages.kernels {
        kernel_stage(&mut run, &u, &fce)?;
    }
    if stages.glue {
        glue_stage(&mut run, &u, &fce).context("glue run")?;
    }
    if stages.proper {
        proper_stage(&mut run, &u, &fce).context("proper run")?;
    }
    finish(run)
}

fn finish(run: Run<'_>) -> Result<Report> {
    run.report.write(&run.out)?;
    Ok(run.report)
}

fn space_checks(run: &mut Run<'_>, u: &CoarseUnion) -> Result<()> {
    let decomp = AnnularDecomposition::new(u, 0)?;
    let cover = decomp.cover_report();
    run.report.check("annuli.cover", cover.holds(), &cover);
    let sep = separation_check(&decomp, u);
    run.report.check("annuli.separation", sep.holds, &sep);
    Ok(())
}

fn validate_stage(run: &mut Run<'_>, u: &CoarseUnion, fce: &FibredEmbedding<i64>) -> Result<()> {
    let rep = validate_fce(fce, u)?;
    run.report.check("fce.validate", rep.passed(), &rep);
    if let Some(env) = &rep.condition1.envelopes {
        let path = run.artifact("controls.csv");
        write_envelopes_csv(env, BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

/// Evenly spaced sample of `count` indices from `0..n`.
fn spread(n: usize, count: usize) -> Vec<usize> {
    if n == 0 || count == 0 {
        return Vec::new();
    }
    let count = count.min(n);
    (0..count).map(|i| i * n / count).collect()
}

fn kernel_stage(run: &mut Run<'_>, u: &CoarseUnion, fce: &FibredEmbedding<i64>) -> Result<()> {
    let top = fce.scales.iter().copied().max().unwrap_or(0).min(8);
    let scales: Vec<u64> = (1..=top).collect();
    if scales.is_empty() {
        run.report.notes.push("no positive chart radius; kernel checks skipped".into());
        return Ok(());
    }
    let fam = kernels_from_fce(fce, u, &scales)?;
    let si = check_scale_independence(&fam);
    run.report.check("kernels.scale_independence", si.holds, &si);

    let mut worst: f64 = 0.0;
    let mut pairs = 0usize;
    for (_, entry) in fam.iter() {
        for &((x, y), v) in entry.kernel.entries() {
            let d = u.dist(x, y).expect("kernel pairs are connected") as f64;
            let (lo, hi) = (fce.controls.rho_minus.squared(d), fce.controls.rho_plus.squared(d));
            let v = v as f64;
            worst = worst.max(lo - v).max(v - hi);
            pairs += 1;
        }
    }
    run.report.check(
        "kernels.controls",
        worst <= 1e-9,
        json!({ "scales": scales, "pairs_checked": pairs, "max_excess": worst }),
    );

    let centres: Vec<usize> = (0..u.len()).filter(|&x| fce.charts[x].members.len() > 1).collect();
    let mut tested = Vec::new();
    let mut ok = true;
    for i in spread(centres.len(), run.cfg.chart_samples) {
        let x = centres[i];
        let members = &fce.charts[x].members;
        let k = Kernel::from_fn(u.len(), members, |z, w| {
            fce.chart_sq_dist(x, z, w).expect("chart members have images") as f64
        })?;
        let t = is_negative_type(&k, run.cfg.tol)?;
        ok &= t.holds;
        tested.push(json!({ "centre": x, "size": members.len(), "top_eigenvalue": t.eigenvalue, "threshold": t.threshold }));
    }
    run.report.check("kernels.chart_negative_type", ok, tested);

    for s in run.cfg.schedules.clone() {
        if let Some(entry) = fam.get(s.r) {
            let path = run.artifact(&format!("kernel_R{}.csv", s.r));
            write_kernel_csv(&entry.kernel, BufWriter::new(File::create(path)?))?;
        }
    }
    Ok(())
}

fn glue_stage(run: &mut Run<'_>, u: &CoarseUnion, fce: &FibredEmbedding<i64>) -> Result<()> {
    let decomp = AnnularDecomposition::new(u, 0)?;
    let y0 = decomp.y_mask(0);
    let y1 = decomp.y_mask(1);
    let mut last = None;
    for spec in run.cfg.schedules.clone() {
        let s = Schedule::new(spec.r, spec.eps, &fce.controls)?;
        let name = tag(s.r, s.eps);
        let fam = kernels_from_fce(fce, u, &[s.r])?.map(|v| v as f64);
        let resolved = s.resolve(&decomp, &fam.get(s.r).expect("requested scale").excluded);
        run.report.schedule.push(ScheduleEntry {
            n: None,
            r: s.r,
            eps: s.eps,
            t: s.t,
            s: s.s,
            o: resolved.o,
            d_size: resolved.d_size,
            region_size: resolved.region.iter().filter(|&&b| b).count(),
        });
        let part = partition_of_unity(&decomp, u, &resolved.region)?;
        let (phi, sq) = part.sum_defect();
        run.report.check(
            format!("glue.{name}.partition"),
            phi <= ROUNDOFF && sq <= ROUNDOFF,
            json!({ "sum_phi_defect": phi, "sum_sq_defect": sq, "lebesgue": part.lebesgue(), "required": s.s }),
        );
        let cert = part.lipschitz_certificate(u);
        run.report.check(format!("glue.{name}.lipschitz"), cert.holds, &cert);

        let g = glue(&fam.restrict(&y0), &fam.restrict(&y1), &part, u, s.r, s.t)?;
        if !g.uncovered.is_empty() {
            run.report.notes.push(format!(
                "{name}: {} pairs share no annulus; glued value 0, excluded from the variation check",
                g.uncovered.len()
            ));
        }
        let pairs: Vec<(usize, usize)> = g
            .kernel
            .entries()
            .iter()
            .map(|e| e.0)
            .filter(|p| g.uncovered.binary_search(p).is_err())
            .collect();
        let var = variation_on_pairs(&g.kernel, &pairs, s.eps, |x, y| Err(Error::MissingPair(x, y)))?;
        if var.pairs_checked == 0 {
            run.report.notes.push(format!("{name}: the region is empty; no pairs to check"));
        }
        run.report.check(format!("glue.{name}.variation"), var.holds && var.pairs_checked > 0, &var);
        let decay = decay_check(&g, u, &fce.controls);
        run.report.check(format!("glue.{name}.decay"), decay.holds, &decay);
        let path = run.artifact(&format!("glued_{name}.csv"));
        write_kernel_csv(&g.kernel, BufWriter::new(File::create(path)?))?;
        last = Some((s, resolved, part));
    }

    if let Some((s, resolved, part)) = last {
        let radii: Vec<u64> = (1..=s.r).collect();
        let fam = kernels_from_fce(fce, u, &radii)?.map(|v| v as f64);
        let (f0, f1) = (fam.restrict(&y0), fam.restrict(&y1));
        let mut glued = ScaleFamily::new();
        for &r in &radii {
            let entry = fam.get(r).expect("requested scale");
            let g = glue(&f0, &f1, &part, u, r, s.t)?;
            glued.insert(
                r,
                ScaleEntry {
                    kernel: g.kernel,
                    excluded: entry.excluded.clone(),
                    first_component: entry.first_component,
                },
            );
        }
        let si = check_scale_independence(&glued);
        run.report.check(
            "glue.scale_independence",
            si.holds,
            json!({ "t": s.t, "radii": radii, "region_size": resolved.region.iter().filter(|&&b| b).count(), "result": si }),
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ShellRow {
    d: u64,
    shell_min: f64,
    shell_max: f64,
    tau_minus: f64,
    tau_plus: f64,
}

fn proper_stage(run: &mut Run<'_>, u: &CoarseUnion, fce: &FibredEmbedding<i64>) -> Result<()> {
    let approx = proper_function(u, fce, run.cfg.n_max)?;
    for row in &approx.rows {
        run.report.schedule.push(ScheduleEntry {
            n: Some(row.n),
            r: row.schedule.r,
            eps: row.schedule.eps,
            t: row.schedule.t,
            s: row.schedule.s,
            o: row.o,
            d_size: row.d_size,
            region_size: row.region_size,
        });
    }
    let rep = verify_properness(&approx, &fce.controls);
    run.report.check(
        "proper.envelopes",
        rep.holds(),
        json!({
            "pairs": approx.pairs.len(),
            "uncovered": approx.uncovered,
            "thresholds": rep.thresholds,
            "upper_holds": rep.upper_holds,
            "lower_holds": rep.lower_holds,
            "lower_monotone": rep.lower_monotone,
            "variation_holds": rep.variation_holds,
            "worst_variation_ratio": rep.worst_variation,
        }),
    );
    let monotone = (1..approx.n_max).all(|n| {
        approx
            .partial(n)
            .iter()
            .zip(approx.partial(n + 1))
            .all(|(a, b)| *a <= b)
    });
    run.report.check("proper.truncation_monotone", monotone, json!({ "n_max": approx.n_max }));
    let balls = negative_type_on_balls(
        &approx,
        u,
        fce,
        run.cfg.tuples,
        run.cfg.sigmas_per_tuple,
        run.cfg.tol,
        run.cfg.seed,
    );
    if balls.tuples == 0 {
        run.report
            .notes
            .push("no component with chart radius >= 2 lies in the region; the ball test had nothing to sample".into());
    }
    run.report.check("proper.negative_type_on_balls", balls.holds && balls.tuples > 0, &balls);
    let rows: Vec<ShellRow> = rep
        .shells
        .iter()
        .map(|s| ShellRow {
            d: s.d,
            shell_min: s.shell_min,
            shell_max: s.shell_max,
            tau_minus: s.tau_minus,
            tau_plus: s.tau_plus,
        })
        .collect();
    run.csv("shells.csv", rows)?;
    Ok(())
}

/// Print a previously written report.
pub fn load_report(dir: &Path) -> Result<Report> {
    Report::read(dir)
}
