//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use coarse_kernels::box_space::{cycle_box_space, invariant_mean_defect, FiniteGroup};
use coarse_kernels::fibred::{cycle_scale, fce_cycles, fce_cycles_with, fce_large_girth, kernels_from_fce, validate_fce, GeneratorOptions};
use coarse_kernels::gluing::{
    glue, negative_type_on_balls, partition_of_unity, proper_function, proper_schedules, relayout, separation_check,
    verify_properness, AnnularDecomposition, Schedule,
};
use coarse_kernels::kernels::{
    check_scale_independence, embed, has_variation, is_negative_type, is_positive_type, schoenberg, ScaleEntry,
};
use coarse_kernels::metric_space::{build_graph_space, cycle_edges};
use coarse_kernels::{ControlFunctions, Kernel, Metric, MetricSpace, ScaleFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn sq_euclidean(rng: &mut ChaCha8Rng, m: usize) -> Kernel<f64> {
    let dim = rng.gen_range(1..=4);
    let pts: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let all: Vec<usize> = (0..m).collect();
    Kernel::from_fn(m, &all, |i, j| pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum()).unwrap()
}

fn random_tree_metric(rng: &mut ChaCha8Rng, m: usize) -> Kernel<f64> {
    let edges: Vec<(usize, usize)> = (1..m).map(|v| (rng.gen_range(0..v), v)).collect();
    let g = build_graph_space(m, &edges).unwrap();
    let all: Vec<usize> = (0..m).collect();
    Kernel::from_fn(m, &all, |i, j| g.dist(i, j).unwrap() as f64).unwrap()
}

fn random_symmetric(rng: &mut ChaCha8Rng, m: usize) -> Kernel<f64> {
    let all: Vec<usize> = (0..m).collect();
    let vals: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    Kernel::from_fn(m, &all, |i, j| if i == j { 0.0 } else { vals[i.min(j)][i.max(j)] }).unwrap()
}

fn cnd_kernel(rng: &mut ChaCha8Rng, m: usize) -> Kernel<f64> {
    if rng.gen_bool(0.5) {
        sq_euclidean(rng, m)
    } else {
        random_tree_metric(rng, m)
    }
}

/// `q(sigma) / |sigma|^2` after projecting `sigma` to sum zero.
fn rayleigh(k: &[Vec<f64>], v: &[f64]) -> Option<f64> {
    let m = v.len();
    let mean = v.iter().sum::<f64>() / m as f64;
    let w: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm: f64 = w.iter().map(|x| x * x).sum();
    if norm <= 1e-12 {
        return None;
    }
    let mut q = 0.0;
    for i in 0..m {
        for j in 0..m {
            q += w[i] * w[j] * k[i][j];
        }
    }
    Some(q / norm)
}

/// Largest Rayleigh quotient found by `draws` random sum-zero vectors: a
/// fifth drawn uniformly, the rest as random perturbations of the best so far
/// with an adaptive step. Small kernels also get the grid `{-2..2}^m`.
fn sigma_search(rng: &mut ChaCha8Rng, k: &[Vec<f64>], draws: usize) -> f64 {
    let m = k.len();
    let mut best = f64::NEG_INFINITY;
    let mut best_v = vec![0.0; m];
    let consider = |v: Vec<f64>, best: &mut f64, best_v: &mut Vec<f64>| -> bool {
        match rayleigh(k, &v) {
            Some(q) if q > *best => {
                *best = q;
                *best_v = v;
                true
            }
            _ => false,
        }
    };
    let uniform = draws / 5;
    for _ in 0..uniform {
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        consider(v, &mut best, &mut best_v);
    }
    let mut step = 0.5;
    for _ in uniform..draws {
        let v: Vec<f64> = best_v.iter().map(|x| x + step * rng.gen_range(-1.0..1.0)).collect();
        if consider(v, &mut best, &mut best_v) {
            step *= 1.5;
        } else {
            step = (step * 0.98).max(1e-4);
        }
    }
    if m <= 6 {
        for code in 0..5usize.pow(m as u32) {
            let mut c = code;
            let v: Vec<f64> = (0..m)
                .map(|_| {
                    let d = (c % 5) as f64 - 2.0;
                    c /= 5;
                    d
                })
                .collect();
            consider(v, &mut best, &mut best_v);
        }
    }
    best
}

fn dense(k: &Kernel<f64>) -> Vec<Vec<f64>> {
    let (_, m) = k.to_matrix().unwrap();
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn frob(k: &[Vec<f64>]) -> f64 {
    k.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn c1_cnd_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tol = 1e-8;
    let mut disagreements = 0;
    let mut cnd = 0;
    for i in 0..200 {
        let m = rng.gen_range(2..=10);
        let k = if i % 2 == 0 { cnd_kernel(&mut rng, m) } else { random_symmetric(&mut rng, m) };
        let verdict = is_negative_type(&k, tol).unwrap();
        let d = dense(&k);
        let found = sigma_search(&mut rng, &d, 100_000) > tol * frob(&d);
        if verdict.holds == found {
            disagreements += 1;
        }
        if verdict.holds {
            cnd += 1;
        } else if verdict.witness_value.is_none_or(|w| w <= 0.0) {
            return Err(format!("kernel {i}: failing verdict without a positive witness"));
        }
    }
    ensure(disagreements == 0, format!("{disagreements} disagreements"))?;
    Ok(format!("200 kernels ({cnd} of negative type), 0 disagreements"))
}

fn c2_schoenberg() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let m = rng.gen_range(2..=10);
        let k = cnd_kernel(&mut rng, m);
        for t in [0.1, 1.0, 10.0] {
            let f = schoenberg(&k, t).unwrap();
            let r = is_positive_type(&f, 1e-8).unwrap();
            ensure(r.holds, format!("min eigenvalue {} below -{}", r.eigenvalue, r.threshold))?;
            worst = worst.min(r.eigenvalue);
        }
    }
    Ok(format!("300 transforms, smallest eigenvalue {worst:.3e}"))
}

fn c3_embedding() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut kernels = Vec::new();
    for n in [8, 12] {
        let g = build_graph_space(n, &cycle_edges(n)).unwrap();
        let all: Vec<usize> = (0..n).collect();
        kernels.push(Kernel::from_fn(n, &all, |i, j| g.dist(i, j).unwrap() as f64).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let m = rng.gen_range(2..=10);
        kernels.push(cnd_kernel(&mut rng, m));
    }
    for k in &kernels {
        let e = embed(k, 1e-8).map_err(|e| e.to_string())?;
        for &((x, y), v) in k.entries() {
            let got = e.sq_dist(e.index_of(x).unwrap(), e.index_of(y).unwrap());
            let rel = (got - v).abs() / v.abs().max(1e-300);
            if v != 0.0 {
                worst = worst.max(rel);
            } else {
                worst = worst.max(got.abs());
            }
        }
    }
    ensure(worst <= 1e-6, format!("relative error {worst:.3e}"))?;
    Ok(format!("52 kernels, worst relative error {worst:.3e}"))
}

fn tree(branching: usize, depth: usize) -> MetricSpace {
    let mut edges = Vec::new();
    let mut level = vec![0usize];
    let mut next_id = 1;
    for _ in 0..depth {
        let mut next = Vec::new();
        for &p in &level {
            for _ in 0..branching {
                edges.push((p, next_id));
                next.push(next_id);
                next_id += 1;
            }
        }
        level = next;
    }
    build_graph_space(next_id, &edges).unwrap()
}

fn c4_fce_exactness() -> Outcome {
    let (bs, fce) = fce_cycles(&[8, 16, 32, 64]).unwrap();
    let u = bs.union();
    let rep = validate_fce(&fce, u).unwrap();
    ensure(rep.passed(), format!("{rep:?}"))?;
    ensure(rep.condition2.residual == 0.0, "nonzero compatibility residual")?;
    let mut pairs = 0usize;
    for x in 0..u.len() {
        let chart = &fce.charts[x];
        for &z in &chart.members {
            for &w in &chart.members {
                let d = u.dist(z, w).unwrap() as i64;
                ensure(fce.chart_sq_dist(x, z, w) == Some(d * d), format!("cycle chart at {x}: ({z},{w})"))?;
                pairs += 1;
            }
        }
    }
    let trees: Vec<MetricSpace> = (1..=6).map(|h| tree(2, h)).collect();
    let (tu, tf) = fce_large_girth(trees, None).unwrap();
    let trep = validate_fce(&tf, &tu).unwrap();
    ensure(trep.passed(), format!("tree validation {trep:?}"))?;
    let mut tree_pairs = 0usize;
    for x in 0..tu.len() {
        let chart = &tf.charts[x];
        for &z in &chart.members {
            for &w in &chart.members {
                let d = tu.dist(z, w).unwrap() as i64;
                ensure(tf.chart_sq_dist(x, z, w) == Some(d), format!("tree chart at {x}: ({z},{w})"))?;
                tree_pairs += 1;
            }
        }
    }
    Ok(format!("residual 0, {pairs} cycle chart pairs with |.|^2 = d^2, {tree_pairs} tree pairs with |.|^2 = d"))
}

fn c5_annuli() -> Outcome {
    let bs = cycle_box_space(&[64, 128, 256, 512, 1024, 2048, 3000, 4000]).unwrap();
    let u = bs.union();
    ensure(u.len() >= 10_000, "space too small")?;
    let d = AnnularDecomposition::new(u, 0).unwrap();
    let cover = d.cover_report();
    ensure(cover.holds(), format!("{cover:?}"))?;
    let sep = separation_check(&d, u);
    ensure(sep.holds, format!("{:?}", sep.violation))?;
    Ok(format!(
        "{} points, {} annuli, multiplicity {}, {} cross pairs separated",
        u.len(),
        cover.annuli,
        cover.max_multiplicity,
        sep.pairs_checked
    ))
}

const GLUE_LENGTHS: [usize; 5] = [8, 16, 32, 64, 128];

fn glue_space() -> (coarse_kernels::CoarseUnion, coarse_kernels::FibredEmbedding<i64>, Vec<Schedule>) {
    let controls = ControlFunctions::linear();
    let schedules = vec![Schedule::new(2, 0.5, &controls).unwrap(), Schedule::new(4, 0.25, &controls).unwrap()];
    let (bs, fce) = fce_cycles_with(&GLUE_LENGTHS, GeneratorOptions { transitions: false }).unwrap();
    let scales: Vec<u64> = GLUE_LENGTHS.iter().map(|&n| cycle_scale(n)).collect();
    (relayout(bs.union(), &scales, &schedules).unwrap(), fce, schedules)
}

fn c6_partition() -> Outcome {
    let (u, fce, schedules) = glue_space();
    let decomp = AnnularDecomposition::new(&u, 0).unwrap();
    let mut lines = Vec::new();
    for s in &schedules {
        let fam = kernels_from_fce(&fce, &u, &[s.r]).unwrap();
        let resolved = s.resolve(&decomp, &fam.get(s.r).unwrap().excluded);
        let p = partition_of_unity(&decomp, &u, &resolved.region).unwrap();
        let (a, b) = p.sum_defect();
        ensure(a <= 1e-12 && b <= 1e-12, format!("sum defects {a:.2e} {b:.2e}"))?;
        let cert = p.lipschitz_certificate(&u);
        ensure(cert.holds && cert.edges_checked > 0, format!("{cert:?}"))?;
        lines.push(format!("R={} L={:.3e} edges={}", s.r, p.lebesgue(), cert.edges_checked));
    }
    let small = cycle_box_space(&[4, 8, 16, 32, 64, 128]).unwrap();
    let du = AnnularDecomposition::new(small.union(), 0).unwrap();
    let p = partition_of_unity(&du, small.union(), &vec![true; du.len()]).unwrap();
    let (a, b) = p.sum_defect();
    ensure(a <= 1e-12 && b <= 1e-12, "whole-space partition sums")?;
    let cert = p.lipschitz_certificate(small.union());
    ensure(cert.holds, format!("whole-space {cert:?}"))?;
    lines.push(format!("whole box L={} max ratio {:.3} <= {:.3}", p.lebesgue(), cert.phi_observed, cert.phi_bound));
    Ok(lines.join("; "))
}

fn c7_variation() -> Outcome {
    let (u, fce, schedules) = glue_space();
    let decomp = AnnularDecomposition::new(&u, 0).unwrap();
    let mut lines = Vec::new();
    for s in &schedules {
        let fam = kernels_from_fce(&fce, &u, &[s.r]).unwrap().map(|v| v as f64);
        let resolved = s.resolve(&decomp, &fam.get(s.r).unwrap().excluded);
        let p = partition_of_unity(&decomp, &u, &resolved.region).unwrap();
        let f0 = fam.restrict(&decomp.y_mask(0));
        let f1 = fam.restrict(&decomp.y_mask(1));
        let g = glue(&f0, &f1, &p, &u, s.r, s.t).unwrap();
        ensure(g.uncovered.is_empty(), "uncovered pairs in region")?;
        let v = has_variation(&g.kernel, &u, s.r as u128, s.eps, &resolved.region).unwrap();
        ensure(v.holds && v.pairs_checked > 0, format!("(R={}, eps={}) {v:?}", s.r, s.eps))?;
        lines.push(format!(
            "(R={}, eps={}) t={:.5} S={} o={} pairs={} worst={:.3e}",
            s.r, s.eps, s.t, s.s, resolved.o, v.pairs_checked, v.worst
        ));
    }
    Ok(lines.join("; "))
}

fn c8_scale_independence() -> Outcome {
    let (u, fce, schedules) = glue_space();
    let decomp = AnnularDecomposition::new(&u, 0).unwrap();
    let outer = &schedules[1];
    let scales = [1, 2, 3, 4];
    let fam = kernels_from_fce(&fce, &u, &scales).unwrap().map(|v| v as f64);
    let resolved = outer.resolve(&decomp, &fam.get(outer.r).unwrap().excluded);
    let p = partition_of_unity(&decomp, &u, &resolved.region).unwrap();
    let f0 = fam.restrict(&decomp.y_mask(0));
    let f1 = fam.restrict(&decomp.y_mask(1));
    let mut glued = ScaleFamily::new();
    for r in scales {
        let g = glue(&f0, &f1, &p, &u, r, outer.t).unwrap();
        glued.insert(
            r,
            ScaleEntry {
                kernel: g.kernel,
                excluded: fam.get(r).unwrap().excluded.clone(),
                first_component: fam.get(r).unwrap().first_component,
            },
        );
    }
    let rep = check_scale_independence(&glued);
    ensure(rep.holds && rep.overlaps_checked > 0, format!("{rep:?}"))?;
    Ok(format!("t={:.5}, scales 1..4, {} overlaps bitwise equal", outer.t, rep.overlaps_checked))
}

const PIPELINE_LENGTHS: [usize; 8] = [8, 16, 32, 64, 128, 256, 512, 1024];

fn pipeline() -> (
    coarse_kernels::CoarseUnion,
    coarse_kernels::FibredEmbedding<i64>,
    coarse_kernels::ProperFunctionApprox,
) {
    let controls = ControlFunctions::linear();
    let schedules = proper_schedules(8, &controls).unwrap();
    let (bs, fce) = fce_cycles_with(&PIPELINE_LENGTHS, GeneratorOptions { transitions: false }).unwrap();
    let scales: Vec<u64> = PIPELINE_LENGTHS.iter().map(|&n| cycle_scale(n)).collect();
    let u = relayout(bs.union(), &scales, &schedules).unwrap();
    let approx = proper_function(&u, &fce, 8).unwrap();
    (u, fce, approx)
}

/// Least integer `s` with `exp(-t_N s^2) < 1/2`, `t_N = 2^-N / (3 (1 + N^2))`.
fn threshold_oracle(big_n: usize) -> u64 {
    let t = 0.5f64.powi(big_n as i32) / (3.0 * (1.0 + (big_n * big_n) as f64));
    let mut s = 1u64;
    while (-t * (s * s) as f64).exp() >= 0.5 {
        s += 1;
    }
    s
}

fn c9_properness() -> Outcome {
    let start = Instant::now();
    let (_, _, approx) = pipeline();
    let rep = verify_properness(&approx, &ControlFunctions::linear());
    ensure(rep.upper_holds, "shell maximum above d + 1")?;
    ensure(approx.uncovered == 0, format!("{} uncovered pairs", approx.uncovered))?;
    let mut parts = Vec::new();
    for big_n in [2usize, 4, 8] {
        let s_n = rep.thresholds[big_n - 1].ok_or(format!("S_{big_n} not observed"))?;
        ensure(s_n == threshold_oracle(big_n), format!("S_{big_n} = {s_n}, oracle {}", threshold_oracle(big_n)))?;
        for sh in rep.shells.iter().filter(|s| s.d >= s_n) {
            ensure(
                sh.shell_min >= big_n as f64 / 2.0,
                format!("shell {} min {} below {}", sh.d, sh.shell_min, big_n as f64 / 2.0),
            )?;
        }
        parts.push(format!("S_{big_n}={s_n}"));
    }
    ensure(rep.thresholds[7] == Some(187), "S_8 differs from 187")?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), format!("pipeline took {elapsed:?}"))?;
    Ok(format!(
        "{} pairs, shells 0..={}, {}, pipeline {:.1?}",
        approx.pairs.len(),
        rep.shells.last().map_or(0, |s| s.d),
        parts.join(" "),
        elapsed
    ))
}

fn c10_ball_negative_type() -> Outcome {
    let (u, fce, approx) = pipeline();
    let rep = negative_type_on_balls(&approx, &u, &fce, 500, 20, 1e-8, 10);
    ensure(rep.tuples == 500, format!("only {} tuples", rep.tuples))?;
    ensure(rep.holds, format!("max form {:.3e}", rep.max_form))?;
    Ok(format!("{} tuples, {} forms, max {:.3e}", rep.tuples, rep.forms, rep.max_form))
}

fn c11_invariant_mean() -> Outcome {
    let bs = cycle_box_space(&[4, 8, 16]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gens = FiniteGroup::cyclic(4).unwrap().standard_generators();
    let gens: Vec<_> = gens.into_iter().chain([coarse_kernels::GroupElement::Int(-1)]).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f: Vec<f64> = (0..bs.union().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for g in &gens {
            worst = worst.max(invariant_mean_defect(&bs, &f, g).unwrap());
        }
    }
    ensure(worst <= 1e-12, format!("defect {worst:.3e}"))?;
    Ok(format!("100 functions x {} generators, worst defect {worst:.3e}", gens.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("CND oracle equivalence", c1_cnd_oracle),
        ("Schoenberg transforms are of positive type", c2_schoenberg),
        ("embedding roundtrip", c3_embedding),
        ("FCE exactness", c4_fce_exactness),
        ("annular decomposition", c5_annuli),
        ("partition of unity", c6_partition),
        ("schedule and variation", c7_variation),
        ("scale independence of glued family", c8_scale_independence),
        ("properness envelopes", c9_properness),
        ("negative type on balls", c10_ball_negative_type),
        ("invariant mean", c11_invariant_mean),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
