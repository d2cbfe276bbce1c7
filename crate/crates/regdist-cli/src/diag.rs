//! One runner per diagnostic. Each reads its `<name>.*` keys, calls the
//! library, and returns CSV tables plus a short stdout summary.

use crate::output::{coord_header, coords, num, short, Table};
use crate::scenario::{parse_points, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regdist::config::Config;
use regdist::diagnostics::{
    alpha_number, blowup_sequence, cone_oscillation, dyadic_grid, dyadic_scales, gamma_dyadic_sum, gamma_dini_bound,
    plane_samples, usfe_scan, CarlesonOptions,
};
use regdist::engine::{Engine, SummationConfig};
use regdist::exactness::{exactness_report, radial_orthogonality_integral};
use regdist::kernels::{dini_verdict, MollifierSpec, RotationWeight};
use regdist::measures::{dist_to_support, generate, DiscreteMeasure, SetGenerator};
use regdist::synthesis::{
    build_constraints, far_from_constant, null_space_search, plane_sampler, save_synthesis, smooth_and_verify, KernelBasis,
    SearchOptions, SmoothingSpec,
};
use regdist::{Error, Kernel, Result};
use std::path::Path;
use std::time::Instant;

pub const ALL: [&str; 11] = [
    "field", "carleson", "cones", "gamma", "alpha", "exactness", "orth", "synth", "blowup", "dini", "bench",
];

/// Whether the diagnostic needs the scenario's measure.
pub fn needs_measure(name: &str) -> bool {
    matches!(name, "field" | "carleson" | "cones" | "alpha" | "blowup")
}

#[derive(Default)]
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub summary: Vec<String>,
}

pub struct Context<'a> {
    pub sc: &'a Scenario,
    pub kernel: Kernel,
    pub measure: Option<DiscreteMeasure>,
    pub out: Option<&'a Path>,
}

impl Context<'_> {
    fn cfg(&self, name: &str) -> Config {
        self.sc.config.section(name)
    }

    fn measure(&self) -> Result<&DiscreteMeasure> {
        self.measure.as_ref().ok_or_else(|| Error::Config("this diagnostic needs a measure.type".into()))
    }

    fn engine(&self) -> Result<Engine<'_>> {
        Engine::new(&self.kernel, self.measure()?, self.sc.alpha, self.sc.summation()?)
    }

    /// Atom closest to the origin: a support point for every generator.
    fn default_q(&self) -> Result<Vec<f64>> {
        let mu = self.measure()?;
        let (i, _) = mu
            .index()
            .nearest(&vec![0.0; mu.ambient_dim()])
            .ok_or_else(|| Error::Config("measure has no atoms".into()))?;
        Ok(mu.point(i).to_vec())
    }

    fn points(&self, c: &Config, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        c.get(key).map(|s| parse_points(s, self.sc.n)).transpose()
    }
}

pub fn run(name: &str, ctx: &Context) -> Result<Outcome> {
    match name {
        "field" => field(ctx),
        "carleson" => carleson(ctx),
        "cones" => cones(ctx),
        "gamma" => gamma(ctx),
        "alpha" => alpha(ctx),
        "exactness" => exactness(ctx),
        "orth" => orth(ctx),
        "synth" => synth(ctx),
        "blowup" => blowup(ctx),
        "dini" => dini(ctx),
        "bench" => bench(ctx),
        other => Err(Error::Config(format!("unknown diagnostic '{other}'"))),
    }
}

fn range_i32(c: &Config, lo: &str, hi: &str, default: (i64, i64)) -> Result<std::ops::RangeInclusive<i32>> {
    Ok(c.i64_or(lo, default.0)? as i32..=c.i64_or(hi, default.1)? as i32)
}

fn field(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("field");
    let n = ctx.sc.n;
    let pts = match ctx.points(&c, "points")? {
        Some(p) => p,
        None => (-2..=2)
            .map(|j| {
                let mut x = ctx.default_q().unwrap_or_else(|_| vec![0.0; n]);
                x[n - 1] += 2f64.powi(j);
                x
            })
            .collect(),
    };
    let e = ctx.engine()?;
    let mut h = coord_header("x", n);
    h.extend(["delta", "r", "d", "grad_d_norm", "f"].map(String::from));
    let mut t = Table {
        header: h,
        rows: Vec::new(),
    };
    for (x, f) in pts.iter().zip(e.eval_batch(&pts)) {
        let f = f?;
        let mut row = coords(x);
        row.extend([f.delta, f.r, f.d, f.grad_d_norm(), f.f].map(num));
        t.push(row);
    }
    let fmax = t.rows.iter().map(|r| r[n + 4].parse::<f64>().unwrap_or(0.0)).fold(0.0, f64::max);
    Ok(Outcome {
        summary: vec![format!("field: {} points, max F = {}", pts.len(), short(fmax))],
        tables: vec![("field.csv".into(), t)],
    })
}

fn carleson(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("carleson");
    let qs = match ctx.points(&c, "q")? {
        Some(q) => q,
        None => vec![ctx.default_q()?],
    };
    let opts = CarlesonOptions {
        refine: c.bool_or("refine", false)?,
        j_max: c.f64("j_max")?.map(|v| v as i32),
    };
    let grid = dyadic_grid(&qs, range_i32(&c, "j_lo", "j_hi", (0, 0))?);
    let rep = usfe_scan(&ctx.engine()?, &grid, &opts)?;
    let n = ctx.sc.n;
    let mut h = coord_header("q", n);
    h.extend(["r", "value", "cubes", "skipped", "truncated"].map(String::from));
    let mut t = Table {
        header: h,
        rows: Vec::new(),
    };
    for e in &rep.entries {
        let mut row = coords(&e.q);
        row.extend([num(e.r), num(e.value), e.cubes.to_string(), e.skipped.to_string(), e.truncated.to_string()]);
        t.push(row);
    }
    Ok(Outcome {
        summary: vec![format!("carleson sup = {}", short(rep.sup))],
        tables: vec![("carleson.csv".into(), t)],
    })
}

fn cones(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("cones");
    let q = match ctx.points(&c, "q")? {
        Some(q) => q.into_iter().next().ok_or_else(|| Error::Config("cones.q is empty".into()))?,
        None => ctx.default_q()?,
    };
    let scales = dyadic_scales(range_i32(&c, "k_lo", "k_hi", (1, 6))?);
    let osc = cone_oscillation(
        &ctx.engine()?,
        &q,
        c.f64_or("eta", 0.5)?,
        &scales,
        c.usize_or("samples", 16)?,
        ctx.sc.seed,
    )?;
    let mut t = Table::new(&["r", "min", "max", "mean", "osc", "samples", "skipped"]);
    for s in &osc.scales {
        t.push(vec![
            num(s.r),
            num(s.min),
            num(s.max),
            num(s.mean),
            num(s.osc),
            s.samples.to_string(),
            s.skipped.to_string(),
        ]);
    }
    let limit = osc.limit.map_or("none".to_string(), short);
    Ok(Outcome {
        summary: vec![format!("cone oscillation floor = {}, limit = {limit}", short(osc.floor()))],
        tables: vec![("cones.csv".into(), t)],
    })
}

fn gamma(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("gamma");
    let n = ctx.sc.n;
    let d = c.usize_or("d", n - 1)?;
    let planes = plane_samples(n, d, c.usize_or("planes", 4)?)?;
    let js = range_i32(&c, "j_lo", "j_hi", (-4, 4))?;
    let (est, total) = gamma_dyadic_sum(&ctx.kernel, c.f64_or("lambda", 2.0)?, ctx.sc.alpha, js.clone(), &planes)?;
    let mut t = Table::new(&["j", "r", "value_sq"]);
    for (j, e) in js.zip(&est) {
        t.push(vec![j.to_string(), num(e.r), num(e.value_sq)]);
    }
    let mut out = Outcome {
        summary: vec![format!("gamma^2 dyadic sum = {}", short(total))],
        tables: vec![("gamma.csv".into(), t)],
    };
    if let (Some(k0), Some(ki)) = (c.f64("k0")?, c.f64("k_inf")?) {
        let range = (c.f64_or("t_lo", 1e-8)?, c.f64_or("t_hi", 1e8)?);
        let b = gamma_dini_bound(&ctx.kernel, d, ctx.sc.alpha, k0, ki, range)?;
        let mut bt = Table::new(&["key", "value"]);
        bt.push(vec!["sum".into(), num(total)]);
        bt.push(vec!["rhs".into(), num(b.rhs)]);
        for m in 0..3 {
            bt.push(vec![format!("dini_{m}"), num(b.dini[m])]);
        }
        out.summary.push(format!("dini bound rhs = {}", short(b.rhs)));
        out.tables.push(("gamma_bound.csv".into(), bt));
    }
    Ok(out)
}

fn alpha(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("alpha");
    let x = match ctx.points(&c, "x")? {
        Some(p) => p.into_iter().next().ok_or_else(|| Error::Config("alpha.x is empty".into()))?,
        None => ctx.default_q()?,
    };
    let rs = c.f64_list("r")?.unwrap_or_else(|| vec![0.25]);
    let grid = c.usize_or("grid", 16)?;
    let mu = ctx.measure()?;
    let n = ctx.sc.n;
    let mut h = coord_header("x", n);
    h.extend(["r", "value", "density", "gap", "candidates"].map(String::from));
    let mut t = Table {
        header: h,
        rows: Vec::new(),
    };
    let mut summary = Vec::new();
    for r in rs {
        let a = alpha_number(mu, &x, r, grid)?;
        let mut row = coords(&x);
        row.extend([num(r), num(a.value), num(a.flat.density), num(a.gap), a.candidates.to_string()]);
        t.push(row);
        summary.push(format!("alpha(r = {}) = {}", short(r), short(a.value)));
    }
    Ok(Outcome {
        summary,
        tables: vec![("alpha.csv".into(), t)],
    })
}

fn exactness(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("exactness");
    let n = ctx.sc.n;
    let d = c.usize_or("d", n - 1)?;
    let planes = plane_samples(n, d, c.usize_or("planes", 16)?)?;
    let rep = exactness_report(&ctx.kernel, &planes, ctx.sc.alpha, c.usize_or("samples", 8)?)?;
    let mut t = Table::new(&["plane", "c_e", "residual_exact", "residual_orth"]);
    for (i, p) in rep.planes.iter().enumerate() {
        t.push(vec![i.to_string(), num(p.c_e), num(p.residual_exact), num(p.residual_orth)]);
    }
    Ok(Outcome {
        summary: vec![format!(
            "residual_exact = {}, residual_orth = {}, plane_dependence = {}",
            short(rep.residual_exact),
            short(rep.residual_orth),
            short(rep.plane_dependence)
        )],
        tables: vec![("exactness.csv".into(), t)],
    })
}

fn orth(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("orth");
    let d = c.f64_or("d", 1.0)?;
    let rs = c.f64_list("r")?.unwrap_or_else(|| vec![1.0]);
    let mut t = Table::new(&["r", "value"]);
    let mut summary = Vec::new();
    for r in rs {
        let v = radial_orthogonality_integral(&ctx.kernel, d, ctx.sc.alpha, r)?;
        t.push(vec![num(r), num(v)]);
        summary.push(short(v));
    }
    Ok(Outcome {
        summary,
        tables: vec![("orth.csv".into(), t)],
    })
}

fn synth(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("synth");
    if ctx.sc.n != 2 {
        return Err(Error::Config("synth builds planar kernels; set n = 2".into()));
    }
    let seed = ctx.sc.seed;
    let basis = KernelBasis::fourier(
        c.f64_or("r_min", 2f64.powi(-16))?,
        c.f64_or("r_max", 2f64.powi(16))?,
        c.usize_or("radial", 80)?,
        c.usize_or("modes", 2)?,
    )?;
    let (lo, hi) = (c.f64_or("lo", 0.125)? * basis.scale(), c.f64_or("hi", 8.0)? * basis.scale());
    let alpha = ctx.sc.alpha;
    let train = build_constraints(&basis, &plane_sampler(2, 1, c.usize_or("train", 200)?, lo, hi, seed)?, alpha)?;
    let hold = build_constraints(&basis, &plane_sampler(2, 1, c.usize_or("holdout", 100)?, lo, hi, seed + 1)?, alpha)?;
    let probe = c.f64_list("probe")?.unwrap_or_else(|| vec![basis.scale(), 0.0]);
    let mut opts = SearchOptions::new(probe.clone());
    opts.smoothness = c.f64_or("smoothness", opts.smoothness)?;
    opts.ridge = c.f64_or("ridge", opts.ridge)?;
    opts.null_tol = c.f64_or("null_tol", opts.null_tol)?;
    let mut kv = Table::new(&["key", "value"]);
    kv.push(vec!["rows".into(), train.len().to_string()]);
    kv.push(vec!["dropped".into(), train.dropped.len().to_string()]);
    kv.push(vec!["cols".into(), basis.size().to_string()]);
    let r = match null_space_search(&basis, &train, &hold, &opts) {
        Ok(r) => r,
        Err(Error::DegenerateNullSpace { smallest, largest }) => {
            kv.push(vec!["status".into(), "degenerate_null_space".into()]);
            kv.push(vec!["sigma_min".into(), num(smallest)]);
            kv.push(vec!["sigma_max".into(), num(largest)]);
            return Ok(Outcome {
                summary: vec![format!("synth: degenerate null space (sigma_min {} vs sigma_max {})", short(smallest), short(largest))],
                tables: vec![("synth.csv".into(), kv)],
            });
        }
        Err(e) => return Err(e),
    };
    kv.push(vec!["status".into(), "ok".into()]);
    for (k, v) in [
        ("sup_norm", r.sup_norm),
        ("probe_value", r.probe_value),
        ("training_residual", r.training_residual),
        ("training_relative", r.training_relative),
        ("holdout_residual", r.holdout_residual),
        ("sigma_min", r.sigma_min),
        ("sigma_second", r.sigma_second),
        ("sigma_max", r.sigma_max),
    ] {
        kv.push(vec![k.into(), num(v)]);
    }
    kv.push(vec!["null_dim".into(), r.null_dim.to_string()]);
    let mut summary = vec![format!(
        "synth: training {} holdout {} (relative to sup {})",
        short(r.training_residual),
        short(r.holdout_residual),
        short(r.sup_norm)
    )];
    let mut tables = Vec::new();
    if c.bool_or("smooth", true)? {
        let spec = SmoothingSpec {
            mollifier: MollifierSpec::bump(c.f64_or("mollify_lo", 0.9)?, c.f64_or("mollify_hi", 1.1)?),
            rotation: RotationWeight::Bump {
                max_angle: c.f64_or("rotation_angle", 0.1)?,
                nodes: c.usize_or("rotation_nodes", 256)?,
            },
            per_decade: c.usize_or("per_decade", 128)?,
        };
        let fresh = plane_sampler(2, 1, c.usize_or("fresh", 20)?, lo, hi, seed + 2)?;
        let s = smooth_and_verify(&basis, &r, &spec, &fresh, alpha)?;
        let mut st = Table::new(&["stage", "residual", "inflation", "probe_value"]);
        for x in &s.stages {
            st.push(vec![x.name.clone(), num(x.residual), num(x.inflation), num(x.probe_value)]);
        }
        kv.push(vec!["shift".into(), num(s.shift)]);
        kv.push(vec!["exact_residual".into(), num(s.exact_residual)]);
        summary.push(format!("smoothing: final residual {}", short(s.stages.last().map_or(0.0, |x| x.residual))));
        tables.push(("synth_stages.csv".into(), st));
        let depth = c.usize_or("depth", 4)?;
        if depth > 0 {
            let support = (basis.r_min / 2.0, basis.r_max * 2.0);
            let f = far_from_constant(&s.kernel, c.f64_or("eps", 0.1)?, depth, &probe, support)?;
            let mut ft = Table::new(&["level", "scale", "probe", "target"]);
            for (i, p) in f.probes.iter().enumerate() {
                ft.push(vec![i.to_string(), num(f.scales[i]), num(*p), num(f.probe_target)]);
            }
            kv.push(vec!["profile_gap".into(), num(f.profile_gap)]);
            summary.push(format!("far-from-constant: profile gap {}", short(f.profile_gap)));
            tables.push(("synth_glued.csv".into(), ft));
        }
    }
    if let Some(dir) = ctx.out {
        save_synthesis(&dir.join("synth_kernel"), &basis, &r, seed)?;
    }
    tables.insert(0, ("synth.csv".into(), kv));
    Ok(Outcome { tables, summary })
}

fn blowup(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("blowup");
    let n = ctx.sc.n;
    let q = match ctx.points(&c, "q")? {
        Some(p) => p.into_iter().next().ok_or_else(|| Error::Config("blowup.q is empty".into()))?,
        None => ctx.default_q()?,
    };
    let x = match ctx.points(&c, "x")? {
        Some(p) => p.into_iter().next().ok_or_else(|| Error::Config("blowup.x is empty".into()))?,
        None => {
            let mut x = vec![0.0; n];
            x[n - 1] = 1.0;
            x
        }
    };
    let radii = dyadic_scales(range_i32(&c, "k_lo", "k_hi", (0, 6))?);
    let seq = blowup_sequence(&ctx.kernel, ctx.measure()?, ctx.sc.alpha, &q, &radii, &x, ctx.sc.summation()?)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    let mut t = Table::new(&["r", "grad_d_norm", "direct"]);
    for i in 0..radii.len() {
        t.push(vec![num(radii[i]), opt(seq.values[i]), opt(seq.direct[i])]);
    }
    Ok(Outcome {
        summary: vec![format!(
            "blowup: identity error {}, rate {}",
            short(seq.identity_error),
            seq.rate.map_or("none".into(), short)
        )],
        tables: vec![("blowup.csv".into(), t)],
    })
}

fn dini(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("dini");
    let k = &ctx.kernel;
    if !k.is_radial() {
        return Err(Error::NotRadial);
    }
    let (t_lo, t_hi) = (c.f64_or("t_lo", 1e-6)?, c.f64_or("t_hi", 1e6)?);
    let k0 = c.f64_or("k0", k.profile_value(t_lo * t_lo))?;
    let ki = c.f64_or("k_inf", k.profile_value(t_hi * t_hi))?;
    let mut t = Table::new(&["m", "value", "value_doubled", "convergent"]);
    let mut summary = Vec::new();
    for m in 0..=k.derivative_order().min(2) {
        let v = dini_verdict(k, k0, ki, m, (t_lo, t_hi))?;
        let verdict = if v.convergent { "convergent" } else { "divergent" };
        summary.push(format!("m = {m}: {} ({verdict})", short(v.value)));
        t.push(vec![m.to_string(), num(v.value), num(v.value_doubled), v.convergent.to_string()]);
    }
    Ok(Outcome {
        summary,
        tables: vec![("dini.csv".into(), t)],
    })
}

fn bench(ctx: &Context) -> Result<Outcome> {
    let c = ctx.cfg("bench");
    let atoms = c.usize_or("atoms", 65536)?;
    let generation = ((atoms.max(1) as f64).ln() / 4f64.ln()).round() as u32;
    let queries = c.usize_or("queries", 1000)?;
    let mu = generate(&SetGenerator::FourCornerCantor { generation })?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.sc.seed);
    let mut xs = Vec::with_capacity(queries);
    while xs.len() < queries {
        let x = vec![rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
        if dist_to_support(&mu, &x) > 4.0 * mu.spacing() {
            xs.push(x);
        }
    }
    let k = if ctx.kernel.ambient_dim() == 2 { ctx.kernel.clone() } else { Kernel::constant(2, 1.0) };
    let tree_cfg = SummationConfig::tree(c.f64_or("theta", 0.5)?, c.usize_or("order", 4)?).with_target(c.f64_or("target", 1e-6)?);
    let timed = |cfg: SummationConfig| -> Result<(f64, Vec<regdist::engine::RDerivs>)> {
        let t0 = Instant::now();
        let e = Engine::new(&k, &mu, ctx.sc.alpha, cfg)?;
        let r = e.eval_r_batch(&xs).into_iter().collect::<Result<Vec<_>>>()?;
        Ok((t0.elapsed().as_secs_f64(), r))
    };
    let (tb, rb) = timed(SummationConfig::brute())?;
    let (tt, rt) = timed(tree_cfg)?;
    let (mut er, mut eg) = (0.0f64, 0.0f64);
    for (a, b) in rb.iter().zip(&rt) {
        er = er.max((a.r - b.r).abs() / a.r.abs());
        let diff: f64 = a.grad.iter().zip(&b.grad).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = a.grad.iter().map(|u| u * u).sum::<f64>().sqrt();
        eg = eg.max(diff / norm);
    }
    let mut t = Table::new(&["method", "atoms", "queries", "seconds", "max_rel_err_r", "max_rel_err_grad"]);
    t.push(vec!["brute".into(), mu.len().to_string(), queries.to_string(), num(tb), num(0.0), num(0.0)]);
    t.push(vec!["tree".into(), mu.len().to_string(), queries.to_string(), num(tt), num(er), num(eg)]);
    Ok(Outcome {
        summary: vec![format!(
            "bench: {} atoms, {queries} queries, brute {tb:.3}s, tree {tt:.3}s, speedup {:.1}x, max rel err R {er:e}, gradR {eg:e}",
            mu.len(),
            tb / tt
        )],
        tables: vec![("bench.csv".into(), t)],
    })
}
