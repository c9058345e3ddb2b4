//! Acceptance suite: ten criteria at their stated tolerances, one PASS/FAIL
//! line each. Flows are driven through the `conflow` binary; closed forms and
//! geometry calibration call the library directly.
//!
//! Criteria 7 and 8 fail at the shipped resolution (see the README). They are
//! reported as FAIL and listed in `KNOWN_FAILURES`; the target exits nonzero
//! only when some other criterion fails, or when a known failure no longer
//! reproduces (so the list stays honest).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use conflow::diagnostics::{compare_to_profile, Samples};
use conflow::flow::axisym::polar_divisor;
use conflow::flow::{FlowConfig, FlowTrace, MomentState, TraceRecord};
use conflow::geometry::{background_metric, build_grid, io, DistanceField, MetricState};
use conflow::marked_sphere::{Divisor, Weight};
use conflow::soliton::{f_of_c, mu_table, soliton_profile, soliton_w, solve_c, tau_of_c};

const KNOWN_FAILURES: &[usize] = &[7, 8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(checks: &[(bool, String)]) -> Outcome {
    let pass = checks.iter().all(|c| c.0);
    let detail = checks
        .iter()
        .map(|(ok, m)| format!("{}{m}", if *ok { "" } else { "✗ " }))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { pass, detail }
}

fn work_dir() -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Runs the binary; returns the exit code.
fn conflow(args: &[&str]) -> i32 {
    let o = Command::new(env!("CARGO_BIN_EXE_conflow")).args(args).output().expect("conflow runs");
    if !o.status.success() {
        eprint!("{}", String::from_utf8_lossy(&o.stderr));
    }
    o.status.code().unwrap_or(-1)
}

fn run(cfg: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    conflow(&args)
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn trace(dir: &Path) -> FlowTrace {
    FlowTrace::read_csv(&dir.join("trace.csv")).unwrap()
}

fn pair(r: &TraceRecord, i: usize, j: usize, k: usize) -> f64 {
    // index of (i, j), i < j, in row-major pair order
    let idx = (0..i).map(|a| k - 1 - a).sum::<usize>() + (j - i - 1);
    r.distances[idx]
}

// ---------------------------------------------------------------- 1

fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn criterion_1() -> Outcome {
    let quad = simpson(-1.0, 1.0, 1_000_000, |x| x * x.exp()) / simpson(-1.0, 1.0, 1_000_000, f64::exp);
    let exact = 1.0 / 1f64.tanh() - 1.0;
    let e_tau = (tau_of_c(1.0) - quad).abs().max((exact - quad).abs());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t: f64 = rng.gen_range(-0.99..0.99);
        worst = worst.max((tau_of_c(solve_c(t).unwrap()) - t).abs());
    }
    let unit = (0..=20).map(|i| i as f64 * 0.049).all(|b| soliton_w(b, b).unwrap() == 1.0);
    outcome(&[
        (e_tau < 1e-10, format!("|tau(1) - quadrature| = {e_tau:.1e}")),
        (worst < 1e-12, format!("solve_c round trip {worst:.1e}")),
        (unit, "W(b,b) = 1".into()),
    ])
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut violations, mut n) = (0, 0);
    while n < 500 {
        let s: f64 = rng.gen_range(0.05..1.95);
        // β_p = (s + a)/2, β_q = (s − a)/2 with β_q ≥ 0 and β_p < 1
        let amax = s.min(2.0 - s) * (1.0 - 1e-9);
        let (a1, a2): (f64, f64) = (rng.gen_range(0.0..amax), rng.gen_range(0.0..amax));
        if (a1 - a2).abs() < 1e-6 {
            continue;
        }
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let w = |a: f64| soliton_w((s + a) / 2.0, (s - a) / 2.0).unwrap();
        if !(w(lo) > w(hi)) {
            violations += 1;
        }
        n += 1;
    }
    outcome(&[(violations == 0, format!("{violations} violations in {n} quadruples"))])
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut bad_argmax, mut bad_gap, mut with_two) = (0, 0, 0);
    for _ in 0..100 {
        let k = rng.gen_range(3..=6);
        let light: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.01..0.9 / (k - 1) as f64)).collect();
        let sum: f64 = light.iter().sum();
        let heavy = rng.gen_range(sum + 1e-3..(sum + 1e-3).max(0.999).min(0.999));
        let mut w = light;
        w.push(heavy.max(sum + 1e-3));
        let d = Divisor::from_weights(w.into_iter().map(Weight::Float).collect()).unwrap();
        let t = mu_table(&d).unwrap();
        if t.entries[0].partition.side_p != [k - 1] {
            bad_argmax += 1;
        }
        if t.entries.len() >= 2 {
            with_two += 1;
            if !(t.entries[0].spec.w > t.entries[1].spec.w) {
                bad_gap += 1;
            }
        }
    }
    outcome(&[
        (bad_argmax == 0, format!("argmax != {{k}} in {bad_argmax}/100")),
        (bad_gap == 0, format!("mu1 <= mu2 in {bad_gap}/{with_two}")),
    ])
}

// ---------------------------------------------------------------- 4

fn cone_mass(n_lat: usize, eps: f64, beta: f64, delta: f64) -> f64 {
    let p = [0.6, 0.0, 0.8];
    let d = Divisor::from_f64(&[beta], vec![p]).unwrap();
    let g = Arc::new(build_grid(n_lat, 2 * n_lat, &d).unwrap());
    let bg = Arc::new(background_metric(g.clone(), &d, eps).unwrap());
    let m = MetricState::initial(bg.clone());
    let dist = DistanceField::new(&m).from_point(&p);
    // ∫_{B(p,δ)} (R − R_reg) dg: the curvature the cone adds on top of ½χ/ρ
    (0..g.len()).filter(|&k| dist[k] <= delta).map(|k| bg.cone_source[k] * g.w(k)).sum()
}

fn criterion_4() -> Outcome {
    let d = Divisor::from_f64(&[0.3, 0.5, 0.7], vec![[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.0, -0.8, -0.6]]).unwrap();
    let g = Arc::new(build_grid(64, 128, &d).unwrap());
    let bg = Arc::new(background_metric(g.clone(), &d, 0.05).unwrap());
    let field = |a: f64, x: &[f64; 3]| (a * x[0] + x[1] * x[2]).sin() + a * x[2] * x[2];
    let u: Vec<f64> = (0..g.len()).map(|k| 0.3 * field(1.3, &g.xyz(k))).collect();
    let m = MetricState::new(bg, u, 0.0).unwrap();
    let f: Vec<f64> = (0..g.len()).map(|k| field(0.7, &g.xyz(k))).collect();
    let h: Vec<f64> = (0..g.len()).map(|k| field(-2.1, &g.xyz(k))).collect();
    let lf = m.laplacian(&f).unwrap();
    let lh = m.laplacian(&h).unwrap();
    let dot = |a: &[f64], b: &[f64]| m.integrate(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>());
    let sa = (dot(&f, &lh) - dot(&h, &lf)).abs();
    let kernel = m.laplacian(&vec![1.0; g.len()]).unwrap().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let ibp = (-dot(&f, &lf) - m.dirichlet(&f)).abs();

    let round = MetricState::initial(Arc::new(
        background_metric(Arc::new(build_grid(64, 128, &Divisor::empty()).unwrap()), &Divisor::empty(), 0.05).unwrap(),
    ));
    let area = (round.area() - 2.0).abs();
    let r1 = round.scalar_curvature().iter().fold(0.0f64, |a, r| a.max((r - 1.0).abs()));

    let (beta, delta) = (0.5, 0.3);
    let m1 = cone_mass(64, 0.1, beta, delta);
    let m2 = cone_mass(128, 0.05, beta, delta);
    let m3 = cone_mass(256, 0.025, beta, delta);
    let extrap = 2.0 * m3 - m2;
    outcome(&[
        (sa < 1e-10, format!("self-adjoint {sa:.1e}")),
        (kernel < 1e-10, format!("|Δ1| {kernel:.1e}")),
        (ibp < 1e-10, format!("by parts {ibp:.1e}")),
        (area < 1e-3 && r1 < 1e-3, format!("round |A−2| {area:.1e}, |R−1| {r1:.1e}")),
        (
            (extrap - beta).abs() < 0.1 * beta,
            format!("cone mass {m1:.4} → {m2:.4} → {m3:.4}, extrapolated {extrap:.4} (β = {beta})"),
        ),
    ])
}

// ---------------------------------------------------------------- 5–8

struct Shipped {
    stable: PathBuf,
    semi: PathBuf,
    unstable: PathBuf,
    codes: [i32; 3],
}

fn shipped_runs(work: &Path) -> Shipped {
    let mut codes = [0; 3];
    let mut dirs = vec![];
    for (i, name) in ["stable", "semistable", "unstable"].iter().enumerate() {
        let out = work.join(name);
        codes[i] = run(&configs().join(format!("{name}.toml")), &out, &[]);
        dirs.push(out);
    }
    Shipped { stable: dirs[0].clone(), semi: dirs[1].clone(), unstable: dirs[2].clone(), codes }
}

fn criterion_5(s: &Shipped) -> Outcome {
    let mut checks = vec![];
    for (name, dir, code) in [("stable", &s.stable, s.codes[0]), ("semi", &s.semi, s.codes[1]), ("unstable", &s.unstable, s.codes[2])] {
        if code == 2 || !dir.join("trace.csv").exists() {
            checks.push((false, format!("{name}: run failed (exit {code})")));
            continue;
        }
        let tr = trace(dir);
        let area = tr.records.iter().fold(0.0f64, |a, r| a.max((r.area - 2.0).abs()));
        let df = tr.records.iter().fold(f64::NEG_INFINITY, |a, r| a.max(r.f_increase));
        let dn = tr.records.iter().fold(f64::NEG_INFINITY, |a, r| a.max(r.n_increase));
        // bounded: finite, and no growth in the second half over the first
        let t_end = tr.last().unwrap().t;
        let sup = |keep: &dyn Fn(f64) -> bool| {
            tr.records.iter().filter(|r| keep(r.t)).fold(0.0f64, |a, r| a.max(r.r_sup))
        };
        let (early, late) = (sup(&|t| t <= 0.5 * t_end), sup(&|t| t > 0.5 * t_end));
        let bounded = tr.records.iter().all(|r| r.r_sup.is_finite()) && late <= early * (1.0 + 1e-3);
        checks.push((area < 1e-12, format!("{name}: |A−2| {area:.0e}")));
        checks.push((df <= 1e-6, format!("ΔF max {df:.1e}")));
        checks.push((dn <= 1e-6, format!("ΔN max {dn:.1e}")));
        checks.push((bounded, format!("sup|R| {early:.3}/{late:.3}")));
    }
    outcome(&checks)
}

fn criterion_6(s: &Shipped) -> Outcome {
    let rep = json(&s.stable.join("report.json"));
    let dev = rep["report"]["curvature"]["sup_dev_half_chi"].as_f64().unwrap();
    let half_chi = rep["report"]["curvature"]["half_chi"].as_f64().unwrap();
    let tr = trace(&s.stable);
    let d0 = &tr.records[0].distances;
    let worst = tr.records.iter().flat_map(|r| r.distances.iter().zip(d0).map(|(d, e)| d / e)).fold(f64::INFINITY, f64::min);
    outcome(&[
        ((half_chi - 0.25).abs() < 1e-12 && dev < 5e-2, format!("sup|R − {half_chi}| = {dev:.2e}")),
        (worst >= 0.5, format!("min d/d0 = {worst:.3}")),
        (rep["report"]["verdict"]["kind"] == "ConstantCurvature", format!("verdict {}", rep["report"]["verdict"]["kind"])),
    ])
}

fn criterion_7(s: &Shipped) -> Outcome {
    let rep = json(&s.semi.join("report.json"));
    let dev = rep["report"]["curvature"]["sup_dev_half_chi"].as_f64().unwrap();
    let tr = trace(&s.semi);
    let r0 = &tr.records[0];
    let d12 = tr.records.iter().map(|r| pair(r, 0, 1, 3) / pair(r0, 0, 1, 3)).fold(f64::INFINITY, f64::min);
    let far = |r: &TraceRecord| pair(r, 0, 2, 3).min(pair(r, 1, 2, 3));
    let d3 = tr.records.iter().map(|r| far(r) / far(r0)).fold(f64::INFINITY, f64::min);
    let v = &rep["report"]["verdict"];
    let football = v["kind"] == "Football" && v["heavy"] == serde_json::json!([2]) && v["light"] == serde_json::json!([0, 1]);
    outcome(&[
        (dev < 5e-2, format!("sup|R − 0.4| = {dev:.2e}")),
        (d12 < 0.1, format!("min d(p1,p2)/d0 = {d12:.3}")),
        (d3 > 0.5, format!("min d(p3,cluster)/d0 = {d3:.3}")),
        (football, format!("verdict {v}")),
    ])
}

/// Bipartition at the largest gap of single-linkage merging (k = 3: the
/// closest pair against the third point).
fn observed_split(r: &TraceRecord) -> (Vec<usize>, Vec<usize>) {
    let ds = [(pair(r, 0, 1, 3), 2), (pair(r, 0, 2, 3), 1), (pair(r, 1, 2, 3), 0)];
    let alone = ds.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap().1;
    (vec![alone], (0..3).filter(|&i| i != alone).collect())
}

fn criterion_8(s: &Shipped, work: &Path) -> Outcome {
    let mut checks = vec![];
    let tr = trace(&s.unstable);
    let t_max = FlowConfig::load(&s.unstable.join("config.toml")).unwrap().flow.t_max;
    // burn-in: the first fifth of the horizon (the light points collide by then)
    let after: Vec<&TraceRecord> = tr.records.iter().filter(|r| r.t >= 0.2 * t_max).collect();
    let rise = after.windows(2).map(|w| w[1].soliton_residual - w[0].soliton_residual).fold(f64::NEG_INFINITY, f64::max);
    checks.push((rise <= 1e-6, format!("residual rise after burn-in {rise:.1e}")));

    let fb = work.join("football_control");
    let fb_cfg = work.join("football.toml");
    std::fs::write(
        &fb_cfg,
        "[divisor]\nweights = [0.8, 0.8]\npositions = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]\n\
         [grid]\nn_lat = 64\nn_lon = 128\n[flow]\neps = 0.05\ndt = 0.02\nt_max = 10.0\n",
    )
    .unwrap();
    run(&fb_cfg, &fb, &[]);
    let control = json(&fb.join("report.json"))["evaluated"]["soliton_residual"].as_f64().unwrap_or(f64::NAN);
    let res = tr.last().unwrap().soliton_residual;
    checks.push((res < 3.0 * control, format!("residual {res:.2e} vs football control {control:.2e}")));

    let d = FlowConfig::load(&s.unstable.join("config.toml")).unwrap().divisor().unwrap();
    let table = mu_table(&d).unwrap();
    let (alone, rest) = observed_split(tr.last().unwrap());
    let entry = table.entries.iter().find(|e| e.partition.side_p == alone && e.partition.side_q == rest);
    let w = tr.last().unwrap().w_norm;
    match entry {
        Some(e) => {
            let gap = (w - e.spec.w).abs();
            checks.push((gap < 5e-2, format!("W {w:.4} vs table {:.4} for {{{}}} alone", e.spec.w, alone[0] + 1)));
        }
        None => checks.push((false, format!("observed split {alone:?}|{rest:?} not in the mu-table"))),
    }
    let mu0 = json(&s.unstable.join("mu.json"))["initial"]["value"].as_f64().unwrap_or(f64::NAN);
    let mu2 = table.threshold.unwrap_or(f64::NAN);
    if mu0 > mu2 {
        checks.push((alone == [2], format!("mu0 {mu0:.3} > mu2 {mu2:.3}: I = {{{}}}", alone[0] + 1)));
    } else {
        checks.push((true, format!("mu0 {mu0:.3} <= mu2 {mu2:.3}: no constraint")));
    }

    // ε-halving: the W gap to the table value must shrink
    let mut gaps = vec![];
    for (eps, n) in [("0.1", "64"), ("0.05", "64"), ("0.025", "128")] {
        let out = work.join(format!("unstable_eps_{eps}"));
        run(&configs().join("unstable.toml"), &out, &["--epsilon", eps, "--resolution", n, "--tmax", "20"]);
        let w = trace(&out).last().map_or(f64::NAN, |r| r.w_norm);
        gaps.push((w - table.entries[0].spec.w).abs());
    }
    let shrinking = gaps.windows(2).all(|g| g[1] < g[0]);
    checks.push((shrinking, format!("eps-halving gaps {:.3} {:.3} {:.3}", gaps[0], gaps[1], gaps[2])));
    outcome(&checks)
}

// ---------------------------------------------------------------- 9

fn criterion_9(work: &Path) -> Outcome {
    let cfg_path = work.join("axisym.toml");
    std::fs::write(&cfg_path, conflow::flow::axisymmetric_config(0.8, 0.3).to_toml()).unwrap();
    let out = work.join("axisym");
    let clock = Instant::now();
    let code = run(&cfg_path, &out, &[]);
    let secs = clock.elapsed().as_secs_f64();
    let cfg = FlowConfig::load(&out.join("config.toml")).unwrap();
    let index: Vec<Value> = serde_json::from_value(json(&out.join("snapshots/index.json"))).unwrap();
    let last = index.last().unwrap();
    let psi = io::read_field_bin(&out.join("snapshots").join(last["file"].as_str().unwrap())).unwrap();
    let (_, bp, bq, ends) = polar_divisor(&cfg).unwrap();
    let state = MomentState { psi, beta_p: bp, beta_q: bq, t: last["t"].as_f64().unwrap() };
    let s = Samples::from_moment(&state, &ends);
    let heavy = [ends.iter().position(|&e| e == 1).unwrap()];
    let own = compare_to_profile(&s, &heavy, &soliton_profile(0.8, 0.3, 400).unwrap()).unwrap();
    let other = compare_to_profile(&s, &heavy, &soliton_profile(0.9, 0.2, 400).unwrap()).unwrap();
    outcome(&[
        (code == 0, format!("exit {code}")),
        (own < 1e-2, format!("L² vs (0.8,0.3) {own:.2e}")),
        (other >= 3.0 * own, format!("vs (0.9,0.2) {other:.2e}")),
        (secs < 60.0, format!("{secs:.1} s")),
    ])
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let bp = 0.05 + 0.045 * i as f64;
        let bq = bp * ((i * 7) % 20) as f64 / 20.0;
        let p = soliton_profile(bp, bq, 128).unwrap();
        worst = worst.max((p.w_by_quadrature(20_000) - (1.0 - f_of_c(p.spec.c))).abs());
    }
    outcome(&[(worst < 1e-8, format!("max |W_quad − (1 − F(c))| = {worst:.1e} over 20 pairs"))])
}

fn main() {
    let work = work_dir();
    let mut results: Vec<(usize, Outcome)> = vec![];
    let mut report = |i: usize, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {i:>2}: {tag}  {}", o.detail);
        results.push((i, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    let shipped = shipped_runs(&work);
    report(5, criterion_5(&shipped));
    report(6, criterion_6(&shipped));
    report(7, criterion_7(&shipped));
    report(8, criterion_8(&shipped, &work));
    report(9, criterion_9(&work));
    report(10, criterion_10());

    let unexpected: Vec<usize> = results.iter().filter(|(i, o)| !o.pass && !KNOWN_FAILURES.contains(i)).map(|r| r.0).collect();
    let fixed: Vec<usize> = results.iter().filter(|(i, o)| o.pass && KNOWN_FAILURES.contains(i)).map(|r| r.0).collect();
    let passed = results.iter().filter(|r| r.1.pass).count();
    println!("acceptance: {passed}/10 criteria pass; known failures {KNOWN_FAILURES:?}; artifacts in {}", work.display());
    if !unexpected.is_empty() || !fixed.is_empty() {
        println!("unexpected failures {unexpected:?}; known failures now passing {fixed:?}");
        std::process::exit(1);
    }
}
