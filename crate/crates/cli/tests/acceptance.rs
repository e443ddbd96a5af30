//! Acceptance criteria, one line per criterion.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use glefield_core::cm_kernel::{discretize, KernelFamily, KernelMeasure};
use glefield_core::field::{check_wellposedness, require_wellposed, EigenBasis, NoiseWeights, Verdict};
use glefield_core::sampler::{mean_and_stderr, per_path_autocovariance, sample_gle_mode, TimeGrid};
use glefield_core::spectral::{
    autocovariance, check_resonance_inequality, find_resonance, integrate_rho, InequalityReport, Mode,
    SpectralDensity, DEFAULT_Q,
};
use glefield_core::Error;
use serde_json::Value;

type Outcome = Result<String, String>;

fn corpus() -> Vec<(&'static str, KernelMeasure)> {
    vec![
        ("exp", KernelMeasure::exponential(1.0, 1.0).unwrap()),
        ("two_exp", KernelMeasure::new([(0.5, 1.0), (0.5, 2.0)]).unwrap()),
        ("power_law", discretize(&KernelFamily::PowerLaw { exponent: 1.0, nodes: 64 }).unwrap()),
    ]
}

fn alphas() -> Vec<f64> {
    let mut a = vec![1.0, 10.0, 100.0, 1e4];
    a.extend((1..=50).map(|k| (k as f64 * PI).powi(2)));
    a
}

fn sd(kernel: &KernelMeasure, alpha: f64, lambda: f64) -> SpectralDensity {
    SpectralDensity::new(kernel.clone(), Mode::bare(alpha, lambda).unwrap())
}

fn variance_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (name, m) in corpus() {
        for alpha in alphas() {
            for lambda in [1.0, 0.1] {
                let want = lambda * lambda / alpha;
                let got = integrate_rho(&sd(&m, alpha, lambda), 1e-9).map_err(|e| format!("{name} alpha={alpha}: {e}"))?;
                let rel = (got - want).abs() / want;
                if rel > 1e-6 {
                    return Err(format!("{name} alpha={alpha} lambda={lambda}: rel err {rel:.3e}"));
                }
                worst = worst.max(rel);
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 60.0 {
        return Err(format!("took {secs:.1}s"));
    }
    Ok(format!("{count} integrals, max rel err {worst:.2e}, {secs:.1}s"))
}

fn resonance_limit() -> Outcome {
    let m = KernelMeasure::exponential(1.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut ratio = f64::NAN;
    for k in 1..=200 {
        let alpha = (k as f64 * PI).powi(2);
        let res = match find_resonance(&sd(&m, alpha, 1.0), DEFAULT_Q) {
            Ok(r) => r,
            Err(Error::NoResonance { .. }) => continue,
            Err(e) => return Err(format!("k={k}: {e}")),
        };
        let err = (res.omega_k - (alpha - 1.0).sqrt()).abs();
        if err > 1e-10 {
            return Err(format!("k={k}: |omega_k - sqrt(alpha - 1)| = {err:.3e}"));
        }
        worst = worst.max(err);
        ratio = res.omega_k.powi(2) / alpha;
    }
    if !((ratio - 1.0).abs() <= 0.05) {
        return Err(format!("omega_k²/alpha_k = {ratio} at k = 200"));
    }
    Ok(format!("max root error {worst:.2e}, omega²/alpha at k=200: {ratio:.8}"))
}

fn monotonicity_suite() -> Outcome {
    let n = 10_000;
    let step = (1e6f64 / 1e-3).ln() / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|j| 1e-3 * (step * j as f64).exp()).collect();
    let drops = |a: f64, b: f64| b < a - 1e-13 * a.abs();
    let mut violations = Vec::new();
    for (name, m) in corpus() {
        let k0 = m.total_mass();
        let slack = (m.atoms().len() + 4) as f64 * f64::EPSILON * k0;
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(m.cos_transform(b) < m.cos_transform(a)) {
                violations.push(format!("{name}: K_cos not decreasing at {b}"));
            }
            if drops(a * a * m.cos_transform(a), b * b * m.cos_transform(b)) {
                violations.push(format!("{name}: w² K_cos decreases at {b}"));
            }
            if drops(a * m.sin_transform(a), b * m.sin_transform(b)) {
                violations.push(format!("{name}: w K_sin decreases at {b}"));
            }
            if !(m.sin_over_omega(b) < m.sin_over_omega(a)) {
                violations.push(format!("{name}: K_sin/w not decreasing at {b}"));
            }
        }
        for &w in &grid {
            if w * m.cos_transform(w) > 0.5 * k0 * (1.0 + 1e-14) {
                violations.push(format!("{name}: w K_cos above K(0)/2 at {w}"));
            }
            if (k0 - w * m.sin_transform(w)).abs() > m.second_moment() / (w * w) * (1.0 + 1e-12) + slack {
                violations.push(format!("{name}: w K_sin far from K(0) at {w}"));
            }
        }
    }
    match violations.first() {
        None => Ok(format!("3 kernels x {n} frequencies, 0 violations")),
        Some(v) => Err(format!("{} violations, first: {v}", violations.len())),
    }
}

fn resonance_inequality() -> Outcome {
    let mut checked = 0;
    let mut min_slack = f64::INFINITY;
    for (name, m) in corpus() {
        for alpha in alphas() {
            let s = sd(&m, alpha, 1.0);
            let Ok(res) = find_resonance(&s, DEFAULT_Q) else { continue };
            if res.omega_k <= 1.0 {
                continue;
            }
            match check_resonance_inequality(&s, &res) {
                Ok(InequalityReport::Checked { min_slack: slack, .. }) => {
                    checked += 1;
                    min_slack = min_slack.min(slack);
                }
                Ok(InequalityReport::Skipped { omega_k }) => return Err(format!("{name} alpha={alpha}: skipped at {omega_k}")),
                Err(e) => return Err(format!("{name} alpha={alpha}: {e}")),
            }
        }
    }
    Ok(format!("{checked} resonant (kernel, alpha) pairs, min slack {min_slack:.3e}"))
}

fn sampler_fidelity() -> Outcome {
    let grid = TimeGrid::new(0.0, 2f64.powi(-8), 4096).unwrap();
    let lags = [0usize, 1, 2, 4, 8, 16, 32, 64];
    let kernel = KernelMeasure::exponential(1.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for alpha in [10.0, 100.0] {
        let start = Instant::now();
        let s = sd(&kernel, alpha, 1.0);
        let ens = sample_gle_mode(&s, &grid, 4096, 20_240_601).map_err(|e| e.to_string())?;
        for &lag in &lags {
            let (est, se) = mean_and_stderr(&per_path_autocovariance(&ens.paths, lag));
            let exact = autocovariance(&s, lag as f64 * grid.dt, 1e-10).map_err(|e| e.to_string())?;
            let z = (est - exact).abs() / se;
            if z > 4.0 {
                return Err(format!("alpha={alpha} lag={lag}: {z:.2} standard errors"));
            }
            worst = worst.max(z);
        }
        let secs = start.elapsed().as_secs_f64();
        if secs > 120.0 {
            return Err(format!("alpha={alpha} took {secs:.1}s"));
        }
        slowest = slowest.max(secs);
    }
    Ok(format!("max deviation {worst:.2} SE over 16 lag checks, slowest config {slowest:.1}s"))
}

fn glefield(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_glefield"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`glefield {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn headline_reproduction(work: &Path) -> Outcome {
    let start = Instant::now();
    glefield(work, &["reproduce", "comparison_1d", "--out-dir", "rep_a", "--threads", "1"])?;
    let secs = start.elapsed().as_secs_f64();
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(work.join("rep_a/summary.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let bands = [("gle_time", 0.42, 0.55), ("heat_time", 0.20, 0.30), ("gle_space", 0.42, 0.58), ("heat_space", 0.42, 0.58)];
    let mut line = Vec::new();
    let mut problems = Vec::new();
    for (cell, lo, hi) in bands {
        let c = &summary["cells"][cell];
        let g = c["gamma_hat"].as_f64().unwrap_or(f64::NAN);
        let width = c["ci_width"].as_f64().unwrap_or(f64::NAN);
        let r2 = c["r_squared"].as_f64().unwrap_or(f64::NAN);
        line.push(format!("{cell} {g:.3} (ci width {width:.3}, r² {r2:.4})"));
        if !(g >= lo && g <= hi) {
            problems.push(format!("{cell} gamma {g:.4} outside [{lo}, {hi}]"));
        }
        if !(width <= 0.1) {
            problems.push(format!("{cell} ci width {width:.4}"));
        }
        if !(r2 >= 0.97) {
            problems.push(format!("{cell} r² {r2:.4}"));
        }
    }
    if summary["time_intervals_disjoint"] != Value::Bool(true) {
        problems.push("gle/heat time intervals overlap".into());
    }
    if secs > 1200.0 {
        problems.push(format!("took {secs:.0}s"));
    }
    if problems.is_empty() {
        Ok(format!("{}; {secs:.0}s", line.join(", ")))
    } else {
        Err(problems.join("; "))
    }
}

fn wellposedness_gate() -> Outcome {
    let basis = EigenBasis::dirichlet(PI).unwrap();
    let flat = check_wellposedness(&basis, &NoiseWeights::Flat { lambda: 1.0 }, 100).map_err(|e| e.to_string())?;
    let limit = flat.limit.unwrap_or(f64::NAN);
    if flat.verdict != Verdict::Convergent || !((limit - PI * PI / 6.0).abs() <= 1e-6) {
        return Err(format!("flat noise: {:?}, limit {limit}", flat.verdict));
    }
    let values = (1..=100).map(|k| basis.alpha(k).unwrap().sqrt()).collect();
    match require_wellposed(&basis, &NoiseWeights::Explicit { values }, 100) {
        Err(Error::Divergent(_)) => Ok(format!("S_inf = {limit:.12} (pi²/6 = {:.12}); lambda_k² = alpha_k rejected", PI * PI / 6.0)),
        other => Err(format!("lambda_k² = alpha_k not rejected: {other:?}")),
    }
}

fn determinism(work: &Path) -> Outcome {
    std::fs::write(
        work.join("small.toml"),
        "[sampler]\nn = 1024\nensemble = 6\nseed = 11\n[field]\nN = 24\nnx = 15\ntail_budget = 0.1\n[regularity]\nbootstrap = 50\n",
    )
    .map_err(|e| e.to_string())?;
    let runs: Vec<(Vec<&str>, &str)> = vec![
        (vec!["kernel", "--config", "small.toml", "--out", "@/kernel.csv"], "kernel.csv"),
        (vec!["spectrum", "--config", "small.toml", "--k", "5", "--omega-max", "40", "--out", "@/spectrum.csv"], "spectrum.csv"),
        (vec!["sample-mode", "--config", "small.toml", "--k", "3", "--method", "ce", "--out", "@/ce.csv"], "ce.csv"),
        (vec!["sample-mode", "--config", "small.toml", "--k", "3", "--method", "ss", "--out", "@/ss.csv"], "ss.csv"),
        (vec!["sample-mode", "--config", "small.toml", "--k", "3", "--method", "ou", "--out", "@/ou.csv"], "ou.csv"),
        (vec!["sample-field", "--config", "small.toml", "--out", "@/field.csv"], "field.csv"),
        (vec!["hoelder", "--config", "small.toml", "--in", "@/field.csv", "--axis", "time", "--out", "@/hoelder.json"], "hoelder.json"),
    ];
    for (tag, threads) in [("a", "1"), ("b", "3")] {
        let dir = format!("det_{tag}");
        std::fs::create_dir_all(work.join(&dir)).map_err(|e| e.to_string())?;
        for (args, _) in &runs {
            let mut full: Vec<String> = args.iter().map(|a| a.replace('@', &dir)).collect();
            full.extend(["--threads".to_string(), threads.to_string()]);
            glefield(work, &full.iter().map(String::as_str).collect::<Vec<_>>())?;
        }
    }
    glefield(work, &["reproduce", "comparison_1d", "--out-dir", "rep_b", "--threads", "3"])?;

    let mut pairs: Vec<(String, String)> = runs
        .iter()
        .flat_map(|(_, f)| [format!("{f}"), format!("{f}.meta.json")])
        .map(|f| (format!("det_a/{f}"), format!("det_b/{f}")))
        .collect();
    for f in ["variograms.csv", "summary.json", "summary.json.meta.json"] {
        pairs.push((format!("rep_a/{f}"), format!("rep_b/{f}")));
    }
    for (a, b) in &pairs {
        let (x, y) = (std::fs::read(work.join(a)), std::fs::read(work.join(b)));
        match (x, y) {
            // sidecars record the input path, which names the run directory
            (Ok(x), Ok(y)) if String::from_utf8_lossy(&x).replace("det_a", "det_b").as_bytes() == y.as_slice() => {}
            (Ok(_), Ok(_)) => return Err(format!("{a} and {b} differ")),
            (x, y) => return Err(format!("missing artifact: {a} {:?} / {b} {:?}", x.err(), y.err())),
        }
    }
    Ok(format!("{} artifacts byte-identical across --threads 1 and 3", pairs.len()))
}

fn main() {
    let work = tempfile::tempdir().expect("temporary directory");
    let dir = work.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("variance identity", Box::new(variance_identity)),
        ("resonance limit", Box::new(resonance_limit)),
        ("monotonicity suite", Box::new(monotonicity_suite)),
        ("resonance inequality", Box::new(resonance_inequality)),
        ("sampler fidelity", Box::new(sampler_fidelity)),
        ("headline regularity reproduction", Box::new(|| headline_reproduction(dir))),
        ("well-posedness gate", Box::new(wellposedness_gate)),
        ("determinism", Box::new(|| determinism(dir))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} ({name}): PASS - {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL - {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
