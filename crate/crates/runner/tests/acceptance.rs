//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use maxenergy::analysis::{centroid, diameter, second_moment_ratio};
use maxenergy::geometry::{build_mask_region, Mask};
use maxenergy::oracles::{delta_limit_center, interval_optimum};
use maxenergy::pointset::{construct_1d_sequence, discrete_energy};
use maxenergy::rearrange::{random_admissible_init, solve_with};
use maxenergy::{DensityBounds, Kernel, KernelOperator, SolverSettings};
use maxenergy_runner::config::{DiscreteConfig, ExperimentConfig};
use maxenergy_runner::verify::{self, Check};
use maxenergy_runner::{discrete, solve};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn of(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn recipe(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes").join(format!("{name}.json"))
}

fn exp1() -> Kernel {
    Kernel::Exponential { sigma: 1.0 }
}

fn describe(checks: &[&Check]) -> String {
    checks
        .iter()
        .map(|c| {
            let mark = if c.pass { "" } else { " FAILED" };
            format!("{}.{}={:.6e} (tol {:.3e}){mark}", c.suite, c.check, c.observed, c.tolerance)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn from_checks(checks: &[&Check], elapsed: Duration, limit: Option<Duration>) -> Verdict {
    let mut pass = checks.iter().all(|c| c.pass);
    let mut detail = describe(checks);
    if let Some(limit) = limit {
        let fast = elapsed <= limit;
        pass &= fast;
        detail.push_str(&format!("; runtime {:.1} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()));
    }
    Verdict::of(pass, detail)
}

/// Criterion 1: 5 domains × 2 kernels × 2 seeds at resolution 128.
fn monotonicity() -> Result<Verdict> {
    let start = Instant::now();
    let masks = [
        Mask::Disk { radius: 1.0 },
        Mask::Clover,
        Mask::annulus(0.7),
        Mask::Dumbbell,
        Mask::Ellipse { eps: 0.3 },
    ];
    let kernels = [exp1(), Kernel::Gaussian { tau: 0.05 }];
    let (mut runs, mut changed_steps, mut failures) = (0, 0, Vec::new());
    for mask in masks {
        let d = build_mask_region(mask, None, 128)?;
        let bounds = DensityBounds::from_mass_fraction(d.total_measure(), 0.25, 0.5)?;
        for kernel in kernels {
            let op = KernelOperator::new(&d, kernel)?;
            for seed in [0, 1] {
                let init = random_admissible_init(&d, bounds, seed)?;
                let (_, report) = solve_with(&op, bounds, &init, SolverSettings::default(), |_| {})?;
                runs += 1;
                changed_steps += report.set_changed.iter().filter(|&&c| c).count();
                if let Err(msg) = report.check_monotone() {
                    failures.push(format!("{} {} seed {seed}: {msg}", mask.name(), kernel.family()));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let fast = elapsed <= Duration::from_secs(300);
    Ok(Verdict::of(
        failures.is_empty() && runs >= 20 && fast,
        format!(
            "{runs} runs, {changed_steps} set-changing steps, {} violations{}; runtime {:.1} s (limit 300 s)",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(" [{}]", failures.join(" | ")) },
            elapsed.as_secs_f64()
        ),
    ))
}

/// Criterion 6: the two annulus recipes. Returns the verdict and the KKT
/// checks for criterion 9.
fn annulus() -> Result<(Verdict, Vec<Check>)> {
    let mut kkt = Vec::new();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, broken) in [("annulus-0.7", true), ("annulus-0.6", false)] {
        let run = solve::run(&ExperimentConfig::load(&recipe(name))?, None)?;
        let grid = run.domain.grid().expect("mask domains carry a grid");
        let norm = run.report.shape.centroid_norm;
        let ok = run.stationary() && if broken { norm > 0.1 } else { norm < 2.0 * grid.hx };
        pass &= ok;
        parts.push(format!(
            "{name}: centroid norm {norm:.4e} ({}), {} iterations",
            if broken { "> 0.1".to_string() } else { format!("< {:.4}", 2.0 * grid.hx) },
            run.report.solve.iterations
        ));
        kkt.push(Check::kkt(name, &run.report.solve, grid.hx * grid.hy));
    }
    Ok((Verdict::of(pass, parts.join("; ")), kkt))
}

/// Criterion 10: ρ₋ = 1/(2π), ρ₊ = k/π for k = 2, 4, 8, 16 on the unit disk.
fn concentration() -> Result<Verdict> {
    let d = build_mask_region(Mask::Disk { radius: 1.0 }, None, 200)?;
    let h = d.grid().expect("grid").hx;
    let op = KernelOperator::new(&d, exp1())?;
    let pi = std::f64::consts::PI;
    let rho_minus = 0.5 / pi;
    let mut diameters = Vec::new();
    let mut last_centroid = vec![];
    for k in [2.0, 4.0, 8.0, 16.0] {
        let bounds = DensityBounds::new(rho_minus, k / pi)?;
        let init = random_admissible_init(&d, bounds, 0)?;
        let (rho, _) = solve_with(&op, bounds, &init, SolverSettings::default(), |_| {})?;
        let plus = rho.plus_set();
        diameters.push(diameter(&d, &plus));
        last_centroid = centroid(&d, &plus);
    }
    let limit = delta_limit_center(&d, exp1(), rho_minus)?;
    let x0 = d.node(limit.node);
    let offset = (last_centroid[0] - x0[0]).hypot(last_centroid[1] - x0[1]);
    let decreasing = diameters.windows(2).all(|w| w[1] < w[0]);
    Ok(Verdict::of(
        decreasing && offset <= 2.0 * h,
        format!(
            "diameters {:?}; final centroid {:.3e} from the limit node (tol {:.3e})",
            diameters.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            offset,
            2.0 * h
        ),
    ))
}

/// Criterion 11: discrete energies of the constructed sequence against E[ρ*].
fn bridge() -> Result<Verdict> {
    let target = interval_optimum(1.0, 2.0)?.exponential_energy(1.0)?;
    let mut energies = Vec::new();
    for n in [64, 128, 256] {
        energies.push(discrete_energy(&construct_1d_sequence(n, 1.0, 2.0)?, &exp1()));
    }
    let dist: Vec<f64> = energies.iter().map(|e| (e - target).abs()).collect();
    let decreasing = dist.windows(2).all(|w| w[1] < w[0]);
    let below = energies.iter().all(|&e| e <= target * 1.02);
    Ok(Verdict::of(
        decreasing && below,
        format!(
            "E[rho*] = {target:.8}; E_n = {:?}; |E_n - E[rho*]| = {:?}",
            energies.iter().map(|v| format!("{v:.8}")).collect::<Vec<_>>(),
            dist.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
        ),
    ))
}

/// Criterion 12: second-moment ratio of Ω₊ on the ellipse ε = 0.3.
fn ellipse() -> Result<Verdict> {
    let run = solve::run(&ExperimentConfig::load(&recipe("ellipse"))?, None)?;
    let plus = run.density.plus_set();
    let ratio = second_moment_ratio(&run.domain, &plus)?;
    Ok(Verdict::of(
        run.stationary() && ratio > 1.05,
        format!("eigenvalue ratio {ratio:.4} (> 1.05), {} iterations", run.report.solve.iterations),
    ))
}

fn read_tree(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in fs::read_dir(&p)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(dir)?.to_path_buf(), fs::read(&path)?);
            }
        }
    }
    Ok(files)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?.install(f))
}

/// Criterion 13: rerun recipes with 1 and 4 threads and compare every file.
fn determinism() -> Result<Verdict> {
    let tmp = tempfile::tempdir()?;
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for name in ["clover", "annulus-0.7", "interval", "circle-cap", "discrete-n4"] {
        let mut trees = Vec::new();
        for threads in [1, 4] {
            let out = tmp.path().join(format!("{name}-{threads}"));
            if name.starts_with("discrete") {
                let cfg = DiscreteConfig::load(&recipe(name))?;
                in_pool(threads, || discrete::run(&cfg, Some(&out)))??;
            } else {
                let mut cfg = ExperimentConfig::load(&recipe(name))?;
                cfg.output.snapshot_every = 2;
                in_pool(threads, || solve::run(&cfg, Some(&out)))??;
            }
            trees.push(read_tree(&out)?);
        }
        ensure!(!trees[0].is_empty(), "{name} wrote no files");
        compared += trees[0].len();
        if trees[0] != trees[1] {
            mismatches.push(name);
        }
    }
    Ok(Verdict::of(
        mismatches.is_empty(),
        format!("{compared} files compared across 1 and 4 threads; mismatching runs: {mismatches:?}"),
    ))
}

fn main() -> ExitCode {
    let mut all_pass = true;
    let mut emit = |n: usize, title: &str, v: Result<Verdict>| {
        let v = v.unwrap_or_else(|e| Verdict::of(false, format!("error: {e:#}")));
        all_pass &= v.pass;
        println!("[{}] criterion {n} {title}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };

    emit(1, "monotonicity", monotonicity());

    // Criteria 2 to 5, 7 and 8 run the oracle suites; their KKT rows feed criterion 9.
    let mut kkt: Vec<Check> = Vec::new();
    let suites = [
        (2, "interval optimum", "interval", Some(10)),
        (3, "two-interval quadratic", "two-interval", None),
        (4, "disk centering", "disk", Some(120)),
        (5, "circle cap", "circle-cap", None),
        (7, "cross formula", "cross", None),
        (8, "n=4 closed form", "interval4", Some(120)),
    ];
    let mut pending_annulus = true;
    for (n, title, suite, limit) in suites {
        if n == 7 && pending_annulus {
            pending_annulus = false;
            match annulus() {
                Ok((v, checks)) => {
                    kkt.extend(checks);
                    emit(6, "annulus symmetry", Ok(v));
                }
                Err(e) => emit(6, "annulus symmetry", Err(e)),
            }
        }
        let start = Instant::now();
        let result = verify::run_suite(suite).map(|checks| {
            let elapsed = start.elapsed();
            let (k, rest): (Vec<Check>, Vec<Check>) = checks.into_iter().partition(|c| c.check == "kkt_violating_mass");
            kkt.extend(k);
            let refs: Vec<&Check> = rest.iter().collect();
            from_checks(&refs, elapsed, limit.map(Duration::from_secs))
        });
        emit(n, title, result);
    }

    let refs: Vec<&Check> = kkt.iter().collect();
    emit(
        9,
        "KKT residual",
        Ok(Verdict::of(refs.len() >= 7 && refs.iter().all(|c| c.pass), describe(&refs))),
    );
    emit(10, "concentration as rho_plus grows", concentration());
    emit(11, "discrete to continuous bridge", bridge());
    emit(12, "ellipse is not a ball", ellipse());
    emit(13, "determinism", determinism());

    if all_pass {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("some acceptance criteria failed");
        ExitCode::FAILURE
    }
}
