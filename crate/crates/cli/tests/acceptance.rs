//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plafem_core::edges::edge_table;
use plafem_core::eigen::torsion;
use plafem_core::estimator::{dorfler_mark, Estimator, IndicatorSet};
use plafem_core::fem::{assemble_rhs, assemble_stiffness, solve_dirichlet};
use plafem_core::io::read_convergence_csv;
use plafem_core::plap::{dc_solve, resolvent, DcInit, DcOptions};
use plafem_core::quadrature::DEGREE5;
use plafem_core::{
    generate_disk, generate_lshape, generate_unit_square, run_afem, AfemConfig, Domain, LoopRecord, Mesh, P1Function,
    Source,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Runs the CLI `run` subcommand and reads back the convergence log.
fn cli_run(args: &str) -> Result<(Vec<LoopRecord>, Duration), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let argv: Vec<String> = ["plafem", "run"]
        .into_iter()
        .map(String::from)
        .chain(args.split_whitespace().map(String::from))
        .chain(["--out".to_string(), dir.path().display().to_string()])
        .collect();
    let t0 = Instant::now();
    let code = plafem_cli::main_with(argv, &mut std::io::sink());
    let elapsed = t0.elapsed();
    if code != 0 {
        return Err(format!("`plafem run {args}` exited with {code}"));
    }
    let rows = read_convergence_csv(&dir.path().join("convergence.csv")).map_err(|e| e.to_string())?;
    if rows.is_empty() {
        return Err("empty convergence log".into());
    }
    Ok((rows, elapsed))
}

fn eigen_run(args: &str, reference: f64, rel_tol: f64, min_vertices: usize, limit: Duration) -> Outcome {
    let (rows, elapsed) = cli_run(args)?;
    let last = rows.last().unwrap();
    let rel = (last.mu - reference).abs() / reference;
    check(
        rel <= rel_tol && last.vertices >= min_vertices && elapsed < limit,
        format!(
            "mu = {:.6} (rel err {:.2e}), {} vertices, {} loops, {:.1}s",
            last.mu,
            rel,
            last.vertices,
            rows.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_1() -> Outcome {
    let (rows, elapsed) = cli_run("--domain square --p 2 --theta 0.6 --eps-k 1e-4 --max-loops 12 --resolution 13")?;
    let mu = rows.last().unwrap().mu;
    check(
        (19.7392..=19.80).contains(&mu) && elapsed < Duration::from_secs(180),
        format!("mu = {mu:.6} in [19.7392, 19.80], {} loops, {:.1}s", rows.len(), elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    eigen_run("--domain disk --p 2 --resolution 4", 5.78319, 5e-3, 0, Duration::from_secs(180))
}

fn criterion_3() -> Outcome {
    eigen_run("--domain square --p 1.5 --resolution 8", 10.0723, 1e-2, 0, Duration::from_secs(600))
}

fn criterion_4() -> Outcome {
    eigen_run(
        "--domain lshape --p 2 --resolution 4 --eps-k 1e-5 --max-loops 60",
        9.64097,
        1e-2,
        50_000,
        Duration::from_secs(600),
    )
}

fn criterion_5() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (domain, resolution) in [(Domain::Square, 8), (Domain::LShape, 4)] {
        for p in [1.5, 2.0, 3.0] {
            let cfg = AfemConfig { domain: domain.clone(), resolution, p, ..AfemConfig::default() };
            let log = run_afem(&cfg).map_err(|e| format!("{} p={p}: {e}", domain.name()))?.log;
            let worst = log.rows.windows(2).map(|w| w[1].mu - w[0].mu).fold(f64::NEG_INFINITY, f64::max);
            ok &= worst <= 1e-10;
            details.push(format!("{} p={p}: {} loops, max increase {worst:.1e}", domain.name(), log.rows.len()));
        }
    }
    check(ok, details.join("; "))
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let meshes = [generate_unit_square(16), generate_disk(5)];
    let f = |x: [f64; 2]| 1.0 + x[0] - 0.5 * x[1] * x[1];
    let mut worst: f64 = 0.0;
    for mesh in &meshes {
        let oracle = solve_dirichlet(
            &assemble_stiffness(mesh).map_err(|e| e.to_string())?,
            &assemble_rhs(mesh, &Source::Function(&f), None).map_err(|e| e.to_string())?,
            mesh.boundary(),
        )
        .map_err(|e| e.to_string())?;
        for seed in 1..=5 {
            for max_iter in [2, 500] {
                let opts = DcOptions { eps_n: 1e-5, max_iter };
                let (u, _) = dc_solve(mesh, &Source::Function(&f), 2.0, &opts, &DcInit::Random { seed })
                    .map_err(|e| e.to_string())?;
                let diff = u.values().iter().zip(oracle.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(diff);
            }
        }
    }
    let elapsed = t0.elapsed();
    check(
        worst <= 1e-8 && elapsed < Duration::from_secs(10),
        format!("max sup-norm difference {worst:.2e} over 5 seeds, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_residual: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..10_000 {
        let p = 1.05 + (40.0 - 1.05) * (1.0 - rng.random::<f64>());
        let s = 1e6 * rng.random::<f64>();
        let r = resolvent(s, p).map_err(|e| e.to_string())?;
        let residual = (r.powf(p - 1.0) + r - s).abs() / s.max(1.0);
        worst_residual = worst_residual.max(residual);
        let s2 = s + (1e6 - s) * rng.random::<f64>();
        monotone &= resolvent(s2, p).map_err(|e| e.to_string())? >= r;
    }
    let elapsed = t0.elapsed();
    check(
        worst_residual <= 1e-13 && monotone && elapsed < Duration::from_secs(5),
        format!("max scaled residual {worst_residual:.2e}, monotone {monotone}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mesh = generate_lshape(3).refine(&[0, 5, 17]).map_err(|e| e.to_string())?;
    let edges = edge_table(&mesh).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let u = P1Function::from_values(
            (0..mesh.num_vertices())
                .map(|v| if mesh.is_boundary(v) { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect(),
        );
        let p = [1.5, 2.0, 3.0, 4.0][i % 4];
        let q = p / (p - 1.0);
        let mu = rng.random_range(0.5..30.0);
        let est = Estimator::new(&mesh, &edges, &u, p).map_err(|e| e.to_string())?;
        for t in 0..mesh.num_triangles() {
            let got = est.residual_term(&u, mu, t);
            // Quadrature of |mu |u|^{p-2} u|^q, evaluated pointwise.
            let tri = mesh.triangles()[t];
            let direct: f64 = DEGREE5
                .iter()
                .map(|(b, w)| {
                    let val = u.eval_bary(&tri, b);
                    let r = if val == 0.0 { 0.0 } else { mu * val.abs().powf(p - 2.0) * val };
                    w * r.abs().powf(q)
                })
                .sum::<f64>()
                * mesh.area(t);
            let want = mesh.h_t(t).powf(q) * direct;
            if want > 0.0 {
                worst = worst.max((got - want).abs() / want);
            } else {
                worst = worst.max(got.abs());
            }
        }
    }
    check(worst <= 1e-8, format!("max relative deviation {worst:.2e} over 100 functions"))
}

/// Smallest number of entries whose sum reaches `target`, by exhaustive search.
fn brute_force_min(eta: &[f64], target: f64) -> usize {
    let n = eta.len();
    (0u32..1 << n)
        .filter(|mask| (0..n).filter(|i| mask & (1 << i) != 0).map(|i| eta[i]).sum::<f64>() >= target)
        .map(|mask| mask.count_ones() as usize)
        .min()
        .unwrap_or(n)
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut brute_checked = 0;
    for trial in 0..1000 {
        let n = if trial % 2 == 0 { rng.random_range(1..=12) } else { rng.random_range(1..=200) };
        // Dyadic values keep every partial sum exact.
        let eta: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { f64::from(rng.random_range(0..64u32)) / 16.0 })
            .collect();
        let theta = 1.0 - rng.random::<f64>();
        let q = [1.2, 1.5, 2.0, 3.0][trial % 4];
        let ind = IndicatorSet::from_values(eta.clone(), q, 1.0);
        let marked = dorfler_mark(&ind, theta).map_err(|e| e.to_string())?;
        let total: f64 = eta.iter().sum();
        let sum: f64 = marked.iter().map(|&t| eta[t]).sum();
        let target = theta.powf(q) * total;
        if sum < target || marked.is_empty() {
            return Err(format!("trial {trial}: bulk property fails ({sum} < {target})"));
        }
        let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !marked.iter().any(|&t| eta[t] == max) || !marked.contains(&ind.argmax_element) {
            return Err(format!("trial {trial}: maximal element not marked"));
        }
        if !marked.windows(2).all(|w| w[0] < w[1]) {
            return Err(format!("trial {trial}: marked set not sorted and unique"));
        }
        if n <= 12 && total > 0.0 {
            let best = brute_force_min(&eta, target);
            if marked.len() != best {
                return Err(format!("trial {trial}: greedy marked {} but {best} suffice", marked.len()));
            }
            brute_checked += 1;
        }
    }
    Ok(format!("1000 vectors, minimality verified on {brute_checked}"))
}

/// `u(1/2, 1/2)` for `-Delta u = 1` on the unit square from the double sine series.
fn square_torsion_center() -> f64 {
    let mut sum = 0.0;
    for m in (1..4000).step_by(2) {
        for n in (1..4000).step_by(2) {
            let sign = if ((m + n) / 2 - 1) % 2 == 0 { 1.0 } else { -1.0 };
            let (m, n) = (m as f64, n as f64);
            sum += sign * 16.0 / (PI.powi(4) * m * n * (m * m + n * n));
        }
    }
    sum
}

fn center_value(mesh: &Mesh, u: &P1Function, c: [f64; 2]) -> Option<f64> {
    mesh.vertices().iter().position(|v| (v[0] - c[0]).abs() < 1e-14 && (v[1] - c[1]).abs() < 1e-14).map(|i| u.values()[i])
}

fn criterion_10() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    let disk = generate_disk(8);
    for (p, tol) in [(2.0, 0.01), (1.5, 0.02), (3.0, 0.02)] {
        let u = torsion(&disk, p, 1e-5, 42).map_err(|e| e.to_string())?;
        let exact = (p - 1.0) / p * 0.5f64.powf(1.0 / (p - 1.0));
        let value = if p == 2.0 { u.sup_norm() } else { center_value(&disk, &u, [0.0, 0.0]).ok_or("no centre vertex")? };
        let rel = (value - exact).abs() / exact;
        ok &= rel <= tol;
        details.push(format!("disk p={p}: {value:.5} vs {exact:.5} ({rel:.1e})"));
    }
    let oracle = square_torsion_center();
    let square = generate_unit_square(64);
    let u = torsion(&square, 2.0, 1e-5, 42).map_err(|e| e.to_string())?;
    let rel = (u.sup_norm() - oracle).abs() / oracle;
    ok &= rel <= 0.01 && (oracle - 0.0736713).abs() < 1e-6;
    details.push(format!("square p=2: {:.6} vs {oracle:.7} ({rel:.1e})", u.sup_norm()));
    check(ok, details.join("; "))
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let initial = generate_lshape(2);
    let area = initial.total_area();
    let angle0 = initial.min_angle();
    let mut mesh = initial.clone();
    let mut min_angle = angle0;
    let mut worst_area: f64 = 0.0;
    let mut restarts = 0;
    for round in 0..10_000 {
        if mesh.num_triangles() > 3000 {
            mesh = initial.clone();
            restarts += 1;
        }
        let k = rng.random_range(1..=4);
        let marked: Vec<usize> = (0..k).map(|_| rng.random_range(0..mesh.num_triangles())).collect();
        mesh = mesh.refine(&marked).map_err(|e| format!("round {round}: {e}"))?;
        edge_table(&mesh).map_err(|e| format!("round {round}: {e}"))?;
        worst_area = worst_area.max((mesh.total_area() - area).abs() / area);
        min_angle = min_angle.min(mesh.min_angle());
    }
    check(
        worst_area <= 1e-12 && min_angle >= angle0 - 1e-12,
        format!(
            "conforming after 10000 rounds ({restarts} restarts), min angle {:.4} deg (initial {:.4}), area err {worst_area:.1e}",
            min_angle.to_degrees(),
            angle0.to_degrees()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("unit square p=2", criterion_1),
        ("unit disk p=2", criterion_2),
        ("unit square p=1.5", criterion_3),
        ("L-shape p=2", criterion_4),
        ("monotone eigenvalues", criterion_5),
        ("p=2 reduces to Poisson", criterion_6),
        ("resolvent properties", criterion_7),
        ("estimator identity", criterion_8),
        ("bulk marking", criterion_9),
        ("torsion values", criterion_10),
        ("mesh refinement", criterion_11),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if filter.as_deref().is_some_and(|f| f != n.to_string()) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
