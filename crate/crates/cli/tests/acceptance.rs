//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dfgen_core::experiment::{
    best_epsilons, compare, epsilon_sweep, is_require_heavy, load_corpus, parse_sweep, BenchConfig,
    RepOutcome,
};
use dfgen_core::frontend::ParseOptions;
use dfgen_core::ga::{
    crossover, decode, encode, fitness_value, mutate, random_chromosome, select_indices,
};
use dfgen_core::{Approach, FitnessMode, IntType, Program};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn dfgen(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dfgen"))
        .args(args)
        .output()
        .expect("dfgen runs")
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn golden_tables() -> Check {
    let path = corpus_dir().join("safe_add.sol");
    let out = dfgen(&["analyze", path.to_str().unwrap()]);
    ensure(out.status.success(), String::from_utf8_lossy(&out.stderr))?;
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;

    let vars: Vec<(String, u64, u64)> = v["variables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["name"].as_str().unwrap().to_string(),
                r["type_flag"].as_u64().unwrap(),
                r["width_bits"].as_u64().unwrap(),
            )
        })
        .collect();
    let want_vars: Vec<(String, u64, u64)> = [
        ("a1", 0, 16),
        ("b1", 0, 16),
        ("a2", 0, 32),
        ("b2", 0, 32),
        ("sum1", 0, 16),
    ]
    .into_iter()
    .map(|(n, t, w)| (n.to_string(), t, w))
    .collect();
    ensure(vars == want_vars, format!("variables {vars:?}"))?;

    let reqs: Vec<(String, u64, String)> = v["requires"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["function"].as_str().unwrap().to_string(),
                r["node"].as_u64().unwrap(),
                r["condition_text"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    ensure(
        reqs == [(
            "add".to_string(),
            8,
            "require(a2 + b2 <= 65535)".to_string(),
        )],
        format!("requires {reqs:?}"),
    )?;

    let pairs: BTreeSet<(String, u64, u64, bool)> = v["dups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| {
            (
                d["variable"].as_str().unwrap().to_string(),
                d["def_node"].as_u64().unwrap(),
                d["use_node"].as_u64().unwrap(),
                d["is_require_related"].as_bool().unwrap(),
            )
        })
        .collect();
    let want: BTreeSet<(String, u64, u64, bool)> = [
        ("a1", 1, 2, false),
        ("a1", 1, 4, false),
        ("a1", 1, 5, false),
        ("a1", 1, 9, true),
        ("b1", 1, 3, false),
        ("b1", 1, 4, false),
        ("b1", 1, 5, false),
        ("b1", 1, 9, true),
        ("a2", 2, 8, true),
        ("b2", 3, 8, true),
    ]
    .into_iter()
    .map(|(n, d, u, r)| (n.to_string(), d, u, r))
    .collect();
    ensure(
        pairs == want && v["dups"].as_array().unwrap().len() == 10,
        format!("pairs {pairs:?}"),
    )?;
    ensure(v["n"] == 10 && v["m"] == 4, "totals")?;
    Ok("5 variables, 1 require at node 8, 10 pairs with 4 require-related".into())
}

/// Correctly rounded value of ((n - m) + (1 + p/q) m) / total.
fn exact_fitness(p: u64, q: u64, n: u64, m: u64, total: u64) -> f64 {
    ((q * (n - m) + (q + p) * m) as f64) / ((q * total) as f64)
}

fn fitness_formula() -> Check {
    let got = fitness_value(FitnessMode::Adfga, 0.45, 10, 4, 10).map_err(|e| e.to_string())?;
    let want = exact_fitness(45, 100, 10, 4, 10);
    ensure(want == 1.18, "rational oracle")?;
    ensure(
        (got - want).abs() <= f64::EPSILON * want,
        format!("got {got}, want {want}"),
    )?;

    for &(p, q) in &[(1u64, 2u64), (1, 4), (3, 8)] {
        let eps = p as f64 / q as f64;
        for total in 1..=12u64 {
            for n in 0..=total {
                for m in 0..=n {
                    let got = fitness_value(
                        FitnessMode::Adfga,
                        eps,
                        n as usize,
                        m as usize,
                        total as usize,
                    )
                    .unwrap();
                    let want = exact_fitness(p, q, n, m, total);
                    ensure(
                        got == want,
                        format!("eps {eps} n {n} m {m} N {total}: {got} vs {want}"),
                    )?;
                }
            }
        }
    }
    for total in 1..=40usize {
        for n in 0..=total {
            let classic = fitness_value(FitnessMode::Classic, 0.45, n, n / 2, total).unwrap();
            ensure(classic == n as f64 / total as f64, "classic value")?;
            for m in 0..=n {
                let zero_eps = fitness_value(FitnessMode::Adfga, 0.0, n, m, total).unwrap();
                ensure(
                    zero_eps.to_bits() == classic.to_bits(),
                    format!("eps 0: n {n} m {m} N {total}"),
                )?;
            }
            for eps in [0.1, 0.45, 0.9] {
                let no_r = fitness_value(FitnessMode::Adfga, eps, n, 0, total).unwrap();
                ensure(
                    no_r.to_bits() == classic.to_bits(),
                    format!("m 0: eps {eps} n {n} N {total}"),
                )?;
            }
        }
    }
    ensure(
        fitness_value(FitnessMode::Adfga, 0.45, 0, 0, 0).is_err(),
        "empty pair set must be rejected",
    )?;
    Ok(format!(
        "fit(10,10,4,0.45) = {got}; dyadic epsilons exact; eps 0 and m 0 reduce bit-for-bit"
    ))
}

fn coverage_oracles() -> Check {
    let mut inputs = 0;
    let mut infeasible = 0;
    for name in oracles::NARROW {
        let ex = oracles::exhaust(name);
        inputs += ex.per_input.len();
        infeasible += oracles::infeasible_pairs(&ex, name).len();
    }
    Ok(format!(
        "{} programs, {inputs} inputs, {infeasible} statically feasible but unexecutable pairs",
        oracles::NARROW.len()
    ))
}

fn random_signature(rng: &mut ChaCha8Rng) -> Vec<IntType> {
    (0..rng.gen_range(1..=4))
        .map(|_| IntType::new(rng.gen(), 8 * rng.gen_range(1..=32)).unwrap())
        .collect()
}

fn within_3_sigma(count: f64, trials: f64, p: f64) -> bool {
    (count - trials * p).abs() <= 3.0 * (trials * p * (1.0 - p)).sqrt()
}

fn operator_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let sig = random_signature(&mut rng);
        let ch = random_chromosome(&sig, &mut rng);
        let tc = decode(&ch, &sig).map_err(|e| e.to_string())?;
        ensure(encode(&tc) == ch, format!("round trip {ch}"))?;
        let other = random_chromosome(&sig, &mut rng);
        let (a, b) = crossover(&ch, &other, &mut rng).map_err(|e| e.to_string())?;
        let p_m = rng.gen::<f64>();
        for child in [
            &a,
            &b,
            &mutate(&a, p_m, &mut rng),
            &mutate(&ch, 1.0, &mut rng),
        ] {
            ensure(child.type_bits() == ch.type_bits(), "type bits changed")?;
        }
    }

    let sig = [IntType::uint(64)];
    let base = random_chromosome(&sig, &mut rng);
    let trials = 10_000;
    let flips: usize = (0..trials)
        .map(|_| {
            let m = mutate(&base, 0.01, &mut rng);
            m.subs[0]
                .value_bits
                .iter()
                .zip(&base.subs[0].value_bits)
                .filter(|(x, y)| x != y)
                .count()
        })
        .sum();
    ensure(
        within_3_sigma(flips as f64, (trials * 64) as f64, 0.01),
        format!("{flips} flips"),
    )?;

    let fits = [0.2, 1.0, 1.18, 0.5, 0.0, 2.4];
    let total: f64 = fits.iter().sum();
    let draws = 10_000;
    let mut counts = vec![0usize; fits.len()];
    for i in select_indices(&fits, draws, &mut rng) {
        counts[i] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        ensure(
            within_3_sigma(c as f64, draws as f64, fits[i] / total),
            format!("roulette {counts:?}"),
        )?;
    }
    Ok(format!(
        "10^4 round trips; mean flips {:.4} per 64 bits; roulette {counts:?}",
        flips as f64 / trials as f64
    ))
}

fn require_heavy() -> Result<Vec<Program>, String> {
    let (programs, failures) =
        load_corpus(&corpus_dir(), ParseOptions::default()).map_err(|e| e.to_string())?;
    ensure(failures.is_empty(), format!("{failures:?}"))?;
    let subset: Vec<Program> = programs.into_iter().filter(is_require_heavy).collect();
    ensure(subset.len() >= 3, "require-heavy subset too small")?;
    Ok(subset)
}

fn comparative_effectiveness() -> Check {
    let cfg = BenchConfig::default();
    let mut rows: Vec<RepOutcome> = Vec::new();
    for p in &require_heavy()? {
        rows.extend(compare(p, &cfg).map_err(|e| e.to_string())?);
    }
    let pooled = |a: Approach| {
        let rs: Vec<&RepOutcome> = rows.iter().filter(|r| r.approach == a).collect();
        let k = rs.len() as f64;
        (
            rs.iter().map(|r| r.n_coverage).sum::<f64>() / k,
            rs.iter().map(|r| r.m_coverage).sum::<f64>() / k,
        )
    };
    let (adf, classic, rt) = (
        pooled(Approach::AdfGa),
        pooled(Approach::GaClassic),
        pooled(Approach::Random),
    );
    let detail = format!(
        "N_dup {:.2}/{:.2}/{:.2}%, R_dup {:.2}/{:.2}/{:.2}% (ADF-GA/GA-classic/RT, {} seeds)",
        100.0 * adf.0,
        100.0 * classic.0,
        100.0 * rt.0,
        100.0 * adf.1,
        100.0 * classic.1,
        100.0 * rt.1,
        cfg.reps
    );
    let ok = adf.0 >= classic.0
        && adf.1 >= classic.1
        && classic.0 > rt.0
        && classic.1 > rt.1
        && adf.0 > rt.0
        && adf.1 > rt.1;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn epsilon_sweep_shape() -> Check {
    let cfg = BenchConfig::default();
    let eps = parse_sweep("0.1:0.9:0.1").map_err(|e| e.to_string())?;
    let programs = require_heavy()?;
    let mut hits = 0;
    let mut parts = Vec::new();
    for p in &programs {
        let rows = epsilon_sweep(p, &eps, &cfg).map_err(|e| e.to_string())?;
        let best = best_epsilons(&rows);
        if best.iter().any(|&e| (0.3 - 1e-9..=0.6 + 1e-9).contains(&e)) {
            hits += 1;
        }
        parts.push(format!("{} {best:?}", p.name));
    }
    let detail = format!(
        "best eps in [0.3, 0.6] for {hits}/{}: {}",
        programs.len(),
        parts.join(", ")
    );
    if 2 * hits >= programs.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn snapshot(args: &[&str], out_dir: Option<&Path>) -> Result<Vec<Vec<u8>>, String> {
    let o = dfgen(args);
    ensure(
        o.status.success(),
        format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)),
    )?;
    let mut bytes = vec![o.stdout];
    if let Some(dir) = out_dir {
        let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        names.sort();
        for n in names {
            bytes.push(std::fs::read(n).unwrap());
        }
    }
    Ok(bytes)
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("dfgen-acceptance-{}", std::process::id()));
    let corpus = corpus_dir();
    let trade = corpus.join("trade.sol");
    let trade = trade.to_str().unwrap();
    let mut commands = 0;
    let mut bytes = 0;
    let mut run =
        |label: &str, build: &dyn Fn(&Path) -> Vec<String>, has_dir: bool| -> Result<(), String> {
            let mut snaps = Vec::new();
            for i in 0..2 {
                let d = dir.join(format!("{label}-{i}"));
                std::fs::create_dir_all(&d).unwrap();
                let args = build(&d);
                let args: Vec<&str> = args.iter().map(String::as_str).collect();
                snaps.push(snapshot(&args, has_dir.then_some(d.as_path()))?);
            }
            ensure(
                snaps[0] == snaps[1],
                format!("{label} differs between runs"),
            )?;
            commands += 1;
            bytes += snaps[0].iter().map(Vec::len).sum::<usize>();
            Ok(())
        };
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    run(
        "analyze",
        &|d| {
            s(&[
                "analyze",
                trade,
                "--emit-cfg",
                d.join("cfg.dot").to_str().unwrap(),
            ])
        },
        true,
    )?;
    for fitness in ["adfga", "classic", "random"] {
        run(
            fitness,
            &|d| {
                s(&[
                    "generate",
                    trade,
                    "--seed",
                    "11",
                    "--fitness",
                    fitness,
                    "--out",
                    d.join("report.json").to_str().unwrap(),
                    "--trace",
                    d.join("trace.jsonl").to_str().unwrap(),
                ])
            },
            true,
        )?;
    }
    run(
        "bench",
        &|d| {
            s(&[
                "bench",
                corpus.to_str().unwrap(),
                "--reps",
                "3",
                "--max-gen",
                "40",
                "--epsilon-sweep",
                "0.2:0.6:0.2",
                "--out",
                d.to_str().unwrap(),
            ])
        },
        true,
    )?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!(
        "{commands} commands run twice, {bytes} bytes identical"
    ))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, Duration, fn() -> Check);
    let criteria: [Criterion; 7] = [
        ("golden tables", Duration::from_secs(1), golden_tables),
        ("fitness formula", Duration::from_secs(1), fitness_formula),
        (
            "coverage oracles",
            Duration::from_secs(60),
            coverage_oracles,
        ),
        (
            "operator properties",
            Duration::from_secs(30),
            operator_properties,
        ),
        (
            "comparative effectiveness",
            Duration::from_secs(300),
            comparative_effectiveness,
        ),
        (
            "epsilon sweep shape",
            Duration::from_secs(300),
            epsilon_sweep_shape,
        ),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(payload) => Err(payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let elapsed = start.elapsed();
        let result = match result {
            Ok(d) if elapsed > *limit => Err(format!("{d}; took {elapsed:.2?}, limit {limit:?}")),
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if result.is_err() {
            failed += 1;
        }
        println!("{tag} {}. {name} ({elapsed:.2?}): {detail}", i + 1);
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
