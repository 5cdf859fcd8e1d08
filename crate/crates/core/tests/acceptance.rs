//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use num_rational::Ratio;
use qclust::cluster::{
    choose_truncation_order, estimate, truncated_expansion, ursell_bruteforce, ursell_fast,
    ClusterExpansion, IncompatibilityGraph,
};
use qclust::model::{convergence_radius, preset, validate_beta, GraphSpec, PresetKind, PresetParams};
use qclust::oracle::{exact_partition, relative_error, ExactSpectrum};
use qclust::polymer::{
    enumerate_connected_edge_sets, enumerate_polymers, polymer_weight, polymer_weight_oracle,
};
use qclust::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{oracle_suite, random_degree3_graph, random_model};

struct Outcome {
    pass: bool,
    detail: String,
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 oracle equivalence, real beta", oracle_equivalence),
        ("2 oracle equivalence, complex beta", complex_region),
        ("3 single-edge closed form", closed_form),
        ("4 Ursell fast vs brute force", ursell_agreement),
        ("5 weight formula vs permutation sum", weight_equivalence),
        ("6 connected subgraph count bound", subgraph_bound),
        ("7 tail consistency up to m = 12", tail_consistency),
        ("8 determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({}; {:.1} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

fn suite_beta(model: &qclust::model::SpinModel) -> f64 {
    convergence_radius(model.max_degree())
}

fn oracle_equivalence() -> Outcome {
    let suite = oracle_suite();
    let eps = 1e-3;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for entry in &suite {
        let beta = Complex::new(suite_beta(&entry.model), 0.0);
        let approx = estimate(&entry.model, beta, eps, false).unwrap();
        let exact = exact_partition(&entry.model, beta).unwrap();
        let err = relative_error(approx.t_m, &exact);
        worst = worst.max(err);
        if !(err <= eps) {
            failures.push(format!("{}: {err:e}", entry.label));
        }
    }
    Outcome {
        pass: failures.is_empty() && suite.len() >= 50,
        detail: format!(
            "{} models, max relative error {worst:.3e} vs epsilon {eps:e}{}",
            suite.len(),
            fail_list(&failures)
        ),
    }
}

fn complex_region() -> Outcome {
    let suite = oracle_suite();
    let eps = 1e-3;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut runs = 0;
    for entry in &suite {
        let model = &entry.model;
        let m = choose_truncation_order(model.num_vertices(), eps).unwrap();
        let expansion = ClusterExpansion::build(model, m).unwrap();
        let spectrum = ExactSpectrum::new(model).unwrap();
        for theta in [PI / 6.0, PI / 2.0, PI] {
            let beta = Complex::from_polar(suite_beta(model), theta);
            assert!(validate_beta(model, beta).unwrap().in_region);
            let approx = expansion.evaluate(beta);
            let err = relative_error(approx.t_m, &spectrum.partition(beta).unwrap());
            worst = worst.max(err);
            runs += 1;
            if !(err <= eps) {
                failures.push(format!("{} theta {theta:.3}: {err:e}", entry.label));
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{runs} runs, max relative error {worst:.3e} vs epsilon {eps:e}{}",
            fail_list(&failures)
        ),
    }
}

fn closed_form() -> Outcome {
    let model = preset(
        PresetKind::Tfim,
        GraphSpec::Path(2),
        &PresetParams::new(0).with("h", 0.0),
    )
    .unwrap();
    let b = (-4.0f64).exp();
    let beta = Complex::new(b, 0.0);
    let exact = b.cosh().ln();
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for m in 2..=12 {
        let t = truncated_expansion(&model, beta, m).unwrap().t_m;
        let err = (t - exact).norm();
        let bound = 2.0 * (-(m as f64)).exp();
        worst_ratio = worst_ratio.max(err / bound);
        if !(err <= bound) {
            failures.push(format!("m={m}: {err:e} > {bound:e}"));
        }
    }
    let t3 = truncated_expansion(&model, beta, 3).unwrap().t_m;
    let t3_err = (t3 - b * b / 2.0).norm();
    if !(t3_err <= 1e-12) {
        failures.push(format!("t_3 off by {t3_err:e}"));
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "m = 2..12, max error / bound {worst_ratio:.3e}, |t_3 - beta^2/2| = {t3_err:.1e}{}",
            fail_list(&failures)
        ),
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// One representative per isomorphism class of connected graphs on `n`
/// vertices.
fn connected_graph_classes(n: usize) -> Vec<IncompatibilityGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let index = |i: usize, j: usize| pairs.iter().position(|&p| p == (i.min(j), i.max(j))).unwrap();
    let perms = permutations(n);
    let images: Vec<Vec<usize>> = perms
        .iter()
        .map(|p| pairs.iter().map(|&(i, j)| index(p[i], p[j])).collect())
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = (0..pairs.len())
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| pairs[k])
            .collect();
        let g = IncompatibilityGraph::from_edges(n, &edges);
        if !g.is_connected() {
            continue;
        }
        let canonical = images
            .iter()
            .map(|img| {
                (0..pairs.len())
                    .filter(|&k| mask & (1 << k) != 0)
                    .fold(0u32, |acc, k| acc | (1 << img[k]))
            })
            .min()
            .unwrap();
        if seen.insert(canonical) {
            out.push(g);
        }
    }
    out
}

fn ursell_agreement() -> Outcome {
    let mut failures = Vec::new();
    let mut classes = 0;
    for n in 1..=6 {
        for g in connected_graph_classes(n) {
            classes += 1;
            if ursell_fast(&g).unwrap() != ursell_bruteforce(&g).unwrap() {
                failures.push(format!("{:?}", g.edges()));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut random = 0;
    while random < 200 {
        let n = rng.gen_range(7..=8);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| rng.gen_bool(0.4))
            .collect();
        let g = IncompatibilityGraph::from_edges(n, &edges);
        if !g.is_connected() || edges.len() > 20 {
            continue;
        }
        random += 1;
        if ursell_fast(&g).unwrap() != ursell_bruteforce(&g).unwrap() {
            failures.push(format!("{edges:?}"));
        }
    }
    let spot = |n: usize, edges: &[(usize, usize)]| {
        ursell_fast(&IncompatibilityGraph::from_edges(n, edges)).unwrap().to_ratio()
    };
    let spots = [
        ("K2", spot(2, &[(0, 1)]), Ratio::new(-1, 2)),
        ("K3", spot(3, &[(0, 1), (1, 2), (0, 2)]), Ratio::new(1, 3)),
        ("P3", spot(3, &[(0, 1), (1, 2)]), Ratio::new(1, 6)),
    ];
    for (name, got, want) in spots {
        if got != want {
            failures.push(format!("{name}: {got} != {want}"));
        }
    }
    Outcome {
        pass: failures.is_empty() && classes == 143,
        detail: format!(
            "{classes} connected classes on <= 6 vertices, {random} random graphs on 7-8 vertices, \
             spot values K2 K3 P3{}",
            fail_list(&failures)
        ),
    }
}

fn weight_equivalence() -> Outcome {
    let graphs: Vec<(usize, Vec<(usize, usize)>)> = vec![
        (3, vec![(0, 1), (1, 2)]),
        (3, vec![(0, 1), (1, 2), (0, 2)]),
        (4, vec![(0, 1), (1, 2), (2, 3)]),
        (4, vec![(0, 1), (0, 2), (0, 3)]),
        (4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]),
    ];
    let beta = Complex::new(1.0, 0.0);
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (k, (n, edges)) in graphs.iter().cycle().take(20).enumerate() {
        let model = random_model(*n, edges, 500 + k as u64);
        for gamma in enumerate_polymers(&model, 6) {
            let w = polymer_weight(&gamma, &model, beta).unwrap();
            let o = polymer_weight_oracle(&gamma, &model, beta).unwrap();
            let diff = (w - o).norm();
            let scale = w.norm().max(o.norm());
            let ok = if scale < 1e-8 { diff <= 1e-12 } else { diff <= 1e-10 * scale };
            if scale >= 1e-8 {
                worst = worst.max(diff / scale);
            }
            checked += 1;
            if !ok {
                failures.push(format!("model {k} polymer {:?}: {w} vs {o}", gamma.edge_sequence()));
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{checked} polymers over 20 models, max relative difference {worst:.2e}{}",
            fail_list(&failures)
        ),
    }
}

fn subgraph_bound() -> Outcome {
    let graphs = [
        "path:10",
        "cycle:10",
        "grid:3x5",
        "grid:4x4",
        "random_regular:10:3",
        "random_regular:12:3",
        "random_regular:10:4",
        "random_regular:12:4",
    ];
    let mut failures = Vec::new();
    let mut tightest: f64 = 0.0;
    let mut instances = 0;
    for spec in graphs {
        for seed in 0..3 {
            let graph: GraphSpec = spec.parse().unwrap();
            let model = preset(PresetKind::Tfim, graph, &PresetParams::new(seed)).unwrap();
            let delta = model.max_degree();
            if delta > 4 {
                continue;
            }
            instances += 1;
            let sets = enumerate_connected_edge_sets(&model, 6);
            for x in 0..model.num_vertices() {
                let mut counts = [0usize; 7];
                for s in &sets {
                    if s.iter().any(|&e| model.edges()[e].touches(x)) {
                        counts[s.len()] += 1;
                    }
                }
                for (n, &c) in counts.iter().enumerate().skip(1) {
                    let bound = (std::f64::consts::E * delta as f64).powi(n as i32) / 2.0;
                    tightest = tightest.max(c as f64 / bound);
                    if c as f64 > bound {
                        failures.push(format!("{spec} seed {seed} vertex {x} n={n}: {c} > {bound:.1}"));
                    }
                }
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{instances} preset graphs, max count / bound {tightest:.3}{}",
            fail_list(&failures)
        ),
    }
}

fn tail_consistency() -> Outcome {
    let suite = oracle_suite();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for entry in &suite {
        let model = &entry.model;
        let beta = Complex::new(suite_beta(model), 0.0);
        let expansion = ClusterExpansion::build(model, 12).unwrap();
        let t12 = expansion.evaluate(beta).t_m;
        let v = model.num_vertices() as f64;
        for m in 3..=11 {
            let t = expansion.evaluate_at_order(beta, m).t_m;
            let bound = v * (-(m as f64)).exp() + v * (-12.0f64).exp();
            let diff = (t - t12).norm();
            worst = worst.max(diff / bound);
            if !(diff <= bound) {
                failures.push(format!("{} m={m}: {diff:e} > {bound:e}", entry.label));
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{} models, m = 3..11, max difference / bound {worst:.3e}{}",
            suite.len(),
            fail_list(&failures)
        ),
    }
}

fn determinism() -> Outcome {
    let beta = format!("{}", convergence_radius(3) * 0.9);
    let edges = random_degree3_graph(8, 2, 77);
    let dir = std::env::temp_dir().join(format!("qclust-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let model_path = dir.join("model.json");
    std::fs::write(&model_path, qclust::model::emit_model(&random_model(8, &edges, 77))).unwrap();

    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_qclust"))
            .args(["compare", "--model"])
            .arg(&model_path)
            .args(["--beta", &beta, "--epsilon", "1e-3", "--threads", threads])
            .output()
            .unwrap();
        (out.status.code(), out.stdout)
    };
    let (code1, doc1) = run("1");
    let (code8, doc8) = run("8");
    let preset_run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_qclust"))
            .args([
                "compare", "--preset", "random_hermitian", "--graph", "cycle:6", "--seed", "9",
                "--beta", "0.005,0.004", "--threads", threads,
            ])
            .output()
            .unwrap()
            .stdout
    };
    let same_preset = preset_run("1") == preset_run("8");
    let _ = std::fs::remove_dir_all(&dir);
    let pass = code1 == Some(0) && code8 == Some(0) && doc1 == doc8 && !doc1.is_empty() && same_preset;
    Outcome {
        pass,
        detail: format!(
            "compare documents of {} bytes, exit codes {code1:?}/{code8:?}, identical: {}",
            doc1.len(),
            doc1 == doc8 && same_preset
        ),
    }
}

fn fail_list(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
        format!("; {} failures: {}", failures.len(), shown.join(", "))
    }
}
