//! One line per acceptance criterion; exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use agentattr_cli::{cmd_attribute, cmd_eval, cmd_synth, Cli, Command};
use agentattr_core::baselines::{fit_lasso, surrogate_score, AblationMask, ContextCiteConfig};
use agentattr_core::component::Selection;
use agentattr_core::evaluation::{hit_at_k, SynthConfig, SyntheticSuite, COMPONENT_LEVEL};
use agentattr_core::report::{attribute, AttributionConfig, AttributionReport};
use agentattr_core::scorer::{
    CacheConfig, CachingScorer, HttpConfig, HttpScorer, NGramModel, NGramScorer, ScoreRequest, Scorer,
};
use agentattr_core::sentence::prob_drop;
use agentattr_core::trajectory::parse_trajectory;
use agentattr_core::ReplayConfig;
use clap::Parser;
use common::random::{additive_trajectory, kkt_violation, random_model, random_trajectory, AdditiveScorer};
use common::stub::{chunk_tokens, expected_sum, word_tokens, Stub};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took <= limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn parse(args: &[&str]) -> Command {
    let mut full = vec!["agentattr"];
    full.extend_from_slice(args);
    Cli::try_parse_from(full).expect("valid command line").command
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn telescoping() -> Outcome {
    let start = Instant::now();
    let suite = SyntheticSuite::new(SynthConfig { seed: 1, num_cases: 100, ..Default::default() }).map_err(|e| e.to_string())?;
    let scorer = CachingScorer::new(NGramScorer::new(suite.model().clone()), CacheConfig::default());
    let mut worst = 0.0f64;
    for case in suite.cases().map_err(|e| e.to_string())? {
        let cfg = AttributionConfig { selection: Selection::TopK(0), ..Default::default() };
        let r = attribute(&case.trajectory, &scorer, &cfg).map_err(|e| e.to_string())?;
        let sum: f64 = r.gains.iter().sum();
        worst = worst.max((sum - (r.psi[r.psi.len() - 1] - r.psi[0])).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    let took = within(Duration::from_secs(10), start)?;
    Ok(format!("100 trajectories, max |sum g - (psi_N - psi_0)| = {worst:.1e}, {took:.2?}"))
}

fn zero_attribution() -> Outcome {
    let mut worst = 0.0f64;
    let mut values = 0usize;
    for seed in 0..20u64 {
        let t = random_trajectory(1000 + seed);
        let scorer = CachingScorer::new(NGramScorer::new(random_model(seed, 1)), CacheConfig::default());
        let cfg = AttributionConfig {
            selection: Selection::TopK(t.len()),
            loo: true,
            contextcite: Some(ContextCiteConfig { seed, ..Default::default() }),
            ..Default::default()
        };
        let r = attribute(&t, &scorer, &cfg).map_err(|e| e.to_string())?;
        let cc = r.baselines.contextcite.as_ref().unwrap();
        let all = r
            .gains
            .iter()
            .chain(r.sentence_scores.iter().flat_map(|s| [&s.drop, &s.hold, &s.phi]))
            .chain(cc.weights.iter().flat_map(|e| e.weights.iter()));
        for v in all {
            worst = worst.max(v.abs());
            values += 1;
        }
    }
    ensure(worst <= 1e-6, || format!("max |value| {worst:e}"))?;
    Ok(format!("20 trajectories, {values} values, max |value| = {worst:.1e}"))
}

fn synth_suite(dir: &Path) -> Result<(), String> {
    let Command::Synth(a) = parse(&["synth", "--n", "50", "--seed", "42", "--out", s(dir)]) else { unreachable!() };
    let n = cmd_synth(&a).map_err(|e| e.to_string())?;
    ensure(n == 50, || format!("wrote {n} cases"))
}

fn planted_fidelity(dir: &Path) -> Outcome {
    let start = Instant::now();
    let out = dir.join("eval.json");
    let Command::Eval(a) = parse(&[
        "eval", "--cases", s(&dir.join("cases")), "--gt", s(&dir.join("gt")),
        "--methods", "drop_hold,loo,contextcite", "--k", "1,3,5", "--out", s(&out), "--seed", "42",
    ]) else { unreachable!() };
    let (result, _) = cmd_eval(&a).map_err(|e| e.to_string())?;
    let at1 = |m: &str| result.methods[m]["hit@1"];
    let (comp, dh, loo, cc) = (at1(COMPONENT_LEVEL), at1("drop_hold"), at1("loo"), at1("contextcite"));
    ensure(result.num_cases == 50, || format!("{} cases", result.num_cases))?;
    ensure(comp >= 0.9, || format!("component Hit@1 {comp}"))?;
    ensure(dh >= 0.9, || format!("sentence Hit@1 {dh}"))?;
    ensure(dh >= loo && loo >= cc, || format!("order violated: drop_hold {dh}, loo {loo}, contextcite {cc}"))?;
    let took = within(Duration::from_secs(120), start)?;
    Ok(format!(
        "Hit@1 component {comp:.3}, drop_hold {dh:.3} >= loo {loo:.3} >= contextcite {cc:.3}, {took:.2?}"
    ))
}

fn loo_equivalence(dir: &Path) -> Outcome {
    let model = NGramModel::from_json(&std::fs::read(dir.join("model.json")).unwrap()).map_err(|e| e.to_string())?;
    let scorer = CachingScorer::new(NGramScorer::new(model.clone()), CacheConfig::default());
    let direct = NGramScorer::new(model);
    let cfg = AttributionConfig { loo: true, ..Default::default() };
    let replay = ReplayConfig::default();
    let mut checked = 0;
    let mut cases: Vec<_> = std::fs::read_dir(dir.join("cases")).unwrap().map(|e| e.unwrap().path()).collect();
    cases.sort();
    for path in cases {
        let t = parse_trajectory(&std::fs::read(&path).unwrap()).map_err(|e| e.to_string())?;
        let r = attribute(&t, &scorer, &cfg).map_err(|e| e.to_string())?;
        for entry in r.baselines.loo.as_ref().unwrap() {
            for (j, v) in entry.scores.iter().enumerate() {
                let d = prob_drop(&t, entry.component_index, j, &direct, &replay).map_err(|e| e.to_string())?;
                ensure(v.to_bits() == d.to_bits(), || {
                    format!("{} component {} sentence {j}: {v} vs {d}", t.meta().id, entry.component_index)
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} sentences bit-identical across 50 cases"))
}

fn lasso_recovery() -> Outcome {
    let replay = ReplayConfig::default();
    let mut worst_err = 0.0f64;
    let mut worst_kkt = 0.0f64;
    for n in [3usize, 5, 8] {
        let weights: Vec<f64> = (0..n).map(|j| ((j * 7 % 5) as f64 - 2.0) * 0.6 + 0.05 * j as f64).collect();
        let scorer = AdditiveScorer { base: -4.0, weights: weights.clone() };
        let t = additive_trajectory(n);
        let masks: Vec<AblationMask> = (0..1usize << n)
            .map(|b| AblationMask { bits: (0..n).map(|j| (b >> j) & 1 == 1).collect() })
            .collect();
        let scores = masks
            .iter()
            .map(|m| surrogate_score(&t, 1, m, &scorer, &replay))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let fit = fit_lasso(&masks, &scores, 0.0).map_err(|e| e.to_string())?;
        for (a, b) in fit.weights.iter().zip(&weights) {
            worst_err = worst_err.max((a - b).abs());
        }
        let x: Vec<Vec<f64>> = masks.iter().map(|m| m.bits.iter().map(|&b| f64::from(u8::from(b))).collect()).collect();
        for lambda in [0.01, 0.1] {
            let fit = fit_lasso(&masks, &scores, lambda).map_err(|e| e.to_string())?;
            worst_kkt = worst_kkt.max(kkt_violation(&x, &scores, &fit.weights, fit.intercept, lambda));
        }
    }
    ensure(worst_err <= 1e-6, || format!("max weight error {worst_err:e}"))?;
    ensure(worst_kkt <= 1e-6, || format!("max KKT violation {worst_kkt:e}"))?;
    Ok(format!("N in {{3,5,8}}: max weight error {worst_err:.1e}, max KKT violation {worst_kkt:.1e}"))
}

fn hit_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for pair in 0..1000 {
        let len = rng.gen_range(1..16);
        let ranked: Vec<usize> = (0..len).map(|_| rng.gen_range(0..24)).collect();
        let truth: BTreeSet<usize> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(0..24)).collect();
        let mut prev = 0;
        for k in 1..=len + 3 {
            let h = hit_at_k(&ranked, &truth, k).map_err(|e| e.to_string())?;
            ensure(h >= prev, || format!("pair {pair}: Hit@{k} decreased"))?;
            if k >= len && ranked.iter().any(|j| truth.contains(j)) {
                ensure(h == 1, || format!("pair {pair}: Hit@{k} = 0 despite overlap"))?;
            }
            prev = h;
        }
    }
    Ok("1000 random pairs".into())
}

fn http_contract() -> Outcome {
    let words = Stub::spawn(word_tokens);
    let chunks = Stub::spawn(chunk_tokens);
    let http = |stub: &Stub| {
        HttpScorer::new(HttpConfig { endpoint: stub.url.clone(), api_key_env: None, max_retries: 0, ..Default::default() })
            .map_err(|e| e.to_string())
    };
    let pairs = [("[USER] Book it.", " reserve now"), ("[OBS] Café ouvert.", " go"), ("a\nb", " c d")];
    let req = |c: &str, t: &str| ScoreRequest::new(c, t).unwrap();

    let cached = CachingScorer::new(http(&words)?, CacheConfig::default());
    let mut values = Vec::new();
    for (c, t) in pairs {
        let r = cached.score(&req(c, t)).map_err(|e| e.to_string())?;
        let want = expected_sum(word_tokens, c, t);
        ensure(r.total_logprob == want, || format!("{c:?}: {} vs {want}", r.total_logprob))?;
        values.push(r.total_logprob);
    }
    for _ in 0..3 {
        for (c, t) in pairs {
            cached.score(&req(c, t)).map_err(|e| e.to_string())?;
        }
    }
    ensure(words.hits() == pairs.len(), || format!("{} backend hits with cache", words.hits()))?;

    let uncached = CachingScorer::new(http(&words)?, CacheConfig { enabled: false, ..Default::default() });
    for ((c, t), v) in pairs.iter().zip(&values) {
        let r = uncached.score(&req(c, t)).map_err(|e| e.to_string())?;
        ensure(r.total_logprob.to_bits() == v.to_bits(), || format!("{c:?}: cache changed the value"))?;
    }
    ensure(words.hits() == 2 * pairs.len(), || format!("{} backend hits without cache", words.hits()))?;

    let r = http(&chunks)?.score(&req("abcdef", "ghij")).map_err(|e| e.to_string())?;
    ensure(r.warnings.len() == 1, || format!("{} straddle warnings", r.warnings.len()))?;
    ensure(r.total_logprob == expected_sum(chunk_tokens, "abcdef", "ghij"), || "straddle sum".into())?;
    Ok(format!("exact sums, straddle warning, {} hits for {} requests", pairs.len(), 4 * pairs.len()))
}

fn determinism(dir: &Path) -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let case = dir.join("cases/synth-42-007.json");
    let model = dir.join("model.json");
    let mut reports = Vec::new();
    let mut evals = Vec::new();
    for limit in ["1", "8"] {
        let out = work.path().join(format!("report-{limit}.json"));
        let Command::Attribute(a) = parse(&[
            "attribute", "--trajectory", s(&case), "--scorer", "ngram", "--model-path", s(&model),
            "--top-k", "3", "--hold-mode", "literal", "--baselines", "loo,contextcite",
            "--out", s(&out), "--seed", "7", "--max-in-flight", limit,
        ]) else { unreachable!() };
        cmd_attribute(&a).map_err(|e| e.to_string())?;
        reports.push(std::fs::read(&out).unwrap());

        let out = work.path().join(format!("eval-{limit}.json"));
        let Command::Eval(a) = parse(&[
            "eval", "--cases", s(&dir.join("cases")), "--gt", s(&dir.join("gt")),
            "--methods", "drop_hold,loo,contextcite", "--k", "1,3,5", "--out", s(&out),
            "--seed", "7", "--max-in-flight", limit,
        ]) else { unreachable!() };
        cmd_eval(&a).map_err(|e| e.to_string())?;
        evals.push(std::fs::read(&out).unwrap());
    }
    ensure(reports[0] == reports[1], || "attribute reports differ".into())?;
    ensure(evals[0] == evals[1], || "eval results differ".into())?;
    let parsed: AttributionReport = serde_json::from_slice(&reports[0]).map_err(|e| e.to_string())?;
    ensure(parsed.timing_ms.is_none(), || "timing leaked into report".into())?;
    Ok(format!("report {} bytes and eval {} bytes identical at limits 1 and 8", reports[0].len(), evals[0].len()))
}

fn main() {
    let suite = tempfile::tempdir().expect("temp dir");
    let suite_ready = synth_suite(suite.path());
    let with_suite = |f: fn(&Path) -> Outcome| -> Outcome {
        suite_ready.clone()?;
        f(suite.path())
    };
    let criteria: Vec<Criterion> = vec![
        ("telescoping invariant", Box::new(telescoping)),
        ("zero-attribution oracle", Box::new(zero_attribution)),
        ("planted-driver fidelity", Box::new(move || with_suite(planted_fidelity))),
        ("LOO equals drop", Box::new(move || with_suite(loo_equivalence))),
        ("lasso recovery and KKT", Box::new(lasso_recovery)),
        ("Hit@k monotonicity", Box::new(hit_monotonicity)),
        ("HTTP scorer contract", Box::new(http_contract)),
        ("end-to-end determinism", Box::new(move || with_suite(determinism))),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({why})", n + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
