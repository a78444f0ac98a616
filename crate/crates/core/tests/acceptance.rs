//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trial_evidence::corpus::{AnnotatedDocument, Direction, Entity, EntityType, Mention, RelationTuple, Span};
use trial_evidence::encoder::{encode_text, HashedEncoder};
use trial_evidence::eval::{b_cubed, ceaf_e, entity_prf, muc, relation_prf, token_prf, Prf, RelationMode, SpanMatch};
use trial_evidence::extraction::crf::{crf_log_likelihood, sequence_score, viterbi_decode, Transitions};
use trial_evidence::extraction::tagger::SentenceInput;
use trial_evidence::extraction::{TagSet, TaggerModel};
use trial_evidence::supervision::{assign_mentions_to_entities, Assignment};
use trial_evidence::text::document_from_sentences;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. clustering metrics against brute force

/// Clusterings as label vectors over a shared mention universe; a mention
/// absent from one side carries a fresh label there, which is the
/// singleton rule written out explicitly.
fn oracle_b_cubed(g: &[usize], p: &[usize]) -> (f64, f64) {
    let n = g.len();
    let (mut prec, mut rec) = (0.0, 0.0);
    for m in 0..n {
        let both = (0..n).filter(|&k| g[k] == g[m] && p[k] == p[m]).count() as f64;
        prec += both / (0..n).filter(|&k| p[k] == p[m]).count() as f64;
        rec += both / (0..n).filter(|&k| g[k] == g[m]).count() as f64;
    }
    (prec / n as f64, rec / n as f64)
}

fn groups(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (m, &l) in labels.iter().enumerate() {
        by.entry(l).or_default().push(m);
    }
    by.into_values().collect()
}

/// Links of `key` clusters kept by the partition `other`.
fn muc_links(key: &[usize], other: &[usize]) -> (usize, usize) {
    let mut kept = 0;
    let mut total = 0;
    for c in groups(key) {
        let mut parts: Vec<usize> = c.iter().map(|&m| other[m]).collect();
        parts.sort_unstable();
        parts.dedup();
        kept += c.len() - parts.len();
        total += c.len() - 1;
    }
    (kept, total)
}

fn oracle_muc(g: &[usize], p: &[usize]) -> (f64, f64) {
    let (rk, rt) = muc_links(g, p);
    let (pk, pt) = muc_links(p, g);
    if rt == 0 && pt == 0 {
        return (1.0, 1.0);
    }
    let r = if rt == 0 { 0.0 } else { rk as f64 / rt as f64 };
    let pr = if pt == 0 { 0.0 } else { pk as f64 / pt as f64 };
    (pr, r)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut v = rest.clone();
            v.insert(pos, n - 1);
            out.push(v);
        }
    }
    out
}

fn oracle_ceaf(g: &[usize], p: &[usize]) -> (f64, f64) {
    let gc = groups(g);
    let pc = groups(p);
    let phi = |a: &Vec<usize>, b: &Vec<usize>| {
        let common = a.iter().filter(|m| b.contains(m)).count() as f64;
        2.0 * common / (a.len() + b.len()) as f64
    };
    let size = gc.len().max(pc.len());
    let mut best = 0.0f64;
    for perm in permutations(size) {
        let mut total = 0.0;
        for (i, &j) in perm.iter().enumerate() {
            if i < gc.len() && j < pc.len() {
                total += phi(&gc[i], &pc[j]);
            }
        }
        best = best.max(total);
    }
    (best / pc.len() as f64, best / gc.len() as f64)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn diff(got: &Prf, want: (f64, f64)) -> f64 {
    let f = f1(want.0, want.1);
    (got.precision - want.0)
        .abs()
        .max((got.recall - want.1).abs())
        .max((got.f1 - f).abs())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.gen_range(1..=6);
        let mut g: Vec<Option<usize>> = (0..n).map(|_| Some(rng.gen_range(0..n))).collect();
        let mut p: Vec<Option<usize>> = (0..n).map(|_| Some(rng.gen_range(0..n))).collect();
        // sometimes a side omits a mention
        if rng.gen_bool(0.2) {
            let k = rng.gen_range(0..n);
            if rng.gen_bool(0.5) {
                g[k] = None;
            } else {
                p[k] = None;
            }
        }
        let as_clusters = |side: &[Option<usize>]| -> Vec<Vec<usize>> {
            let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (m, l) in side.iter().enumerate() {
                if let Some(l) = l {
                    by.entry(*l).or_default().push(m);
                }
            }
            by.into_values().collect()
        };
        let fill = |side: &[Option<usize>]| -> Vec<usize> {
            side.iter()
                .enumerate()
                .map(|(m, l)| l.unwrap_or(1000 + m))
                .collect()
        };
        let (gc, pc) = (as_clusters(&g), as_clusters(&p));
        let (gl, pl) = (fill(&g), fill(&p));
        worst = worst
            .max(diff(&b_cubed(&gc, &pc), oracle_b_cubed(&gl, &pl)))
            .max(diff(&muc(&gc, &pc), oracle_muc(&gl, &pl)))
            .max(diff(&ceaf_e(&gc, &pc), oracle_ceaf(&gl, &pl)));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(30),
        format!("500 cases, max deviation {worst:.1e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------
// 2. Viterbi and normalization

fn random_transitions(rng: &mut ChaCha8Rng, n: usize) -> Transitions {
    let size = n + 2;
    let mut allowed = vec![true; size * size];
    for from in 0..size {
        for to in 0..size {
            let structural = to == n || from == n + 1;
            allowed[from * size + to] = !structural && rng.gen_bool(0.75);
        }
    }
    let tagset = TagSet {
        labels: (0..n).map(|i| format!("L{i}")).collect(),
        allowed,
    };
    let scores = (0..size * size).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Transitions::new(&tagset, scores).unwrap()
}

fn all_paths(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut mismatches, mut infeasible) = (0, 0);
    for _ in 0..200 {
        let n = rng.gen_range(1..=5);
        let len = rng.gen_range(1..=5);
        let t = random_transitions(&mut rng, n);
        let emissions: Vec<Vec<f64>> = (0..len).map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for path in all_paths(n, len) {
            if !t.permits(&path) {
                continue;
            }
            let s = sequence_score(&emissions, &t, &path);
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, path));
            }
        }
        match (best, viterbi_decode(&emissions, &t)) {
            (Some((_, want)), Ok(got)) if want == got => {}
            (None, Err(_)) => infeasible += 1,
            _ => mismatches += 1,
        }
    }

    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let n = rng.gen_range(1..=5);
        let len = rng.gen_range(1..=4);
        let t = random_transitions(&mut rng, n);
        let emissions: Vec<Vec<f64>> = (0..len).map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let feasible: Vec<Vec<usize>> = all_paths(n, len).into_iter().filter(|p| t.permits(p)).collect();
        if feasible.is_empty() {
            continue;
        }
        let total: f64 = feasible
            .iter()
            .map(|p| crf_log_likelihood(&emissions, &t, p).unwrap().exp())
            .sum();
        worst = worst.max((total - 1.0).abs());
        checked += 1;
    }
    outcome(
        mismatches == 0 && worst <= 1e-6,
        format!(
            "200 decodes, {mismatches} mismatches ({infeasible} with no valid path); 100 partitions, max |sum - 1| {worst:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. gradient check

fn random_bio_path(rng: &mut ChaCha8Rng, model: &TaggerModel, len: usize) -> Vec<usize> {
    let t = &model.transitions;
    loop {
        let mut path = Vec::with_capacity(len);
        let mut prev = t.start();
        for _ in 0..len {
            let options: Vec<usize> = (0..t.num_labels).filter(|&y| t.allowed[t.cell(prev, y)]).collect();
            let y = options[rng.gen_range(0..options.len())];
            path.push(y);
            prev = y;
        }
        if t.permits(&path) {
            return path;
        }
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let backend = HashedEncoder::new(6, 3).unwrap();
    let vocab = ["aspirin", "reduced", "pain", "versus", "placebo", "in", "the", "mortality", "group", "."];
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut model = TaggerModel::new(6, 1);
        let params: Vec<f64> = model.parameters().iter().map(|_| rng.gen_range(-0.5..0.5)).collect();
        model.set_parameters(&params);
        let len = rng.gen_range(2..=6);
        let words: Vec<&str> = (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
        let input = SentenceInput::encode(&backend, &words).unwrap();
        let gold = random_bio_path(&mut rng, &model, len);
        let (_, grad) = model.nll_and_gradient(&input, &gold).unwrap();
        let mut fd = vec![0.0; params.len()];
        for k in 0..params.len() {
            let mut plus = params.clone();
            plus[k] += h;
            let mut minus = params.clone();
            minus[k] -= h;
            model.set_parameters(&plus);
            let up = model.nll_and_gradient(&input, &gold).unwrap().0;
            model.set_parameters(&minus);
            let down = model.nll_and_gradient(&input, &gold).unwrap().0;
            fd[k] = (up - down) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let delta: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let rel = norm(&delta) / norm(&grad).max(norm(&fd)).max(1e-12);
        worst = worst.max(rel);
    }
    outcome(worst < 1e-4, format!("20 points, max relative error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 4. hand fixtures

fn mention(id: &str, start: usize, end: usize, etype: EntityType) -> Mention {
    Mention {
        mention_id: id.into(),
        doc_id: "d".into(),
        span: Span::new(start, end),
        etype,
    }
}

fn entity(id: &str, etype: EntityType, mentions: &[&str]) -> Entity {
    Entity {
        entity_id: id.into(),
        doc_id: "d".into(),
        etype,
        mentions: mentions.iter().map(|m| m.to_string()).collect(),
        canonical_text: id.into(),
    }
}

fn relation(i: &str, c: &str, o: &str, d: Direction, ev: usize) -> RelationTuple {
    RelationTuple {
        doc_id: "d".into(),
        intervention: i.into(),
        comparator: Some(c.into()),
        outcome: o.into(),
        direction: d,
        evidence_sentence: ev,
        confidence: 1.0,
    }
}

fn criterion_4() -> Outcome {
    use EntityType::{Intervention as I, Outcome as O};
    let doc = document_from_sentences(
        "d",
        &[
            "aspirin versus placebo lowered pain scores .".to_string(),
            "aspirin did not change mortality or pain scores .".to_string(),
        ],
    )
    .unwrap();
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    // entity_prf: E1 {m1, m2}, E2 {m3}; pred {m2, x}
    let gold = AnnotatedDocument::new(
        doc.clone(),
        vec![mention("m1", 0, 1, O), mention("m2", 8, 9, O), mention("m3", 12, 13, O)],
        vec![entity("E1", O, &["m1", "m2"]), entity("E2", O, &["m3"])],
        vec![],
        vec![],
    )
    .unwrap();
    let s = entity_prf(&gold, &[mention("p1", 8, 9, O), mention("p2", 3, 4, O)], SpanMatch::Exact).overall;
    check("entity fixture", (s.tp, s.fp, s.fn_) == (1, 1, 1) && s.precision == 0.5 && s.recall == 0.5 && s.f1 == 0.5);
    let s = entity_prf(&gold, &[mention("p1", 3, 4, O), mention("p2", 3, 4, O)], SpanMatch::Exact).overall;
    check("pessimistic repeated false span", s.fp == 2 && s.tp == 0);
    let all: Vec<Mention> = gold.mentions.clone();
    let s = entity_prf(&gold, &all, SpanMatch::Exact).overall;
    check("entity identity", s.precision == 1.0 && s.recall == 1.0);

    // token_prf: gold tokens {1,2,3}, pred {2,3,4}
    let token_gold = AnnotatedDocument::new(doc.clone(), vec![mention("g", 1, 4, I)], vec![entity("G", I, &["g"])], vec![], vec![]).unwrap();
    let s = token_prf(std::slice::from_ref(&token_gold), &[vec![mention("p", 2, 5, I)]]).unwrap().overall;
    check("token fixture", (s.precision - 2.0 / 3.0).abs() < 1e-15 && (s.recall - 2.0 / 3.0).abs() < 1e-15);
    let s = token_prf(std::slice::from_ref(&token_gold), &[vec![mention("p", 5, 7, I)]]).unwrap().overall;
    check("token disjoint", s.f1 == 0.0);

    // relation_prf: three gold relations, two predictions (one correct,
    // one with the direction flipped)
    let mentions = vec![
        mention("a", 0, 1, I),
        mention("p", 2, 3, I),
        mention("pain", 4, 6, O),
        mention("b", 7, 8, I),
        mention("mort", 11, 12, O),
    ];
    let entities = vec![
        entity("A", I, &["a"]),
        entity("P", I, &["p"]),
        entity("PAIN", O, &["pain"]),
        entity("B", I, &["b"]),
        entity("MORT", O, &["mort"]),
    ];
    let gold = AnnotatedDocument::new(
        doc.clone(),
        mentions.clone(),
        entities.clone(),
        vec![0, 1],
        vec![
            relation("A", "P", "PAIN", Direction::Decreased, 0),
            relation("B", "P", "MORT", Direction::NoDifference, 1),
            relation("B", "P", "PAIN", Direction::NoDifference, 1),
        ],
    )
    .unwrap();
    let pred = AnnotatedDocument::new(
        doc.clone(),
        mentions,
        entities.iter().map(|e| Entity { entity_id: format!("x{}", e.entity_id), ..e.clone() }).collect(),
        vec![0, 1],
        vec![
            relation("xA", "xP", "xPAIN", Direction::Decreased, 0),
            relation("xB", "xP", "xMORT", Direction::Increased, 1),
        ],
    )
    .unwrap();
    let s = relation_prf(std::slice::from_ref(&gold), std::slice::from_ref(&pred), RelationMode::Triplet).unwrap();
    check("relation fixture", (s.tp, s.fp, s.fn_) == (1, 1, 2) && s.precision == 0.5 && (s.recall - 1.0 / 3.0).abs() < 1e-15);
    let s = relation_prf(std::slice::from_ref(&gold), std::slice::from_ref(&gold), RelationMode::Triplet).unwrap();
    check("relation identity", s.f1 == 1.0);

    outcome(failures.is_empty(), if failures.is_empty() { "all fixtures exact".to_string() } else { format!("failed: {}", failures.join(", ")) })
}

// ---------------------------------------------------------------------------
// 5-7. synthetic end-to-end through the command line

struct Run {
    metrics: BTreeMap<String, f64>,
    ablated: BTreeMap<String, f64>,
    files: Vec<(String, Vec<u8>)>,
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_trial-evidence"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{:?} failed: {}", args, String::from_utf8_lossy(&out.stderr)))
    }
}

fn read_metrics(path: &Path) -> Result<BTreeMap<String, f64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn end_to_end(dir: &Path) -> Result<Run, String> {
    let p = |rel: &str| dir.join(rel).to_string_lossy().into_owned();
    cli(&["synth", "--num-docs", "500", "--prefix", "tr", "--seed", "11", "--out", &p("train")])?;
    cli(&["synth", "--num-docs", "100", "--prefix", "te", "--seed", "12", "--out", &p("test")])?;
    let seed = ["--seed", "7"];
    let run = |args: &[&str]| -> Result<(), String> {
        let mut all: Vec<&str> = args.to_vec();
        all.extend_from_slice(&seed);
        cli(&all)
    };
    run(&["train", "tagger", "--train", &p("train/corpus.jsonl"), "--out", &p("models/tagger.json")])?;
    run(&[
        "build-distant",
        "--raw",
        &p("train/raw.jsonl"),
        "--prompts",
        &p("train/prompts.jsonl"),
        "--tagger",
        &p("models/tagger.json"),
        "--out",
        &p("distant"),
    ])?;
    for m in ["evidence", "linker", "inference"] {
        run(&["train", m, "--samples", &p("distant/distant.samples.jsonl"), "--out", &p(&format!("models/{m}.json"))])?;
    }
    run(&["predict", "--input", &p("test/raw.jsonl"), "--models", &p("models"), "--out", &p("pred")])?;
    run(&[
        "evaluate",
        "--gold",
        &p("test/corpus.jsonl"),
        "--pred",
        &p("pred/predicted_corpus.jsonl"),
        "--links",
        &p("pred/links.jsonl"),
        "--hard-cases",
        &p("test/hard_cases.jsonl"),
        "--out",
        &p("eval"),
    ])?;
    run(&[
        "report",
        "--gold",
        &p("test/corpus.jsonl"),
        "--models",
        &p("models"),
        "--gold-mentions",
        "--gold-evidence",
        "--gold-links",
        "--out",
        &p("ablated"),
    ])?;
    let mut files = Vec::new();
    for f in ["eval/metrics.json", "pred/predictions.jsonl", "pred/predicted_corpus.jsonl", "pred/links.jsonl", "ablated/metrics.json"] {
        files.push((f.to_string(), std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"))?));
    }
    Ok(Run {
        metrics: read_metrics(&dir.join("eval/metrics.json"))?,
        ablated: read_metrics(&dir.join("ablated/metrics.json"))?,
        files,
    })
}

// ---------------------------------------------------------------------------
// 8. threshold monotonicity

fn criterion_8() -> Outcome {
    let backend = HashedEncoder::new(32, 8).unwrap();
    let seeds_text = ["aspirin", "placebo", "low dose aspirin", "pain", "mortality"];
    let mention_text = [
        "aspirin",
        "aspirin therapy",
        "placebo",
        "matched placebo",
        "pain scores",
        "pain",
        "mortality at one year",
        "heparin",
        "dose",
        "low dose",
        "all cause mortality",
        "nausea",
    ];
    let seeds: Vec<_> = seeds_text.iter().map(|t| encode_text(&backend, t).unwrap()).collect();
    let mentions: Vec<_> = mention_text.iter().map(|t| encode_text(&backend, t).unwrap()).collect();
    let mut counts = Vec::new();
    for k in 0..=100 {
        let threshold = k as f64 / 100.0;
        let a = assign_mentions_to_entities(&mentions, &seeds, threshold).unwrap();
        counts.push(a.iter().filter(|x| matches!(x, Assignment::Existing(_))).count());
    }
    let monotone = counts.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        monotone && counts[0] > *counts.last().unwrap(),
        format!("101 thresholds, existing-entity counts {} -> {}", counts[0], counts.last().unwrap()),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 clustering metrics match brute force", criterion_1()),
        ("2 viterbi and CRF normalization", criterion_2()),
        ("3 CRF gradient check", criterion_3()),
        ("4 evaluation fixtures", criterion_4()),
    ];

    let start = Instant::now();
    let first_dir = tempfile::tempdir().expect("tempdir");
    let first = end_to_end(first_dir.path());
    let elapsed = start.elapsed();
    match &first {
        Ok(run) => {
            let f1 = run.metrics.get("relations.triplet.f1").copied().unwrap_or(0.0);
            results.push((
                "5 synthetic end-to-end",
                outcome(
                    f1 >= 0.60 && elapsed < Duration::from_secs(15 * 60),
                    format!("triplet F1 {f1:.4} (need >= 0.60), {:.1}s", elapsed.as_secs_f64()),
                ),
            ));
            let base = run.metrics.get("direction.macro_f1").copied().unwrap_or(0.0);
            let gold = run.ablated.get("direction.macro_f1").copied().unwrap_or(0.0);
            results.push((
                "6 gold switches raise direction F1",
                outcome(gold > base, format!("direction F1 {base:.4} without switches, {gold:.4} with all three")),
            ));
        }
        Err(e) => {
            results.push(("5 synthetic end-to-end", outcome(false, e.clone())));
            results.push(("6 gold switches raise direction F1", outcome(false, "end-to-end run failed")));
        }
    }
    let second_dir = tempfile::tempdir().expect("tempdir");
    let second = end_to_end(second_dir.path());
    let determinism = match (&first, &second) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> = a
                .files
                .iter()
                .zip(&b.files)
                .filter(|(x, y)| x.1 != y.1)
                .map(|(x, _)| x.0.as_str())
                .collect();
            outcome(
                differing.is_empty(),
                if differing.is_empty() {
                    format!("{} files byte-identical across two runs", a.files.len())
                } else {
                    format!("differing: {}", differing.join(", "))
                },
            )
        }
        (_, Err(e)) | (Err(e), _) => outcome(false, e.clone()),
    };
    results.push(("7 same seed gives identical outputs", determinism));
    results.push(("8 threshold monotonicity", criterion_8()));

    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
