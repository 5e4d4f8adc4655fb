//! Acceptance gate: one test per release criterion, each printing a single
//! PASS line (failures panic with a FAIL message). Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use actref_core::config::Config;
use actref_core::pipeline::detect_commit;
use actref_core::report::{compute_metrics, match_instances, parse_oracle, Counts, OracleEntry};
use actref_core::rule_engine::{RefactoringInstance, RefactoringType};
use actref_core::source_model::{parse_module, SourceFile};
use actref_core::tree_diff::{apply_actions, generate_actions, match_trees, PlainTree};

// ---------------------------------------------------------------------------
// fixture corpus helpers

struct Fixture {
    name: String,
    before: Vec<SourceFile>,
    after: Vec<SourceFile>,
    expected: Vec<OracleEntry>,
}

fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn collect_files(dir: &Path, base: &Path, out: &mut Vec<SourceFile>) {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("read {}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, base, out);
        } else if p.extension().is_some_and(|x| x == "py") {
            let rel = p
                .strip_prefix(base)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            out.push(SourceFile::new(rel, std::fs::read_to_string(&p).unwrap()));
        }
    }
}

fn load_corpus() -> Vec<Fixture> {
    let root = fixtures_root();
    let mut names: Vec<String> = std::fs::read_dir(&root)
        .expect("fixture corpus present")
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut out = Vec::new();
    for name in names {
        let dir = root.join(&name);
        let mut before = Vec::new();
        let mut after = Vec::new();
        collect_files(&dir.join("before"), &dir.join("before"), &mut before);
        collect_files(&dir.join("after"), &dir.join("after"), &mut after);
        let expected =
            parse_oracle(&std::fs::read_to_string(dir.join("expected.csv")).unwrap()).unwrap();
        out.push(Fixture {
            name,
            before,
            after,
            expected,
        });
    }
    assert!(out.len() >= 30, "corpus unexpectedly small: {}", out.len());
    out
}

fn detect(fix: &Fixture) -> Vec<RefactoringInstance> {
    detect_commit(&fix.before, &fix.after, &Config::default(), "").instances()
}

fn exact_match(detected: &[RefactoringInstance], expected: &[OracleEntry]) -> bool {
    let refs: Vec<&RefactoringInstance> = detected.iter().collect();
    let counts = match_instances(&refs, expected);
    detected.len() == expected.len() && counts.values().all(|c| c.fp == 0 && c.fn_ == 0)
}

// ---------------------------------------------------------------------------
// random program generation for the edit-script soundness criterion

#[derive(Clone)]
enum Stmt {
    Assign(String, String),
    Return(String),
    Call(String, Vec<String>),
    For(String, String, Vec<Stmt>),
    If(String, Vec<Stmt>),
}

#[derive(Clone)]
struct Func {
    name: String,
    params: Vec<String>,
    body: Vec<Stmt>,
}

#[derive(Clone)]
struct Prog {
    funcs: Vec<Func>,
}

const NAMES: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "omega", "total", "count", "value", "items", "result",
    "index", "buffer",
];

fn name(rng: &mut ChaCha8Rng) -> String {
    NAMES[rng.gen_range(0..NAMES.len())].to_string()
}

fn expr(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..5) {
        0 => format!("{} + {}", name(rng), rng.gen_range(0..100)),
        1 => format!("{}({})", name(rng), name(rng)),
        2 => format!("[{}, {}]", rng.gen_range(0..10), rng.gen_range(0..10)),
        3 => format!("{} * {} - {}", name(rng), name(rng), rng.gen_range(1..9)),
        _ => format!("\"{}\"", name(rng)),
    }
}

fn stmt(rng: &mut ChaCha8Rng, depth: usize) -> Stmt {
    let top = if depth == 0 { 5 } else { 3 };
    match rng.gen_range(0..top) {
        0 => Stmt::Assign(name(rng), expr(rng)),
        1 => Stmt::Return(expr(rng)),
        2 => Stmt::Call(name(rng), vec![expr(rng)]),
        3 => Stmt::For(
            name(rng),
            name(rng),
            (0..rng.gen_range(1..3)).map(|_| stmt(rng, 1)).collect(),
        ),
        _ => Stmt::If(
            format!("{} > {}", name(rng), rng.gen_range(0..50)),
            (0..rng.gen_range(1..3)).map(|_| stmt(rng, 1)).collect(),
        ),
    }
}

fn func(rng: &mut ChaCha8Rng, idx: usize) -> Func {
    Func {
        name: format!("fn_{idx}_{}", name(rng)),
        params: {
            let mut ps: Vec<String> = (0..rng.gen_range(0..3)).map(|_| name(rng)).collect();
            ps.sort();
            ps.dedup();
            ps
        },
        body: (0..rng.gen_range(2..6)).map(|_| stmt(rng, 0)).collect(),
    }
}

fn prog(rng: &mut ChaCha8Rng) -> Prog {
    Prog {
        funcs: (0..rng.gen_range(2..6)).map(|i| func(rng, i)).collect(),
    }
}

fn render_stmt(s: &Stmt, indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    match s {
        Stmt::Assign(v, e) => out.push_str(&format!("{pad}{v} = {e}\n")),
        Stmt::Return(e) => out.push_str(&format!("{pad}return {e}\n")),
        Stmt::Call(f, args) => out.push_str(&format!("{pad}{f}({})\n", args.join(", "))),
        Stmt::For(v, it, body) => {
            out.push_str(&format!("{pad}for {v} in {it}:\n"));
            for b in body {
                render_stmt(b, indent + 1, out);
            }
        }
        Stmt::If(cond, body) => {
            out.push_str(&format!("{pad}if {cond}:\n"));
            for b in body {
                render_stmt(b, indent + 1, out);
            }
        }
    }
}

fn render(p: &Prog) -> String {
    let mut out = String::new();
    for f in &p.funcs {
        out.push_str(&format!("def {}({}):\n", f.name, f.params.join(", ")));
        for s in &f.body {
            render_stmt(s, 1, &mut out);
        }
        out.push('\n');
    }
    out
}

/// Source-level mutations: relabel, delete, insert, and move of blocks.
fn mutate(p: &mut Prog, rng: &mut ChaCha8Rng) {
    match rng.gen_range(0..7) {
        // relabel a function
        0 => {
            let i = rng.gen_range(0..p.funcs.len());
            p.funcs[i].name = format!("renamed_{}", name(rng));
        }
        // relabel an identifier inside one statement
        1 => {
            let i = rng.gen_range(0..p.funcs.len());
            if !p.funcs[i].body.is_empty() {
                let j = rng.gen_range(0..p.funcs[i].body.len());
                if let Stmt::Assign(v, _) = &mut p.funcs[i].body[j] {
                    *v = format!("fresh_{}", name(rng));
                }
            }
        }
        // delete a statement block
        2 => {
            let i = rng.gen_range(0..p.funcs.len());
            if p.funcs[i].body.len() > 1 {
                let j = rng.gen_range(0..p.funcs[i].body.len());
                p.funcs[i].body.remove(j);
            }
        }
        // delete a whole function
        3 => {
            if p.funcs.len() > 1 {
                let i = rng.gen_range(0..p.funcs.len());
                p.funcs.remove(i);
            }
        }
        // insert a statement block
        4 => {
            let i = rng.gen_range(0..p.funcs.len());
            let at = rng.gen_range(0..=p.funcs[i].body.len());
            let s = stmt(rng, 0);
            p.funcs[i].body.insert(at, s);
        }
        // move a statement between functions
        5 => {
            let from = rng.gen_range(0..p.funcs.len());
            let to = rng.gen_range(0..p.funcs.len());
            if p.funcs[from].body.len() > 1 {
                let j = rng.gen_range(0..p.funcs[from].body.len());
                let s = p.funcs[from].body.remove(j);
                let at = rng.gen_range(0..=p.funcs[to].body.len());
                p.funcs[to].body.insert(at, s);
            }
        }
        // move (reorder) a function
        _ => {
            if p.funcs.len() > 1 {
                let i = rng.gen_range(0..p.funcs.len());
                let f = p.funcs.remove(i);
                let at = rng.gen_range(0..=p.funcs.len());
                p.funcs.insert(at, f);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// criteria

#[test]
fn criterion_1_edit_script_soundness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC7EE5);
    let cfg = Config::default();
    let cases = 500;
    for case in 0..cases {
        let base = prog(&mut rng);
        let mut mutated = base.clone();
        for _ in 0..rng.gen_range(1..=4) {
            mutate(&mut mutated, &mut rng);
        }
        let before_src = render(&base);
        let after_src = render(&mutated);
        let before = parse_module(&SourceFile::new("g.py", before_src.clone()))
            .unwrap_or_else(|e| panic!("FAIL: generated before program invalid ({e})"));
        let after = parse_module(&SourceFile::new("g.py", after_src.clone()))
            .unwrap_or_else(|e| panic!("FAIL: generated after program invalid ({e})"));
        let mapping = match_trees(&before, &after, &cfg);
        let script = generate_actions(&before, &after, &mapping)
            .unwrap_or_else(|e| panic!("FAIL: case {case}: script generation failed ({e})"));
        let rebuilt = apply_actions(&before, &script)
            .unwrap_or_else(|e| panic!("FAIL: case {case}: script application failed ({e})"));
        assert_eq!(
            rebuilt,
            PlainTree::of(&after, after.root()),
            "FAIL: case {case}: rebuilt tree differs\nbefore:\n{before_src}\nafter:\n{after_src}"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "FAIL: soundness suite took {elapsed:?} (budget 60 s)"
    );
    println!(
        "PASS: edit-script soundness on {cases} randomized mutation pairs in {elapsed:?}"
    );
}

#[test]
fn criterion_2_fixture_corpus_exact_detection() {
    let corpus = load_corpus();
    let mut per_type: BTreeMap<RefactoringType, usize> = BTreeMap::new();
    for fix in &corpus {
        let detected = detect(fix);
        assert!(
            exact_match(&detected, &fix.expected),
            "FAIL: fixture {} expected {:?}, detected {:?}",
            fix.name,
            fix.expected
                .iter()
                .map(|e| e.refactoring_type.name())
                .collect::<Vec<_>>(),
            detected
                .iter()
                .map(|i| i.refactoring_type.name())
                .collect::<Vec<_>>()
        );
        for e in &fix.expected {
            *per_type.entry(e.refactoring_type).or_default() += 1;
        }
    }
    for t in RefactoringType::ALL {
        assert!(
            per_type.get(&t).copied().unwrap_or(0) >= 2,
            "FAIL: fewer than 2 fixtures for {t}"
        );
    }
    println!(
        "PASS: exact detection with zero extras on all {} corpus fixtures (>=2 per type)",
        load_corpus().len()
    );
}

#[test]
fn criterion_3_cropandpad_extract_method() {
    let corpus = load_corpus();
    let fix = corpus
        .iter()
        .find(|f| f.name == "cropandpad-extract-method")
        .expect("cropandpad fixture present");
    let detected = detect(fix);
    let hit = detected.iter().any(|i| {
        i.refactoring_type == RefactoringType::ExtractMethod
            && i.before.as_ref().is_some_and(|l| {
                l.qualified_name == "CropAndPad._augment_keypoints"
            })
            && i.after.as_ref().is_some_and(|l| {
                l.qualified_name == "CropAndPad._crop_and_pad_kpsoi"
            })
    });
    assert!(
        hit,
        "FAIL: cropandpad pair did not yield Extract Method _augment_keypoints -> _crop_and_pad_kpsoi: {detected:?}"
    );
    println!("PASS: cropandpad pair yields Extract Method _augment_keypoints -> _crop_and_pad_kpsoi");
}

#[test]
fn criterion_4_relocation_single_move_module() {
    let corpus = load_corpus();
    let fix = corpus
        .iter()
        .find(|f| f.name == "verbatim-file-relocation")
        .expect("relocation fixture present");
    let detected = detect(fix);
    assert_eq!(
        detected.len(),
        1,
        "FAIL: verbatim relocation should yield exactly one instance: {detected:?}"
    );
    assert_eq!(
        detected[0].refactoring_type,
        RefactoringType::MoveModule,
        "FAIL: verbatim relocation yielded {} instead of Move Module",
        detected[0].refactoring_type
    );
    println!("PASS: verbatim relocation yields exactly one Move Module and zero fine-grained instances");
}

#[test]
fn criterion_5_mirror_suite() {
    let corpus = load_corpus();
    let mut swapped = 0;
    for fix in corpus.iter().filter(|f| f.name.starts_with("extract-")) {
        let mirrored = Fixture {
            name: format!("{} (mirrored)", fix.name),
            before: fix.after.clone(),
            after: fix.before.clone(),
            expected: Vec::new(),
        };
        let detected = detect(&mirrored);
        let want: Vec<RefactoringType> = fix
            .expected
            .iter()
            .map(|e| e.refactoring_type.mirror().expect("extract type mirrors"))
            .collect();
        let got: Vec<RefactoringType> =
            detected.iter().map(|i| i.refactoring_type).collect();
        let mut want_sorted = want.clone();
        let mut got_sorted = got.clone();
        want_sorted.sort();
        got_sorted.sort();
        assert_eq!(
            got_sorted, want_sorted,
            "FAIL: {} expected mirror types {want:?}, detected {got:?}",
            mirrored.name
        );
        swapped += 1;
    }
    assert!(swapped >= 8, "FAIL: too few extract fixtures mirrored");
    println!("PASS: all {swapped} extract fixtures yield the inline mirror when swapped");
}

#[test]
fn criterion_6_metrics_hand_vectors() {
    let hand: [(usize, usize, usize, Option<f64>, Option<f64>, f64); 11] = [
        (3, 1, 0, Some(0.75), Some(1.0), 6.0 / 7.0),
        (0, 0, 5, None, Some(0.0), 0.0),
        (0, 0, 0, None, None, 0.0),
        (5, 0, 0, Some(1.0), Some(1.0), 1.0),
        (0, 4, 0, Some(0.0), None, 0.0),
        (1, 1, 1, Some(0.5), Some(0.5), 0.5),
        (2, 2, 6, Some(0.5), Some(0.25), 1.0 / 3.0),
        (9, 1, 0, Some(0.9), Some(1.0), 18.0 / 19.0),
        (1, 3, 4, Some(0.25), Some(0.2), 2.0 * 0.25 * 0.2 / 0.45),
        (7, 3, 7, Some(0.7), Some(0.5), 2.0 * 0.7 * 0.5 / 1.2),
        (4, 4, 12, Some(0.5), Some(0.25), 1.0 / 3.0),
    ];
    for (tp, fp, fn_, p, r, f1) in hand {
        let mut counts = BTreeMap::new();
        counts.insert(RefactoringType::ExtractMethod, Counts { tp, fp, fn_ });
        let m = compute_metrics(&counts).total;
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() < 1e-9,
            _ => false,
        };
        assert!(
            close(m.precision, p) && close(m.recall, r) && (m.f1 - f1).abs() < 1e-9,
            "FAIL: metrics for TP={tp} FP={fp} FN={fn_}: got P={:?} R={:?} F1={}",
            m.precision,
            m.recall,
            m.f1
        );
    }
    println!("PASS: metrics match {} hand-computed vectors within 1e-9", hand.len());
}

#[test]
fn criterion_7_no_change_idempotence() {
    let corpus = load_corpus();
    let cfg = Config::default();
    for fix in &corpus {
        for set in [&fix.before, &fix.after] {
            let analysis = detect_commit(set, set, &cfg, "");
            assert!(
                analysis.instances().is_empty(),
                "FAIL: identical file sets of {} produced {:?}",
                fix.name,
                analysis.instances()
            );
            // the action level is silent too, not just the rule level
            for file in set.iter() {
                let (bt, at) = (
                    parse_module(file).unwrap(),
                    parse_module(file).unwrap(),
                );
                let mapping = match_trees(&bt, &at, &cfg);
                let script = generate_actions(&bt, &at, &mapping).unwrap();
                assert!(
                    script.is_empty(),
                    "FAIL: identical {} produced edit actions",
                    file.path
                );
            }
        }
    }
    println!("PASS: byte-identical file sets produce zero actions and zero refactorings corpus-wide");
}

#[test]
fn criterion_8_runtime_sanity() {
    let corpus = load_corpus();
    let cfg = Config::default();
    let mut times: Vec<u128> = Vec::new();
    for fix in &corpus {
        let t = Instant::now();
        let _ = detect_commit(&fix.before, &fix.after, &cfg, "");
        times.push(t.elapsed().as_millis());
    }
    times.sort();
    let median = times[times.len() / 2];
    assert!(
        median < 2000,
        "FAIL: median per-fixture-commit time {median} ms exceeds 2 s"
    );
    println!("PASS: median per-fixture-commit wall time {median} ms (< 2 s)");
}
