//! Property suites for the core invariants: matching is an injective,
//! kind-preserving partial map; edit scripts round-trip; grouping conserves
//! evidence; file pairing partitions its inputs; everything is deterministic.

use proptest::prelude::*;

use actref_core::action_refine::group_into_element_actions;
use actref_core::config::Config;
use actref_core::module_level::pair_files;
use actref_core::source_model::{parse_module, AstTree, SourceFile};
use actref_core::tree_diff::{apply_actions, generate_actions, match_trees, PlainTree};

// ---------------------------------------------------------------------------
// program generation

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "alpha", "beta", "gamma", "total", "count", "value", "items", "res",
    ])
    .prop_map(str::to_string)
}

fn expr() -> impl Strategy<Value = String> {
    prop_oneof![
        (ident(), 0u8..100).prop_map(|(n, k)| format!("{n} + {k}")),
        (ident(), ident()).prop_map(|(f, a)| format!("{f}({a})")),
        (0u8..10, 0u8..10).prop_map(|(a, b)| format!("[{a}, {b}]")),
        ident().prop_map(|n| format!("\"{n}\"")),
    ]
}

fn simple_stmt() -> impl Strategy<Value = String> {
    prop_oneof![
        (ident(), expr()).prop_map(|(v, e)| format!("{v} = {e}")),
        expr().prop_map(|e| format!("return {e}")),
        (ident(), expr()).prop_map(|(f, e)| format!("{f}({e})")),
    ]
}

fn stmt() -> impl Strategy<Value = Vec<String>> {
    prop_oneof![
        simple_stmt().prop_map(|s| vec![s]),
        (ident(), ident(), prop::collection::vec(simple_stmt(), 1..3)).prop_map(
            |(v, it, body)| {
                let mut lines = vec![format!("for {v} in {it}:")];
                lines.extend(body.into_iter().map(|s| format!("    {s}")));
                lines
            }
        ),
    ]
}

fn function() -> impl Strategy<Value = String> {
    (
        ident(),
        prop::bool::ANY,
        prop::collection::vec(stmt(), 1..5),
    )
        .prop_map(|(n, has_param, stmts)| {
            let params = if has_param { "x" } else { "" };
            let mut out = format!("def f_{n}({params}):\n");
            for lines in stmts {
                for l in lines {
                    out.push_str("    ");
                    out.push_str(&l);
                    out.push('\n');
                }
            }
            out.push('\n');
            out
        })
}

fn program() -> impl Strategy<Value = String> {
    prop::collection::vec(function(), 1..4).prop_map(|fs| fs.concat())
}

fn tree(src: &str) -> AstTree {
    parse_module(&SourceFile::new("p.py", src)).expect("generated program parses")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mapping_is_injective_and_kind_preserving(b in program(), a in program()) {
        let (bt, at) = (tree(&b), tree(&a));
        let mapping = match_trees(&bt, &at, &Config::default());
        let pairs = mapping.pairs();
        let mut seen_after = std::collections::HashSet::new();
        for (x, y) in &pairs {
            prop_assert!(seen_after.insert(*y), "after node mapped twice");
            prop_assert_eq!(bt.kind(*x), at.kind(*y), "kind not preserved");
        }
        // roots are always part of the mapping
        prop_assert!(pairs.iter().any(|(x, y)| *x == bt.root() && *y == at.root()));
    }

    #[test]
    fn edit_script_round_trips(b in program(), a in program()) {
        let (bt, at) = (tree(&b), tree(&a));
        let mapping = match_trees(&bt, &at, &Config::default());
        let script = generate_actions(&bt, &at, &mapping).unwrap();
        let rebuilt = apply_actions(&bt, &script).unwrap();
        prop_assert_eq!(rebuilt, PlainTree::of(&at, at.root()));
    }

    #[test]
    fn identical_programs_have_empty_scripts(p in program()) {
        let (bt, at) = (tree(&p), tree(&p));
        let mapping = match_trees(&bt, &at, &Config::default());
        let script = generate_actions(&bt, &at, &mapping).unwrap();
        prop_assert!(script.is_empty());
    }

    #[test]
    fn grouping_conserves_evidence(b in program(), a in program()) {
        let (bt, at) = (tree(&b), tree(&a));
        let mapping = match_trees(&bt, &at, &Config::default());
        let script = generate_actions(&bt, &at, &mapping).unwrap();
        let actions = group_into_element_actions(&script, &bt, &at, &mapping);
        // every fine-grained action lands in exactly one element action
        let total: usize = actions.iter().map(|g| g.evidence.len()).sum();
        prop_assert_eq!(total, script.len());
        for act in &script {
            let holders = actions.iter().filter(|g| g.evidence.contains(act)).count();
            prop_assert_eq!(holders, 1, "action held by {} element actions", holders);
        }
    }

    #[test]
    fn detection_is_deterministic(b in program(), a in program()) {
        let before = [SourceFile::new("p.py", b)];
        let after = [SourceFile::new("p.py", a)];
        let cfg = Config::default();
        let first = actref_core::pipeline::detect_commit(&before, &after, &cfg, "c");
        let second = actref_core::pipeline::detect_commit(&before, &after, &cfg, "c");
        prop_assert_eq!(first.instances(), second.instances());
    }

    #[test]
    fn file_pairing_partitions_inputs(
        bs in prop::collection::vec((ident(), program()), 0..4),
        as_ in prop::collection::vec((ident(), program()), 0..4),
    ) {
        // distinct paths on each side
        let mk = |v: Vec<(String, String)>| -> Vec<SourceFile> {
            v.into_iter()
                .enumerate()
                .map(|(i, (n, c))| SourceFile::new(format!("{n}_{i}.py"), c))
                .collect()
        };
        let before = mk(bs);
        let after = mk(as_);
        let p = pair_files(&before, &after, &Config::default(), "c");
        // files explained as whole-module extract/inline leave the unpaired
        // pools; they still have to be accounted for on their side
        use actref_core::rule_engine::RefactoringType;
        let count = |t: RefactoringType| {
            p.module_refactorings
                .iter()
                .filter(|r| r.refactoring_type == t)
                .count()
        };
        prop_assert_eq!(
            p.paired.len() + p.unpaired_deleted.len() + count(RefactoringType::InlineModule),
            before.len()
        );
        prop_assert_eq!(
            p.paired.len() + p.unpaired_inserted.len() + count(RefactoringType::ExtractModule),
            after.len()
        );
    }
}
