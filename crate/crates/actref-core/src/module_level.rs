//! Coarse-grained detection: pair files across a commit, detect Move/Rename
//! Module directly, and detect Extract/Inline Module via top-level code
//! slices. Unpaired files are handed to the cross-file stage.

use std::collections::BTreeMap;

use crate::config::Config;
use crate::rule_engine::{ElementLocator, RefactoringInstance, RefactoringType};
use crate::source_model::{parse_module, NodeKind, SourceError, SourceFile, Span};

/// Multiset of normalized lexical tokens.
pub type TokenBag = BTreeMap<String, usize>;

/// Lexical tokens of Python-like source with string/number literals collapsed
/// to `$STR`/`$NUM`, comments and whitespace removed, identifiers kept
/// verbatim and operator/punctuation characters grouped.
pub fn tokenize_normalized(text: &str) -> TokenBag {
    const OPS: &str = "+-*/%=<>!&|^~@";
    let mut bag = TokenBag::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let push = |bag: &mut TokenBag, tok: String| {
        *bag.entry(tok).or_default() += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == '\\' {
            i += 1;
        } else if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '"' || c == '\'' {
            i = skip_string(&chars, i);
            push(&mut bag, "$STR".to_string());
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            i = skip_number(&chars, i);
            push(&mut bag, "$NUM".to_string());
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            // string prefixes (r"", b'', f"", rb"") fold into the literal
            let is_prefix = word.len() <= 2
                && word.chars().all(|p| "rbufRBUF".contains(p))
                && matches!(chars.get(i), Some('"') | Some('\''));
            if is_prefix {
                i = skip_string(&chars, i);
                push(&mut bag, "$STR".to_string());
            } else {
                push(&mut bag, word);
            }
        } else if OPS.contains(c) {
            let start = i;
            while i < chars.len() && OPS.contains(chars[i]) {
                i += 1;
            }
            push(&mut bag, chars[start..i].iter().collect());
        } else {
            push(&mut bag, c.to_string());
            i += 1;
        }
    }
    bag
}

fn skip_string(chars: &[char], mut i: usize) -> usize {
    let quote = chars[i];
    let triple = chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote);
    i += if triple { 3 } else { 1 };
    while i < chars.len() {
        if chars[i] == '\\' {
            i += 2;
            continue;
        }
        if chars[i] == quote {
            if !triple {
                return i + 1;
            }
            if chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote) {
                return i + 3;
            }
        }
        i += 1;
    }
    i
}

fn skip_number(chars: &[char], mut i: usize) -> usize {
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() || c == '_' || c == '.' {
            i += 1;
        } else if (c == '+' || c == '-')
            && matches!(chars.get(i.wrapping_sub(1)), Some('e') | Some('E'))
        {
            i += 1;
        } else {
            break;
        }
    }
    i
}

pub fn bag_len(bag: &TokenBag) -> usize {
    bag.values().sum()
}

/// Dice coefficient over token multisets; two empty bags count as identical.
pub fn token_similarity(a: &TokenBag, b: &TokenBag) -> f64 {
    let na = bag_len(a);
    let nb = bag_len(b);
    if na == 0 && nb == 0 {
        return 1.0;
    }
    let mut shared = 0usize;
    for (tok, &ca) in a {
        shared += ca.min(b.get(tok).copied().unwrap_or(0));
    }
    2.0 * shared as f64 / (na + nb) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceKind {
    Class,
    Method,
    StatementRun,
}

/// A top-level unit of a file: one class, one function, or a maximal run of
/// consecutive other statements.
#[derive(Debug, Clone)]
pub struct CodeSlice {
    pub file: String,
    pub kind: SliceKind,
    /// Declaration name; empty for statement runs.
    pub name: String,
    pub text: String,
    pub tokens: TokenBag,
    pub span: Span,
}

/// Split a file into non-overlapping top-level slices in source order.
pub fn slices_of(file: &SourceFile) -> Result<Vec<CodeSlice>, SourceError> {
    let tree = parse_module(file)?;
    let mut out = Vec::new();
    let root = tree.root();
    let mut run: Vec<crate::source_model::NodeId> = Vec::new();
    let flush = |run: &mut Vec<crate::source_model::NodeId>, out: &mut Vec<CodeSlice>| {
        if run.is_empty() {
            return;
        }
        let first = run[0];
        let last = *run.last().unwrap();
        let (start, _) = tree.node(first).byte_range;
        let (_, end) = tree.node(last).byte_range;
        let text = tree.source()[start..end].to_string();
        out.push(CodeSlice {
            file: file.path.clone(),
            kind: SliceKind::StatementRun,
            name: String::new(),
            tokens: tokenize_normalized(&text),
            text,
            span: Span {
                start: tree.span(first).start,
                end: tree.span(last).end,
            },
        });
        run.clear();
    };
    for &c in tree.children(root) {
        match tree.kind(c) {
            NodeKind::ClassDef | NodeKind::FunctionDef => {
                flush(&mut run, &mut out);
                let text = tree.text_of(c).to_string();
                out.push(CodeSlice {
                    file: file.path.clone(),
                    kind: if tree.kind(c) == NodeKind::ClassDef {
                        SliceKind::Class
                    } else {
                        SliceKind::Method
                    },
                    name: tree.label(c).to_string(),
                    tokens: tokenize_normalized(&text),
                    text,
                    span: tree.span(c),
                });
            }
            _ => run.push(c),
        }
    }
    flush(&mut run, &mut out);
    Ok(out)
}

/// True when the slice has a counterpart slice (similarity at or above
/// `floor`) in some file of the opposite commit side, and that counterpart
/// is absent from its own file's other version — i.e. the code physically
/// moved rather than being duplicated.
pub fn is_move_slice(
    slice: &CodeSlice,
    counterparts: &[(&SourceFile, Option<&SourceFile>)],
    floor: f64,
) -> bool {
    for (cf, opposite) in counterparts {
        let Ok(cslices) = slices_of(cf) else { continue };
        for cs in &cslices {
            if token_similarity(&slice.tokens, &cs.tokens) < floor {
                continue;
            }
            let absent = match opposite {
                None => true,
                Some(of) => match slices_of(of) {
                    Ok(os) => !os
                        .iter()
                        .any(|o| token_similarity(&cs.tokens, &o.tokens) >= floor),
                    Err(_) => true,
                },
            };
            if absent {
                return true;
            }
        }
    }
    false
}

/// Outcome of the module-level stage.
#[derive(Debug, Clone, Default)]
pub struct FilePairing {
    pub paired: Vec<(SourceFile, SourceFile)>,
    pub unpaired_deleted: Vec<SourceFile>,
    pub unpaired_inserted: Vec<SourceFile>,
    pub module_refactorings: Vec<RefactoringInstance>,
}

fn module_locator(file: &SourceFile) -> ElementLocator {
    let name = file
        .name
        .strip_suffix(".py")
        .unwrap_or(&file.name)
        .to_string();
    ElementLocator {
        file: file.path.clone(),
        qualified_name: name,
        span: None,
    }
}

/// Pair before- and after-files, recording Move/Rename Module for relocated
/// or renamed files and Extract/Inline Module for files fully explained by
/// moved slices.
pub fn pair_files(
    before_set: &[SourceFile],
    after_set: &[SourceFile],
    cfg: &Config,
    commit: &str,
) -> FilePairing {
    let mut used_b = vec![false; before_set.len()];
    let mut used_a = vec![false; after_set.len()];
    let mut pairing = FilePairing::default();

    // phase 1: identical paths
    for (bi, b) in before_set.iter().enumerate() {
        for (ai, a) in after_set.iter().enumerate() {
            if !used_a[ai] && a.path == b.path {
                used_b[bi] = true;
                used_a[ai] = true;
                pairing.paired.push((b.clone(), a.clone()));
                break;
            }
        }
    }

    // phase 2: content-similar cross pairs, most similar first
    let tokens_b: Vec<Option<TokenBag>> = before_set
        .iter()
        .enumerate()
        .map(|(i, f)| (!used_b[i]).then(|| tokenize_normalized(&f.content)))
        .collect();
    let tokens_a: Vec<Option<TokenBag>> = after_set
        .iter()
        .enumerate()
        .map(|(i, f)| (!used_a[i]).then(|| tokenize_normalized(&f.content)))
        .collect();
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (bi, tb) in tokens_b.iter().enumerate() {
        let Some(tb) = tb else { continue };
        for (ai, ta) in tokens_a.iter().enumerate() {
            let Some(ta) = ta else { continue };
            let sim = token_similarity(tb, ta);
            if sim >= cfg.file_pair_floor {
                cands.push((sim, bi, ai));
            }
        }
    }
    cands.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap()
            .then_with(|| before_set[x.1].path.cmp(&before_set[y.1].path))
            .then_with(|| after_set[x.2].path.cmp(&after_set[y.2].path))
    });
    for (sim, bi, ai) in cands {
        if used_b[bi] || used_a[ai] {
            continue;
        }
        used_b[bi] = true;
        used_a[ai] = true;
        let b = &before_set[bi];
        let a = &after_set[ai];
        // same directory, new name: rename; anywhere else: move (a file both
        // renamed and relocated reports a single move)
        let rtype = if b.dir() == a.dir() {
            RefactoringType::RenameModule
        } else {
            RefactoringType::MoveModule
        };
        pairing.module_refactorings.push(RefactoringInstance {
            refactoring_type: rtype,
            before: Some(module_locator(b)),
            after: Some(module_locator(a)),
            description: format!("{} {} -> {}", rtype, b.path, a.path),
            evidence: vec![format!("file content similarity {sim:.4}")],
            commit: commit.to_string(),
        });
        pairing.paired.push((b.clone(), a.clone()));
    }

    // phase 3: leftovers
    for (bi, b) in before_set.iter().enumerate() {
        if !used_b[bi] {
            pairing.unpaired_deleted.push(b.clone());
        }
    }
    for (ai, a) in after_set.iter().enumerate() {
        if !used_a[ai] {
            pairing.unpaired_inserted.push(a.clone());
        }
    }

    // phase 4: extract/inline module over unpaired files whose slices all
    // moved from (resp. to) the opposite side
    let after_by_path: BTreeMap<&str, &SourceFile> =
        after_set.iter().map(|f| (f.path.as_str(), f)).collect();
    let before_by_path: BTreeMap<&str, &SourceFile> =
        before_set.iter().map(|f| (f.path.as_str(), f)).collect();
    let paired_a_of_b: BTreeMap<&str, &str> = pairing
        .paired
        .iter()
        .map(|(b, a)| (b.path.as_str(), a.path.as_str()))
        .collect();
    let paired_b_of_a: BTreeMap<&str, &str> = pairing
        .paired
        .iter()
        .map(|(b, a)| (a.path.as_str(), b.path.as_str()))
        .collect();

    let mut still_inserted = Vec::new();
    for f in std::mem::take(&mut pairing.unpaired_inserted) {
        let counterparts: Vec<(&SourceFile, Option<&SourceFile>)> = before_set
            .iter()
            .map(|b| {
                let opp_path = paired_a_of_b
                    .get(b.path.as_str())
                    .copied()
                    .unwrap_or(b.path.as_str());
                (b, after_by_path.get(opp_path).copied())
            })
            .collect();
        let explained = match slices_of(&f) {
            Ok(slices) if !slices.is_empty() => slices
                .iter()
                .all(|s| is_move_slice(s, &counterparts, cfg.slice_move_floor)),
            _ => false,
        };
        if explained {
            pairing.module_refactorings.push(RefactoringInstance {
                refactoring_type: RefactoringType::ExtractModule,
                before: None,
                after: Some(module_locator(&f)),
                description: format!("Extract Module {}", f.path),
                evidence: vec!["every slice moved from an existing module".to_string()],
                commit: commit.to_string(),
            });
        } else {
            still_inserted.push(f);
        }
    }
    pairing.unpaired_inserted = still_inserted;

    let mut still_deleted = Vec::new();
    for f in std::mem::take(&mut pairing.unpaired_deleted) {
        let counterparts: Vec<(&SourceFile, Option<&SourceFile>)> = after_set
            .iter()
            .map(|a| {
                let opp_path = paired_b_of_a
                    .get(a.path.as_str())
                    .copied()
                    .unwrap_or(a.path.as_str());
                (a, before_by_path.get(opp_path).copied())
            })
            .collect();
        let explained = match slices_of(&f) {
            Ok(slices) if !slices.is_empty() => slices
                .iter()
                .all(|s| is_move_slice(s, &counterparts, cfg.slice_move_floor)),
            _ => false,
        };
        if explained {
            pairing.module_refactorings.push(RefactoringInstance {
                refactoring_type: RefactoringType::InlineModule,
                before: Some(module_locator(&f)),
                after: None,
                description: format!("Inline Module {}", f.path),
                evidence: vec!["every slice moved into an existing module".to_string()],
                commit: commit.to_string(),
            });
        } else {
            still_deleted.push(f);
        }
    }
    pairing.unpaired_deleted = still_deleted;

    pairing
}
