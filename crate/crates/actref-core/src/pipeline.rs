//! Commit-level orchestration: module-level pairing, per-pair intra-file
//! detection, then cross-file detection over unpaired files and leftover
//! element actions.

use std::time::Instant;

use crate::action_refine::{
    group_into_element_actions, pair_declarations_by_signature, refine_update_vs_replace,
    ElementAction, ElementActionKind,
};
use crate::config::Config;
use crate::module_level::{
    pair_files, token_similarity, tokenize_normalized, FilePairing,
};
use crate::rule_engine::{
    apply_rules, ElementLocator, RefactoringInstance, RefactoringType, RuleCtx,
};
use crate::source_model::{
    element_signature, parse_module, extract_elements, CodeElement, ElementKind, SourceError, SourceFile,
};
use crate::tree_diff::{generate_actions, match_trees, EditAction};

/// Per-stage elapsed time in milliseconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTiming {
    pub module_ms: u64,
    pub intra_ms: u64,
    pub cross_ms: u64,
}

impl StageTiming {
    pub fn total_ms(&self) -> u64 {
        self.module_ms + self.intra_ms + self.cross_ms
    }
}

/// Everything the detector found for one commit.
#[derive(Debug, Clone)]
pub struct CommitAnalysis {
    pub commit: String,
    pub module: Vec<RefactoringInstance>,
    pub intra: Vec<RefactoringInstance>,
    pub cross: Vec<RefactoringInstance>,
    pub diagnostics: Vec<(String, String)>,
    pub timing: StageTiming,
}

impl CommitAnalysis {
    /// Combined result set, deduplicated on (type, before, after).
    pub fn instances(&self) -> Vec<RefactoringInstance> {
        let mut out: Vec<RefactoringInstance> = Vec::new();
        for inst in self
            .module
            .iter()
            .chain(self.intra.iter())
            .chain(self.cross.iter())
        {
            let dup = out.iter().any(|x| {
                x.refactoring_type == inst.refactoring_type
                    && x.before == inst.before
                    && x.after == inst.after
            });
            if !dup {
                out.push(inst.clone());
            }
        }
        out
    }
}

/// Detect refactorings within one paired file; returns instances plus the
/// unconsumed element Insert/Delete actions for the cross-file stage.
pub fn detect_intra_file(
    before_file: &SourceFile,
    after_file: &SourceFile,
    cfg: &Config,
    commit: &str,
) -> Result<(Vec<RefactoringInstance>, Vec<ElementAction>), SourceError> {
    if before_file.content_hash == after_file.content_hash {
        return Ok((Vec::new(), Vec::new()));
    }
    let before = parse_module(before_file)?;
    let after = parse_module(after_file)?;
    let mapping = match_trees(&before, &after, cfg);
    let script = generate_actions(&before, &after, &mapping)
        .expect("mapping was computed from these trees");
    let grouped = group_into_element_actions(&script, &before, &after, &mapping);
    let mut refined = refine_update_vs_replace(grouped, cfg);
    let ctx = RuleCtx {
        before: &before,
        after: &after,
        mapping: &mapping,
        cfg,
        commit,
    };
    let instances = apply_rules(&ctx, &mut refined);
    let remaining = refined
        .into_iter()
        .filter(|a| {
            !a.consumed
                && matches!(
                    a.kind,
                    ElementActionKind::Insert | ElementActionKind::Delete
                )
                && matches!(
                    a.element.element_kind,
                    ElementKind::Class | ElementKind::Method
                )
        })
        .collect();
    Ok((instances, remaining))
}

/// Build standalone element Insert/Delete actions from the top-level
/// declarations of an unpaired file.
fn file_slice_actions(
    file: &SourceFile,
    insert: bool,
    diagnostics: &mut Vec<(String, String)>,
) -> Vec<ElementAction> {
    let tree = match parse_module(file) {
        Ok(t) => t,
        Err(e) => {
            diagnostics.push((file.path.clone(), e.to_string()));
            return Vec::new();
        }
    };
    let mut out = Vec::new();
    for element in extract_elements(&tree, &file.path) {
        if !matches!(
            element.element_kind,
            ElementKind::Class | ElementKind::Method
        ) {
            continue;
        }
        // only top-level declarations become cross-file candidates; nested
        // ones travel with their container
        if tree.parent(element.node) != Some(tree.root()) {
            continue;
        }
        let evidence = vec![if insert {
            EditAction::Insert {
                node: element.node,
                parent: crate::tree_diff::ParentRef::After(tree.root()),
                position: tree.child_index(element.node),
                subtree: true,
                payload: crate::tree_diff::InsertPayload {
                    kind: tree.kind(element.node),
                    label: tree.label(element.node).to_string(),
                    children: Vec::new(),
                },
            }
        } else {
            EditAction::Delete {
                node: element.node,
                subtree: true,
            }
        }];
        let action = ElementAction {
            kind: if insert {
                ElementActionKind::Insert
            } else {
                ElementActionKind::Delete
            },
            body_tokens: tokenize_normalized(tree.text_of(element.node)),
            signature: element_signature(&tree, &element).ok(),
            element,
            after_element: None,
            evidence,
            body_similarity: None,
            consumed: false,
        };
        out.push(action);
    }
    out
}

/// Cross-file stage: match leftover deleted declarations against leftover
/// inserted declarations, including declarations from unpaired files.
pub fn detect_cross_file(
    unpaired_deleted: &[SourceFile],
    unpaired_inserted: &[SourceFile],
    remaining: Vec<ElementAction>,
    cfg: &Config,
    commit: &str,
    diagnostics: &mut Vec<(String, String)>,
) -> Vec<RefactoringInstance> {
    let mut dels: Vec<ElementAction> = Vec::new();
    let mut inss: Vec<ElementAction> = Vec::new();
    for a in remaining {
        match a.kind {
            ElementActionKind::Delete => dels.push(a),
            ElementActionKind::Insert => inss.push(a),
            _ => {}
        }
    }
    for f in unpaired_deleted {
        dels.extend(file_slice_actions(f, false, diagnostics));
    }
    for f in unpaired_inserted {
        inss.extend(file_slice_actions(f, true, diagnostics));
    }
    if dels.is_empty() || inss.is_empty() {
        return Vec::new();
    }

    let mut out = Vec::new();
    let mut used_d = vec![false; dels.len()];
    let mut used_i = vec![false; inss.len()];

    // candidate order: signature pairing first, then descending body
    // similarity, capped to bound quadratic blowup
    let dref: Vec<&ElementAction> = dels.iter().collect();
    let iref: Vec<&ElementAction> = inss.iter().collect();
    let sig_pairs = pair_declarations_by_signature(&dref, &iref, cfg);
    let mut candidates: Vec<(usize, usize)> = sig_pairs.clone();
    let mut extra: Vec<(f64, usize, usize)> = Vec::new();
    for (di, d) in dels.iter().enumerate() {
        for (ii, ins) in inss.iter().enumerate() {
            if sig_pairs.contains(&(di, ii)) || d.element.element_kind != ins.element.element_kind
            {
                continue;
            }
            let sim = token_similarity(&d.body_tokens, &ins.body_tokens);
            if sim >= cfg.move_floor {
                extra.push((sim, di, ii));
            }
        }
    }
    extra.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    candidates.extend(extra.into_iter().map(|(_, d, i)| (d, i)));
    candidates.truncate(cfg.cross_file_cap);

    for (di, ii) in candidates {
        if used_d[di] || used_i[ii] {
            continue;
        }
        let d = &dels[di];
        let ins = &inss[ii];
        let sim = token_similarity(&d.body_tokens, &ins.body_tokens);
        if d.simple_name() == ins.simple_name()
            && d.container() != ins.container()
            && sim >= cfg.move_floor
        {
            let t = match d.element.element_kind {
                ElementKind::Class => RefactoringType::MoveClass,
                _ => RefactoringType::MoveMethod,
            };
            used_d[di] = true;
            used_i[ii] = true;
            out.push(RefactoringInstance {
                refactoring_type: t,
                before: Some(loc_of(&d.element)),
                after: Some(loc_of(&ins.element)),
                description: format!(
                    "{t} {}: {} -> {}",
                    d.simple_name(),
                    d.element.file,
                    ins.element.file
                ),
                evidence: vec![format!("cross-file body similarity {sim:.4}")],
                commit: commit.to_string(),
            });
        }
    }

    // extract class across files: deleted methods absorbed by an inserted
    // class that is not fully explained
    for (ii, ins) in inss.iter().enumerate() {
        if used_i[ii] || ins.element.element_kind != ElementKind::Class {
            continue;
        }
        let mut members: Vec<usize> = Vec::new();
        for (di, d) in dels.iter().enumerate() {
            if used_d[di] || d.element.element_kind != ElementKind::Method {
                continue;
            }
            if body_absorbed(&d.body_tokens, ins, cfg) {
                members.push(di);
            }
        }
        if members.is_empty() {
            continue;
        }
        used_i[ii] = true;
        let source = loc_container(&dels[members[0]]);
        for &di in &members {
            used_d[di] = true;
        }
        out.push(RefactoringInstance {
            refactoring_type: RefactoringType::ExtractClass,
            before: Some(source),
            after: Some(loc_of(&ins.element)),
            description: format!(
                "Extract Class {} ({} member(s) received)",
                ins.element.qualified_name,
                members.len()
            ),
            evidence: vec![format!(
                "{} deleted method(s) reappear in the new class",
                members.len()
            )],
            commit: commit.to_string(),
        });
    }

    // mirror: inserted methods absorbed from a deleted class
    for (di, d) in dels.iter().enumerate() {
        if used_d[di] || d.element.element_kind != ElementKind::Class {
            continue;
        }
        let mut members: Vec<usize> = Vec::new();
        for (ii, ins) in inss.iter().enumerate() {
            if used_i[ii] || ins.element.element_kind != ElementKind::Method {
                continue;
            }
            if body_absorbed(&ins.body_tokens, d, cfg) {
                members.push(ii);
            }
        }
        if members.is_empty() {
            continue;
        }
        used_d[di] = true;
        let target = loc_container(&inss[members[0]]);
        for &ii in &members {
            used_i[ii] = true;
        }
        out.push(RefactoringInstance {
            refactoring_type: RefactoringType::InlineClass,
            before: Some(loc_of(&d.element)),
            after: Some(target),
            description: format!(
                "Inline Class {} ({} member(s) absorbed)",
                d.element.qualified_name,
                members.len()
            ),
            evidence: vec![format!(
                "{} method(s) of the deleted class reappear elsewhere",
                members.len()
            )],
            commit: commit.to_string(),
        });
    }

    out
}

fn loc_of(e: &CodeElement) -> ElementLocator {
    ElementLocator {
        file: e.file.clone(),
        qualified_name: e.qualified_name.clone(),
        span: Some(e.span),
    }
}

fn loc_container(a: &ElementAction) -> ElementLocator {
    let qn = match a.element.qualified_name.rsplit_once('.') {
        Some((p, _)) => p.to_string(),
        None => {
            let name = a.element.file.rsplit('/').next().unwrap_or(&a.element.file);
            name.strip_suffix(".py").unwrap_or(name).to_string()
        }
    };
    ElementLocator {
        file: a.element.file.clone(),
        qualified_name: qn,
        span: None,
    }
}

/// Does a body reappear inside the (usually larger) container element?
/// Measured as token containment: the share of the body's tokens present in
/// the container must reach the extract floor.
fn body_absorbed(
    body: &crate::module_level::TokenBag,
    container_action: &ElementAction,
    cfg: &Config,
) -> bool {
    let total: usize = body.values().sum();
    if total == 0 {
        return false;
    }
    let container = &container_action.body_tokens;
    let mut shared = 0usize;
    for (tok, &n) in body {
        shared += n.min(container.get(tok).copied().unwrap_or(0));
    }
    shared as f64 / total as f64 >= cfg.extract_floor
}

/// Run the full three-stage detection over one commit's file sets.
pub fn detect_commit(
    before_set: &[SourceFile],
    after_set: &[SourceFile],
    cfg: &Config,
    commit: &str,
) -> CommitAnalysis {
    let mut diagnostics: Vec<(String, String)> = Vec::new();
    let mut timing = StageTiming::default();

    let t0 = Instant::now();
    let pairing: FilePairing = pair_files(before_set, after_set, cfg, commit);
    timing.module_ms = t0.elapsed().as_millis() as u64;

    let t1 = Instant::now();
    let mut intra = Vec::new();
    let mut remaining: Vec<ElementAction> = Vec::new();
    for (b, a) in &pairing.paired {
        match detect_intra_file(b, a, cfg, commit) {
            Ok((instances, rem)) => {
                intra.extend(instances);
                remaining.extend(rem);
            }
            Err(e) => diagnostics.push((b.path.clone(), e.to_string())),
        }
    }
    timing.intra_ms = t1.elapsed().as_millis() as u64;

    let t2 = Instant::now();
    let cross = detect_cross_file(
        &pairing.unpaired_deleted,
        &pairing.unpaired_inserted,
        remaining,
        cfg,
        commit,
        &mut diagnostics,
    );
    timing.cross_ms = t2.elapsed().as_millis() as u64;

    CommitAnalysis {
        commit: commit.to_string(),
        module: pairing.module_refactorings,
        intra,
        cross,
        diagnostics,
        timing,
    }
}
