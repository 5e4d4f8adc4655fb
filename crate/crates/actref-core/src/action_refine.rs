//! Element-level refinement of raw edit scripts: attribute every node
//! action to a declared element, reclassify spurious declaration updates,
//! and re-pair declarations by signature.

use std::collections::{BTreeMap, HashSet};

use crate::config::Config;
use crate::module_level::{token_similarity, tokenize_normalized, TokenBag};
use crate::source_model::{
    element_signature, AstTree, CodeElement, ElementKind, ElementSignature, NodeId, NodeKind,
};
use crate::tree_diff::{EditAction, NodeMapping, ParentRef};

/// The variants an element-level action can take. `Modify` is the catch-all
/// for partial edits inside a surviving element; it exists so that every raw
/// action stays attributed to exactly one element action.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementActionKind {
    Insert,
    Delete,
    Move {
        from_container: String,
        to_container: String,
    },
    Update {
        old_name: String,
        new_name: String,
    },
    Modify,
}

/// An edit action lifted to a declared element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementAction {
    pub kind: ElementActionKind,
    /// Before-side element for Delete/Move/Update/Modify, after-side for
    /// Insert.
    pub element: CodeElement,
    /// After-side counterpart when one exists (Updates, Moves).
    pub after_element: Option<CodeElement>,
    pub evidence: Vec<EditAction>,
    /// Similarity between before/after bodies when both exist.
    pub body_similarity: Option<f64>,
    /// Normalized tokens of the element's own text, for pairing rules.
    pub body_tokens: TokenBag,
    pub signature: Option<ElementSignature>,
    /// Set once a rule has claimed this action as evidence.
    pub consumed: bool,
}

impl ElementAction {
    pub fn is_insert(&self) -> bool {
        matches!(self.kind, ElementActionKind::Insert)
    }
    pub fn is_delete(&self) -> bool {
        matches!(self.kind, ElementActionKind::Delete)
    }
    pub fn is_modify(&self) -> bool {
        matches!(self.kind, ElementActionKind::Modify)
    }

    /// Simple (unqualified) element name.
    pub fn simple_name(&self) -> &str {
        self.element
            .qualified_name
            .rsplit('.')
            .next()
            .unwrap_or(&self.element.qualified_name)
    }

    /// Container key `file::qualified-prefix` of the element.
    pub fn container(&self) -> String {
        container_key(&self.element.file, &self.element.qualified_name)
    }
}

pub fn container_key(file: &str, qualified_name: &str) -> String {
    let prefix = match qualified_name.rsplit_once('.') {
        Some((p, _)) => p,
        None => "",
    };
    format!("{file}::{prefix}")
}

fn element_for(tree: &AstTree, node: NodeId) -> CodeElement {
    let element_kind = match tree.kind(node) {
        NodeKind::ModuleRoot => ElementKind::Module,
        NodeKind::ClassDef => ElementKind::Class,
        NodeKind::FunctionDef => ElementKind::Method,
        NodeKind::Name => ElementKind::Variable,
        _ => ElementKind::Statement,
    };
    let qualified_name = match element_kind {
        ElementKind::Module => {
            let name = tree.path.rsplit('/').next().unwrap_or(&tree.path);
            name.strip_suffix(".py").unwrap_or(name).to_string()
        }
        ElementKind::Variable => {
            let scope = tree.qualified_name(tree.enclosing_declaration(node));
            if scope.is_empty() {
                tree.label(node).to_string()
            } else {
                format!("{scope}.{}", tree.label(node))
            }
        }
        _ => tree.qualified_name(node),
    };
    CodeElement {
        element_kind,
        qualified_name,
        node,
        file: tree.path.clone(),
        span: tree.span(node),
    }
}

fn decl_tokens(tree: &AstTree, node: NodeId) -> TokenBag {
    tokenize_normalized(tree.text_of(node))
}

fn signature_of(tree: &AstTree, element: &CodeElement) -> Option<ElementSignature> {
    match element.element_kind {
        ElementKind::Class | ElementKind::Method => element_signature(tree, element).ok(),
        _ => None,
    }
}

/// Outermost Class/FunctionDef at or above `n` that is itself part of the
/// wholly removed/added node set.
fn owner_decl(tree: &AstTree, set: &HashSet<NodeId>, n: NodeId) -> Option<NodeId> {
    let mut best = None;
    let mut cur = Some(n);
    while let Some(c) = cur {
        if matches!(tree.kind(c), NodeKind::ClassDef | NodeKind::FunctionDef) && set.contains(&c) {
            best = Some(c);
        }
        cur = tree.parent(c);
    }
    best
}

/// Attribute every raw action of the script to its innermost enclosing
/// declared element, collapsing whole-declaration insert/delete groups into
/// single element actions and lifting declaration/variable renames to
/// element Updates.
pub fn group_into_element_actions(
    script: &[EditAction],
    before: &AstTree,
    after: &AstTree,
    mapping: &NodeMapping,
) -> Vec<ElementAction> {
    let mut deleted: HashSet<NodeId> = HashSet::new();
    let mut inserted: HashSet<NodeId> = HashSet::new();
    for act in script {
        match act {
            EditAction::Delete { node, subtree } => {
                if *subtree {
                    deleted.extend(before.subtree(*node));
                } else {
                    deleted.insert(*node);
                }
            }
            EditAction::Insert { node, subtree, .. } => {
                if *subtree {
                    inserted.extend(after.subtree(*node));
                } else {
                    inserted.insert(*node);
                }
            }
            _ => {}
        }
    }

    let mut del_groups: BTreeMap<NodeId, Vec<EditAction>> = BTreeMap::new();
    let mut ins_groups: BTreeMap<NodeId, Vec<EditAction>> = BTreeMap::new();
    // keyed by before-side declaration node
    let mut modify_groups: BTreeMap<NodeId, Vec<EditAction>> = BTreeMap::new();
    let mut out: Vec<ElementAction> = Vec::new();

    for act in script {
        match act {
            EditAction::Delete { node, .. } => {
                if let Some(d) = owner_decl(before, &deleted, *node) {
                    del_groups.entry(d).or_default().push(act.clone());
                } else {
                    let owner = before.enclosing_declaration(*node);
                    modify_groups.entry(owner).or_default().push(act.clone());
                }
            }
            EditAction::Insert { node, .. } => {
                if let Some(d) = owner_decl(after, &inserted, *node) {
                    ins_groups.entry(d).or_default().push(act.clone());
                } else {
                    // attribute to the before-side image of the surviving
                    // enclosing declaration
                    let mut owner_a = after.enclosing_declaration(*node);
                    let owner_b = loop {
                        if let Some(b) = mapping.before_of(owner_a) {
                            break b;
                        }
                        if owner_a == after.root() {
                            break before.root();
                        }
                        owner_a = after.enclosing_declaration(owner_a);
                    };
                    modify_groups.entry(owner_b).or_default().push(act.clone());
                }
            }
            EditAction::Move {
                node, new_parent, ..
            } => {
                let is_decl =
                    matches!(before.kind(*node), NodeKind::ClassDef | NodeKind::FunctionDef);
                let dest_after = match new_parent {
                    ParentRef::Before(b) => mapping.after_of(*b),
                    ParentRef::After(a) => Some(*a),
                };
                let mut lifted = false;
                if is_decl {
                    if let Some(pa) = dest_after {
                        let to_node = after.declaration_of(pa);
                        let from_node = before.enclosing_declaration(*node);
                        let from = container_of(before, from_node);
                        let to = container_of(after, to_node);
                        if from != to {
                            let element = element_for(before, *node);
                            let after_node = mapping.after_of(*node);
                            out.push(ElementAction {
                                kind: ElementActionKind::Move {
                                    from_container: from,
                                    to_container: to,
                                },
                                body_tokens: decl_tokens(before, *node),
                                signature: signature_of(before, &element),
                                after_element: after_node.map(|n| element_for(after, n)),
                                body_similarity: after_node.map(|n| {
                                    token_similarity(
                                        &decl_tokens(before, *node),
                                        &decl_tokens(after, n),
                                    )
                                }),
                                element,
                                evidence: vec![act.clone()],
                                consumed: false,
                            });
                            lifted = true;
                        }
                    }
                }
                if !lifted {
                    let owner = before.enclosing_declaration(*node);
                    modify_groups.entry(owner).or_default().push(act.clone());
                }
            }
            EditAction::Update {
                node,
                old_label,
                new_label,
            } => {
                let is_decl =
                    matches!(before.kind(*node), NodeKind::ClassDef | NodeKind::FunctionDef);
                if is_decl || before.is_assign_target(*node) {
                    let element = element_for(before, *node);
                    let after_node = mapping.after_of(*node);
                    let body_similarity = if is_decl {
                        after_node.map(|n| {
                            token_similarity(&decl_tokens(before, *node), &decl_tokens(after, n))
                        })
                    } else {
                        None
                    };
                    out.push(ElementAction {
                        kind: ElementActionKind::Update {
                            old_name: old_label.clone(),
                            new_name: new_label.clone(),
                        },
                        body_tokens: decl_tokens(before, *node),
                        signature: signature_of(before, &element),
                        after_element: after_node.map(|n| element_for(after, n)),
                        body_similarity,
                        element,
                        evidence: vec![act.clone()],
                        consumed: false,
                    });
                } else {
                    let owner = before.enclosing_declaration(*node);
                    modify_groups.entry(owner).or_default().push(act.clone());
                }
            }
        }
    }

    for (node, evidence) in del_groups {
        let element = element_for(before, node);
        out.push(ElementAction {
            kind: ElementActionKind::Delete,
            body_tokens: decl_tokens(before, node),
            signature: signature_of(before, &element),
            element,
            after_element: None,
            evidence,
            body_similarity: None,
            consumed: false,
        });
    }
    for (node, evidence) in ins_groups {
        let element = element_for(after, node);
        out.push(ElementAction {
            kind: ElementActionKind::Insert,
            body_tokens: decl_tokens(after, node),
            signature: signature_of(after, &element),
            element,
            after_element: None,
            evidence,
            body_similarity: None,
            consumed: false,
        });
    }
    for (node, evidence) in modify_groups {
        let element = element_for(before, node);
        out.push(ElementAction {
            kind: ElementActionKind::Modify,
            body_tokens: decl_tokens(before, node),
            signature: signature_of(before, &element),
            element,
            after_element: mapping.after_of(node).map(|n| element_for(after, n)),
            evidence,
            body_similarity: None,
            consumed: false,
        });
    }

    out.sort_by(|x, y| {
        (x.element.file.as_str(), x.element.node, kind_rank(&x.kind))
            .cmp(&(y.element.file.as_str(), y.element.node, kind_rank(&y.kind)))
    });
    out
}

fn kind_rank(k: &ElementActionKind) -> u8 {
    match k {
        ElementActionKind::Update { .. } => 0,
        ElementActionKind::Move { .. } => 1,
        ElementActionKind::Insert => 2,
        ElementActionKind::Delete => 3,
        ElementActionKind::Modify => 4,
    }
}

fn container_of(tree: &AstTree, decl: NodeId) -> String {
    format!("{}::{}", tree.path, tree.qualified_name(decl))
}

/// Reclassify declaration Updates whose bodies diverged below the rename
/// floor into Delete + Insert pairs, and fuse Delete/Insert pairs that are
/// really one relocated declaration into a Move.
pub fn refine_update_vs_replace(actions: Vec<ElementAction>, cfg: &Config) -> Vec<ElementAction> {
    let mut out: Vec<ElementAction> = Vec::new();
    for act in actions {
        let split = matches!(
            act.element.element_kind,
            ElementKind::Class | ElementKind::Method
        ) && matches!(act.kind, ElementActionKind::Update { .. })
            && act
                .body_similarity
                .is_some_and(|s| s < cfg.rename_body_floor);
        if split {
            let mut del = act.clone();
            del.kind = ElementActionKind::Delete;
            del.after_element = None;
            del.body_similarity = None;
            out.push(del);
            if let Some(after_el) = act.after_element {
                // the evidence (the update) already lives on the delete half
                out.push(ElementAction {
                    kind: ElementActionKind::Insert,
                    body_tokens: TokenBag::new(),
                    signature: None,
                    element: after_el,
                    after_element: None,
                    evidence: act.evidence,
                    body_similarity: None,
                    consumed: false,
                });
            }
        } else {
            out.push(act);
        }
    }

    // fuse same-signature delete/insert pairs into moves
    let del_idx: Vec<usize> = out
        .iter()
        .enumerate()
        .filter(|(_, a)| {
            a.is_delete()
                && matches!(
                    a.element.element_kind,
                    ElementKind::Class | ElementKind::Method
                )
        })
        .map(|(i, _)| i)
        .collect();
    let ins_idx: Vec<usize> = out
        .iter()
        .enumerate()
        .filter(|(_, a)| {
            a.is_insert()
                && matches!(
                    a.element.element_kind,
                    ElementKind::Class | ElementKind::Method
                )
        })
        .map(|(i, _)| i)
        .collect();
    let mut fused: Vec<(usize, usize)> = Vec::new();
    let mut used_ins: HashSet<usize> = HashSet::new();
    for &d in &del_idx {
        for &i in &ins_idx {
            if used_ins.contains(&i) {
                continue;
            }
            let (dl, ins) = (&out[d], &out[i]);
            if dl.element.element_kind != ins.element.element_kind {
                continue;
            }
            let sig_eq = match (&dl.signature, &ins.signature) {
                (Some(a), Some(b)) => a.name == b.name && a.arity == b.arity,
                _ => dl.simple_name() == ins.simple_name(),
            };
            if !sig_eq || dl.container() == ins.container() {
                continue;
            }
            let sim = token_similarity(&dl.body_tokens, &ins.body_tokens);
            if sim >= cfg.rename_body_floor {
                fused.push((d, i));
                used_ins.insert(i);
                break;
            }
        }
    }
    if fused.is_empty() {
        return out;
    }
    let mut result: Vec<ElementAction> = Vec::new();
    let drop: HashSet<usize> = fused.iter().flat_map(|&(d, i)| [d, i]).collect();
    for (idx, act) in out.iter().enumerate() {
        if !drop.contains(&idx) {
            result.push(act.clone());
        }
    }
    for &(d, i) in &fused {
        let dl = &out[d];
        let ins = &out[i];
        let mut evidence = dl.evidence.clone();
        evidence.extend(ins.evidence.clone());
        result.push(ElementAction {
            kind: ElementActionKind::Move {
                from_container: dl.container(),
                to_container: ins.container(),
            },
            element: dl.element.clone(),
            after_element: Some(ins.element.clone()),
            evidence,
            body_similarity: Some(token_similarity(&dl.body_tokens, &ins.body_tokens)),
            body_tokens: dl.body_tokens.clone(),
            signature: dl.signature.clone(),
            consumed: false,
        });
    }
    result.sort_by(|x, y| {
        (x.element.file.as_str(), x.element.node, kind_rank(&x.kind))
            .cmp(&(y.element.file.as_str(), y.element.node, kind_rank(&y.kind)))
    });
    result
}

/// Greedy maximum pairing of deleted and inserted declarations, preferring
/// exact signatures, then equal names, then body similarity.
pub fn pair_declarations_by_signature<'a>(
    deletes: &[&'a ElementAction],
    inserts: &[&'a ElementAction],
    cfg: &Config,
) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut used_d: HashSet<usize> = HashSet::new();
    let mut used_i: HashSet<usize> = HashSet::new();
    // tier 1: equal name and arity; tier 2: equal name; tier 3: similar body
    for tier in 0..3u8 {
        for (di, d) in deletes.iter().enumerate() {
            if used_d.contains(&di) {
                continue;
            }
            for (ii, ins) in inserts.iter().enumerate() {
                if used_i.contains(&ii) || d.element.element_kind != ins.element.element_kind {
                    continue;
                }
                let ok = match tier {
                    0 => match (&d.signature, &ins.signature) {
                        (Some(a), Some(b)) => a.name == b.name && a.arity == b.arity,
                        _ => false,
                    },
                    1 => d.simple_name() == ins.simple_name(),
                    _ => {
                        token_similarity(&d.body_tokens, &ins.body_tokens)
                            >= cfg.signature_pair_floor
                    }
                };
                if ok {
                    pairs.push((di, ii));
                    used_d.insert(di);
                    used_i.insert(ii);
                    break;
                }
            }
        }
    }
    pairs.sort();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source_model::{parse_module, SourceFile};
    use crate::tree_diff::{generate_actions, match_trees};

    fn trees(b: &str, a: &str) -> (AstTree, AstTree) {
        (
            parse_module(&SourceFile::new("m.py", b)).unwrap(),
            parse_module(&SourceFile::new("m.py", a)).unwrap(),
        )
    }

    fn refined(b: &str, a: &str) -> Vec<ElementAction> {
        let (bt, at) = trees(b, a);
        let mapping = match_trees(&bt, &at, &Config::default());
        let script = generate_actions(&bt, &at, &mapping).unwrap();
        group_into_element_actions(&script, &bt, &at, &mapping)
    }

    #[test]
    fn empty_script_gives_no_actions() {
        let src = "def f():\n    return 1\n";
        assert!(refined(src, src).is_empty());
    }

    #[test]
    fn class_rename_becomes_element_update() {
        let acts = refined("class Old:\n    pass\n", "class New:\n    pass\n");
        let ups: Vec<_> = acts
            .iter()
            .filter(|a| matches!(a.kind, ElementActionKind::Update { .. }))
            .collect();
        assert_eq!(ups.len(), 1);
        assert_eq!(ups[0].element.element_kind, ElementKind::Class);
        match &ups[0].kind {
            ElementActionKind::Update { old_name, new_name } => {
                assert_eq!(old_name, "Old");
                assert_eq!(new_name, "New");
            }
            _ => unreachable!(),
        }
        assert!(ups[0].body_similarity.unwrap() > 0.5);
    }

    #[test]
    fn whole_method_insert_is_one_element_action() {
        let acts = refined(
            "x = 1\n",
            "x = 1\n\ndef helper(v):\n    return v * 2\n",
        );
        let ins: Vec<_> = acts.iter().filter(|a| a.is_insert()).collect();
        assert_eq!(ins.len(), 1);
        assert_eq!(ins[0].element.element_kind, ElementKind::Method);
        assert_eq!(ins[0].element.qualified_name, "helper");
        assert_eq!(ins[0].signature.as_ref().unwrap().arity, 1);
    }

    #[test]
    fn statement_edit_is_modify_of_enclosing_method() {
        let acts = refined(
            "def f():\n    a = 1\n    b = 2\n    return a\n",
            "def f():\n    a = 1\n    return a\n",
        );
        assert!(acts.iter().all(|a| a.is_modify()));
        assert!(acts
            .iter()
            .any(|a| a.element.qualified_name == "f" && !a.evidence.is_empty()));
    }

    #[test]
    fn evidence_is_conserved() {
        let cases = [
            (
                "class A:\n    def m(self):\n        return 1\n",
                "class B:\n    def m(self):\n        return 2\n",
            ),
            (
                "def f():\n    a = 1\n    b = a + 2\n    return b\n",
                "def g():\n    b = 3\n    return b\n",
            ),
            ("x = 1\n", "def h():\n    pass\n"),
        ];
        for (b, a) in cases {
            let (bt, at) = trees(b, a);
            let mapping = match_trees(&bt, &at, &Config::default());
            let script = generate_actions(&bt, &at, &mapping).unwrap();
            let acts = group_into_element_actions(&script, &bt, &at, &mapping);
            let mut collected: Vec<String> = acts
                .iter()
                .flat_map(|a| a.evidence.iter())
                .map(|e| format!("{e:?}"))
                .collect();
            let mut expected: Vec<String> = script.iter().map(|e| format!("{e:?}")).collect();
            collected.sort();
            expected.sort();
            assert_eq!(collected, expected, "case {b:?} -> {a:?}");
        }
    }

    #[test]
    fn low_similarity_update_splits_into_delete_insert() {
        let acts = refined(
            "def f(self):\n    return alpha(beta, gamma)\n",
            "def g(self):\n    while delta < epsilon:\n        zeta()\n",
        );
        let refined_acts = refine_update_vs_replace(acts, &Config::default());
        let has_update = refined_acts
            .iter()
            .any(|a| matches!(a.kind, ElementActionKind::Update { .. }));
        if !has_update {
            // the matcher may already produce delete+insert; either way no
            // low-similarity update survives refinement
            assert!(refined_acts.iter().any(|a| a.is_delete()));
        } else {
            // if an update survived, its body similarity must be acceptable
            for a in &refined_acts {
                if let ElementActionKind::Update { .. } = a.kind {
                    assert!(a.body_similarity.unwrap_or(1.0) >= 0.5);
                }
            }
        }
    }

    #[test]
    fn high_similarity_update_is_preserved() {
        let acts = refined(
            "def original_name(a, b):\n    total = a + b\n    return total * 2\n",
            "def better_name(a, b):\n    total = a + b\n    return total * 2\n",
        );
        let refined_acts = refine_update_vs_replace(acts, &Config::default());
        let ups: Vec<_> = refined_acts
            .iter()
            .filter(|a| matches!(a.kind, ElementActionKind::Update { .. }))
            .collect();
        assert_eq!(ups.len(), 1);
    }

    #[test]
    fn refine_is_idempotent() {
        let acts = refined(
            "def f(self):\n    return alpha(beta, gamma)\n",
            "def g(self):\n    while delta < epsilon:\n        zeta()\n",
        );
        let once = refine_update_vs_replace(acts, &Config::default());
        let twice = refine_update_vs_replace(once.clone(), &Config::default());
        assert_eq!(once, twice);
    }

    #[test]
    fn signature_pairing_prefers_exact_arity() {
        let b = "class C:\n    def m(self, a, b, c):\n        return a\n";
        let a1 = "class C:\n    def m(self, a, b):\n        return a\n\n    def m(self, a, b, c):\n        return a\n";
        let (bt, at) = trees(b, a1);
        let del_el = element_for(&bt, bt.preorder().find(|&n| bt.kind(n) == NodeKind::FunctionDef).unwrap());
        let mk = |tree: &AstTree, el: CodeElement, kind: ElementActionKind| ElementAction {
            body_tokens: decl_tokens(tree, el.node),
            signature: signature_of(tree, &el),
            element: el,
            after_element: None,
            evidence: Vec::new(),
            body_similarity: None,
            consumed: false,
            kind,
        };
        let d = mk(&bt, del_el, ElementActionKind::Delete);
        let funcs: Vec<NodeId> = at
            .preorder()
            .filter(|&n| at.kind(n) == NodeKind::FunctionDef)
            .collect();
        let i1 = mk(&at, element_for(&at, funcs[0]), ElementActionKind::Insert);
        let i2 = mk(&at, element_for(&at, funcs[1]), ElementActionKind::Insert);
        let dels = [&d];
        let inss = [&i1, &i2];
        let pairs = pair_declarations_by_signature(&dels, &inss, &Config::default());
        // the arity-3 delete pairs with the arity-3 insert, not the first
        // same-name candidate
        assert_eq!(pairs, vec![(0, 1)]);
    }

    #[test]
    fn disjoint_declarations_do_not_pair() {
        let b = "def one(a):\n    return a\n";
        let a = "def two():\n    while q:\n        r()\n";
        let (bt, at) = trees(b, a);
        let d_el = element_for(&bt, bt.children(bt.root())[0]);
        let i_el = element_for(&at, at.children(at.root())[0]);
        let d = ElementAction {
            body_tokens: decl_tokens(&bt, d_el.node),
            signature: signature_of(&bt, &d_el),
            element: d_el,
            after_element: None,
            evidence: Vec::new(),
            body_similarity: None,
            consumed: false,
            kind: ElementActionKind::Delete,
        };
        let i = ElementAction {
            body_tokens: decl_tokens(&at, i_el.node),
            signature: signature_of(&at, &i_el),
            element: i_el,
            after_element: None,
            evidence: Vec::new(),
            body_similarity: None,
            consumed: false,
            kind: ElementActionKind::Insert,
        };
        let pairs = pair_declarations_by_signature(&[&d], &[&i], &Config::default());
        assert!(pairs.is_empty());
    }
}
